import json
import re
from concurrent.futures import ThreadPoolExecutor

import pytest

from paragent.graph import ToolCall
from paragent.llm import ParamSpec, ToolSchema
from paragent.tools import (DuplicateTool, FilesystemError, FixturePdbSource,
                            FixtureSearchBackend, ToolDef, ToolRegistry, ToolResult,
                            fetch_structure, make_fetch_structure_tool, make_run_dir,
                            make_search_tool)


def echo_tool():
    schema = ToolSchema("echo", "repeat text",
                        parameters={"text": ParamSpec("string", required=True)})
    return ToolDef(schema, lambda args: ToolResult(status="ok",
                                                   content=f"echo: {args['text']}"))


def boom_tool():
    schema = ToolSchema("boom", "always raises", parameters={})
    def behavior(args):
        raise RuntimeError("kaboom")
    return ToolDef(schema, behavior)


class TestRegistry:
    def test_register_one(self):
        registry = ToolRegistry().register(echo_tool())
        assert len(registry) == 1
        assert registry.lookup("echo") is not None

    def test_register_two(self):
        registry = ToolRegistry().register(echo_tool()).register(boom_tool())
        assert len(registry) == 2

    def test_duplicate(self):
        registry = ToolRegistry().register(echo_tool())
        with pytest.raises(DuplicateTool):
            registry.register(echo_tool())

    def test_unknown_lookup_fails_closed(self):
        assert ToolRegistry().lookup("ghost") is None


class TestValidateAndInvoke:
    def test_valid_call(self):
        registry = ToolRegistry().register(echo_tool())
        result = registry.validate_and_invoke(
            ToolCall(id="c1", name="echo", arguments={"text": "hi"}))
        assert result.ok
        assert result.tool_call_id == "c1"
        assert result.content == "echo: hi"

    def test_missing_required_field_named(self):
        registry = ToolRegistry().register(echo_tool())
        result = registry.validate_and_invoke(ToolCall(id="c2", name="echo", arguments={}))
        assert result.status == "error"
        assert "text" in result.content
        assert result.tool_call_id == "c2"

    def test_unknown_tool(self):
        registry = ToolRegistry()
        result = registry.validate_and_invoke(ToolCall(id="c3", name="no_such_tool",
                                                       arguments={}))
        assert result.status == "error"
        assert "unknown tool" in result.content

    def test_wrong_type_reported(self):
        registry = ToolRegistry().register(echo_tool())
        result = registry.validate_and_invoke(
            ToolCall(id="c4", name="echo", arguments={"text": 42}))
        assert result.status == "error"
        assert "text" in result.content

    def test_behavior_exception_becomes_error_result(self):
        registry = ToolRegistry().register(boom_tool())
        result = registry.validate_and_invoke(ToolCall(id="c5", name="boom", arguments={}))
        assert result.status == "error"
        assert "kaboom" in result.content

    def test_missing_artifact_downgrades_to_error(self, tmp_path):
        schema = ToolSchema("ghostly", "claims artifacts", parameters={})
        tool = ToolDef(schema, lambda args: ToolResult(
            status="ok", content="done", artifacts=[str(tmp_path / "never_written.txt")]))
        registry = ToolRegistry().register(tool)
        result = registry.validate_and_invoke(ToolCall(id="c6", name="ghostly", arguments={}))
        assert result.status == "error"
        assert "missing artifacts" in result.content


class TestFetchStructure:
    def test_fixture_download_2kkj(self, tmp_path, bundled_structures):
        source = FixturePdbSource(bundled_structures)
        result = fetch_structure("2KKJ", tmp_path, source)
        assert result.ok
        saved = tmp_path / "2KKJ.pdb"
        assert saved.is_file() and saved.stat().st_size > 0
        assert str(saved.resolve()) in result.content
        assert result.artifacts == [str(saved.resolve())]
        first = saved.read_text().splitlines()[0]
        assert first[:6].strip() == "HEADER"

    def test_fixture_download_1kbh(self, tmp_path, bundled_structures):
        result = fetch_structure("1KBH", tmp_path, FixturePdbSource(bundled_structures))
        assert result.ok

    def test_missing_id(self, tmp_path, bundled_structures):
        result = fetch_structure("ZZZZ", tmp_path, FixturePdbSource(bundled_structures))
        assert result.status == "error"
        assert "ZZZZ" in result.content

    @pytest.mark.parametrize("bad_id", ["XKCD", "AB", "", "12345", "2kk j"])
    def test_invalid_id_shape(self, tmp_path, bundled_structures, bad_id):
        result = fetch_structure(bad_id, tmp_path, FixturePdbSource(bundled_structures))
        assert result.status == "error"

    def test_lowercase_id_normalized(self, tmp_path, bundled_structures):
        result = fetch_structure("2kkj", tmp_path, FixturePdbSource(bundled_structures))
        assert result.ok
        assert (tmp_path / "2KKJ.pdb").is_file()

    def test_non_pdb_payload_rejected(self, tmp_path):
        bogus = tmp_path / "corpus"
        bogus.mkdir()
        (bogus / "1AAA.pdb").write_text("<html>not a structure</html>\n")
        result = fetch_structure("1AAA", tmp_path, FixturePdbSource(bogus))
        assert result.status == "error"

    def test_tool_wrapper(self, tmp_path, bundled_structures):
        tool = make_fetch_structure_tool(FixturePdbSource(bundled_structures),
                                         tmp_path / "downloads")
        registry = ToolRegistry().register(tool)
        result = registry.validate_and_invoke(
            ToolCall(id="c1", name="fetch_structure", arguments={"pdb_id": "2KKJ"}))
        assert result.ok
        assert (tmp_path / "downloads" / "2KKJ.pdb").is_file()


class TestSearch:
    def test_ncbd_query_top5_names_1kbh(self, bundled_corpus):
        backend = FixtureSearchBackend(bundled_corpus)
        results = backend.search("NCBD ACTR complex structure", 5)
        assert len(results) == 5
        assert any("1KBH" in r.snippet for r in results)

    def test_lysozyme_query_top10_covers_all_entries(self, bundled_corpus):
        backend = FixtureSearchBackend(bundled_corpus)
        results = backend.search("lysozyme crystal structure PDB", 10)
        assert len(results) == 10
        joined = " ".join(r.snippet for r in results)
        for i in range(1, 9):
            assert f"{i}LYZ" in joined

    def test_empty_corpus(self, tmp_path):
        backend = FixtureSearchBackend(tmp_path / "nothing")
        assert backend.search("anything at all", 5) == []

    def test_k_larger_than_matches(self, bundled_corpus):
        backend = FixtureSearchBackend(bundled_corpus)
        results = backend.search("endothiapepsin fragment", 50)
        assert 0 < len(results) < 50

    def test_tie_break_is_lexicographic_by_title(self, tmp_path):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        for title in ["zeta entry", "alpha entry", "mid entry"]:
            (corpus / f"{title.split()[0]}.json").write_text(json.dumps({
                "keywords": ["shared", "token"], "title": title,
                "snippet": "s", "url": "u"}))
        backend = FixtureSearchBackend(corpus)
        results = backend.search("shared token", 3)
        assert [r.title for r in results] == ["alpha entry", "mid entry", "zeta entry"]

    def test_search_tool_formats_results(self, bundled_corpus):
        tool = make_search_tool(FixtureSearchBackend(bundled_corpus), k=5)
        registry = ToolRegistry().register(tool)
        result = registry.validate_and_invoke(ToolCall(
            id="c1", name="search", arguments={"query": "NCBD ACTR complex structure"}))
        assert result.ok
        assert result.content.startswith("search results for")
        assert "1KBH" in result.content

    def test_backend_failure_becomes_error_result(self):
        class Unavailable:
            def search(self, query, k):
                raise RuntimeError("backend down")

        registry = ToolRegistry().register(make_search_tool(Unavailable(), k=3))
        result = registry.validate_and_invoke(
            ToolCall(id="c1", name="search", arguments={"query": "x"}))
        assert result.status == "error"
        assert "backend down" in result.content


class TestMakeRunDir:
    def test_single_call(self, tmp_path):
        path = make_run_dir(tmp_path)
        assert path.is_dir()
        assert list(path.iterdir()) == []
        assert re.fullmatch(r"\d{8}T\d{6}Z_[0-9a-f]{32}", path.name)

    def test_missing_base(self, tmp_path):
        with pytest.raises(FilesystemError):
            make_run_dir(tmp_path / "not_there")

    def test_hundred_concurrent_calls_are_distinct(self, tmp_path):
        with ThreadPoolExecutor(max_workers=100) as pool:
            paths = list(pool.map(lambda _: make_run_dir(tmp_path), range(100)))
        assert len({str(p) for p in paths}) == 100
        assert all(p.is_dir() for p in paths)
