"""Tool registry and the non-simulation tools.

Covers structure download (fixture directory or live HTTP), web search
(fixture corpus scored by keyword overlap, or a live JSON endpoint) and
race-free run-directory creation. Tool invocation never raises into the
workflow: every failure becomes an error-status ToolResult.
"""
from __future__ import annotations

import json
import re
import secrets
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import requests

from .graph import ToolCall
from .llm import ParamSpec, ToolSchema, check_arguments


class DuplicateTool(Exception):
    pass


class FilesystemError(Exception):
    pass


class StructureNotFound(Exception):
    pass


class StructureFetchFailed(Exception):
    pass


class SearchBackendUnavailable(Exception):
    pass


@dataclass
class ToolResult:
    """Outcome of one tool invocation, correlated to its call by id."""

    tool_call_id: str = ""
    status: str = "ok"  # ok | error
    content: str = ""
    artifacts: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass
class ToolDef:
    """A schema plus the behavior it binds.

    execution_class marks where the work belongs: "parallel" tools are worth
    shipping to executor workers, "inline" ones run wherever they are called.
    """

    schema: ToolSchema
    behavior: Callable[[dict], ToolResult]
    execution_class: str = "parallel"


@dataclass
class SearchResult:
    title: str
    snippet: str
    url: str


class ToolRegistry:
    """Name -> ToolDef mapping, immutable once the workflow is built."""

    def __init__(self):
        self._defs: dict[str, ToolDef] = {}

    def __len__(self) -> int:
        return len(self._defs)

    def register(self, tool: ToolDef) -> "ToolRegistry":
        name = tool.schema.name
        if name in self._defs:
            raise DuplicateTool(f"tool {name!r} already registered")
        self._defs[name] = tool
        return self

    def lookup(self, name: str) -> Optional[ToolDef]:
        return self._defs.get(name)

    def schemas(self, names: Optional[list[str]] = None) -> list[ToolSchema]:
        if names is None:
            return [t.schema for t in self._defs.values()]
        return [self._defs[n].schema for n in names]

    def validate_and_invoke(self, call: ToolCall) -> ToolResult:
        """Validate a call against its schema and run it; all failures map
        to an error-status result carrying the originating call id."""
        tool = self._defs.get(call.name)
        if tool is None:
            return ToolResult(call.id, "error", f"unknown tool: {call.name}")
        problems = check_arguments(tool.schema, call.arguments)
        if problems:
            return ToolResult(call.id, "error", f"{call.name}: " + "; ".join(problems))
        try:
            result = tool.behavior(dict(call.arguments))
        except Exception as exc:
            return ToolResult(call.id, "error", f"{call.name} failed: {exc}")
        if result.ok:
            missing = [a for a in result.artifacts if not Path(a).exists()]
            if missing:
                return ToolResult(call.id, "error",
                                  f"{call.name} reported missing artifacts: {', '.join(missing)}")
        return replace(result, tool_call_id=call.id)


# ---------------------------------------------------------------------------
# Structure download

PDB_ID_RE = re.compile(r"^[0-9][A-Za-z0-9]{3}$")

# Record tags that may legitimately open a PDB file.
PDB_RECORD_TAGS = {
    "HEADER", "TITLE", "COMPND", "SOURCE", "KEYWDS", "EXPDTA", "AUTHOR",
    "REMARK", "SEQRES", "CRYST1", "MODEL", "ATOM", "HETATM", "TER", "HELIX",
    "SHEET", "DBREF", "ORIGX1", "SCALE1",
}


class FixturePdbSource:
    """Serves {ID}.pdb files from a local fixture directory."""

    def __init__(self, root):
        self.root = Path(root)

    def fetch(self, pdb_id: str) -> str:
        path = self.root / f"{pdb_id.upper()}.pdb"
        if not path.is_file():
            raise StructureNotFound(f"no fixture structure for {pdb_id.upper()}")
        return path.read_text(encoding="utf-8")


class HttpPdbSource:
    """Downloads structures from an RCSB-style file server."""

    def __init__(self, base_url: str = "https://files.rcsb.org/download", timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def fetch(self, pdb_id: str) -> str:
        url = f"{self.base_url}/{pdb_id.upper()}.pdb"
        try:
            resp = requests.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise StructureFetchFailed(f"GET {url} failed: {exc}") from exc
        if resp.status_code == 404:
            raise StructureNotFound(f"{pdb_id.upper()} not found at {url}")
        if resp.status_code != 200:
            raise StructureFetchFailed(f"GET {url} returned {resp.status_code}")
        return resp.text


def fetch_structure(pdb_id: str, dest_dir, source) -> ToolResult:
    """Download one structure into dest_dir/{ID}.pdb and report its absolute path.

    Downstream tools need the absolute path, so it is embedded in the result
    content verbatim.
    """
    if not isinstance(pdb_id, str) or not PDB_ID_RE.match(pdb_id):
        return ToolResult(status="error", content=f"invalid PDB id: {pdb_id!r}")
    pdb_id = pdb_id.upper()
    try:
        text = source.fetch(pdb_id)
    except (StructureNotFound, StructureFetchFailed) as exc:
        return ToolResult(status="error", content=str(exc))
    first = next((line for line in text.splitlines() if line.strip()), "")
    if first[:6].strip() not in PDB_RECORD_TAGS:
        return ToolResult(status="error",
                          content=f"{pdb_id}: payload does not look like a PDB file")
    dest = Path(dest_dir)
    try:
        dest.mkdir(parents=True, exist_ok=True)
        path = (dest / f"{pdb_id}.pdb").resolve()
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        return ToolResult(status="error", content=f"could not write {pdb_id}.pdb: {exc}")
    return ToolResult(status="ok", content=f"downloaded {pdb_id} to {path}", artifacts=[str(path)])


def make_fetch_structure_tool(source, default_dest_dir) -> ToolDef:
    schema = ToolSchema(
        name="fetch_structure",
        description="Download a protein structure by its 4-character PDB id and "
                    "return the absolute path of the saved .pdb file.",
        parameters={
            "pdb_id": ParamSpec("string", "4-character PDB identifier, e.g. 2KKJ", required=True),
            "dest_dir": ParamSpec("string", "directory to save the file into"),
        },
    )

    def behavior(args: dict) -> ToolResult:
        return fetch_structure(args["pdb_id"], args.get("dest_dir", str(default_dest_dir)), source)

    return ToolDef(schema=schema, behavior=behavior, execution_class="parallel")


# ---------------------------------------------------------------------------
# Web search

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _tokenize(text: str) -> set[str]:
    return set(_TOKEN_RE.findall(text.lower()))


class FixtureSearchBackend:
    """Offline corpus of JSON documents scored by query-token overlap.

    Each document is {"keywords": [...], "title": ..., "snippet": ..., "url": ...}.
    Score = |query tokens ∩ keywords|; ties break lexicographically by title.
    """

    def __init__(self, corpus_dir):
        self.docs = []
        root = Path(corpus_dir)
        if root.is_dir():
            for path in sorted(root.glob("*.json")):
                doc = json.loads(path.read_text(encoding="utf-8"))
                doc["_keywords"] = {str(k).lower() for k in doc.get("keywords", [])}
                self.docs.append(doc)

    def search(self, query: str, k: int) -> list[SearchResult]:
        tokens = _tokenize(query)
        scored = []
        for doc in self.docs:
            score = len(tokens & doc["_keywords"])
            if score > 0:
                scored.append((-score, doc.get("title", ""), doc))
        scored.sort(key=lambda item: (item[0], item[1]))
        return [
            SearchResult(title=doc.get("title", ""), snippet=doc.get("snippet", ""),
                         url=doc.get("url", ""))
            for _, _, doc in scored[:k]
        ]


class HttpSearchBackend:
    """Minimal client for a Tavily-style JSON search endpoint."""

    def __init__(self, base_url: str, api_key: Optional[str] = None, timeout: float = 30.0):
        self.base_url = base_url
        self.api_key = api_key
        self.timeout = timeout

    def search(self, query: str, k: int) -> list[SearchResult]:
        payload = {"query": query, "max_results": k}
        if self.api_key:
            payload["api_key"] = self.api_key
        try:
            resp = requests.post(self.base_url, json=payload, timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()
        except requests.RequestException as exc:
            raise SearchBackendUnavailable(f"search backend failed: {exc}") from exc
        return [
            SearchResult(title=item.get("title", ""),
                         snippet=item.get("snippet") or item.get("content", ""),
                         url=item.get("url", ""))
            for item in data.get("results", [])[:k]
        ]


def format_search_results(query: str, results: list[SearchResult]) -> str:
    if not results:
        return f"search results for {query!r}: none"
    lines = [f"search results for {query!r}:"]
    for i, r in enumerate(results, 1):
        lines.append(f"{i}. {r.title} — {r.snippet} [{r.url}]")
    return "\n".join(lines)


def make_search_tool(backend, k: int) -> ToolDef:
    """Bind a search backend at a fixed result count k.

    k is configuration, not an LLM-visible argument: the number of results a
    task needs is a provisioning decision (see the requested-count guard).
    """
    schema = ToolSchema(
        name="search",
        description="Search the web for scientific context and return the top results.",
        parameters={
            "query": ParamSpec("string", "free-text search query", required=True),
        },
    )

    def behavior(args: dict) -> ToolResult:
        results = backend.search(args["query"], k)
        return ToolResult(status="ok", content=format_search_results(args["query"], results))

    return ToolDef(schema=schema, behavior=behavior, execution_class="parallel")


# ---------------------------------------------------------------------------
# Run directories

def make_run_dir(base) -> Path:
    """Create a fresh directory {UTC-timestamp}_{128-bit hex} under base.

    mkdir is create-exclusive, and the random suffix needs no coordination, so
    arbitrarily many concurrent callers get distinct directories.
    """
    base = Path(base)
    if not base.is_dir():
        raise FilesystemError(f"base directory does not exist: {base}")
    for _ in range(8):
        stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
        path = base / f"{stamp}_{secrets.token_hex(16)}"
        try:
            path.mkdir()
        except FileExistsError:
            continue
        except OSError as exc:
            raise FilesystemError(f"cannot create run directory under {base}: {exc}") from exc
        return path
    raise FilesystemError(f"could not create a unique run directory under {base}")
