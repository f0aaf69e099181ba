import pytest

from paragent.bundled import corpus_dir, structures_dir
from paragent.executor import Executor, ResourceConfig


def chain_pdb_text(n_atoms: int) -> str:
    lines = ["HEADER    SYNTHETIC TEST CHAIN"]
    for i in range(n_atoms):
        lines.append(
            f"ATOM  {i + 1:5d}  CA  ALA A{i + 1:4d}    "
            f"{0.0:8.3f}{0.0:8.3f}{1.5 * i:8.3f}{1.00:6.2f}{20.00:6.2f}           C"
        )
    lines.append("END")
    return "\n".join(lines) + "\n"


@pytest.fixture
def make_chain_pdb(tmp_path):
    """Write a synthetic PDB with the given number of ATOM records."""

    def make(n_atoms: int, name: str = "chain.pdb"):
        path = tmp_path / name
        path.write_text(chain_pdb_text(n_atoms))
        return path

    return make


@pytest.fixture
def local_executor():
    """A small local pool, shut down at teardown."""
    executors = []

    def make(workers: int = 4, **kwargs) -> Executor:
        ex = Executor.start(ResourceConfig(backend="local", nodes=1,
                                           workers_per_node=workers, **kwargs))
        executors.append(ex)
        return ex

    yield make
    for ex in executors:
        ex.shutdown()


@pytest.fixture
def bundled_structures():
    return structures_dir()


@pytest.fixture
def bundled_corpus():
    return corpus_dir()
