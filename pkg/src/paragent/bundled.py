"""Locate bundled fixture data (structures, search corpus, prompts, scenarios).

AGENT_FIXTURES overrides the packaged fixture root, e.g. to point offline
runs at an external corpus.
"""
from __future__ import annotations

import os
from pathlib import Path


def fixtures_root() -> Path:
    override = os.environ.get("AGENT_FIXTURES")
    if override:
        return Path(override)
    return Path(__file__).parent / "fixtures"


def structures_dir() -> Path:
    return fixtures_root() / "structures"


def corpus_dir() -> Path:
    return fixtures_root() / "corpus"


def prompts_dir() -> Path:
    return fixtures_root() / "prompts"


def scenarios_dir() -> Path:
    return fixtures_root() / "scenarios"
