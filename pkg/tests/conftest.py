from __future__ import annotations

import sys
from dataclasses import replace
from pathlib import Path

import pytest

from evidence_engine import Engine, build_index, load_config, read_corpus

sys.path.insert(0, str(Path(__file__).parent))

MINI = Path(__file__).resolve().parent.parent / "data" / "mini"

DPP_PASSAGE = (
    "Lifestyle changes and treatment with metformin both reduced the incidence of diabetes "
    "in persons at high risk. The lifestyle intervention was more effective than metformin"
)
DPP_SKELETON = {"treatment", "metformin", "reduced the incidence of", "diabetes", "intervention"}
DPP_REFERENCE = (
    "metformin treatment prevent diabetes, but lifestyle intervention is more effective"
)

_acceptance_lines: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line, printed in the terminal summary."""

    def record(number: int, passed: bool, detail: str) -> None:
        _acceptance_lines.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def mini_docs():
    return read_corpus(MINI / "corpus.jsonl")


@pytest.fixture(scope="session")
def mini_index(mini_docs):
    return build_index(mini_docs)


@pytest.fixture(scope="session")
def mini_engine(mini_index):
    # the config names mini.idx; hand the freshly built index in directly
    cfg = replace(load_config(MINI / "config.toml"), index=None)
    return Engine(cfg, index=mini_index)
