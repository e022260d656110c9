from __future__ import annotations

import pytest

from casebench.corpus import load_corpus
from casebench.minicorpus import load_mini_corpus

# Filled by the @criterion decorator in test_acceptance.py.
acceptance_results: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_results:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in acceptance_results:
            terminalreporter.write_line("  " + line)


@pytest.fixture(scope="session")
def mini_corpus():
    return load_mini_corpus()


def make_doc(doc_id, paragraphs, cite="", title=""):
    """Build a CaseDocument from paragraph strings via the normal loader."""
    docs, diagnostics = load_corpus(
        [{"id": doc_id, "name": title, "cite": cite, "opinions": [{"type": "majority", "text": "\n\n".join(paragraphs)}]}]
    )
    assert not diagnostics, diagnostics
    return docs[0]
