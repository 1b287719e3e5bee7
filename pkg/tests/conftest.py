import pytest

from aberrant.syngen import GenConfig, generate_corpus

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance_log():
    """Record one pass/fail line per acceptance criterion."""

    def record(name: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((name, passed, detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {name} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Ten records per class, written once per session."""
    root = tmp_path_factory.mktemp("small_corpus")
    cfg = GenConfig(n_per_class=10, seed=7)
    summary = generate_corpus(cfg, root)
    return root, cfg, summary
