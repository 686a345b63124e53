from collections import defaultdict

import pytest

_RESULTS: dict[str, list[tuple[bool, str]]] = defaultdict(list)


class AcceptanceRecorder:
    def record(self, criterion: str, ok: bool, detail: str) -> bool:
        _RESULTS[criterion].append((bool(ok), detail))
        return bool(ok)

    def check(self, criterion: str, ok: bool, detail: str) -> None:
        assert self.record(criterion, ok, detail), f"{criterion}: {detail}"


@pytest.fixture
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_RESULTS, key=lambda c: int(c[2:])):
        parts = _RESULTS[criterion]
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        details = "; ".join(f"{'ok' if ok else 'FAILED'}: {d}" for ok, d in parts)
        terminalreporter.write_line(f"{criterion} {status} | {details}")
