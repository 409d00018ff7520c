import pytest

_RESULTS: dict[int, str] = {}


@pytest.fixture()
def criterion(request):
    """``criterion(n, ok, detail)`` prints and records one PASS/FAIL line for acceptance item ``n``."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def report(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
        _RESULTS[n] = line
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_RESULTS):
            terminalreporter.write_line(_RESULTS[n])
