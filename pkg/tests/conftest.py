import pytest

from ambuvib.telemetry import AreaLabel, TelemetryLog, TelemetrySample, synth_route

A1, A2, A3 = AreaLabel.A1, AreaLabel.A2, AreaLabel.A3
DEFAULT_PROFILE = [(A1, 600), (A2, 600), (A3, 600)]


def make_log(times, labels=None, lat=39.0, lon=-0.2):
    samples = [TelemetrySample(int(t), lat, lon + 1e-4 * i, 50.0, 0.0, 0.1 * (i % 3), 9.81 + 0.01 * i) for i, t in enumerate(times)]
    return TelemetryLog(samples, labels)


@pytest.fixture(scope="session")
def default_log():
    return synth_route(DEFAULT_PROFILE, seed=2024)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
