import pytest

from seqrank.ingest.metrics import Orientation
from seqrank.synth import LengthLaw, MetricPlan, TrajectoryPlan


def small_plan(**overrides):
    """3 steps x 2 layers of flattening spectra, ragged lengths, float64 dumps."""
    kw = dict(
        steps=(1000, 2000, 3000),
        layers=(0, 3),
        n=40,
        d=8,
        lengths=LengthLaw(1, 6),
        seed=17,
        decay_start=1.2,
        decay_end=0.2,
        layer_offsets={3: -0.1},
        sample_k=30,
        sample_seed=42,
        metrics=(
            MetricPlan("PR", Orientation.LOWER_IS_BETTER, slope=0.01, intercept=0.5),
            MetricPlan("SID", Orientation.HIGHER_IS_BETTER, slope=0.02, intercept=0.1),
        ),
    )
    kw.update(overrides)
    return TrajectoryPlan(**kw)


@pytest.fixture
def plan_factory():
    return small_plan


_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = next((m for m in item.iter_markers("acceptance") if m.args), None)
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (report.when == "setup" and report.skipped)
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "seconds": 0.0})
    entry["ok"] = entry["ok"] and not failed
    if report.when == "call":
        entry["seconds"] += report.duration


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        c = _criteria[number]
        status = "PASS" if c["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {c['title']} ({c['seconds']:.2f} s)")
