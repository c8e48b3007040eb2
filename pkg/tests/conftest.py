import json
import math
import os
from collections import defaultdict

import pytest
from hypothesis import HealthCheck, settings

from multirat.config import ChannelParams, NetworkConfig, TierSpec

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

# acceptance lines collected during the run, printed once in the terminal summary
ACCEPTANCE_LINES: list[str] = []


# property-group outcomes, written to $MULTIRAT_PROPERTY_REPORT when set
PROPERTY_REPORT_ENV = "MULTIRAT_PROPERTY_REPORT"
_property_label: dict[str, str] = {}
_property_outcomes: dict[str, dict[str, int]] = defaultdict(lambda: {"passed": 0, "failed": 0})


def pytest_collection_modifyitems(config, items):
    for item in items:
        m = item.get_closest_marker("property")
        if m is not None:
            _property_label[item.nodeid] = m.args[0]


def pytest_runtest_logreport(report):
    label = _property_label.get(report.nodeid)
    if label is None:
        return
    if report.failed:
        _property_outcomes[label]["failed"] += 1
    elif report.when == "call" and report.passed:
        _property_outcomes[label]["passed"] += 1


def pytest_sessionfinish(session, exitstatus):
    path = os.environ.get(PROPERTY_REPORT_ENV)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(dict(_property_outcomes), fh, indent=1, sort_keys=True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture
def table_tiers():
    """Four-tier layout with the evaluation powers, backoff windows and 30 m sensing."""
    lam1 = 1e-6
    return (
        TierSpec(1, lam1, 40.0),
        TierSpec(2, 10 * lam1, 1.0, 2.0, 30.0),
        TierSpec(3, 50 * lam1, 0.5, 2.0, 30.0),
        TierSpec(4, 100 * lam1, 0.2, 1.0, 30.0, rat="U"),
    )


@pytest.fixture
def table_channel():
    return ChannelParams(alpha=4.0, shadowing_db=math.sqrt(3.0), gain_threshold=4.481, sir_threshold=0.5)


@pytest.fixture
def table_config(table_tiers, table_channel):
    return NetworkConfig(table_tiers, table_channel)
