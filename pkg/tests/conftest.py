import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rauzy_lab.rauzy import parse_pair, rauzy_class
from rauzy_lab.selection import make_selection

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def torus():
    return parse_pair("AB/BA")


@pytest.fixture(scope="session")
def hyper4():
    return parse_pair("ABCD/DCBA")


@pytest.fixture(scope="session")
def torus_sel(torus):
    return make_selection(torus)


@pytest.fixture(scope="session")
def hyper4_sel(hyper4):
    return make_selection(hyper4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def all_classes(max_d=5):
    """One representative per Rauzy class for d <= max_d (by exhaustive seeding)."""
    import itertools

    from rauzy_lab.rauzy import is_irreducible, make_pair
    reps, seen = [], set()
    for d in range(2, max_d + 1):
        letters = "ABCDEFG"[:d]
        for perm in itertools.permutations(letters):
            pair = make_pair(letters, "".join(perm))
            if not is_irreducible(pair) or pair in seen:
                continue
            cls = rauzy_class(pair)
            seen.update(cls.vertices)
            reps.append(cls)
    return reps


# -- acceptance summary ----------------------------------------------------------
# Tests tagged with @pytest.mark.criterion(number, title) report one line each
# at the end of the run.

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    failed = report.failed
    if report.when == "call" or failed:
        prev = _CRITERIA.get(number, (title, True, ""))
        detail = prev[2] or (str(report.longrepr).strip().splitlines()[-1] if failed else "")
        _CRITERIA[number] = (title, prev[1] and not failed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[number]
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
        if not ok and detail:
            line += f"  ({detail[:120]})"
        terminalreporter.write_line(line)
