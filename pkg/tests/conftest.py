import numpy as np
import pytest

from acoustext.acoustic import AcousticModel
from acoustext.nn import make_rng
from acoustext.synth import CorpusSpec, make_language_pair, synth_corpus

LANGS = ["en-US", "es-US"]


@pytest.fixture(scope="session")
def pair():
    return make_language_pair(LANGS, seed=0)


@pytest.fixture(scope="session")
def tiny_corpus(pair):
    """Short utterances across all confuser subsets, for fast unit tests."""
    spec = CorpusSpec(8, duration_ms=(1000, 2000),
                      subsets={"clean": 2, "accent": 1, "confusable": 1})
    return synth_corpus(pair, spec, seed=11, prefix="tiny")


@pytest.fixture(scope="session")
def small_acoustic():
    return AcousticModel.init(LANGS, 64, (16, 12), make_rng(3))


# ------------------------------------------------- acceptance summary lines

ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and rep.when != "call":
        detail = f"{rep.when} failed"
    ACCEPTANCE[mark.args[0]] = (mark.args[1], rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {n:2d}. {title}  {detail}")
