import numpy as np
import pytest

from hepoly.ckks import SchemeParams, build_encoding_map, decrypt, encrypt, keygen
from hepoly.protocol import TrustedParty


@pytest.fixture
def params():
    return SchemeParams()


@pytest.fixture
def det_params():
    return SchemeParams(deterministic_mode=True)


@pytest.fixture
def sk(params):
    return keygen(params, 42)


@pytest.fixture
def enc_map(params, sk):
    return build_encoding_map(params, sk)


@pytest.fixture
def E(enc_map, params):
    """Encrypt with a fresh seeded noise stream."""
    rng = np.random.default_rng(1234)
    return lambda m: encrypt(enc_map, m, params, rng)


@pytest.fixture
def D(enc_map):
    return lambda ct: decrypt(enc_map, ct)


@pytest.fixture
def tp(params, sk):
    return TrustedParty(sk, params, seed=99)


# Acceptance summary: one PASS/FAIL line per tagged criterion.
_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion tag")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", (mark.kwargs["number"], mark.kwargs["title"])))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    number, title = props["criterion"]
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "detail": ""})
    if report.failed or (report.when == "call" and report.skipped):
        entry["ok"] = False
    if "detail" in props:
        entry["detail"] = props["detail"]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        line = f"criterion {number:2d}: {'PASS' if e['ok'] else 'FAIL'}  {e['title']}"
        if e["detail"]:
            line += f"  [{e['detail']}]"
        terminalreporter.write_line(line)
