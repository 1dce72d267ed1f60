from fractions import Fraction
from math import lcm

import numpy as np
import pytest

from semantic_pir.core import make_catalog, uniform_priors

MAX_LEN = 2**14


def example1(priors=None):
    return make_catalog((1024, 256), priors or uniform_priors(2), 2)


def example2(priors=None):
    return make_catalog((8192, 2048, 512), priors or uniform_priors(3), 4)


def example3(priors=None):
    return make_catalog((3000, 1800), priors or uniform_priors(2), 4)


def example4(priors=None):
    return make_catalog((400, 300, 100), priors or uniform_priors(3), 3)


def random_priors(rng, k):
    raw = [int(x) for x in rng.integers(1, 20, size=k)]
    total = sum(raw)
    return [Fraction(r, total) for r in raw]


def random_catalog(rng, max_n=5, max_k=5, max_len=MAX_LEN):
    """A catalog whose lengths suit both schemes: multiples of N**K and of N-1."""
    while True:
        n = int(rng.integers(2, max_n + 1))
        k = int(rng.integers(1, max_k + 1))
        unit = lcm(n**k, n - 1)
        top = max_len // unit
        if top >= 1:
            break
    lengths = sorted((unit * int(rng.integers(1, min(top, 4) + 1)) for _ in range(k)), reverse=True)
    return make_catalog(lengths, random_priors(rng, k), n)


@pytest.fixture(scope="session")
def random_catalogs():
    rng = np.random.default_rng(20240607)
    return [random_catalog(rng) for _ in range(200)]


# one summary line per acceptance criterion
_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        name = report.nodeid.split("::")[-1]
        prev = _acceptance.get(name)
        if prev is None or prev == "PASS":
            _acceptance[name] = report.outcome.upper() if report.outcome != "passed" else "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_acceptance, key=_criterion_order):
        terminalreporter.write_line(f"{_acceptance[name]:7s} {name}")


def _criterion_order(name):
    digits = "".join(ch for ch in name.split("_")[2] if ch.isdigit()) if name.count("_") >= 2 else ""
    return (int(digits) if digits else 99, name)
