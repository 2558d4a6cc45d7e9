import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from riskalloc.hazard import HazardScenario
from riskalloc.profile import OperationalProfile


def compositions(total: int, parts: int):
    """Every way of writing ``total`` as an ordered sum of ``parts`` non-negative integers."""
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for b in bars:
            out.append(b - prev - 1)
            prev = b
        out.append(total + parts - 2 - prev)
        yield out


def exact_risk(p, hazards, tests) -> Fraction:
    """Risk per demand as an exact rational double sum."""
    total = Fraction(0)
    for e, h in enumerate(hazards):
        weight = Fraction(h.lam) * Fraction(h.epsilon)
        for i, pi in enumerate(p):
            total += Fraction(pi) * weight / (2 + int(tests[e][i]))
    return total


def brute_force_min_risk(coef, total: int) -> float:
    """Smallest risk over every integer allocation of ``total`` tests."""
    return min(math.fsum(c / (2 + t) for c, t in zip(coef, tt)) for tt in compositions(total, len(coef)))


def random_instance(rng: np.random.Generator, n_hazards: int, n_bins: int, mode: int = 0):
    """A random profile and hazard list; ``mode`` varies how skewed they are."""
    if mode == 0:
        p = rng.dirichlet(np.ones(n_bins))
        w = rng.uniform(0.05, 1.0, n_hazards)
    elif mode == 1:
        p = rng.dirichlet(np.full(n_bins, 0.1))
        w = rng.lognormal(0.0, 3.0, n_hazards)
    else:
        p = rng.dirichlet(np.ones(n_bins))
        p[rng.integers(n_bins)] = 0.0
        p = p / p.sum() if p.sum() > 0 else np.full(n_bins, 1.0 / n_bins)
        w = rng.exponential(1.0, n_hazards)
    top = float(w.max())
    hazards = [HazardScenario(f"h{e}", min(1.0, float(w[e]) / top), top) for e in range(n_hazards)]
    return OperationalProfile(p), hazards


@pytest.fixture
def unit_hazard():
    return [HazardScenario("h", 1.0, 1.0)]


@pytest.fixture
def half_half():
    return OperationalProfile([0.5, 0.5])


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str = "") -> None:
    """Remember one acceptance verdict; all of them are printed at the end of the run."""
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
