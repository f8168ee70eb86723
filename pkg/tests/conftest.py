import math

import numpy as np
import pytest
from hypothesis import strategies as st

from covphase.fock import Cutoff, TwoModeState
from covphase.phase1 import TWO_PI, IntervalSet


def random_interval_set(rng: np.random.Generator, pieces: int | None = None) -> IntervalSet:
    """Union of up to three random arcs, some of which wrap past 2pi."""
    pieces = int(rng.integers(1, 4)) if pieces is None else pieces
    arcs = [IntervalSet.arc(rng.uniform(0, TWO_PI), rng.uniform(0.05, 2.5)) for _ in range(pieces)]
    out = arcs[0]
    for a in arcs[1:]:
        out = out.union(a)
    return out


def random_pure_state(cutoff: Cutoff, rng: np.random.Generator) -> TwoModeState:
    v = rng.normal(size=cutoff.dim) + 1j * rng.normal(size=cutoff.dim)
    return TwoModeState(cutoff, vector=v / np.linalg.norm(v))


def random_mixed_state(cutoff: Cutoff, rng: np.random.Generator, rank: int = 3) -> TwoModeState:
    G = rng.normal(size=(cutoff.dim, rank)) + 1j * rng.normal(size=(cutoff.dim, rank))
    rho = G @ G.conj().T
    return TwoModeState(cutoff, matrix=rho / np.trace(rho).real)


def unit_vector(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


angles = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


@st.composite
def interval_sets(draw, max_pieces: int = 3):
    n = draw(st.integers(1, max_pieces))
    out = IntervalSet.empty()
    for _ in range(n):
        start = draw(st.floats(0.0, TWO_PI, exclude_max=True))
        length = draw(st.floats(0.01, 3.0))
        out = out.union(IntervalSet.arc(start, length))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


HALF = IntervalSet.of((0.0, math.pi))


# Acceptance results, filled by test_acceptance.py and printed after the run.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
