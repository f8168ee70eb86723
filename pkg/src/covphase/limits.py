"""Large-amplitude behaviour of phase difference statistics in coherent states."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.special import gammainc

from .errors import CutoffOverBudget, DimensionTooSmall, TailTooLarge
from .fock import Cutoff, TwoModeState, coherent_vector
from .phase1 import TWO_PI, IntervalSet, PhaseKernel, eval_phase
from .phasediff import DiffKernel, diff_from_pair, fixed_phase_diff, prob, probabilities

TAIL_TOL = 1e-8

KernelSource = Union[PhaseKernel, Callable[[int], PhaseKernel]]


def cutoff_for_mean(mean_number: float) -> int:
    """Largest occupation kept for a Poisson number distribution of the given mean:
    ``ceil(lam + 6 sqrt(lam) + 10)``."""
    return math.ceil(mean_number + 6.0 * math.sqrt(mean_number) + 10.0)


def poisson_tail(mean_number: float, bound: int) -> float:
    """Probability that a Poisson variable of the given mean exceeds ``bound``."""
    if mean_number == 0.0:
        return 0.0
    return float(gammainc(bound + 1, mean_number))


def _kernel_at(source: KernelSource, N: int) -> PhaseKernel:
    if isinstance(source, PhaseKernel):
        if source.N < N:
            raise DimensionTooSmall(f"phase kernel of dimension {source.dim} cannot serve N = {N}")
        return source.truncate(N + 1)
    return source(N)


def _check_budget(bound: int, budget: int | None):
    if budget is not None and bound > budget:
        raise CutoffOverBudget(f"cutoff {bound} exceeds the budget {budget}")


def _mod2pi(x: float) -> float:
    return x % TWO_PI


def coherent_covariance_check(kernel: DiffKernel, z1: complex, z2: complex, alpha: float,
                              beta: float, X: IntervalSet) -> float:
    """``|<z1 e^{ia}, z2 e^{ib}|E(X)|...> - <z1, z2|E(X + b - a)|z1, z2>|`` on the
    kernel's own total cutoff.

    Rotating the amplitudes is conjugation by ``Theta(a, b)*``, so a kernel obeying
    ``Theta E(X) Theta* = E(X + a - b)`` moves its coherent statistics by ``b - a``.
    """
    S = kernel.S
    tail = poisson_tail(abs(z1) ** 2 + abs(z2) ** 2, S)
    if tail > TAIL_TOL:
        raise TailTooLarge(f"coherent tail {tail:.3e} beyond sector {S}")
    cutoff = Cutoff.total(S)
    rotated = TwoModeState.coherent(z1 * np.exp(1j * alpha), z2 * np.exp(1j * beta), cutoff)
    plain = TwoModeState.coherent(z1, z2, cutoff)
    lhs = prob(kernel, rotated, X)
    rhs = prob(kernel, plain, X.shift(beta - alpha))
    return abs(lhs - rhs)


def single_mode_probabilities(c1: KernelSource, z1: complex, sets: Sequence[IntervalSet],
                              budget: int | None = None) -> np.ndarray:
    """``<z1|E_1(X)|z1>`` for each set, with the truncated coherent vector renormalized."""
    N = cutoff_for_mean(abs(z1) ** 2)
    _check_budget(N, budget)
    v = coherent_vector(z1, N)
    if v.tail_mass > TAIL_TOL:
        raise TailTooLarge(f"coherent tail {v.tail_mass:.3e} beyond N = {N}")
    u = v.normalized().coefficients
    kern = _kernel_at(c1, N)
    return np.array([np.vdot(u, eval_phase(kern, X) @ u).real for X in sets])


def two_mode_probabilities(c1: KernelSource, c2: KernelSource, z1: complex, z2: complex,
                           sets: Sequence[IntervalSet], budget: int | None = None) -> np.ndarray:
    """``<z1, z2|E(X)|z1, z2>`` for the difference of ``c1`` and ``c2``."""
    lam = abs(z1) ** 2 + abs(z2) ** 2
    S = cutoff_for_mean(lam)
    _check_budget(S, budget)
    tail = poisson_tail(lam, S)
    if tail > TAIL_TOL:
        raise TailTooLarge(f"coherent tail {tail:.3e} beyond sector {S}")
    cutoff = Cutoff.total(S)
    state = TwoModeState.coherent(z1, z2, cutoff)
    state = TwoModeState(cutoff, vector=state.vector / math.sqrt(state.trace))
    kernel = diff_from_pair(_kernel_at(c1, S), _kernel_at(c2, S), S)
    return probabilities(kernel, state, sets)


def fixed_reference_probabilities(c1: KernelSource, alpha: float, z1: complex, z2: complex,
                                  sets: Sequence[IntervalSet], budget: int | None = None) -> np.ndarray:
    """``<z1, z2|E_1(X + alpha) (x) I|z1, z2>``: the second mode measured against a
    reference of fixed phase ``alpha``.

    Both amplitudes share the per-mode cutoff chosen for ``z1``; each truncated
    vector is renormalized.
    """
    N = cutoff_for_mean(abs(z1) ** 2)
    _check_budget(N, budget)
    u1 = coherent_vector(z1, N).normalized().coefficients
    u2 = coherent_vector(z2, N).normalized().coefficients
    v = np.kron(u1, u2)
    kern = _kernel_at(c1, N)
    return np.array([np.vdot(v, fixed_phase_diff(kern, alpha, X).matrix @ v).real for X in sets])


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(p) - np.asarray(q))))


@dataclass(frozen=True)
class LimitScanReport:
    amplitudes: tuple[float, ...]
    distances: tuple[float, ...]
    shift_used: float

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.amplitudes, self.amplitudes[1:])):
            raise ValueError("amplitudes must be strictly increasing")

    @property
    def strictly_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.distances, self.distances[1:]))

    def to_json(self) -> dict:
        return {
            "amplitudes": list(self.amplitudes),
            "distances": list(self.distances),
            "shift_used": self.shift_used,
        }


def _map_ordered(fn, items, workers: int | None):
    if workers is None or workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def classical_scan(c1: KernelSource, c2: KernelSource, z1: complex, arg_z2: float,
                   amp_schedule: Sequence[float], alpha: float, cells: int = 16,
                   fixed_reference: bool = False, cutoff_budget: int | None = None,
                   workers: int | None = None) -> LimitScanReport:
    """Distance between the two-mode statistics at growing ``|z2|`` and the shifted
    single-mode statistics of ``z1``.

    With ``fixed_reference`` the second mode is replaced by a reference of the
    fixed phase ``arg_z2 - alpha``, for which the two statistics coincide.
    """
    shift = _mod2pi(arg_z2 - alpha)
    grid = IntervalSet.partition(cells)
    target = single_mode_probabilities(c1, z1, [X.shift(shift) for X in grid], cutoff_budget)

    def distance(r: float) -> float:
        if fixed_reference:
            p = fixed_reference_probabilities(c1, shift, z1, r * np.exp(1j * arg_z2), grid,
                                              cutoff_budget)
        else:
            z2 = r * np.exp(1j * arg_z2)
            p = two_mode_probabilities(c1, c2, z1, z2, grid, cutoff_budget)
        return total_variation(p, target)

    dists = _map_ordered(distance, list(amp_schedule), workers)
    return LimitScanReport(tuple(float(a) for a in amp_schedule), tuple(dists), shift)


def dirac_window(arg_z1: float, arg_z2: float, alpha: float, alpha_prime: float,
                 window: float) -> IntervalSet:
    center = arg_z1 - arg_z2 - alpha_prime + alpha
    return IntervalSet.arc(_mod2pi(center - 0.5 * window), window)


def dirac_scan(c1: KernelSource, c2: KernelSource, arg_z1: float, arg_z2: float,
               amp_schedule: Sequence[float], alpha: float, alpha_prime: float, window: float,
               cutoff_budget: int | None = None, workers: int | None = None) -> list[float]:
    """Probability of a window around the limiting point as both amplitudes grow."""
    X = dirac_window(arg_z1, arg_z2, alpha, alpha_prime, window)

    def mass(r: float) -> float:
        z1, z2 = r * np.exp(1j * arg_z1), r * np.exp(1j * arg_z2)
        return float(two_mode_probabilities(c1, c2, z1, z2, [X], cutoff_budget)[0])

    return _map_ordered(mass, list(amp_schedule), workers)
