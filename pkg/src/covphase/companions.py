"""Operators from neighbouring phase difference proposals.

Ban's construction lives on the relabelled number basis

    |k, n>> = |n + k, n>   for k >= 0
    |k, n>> = |n, n - k>   for k < 0

where ``k`` is the number difference and ``n`` the smaller occupation.  The shift
operators here are exact only on the interior of a truncation: a basis vector is
interior when its image stays inside the cutoff (and, optionally, a margin of
sectors away from its edge).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CutoffMismatch
from .fock import Cutoff, TwoModeOperator, number_diff_operator, v_delta
from .phase1 import TWO_PI, IntervalSet, eval_phase, fourier_weights, kernel_canonical
from .phasediff import DiffKernel, canonical_kernel
from .analysis import cyclic_moment

EXACT_TOL = 1e-12


# ------------------------------------------------------------------------ basis map


@dataclass(frozen=True)
class BanBasisMap:
    """Bijection between ``(k, n)`` labels and the Fock labels of a cutoff."""

    cutoff: Cutoff

    @staticmethod
    def to_fock(k: int, n: int) -> tuple[int, int]:
        return (n + k, n) if k >= 0 else (n, n - k)

    @staticmethod
    def from_fock(a: int, b: int) -> tuple[int, int]:
        return a - b, min(a, b)

    @cached_property
    def labels(self) -> tuple[tuple[int, int], ...]:
        """``(k, n)`` labels in the cutoff's Fock order."""
        return tuple(self.from_fock(a, b) for a, b in self.cutoff.labels)

    def position(self, k: int, n: int) -> int | None:
        """Index of ``|k, n>>`` in the cutoff, or ``None`` when it lies outside."""
        if n < 0:
            return None
        return self.cutoff.index.get(self.to_fock(k, n))


@dataclass(frozen=True, eq=False)
class ShiftOperator(TwoModeOperator):
    """Truncated shift; ``boundary`` lists the Fock labels whose image left the cutoff."""

    boundary: tuple[tuple[int, int], ...] = ()

    def interior(self, margin: int = 0) -> np.ndarray:
        """Positions of columns mapped inside the cutoff, at least ``margin``
        sectors below the highest one."""
        lost = set(self.boundary)
        top = self.cutoff.max_total - margin
        return np.array([i for i, (a, b) in enumerate(self.cutoff.labels)
                         if (a, b) not in lost and a + b <= top], dtype=int)


def _k_shift(cutoff: Cutoff, step: int) -> ShiftOperator:
    """``sum |k - step, n>><<k, n|`` restricted to the cutoff."""
    bmap = BanBasisMap(cutoff)
    mat = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    boundary = []
    for j, (k, n) in enumerate(bmap.labels):
        i = bmap.position(k - step, n)
        if i is None:
            boundary.append(cutoff.labels[j])
        else:
            mat[i, j] = 1.0
    return ShiftOperator(mat, cutoff, block_diagonal_in_sum=False, boundary=tuple(boundary))


def ban_D(cutoff: Cutoff) -> ShiftOperator:
    """Ban's phase exponential ``sum |k-1, n>><<k, n|``."""
    return _k_shift(cutoff, 1)


def factor2_projection_solution(cutoff: Cutoff) -> ShiftOperator:
    """``W = sum |k-2, n>><<k, n|``, which satisfies ``V_d(b) W V_d(b)* = e^{-2ib} W``."""
    return _k_shift(cutoff, 2)


def intertwining_residual(W: ShiftOperator, beta: float, factor: int = 2, margin: int = 0) -> float:
    """Largest entry of ``(V_d(b) W V_d(b)* - e^{-i factor b} W)`` over interior columns."""
    V = v_delta(beta, W.cutoff).matrix
    lhs = V @ W.matrix @ V.conj().T
    cols = W.interior(margin)
    diff = lhs[:, cols] - np.exp(-1j * factor * beta) * W.matrix[:, cols]
    return float(np.max(np.abs(diff), initial=0.0))


def ban_B(X: IntervalSet, cutoff: Cutoff) -> TwoModeOperator:
    """``<<k, n|B(X)|l, n'>> = delta(n, n') w(k - l, X)``, in Fock coordinates."""
    bmap = BanBasisMap(cutoff)
    k = np.array([kn[0] for kn in bmap.labels])
    n = np.array([kn[1] for kn in bmap.labels])
    Q = int(np.max(np.abs(k), initial=0))
    w = fourier_weights(2 * Q, X)
    mat = w[k[:, None] - k[None, :] + 2 * Q] * (n[:, None] == n[None, :])
    return TwoModeOperator(mat, cutoff, block_diagonal_in_sum=False)


def radial_projection(n: int, cutoff: Cutoff) -> TwoModeOperator:
    """Projection onto ``span{|k, n>> : k}``, the labels whose smaller occupation is ``n``."""
    mask = np.minimum(cutoff.first_occupations, cutoff.second_occupations) == n
    return TwoModeOperator(np.diag(mask.astype(complex)), cutoff, block_diagonal_in_sum=True)


@dataclass(frozen=True)
class BanCovariance:
    factor1: float  # V_d(b) B(X) V_d(b)* vs B(X + b)
    factor2: float  # V_d(b) B(X) V_d(b)* vs B(X + 2b)

    def to_json(self) -> dict:
        return {"factor1": self.factor1, "factor2": self.factor2}


def ban_covariance_residual(X: IntervalSet, beta: float, cutoff: Cutoff) -> BanCovariance:
    B = ban_B(X, cutoff).matrix
    d = np.diag(v_delta(beta, cutoff).matrix)
    conj = B * np.outer(d, d.conj())
    f1 = np.max(np.abs(conj - ban_B(X.shift(beta), cutoff).matrix), initial=0.0)
    f2 = np.max(np.abs(conj - ban_B(X.shift(2 * beta), cutoff).matrix), initial=0.0)
    return BanCovariance(float(f1), float(f2))


def ban_vacuum_reduction(T: np.ndarray, X: IntervalSet, cutoff: Cutoff) -> tuple[float, float]:
    """``tr((T (x) |0><0|) B(X))`` and ``tr(T E_can(X))`` for a single-mode state ``T``."""
    T = np.asarray(T, dtype=complex)
    d = T.shape[0]
    if not cutoff.contains(d - 1, 0):
        raise CutoffMismatch(f"cutoff cannot hold occupation {d - 1} in the first mode")
    idx = [cutoff.index[(a, 0)] for a in range(d)]
    B = ban_B(X, cutoff).matrix[np.ix_(idx, idx)]
    two_mode = float(np.trace(T @ B).real)
    single = float(np.trace(T @ eval_phase(kernel_canonical(d - 1), X)).real)
    return two_mode, single


# ---------------------------------------------------------------------- commutators


def _column_residual(M: np.ndarray, cols: np.ndarray) -> float:
    if len(cols) == 0:
        return 0.0
    return float(np.max(np.linalg.norm(M[:, cols], axis=0)))


def single_mode_lowering(N: int) -> np.ndarray:
    """``sum |n><n+1|``, the first cyclic moment of the canonical single-mode observable."""
    return np.eye(N + 1, k=1, dtype=complex)


@dataclass(frozen=True)
class CommutatorReport:
    d_relation: float          # ([D, dN] - D) v
    moment_factor2: float      # ([C1, dN] - 2 C1) v
    moment_factor1: float      # ([C1, dN] - C1) v, nonzero wherever C1 v is
    single_mode: float         # ([C1, N] - C1) v for one mode
    interior_size: int
    boundary_size: int

    @property
    def passed(self) -> bool:
        return max(self.d_relation, self.moment_factor2, self.single_mode) <= EXACT_TOL

    def to_json(self) -> dict:
        return {
            "d_relation": self.d_relation,
            "moment_factor2": self.moment_factor2,
            "moment_factor1": self.moment_factor1,
            "single_mode": self.single_mode,
            "interior_size": self.interior_size,
            "boundary_size": self.boundary_size,
            "passed": self.passed,
        }


def commutator_checks(kernel: DiffKernel, cutoff: Cutoff, margin: int = 2) -> CommutatorReport:
    """Largest column residual of the shift relations over interior basis vectors."""
    dN = number_diff_operator(cutoff).matrix
    D = ban_D(cutoff)
    cols = D.interior(margin)
    d_res = _column_residual(D.matrix @ dN - dN @ D.matrix - D.matrix, cols)

    C = cyclic_moment(kernel, 1, cutoff).matrix
    comm = C @ dN - dN @ C
    # C1 preserves sectors, so only the margin restricts its interior.
    top = cutoff.max_total - margin
    ccols = np.array([i for i, (a, b) in enumerate(cutoff.labels) if a + b <= top], dtype=int)
    f2 = _column_residual(comm - 2 * C, ccols)
    f1 = _column_residual(comm - C, ccols)

    N = cutoff.max_single
    L = single_mode_lowering(N)
    num = np.diag(np.arange(N + 1, dtype=complex))
    s_res = _column_residual(L @ num - num @ L - L, np.arange(N + 1 - margin))
    return CommutatorReport(d_res, f2, f1, s_res, len(cols), len(D.boundary))


# ------------------------------------------------------------ cosine, sine, polar form


def sg_operators(S: int) -> tuple[TwoModeOperator, TwoModeOperator]:
    """Cosine and sine of the canonical phase difference on ``Total(S)``."""
    V = cyclic_moment(canonical_kernel(S), 1).matrix
    cutoff = Cutoff.total(S)
    cos = TwoModeOperator((V + V.conj().T) / 2, cutoff, block_diagonal_in_sum=True)
    sin = TwoModeOperator((V - V.conj().T) / 2j, cutoff, block_diagonal_in_sum=True)
    return cos, sin


def lowering_raising(cutoff: Cutoff) -> np.ndarray:
    """``a (x) a*``: ``|n, k> -> sqrt(n (k + 1)) |n - 1, k + 1>``."""
    A = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    idx = cutoff.index
    for j, (n, k) in enumerate(cutoff.labels):
        if n >= 1:
            A[idx[(n - 1, k + 1)], j] = np.sqrt(n * (k + 1))
    return A


def ll_polar_check(S: int) -> float:
    """``max |a (x) a* - V sqrt(N (x) (N + I))|`` on ``Total(S)``."""
    cutoff = Cutoff.total(S)
    V = cyclic_moment(canonical_kernel(S), 1).matrix
    R = np.diag(np.sqrt(cutoff.first_occupations * (cutoff.second_occupations + 1.0)))
    return float(np.max(np.abs(lowering_raising(cutoff) - V @ R), initial=0.0))


def e12_sector_block(s: int) -> np.ndarray:
    """Restriction of ``V + sum |n, 0><0, n|`` to the sector ``n + k = s``.

    Rows and columns are ordered by first-mode occupation ``n = 0..s``.
    """
    if s < 0:
        raise ValueError("sector index must be nonnegative")
    B = np.eye(s + 1, k=1, dtype=complex)  # |n, s-n> -> |n-1, s-n+1>
    B[s, 0] += 1.0  # |0, s> -> |s, 0>
    return B


def phi12_block_eigenphases(s: int, tol: float = 1e-10) -> list[float]:
    """Eigenphases in ``[0, 2pi)`` of the sector-``s`` block, ascending."""
    ph = np.mod(np.angle(np.linalg.eigvals(e12_sector_block(s))), TWO_PI)
    ph[ph > TWO_PI - tol] = 0.0
    return sorted(float(p) for p in ph)
