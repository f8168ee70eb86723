"""Truncated two-mode Fock space: labels, states, operators, sector projections."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.special import gammainc

from .errors import CutoffMismatch, NonHermitianInput

HERMITIAN_TOL = 1e-10


@dataclass(frozen=True)
class Cutoff:
    """Finite set of two-mode labels ``(n, k)``.

    ``per_mode`` keeps ``n, k <= bound``; ``total`` keeps ``n + k <= bound``.
    Total cutoffs are ordered by sector ``s = n + k`` and then by ``n``; per-mode
    cutoffs are ordered lexicographically, which matches ``np.kron``.
    """

    scheme: Literal["per_mode", "total"]
    bound: int

    def __post_init__(self):
        if self.scheme not in ("per_mode", "total"):
            raise ValueError(f"unknown cutoff scheme {self.scheme!r}")
        if self.bound < 0:
            raise ValueError("cutoff bound must be nonnegative")

    @classmethod
    def per_mode(cls, N: int) -> Cutoff:
        return cls("per_mode", int(N))

    @classmethod
    def total(cls, S: int) -> Cutoff:
        return cls("total", int(S))

    @cached_property
    def labels(self) -> tuple[tuple[int, int], ...]:
        b = self.bound
        if self.scheme == "per_mode":
            return tuple((n, k) for n in range(b + 1) for k in range(b + 1))
        return tuple((n, s - n) for s in range(b + 1) for n in range(s + 1))

    @cached_property
    def index(self) -> dict[tuple[int, int], int]:
        return {lab: i for i, lab in enumerate(self.labels)}

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def max_total(self) -> int:
        return 2 * self.bound if self.scheme == "per_mode" else self.bound

    @property
    def max_single(self) -> int:
        """Largest occupation either mode can carry."""
        return self.bound

    def contains(self, n: int, k: int) -> bool:
        if n < 0 or k < 0:
            return False
        if self.scheme == "per_mode":
            return n <= self.bound and k <= self.bound
        return n + k <= self.bound

    @cached_property
    def _sectors(self) -> list[tuple[np.ndarray, np.ndarray]]:
        out = []
        for s in range(self.max_total + 1):
            ns = [n for n in range(s + 1) if self.contains(n, s - n)]
            idx = [self.index[(n, s - n)] for n in ns]
            out.append((np.array(idx, dtype=int), np.array(ns, dtype=int)))
        return out

    def sector(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        """Basis positions and first-mode occupations of the labels with ``n + k = s``."""
        if s < 0 or s > self.max_total:
            return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        return self._sectors[s]

    @cached_property
    def first_occupations(self) -> np.ndarray:
        return np.array([n for n, _ in self.labels], dtype=int)

    @cached_property
    def second_occupations(self) -> np.ndarray:
        return np.array([k for _, k in self.labels], dtype=int)

    def to_json(self) -> dict:
        return {"scheme": self.scheme, "bound": self.bound}


@dataclass(frozen=True)
class FockVector:
    """Single-mode vector truncated at occupation ``N``, with the discarded mass."""

    coefficients: np.ndarray
    tail_mass: float = 0.0

    @property
    def N(self) -> int:
        return len(self.coefficients) - 1

    def norm_squared(self) -> float:
        return float(np.vdot(self.coefficients, self.coefficients).real)

    def normalized(self) -> FockVector:
        c = self.coefficients / math.sqrt(self.norm_squared())
        return FockVector(c, 0.0)


def coherent_vector(z: complex, N: int) -> FockVector:
    """Coherent state amplitudes ``exp(-|z|^2/2) z^n / sqrt(n!)`` for ``n <= N``."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    z = complex(z)
    r = abs(z)
    coeffs = np.zeros(N + 1, dtype=complex)
    if r == 0.0:
        coeffs[0] = 1.0
        return FockVector(coeffs, 0.0)
    n = np.arange(N + 1)
    log_mod = -0.5 * r * r + n * math.log(r) - 0.5 * np.array([math.lgamma(k + 1) for k in n])
    coeffs = np.exp(log_mod) * np.exp(1j * n * np.angle(z))
    # Poisson upper tail P(X > N) for mean |z|^2.
    tail = float(gammainc(N + 1, r * r))
    return FockVector(coeffs, tail)


def number_vector(n: int, N: int) -> FockVector:
    c = np.zeros(N + 1, dtype=complex)
    c[n] = 1.0
    return FockVector(c, 0.0)


@dataclass(frozen=True, eq=False)
class TwoModeOperator:
    """Matrix on a cutoff basis."""

    matrix: np.ndarray
    cutoff: Cutoff
    block_diagonal_in_sum: bool = False

    def __post_init__(self):
        if self.matrix.shape != (self.cutoff.dim, self.cutoff.dim):
            raise CutoffMismatch(
                f"matrix shape {self.matrix.shape} does not fit cutoff of dimension {self.cutoff.dim}"
            )
        if self.block_diagonal_in_sum:
            s = self.cutoff.first_occupations + self.cutoff.second_occupations
            if np.any(self.matrix[s[:, None] != s[None, :]]):
                raise ValueError("operator flagged block-diagonal has entries across sectors")

    def entry(self, row: tuple[int, int], col: tuple[int, int]) -> complex:
        idx = self.cutoff.index
        return complex(self.matrix[idx[row], idx[col]])

    def apply(self, label: tuple[int, int]) -> np.ndarray:
        """Image of the basis vector ``|label>``."""
        return self.matrix[:, self.cutoff.index[label]]

    def sector_block(self, s: int) -> np.ndarray:
        idx, _ = self.cutoff.sector(s)
        return self.matrix[np.ix_(idx, idx)]

    def adjoint(self) -> TwoModeOperator:
        return TwoModeOperator(self.matrix.conj().T, self.cutoff, self.block_diagonal_in_sum)

    def __matmul__(self, other: TwoModeOperator) -> TwoModeOperator:
        if other.cutoff != self.cutoff:
            raise CutoffMismatch("operators live on different cutoffs")
        return TwoModeOperator(
            self.matrix @ other.matrix,
            self.cutoff,
            self.block_diagonal_in_sum and other.block_diagonal_in_sum,
        )


class TwoModeState:
    """Density operator on a cutoff. Pure states keep their vector so that large
    per-mode cutoffs never need the dense matrix."""

    def __init__(self, cutoff: Cutoff, *, matrix=None, vector=None, check: bool = True):
        if (matrix is None) == (vector is None):
            raise ValueError("give exactly one of matrix or vector")
        self.cutoff = cutoff
        self.vector = None if vector is None else np.asarray(vector, dtype=complex)
        if matrix is not None:
            matrix = np.asarray(matrix, dtype=complex)
            if matrix.shape != (cutoff.dim, cutoff.dim):
                raise CutoffMismatch("state matrix does not fit its cutoff")
            self.__dict__["matrix"] = matrix
        elif self.vector.shape != (cutoff.dim,):
            raise CutoffMismatch("state vector does not fit its cutoff")
        if check:
            self._check()

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.outer(self.vector, self.vector.conj())

    @property
    def trace(self) -> float:
        if self.vector is not None:
            return float(np.vdot(self.vector, self.vector).real)
        return float(np.trace(self.matrix).real)

    def _check(self, tol: float = 1e-12):
        tr = self.trace
        if not (0.0 < tr <= 1.0 + tol):
            raise ValueError(f"state trace {tr} outside (0, 1]")
        if self.vector is None:
            m = self.matrix
            if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
                raise NonHermitianInput("state matrix is not Hermitian")
            if np.linalg.eigvalsh((m + m.conj().T) / 2)[0] < -tol:
                raise ValueError("state matrix is not positive")

    def sector_block(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        """First-mode occupations and the state's block ``<n,s-n|T|m,s-m>`` of sector ``s``."""
        idx, ns = self.cutoff.sector(s)
        if self.vector is not None:
            u = self.vector[idx]
            return ns, np.outer(u, u.conj())
        return ns, self.matrix[np.ix_(idx, idx)]

    def sector_vector(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        idx, ns = self.cutoff.sector(s)
        return ns, self.vector[idx]

    @classmethod
    def number(cls, n: int, k: int, cutoff: Cutoff) -> TwoModeState:
        if not cutoff.contains(n, k):
            raise CutoffMismatch(f"label {(n, k)} outside cutoff")
        v = np.zeros(cutoff.dim, dtype=complex)
        v[cutoff.index[(n, k)]] = 1.0
        return cls(cutoff, vector=v)

    @classmethod
    def product(cls, v1, v2, cutoff: Cutoff) -> TwoModeState:
        """Pure product ``v1 (x) v2`` restricted to the cutoff labels."""
        v1 = np.asarray(getattr(v1, "coefficients", v1), dtype=complex)
        v2 = np.asarray(getattr(v2, "coefficients", v2), dtype=complex)
        n1, n2 = cutoff.first_occupations, cutoff.second_occupations
        inside = (n1 < len(v1)) & (n2 < len(v2))
        v = np.zeros(cutoff.dim, dtype=complex)
        v[inside] = v1[n1[inside]] * v2[n2[inside]]
        return cls(cutoff, vector=v)

    @classmethod
    def coherent(cls, z1: complex, z2: complex, cutoff: Cutoff) -> TwoModeState:
        N = cutoff.max_single
        return cls.product(coherent_vector(z1, N), coherent_vector(z2, N), cutoff)

    @classmethod
    def from_amplitudes(cls, amplitudes: dict[tuple[int, int], complex], cutoff: Cutoff,
                        normalize: bool = True) -> TwoModeState:
        v = np.zeros(cutoff.dim, dtype=complex)
        for lab, a in amplitudes.items():
            if not cutoff.contains(*lab):
                raise CutoffMismatch(f"label {lab} outside cutoff")
            v[cutoff.index[tuple(lab)]] = a
        if normalize:
            v = v / np.linalg.norm(v)
        return cls(cutoff, vector=v)


def theta_unitary(alpha: float, beta: float, cutoff: Cutoff) -> TwoModeOperator:
    """``exp(i alpha N(x)I + i beta I(x)N)``, diagonal in the number basis."""
    phases = alpha * cutoff.first_occupations + beta * cutoff.second_occupations
    return TwoModeOperator(np.diag(np.exp(1j * phases)), cutoff, block_diagonal_in_sum=True)


def v_sigma(alpha: float, cutoff: Cutoff) -> TwoModeOperator:
    return theta_unitary(alpha, alpha, cutoff)


def v_delta(beta: float, cutoff: Cutoff) -> TwoModeOperator:
    return theta_unitary(beta, -beta, cutoff)


def number_sum_operator(cutoff: Cutoff) -> TwoModeOperator:
    d = cutoff.first_occupations + cutoff.second_occupations
    return TwoModeOperator(np.diag(d.astype(complex)), cutoff, block_diagonal_in_sum=True)


def number_diff_operator(cutoff: Cutoff) -> TwoModeOperator:
    d = cutoff.first_occupations - cutoff.second_occupations
    return TwoModeOperator(np.diag(d.astype(complex)), cutoff, block_diagonal_in_sum=True)


def number_sum_projection(s: int, cutoff: Cutoff) -> TwoModeOperator:
    """Spectral projection of ``N(x)I + I(x)N`` onto eigenvalue ``s``."""
    mask = (cutoff.first_occupations + cutoff.second_occupations) == s
    return TwoModeOperator(np.diag(mask.astype(complex)), cutoff, block_diagonal_in_sum=True)


def number_diff_projection(k: int, cutoff: Cutoff) -> TwoModeOperator:
    """Spectral projection of ``N(x)I - I(x)N`` onto eigenvalue ``k``."""
    mask = (cutoff.first_occupations - cutoff.second_occupations) == k
    return TwoModeOperator(np.diag(mask.astype(complex)), cutoff, block_diagonal_in_sum=True)


def hermiticity_residual(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix - matrix.conj().T), initial=0.0))


def hermitian_eigenvalues(op, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Ascending eigenvalues of a Hermitian operator (or bare matrix)."""
    m = op.matrix if isinstance(op, TwoModeOperator) else np.asarray(op)
    res = hermiticity_residual(m)
    if res > tol:
        raise NonHermitianInput(f"Hermiticity residual {res:.3e} exceeds {tol:.1e}")
    return np.linalg.eigvalsh((m + m.conj().T) / 2)
