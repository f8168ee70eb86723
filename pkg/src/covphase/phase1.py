"""Single-mode phase observables.

A phase observable on the truncated space ``span{|0>, ..., |N>}`` is fixed by
its phase kernel, the Gram matrix ``c[n, m] = <phi_n|phi_m>`` of unit vectors.
Its value on a set ``X`` of angles is ``c[n, m] * w(n - m, X)`` where ``w`` is
the normalized Fourier weight of ``X``.  Sets are finite unions of half-open
intervals, so all weights are closed-form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionTooSmall, NonUnitVector, ValidationFailed

TWO_PI = 2.0 * math.pi
PSD_TOL = 1e-10


@dataclass(frozen=True)
class IntervalSet:
    """Disjoint union of half-open intervals ``[a, b)`` inside ``[0, 2pi)``."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = sorted((float(a), float(b)) for a, b in self.intervals)
        merged: list[list[float]] = []
        for a, b in ivs:
            if not (0.0 <= a < b <= TWO_PI):
                raise ValueError(f"interval [{a}, {b}) is not inside [0, 2pi)")
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        object.__setattr__(self, "intervals", tuple((a, b) for a, b in merged))

    @classmethod
    def of(cls, *pairs: tuple[float, float]) -> IntervalSet:
        return cls(tuple(pairs))

    @classmethod
    def full(cls) -> IntervalSet:
        return cls(((0.0, TWO_PI),))

    @classmethod
    def empty(cls) -> IntervalSet:
        return cls(())

    @classmethod
    def arc(cls, start: float, length: float) -> IntervalSet:
        """The arc ``[start, start + length)`` taken modulo ``2pi``."""
        if length >= TWO_PI:
            return cls.full()
        if length <= 0:
            return cls.empty()
        return cls(((0.0, length),)).shift(start)

    @classmethod
    def partition(cls, cells: int) -> list[IntervalSet]:
        edges = np.linspace(0.0, TWO_PI, cells + 1)
        edges[-1] = TWO_PI
        return [cls(((edges[j], edges[j + 1]),)) for j in range(cells)]

    @property
    def total_length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    @property
    def is_full(self) -> bool:
        return self.intervals == ((0.0, TWO_PI),)

    def shift(self, t: float) -> IntervalSet:
        """``X + t`` modulo ``2pi``; intervals crossing ``2pi`` are split."""
        t = math.fmod(t, TWO_PI)
        if t < 0:
            t += TWO_PI
        if t == 0.0 or self.is_full:
            return self
        out = []
        for a, b in self.intervals:
            a2 = a + t
            if a2 >= TWO_PI:
                a2 -= TWO_PI
            b2 = a2 + (b - a)
            if b2 > TWO_PI:
                out.append((a2, TWO_PI))
                if b2 - TWO_PI > 0.0:
                    out.append((0.0, b2 - TWO_PI))
            else:
                out.append((a2, b2))
        return IntervalSet(tuple(out))

    def union(self, other: IntervalSet) -> IntervalSet:
        return IntervalSet(self.intervals + other.intervals)

    def to_json(self) -> list[list[float]]:
        return [[a, b] for a, b in self.intervals]

    @classmethod
    def from_json(cls, data: Iterable[Sequence[float]]) -> IntervalSet:
        return cls(tuple((float(a), float(b)) for a, b in data))


def fourier_weight(q: int, X: IntervalSet) -> complex:
    """``(1/2pi) * integral over X of exp(i q theta)``."""
    if q == 0:
        return complex(X.total_length / TWO_PI)
    if X.is_full:
        return 0j
    total = 0j
    for a, b in X.intervals:
        total += np.exp(1j * q * b) - np.exp(1j * q * a)
    return complex(total / (TWO_PI * 1j * q))


def fourier_weights(Q: int, X: IntervalSet) -> np.ndarray:
    """Weights for ``q = -Q..Q``; entry ``q + Q`` holds ``fourier_weight(q, X)``."""
    q = np.arange(-Q, Q + 1)
    w = np.zeros(2 * Q + 1, dtype=complex)
    nz = q != 0
    if not X.is_full:
        for a, b in X.intervals:
            w[nz] += np.exp(1j * q[nz] * b) - np.exp(1j * q[nz] * a)
        w[nz] /= TWO_PI * 1j * q[nz]
    w[Q] = X.total_length / TWO_PI
    return w


def toeplitz_weights(ns: np.ndarray, ms: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Matrix ``W[i, j] = w[ns[i] - ms[j]]`` for a weight vector from :func:`fourier_weights`."""
    Q = (len(w) - 1) // 2
    return w[ns[:, None] - ms[None, :] + Q]


@dataclass(frozen=True, eq=False)
class PhaseKernel:
    """Hermitian, unit-diagonal, positive semidefinite matrix ``c[n, m]``."""

    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def N(self) -> int:
        return self.dim - 1

    def truncate(self, dim: int) -> PhaseKernel:
        if dim > self.dim:
            raise DimensionTooSmall(f"kernel has dimension {self.dim}, need {dim}")
        return PhaseKernel(self.entries[:dim, :dim])

    def check(self, tol: float = PSD_TOL) -> dict:
        c = self.entries
        herm = float(np.max(np.abs(c - c.conj().T), initial=0.0))
        diag = float(np.max(np.abs(np.diag(c) - 1.0), initial=0.0))
        min_eig = float(np.linalg.eigvalsh((c + c.conj().T) / 2)[0])
        return {
            "hermiticity_residual": herm,
            "max_diagonal_deviation": diag,
            "min_eigenvalue": min_eig,
            "passed": herm <= tol and diag <= tol and min_eig >= -tol,
        }

    def validate(self, tol: float = PSD_TOL) -> PhaseKernel:
        rep = self.check(tol)
        if not rep["passed"]:
            raise ValidationFailed(f"not a phase kernel: {rep}")
        return self


def kernel_canonical(N: int) -> PhaseKernel:
    return PhaseKernel(np.ones((N + 1, N + 1), dtype=complex))


def kernel_identity(N: int) -> PhaseKernel:
    """Kernel of orthonormal vectors; its observable is diagonal in the number basis."""
    return PhaseKernel(np.eye(N + 1, dtype=complex))


def kernel_from_vectors(phis: Sequence[np.ndarray], tol: float = 1e-10) -> PhaseKernel:
    phis = [np.asarray(p, dtype=complex) for p in phis]
    for i, p in enumerate(phis):
        nrm = np.linalg.norm(p)
        if abs(nrm - 1.0) > tol:
            raise NonUnitVector(f"vector {i} has norm {nrm}")
    G = np.array(phis)
    return PhaseKernel(G.conj() @ G.T)


def kernel_coherent_vacuum(N: int) -> PhaseKernel:
    """Kernel of the observable generated by the coherent states with the vacuum
    as fiducial vector: ``Gamma((n+m)/2 + 1) / sqrt(n! m!)``."""
    n = np.arange(N + 1)
    lg = np.array([math.lgamma(k + 1) for k in n])
    half = np.array([[math.lgamma((a + b) / 2 + 1) for b in n] for a in n])
    c = np.exp(half - 0.5 * (lg[:, None] + lg[None, :]))
    return PhaseKernel(c.astype(complex))


def random_phase_kernel(N: int, rng: np.random.Generator, vector_dim: int | None = None) -> PhaseKernel:
    """Gram kernel of ``N + 1`` random unit vectors in ``C^vector_dim``."""
    d = N + 1 if vector_dim is None else vector_dim
    v = rng.normal(size=(N + 1, d)) + 1j * rng.normal(size=(N + 1, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return kernel_from_vectors(list(v))


def eval_phase(kernel: PhaseKernel, X: IntervalSet) -> np.ndarray:
    ns = np.arange(kernel.dim)
    w = fourier_weights(kernel.N, X)
    return kernel.entries * toeplitz_weights(ns, ns, w)


def number_phase_unitary(theta: float, N: int) -> np.ndarray:
    return np.diag(np.exp(1j * theta * np.arange(N + 1)))


def phase_density(kernel: PhaseKernel, state: np.ndarray, theta) -> np.ndarray | float:
    """Density of ``X -> tr(T E(X))`` with respect to ``dtheta / 2pi``.

    ``state`` is a density matrix, or a vector for a pure state.
    """
    T = np.asarray(state, dtype=complex)
    if T.ndim == 1:
        T = np.outer(T, T.conj())
    d = T.shape[0]
    if d > kernel.dim:
        raise DimensionTooSmall("state is larger than the kernel")
    c = kernel.entries[:d, :d]
    # A[n, m] = c[n, m] <m|T|n>; g = sum_q exp(i q theta) * (sum of diagonal n - m = q).
    A = c * T.T
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    g = np.zeros(theta_arr.shape, dtype=complex)
    for q in range(-(d - 1), d):
        g += np.trace(A, offset=-q) * np.exp(1j * q * theta_arr)
    out = g.real
    return float(out[0]) if np.ndim(theta) == 0 else out


@dataclass(frozen=True)
class FixedPhase:
    """Dirac-measure reference of known phase."""

    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.alpha < TWO_PI):
            raise ValueError("alpha must lie in [0, 2pi)")

    def measure(self, X: IntervalSet) -> float:
        return float(any(a <= self.alpha < b for a, b in X.intervals))


def kernel_to_json(kernel: PhaseKernel, kind: str = "gram", vectors=None) -> dict:
    out = {"type": kind, "dim": kernel.dim}
    if kind == "gram":
        if vectors is None:
            raise ValueError("gram kernels serialize through their vectors")
        out["vectors"] = [[[float(x.real), float(x.imag)] for x in v] for v in vectors]
    return out


def kernel_from_json(data: dict) -> PhaseKernel:
    kind = data.get("type")
    dim = int(data["dim"])
    if kind == "canonical":
        return kernel_canonical(dim - 1)
    if kind == "coherent_vacuum":
        return kernel_coherent_vacuum(dim - 1)
    if kind == "identity":
        return kernel_identity(dim - 1)
    if kind == "gram":
        vecs = [np.array([complex(re, im) for re, im in v]) for v in data["vectors"]]
        if len(vecs) != dim:
            raise ValueError(f"gram kernel needs {dim} vectors, got {len(vecs)}")
        return kernel_from_vectors(vecs)
    raise ValueError(f"unknown phase kernel type {kind!r}")
