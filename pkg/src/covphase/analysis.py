"""Densities, the Barnett-Pegg distribution, and moment operators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CutoffMismatch, MalformedMoment, NonUnitNorm
from .fock import Cutoff, TwoModeOperator, TwoModeState
from .phase1 import TWO_PI, IntervalSet, fourier_weights
from .phasediff import (
    DiffKernel,
    GramFamily,
    difference_coefficients,
    theta_covariant_tensor,
)

NEGATIVE_DENSITY_FLAG = -1e-9


def density_diff(kernel: DiffKernel, state: TwoModeState, theta):
    """Density ``g(theta)`` of ``X -> tr(T E(X))`` relative to ``dtheta / 2pi``."""
    a = difference_coefficients(kernel, state)
    S = kernel.S
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    q = np.arange(-S, S + 1)
    g = (np.exp(1j * np.outer(th, q)) @ a).real
    return float(g[0]) if np.ndim(theta) == 0 else g


def density_grid(kernel: DiffKernel, nodes: int | None = None) -> np.ndarray:
    """Equispaced nodes on ``[0, 2pi)``; the default count ``4S + 5`` integrates
    every density of the kernel exactly."""
    m = 4 * kernel.S + 5 if nodes is None else nodes
    return TWO_PI * np.arange(m) / m


def density_tilde(family: GramFamily, state: TwoModeState, x, y):
    """Joint density of the two-variable covariant observable built from ``family``,
    relative to ``dx dy / (2pi)^2``."""
    cutoff = state.cutoff
    ct = theta_covariant_tensor(family, cutoff)
    A = ct * state.matrix.T  # A[a, b] = c~[a, b] <b|T|a>
    n, k = cutoff.first_occupations, cutoff.second_occupations
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    xs, ys = np.broadcast_arrays(xs, ys)
    # u[p, a] = exp(i (n_a x_p + k_a y_p)); g = u A u^*
    U = np.exp(1j * (np.outer(xs.ravel(), n) + np.outer(ys.ravel(), k)))
    g = np.einsum("pa,ab,pb->p", U, A, U.conj()).real.reshape(xs.shape)
    return float(g.ravel()[0]) if np.ndim(x) == 0 and np.ndim(y) == 0 else g


def marginal_from_tilde(family: GramFamily, state: TwoModeState, theta, nodes: int):
    """``(1/2pi) * integral of g~(x + theta, x) dx`` by the periodic trapezoid rule."""
    xs = TWO_PI * np.arange(nodes) / nodes
    th = np.atleast_1d(np.asarray(theta, dtype=float))
    out = np.array([np.mean(density_tilde(family, state, xs + t, xs)) for t in th])
    return float(out[0]) if np.ndim(theta) == 0 else out


@dataclass(frozen=True)
class FourierFunction:
    """State vector viewed as a function on the circle.

    The convention ``phi(x) = sum_n c_n exp(-i n x)`` makes ``|phi(x)|^2`` the
    canonical phase density of the state.
    """

    coefficients: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=complex))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def __call__(self, x):
        n = np.arange(len(self.coefficients))
        return np.exp(-1j * np.outer(np.atleast_1d(x), n)) @ self.coefficients

    def autocorrelation(self) -> np.ndarray:
        """``A_q = sum_m c_{m+q} conj(c_m)`` for ``q = -(d-1)..d-1``, so that
        ``|phi(x)|^2 = sum_q A_q exp(-i q x)``."""
        c = self.coefficients
        return np.correlate(c, c, mode="full")

    @classmethod
    def from_json(cls, data: dict) -> FourierFunction:
        return cls(np.array([complex(re, im) for re, im in data["coeffs"]]))


def barnett_pegg_prob(phi: FourierFunction, psi: FourierFunction, X: IntervalSet,
                      tol: float = 1e-10) -> float:
    """``(1/2pi) int_X (1/2pi) int |phi(x + theta)|^2 |psi(x)|^2 dx dtheta``.

    The inner integral of a product of trigonometric polynomials is read off
    from their coefficients, the outer one from the closed-form Fourier weights.
    """
    for name, f in (("phi", phi), ("psi", psi)):
        if abs(f.norm - 1.0) > tol:
            raise NonUnitNorm(f"{name} has norm {f.norm}")
    A = phi.autocorrelation()
    B = psi.autocorrelation()
    da, db = (len(A) - 1) // 2, (len(B) - 1) // 2
    Q = max(da, db)
    A = np.pad(A, (Q - da, Q - da))
    B = np.pad(B, (Q - db, Q - db))
    # |phi(x+t)|^2 |psi(x)|^2 averaged over x: sum_q A_q B_{-q} exp(-i q t)
    #   = sum_q A_{-q} B_q exp(i q t)
    coeff = A[::-1] * B
    return float(np.dot(coeff, fourier_weights(Q, X)).real)


def product_state(phi: FourierFunction, psi: FourierFunction, cutoff: Cutoff | None = None) -> TwoModeState:
    """``phi (x) psi`` on a total cutoff large enough to hold it exactly."""
    if cutoff is None:
        cutoff = Cutoff.total(len(phi.coefficients) + len(psi.coefficients) - 2)
    return TwoModeState.product(phi.coefficients, psi.coefficients, cutoff)


# ------------------------------------------------------------------------- moments


def first_moment(kernel: DiffKernel, cutoff: Cutoff | None = None) -> TwoModeOperator:
    """``int theta dE(theta)``: ``pi`` on the diagonal, ``c * i / (m - n)`` off it."""
    cutoff = Cutoff.total(kernel.S) if cutoff is None else cutoff
    if cutoff.max_total > kernel.S:
        raise CutoffMismatch("cutoff exceeds kernel")
    mat = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    for s in range(cutoff.max_total + 1):
        idx, ns = cutoff.sector(s)
        if len(idx) == 0:
            continue
        C = kernel.blocks[s][np.ix_(ns, ns)]
        diff = ns[None, :] - ns[:, None]  # m - n
        with np.errstate(divide="ignore", invalid="ignore"):
            off = np.where(diff != 0, 1j / diff, 0)
        block = C * off
        block[np.diag_indices(len(ns))] = np.pi
        mat[np.ix_(idx, idx)] = block
    return TwoModeOperator(mat, cutoff, block_diagonal_in_sum=True)


def reconstruct_from_first_moment(M: TwoModeOperator, tol: float = 1e-10) -> DiffKernel:
    """Recover the kernel from its first moment operator."""
    cutoff = M.cutoff
    if cutoff.scheme != "total":
        raise MalformedMoment("reconstruction needs a total-number cutoff")
    m = M.matrix
    if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
        raise MalformedMoment("moment operator is not Hermitian")
    s_of = cutoff.first_occupations + cutoff.second_occupations
    if np.max(np.abs(m[s_of[:, None] != s_of[None, :]]), initial=0.0) > tol:
        raise MalformedMoment("moment operator mixes total-number sectors")
    if np.max(np.abs(np.diag(m) - np.pi)) > tol:
        raise MalformedMoment("diagonal of a first moment must be pi")
    blocks = []
    for s in range(cutoff.bound + 1):
        idx, ns = cutoff.sector(s)
        B = m[np.ix_(idx, idx)]
        diff = ns[None, :] - ns[:, None]
        C = B * diff / 1j
        C[np.diag_indices(len(ns))] = 1.0
        blocks.append(C)
    return DiffKernel(tuple(blocks))


def cyclic_moment(kernel: DiffKernel, r: int, cutoff: Cutoff | None = None) -> TwoModeOperator:
    """``int exp(i r theta) dE(theta)``, mapping ``|n+r, l>`` to ``|n, l+r>``."""
    if r < 1:
        raise ValueError("r must be positive")
    cutoff = Cutoff.total(kernel.S) if cutoff is None else cutoff
    if cutoff.max_total > kernel.S:
        raise CutoffMismatch("cutoff exceeds kernel")
    mat = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
    idx = cutoff.index
    for (n, k) in cutoff.labels:
        # row |n, k>, column |n + r, k - r>
        col = (n + r, k - r)
        if k - r >= 0 and col in idx:
            mat[idx[(n, k)], idx[col]] = kernel.blocks[n + k][n, n + r]
    return TwoModeOperator(mat, cutoff, block_diagonal_in_sum=True)


def moment_riemann_sum(kernel: DiffKernel, cells: int, cutoff: Cutoff | None = None) -> np.ndarray:
    """Midpoint Riemann-Stieltjes sum ``sum_j theta_j E(cell_j)`` for the first moment."""
    from .phasediff import eval_diff

    total = None
    for j, X in enumerate(IntervalSet.partition(cells)):
        mid = 0.5 * sum(X.intervals[0])
        term = mid * eval_diff(kernel, X, cutoff).matrix
        total = term if total is None else total + term
    return total
