"""Independent reference computations shared by the module and acceptance tests."""
import math

import numpy as np
from scipy.integrate import quad

from covphase.phase1 import IntervalSet, fourier_weight
from covphase.phasediff import GramFamily


def dense_four_index_operator(family: GramFamily, X: IntervalSet, S: int) -> np.ndarray:
    """Independent assembly: loop over all label pairs, apply the selection rule,
    take inner products and Fourier weights one entry at a time."""
    labels = [(n, s - n) for s in range(S + 1) for n in range(s + 1)]
    E = np.zeros((len(labels), len(labels)), dtype=complex)
    for i, (n, k) in enumerate(labels):
        for j, (m, l) in enumerate(labels):
            if n - m != l - k:
                continue
            c = np.vdot(family[(n, k)], family[(m, l)])
            E[i, j] = c * fourier_weight(n - m, X)
    return E


def coherent_vacuum_by_quadrature(n: int, m: int) -> float:
    """``2 int_0^inf exp(-r^2) r^(n+m+1) dr / sqrt(n! m!)``."""
    p = n + m
    val = quad(lambda r: math.exp(-r * r) * r ** (p + 1) * 2.0, 0, np.inf,
               epsabs=0, epsrel=1e-13, limit=200)[0]
    return val / math.sqrt(math.factorial(n) * math.factorial(m))
