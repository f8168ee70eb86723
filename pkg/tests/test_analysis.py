import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covphase.analysis import (
    FourierFunction,
    barnett_pegg_prob,
    cyclic_moment,
    density_diff,
    density_grid,
    density_tilde,
    first_moment,
    marginal_from_tilde,
    moment_riemann_sum,
    product_state,
    reconstruct_from_first_moment,
)
from covphase.errors import CutoffMismatch, MalformedMoment, NonUnitNorm
from covphase.fock import Cutoff, TwoModeOperator, TwoModeState, number_vector
from covphase.phase1 import TWO_PI, IntervalSet, fourier_weights, kernel_canonical, phase_density
from covphase.phasediff import (
    GramFamily,
    canonical_kernel,
    diff_from_theta_covariant,
    prob,
    random_diff_kernel,
    random_gram_family,
)

from conftest import HALF, random_interval_set, random_mixed_state, random_pure_state, unit_vector


def product_family(S, phi1, phi2):
    return GramFamily({(n, s - n): np.kron(phi1[n], phi2[s - n]) for s in range(S + 1) for n in range(s + 1)})


class TestDensityDiff:
    def test_second_mode_number_state_uniform(self, rng):
        S = 6
        c = Cutoff.total(S)
        k = random_diff_kernel(S, rng)
        th = np.linspace(0, TWO_PI, 17)
        for s in range(S + 1):
            st = TwoModeState.product(number_vector(0, S).coefficients, number_vector(s, S).coefficients, c)
            np.testing.assert_allclose(density_diff(k, st, th), 1.0, atol=1e-14)

    def test_vacuum_canonical(self):
        st = TwoModeState.number(0, 0, Cutoff.total(4))
        np.testing.assert_allclose(density_diff(canonical_kernel(4), st, np.linspace(0, 6, 7)), 1.0)

    def test_hand_expansion(self):
        c = Cutoff.total(3)
        st = TwoModeState.from_amplitudes({(0, 1): 1, (1, 0): 1}, c)
        th = np.linspace(0, TWO_PI, 25)
        np.testing.assert_allclose(density_diff(canonical_kernel(3), st, th), 1 + np.cos(th), atol=1e-14)

    def test_scalar_input(self):
        st = TwoModeState.number(0, 0, Cutoff.total(2))
        assert isinstance(density_diff(canonical_kernel(2), st, 0.3), float)

    def test_normalization_and_sign(self, rng):
        for S in (0, 4, 10):
            k = random_diff_kernel(S, rng)
            st = random_mixed_state(Cutoff.total(S), rng)
            g = density_diff(k, st, density_grid(k))
            assert g.mean() == pytest.approx(st.trace, abs=1e-10)
            assert g.min() >= -1e-9

    def test_integrates_to_prob(self, rng):
        k = random_diff_kernel(5, rng)
        st = random_pure_state(Cutoff.total(5), rng)
        X = IntervalSet.of((0.5, 2.0))
        # exact: integrate the trigonometric polynomial term by term
        from covphase.phasediff import difference_coefficients
        a = difference_coefficients(k, st)
        assert np.dot(a, fourier_weights(5, X)).real == pytest.approx(prob(k, st, X), abs=1e-14)

    def test_cutoff_mismatch(self, rng):
        with pytest.raises(CutoffMismatch):
            density_diff(canonical_kernel(2), random_pure_state(Cutoff.total(3), rng), 0.0)


class TestDensityTilde:
    def test_canonical_product_vacuum(self):
        S = 3
        fam = GramFamily({(n, s - n): np.array([1.0]) for s in range(S + 1) for n in range(s + 1)})
        st = TwoModeState.number(0, 0, Cutoff.total(S))
        x, y = np.meshgrid(np.linspace(0, 6, 5), np.linspace(0, 6, 5))
        np.testing.assert_allclose(density_tilde(fam, st, x, y), 1.0, atol=1e-15)

    def test_normalization(self, rng):
        S = 5
        fam = random_gram_family(S, rng, vector_dim=6)
        st = random_mixed_state(Cutoff.total(S), rng)
        m = 2 * S + 3
        g = TWO_PI * np.arange(m) / m
        x, y = np.meshgrid(g, g)
        assert density_tilde(fam, st, x, y).mean() == pytest.approx(st.trace, abs=1e-9)

    def test_marginal_identity(self, rng):
        S = 6
        fam = random_gram_family(S, rng, vector_dim=5)
        k = diff_from_theta_covariant(fam, S)
        st = random_mixed_state(Cutoff.total(S), rng)
        th = density_grid(k)
        g = density_diff(k, st, th)
        np.testing.assert_allclose(marginal_from_tilde(fam, st, th, 4 * S + 5), g, atol=1e-9)

    def test_separable_factorizes(self, rng):
        S = 4
        phi1 = [unit_vector(rng, 3) for _ in range(S + 1)]
        phi2 = [unit_vector(rng, 3) for _ in range(S + 1)]
        fam = product_family(S, phi1, phi2)
        from covphase.phase1 import kernel_from_vectors
        c1, c2 = kernel_from_vectors(phi1), kernel_from_vectors(phi2)
        a, b = unit_vector(rng, 3), unit_vector(rng, 2)
        st = TwoModeState.product(a, b, Cutoff.total(S))
        for x, y in rng.uniform(0, TWO_PI, (5, 2)):
            expected = phase_density(c1.truncate(3), a, x) * phase_density(c2.truncate(2), b, y)
            assert density_tilde(fam, st, x, y) == pytest.approx(expected, abs=1e-12)


class TestBarnettPegg:
    def test_vacuum(self):
        v = FourierFunction([1.0])
        assert barnett_pegg_prob(v, v, HALF) == pytest.approx(0.5, abs=1e-15)

    def test_number_state_uniform(self, rng):
        X = random_interval_set(rng)
        psi = FourierFunction(number_vector(3, 3).coefficients)
        phi = FourierFunction(unit_vector(rng, 5))
        assert barnett_pegg_prob(phi, psi, X) == pytest.approx(X.total_length / TWO_PI, abs=1e-12)

    def test_plus_states(self):
        f = FourierFunction([1 / math.sqrt(2), 1 / math.sqrt(2)])
        st = product_state(f, f)
        assert barnett_pegg_prob(f, f, HALF) == pytest.approx(prob(canonical_kernel(2), st, HALF), abs=1e-14)

    def test_boundary_function_gives_canonical_density(self, rng):
        c = unit_vector(rng, 6)
        f = FourierFunction(c)
        th = rng.uniform(0, TWO_PI, 7)
        np.testing.assert_allclose(np.abs(f(th)) ** 2, phase_density(kernel_canonical(5), c, th), atol=1e-13)

    def test_against_direct_double_integral(self, rng):
        phi, psi = FourierFunction(unit_vector(rng, 3)), FourierFunction(unit_vector(rng, 4))
        X = IntervalSet.of((0.3, 1.7))
        # midpoint rule over x is exact for these trigonometric polynomials
        xs = TWO_PI * (np.arange(64) + 0.5) / 64
        from scipy.integrate import quad
        inner = lambda t: np.mean(np.abs(phi(xs + t)) ** 2 * np.abs(psi(xs)) ** 2)
        val = quad(inner, 0.3, 1.7, epsabs=1e-13)[0] / TWO_PI
        assert barnett_pegg_prob(phi, psi, X) == pytest.approx(val, abs=1e-11)

    def test_rejects_non_unit(self):
        with pytest.raises(NonUnitNorm):
            barnett_pegg_prob(FourierFunction([1.0, 1.0]), FourierFunction([1.0]), HALF)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), d1=st.integers(1, 11), d2=st.integers(1, 11))
    def test_equals_kernel_path(self, seed, d1, d2):
        rng = np.random.default_rng(seed)
        phi, psi = FourierFunction(unit_vector(rng, d1)), FourierFunction(unit_vector(rng, d2))
        X = random_interval_set(rng)
        S = d1 + d2 - 2
        assert abs(barnett_pegg_prob(phi, psi, X) - prob(canonical_kernel(S), product_state(phi, psi), X)) <= 1e-10

    def test_json(self):
        f = FourierFunction.from_json({"coeffs": [[0.6, 0], [0, 0.8]]})
        np.testing.assert_array_equal(f.coefficients, [0.6, 0.8j])


class TestFirstMoment:
    def test_diagonal_pi(self, rng):
        M = first_moment(random_diff_kernel(6, rng)).matrix
        np.testing.assert_allclose(np.diag(M), math.pi, atol=1e-15)

    def test_canonical_entry(self):
        M = first_moment(canonical_kernel(3))
        assert M.entry((1, 0), (0, 1)) == pytest.approx(-1j, abs=1e-15)

    def test_hermitian(self, rng):
        M = first_moment(random_diff_kernel(8, rng)).matrix
        assert np.max(np.abs(M - M.conj().T)) <= 1e-14

    def test_riemann_oracle(self, rng):
        for S in (0, 3, 6):
            k = random_diff_kernel(S, rng)
            R = moment_riemann_sum(k, 10_000)
            assert np.max(np.abs(R - first_moment(k).matrix)) <= 1e-6

    def test_round_trip(self, rng):
        for k in (canonical_kernel(5), random_diff_kernel(8, rng), random_diff_kernel(0, rng)):
            assert reconstruct_from_first_moment(first_moment(k)).max_difference(k) <= 1e-12

    def test_pi_identity_gives_identity_blocks(self):
        c = Cutoff.total(4)
        k = reconstruct_from_first_moment(TwoModeOperator(math.pi * np.eye(c.dim, dtype=complex), c))
        for s, b in enumerate(k.blocks):
            np.testing.assert_array_equal(b, np.eye(s + 1))

    def test_malformed(self):
        c = Cutoff.total(2)
        with pytest.raises(MalformedMoment):
            reconstruct_from_first_moment(TwoModeOperator(np.eye(c.dim, dtype=complex), c))
        m = math.pi * np.eye(c.dim, dtype=complex)
        m[0, 1] = 1j
        with pytest.raises(MalformedMoment):
            reconstruct_from_first_moment(TwoModeOperator(m, c))
        m = math.pi * np.eye(c.dim, dtype=complex)
        m[0, 1] = m[1, 0] = 0.5  # couples sectors 0 and 1
        with pytest.raises(MalformedMoment):
            reconstruct_from_first_moment(TwoModeOperator(m, c))
        with pytest.raises(MalformedMoment):
            reconstruct_from_first_moment(TwoModeOperator(math.pi * np.eye(16, dtype=complex), Cutoff.per_mode(3)))


class TestCyclicMoment:
    def test_vacuum_annihilated(self, rng):
        for k in (canonical_kernel(5), random_diff_kernel(5, rng)):
            assert not np.any(cyclic_moment(k, 1).apply((0, 0)))

    def test_canonical_lowering(self):
        C = cyclic_moment(canonical_kernel(4), 1)
        v = C.apply((1, 0))
        assert v[C.cutoff.index[(0, 1)]] == 1 and np.count_nonzero(v) == 1

    def test_against_fourier_assembly(self, rng):
        S = 7
        k = random_diff_kernel(S, rng)
        c = Cutoff.total(S)
        for r in (1, 2, 3):
            # <n,k| int e^{ir t} dE |m,l> = C[n, m] * [n - m = -r]
            direct = np.zeros((c.dim, c.dim), dtype=complex)
            for s in range(S + 1):
                idx, ns = c.sector(s)
                w = (ns[:, None] - ns[None, :]) == -r
                direct[np.ix_(idx, idx)] = k.blocks[s] * w
            assert np.max(np.abs(cyclic_moment(k, r).matrix - direct)) <= 1e-12

    def test_norm_bound(self, rng):
        for _ in range(10):
            k = random_diff_kernel(int(rng.integers(1, 10)), rng)
            assert np.linalg.norm(cyclic_moment(k, 1).matrix, 2) <= 1 + 1e-10

    def test_canonical_isometry_off_first_mode_vacuum(self):
        C = cyclic_moment(canonical_kernel(6), 1).matrix
        c = Cutoff.total(6)
        cols = [i for i, (n, _) in enumerate(c.labels) if n >= 1]
        G = C[:, cols].conj().T @ C[:, cols]
        np.testing.assert_allclose(G, np.eye(len(cols)), atol=1e-15)

    def test_rejects_nonpositive_order(self):
        with pytest.raises(ValueError):
            cyclic_moment(canonical_kernel(2), 0)
