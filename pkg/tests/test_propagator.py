import numpy as np
import pytest
from scipy.linalg import expm

from epnslab import propagator as prop
from epnslab import solver, spectral


def random_mode(rng, solenoidal_v=True):
    xi = rng.normal(size=3)
    n0 = complex(rng.normal(), rng.normal())
    u0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    v0 = rng.normal(size=3) + 1j * rng.normal(size=3)
    if solenoidal_v:
        v0 = v0 - xi * (xi @ v0) / (xi @ xi)
    return xi, n0, u0, v0


class TestEigenvalues:
    def test_acoustic_at_zero(self):
        pair = prop.eigenvalues_acoustic(0.0)
        assert pair.lambda1 == pytest.approx(-0.5 + 0.5j * np.sqrt(3.0), abs=1e-14)
        assert pair.lambda2 == pytest.approx(np.conj(pair.lambda1), abs=1e-14)

    def test_acoustic_at_one(self):
        pair = prop.eigenvalues_acoustic(1.0)
        assert pair.lambda1 == pytest.approx(-0.5 + 0.5j * np.sqrt(7.0), abs=1e-14)

    def test_acoustic_real_part_constant(self, rng):
        for r in rng.uniform(0, 50, size=20):
            pair = prop.eigenvalues_acoustic(r)
            assert pair.lambda1.real == -0.5
            assert pair.lambda2.real == -0.5

    def test_acoustic_vieta(self, rng):
        for r in rng.uniform(0, 10, size=10):
            pair = prop.eigenvalues_acoustic(r)
            assert pair.lambda1 + pair.lambda2 == pytest.approx(-1.0, abs=1e-12)
            assert pair.lambda1 * pair.lambda2 == pytest.approx(r * r + 1.0, rel=1e-12)

    def test_parabolic_at_zero(self):
        pair = prop.eigenvalues_parabolic(0.0)
        assert pair.lambda3 == 0.0
        assert pair.lambda4 == -2.0

    def test_parabolic_at_one(self):
        pair = prop.eigenvalues_parabolic(1.0)
        assert pair.lambda3 == pytest.approx((-3.0 + np.sqrt(5.0)) / 2.0, abs=1e-14)
        assert pair.lambda4 == pytest.approx((-3.0 - np.sqrt(5.0)) / 2.0, abs=1e-14)

    def test_parabolic_vieta_and_order(self, rng):
        for r in rng.uniform(0, 10, size=10):
            pair = prop.eigenvalues_parabolic(r)
            assert pair.lambda4 < pair.lambda3 <= 0.0
            assert pair.lambda3 * pair.lambda4 == pytest.approx(r * r, rel=1e-12, abs=1e-14)
            assert pair.lambda3 + pair.lambda4 == pytest.approx(-(2 + r * r), rel=1e-12)

    def test_negative_r_rejected(self):
        with pytest.raises(ValueError):
            prop.eigenvalues_acoustic(-1.0)
        with pytest.raises(ValueError):
            prop.eigenvalues_parabolic(-0.1)


class TestSymbols:
    def test_identity_at_t_zero(self, rng):
        for r in rng.uniform(0, 10, size=5):
            s = prop.symbols(0.0, r)
            values = (s.phi11, s.d, s.phiq, s.psi_perp, s.psi12, s.psi33)
            for got, want in zip(values, (1, 0, 1, 1, 0, 1)):
                assert got == pytest.approx(want, abs=1e-12)

    def test_zero_wavenumber_half_life(self):
        s = prop.symbols(np.log(2.0), 0.0)
        assert s.psi12 == pytest.approx(3.0 / 8.0, abs=1e-14)
        assert s.psi_perp == pytest.approx(5.0 / 8.0, abs=1e-14)
        assert s.psi33 == pytest.approx(5.0 / 8.0, abs=1e-14)

    def test_oscillatory_trio_is_real(self, rng):
        for _ in range(25):
            t, r = rng.uniform(0, 10, size=2)
            s = prop.symbols(t, r)
            assert abs(s.phi11.imag) < 1e-12
            assert abs(s.d.imag) < 1e-12
            assert abs(s.phiq.imag) < 1e-12

    def test_backward_time_rejected(self):
        with pytest.raises(ValueError):
            prop.symbols(-0.1, 1.0)
        with pytest.raises(ValueError):
            prop.symbol_arrays(-1e-9, np.array([1.0]))

    def test_matrix_exponential_oracle(self, rng):
        worst = 0.0
        for _ in range(30):
            t = rng.uniform(0, 10)
            r = rng.uniform(1e-3, 10)
            worst = max(worst, np.abs(
                prop.acoustic_block(t, r) - expm(-t * prop.acoustic_generator(r))).max())
            worst = max(worst, np.abs(
                prop.parabolic_block(t, r) - expm(-t * prop.parabolic_generator(r))).max())
        assert worst < 1e-10

    def test_density_envelope_bound(self, rng):
        # |phi11| <= e^{-t/2} (|lam1| + |lam2|) / |lam1 - lam2| pointwise
        for _ in range(25):
            t, r = rng.uniform(0, 10, size=2)
            s = prop.symbols(t, r)
            pair = s.acoustic
            bound = (np.exp(-t / 2.0) * (abs(pair.lambda1) + abs(pair.lambda2))
                     / abs(pair.lambda1 - pair.lambda2))
            assert abs(s.phi11) <= bound * (1 + 1e-12)

    def test_dissipative_symbols_sign_and_range(self, rng):
        for _ in range(25):
            t = rng.uniform(1e-3, 10)
            r = rng.uniform(0, 10)
            s = prop.symbols(t, r)
            assert s.psi12 > 0.0
            assert 0.0 < s.psi_perp <= 1.0
            assert 0.0 < s.psi33 <= 1.0

    def test_tiny_time_cancellation_guard(self):
        # divided difference stays accurate where the direct formula cancels
        for t in (1e-9, 1e-8, 1e-7):
            s = prop.symbols(t, 2.0)
            assert s.psi12 == pytest.approx(t, rel=1e-6)
            assert abs(s.d) == pytest.approx(t, rel=1e-6)


class TestAsymptotics:
    def test_quartic_residual_at_small_r(self):
        res3, res4 = prop.asymptotics_residuals(1e-2)
        assert res3 <= 1e-7
        assert res4 <= 1e-7

    def test_residual_slope_is_quartic(self):
        r = np.logspace(-3, -1, 40)
        res3, _ = prop.asymptotics_residuals(r)
        slope = np.polyfit(np.log(r), np.log(res3), 1)[0]
        assert slope == pytest.approx(4.0, abs=0.2)

    def test_gap_margin_nonpositive(self):
        r = np.linspace(0.5, 1000.0, 2000)
        assert prop.spectral_gap_margin(r, 0.5, 10.0) <= 1e-12


class TestModeApplication:
    def test_identity_at_t_zero(self, rng):
        xi, n0, u0, v0 = random_mode(rng)
        n, u, v = prop.apply_propagator_mode(0.0, xi, n0, u0, v0)
        assert n == pytest.approx(n0, abs=1e-12)
        assert np.allclose(u, u0, atol=1e-12)
        assert np.allclose(v, v0, atol=1e-12)

    def test_zero_mode_conserves_total_momentum(self, rng):
        u0 = rng.normal(size=3) + 0j
        v0 = rng.normal(size=3) + 0j
        for t in (0.3, 1.7, 6.0):
            n, u, v = prop.apply_propagator_mode(t, np.zeros(3), 0.5 + 0j, u0, v0)
            assert n == 0.5 + 0j
            assert np.allclose(u + v, u0 + v0, atol=1e-12)

    def test_semigroup_on_random_modes(self, rng):
        worst = 0.0
        for _ in range(40):
            xi, n0, u0, v0 = random_mode(rng)
            t, s = rng.uniform(0, 5, size=2)
            direct = prop.apply_propagator_mode(t + s, xi, n0, u0, v0)
            first = prop.apply_propagator_mode(s, xi, n0, u0, v0)
            composed = prop.apply_propagator_mode(t, xi, *first)
            worst = max(worst, abs(direct[0] - composed[0]),
                        np.abs(direct[1] - composed[1]).max(),
                        np.abs(direct[2] - composed[2]).max())
        assert worst < 1e-10

    def test_generator_residual_by_finite_differences(self):
        # d/dt P(t) = -S P(t); centered differences converge at second order
        r, t = 1.3, 0.7

        def residual(h):
            out = 0.0
            for block, gen in ((prop.acoustic_block, prop.acoustic_generator),
                               (prop.parabolic_block, prop.parabolic_generator)):
                deriv = (block(t + h, r) - block(t - h, r)) / (2 * h)
                out = max(out, np.abs(deriv + gen(r) @ block(t, r)).max())
            return out

        r1, r2 = residual(1e-2), residual(5e-3)
        assert r1 / r2 == pytest.approx(4.0, rel=0.15)

    def test_transverse_consistency_with_block_system(self, rng):
        # solenoidal data evolves by the 2x2 dissipative system componentwise
        for _ in range(10):
            xi = rng.normal(size=3)
            u0 = rng.normal(size=3) + 1j * rng.normal(size=3)
            u0 -= xi * (xi @ u0) / (xi @ xi)
            v0 = rng.normal(size=3) + 1j * rng.normal(size=3)
            v0 -= xi * (xi @ v0) / (xi @ xi)
            t = rng.uniform(0, 4)
            _, u, v = prop.apply_propagator_mode(t, xi, 0j, u0, v0)
            block = prop.parabolic_block(t, float(np.linalg.norm(xi)))
            assert np.abs(u - (block[0, 0] * u0 + block[0, 1] * v0)).max() < 1e-12
            assert np.abs(v - (block[1, 0] * u0 + block[1, 1] * v0)).max() < 1e-12


class TestDampedMode:
    def test_identity_at_t_zero(self, rng):
        xi, n0, u0, _ = random_mode(rng)
        n, u = prop.damped_ep_propagator_mode(0.0, xi, n0, u0)
        assert n == pytest.approx(n0, abs=1e-12)
        assert np.allclose(u, u0, atol=1e-12)

    def test_transverse_pure_relaxation(self):
        xi = np.array([2.0, 0.0, 0.0])
        u0 = np.array([0.0, 1.0, 0.5], dtype=complex)
        for t in (0.5, 1.0, 3.0):
            _, u = prop.damped_ep_propagator_mode(t, xi, 0j, u0)
            assert np.abs(u - np.exp(-t) * u0).max() < 1e-14

    def test_longitudinal_against_matrix_exponential(self, rng):
        worst = 0.0
        for _ in range(20):
            r = rng.uniform(0.05, 8)
            t = rng.uniform(0, 8)
            xi = np.array([r, 0.0, 0.0])
            n0 = complex(rng.normal(), rng.normal())
            amp = complex(rng.normal(), rng.normal())
            u0 = np.array([amp, 0, 0])
            n1, u1 = prop.damped_ep_propagator_mode(t, xi, n0, u0)
            # divergence amplitude q = i (xi . u)/r pairs with n in the 2x2 block
            state = expm(-t * prop.acoustic_generator(r)) @ np.array([n0, 1j * amp])
            worst = max(worst, abs(n1 - state[0]), abs(1j * (xi @ u1) / r - state[1]))
        assert worst < 1e-10

    def test_zero_mode_conventions(self):
        n, u = prop.damped_ep_propagator_mode(2.0, np.zeros(3), 1.5 + 0j,
                                              np.array([1.0, 0, 0], dtype=complex))
        assert n == 1.5 + 0j
        assert u[0] == pytest.approx(np.exp(-2.0), abs=1e-14)


class TestLinearSolve:
    def test_zero_state_stays_zero(self, grid16):
        state = solver.SystemState(
            0.0, spectral.SpectralField.zeros(grid16),
            spectral.VectorSpectralField.zeros(grid16),
            spectral.VectorSpectralField.zeros(grid16))
        out = prop.linear_solve(2.0, state)
        assert spectral.l2_norm(out.n) == 0.0
        assert out.t == 2.0

    def test_acoustic_mode_envelope(self, grid16):
        x = grid16.meshgrid()[0]
        state = solver.SystemState(
            0.0, spectral.transform_forward(grid16, 1e-2 * np.cos(2 * x)),
            spectral.VectorSpectralField.zeros(grid16),
            spectral.VectorSpectralField.zeros(grid16))
        n0 = spectral.l2_norm(state.n)
        for t in (0.5, 2.0, 5.0):
            out = prop.linear_solve(t, state)
            pair = prop.eigenvalues_acoustic(2.0)
            bound = (np.exp(-t / 2) * (abs(pair.lambda1) + abs(pair.lambda2))
                     / abs(pair.lambda1 - pair.lambda2))
            assert spectral.l2_norm(out.n) <= n0 * bound * (1 + 1e-12)

    def test_block_sparsity_for_solenoidal_data(self, grid16, rng):
        from conftest import random_real_field
        v = spectral.leray_project(spectral.VectorSpectralField(tuple(
            spectral.transform_forward(grid16, random_real_field(grid16, rng))
            for _ in range(3))))
        state = solver.SystemState(
            0.0, spectral.SpectralField.zeros(grid16),
            spectral.VectorSpectralField.zeros(grid16), v)
        t = 0.8
        out = prop.linear_solve(t, state)
        _, _, _, _, psi12, psi33 = prop.symbol_arrays(t, grid16.k_mag)
        for i in range(3):
            assert np.abs(out.u.components[i].coefficients
                          - psi12 * v.components[i].coefficients).max() < 1e-12
            assert np.abs(out.v.components[i].coefficients
                          - psi33 * v.components[i].coefficients).max() < 1e-12
        assert np.abs(spectral.divergence(out.v).coefficients).max() < 1e-12

    def test_grid_application_matches_mode_application(self, grid16, rng):
        from conftest import random_real_field
        state = solver.SystemState(
            0.0,
            spectral.transform_forward(grid16, random_real_field(grid16, rng)),
            spectral.VectorSpectralField(tuple(
                spectral.transform_forward(grid16, random_real_field(grid16, rng))
                for _ in range(3))),
            spectral.leray_project(spectral.VectorSpectralField(tuple(
                spectral.transform_forward(grid16, random_real_field(grid16, rng))
                for _ in range(3)))))
        t = 0.6
        out = prop.linear_solve(t, state)
        for index in ((1, 2, 3), (0, 5, 15), (7, 0, 1)):
            xi = np.array([grid16.kx[index[0], 0, 0], grid16.ky[0, index[1], 0],
                           grid16.kz[0, 0, index[2]]])
            n_mode, u_mode, v_mode = prop.apply_propagator_mode(
                t, xi, state.n.coefficients[index],
                np.array([c.coefficients[index] for c in state.u.components]),
                np.array([c.coefficients[index] for c in state.v.components]))
            assert out.n.coefficients[index] == pytest.approx(n_mode, abs=1e-12)
            for i in range(3):
                assert out.u.components[i].coefficients[index] == pytest.approx(u_mode[i], abs=1e-12)
                assert out.v.components[i].coefficients[index] == pytest.approx(v_mode[i], abs=1e-12)

    def test_damped_state_supported(self, grid16, rng):
        from conftest import random_real_field
        state = solver.DampedState(
            0.0, spectral.transform_forward(grid16, random_real_field(grid16, rng)),
            spectral.VectorSpectralField(tuple(
                spectral.transform_forward(grid16, random_real_field(grid16, rng))
                for _ in range(3))))
        out = prop.linear_solve(1.0, state)
        assert isinstance(out, solver.DampedState)
        assert out.t == 1.0
