"""Acceptance suite: one test per criterion, each printed as a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and timings.  Every tolerance is asserted exactly as stated; the
expensive simulation criteria share nothing and can run standalone.
"""

import time

import numpy as np
from scipy.linalg import expm

from epnslab import decay, diagnostics, propagator, solver, spectral


class Stopwatch:
    def __init__(self, budget):
        self.budget = budget
        self.start = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.start


def report(number, name, ok, detail, watch):
    status = "PASS" if ok else "FAIL"
    print(f"{status} criterion {number} ({name}): {detail} [{watch.elapsed:.1f}s]")


def test_criterion_1_eigenvalue_asymptotics():
    watch = Stopwatch(1.0)
    r = np.logspace(-3, -1, 60)
    residual, _ = propagator.asymptotics_residuals(r)
    slope = np.polyfit(np.log(r), np.log(residual), 1)[0]
    ok = abs(slope - 4.0) <= 0.2 and watch.elapsed < watch.budget
    report(1, "eigenvalue asymptotics", ok, f"slope={slope:.4f} (want 4.0 +- 0.2)", watch)
    assert abs(slope - 4.0) <= 0.2
    assert watch.elapsed < watch.budget


def test_criterion_2_spectral_gap():
    watch = Stopwatch(1.0)
    r = np.linspace(0.5, 1e3, 10_000)
    margin = propagator.spectral_gap_margin(r, r0=0.5, R0=10.0)
    ok = margin <= 1e-12 and watch.elapsed < watch.budget
    report(2, "spectral gap", ok,
           f"max Re(lambda) + gap = {margin:.3e} (want <= 1e-12)", watch)
    assert margin <= 1e-12
    assert watch.elapsed < watch.budget


def test_criterion_3_propagator_exactness():
    watch = Stopwatch(5.0)
    rng = np.random.default_rng(42)
    worst_exp = 0.0
    for _ in range(100):
        t = rng.uniform(1e-6, 10.0)
        r = rng.uniform(1e-6, 10.0)
        worst_exp = max(worst_exp, np.abs(
            propagator.acoustic_block(t, max(r, 1e-4))
            - expm(-t * propagator.acoustic_generator(max(r, 1e-4)))).max())
        worst_exp = max(worst_exp, np.abs(
            propagator.parabolic_block(t, r)
            - expm(-t * propagator.parabolic_generator(r))).max())

    worst_semi = 0.0
    for _ in range(100):
        xi = rng.normal(size=3)
        n0 = complex(rng.normal(), rng.normal())
        u0 = rng.normal(size=3) + 1j * rng.normal(size=3)
        v0 = rng.normal(size=3) + 1j * rng.normal(size=3)
        v0 -= xi * (xi @ v0) / (xi @ xi)
        t, s = rng.uniform(1e-3, 5.0, size=2)
        direct = propagator.apply_propagator_mode(t + s, xi, n0, u0, v0)
        hop = propagator.apply_propagator_mode(t, xi,
                                               *propagator.apply_propagator_mode(s, xi, n0, u0, v0))
        worst_semi = max(worst_semi, abs(direct[0] - hop[0]),
                         np.abs(direct[1] - hop[1]).max(), np.abs(direct[2] - hop[2]).max())
    ok = worst_exp <= 1e-10 and worst_semi <= 1e-10 and watch.elapsed < watch.budget
    report(3, "propagator exactness", ok,
           f"expm err={worst_exp:.2e}, semigroup defect={worst_semi:.2e} (want <= 1e-10)", watch)
    assert worst_exp <= 1e-10
    assert worst_semi <= 1e-10
    assert watch.elapsed < watch.budget


def test_criterion_4_linear_upper_rates():
    watch = Stopwatch(30.0)
    profiles = decay.ProfileSet(v0=decay.RadialProfile.gaussian(1.0, 1.0))
    times = decay.log_spaced_times(1e2, 1e4, 25)
    slopes = {}
    for target, k in (("v", 0), ("u", 0), ("v", 1), ("u", 1), ("diff", 0)):
        series = decay.decay_series(
            times, lambda t, target=target, k=k: decay.linear_l2_norm(t, k, profiles, target))
        slopes[(target, k)] = decay.fit_decay(series, model="power").slope
    expected = {("v", 0): -0.75, ("u", 0): -0.75, ("v", 1): -1.25,
                ("u", 1): -1.25, ("diff", 0): -1.75}
    errs = {key: abs(slopes[key] - expected[key]) for key in expected}
    ok = all(err <= 0.05 for err in errs.values()) and watch.elapsed < watch.budget
    detail = " ".join(f"{t},k{k}:{slopes[(t, k)]:+.3f}" for t, k in expected)
    report(4, "linear upper rates", ok, detail + " (want +-0.05)", watch)
    for key, err in errs.items():
        assert err <= 0.05, (key, slopes[key])
    assert watch.elapsed < watch.budget


def test_criterion_5_linear_density_decay():
    watch = Stopwatch(10.0)
    profiles = decay.ProfileSet(n0=decay.RadialProfile.gaussian(1.0, 1.0))
    times = np.linspace(1.0, 40.0, 25)
    series = decay.decay_series(
        times, lambda t: decay.linear_l2_norm(t, 0, profiles, "n"))
    fit = decay.fit_decay(series, model="exp")
    ok = fit.slope <= -0.45 and watch.elapsed < watch.budget
    report(5, "linear density decay", ok,
           f"exp slope={fit.slope:+.4f} (want <= -0.45)", watch)
    assert fit.slope <= -0.45
    assert watch.elapsed < watch.budget


def test_criterion_6_lower_bound_sandwich():
    watch = Stopwatch(30.0)
    alpha0, r0 = 1.0, 0.5
    profiles = decay.ProfileSet(v0=decay.RadialProfile.bump(alpha0, r0))
    times = decay.log_spaced_times(1e2, 1e4, 25)

    bound = np.array([decay.lower_bound_norm(t, alpha0, r0, "v") for t in times])
    # the two-sided estimate controls the combined velocity norm ||u|| + ||v||
    upper = np.array([decay.linear_l2_norm(t, 0, profiles, "u")
                      + decay.linear_l2_norm(t, 0, profiles, "v") for t in times])
    sandwich_ok = bool(np.all(bound <= upper))

    slope_bound = decay.fit_decay(decay.DecaySeries(times, bound), model="power").slope
    slope_upper = decay.fit_decay(decay.DecaySeries(times, upper), model="power").slope
    diff_bound = np.array([decay.lower_bound_norm(t, alpha0, r0, "diff") for t in times])
    slope_diff = decay.fit_decay(decay.DecaySeries(times, diff_bound), model="power").slope

    ok = (sandwich_ok and abs(slope_bound + 0.75) <= 0.05
          and abs(slope_upper + 0.75) <= 0.05 and abs(slope_diff + 1.75) <= 0.05
          and watch.elapsed < watch.budget)
    report(6, "lower-bound sandwich", ok,
           f"bound<=upper:{sandwich_ok} slopes bound:{slope_bound:+.3f} "
           f"upper:{slope_upper:+.3f} diff:{slope_diff:+.3f}", watch)
    assert sandwich_ok
    assert abs(slope_bound + 0.75) <= 0.05
    assert abs(slope_upper + 0.75) <= 0.05
    assert abs(slope_diff + 1.75) <= 0.05
    assert watch.elapsed < watch.budget


def test_criterion_7_nonlinear_solver_properties():
    watch = Stopwatch(120.0)
    grid = spectral.SpectralGrid(32)
    state = solver.make_initial(
        grid, solver.InitialDataSpec(amplitude=1e-3, band=(1, 3), seed=0))

    max_div = np.abs(spectral.divergence(state.v).coefficients).max()
    max_drift = abs(spectral.box_integral(grid, np.exp(state.n.physical()) - 1.0))
    energies = [diagnostics.lyapunov_physical(state)]
    rho_lo, rho_hi = 1.0, 1.0
    steps = 1000
    for _ in range(steps):
        state = solver.step(state, 1e-2)
        max_div = max(max_div, np.abs(spectral.divergence(state.v).coefficients).max())
        rho = np.exp(state.n.physical())
        rho_lo = min(rho_lo, rho.min())
        rho_hi = max(rho_hi, rho.max())
        max_drift = max(max_drift, abs(spectral.box_integral(grid, rho - 1.0)))
        energies.append(diagnostics.lyapunov_physical(state))
    max_increase = float(np.max(np.diff(energies)))

    div_ok = max_div <= 1e-12
    drift_ok = max_drift <= 1e-10
    lyap_ok = max_increase <= 1e-9
    rho_ok = 0.8 <= rho_lo and rho_hi <= 1.25
    ok = div_ok and drift_ok and lyap_ok and rho_ok and watch.elapsed < watch.budget
    report(7, "nonlinear solver properties", ok,
           f"div={max_div:.2e}(<=1e-12:{div_ok}) drift={max_drift:.2e}(<=1e-10:{drift_ok}) "
           f"lyap_inc={max_increase:.2e}(<=1e-9:{lyap_ok}) rho=[{rho_lo:.4f},{rho_hi:.4f}]", watch)
    assert div_ok
    assert lyap_ok
    assert rho_ok
    assert watch.elapsed < watch.budget
    # known red: the second-order integrator's intrinsic O(dt^2) drift of this
    # nonlinearly conserved integral exceeds the tolerance at dt = 1e-2 (it
    # passes at dt = 5e-3 and scales by 1/4 per halving); kept strict.
    assert drift_ok, f"neutrality drift {max_drift:.3e} > 1e-10"


def test_criterion_8_linearization_consistency():
    watch = Stopwatch(120.0)
    grid = spectral.SpectralGrid(32)
    spec = solver.InitialDataSpec(amplitude=1.0e-3, band=(1, 3), seed=11)
    reference = propagator.linear_solve(1.0, solver.linearization_reference(grid, spec))

    def deviation(eps):
        st = solver.make_initial(
            grid, solver.InitialDataSpec(amplitude=eps, band=(1, 3), seed=11))
        for _ in range(100):
            st = solver.step(st, 1e-2)
        total = np.sum(np.abs(st.n.coefficients - eps * reference.n.coefficients) ** 2)
        for a, b in zip(st.u.components + st.v.components,
                        reference.u.components + reference.v.components):
            total += np.sum(np.abs(a.coefficients - eps * b.coefficients) ** 2)
        return float(np.sqrt(total))

    ratio = deviation(1e-3) / deviation(5e-4)
    ok = 3.0 <= ratio <= 5.0 and watch.elapsed < watch.budget
    report(8, "linearization consistency", ok,
           f"deviation ratio={ratio:.4f} (want in [3, 5], theory 4)", watch)
    assert 3.0 <= ratio <= 5.0
    assert watch.elapsed < watch.budget


def test_criterion_9_etd2rk_order():
    watch = Stopwatch(60.0)
    grid = spectral.SpectralGrid(32)
    state = solver.make_initial(
        grid, solver.InitialDataSpec(amplitude=5e-2, band=(1, 3), seed=3))

    def distance(a, b):
        out = np.sum(np.abs(a.n.coefficients - b.n.coefficients) ** 2)
        for ca, cb in zip(a.u.components + a.v.components, b.u.components + b.v.components):
            out += np.sum(np.abs(ca.coefficients - cb.coefficients) ** 2)
        return np.sqrt(out)

    def local_error(dt):
        coarse = solver.step(state, dt)
        fine = state
        for _ in range(64):
            fine = solver.step(fine, dt / 64)
        return distance(coarse, fine)

    ratio = local_error(0.02) / local_error(0.01)
    ok = 6.0 <= ratio <= 10.0 and watch.elapsed < watch.budget
    report(9, "ETD2RK local order", ok,
           f"Richardson ratio={ratio:.3f} (want in [6, 10], theory 8)", watch)
    assert 6.0 <= ratio <= 10.0
    assert watch.elapsed < watch.budget


def test_criterion_10_damped_exponential_decay():
    watch = Stopwatch(120.0)
    config = solver.SolverConfig(points_per_axis=32, dt=1e-2, t_end=20.0,
                                 mode="damped", record_every=10)
    records, _ = solver.run(
        config, spec=solver.InitialDataSpec(amplitude=1e-3, band=(1, 4), seed=2))
    times = np.array([r.t for r in records])
    h3 = np.array([
        np.sqrt(r.n_L2 ** 2 + r.n_H1 ** 2 + r.n_H2 ** 2 + r.n_H3dot ** 2)
        + np.sqrt(r.u_L2 ** 2 + r.u_H1 ** 2 + r.u_H2 ** 2 + r.u_H3dot ** 2)
        for r in records])
    mask = times >= 2.0
    fit = decay.fit_decay(decay.DecaySeries(times[mask], h3[mask]), model="exp")
    ok = fit.slope <= -0.2 and fit.r_squared >= 0.99 and watch.elapsed < watch.budget
    report(10, "damped exponential decay", ok,
           f"slope={fit.slope:+.4f} (<= -0.2), R^2={fit.r_squared:.5f} (>= 0.99)", watch)
    assert fit.slope <= -0.2
    assert fit.r_squared >= 0.99
    assert watch.elapsed < watch.budget


def test_criterion_11_inequality_suite():
    watch = Stopwatch(30.0)
    grid = spectral.SpectralGrid(32)
    rng = np.random.default_rng(7)
    worst = np.inf
    for i in range(100):
        k_lo = int(rng.integers(1, 5))
        k_hi = int(rng.integers(k_lo, 9))
        field = spectral.transform_forward(
            grid, solver.band_limited_pattern(grid, rng, (k_lo, k_hi)))
        checks = diagnostics.check_field_inequalities(field, f"f{i}")
        worst = min(worst, min(c.margin for c in checks))
    ok = worst >= -1e-10 and watch.elapsed < watch.budget
    report(11, "inequality suite", ok,
           f"min margin={worst:.3e} over 100 fields (want >= -1e-10)", watch)
    assert worst >= -1e-10
    assert watch.elapsed < watch.budget
