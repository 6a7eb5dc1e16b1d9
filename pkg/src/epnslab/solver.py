"""Periodic-box pseudo-spectral integrator for the coupled two-phase system.

The state is evolved in the log-density formulation ``(n, u, v)`` with
``n = log(rho)``; the exact linear propagator handles the stiff linear part
(electrostatic coupling, drag relaxation, viscosity) and exponential
time-differencing quadratures the nonlinear remainder:

* ``f1 = -u . grad n``
* ``f2 = -u . grad u - grad (-Delta)^{-1} (e^n - 1 - n)``
* ``f3 = -P(v . grad v) + P((e^n - 1)(u - v))``

Products are formed pointwise in physical space and dealiased by the 2/3
rule; ``e^n`` is evaluated exactly, never by a truncated series.  The damped
single-phase mode drops ``v`` and keeps ``f1``, ``f2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import propagator, spectral
from .spectral import (SpectralField, SpectralGrid, VectorSpectralField,
                       leray_project, transform_forward)

SCHEMES = ("etd1", "etd2rk")
MODES = ("epns", "damped")

RHO_MIN, RHO_MAX = 0.8, 1.25  # small-data regime band for the density


class BlowUpError(RuntimeError):
    """Integration produced non-finite values."""

    def __init__(self, step_index: int, t: float):
        super().__init__(f"non-finite values at step {step_index} (t = {t:g})")
        self.step_index = step_index
        self.t = t


class StabilityError(ValueError):
    """Time step exceeds the advective stability cap."""


@dataclass
class SystemState:
    """Solver state of the coupled system: time plus spectral ``(n, u, v)``."""

    t: float
    n: SpectralField
    u: VectorSpectralField
    v: VectorSpectralField

    @property
    def grid(self) -> SpectralGrid:
        return self.n.grid

    def copy(self) -> "SystemState":
        return SystemState(self.t, self.n.copy(), self.u.copy(), self.v.copy())


@dataclass
class DampedState:
    """Solver state of the damped single-phase system: time plus ``(n, u)``."""

    t: float
    n: SpectralField
    u: VectorSpectralField

    @property
    def grid(self) -> SpectralGrid:
        return self.n.grid

    def copy(self) -> "DampedState":
        return DampedState(self.t, self.n.copy(), self.u.copy())


@dataclass
class SolverConfig:
    """Run parameters; grid geometry plus stepping and output cadence."""

    points_per_axis: int = 32
    box_length: float = 2.0 * math.pi
    dt: float = 1e-2
    t_end: float = 1.0
    scheme: str = "etd2rk"
    mode: str = "epns"
    dealias: bool = True
    record_every: int = 1
    snapshot_every: int = 0
    cutoff_r0: float = 0.5
    cutoff_R0: float = 2.0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.record_every < 1 or self.snapshot_every < 0:
            raise ValueError("output cadences must be positive / nonnegative")

    def make_grid(self) -> SpectralGrid:
        return SpectralGrid(self.points_per_axis, self.box_length,
                            self.cutoff_r0, self.cutoff_R0)


@dataclass
class InitialDataSpec:
    """Initial-data generator parameters.

    ``random-band-limited`` draws mean-zero random fields supported on integer
    modes with magnitude in ``band`` and rescales them to max amplitude
    ``amplitude``; ``single-mode`` uses one cosine in the density;
    ``file`` reloads a snapshot.
    """

    kind: str = "random-band-limited"
    amplitude: float = 1e-3
    band: tuple = (1, 3)
    seed: int = 0
    mode_vector: tuple = (1, 0, 0)
    path: str = None

    def __post_init__(self):
        if self.kind not in ("random-band-limited", "single-mode", "file"):
            raise ValueError(f"unknown initial-data kind {self.kind!r}")
        if self.kind != "file" and not 0 <= self.amplitude < 0.5:
            raise ValueError("density amplitude must satisfy 0 <= eps < 1/2 "
                             "(keeps log(1 + sigma) in the small-data regime)")


def band_limited_pattern(grid: SpectralGrid, rng: np.random.Generator,
                         band=(1, 3)) -> np.ndarray:
    """Random real pattern supported on the mode band, scaled to max amplitude 1."""
    k_lo, k_hi = band
    n = grid.points_per_axis
    modes = np.fft.fftfreq(n, d=1.0 / n)
    m_mag = np.sqrt(modes.reshape(n, 1, 1) ** 2 + modes.reshape(1, n, 1) ** 2
                    + modes.reshape(1, 1, n) ** 2)
    mask = (m_mag >= k_lo) & (m_mag <= k_hi)
    coeffs = np.zeros(grid.shape, dtype=np.complex128)
    coeffs[mask] = rng.normal(size=int(mask.sum())) + 1j * rng.normal(size=int(mask.sum()))
    field = SpectralField(grid, coeffs, real_flag=False).hermitianized()
    field.coefficients[0, 0, 0] = 0.0
    phys = np.fft.ifftn(field.coefficients, norm="ortho").real
    peak = np.max(np.abs(phys))
    if peak == 0:
        raise ValueError(f"band {band} selects no modes on this grid")
    return phys / peak


def _draw_patterns(grid: SpectralGrid, spec: InitialDataSpec):
    """Unit-amplitude physical patterns ``(sigma, u, v)`` for a data spec."""
    if spec.kind == "single-mode":
        x, y, z = grid.meshgrid()
        mv = spec.mode_vector
        phase = 2.0 * math.pi / grid.box_length * (mv[0] * x + mv[1] * y + mv[2] * z)
        return np.cos(phase), np.zeros((3,) + grid.shape), np.zeros((3,) + grid.shape)
    rng = np.random.default_rng(spec.seed)
    sigma = band_limited_pattern(grid, rng, spec.band)
    u = np.stack([band_limited_pattern(grid, rng, spec.band) for _ in range(3)])
    v = np.stack([band_limited_pattern(grid, rng, spec.band) for _ in range(3)])
    return sigma, u, v


def make_initial(grid: SpectralGrid, spec: InitialDataSpec, mode: str = "epns"):
    """Build an initial state with the neutrality condition satisfied exactly.

    The density perturbation ``sigma`` is mean zero by construction, so
    ``rho0 = 1 + sigma`` has ``int (rho0 - 1) dx = 0`` exactly;
    ``n0 = log(rho0)`` is evaluated pointwise.  The incompressible velocity is
    projected onto divergence-free fields.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if spec.kind == "file":
        return load_state(spec.path, grid=grid, mode=mode)

    eps = spec.amplitude
    sigma_pat, u_pat, v_pat = _draw_patterns(grid, spec)
    sigma = eps * sigma_pat
    if np.max(np.abs(sigma)) >= 0.5:
        raise ValueError("density perturbation reached |sigma| >= 1/2")
    n = transform_forward(grid, np.log1p(sigma))
    # the log populates the self-conjugate planes at tiny amplitude; keep them
    # empty (dealiased products never reseed them, so they stay empty)
    n.coefficients *= grid.nyquist_free_mask
    u = spectral.vector_from_physical(grid, eps * u_pat)
    if mode == "damped":
        return DampedState(0.0, n, u)
    v = leray_project(spectral.vector_from_physical(grid, eps * v_pat))
    return SystemState(0.0, n, u, v)


def linearization_reference(grid: SpectralGrid, spec: InitialDataSpec, mode: str = "epns"):
    """Unit-amplitude state whose linear evolution the nonlinear flow tracks.

    For data of amplitude ``eps`` the nonlinear solution differs from
    ``eps * linear_solve(t, reference)`` by ``O(eps^2)`` (the log of the
    density contributes at second order as well).
    """
    sigma_pat, u_pat, v_pat = _draw_patterns(grid, spec)
    n = transform_forward(grid, sigma_pat)
    u = spectral.vector_from_physical(grid, u_pat)
    if mode == "damped":
        return DampedState(0.0, n, u)
    v = leray_project(spectral.vector_from_physical(grid, v_pat))
    return SystemState(0.0, n, u, v)


def save_state(path, state) -> None:
    """Write a state snapshot (components ``n, u_x, u_y, u_z[, v_x, v_y, v_z]``)."""
    fields = [state.n, *state.u.components]
    if isinstance(state, SystemState):
        fields += list(state.v.components)
    spectral.write_snapshot(path, state.t, fields)


def load_state(path, grid: SpectralGrid = None, mode: str = "epns"):
    t, fields = spectral.read_snapshot(path, grid)
    if mode == "epns":
        if len(fields) != 7:
            raise spectral.SnapshotFormatError(
                f"coupled state snapshot needs 7 components, found {len(fields)}")
        return SystemState(t, fields[0], VectorSpectralField(tuple(fields[1:4])),
                           VectorSpectralField(tuple(fields[4:7])))
    if len(fields) != 4:
        raise spectral.SnapshotFormatError(
            f"damped state snapshot needs 4 components, found {len(fields)}")
    return DampedState(t, fields[0], VectorSpectralField(tuple(fields[1:4])))


# ---------------------------------------------------------------------------
# nonlinear terms

def nonlinear_terms(state: SystemState, dealias: bool = True):
    """Spectral nonlinear forcing ``(f1, f2, f3)`` of the coupled system."""
    f1, f2, f3, _ = _rhs_epns(state, dealias)
    g = state.grid
    return (SpectralField(g, f1), VectorSpectralField.from_stack(g, f2),
            VectorSpectralField.from_stack(g, f3))


def damped_terms(state: DampedState, dealias: bool = True):
    """Spectral nonlinear forcing ``(f1, f2)`` of the damped system."""
    f1, f2, _ = _rhs_damped(state, dealias)
    g = state.grid
    return SpectralField(g, f1), VectorSpectralField.from_stack(g, f2)


def _rhs_epns(state: SystemState, dealias: bool):
    g = state.grid
    n_hat = state.n.coefficients
    u_hat = state.u.coefficient_stack()
    v_hat = state.v.coefficient_stack()
    kx, ky, kz = g.kx, g.ky, g.kz

    # one batched inverse transform: fields, grad n, and all velocity gradients
    stack = np.empty((28,) + g.shape, dtype=np.complex128)
    stack[0] = n_hat
    stack[1:4] = u_hat
    stack[4:7] = v_hat
    for i, k in enumerate((kx, ky, kz)):
        stack[7 + i] = 1j * k * n_hat
        stack[10 + 3 * i:13 + 3 * i] = 1j * k * u_hat
        stack[19 + 3 * i:22 + 3 * i] = 1j * k * v_hat
    phys = spectral.ifftn_batch(stack).real
    n_phys, u_phys, v_phys = phys[0], phys[1:4], phys[4:7]
    grad_n = phys[7:10]
    grad_u = phys[10:19].reshape((3, 3) + g.shape)  # [i, j] = d_i u_j
    grad_v = phys[19:28].reshape((3, 3) + g.shape)

    expn = np.expm1(n_phys)  # e^n - 1, evaluated pointwise
    fwd = np.empty((8,) + g.shape)
    fwd[0] = -np.einsum("ixyz,ixyz->xyz", u_phys, grad_n)
    fwd[1:4] = -np.einsum("ixyz,ijxyz->jxyz", u_phys, grad_u)
    fwd[4] = expn - n_phys
    fwd[5:8] = (-np.einsum("ixyz,ijxyz->jxyz", v_phys, grad_v)
                + expn * (u_phys - v_phys))
    out = spectral.fftn_batch(fwd)
    if dealias:
        out *= g.dealias_mask

    f1 = out[0]
    poisson = out[4] * g.inv_k_squared
    f2 = out[1:4] - np.stack([1j * kx * poisson, 1j * ky * poisson, 1j * kz * poisson])
    f3 = out[5:8]
    kdot = kx * f3[0] + ky * f3[1] + kz * f3[2]
    scale = kdot * g.inv_k_squared
    f3 = f3 - np.stack([kx * scale, ky * scale, kz * scale])

    sup_speed = float(np.max(np.abs(u_phys)) + np.max(np.abs(v_phys)))
    return f1, f2, f3, sup_speed


def _rhs_damped(state: DampedState, dealias: bool):
    g = state.grid
    n_hat = state.n.coefficients
    u_hat = state.u.coefficient_stack()
    kx, ky, kz = g.kx, g.ky, g.kz

    stack = np.empty((16,) + g.shape, dtype=np.complex128)
    stack[0] = n_hat
    stack[1:4] = u_hat
    for i, k in enumerate((kx, ky, kz)):
        stack[4 + i] = 1j * k * n_hat
        stack[7 + 3 * i:10 + 3 * i] = 1j * k * u_hat
    phys = spectral.ifftn_batch(stack).real
    n_phys, u_phys = phys[0], phys[1:4]
    grad_n = phys[4:7]
    grad_u = phys[7:16].reshape((3, 3) + g.shape)

    fwd = np.empty((5,) + g.shape)
    fwd[0] = -np.einsum("ixyz,ixyz->xyz", u_phys, grad_n)
    fwd[1:4] = -np.einsum("ixyz,ijxyz->jxyz", u_phys, grad_u)
    fwd[4] = np.expm1(n_phys) - n_phys
    out = spectral.fftn_batch(fwd)
    if dealias:
        out *= g.dealias_mask

    f1 = out[0]
    poisson = out[4] * g.inv_k_squared
    f2 = out[1:4] - np.stack([1j * kx * poisson, 1j * ky * poisson, 1j * kz * poisson])

    sup_speed = float(np.max(np.abs(u_phys)))
    return f1, f2, sup_speed


def stability_cap(grid: SpectralGrid, sup_speed: float) -> float:
    """Advective CFL cap; the linear terms are integrated exactly."""
    k_max = math.pi * grid.points_per_axis / grid.box_length
    return 0.5 / (k_max * sup_speed + 1.0)


# ---------------------------------------------------------------------------
# time stepping

def step(state, dt: float, scheme: str = "etd2rk", dealias: bool = True):
    """Advance one exponential-integrator step; returns a new state.

    ``etd1``: ``eta <- S(dt)[eta + dt F(eta)]``.  ``etd2rk``: the ``etd1``
    predictor followed by a trapezoidal correction
    ``S(dt) eta + dt/2 [S(dt) F(eta) + F(predictor)]``.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"scheme must be one of {SCHEMES}")
    if isinstance(state, SystemState):
        return _step_epns(state, dt, scheme, dealias)
    return _step_damped(state, dt, scheme, dealias)


def _check_cap(grid, dt, sup_speed):
    cap = stability_cap(grid, sup_speed)
    if dt > cap:
        raise StabilityError(f"dt = {dt:g} exceeds the advective cap {cap:g}")


def _step_epns(state: SystemState, dt, scheme, dealias):
    g = state.grid
    n0, u0, v0 = state.n.coefficients, state.u.coefficient_stack(), state.v.coefficient_stack()
    f1, f2, f3, sup_speed = _rhs_epns(state, dealias)
    _check_cap(g, dt, sup_speed)

    n1, u1, v1 = propagator.apply_propagator_grid(
        g, dt, n0 + dt * f1, u0 + dt * f2, v0 + dt * f3)

    if scheme == "etd2rk":
        # hygiene passes (projection, symmetry) are deferred to the final state
        predictor = SystemState(state.t + dt, SpectralField(g, n1),
                                VectorSpectralField.from_stack(g, u1),
                                VectorSpectralField.from_stack(g, v1))
        p1, p2, p3, _ = _rhs_epns(predictor, dealias)
        n1, u1, v1 = propagator.apply_propagator_grid(
            g, dt, n0 + 0.5 * dt * f1, u0 + 0.5 * dt * f2, v0 + 0.5 * dt * f3)
        n1 += 0.5 * dt * p1
        u1 += 0.5 * dt * p2
        v1 += 0.5 * dt * p3

    return _assemble_epns(state, dt, n1, u1, v1)


def _assemble_epns(state, dt, n_hat, u_hat, v_hat):
    g = state.grid
    kdot = g.kx * v_hat[0] + g.ky * v_hat[1] + g.kz * v_hat[2]
    scale = kdot * g.inv_k_squared
    v_hat = v_hat - np.stack([g.kx * scale, g.ky * scale, g.kz * scale])
    n = SpectralField(g, n_hat).hermitianized()
    u = VectorSpectralField.from_stack(g, u_hat).hermitianized()
    v = VectorSpectralField.from_stack(g, v_hat).hermitianized()
    return SystemState(state.t + dt, n, u, v)


def _step_damped(state: DampedState, dt, scheme, dealias):
    g = state.grid
    n0, u0 = state.n.coefficients, state.u.coefficient_stack()
    f1, f2, sup_speed = _rhs_damped(state, dealias)
    _check_cap(g, dt, sup_speed)

    n1, u1 = propagator.apply_damped_grid(g, dt, n0 + dt * f1, u0 + dt * f2)

    if scheme == "etd2rk":
        predictor = DampedState(state.t + dt, SpectralField(g, n1),
                                VectorSpectralField.from_stack(g, u1))
        p1, p2, _ = _rhs_damped(predictor, dealias)
        n1, u1 = propagator.apply_damped_grid(
            g, dt, n0 + 0.5 * dt * f1, u0 + 0.5 * dt * f2)
        n1 += 0.5 * dt * p1
        u1 += 0.5 * dt * p2

    return _assemble_damped(state, dt, n1, u1)


def _assemble_damped(state, dt, n_hat, u_hat):
    g = state.grid
    n = SpectralField(g, n_hat).hermitianized()
    u = VectorSpectralField.from_stack(g, u_hat).hermitianized()
    return DampedState(state.t + dt, n, u)


def _finite(state) -> bool:
    arrays = [state.n.coefficients] + [c.coefficients for c in state.u.components]
    if isinstance(state, SystemState):
        arrays += [c.coefficients for c in state.v.components]
    return all(np.all(np.isfinite(a)) for a in arrays)


def run(config: SolverConfig, initial=None, spec: InitialDataSpec = None,
        out_dir=None, grid: SpectralGrid = None):
    """Integrate to ``t_end``, recording diagnostics at the configured cadence.

    Returns ``(records, final_state)``.  When ``out_dir`` is given, writes
    ``diagnostics.csv`` plus ``snapshot_<step>.bin`` files there.
    """
    from . import diagnostics

    if grid is None:
        grid = config.make_grid()
    if initial is None:
        if spec is None:
            spec = InitialDataSpec()
        initial = make_initial(grid, spec, config.mode)
    state = initial

    n_steps = int(round(config.t_end / config.dt)) if config.t_end > 0 else 0
    records = [diagnostics.record(state)]
    snapshots = []

    out_path = None
    if out_dir is not None:
        import pathlib
        out_path = pathlib.Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        if config.snapshot_every:
            snap = out_path / "snapshot_000000.bin"
            save_state(snap, state)
            snapshots.append(snap)

    warned = False
    for i in range(1, n_steps + 1):
        state = step(state, config.dt, config.scheme, config.dealias)
        if not _finite(state):
            raise BlowUpError(i, state.t)
        if i % config.record_every == 0 or i == n_steps:
            rec = diagnostics.record(state, records[-1].M_running)
            records.append(rec)
            if not warned and not (RHO_MIN <= rec.rho_min and rec.rho_max <= RHO_MAX):
                warnings.warn(f"density left the small-data band [{RHO_MIN}, {RHO_MAX}] "
                              f"at t = {state.t:g}", RuntimeWarning)
                warned = True
        if out_path is not None and config.snapshot_every and i % config.snapshot_every == 0:
            snap = out_path / f"snapshot_{i:06d}.bin"
            save_state(snap, state)
            snapshots.append(snap)

    if out_path is not None:
        diagnostics.write_csv(records, out_path / "diagnostics.csv")
    return records, state


# ---------------------------------------------------------------------------
# pressure reconstruction

def recover_pressure(state: SystemState, dealias: bool = True) -> SpectralField:
    """Pressure of the incompressible phase from the Helmholtz split.

    The gradient part of ``-v . grad v + e^n (u - v)`` determines ``P`` up to
    the irrelevant constant (zero mode set to 0).
    """
    g = state.grid
    v_hat = state.v.coefficient_stack()
    stack = np.empty((16,) + g.shape, dtype=np.complex128)
    stack[0] = state.n.coefficients
    stack[1:4] = state.u.coefficient_stack()
    stack[4:7] = v_hat
    for i, k in enumerate((g.kx, g.ky, g.kz)):
        stack[7 + 3 * i:10 + 3 * i] = 1j * k * v_hat
    phys = spectral.ifftn_batch(stack).real
    n_phys, u_phys, v_phys = phys[0], phys[1:4], phys[4:7]
    grad_v = phys[7:16].reshape((3, 3) + g.shape)

    rhs = -np.einsum("ixyz,ijxyz->jxyz", v_phys, grad_v) + np.exp(n_phys) * (u_phys - v_phys)
    rhs_hat = spectral.fftn_batch(rhs)
    if dealias:
        rhs_hat *= g.dealias_mask
    kdot = g.kx * rhs_hat[0] + g.ky * rhs_hat[1] + g.kz * rhs_hat[2]
    p_hat = -1j * kdot * g.inv_k_squared
    return SpectralField(g, p_hat).hermitianized()
