"""Exact Fourier-space solution operator of the linearized two-phase system.

At each wavenumber magnitude ``r = |xi|`` the linearization block-diagonalizes
into a damped-oscillator pair (density / longitudinal velocity, complex
eigenvalues with real part -1/2) and a dissipative pair (transverse
velocities, real eigenvalues).  Six scalar symbols built from the eigenvalues
assemble every block of the solution matrix; they are evaluated in closed
form, never by numerical integration.
"""

from __future__ import annotations

import dataclasses
import weakref
from dataclasses import dataclass

import numpy as np

# Below this value of t*|lambda_i - lambda_j| the divided difference
# (e^{l1 t} - e^{l2 t})/(l1 - l2) is evaluated by its quadratic Taylor
# expansion in t to avoid catastrophic cancellation.
_TINY_PHASE = 1e-6


@dataclass(frozen=True)
class AcousticEigenpair:
    """Conjugate eigenvalues of the density / longitudinal-velocity block."""
    lambda1: complex
    lambda2: complex


@dataclass(frozen=True)
class ParabolicEigenpair:
    """Real eigenvalues of the transverse-velocity block, ``lambda4 < lambda3 <= 0``."""
    lambda3: float
    lambda4: float


@dataclass(frozen=True)
class PropagatorSymbols:
    """The six scalar symbols of the solution matrix at one ``(t, r)``.

    ``phi11``, ``d`` and ``phiq`` drive the oscillatory block (they are real
    up to roundoff since the eigenvalues are conjugate); ``psi_perp``,
    ``psi12`` and ``psi33`` drive the dissipative block.
    """

    r: float
    t: float
    phi11: complex
    d: complex
    phiq: complex
    psi_perp: float
    psi12: float
    psi33: float
    acoustic: AcousticEigenpair
    parabolic: ParabolicEigenpair


def acoustic_eigenvalues(r):
    """Vectorized eigenvalues ``(-1 +- i sqrt(3 + 4 r^2)) / 2``."""
    r = np.asarray(r, dtype=float)
    im = 0.5 * np.sqrt(3.0 + 4.0 * r * r)
    lam1 = -0.5 + 1j * im
    return lam1, np.conj(lam1)


def parabolic_eigenvalues(r):
    """Vectorized real eigenvalues of ``lam^2 + (2 + r^2) lam + r^2 = 0``.

    ``lambda3`` uses the product form ``-2 r^2 / (2 + r^2 + sqrt(4 + r^4))``,
    which is exact at ``r = 0`` and free of cancellation for small ``r``.
    """
    r = np.asarray(r, dtype=float)
    r2 = r * r
    root = np.sqrt(4.0 + r2 * r2)
    lam4 = -0.5 * (2.0 + r2 + root)
    lam3 = -2.0 * r2 / (2.0 + r2 + root)
    return lam3, lam4


def eigenvalues_acoustic(r: float) -> AcousticEigenpair:
    if r < 0:
        raise ValueError("wavenumber magnitude must be nonnegative")
    lam1, lam2 = acoustic_eigenvalues(r)
    return AcousticEigenpair(complex(lam1), complex(lam2))


def eigenvalues_parabolic(r: float) -> ParabolicEigenpair:
    if r < 0:
        raise ValueError("wavenumber magnitude must be nonnegative")
    lam3, lam4 = parabolic_eigenvalues(r)
    return ParabolicEigenpair(float(lam3), float(lam4))


def _divided_difference(lam_a, lam_b, t):
    """``(e^{lam_a t} - e^{lam_b t}) / (lam_a - lam_b)`` with a small-t guard."""
    diff = lam_a - lam_b
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = (np.exp(lam_a * t) - np.exp(lam_b * t)) / diff
    taylor = t * (1.0 + 0.5 * (lam_a + lam_b) * t)
    return np.where(np.abs(diff) * t < _TINY_PHASE, taylor, direct)


def symbol_arrays(t: float, r):
    """Six symbol arrays at time ``t`` over an array of wavenumber magnitudes.

    Returns ``(phi11, d, phiq, psi_perp, psi12, psi33)`` as real arrays; the
    oscillatory trio is real because the eigenvalues are complex conjugates.
    """
    if t < 0:
        raise ValueError("backward evaluation refused: the dissipative block is not invertible")
    r = np.asarray(r, dtype=float)
    lam1, lam2 = acoustic_eigenvalues(r)
    lam3, lam4 = parabolic_eigenvalues(r)

    e1, e2 = np.exp(lam1 * t), np.exp(lam2 * t)
    denom = lam1 - lam2
    phi11 = (lam1 * e2 - lam2 * e1) / denom
    d = _divided_difference(lam1, lam2, t)
    phiq = (lam1 * e1 - lam2 * e2) / denom

    e3, e4 = np.exp(lam3 * t), np.exp(lam4 * t)
    denom_p = lam3 - lam4
    psi_perp = ((lam3 + 1.0) * e4 - (lam4 + 1.0) * e3) / denom_p
    psi12 = _divided_difference(lam3, lam4, t).real
    psi33 = ((lam3 + 1.0) * e3 - (lam4 + 1.0) * e4) / denom_p

    return phi11.real, d.real, phiq.real, psi_perp, psi12, psi33


def symbols(t: float, r: float) -> PropagatorSymbols:
    """Closed-form symbols at a single ``(t, r)``; ``t < 0`` is rejected."""
    if t < 0:
        raise ValueError("backward evaluation refused: the dissipative block is not invertible")
    if r < 0:
        raise ValueError("wavenumber magnitude must be nonnegative")
    acoustic = eigenvalues_acoustic(r)
    parabolic = eigenvalues_parabolic(r)
    lam1, lam2 = acoustic.lambda1, acoustic.lambda2
    lam3, lam4 = parabolic.lambda3, parabolic.lambda4

    e1, e2 = np.exp(lam1 * t), np.exp(lam2 * t)
    phi11 = (lam1 * e2 - lam2 * e1) / (lam1 - lam2)
    d = complex(_divided_difference(np.complex128(lam1), np.complex128(lam2), np.float64(t)))
    phiq = (lam1 * e1 - lam2 * e2) / (lam1 - lam2)

    e3, e4 = np.exp(lam3 * t), np.exp(lam4 * t)
    psi_perp = ((lam3 + 1.0) * e4 - (lam4 + 1.0) * e3) / (lam3 - lam4)
    psi12 = float(_divided_difference(np.float64(lam3), np.float64(lam4), np.float64(t)))
    psi33 = ((lam3 + 1.0) * e3 - (lam4 + 1.0) * e4) / (lam3 - lam4)

    return PropagatorSymbols(r=float(r), t=float(t), phi11=complex(phi11), d=d,
                             phiq=complex(phiq), psi_perp=float(psi_perp),
                             psi12=psi12, psi33=float(psi33),
                             acoustic=acoustic, parabolic=parabolic)


# ---------------------------------------------------------------------------
# eigenvalue asymptotics and the uniform decay gap

def asymptotics_residuals(r):
    """Small-r expansion residuals ``|lam3 + r^2/2|`` and ``|lam4 + 2 + r^2/2|``."""
    lam3, lam4 = parabolic_eigenvalues(r)
    r2 = np.asarray(r, dtype=float) ** 2
    return np.abs(lam3 + 0.5 * r2), np.abs(lam4 + 2.0 + 0.5 * r2)


def decay_gap_bound(r0: float, R0: float) -> float:
    """Uniform bound ``min(r0^2 / (R0^2 + 2), 1/2)`` on ``-Re(lambda)`` for ``r >= r0``."""
    return min(r0 * r0 / (R0 * R0 + 2.0), 0.5)


def spectral_gap_margin(r_values, r0: float, R0: float) -> float:
    """``max Re(lambda) + gap`` over the scan; nonpositive means the gap holds."""
    r = np.asarray(r_values, dtype=float)
    lam1, _ = acoustic_eigenvalues(r)
    lam3, lam4 = parabolic_eigenvalues(r)
    max_re = max(float(np.max(lam1.real)), float(np.max(lam3)), float(np.max(lam4)))
    return max_re + decay_gap_bound(r0, R0)


# ---------------------------------------------------------------------------
# single-mode application (reference path, used by tests and oracles)

def apply_propagator_mode(t: float, xi, n0: complex, u0, v0):
    """Evolve one Fourier mode ``(n0, u0, v0)`` of the coupled linear system.

    ``xi`` is the 3-vector wavenumber; at ``xi = 0`` the singular projector and
    the density-to-velocity coupling are defined as 0, which reproduces the
    hand-derived zero-mode ODE limit.
    """
    xi = np.asarray(xi, dtype=float)
    u0 = np.asarray(u0, dtype=np.complex128)
    v0 = np.asarray(v0, dtype=np.complex128)
    r = float(np.linalg.norm(xi))
    phi11, d, phiq, psi_perp, psi12, psi33 = (float(s) for s in symbol_arrays(t, r))

    if r == 0.0:
        n = complex(n0)
        u = psi_perp * u0 + psi12 * v0
        v = psi12 * u0 + psi33 * v0
        return n, u, v

    par = xi * (xi @ u0) / (r * r)
    perp = u0 - par
    n = phi11 * n0 - d * 1j * (xi @ u0)
    u = (-((1.0 + r * r) / (r * r)) * d * 1j * xi * n0
         + psi_perp * perp + phiq * par + psi12 * v0)
    v = psi12 * perp + psi33 * v0
    return complex(n), u, v


def damped_ep_propagator_mode(t: float, xi, n0: complex, u0):
    """Evolve one mode of the damped single-phase system (no viscous partner).

    The longitudinal part follows the oscillatory symbols; the transverse part
    is pure relaxation ``e^{-t}``.
    """
    if t < 0:
        raise ValueError("backward evaluation refused")
    xi = np.asarray(xi, dtype=float)
    u0 = np.asarray(u0, dtype=np.complex128)
    r = float(np.linalg.norm(xi))
    if r == 0.0:
        return complex(n0), np.exp(-t) * u0
    phi11, d, phiq, _, _, _ = symbol_arrays(t, r)
    phi11, d, phiq = float(phi11), float(d), float(phiq)
    par = xi * (xi @ u0) / (r * r)
    perp = u0 - par
    n = phi11 * n0 - d * 1j * (xi @ u0)
    u = (-((1.0 + r * r) / (r * r)) * d * 1j * xi * n0
         + phiq * par + np.exp(-t) * perp)
    return complex(n), u


# ---------------------------------------------------------------------------
# whole-grid application

_GRID_SYMBOL_CACHE = weakref.WeakKeyDictionary()


def grid_symbols(grid, t: float):
    """Symbol arrays over a grid's modes, cached per ``(grid, t)``.

    Also caches the density-to-velocity coupling multiplier
    ``-i d (1 + r^2)/r^2`` (0 at the zero mode).  Time steppers reuse a fixed
    ``dt``, so the hit rate is high; the cache is bounded to avoid growth
    during time scans.
    """
    per_grid = _GRID_SYMBOL_CACHE.setdefault(grid, {})
    key = float(t)
    if key not in per_grid:
        if len(per_grid) >= 8:
            per_grid.clear()
        syms = symbol_arrays(t, grid.k_mag)
        coupling = -1j * syms[1] * (1.0 + grid.k_squared) * grid.inv_k_squared
        per_grid[key] = syms + (coupling,)
    return per_grid[key]


def apply_propagator_grid(grid, t: float, n_hat, u_hat, v_hat):
    """Vectorized :func:`apply_propagator_mode` over every mode of a grid.

    ``n_hat`` has the grid shape, ``u_hat`` and ``v_hat`` are stacked
    ``(3, N, N, N)`` coefficient arrays.  Returns new arrays.  At ``xi = 0``
    the singular multipliers vanish by convention, so the stacked expressions
    reduce to the zero-mode ODE limit (only the density needs an override).
    """
    phi11, d, phiq, psi_perp, psi12, psi33, coupling = grid_symbols(grid, t)

    kx, ky, kz = grid.kx, grid.ky, grid.kz
    kdot_u = kx * u_hat[0] + ky * u_hat[1] + kz * u_hat[2]
    par_scale = kdot_u * grid.inv_k_squared  # longitudinal part is xi * par_scale

    n_out = phi11 * n_hat - 1j * (d * kdot_u)
    n_out[0, 0, 0] = n_hat[0, 0, 0]  # mean density is conserved by the linear flow

    # every k-proportional contribution collected into one scalar multiplier
    a_long = coupling * n_hat + (phiq - psi_perp) * par_scale
    b_long = -psi12 * par_scale
    u_out = np.empty_like(u_hat)
    v_out = np.empty_like(v_hat)
    for i, k in enumerate((kx, ky, kz)):
        u_out[i] = psi_perp * u_hat[i] + psi12 * v_hat[i] + k * a_long
        v_out[i] = psi12 * u_hat[i] + psi33 * v_hat[i] + k * b_long
    return n_out, u_out, v_out


def apply_damped_grid(grid, t: float, n_hat, u_hat):
    """Vectorized damped single-phase propagator over a grid."""
    phi11, d, phiq, _, _, _, coupling = grid_symbols(grid, t)
    decay = np.exp(-t)

    kx, ky, kz = grid.kx, grid.ky, grid.kz
    kdot_u = kx * u_hat[0] + ky * u_hat[1] + kz * u_hat[2]
    par_scale = kdot_u * grid.inv_k_squared

    n_out = phi11 * n_hat - 1j * (d * kdot_u)
    n_out[0, 0, 0] = n_hat[0, 0, 0]

    a_long = coupling * n_hat + (phiq - decay) * par_scale
    u_out = np.empty_like(u_hat)
    for i, k in enumerate((kx, ky, kz)):
        u_out[i] = decay * u_hat[i] + k * a_long
    return n_out, u_out


def linear_solve(t: float, state):
    """Exact linear evolution of a solver state by time ``t`` (zero forcing).

    Works on both the coupled state (``n, u, v``) and the damped single-phase
    state (``n, u``); returns a new state of the same type.
    """
    from .spectral import SpectralField, VectorSpectralField

    grid = state.n.grid
    if hasattr(state, "v"):
        if not (state.u.grid.compatible(grid) and state.v.grid.compatible(grid)):
            raise ValueError("state fields live on different grids")
        n_hat, u_hat, v_hat = apply_propagator_grid(
            grid, t, state.n.coefficients, state.u.coefficient_stack(),
            state.v.coefficient_stack())
        return dataclasses.replace(
            state, t=state.t + t,
            n=SpectralField(grid, n_hat, state.n.real_flag),
            u=VectorSpectralField.from_stack(grid, u_hat, state.u.real_flag),
            v=VectorSpectralField.from_stack(grid, v_hat, state.v.real_flag))
    n_hat, u_hat = apply_damped_grid(
        grid, t, state.n.coefficients, state.u.coefficient_stack())
    return dataclasses.replace(
        state, t=state.t + t,
        n=SpectralField(grid, n_hat, state.n.real_flag),
        u=VectorSpectralField.from_stack(grid, u_hat, state.u.real_flag))


# ---------------------------------------------------------------------------
# generator matrices (for the matrix-exponential oracle and CSV dump)

def acoustic_generator(r: float) -> np.ndarray:
    """2x2 generator of the oscillatory block: ``d/dt (n, q) = -S1 (n, q)``."""
    if r <= 0:
        raise ValueError("acoustic generator needs r > 0")
    return np.array([[0.0, r], [-r - 1.0 / r, 1.0]])


def parabolic_generator(r: float) -> np.ndarray:
    """2x2 generator of the dissipative block: ``d/dt (w, b) = -S2 (w, b)``."""
    return np.array([[1.0, -1.0], [-1.0, 1.0 + r * r]])


def acoustic_block(t: float, r: float) -> np.ndarray:
    """Closed-form ``exp(-t S1)``: ``[[phi11, -d r], [d (1+r^2)/r, phiq]]``."""
    s = symbols(t, r)
    phi11, d, phiq = s.phi11.real, s.d.real, s.phiq.real
    return np.array([[phi11, -d * r], [d * (1.0 + r * r) / r, phiq]])


def parabolic_block(t: float, r: float) -> np.ndarray:
    """Closed-form ``exp(-t S2)``: ``[[psi_perp, psi12], [psi12, psi33]]``."""
    s = symbols(t, r)
    return np.array([[s.psi_perp, s.psi12], [s.psi12, s.psi33]])
