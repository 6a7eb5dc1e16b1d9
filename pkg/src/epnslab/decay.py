"""Whole-space decay measurement by radial quadrature over the propagator symbols.

Working directly with radially symmetric spectral amplitudes avoids the
spectral gap of any finite periodic box, so algebraic large-time rates are
observable.  Transverse vector amplitudes follow a fixed alignment
convention: a single unit field ``e(xi)`` perpendicular to ``xi`` carries the
transverse velocity of the compressible phase, and the incompressible-phase
amplitude either shares it (``aligned``) or uses the orthogonal complement
``xi_hat x e`` (``orthogonal``).  Cross terms then reduce to scalar products
of amplitudes and every norm becomes a 1-D integral.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from .config import worker_count
from .propagator import symbol_arrays

TARGETS = ("n", "u", "v", "diff")
ALIGNMENTS = ("aligned", "orthogonal")

_QUAD_KWARGS = dict(epsabs=1e-14, epsrel=1e-12, limit=400)


class ProfileError(ValueError):
    """Initial-data profile is unusable (wrong kind, non-integrable, ...)."""


@dataclass(frozen=True)
class RadialProfile:
    """Radially symmetric spectral amplitude ``g(r) >= 0``.

    Kinds: ``gaussian`` (``A exp(-r^2 / (2 sigma^2))``), ``bump`` (amplitude A
    on ``r <= rc`` with a raised-cosine rolloff of width ``w``), ``tabulated``
    (linear interpolation through sample points, 0 beyond the last).
    """

    kind: str
    amplitude: float = 1.0
    sigma: float = 1.0
    rc: float = 0.5
    width: float = 0.25
    r_points: tuple = field(default=())
    values: tuple = field(default=())

    @classmethod
    def gaussian(cls, amplitude: float = 1.0, sigma: float = 1.0) -> "RadialProfile":
        if sigma <= 0:
            raise ProfileError("gaussian sigma must be positive")
        return cls("gaussian", amplitude=amplitude, sigma=sigma)

    @classmethod
    def bump(cls, amplitude: float = 1.0, rc: float = 0.5, width: float = None) -> "RadialProfile":
        if rc <= 0:
            raise ProfileError("bump radius must be positive")
        if width is None:
            width = 0.5 * rc
        if width <= 0:
            raise ProfileError("bump rolloff width must be positive")
        return cls("bump", amplitude=amplitude, rc=rc, width=width)

    @classmethod
    def tabulated(cls, r_points, values) -> "RadialProfile":
        r_points = tuple(float(r) for r in r_points)
        values = tuple(float(v) for v in values)
        if len(r_points) != len(values) or len(r_points) < 2:
            raise ProfileError("tabulated profile needs matching r/value arrays, length >= 2")
        if any(b <= a for a, b in zip(r_points, r_points[1:])):
            raise ProfileError("tabulated r points must be increasing")
        if any(v < 0 for v in values):
            raise ProfileError("profile amplitudes must be nonnegative")
        return cls("tabulated", r_points=r_points, values=values)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "gaussian":
            return self.amplitude * np.exp(-r * r / (2.0 * self.sigma ** 2))
        if self.kind == "bump":
            out = np.where(r <= self.rc, self.amplitude, 0.0)
            mid = (r > self.rc) & (r < self.rc + self.width)
            out = np.where(mid, 0.5 * self.amplitude
                           * (1.0 + np.cos(np.pi * (r - self.rc) / self.width)), out)
            return out
        if self.kind == "tabulated":
            return np.interp(r, self.r_points, self.values, left=self.values[0], right=0.0)
        raise ProfileError(f"unknown profile kind {self.kind!r}")

    def support_radius(self) -> float:
        """Radius beyond which the squared tail is negligible (< 1e-14 relative)."""
        if self.kind == "gaussian":
            return 9.0 * self.sigma
        if self.kind == "bump":
            return self.rc + self.width
        return self.r_points[-1]


def parse_profile(text: str) -> RadialProfile:
    """Parse CLI profile syntax, e.g. ``gaussian:sigma=1,A=1`` or ``bump:A=0.5,rc=0.5``."""
    kind, _, params = text.partition(":")
    kind = kind.strip().lower()
    kwargs = {}
    if params:
        for item in params.split(","):
            key, _, value = item.partition("=")
            if not _:
                raise ProfileError(f"bad profile parameter {item!r}")
            kwargs[key.strip().lower()] = float(value)
    if kind == "gaussian":
        extra = set(kwargs) - {"a", "sigma"}
        if extra:
            raise ProfileError(f"unknown gaussian parameters {sorted(extra)}")
        return RadialProfile.gaussian(amplitude=kwargs.get("a", 1.0),
                                      sigma=kwargs.get("sigma", 1.0))
    if kind == "bump":
        extra = set(kwargs) - {"a", "rc", "w"}
        if extra:
            raise ProfileError(f"unknown bump parameters {sorted(extra)}")
        return RadialProfile.bump(amplitude=kwargs.get("a", 1.0), rc=kwargs.get("rc", 0.5),
                                  width=kwargs.get("w"))
    raise ProfileError(f"unknown profile kind {kind!r} (expected gaussian or bump)")


@dataclass(frozen=True)
class ProfileSet:
    """Initial-data amplitudes by role; ``None`` means identically zero.

    ``u0_par`` rides the longitudinal direction ``xi/|xi|``; ``u0_perp`` and
    ``v0`` are transverse with the declared alignment.
    """

    n0: RadialProfile = None
    u0_par: RadialProfile = None
    u0_perp: RadialProfile = None
    v0: RadialProfile = None
    alignment: str = "aligned"

    def __post_init__(self):
        if self.alignment not in ALIGNMENTS:
            raise ProfileError(f"alignment must be one of {ALIGNMENTS}")

    def support_radius(self) -> float:
        radii = [p.support_radius() for p in (self.n0, self.u0_par, self.u0_perp, self.v0)
                 if p is not None]
        if not radii:
            raise ProfileError("profile set is empty")
        return max(radii)

    def amplitudes(self, r):
        zero = np.zeros_like(np.asarray(r, dtype=float))
        return tuple(p(r) if p is not None else zero
                     for p in (self.n0, self.u0_par, self.u0_perp, self.v0))


def _squared_target_amplitude(t: float, r, profiles: ProfileSet, target: str):
    """``|target(t, r)|^2`` per unit spherical-shell amplitude (no ``r^2`` weight)."""
    r = np.asarray(r, dtype=float)
    a_n, a_up, a_ut, a_v = profiles.amplitudes(r)
    phi11, d, phiq, psi_perp, psi12, psi33 = symbol_arrays(t, r)
    aligned = profiles.alignment == "aligned"

    if target == "n":
        # real and imaginary parts are orthogonal: phi11*a_n real, d*r*a_up imaginary
        return (phi11 * a_n) ** 2 + (d * r * a_up) ** 2

    r_safe = np.where(r > 0, r, 1.0)
    inv_r = np.where(r > 0, 1.0 / r_safe, 0.0)
    density_coupling = d * (1.0 + r * r) * inv_r * a_n

    if target == "u":
        longitudinal = (phiq * a_up) ** 2 + density_coupling ** 2
        if aligned:
            transverse = (psi_perp * a_ut + psi12 * a_v) ** 2
        else:
            transverse = (psi_perp * a_ut) ** 2 + (psi12 * a_v) ** 2
        return longitudinal + transverse

    if target == "v":
        if aligned:
            return (psi12 * a_ut + psi33 * a_v) ** 2
        return (psi12 * a_ut) ** 2 + (psi33 * a_v) ** 2

    if target == "diff":
        longitudinal = (phiq * a_up) ** 2 + density_coupling ** 2
        cu, cv = psi_perp - psi12, psi12 - psi33
        if aligned:
            transverse = (cu * a_ut + cv * a_v) ** 2
        else:
            transverse = (cu * a_ut) ** 2 + (cv * a_v) ** 2
        return longitudinal + transverse

    raise ValueError(f"unknown target {target!r}, expected one of {TARGETS}")


def _integration_points(profiles: ProfileSet, r0: float, R0: float):
    r_cut = profiles.support_radius()
    interior = sorted({p for p in (r0, R0) if 0.0 < p < r_cut})
    return r_cut, interior


def linear_l2_norm(t: float, k: int, profiles: ProfileSet, target: str,
                   r0: float = 0.5, R0: float = 2.0) -> float:
    """L2 norm of ``grad^k`` of the linear solution with the given initial data.

    Evaluates ``(int_0^inf 4 pi r^{2+2k} |target(t, r)|^2 dr)^{1/2}`` with
    adaptive Gauss-Kronrod quadrature, split where the symbol behavior
    changes character (``r0``, ``R0``).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}, expected one of {TARGETS}")
    r_cut, interior = _integration_points(profiles, r0, R0)

    def integrand(r):
        return 4.0 * np.pi * r ** (2 + 2 * k) * _squared_target_amplitude(t, r, profiles, target)

    value, _ = quad(integrand, 0.0, r_cut, points=interior or None, **_QUAD_KWARGS)
    return float(np.sqrt(max(value, 0.0)))


def linear_l2_norm_fixed(t: float, k: int, profiles: ProfileSet, target: str,
                         nodes_per_panel: int = 200, r0: float = 0.5,
                         R0: float = 2.0) -> float:
    """Same integral on fixed Gauss-Legendre panels; used for convergence checks."""
    r_cut, interior = _integration_points(profiles, r0, R0)
    edges = [0.0] + interior + [r_cut]
    x, w = leggauss(nodes_per_panel)
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        nodes = 0.5 * (b - a) * x + 0.5 * (a + b)
        vals = 4.0 * np.pi * nodes ** (2 + 2 * k) * _squared_target_amplitude(t, nodes, profiles, target)
        total += 0.5 * (b - a) * np.sum(w * vals)
    return float(np.sqrt(max(total, 0.0)))


def decay_series(t_values, compute) -> "DecaySeries":
    """Evaluate ``compute(t)`` over the samples, in parallel when allowed."""
    t_values = np.asarray(t_values, dtype=float)
    workers = worker_count()
    if workers > 1 and t_values.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(compute, t_values))
    else:
        values = [compute(t) for t in t_values]
    return DecaySeries(t_values, np.asarray(values, dtype=float))


def log_spaced_times(t_min: float, t_max: float, samples: int) -> np.ndarray:
    if not 0 < t_min < t_max:
        raise ValueError("need 0 < t_min < t_max")
    if samples < 2:
        raise ValueError("need at least 2 samples")
    return np.geomspace(t_min, t_max, samples)


# ---------------------------------------------------------------------------
# series container and rate fitting

@dataclass(frozen=True)
class DecaySeries:
    """Positive time series of norm values at increasing positive times."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if np.any(times <= 0) or np.any(np.diff(times) <= 0):
            raise ValueError("times must be positive and strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("series values must be finite")


@dataclass(frozen=True)
class DecayFit:
    """Least-squares rate fit of a decay series.

    ``power`` fits ``log(value)`` against ``log(1 + t)`` (slope is the
    algebraic rate exponent); ``exp`` fits against ``t`` (slope is the
    exponential rate).
    """

    slope: float
    intercept: float
    rms_residual: float
    window: tuple
    model: str
    r_squared: float


def fit_decay(series: DecaySeries, window=None, model: str = "power") -> DecayFit:
    """Fit the decay rate of a series over a time window.

    Requires at least 8 samples inside the window and strictly positive
    values there.
    """
    if model not in ("power", "exp"):
        raise ValueError("model must be 'power' or 'exp'")
    t, y = series.times, series.values
    if window is None:
        window = (float(t[0]), float(t[-1]))
    lo, hi = float(window[0]), float(window[1])
    mask = (t >= lo) & (t <= hi)
    if int(np.sum(mask)) < 8:
        raise ValueError(f"need >= 8 samples in window [{lo:g}, {hi:g}], got {int(np.sum(mask))}")
    t, y = t[mask], y[mask]
    if np.any(y <= 0):
        raise ValueError("series values must be positive for a log fit")
    x = np.log1p(t) if model == "power" else t
    logy = np.log(y)
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, logy, rcond=None)
    resid = logy - design @ coef
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((logy - logy.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(slope=float(coef[0]), intercept=float(coef[1]),
                    rms_residual=float(np.sqrt(ss_res / len(t))),
                    window=(lo, hi), model=model, r_squared=r_squared)


# ---------------------------------------------------------------------------
# optimality (lower-bound) machinery

def transverse_frame(xi):
    """Orthonormal pair ``(e1, e2)`` perpendicular to ``xi``, chosen consistently."""
    xi = np.asarray(xi, dtype=float)
    norm = np.linalg.norm(xi)
    if norm == 0:
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    xi_hat = xi / norm
    helper = np.array([0.0, 0.0, 1.0])
    if abs(xi_hat[2]) > 0.9:
        helper = np.array([1.0, 0.0, 0.0])
    e1 = np.cross(helper, xi_hat)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(xi_hat, e1)
    return e1, e2


def profile_callables(profiles: ProfileSet):
    """Initial-velocity mode evaluators ``xi -> C^3`` from a radial profile set."""
    def u0(xi):
        xi = np.asarray(xi, dtype=float)
        r = np.linalg.norm(xi)
        a_n, a_up, a_ut, a_v = profiles.amplitudes(r)
        e1, _ = transverse_frame(xi)
        xi_hat = xi / r if r > 0 else np.zeros(3)
        return a_up * xi_hat + a_ut * e1

    def v0(xi):
        xi = np.asarray(xi, dtype=float)
        r = np.linalg.norm(xi)
        _, _, _, a_v = profiles.amplitudes(r)
        e1, e2 = transverse_frame(xi)
        return a_v * (e1 if profiles.alignment == "aligned" else e2)

    return u0, v0


def lower_bound_margin(u0, v0, r0: float, radial_samples: int = 48,
                       direction_samples: int = 64) -> float:
    """Infimum over the ball ``|xi| < r0`` of ``|v0(xi) + (I - P_par) u0(xi)|``.

    ``u0`` and ``v0`` are callables ``xi -> C^3``; the ball is sampled on
    radial shells crossed with a Fibonacci point set on the sphere.
    """
    offsets = np.arange(direction_samples) + 0.5
    golden = np.pi * (3.0 - np.sqrt(5.0))
    z = 1.0 - 2.0 * offsets / direction_samples
    rho = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = golden * offsets
    dirs = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])

    best = np.inf
    radii = np.linspace(0.0, r0, radial_samples + 1)[:-1]  # open ball, include center
    for r in radii:
        for dvec in (dirs if r > 0 else dirs[:1]):
            xi = r * dvec
            u_val = np.asarray(u0(xi), dtype=np.complex128)
            v_val = np.asarray(v0(xi), dtype=np.complex128)
            if r > 0:
                xi_hat = xi / r
                u_val = u_val - xi_hat * (xi_hat @ u_val)
            combined = v_val + u_val
            best = min(best, float(np.linalg.norm(combined)))
    return best


def lower_bound_norm(t: float, alpha0: float, r0: float, target: str = "v") -> float:
    """Leading lower-bound integral for velocities or their difference.

    Velocities: ``(alpha0^2/4 int_{|xi|<r0} e^{-|xi|^2 t} dxi)^{1/2}``;
    difference: ``(alpha0^2/16 int_{|xi|<r0} |xi|^4 e^{-|xi|^2 t} dxi)^{1/2}``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if target in ("u", "v", "uv"):
        power, scale = 2, alpha0 ** 2 / 4.0
    elif target == "diff":
        power, scale = 6, alpha0 ** 2 / 16.0
    else:
        raise ValueError("target must be 'u', 'v', 'uv' or 'diff'")

    def integrand(r):
        return 4.0 * np.pi * r ** power * np.exp(-r * r * t)

    value, _ = quad(integrand, 0.0, r0, **_QUAD_KWARGS)
    return float(np.sqrt(scale * value))
