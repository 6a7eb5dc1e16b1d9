"""Norm ledgers, energy functionals, and inequality checks.

Every derivative norm is computed spectrally (exact on the grid); finite
differences appear only in test oracles.  A record carries the per-time norm
ledger, the energy/dissipation pair, the physical Lyapunov functional, the
velocity-density cross term, and the running time-weighted supremum that
encodes the expected decay rates.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import spectral
from .spectral import SpectralField, VectorSpectralField

CSV_COLUMNS = [
    "t",
    "n_L2", "n_H1", "n_H2", "n_H3dot", "n_Hneg1",
    "u_L2", "u_H1", "u_H2", "u_H3dot",
    "v_L2", "v_H1", "v_H2", "v_H3dot",
    "diff_L2", "diff_H1dot",
    "E", "D", "lyapunov", "cross_sum", "M_running",
    "neutrality", "rho_min", "rho_max",
]


@dataclass
class DiagnosticsRecord:
    t: float
    n_L2: float
    n_H1: float
    n_H2: float
    n_H3dot: float
    n_Hneg1: float
    u_L2: float
    u_H1: float
    u_H2: float
    u_H3dot: float
    v_L2: float
    v_H1: float
    v_H2: float
    v_H3dot: float
    diff_L2: float
    diff_H1dot: float
    E: float
    D: float
    lyapunov: float
    cross_sum: float
    M_running: float
    neutrality: float
    rho_min: float
    rho_max: float

    def as_row(self):
        return [getattr(self, name) for name in CSV_COLUMNS]


def _seminorms(obj, orders):
    return [spectral.sobolev_norm(obj, k) for k in orders]


def _full_sobolev(seminorms):
    return float(np.sqrt(sum(s * s for s in seminorms)))


def _state_v(state):
    """The incompressible velocity, or an identically zero stand-in."""
    v = getattr(state, "v", None)
    if v is None:
        v = VectorSpectralField.zeros(state.grid, state.u.real_flag)
    return v


def record(state, m_running_prev: float = 0.0) -> DiagnosticsRecord:
    """Full diagnostics ledger of a solver state.

    ``m_running_prev`` threads the running supremum of the time-weighted norm
    combination through a trajectory.
    """
    g = state.grid
    n, u = state.n, state.u
    v = _state_v(state)
    diff = u - v

    n_norms = _seminorms(n, range(4))
    u_norms = _seminorms(u, range(4))
    v_norms = _seminorms(v, range(4))
    n_neg = spectral.neg_sobolev_norm(n, 1.0)
    diff_norms = _seminorms(diff, range(2))

    energy = (_full_sobolev(n_norms) + _full_sobolev(u_norms)
              + _full_sobolev(v_norms) + n_neg)
    grad_v_h3 = _full_sobolev(_seminorms(v, range(1, 5)))
    dissipation = (_full_sobolev(n_norms) + grad_v_h3
                   + _full_sobolev(_seminorms(diff, range(4))))

    t = state.t
    weights_n = [(1.0 + t) ** (2.75 + 0.5 * k) for k in range(3)]
    m_now = sum(w * s for w, s in zip(weights_n, n_norms[:3]))
    m_now += (1.0 + t) ** 3.75 * n_norms[3]
    m_now += sum((1.0 + t) ** (0.75 + 0.5 * k) * (u_norms[k] + v_norms[k])
                 for k in range(4))

    rho = np.exp(state.n.physical())
    neutrality = spectral.box_integral(g, rho - 1.0)

    return DiagnosticsRecord(
        t=t,
        n_L2=n_norms[0], n_H1=n_norms[1], n_H2=n_norms[2], n_H3dot=n_norms[3],
        n_Hneg1=n_neg,
        u_L2=u_norms[0], u_H1=u_norms[1], u_H2=u_norms[2], u_H3dot=u_norms[3],
        v_L2=v_norms[0], v_H1=v_norms[1], v_H2=v_norms[2], v_H3dot=v_norms[3],
        diff_L2=diff_norms[0], diff_H1dot=diff_norms[1],
        E=energy, D=dissipation,
        lyapunov=lyapunov_physical(state),
        cross_sum=cross_term_sum(state),
        M_running=max(m_running_prev, m_now),
        neutrality=neutrality,
        rho_min=float(np.min(rho)), rho_max=float(np.max(rho)),
    )


def cross_term_sum(state) -> float:
    """Hypocoercivity cross term ``sum_{k=0..2} int grad^k u . grad^{k+1} n dx``."""
    g = state.grid
    n_hat = state.n.coefficients
    total = 0.0
    for k in range(3):
        weight = g.k_squared ** k if k else 1.0
        for axis, comp in zip((g.kx, g.ky, g.kz), state.u.components):
            total += np.sum(weight * np.real(np.conj(comp.coefficients) * 1j * axis * n_hat))
    return float(g.cell_volume * total)


def lyapunov_physical(state) -> float:
    """Physical-space energy ``int (rho |u|^2 / 2 + rho log rho - rho + 1
    + |v|^2 / 2 + |grad U|^2 / 2) dx`` with ``-Delta U = rho - 1``."""
    g = state.grid
    n_phys = state.n.physical()
    rho = np.exp(n_phys)
    if np.min(rho) <= 0.0:
        idx = np.unravel_index(int(np.argmin(rho)), rho.shape)
        raise ValueError(f"nonpositive density at grid point {idx}")
    u_phys = state.u.physical()
    v_phys = _state_v(state).physical()
    grad_pot = spectral.poisson_gradient(
        spectral.transform_forward(g, rho - 1.0)).physical()

    integrand = (0.5 * rho * np.einsum("ixyz,ixyz->xyz", u_phys, u_phys)
                 + rho * n_phys - rho + 1.0
                 + 0.5 * np.einsum("ixyz,ixyz->xyz", v_phys, v_phys)
                 + 0.5 * np.einsum("ixyz,ixyz->xyz", grad_pot, grad_pot))
    return spectral.box_integral(g, integrand)


def lyapunov_dissipation(state) -> float:
    """Dissipation rate of the physical energy: ``int rho |u - v|^2 dx + ||grad v||^2``."""
    rho = np.exp(state.n.physical())
    diff_phys = (state.u - _state_v(state)).physical()
    drag = spectral.box_integral(
        state.grid, rho * np.einsum("ixyz,ixyz->xyz", diff_phys, diff_phys))
    return drag + spectral.sobolev_norm(_state_v(state), 1) ** 2


# ---------------------------------------------------------------------------
# inequality suite

@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


@dataclass(frozen=True)
class InequalityReport:
    checks: tuple
    tolerance: float = 1e-10

    @property
    def min_margin(self) -> float:
        return min(c.margin for c in self.checks)

    @property
    def ok(self) -> bool:
        return self.min_margin >= -self.tolerance


def _mean_removed(field: SpectralField) -> SpectralField:
    out = field.copy()
    out.coefficients[0, 0, 0] = 0.0
    return out


def check_field_inequalities(field: SpectralField, label: str = "f",
                             interp_pairs=((0, 1.0), (1, 1.0), (2, 1.0), (1, 2.0)),
                             bernstein_orders=((0, 1), (0, 3), (1, 2), (2, 3))):
    """Interpolation and low/high frequency comparison checks on one field.

    The interpolation inequality ``||grad^l f|| <= ||grad^{l+1} f||^{1-theta}
    ||Lambda^{-a} f||^theta`` with ``theta = 1/(1 + l + a)`` holds with
    constant exactly 1; the frequency-split bounds use the cutoff radii as
    explicit constants.  The field mean is removed first (negative-order norms
    exclude it anyway).
    """
    f = _mean_removed(field)
    g = f.grid
    low, high = spectral.lowpass(f), spectral.highpass(f)
    checks = []
    for l, a in interp_pairs:
        theta = 1.0 / (1.0 + l + a)
        lhs = spectral.sobolev_norm(f, l)
        rhs = (spectral.sobolev_norm(f, l + 1) ** (1.0 - theta)
               * spectral.neg_sobolev_norm(f, a) ** theta)
        checks.append(InequalityCheck(f"interp[{label}] l={l} a={a:g}", lhs, rhs))
    for lo_k, hi_k in bernstein_orders:
        lhs = spectral.sobolev_norm(low, hi_k)
        rhs = g.cutoff_R0 ** (hi_k - lo_k) * spectral.sobolev_norm(low, lo_k)
        checks.append(InequalityCheck(f"bernstein-low[{label}] {lo_k}->{hi_k}", lhs, rhs))
        lhs = spectral.sobolev_norm(high, lo_k)
        rhs = g.cutoff_r0 ** (lo_k - hi_k) * spectral.sobolev_norm(high, hi_k)
        checks.append(InequalityCheck(f"bernstein-high[{label}] {lo_k}->{hi_k}", lhs, rhs))
    return checks


def check_inequalities(state) -> InequalityReport:
    """Run the inequality suite on every scalar field of a state."""
    checks = list(check_field_inequalities(state.n, "n"))
    for i, comp in enumerate(state.u.components):
        checks += check_field_inequalities(comp, f"u{i}")
    v = getattr(state, "v", None)
    if v is not None:
        for i, comp in enumerate(v.components):
            checks += check_field_inequalities(comp, f"v{i}")
    return InequalityReport(tuple(checks))


# ---------------------------------------------------------------------------
# CSV ledger I/O

def render_csv(records) -> str:
    """Deterministic CSV rendering (shortest round-trip float format)."""
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for rec in records:
        buf.write(",".join(repr(float(x)) for x in rec.as_row()) + "\n")
    return buf.getvalue()


def write_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(render_csv(records))


def load_series_csv(path, column: str = None):
    """Load ``(t, value)`` columns from a CSV file.

    ``column`` selects a named column (default: the second one).  The first
    column must be the time axis.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if len(header) < 2:
            raise ValueError("CSV needs at least two columns")
        index = 1
        if column is not None:
            if column not in header:
                raise ValueError(f"column {column!r} not in CSV header {header}")
            index = header.index(column)
        times, values = [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            times.append(float(parts[0]))
            values.append(float(parts[index]))
    return np.asarray(times), np.asarray(values)
