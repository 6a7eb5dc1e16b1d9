"""FastAPI compute service wrapping the core package.

Every endpoint is a pure computation: requests carry all parameters,
responses carry structured rows plus a rendered CSV string so that clients
(including the bundled CLI) own their local file I/O.  Validation problems
map to 422, numerical blow-ups to 500.
"""

from __future__ import annotations

import base64
import tempfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__, decay, diagnostics, propagator, solver
from .models import (EigenRequest, FitRequest, FitResponse, LinearDecayRequest,
                     LowerBoundRequest, LowerBoundResponse, SeriesResponse,
                     SimulateRequest, SimulateResponse, SnapshotPayload,
                     TableResponse)

app = FastAPI(
    title="epnslab",
    version=__version__,
    description="Spectral laboratory for a coupled two-phase flow model: "
                "propagator symbol tables, whole-space decay series, rate "
                "fits, and periodic-box simulations.",
)


@app.exception_handler(ValueError)
async def _value_error_handler(request: Request, exc: ValueError):
    return JSONResponse(status_code=422, content={"detail": str(exc), "kind": "validation"})


@app.exception_handler(solver.BlowUpError)
async def _blowup_handler(request: Request, exc: solver.BlowUpError):
    return JSONResponse(status_code=500, content={"detail": str(exc), "kind": "numerical"})


def _csv(columns, rows) -> str:
    lines = [",".join(columns)]
    lines += [",".join(repr(float(x)) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


EIGEN_COLUMNS = ["r", "re_lambda1", "im_lambda1", "lambda3", "lambda4",
                 "phi11_re", "d_abs", "phiq_re", "psi_perp", "psi12", "psi33"]


@app.post("/eigen", response_model=TableResponse)
def eigen(req: EigenRequest):
    """Eigenvalues and propagator symbols at fixed t over a log-spaced r grid."""
    r = np.geomspace(req.r_min, req.r_max, req.samples)
    lam1, _ = propagator.acoustic_eigenvalues(r)
    lam3, lam4 = propagator.parabolic_eigenvalues(r)
    phi11, d, phiq, psi_perp, psi12, psi33 = propagator.symbol_arrays(req.t, r)
    rows = np.column_stack([r, lam1.real, lam1.imag, lam3, lam4,
                            phi11, np.abs(d), phiq, psi_perp, psi12, psi33]).tolist()
    return TableResponse(columns=EIGEN_COLUMNS, rows=rows, csv=_csv(EIGEN_COLUMNS, rows))


@app.post("/linear-decay", response_model=SeriesResponse)
def linear_decay(req: LinearDecayRequest):
    """Whole-space norm series of the linear flow for one target and derivative order."""
    profiles = req.profiles.to_profile_set()
    times = decay.log_spaced_times(req.t_min, req.t_max, req.samples)
    series = decay.decay_series(
        times, lambda t: decay.linear_l2_norm(t, req.k, profiles, req.target,
                                              r0=req.r0, R0=req.R0))
    rows = list(zip(series.times.tolist(), series.values.tolist()))
    return SeriesResponse(times=series.times.tolist(), values=series.values.tolist(),
                          csv=_csv(["t", "value"], rows))


@app.post("/lower-bound", response_model=LowerBoundResponse)
def lower_bound(req: LowerBoundRequest):
    """Leading lower-bound integral vs the actual linear norm it undershoots.

    The initial data is the optimality configuration: a transverse
    incompressible-phase amplitude equal to ``alpha0`` on the ball
    ``|xi| < r0``.  For the ``uv`` target the upper series is
    ``||u|| + ||v||``; for ``diff`` it is ``||u - v||``.
    """
    profiles = decay.ProfileSet(v0=decay.RadialProfile.bump(req.alpha0, req.r0))
    times = decay.log_spaced_times(req.t_min, req.t_max, req.samples)

    def upper(t):
        if req.target == "diff":
            return decay.linear_l2_norm(t, 0, profiles, "diff")
        return (decay.linear_l2_norm(t, 0, profiles, "u")
                + decay.linear_l2_norm(t, 0, profiles, "v"))

    upper_series = decay.decay_series(times, upper)
    bound = [decay.lower_bound_norm(t, req.alpha0, req.r0, req.target) for t in times]
    rows = list(zip(times.tolist(), bound, upper_series.values.tolist()))
    return LowerBoundResponse(times=times.tolist(), bound=bound,
                              upper=upper_series.values.tolist(),
                              csv=_csv(["t", "bound", "upper"], rows))


@app.post("/fit", response_model=FitResponse)
def fit(req: FitRequest):
    """Least-squares rate fit of a positive decay series."""
    series = decay.DecaySeries(np.asarray(req.times), np.asarray(req.values))
    result = decay.fit_decay(series, window=req.window, model=req.model)
    return FitResponse(slope=result.slope, intercept=result.intercept,
                       rms_residual=result.rms_residual, r_squared=result.r_squared,
                       model=result.model, window=result.window)


def _run_simulation(req: SimulateRequest) -> SimulateResponse:
    config = solver.SolverConfig(
        points_per_axis=req.points_per_axis, box_length=req.box_length,
        dt=req.dt, t_end=req.t_end, scheme=req.scheme, mode=req.mode,
        dealias=req.dealias, record_every=req.record_every,
        snapshot_every=req.snapshot_every)
    spec = solver.InitialDataSpec(amplitude=req.eps, band=tuple(req.band), seed=req.seed)

    snapshots = []
    if req.snapshot_every > 0:
        with tempfile.TemporaryDirectory() as tmp:
            records, state = solver.run(config, spec=spec, out_dir=tmp)
            for path in sorted(Path(tmp).glob("snapshot_*.bin")):
                step = int(path.stem.split("_")[1])
                snapshots.append(SnapshotPayload(
                    step=step, filename=path.name,
                    data_base64=base64.b64encode(path.read_bytes()).decode("ascii")))
    else:
        records, state = solver.run(config, spec=spec)

    rows = [rec.as_row() for rec in records]
    return SimulateResponse(columns=diagnostics.CSV_COLUMNS, records=rows,
                            csv=diagnostics.render_csv(records),
                            final_time=state.t, snapshots=snapshots)


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest):
    """Integrate the coupled system on a periodic box and return the norm ledger."""
    return _run_simulation(req)


@app.post("/damped-ep", response_model=SimulateResponse)
def damped_ep(req: SimulateRequest):
    """Integrate the damped single-phase system (no viscous partner)."""
    return _run_simulation(req.model_copy(update={"mode": "damped"}))
