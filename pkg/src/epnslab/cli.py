"""Thin command-line client for the compute service.

By default the CLI talks to an in-process instance of the FastAPI app
(no network); ``--server URL`` points it at a running ``epns serve``
instance instead.  All file output is written by the client from CSV and
snapshot payloads returned by the service.

Exit codes: 0 on success, 1 on validation errors, 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import base64
import math
import sys
from pathlib import Path

import httpx

from . import __version__, config as config_mod
from .decay import parse_profile

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2

DATA_ROLES = ("v0", "n0", "u0perp", "u0par")
_ROLE_FIELD = {"v0": "v0", "n0": "n0", "u0perp": "u0_perp", "u0par": "u0_par"}


class CliError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_VALIDATION):
        super().__init__(message)
        self.exit_code = exit_code


def make_client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=httpx.Timeout(10.0, read=None))
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DeprecationWarning)
        from fastapi.testclient import TestClient

    from .service import app
    return TestClient(app)


def _post(client: httpx.Client, path: str, payload: dict) -> dict:
    try:
        response = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        raise CliError(f"cannot reach service: {exc}", EXIT_NUMERICAL) from exc
    if response.status_code >= 500:
        raise CliError(f"numerical failure: {_detail(response)}", EXIT_NUMERICAL)
    if response.status_code >= 400:
        raise CliError(f"rejected request: {_detail(response)}", EXIT_VALIDATION)
    return response.json()


def _detail(response: httpx.Response) -> str:
    try:
        return str(response.json().get("detail"))
    except Exception:
        return response.text


def _emit_csv(csv_text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(csv_text)
    else:
        Path(out).write_text(csv_text, encoding="utf-8")
        print(f"wrote {out}")


def _profile_payload(profile) -> dict:
    payload = {"kind": profile.kind, "amplitude": profile.amplitude}
    if profile.kind == "gaussian":
        payload["sigma"] = profile.sigma
    else:
        payload.update(rc=profile.rc, width=profile.width)
    return payload


# ---------------------------------------------------------------------------
# subcommand handlers

def cmd_eigen(args, client) -> int:
    data = _post(client, "/eigen", {
        "t": args.t, "r_min": args.rmin, "r_max": args.rmax, "samples": args.samples})
    _emit_csv(data["csv"], args.out)
    return EXIT_OK


def cmd_linear_decay(args, client) -> int:
    try:
        profile = parse_profile(args.profile)
    except ValueError as exc:
        raise CliError(str(exc))
    role = args.data
    if role is None:
        role = "n0" if args.target == "n" else "v0"
    profiles = {_ROLE_FIELD[role]: _profile_payload(profile), "alignment": args.alignment}
    data = _post(client, "/linear-decay", {
        "target": args.target, "k": args.k, "profiles": profiles,
        "t_min": args.tmin, "t_max": args.tmax, "samples": args.samples,
        "r0": args.r0, "R0": args.R0})
    _emit_csv(data["csv"], args.out)
    return EXIT_OK


def cmd_lower_bound(args, client) -> int:
    data = _post(client, "/lower-bound", {
        "alpha0": args.alpha0, "r0": args.r0, "target": args.target,
        "t_min": args.tmin, "t_max": args.tmax, "samples": args.samples})
    _emit_csv(data["csv"], args.out)
    return EXIT_OK


def cmd_fit(args, client) -> int:
    from .diagnostics import load_series_csv
    try:
        times, values = load_series_csv(args.csv, args.column)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read series: {exc}")
    window = None
    if args.window:
        try:
            lo, hi = (float(x) for x in args.window.split(","))
        except ValueError as exc:
            raise CliError("--window expects 'a,b'") from exc
        window = (lo, hi)
    data = _post(client, "/fit", {
        "times": times.tolist(), "values": values.tolist(),
        "model": args.model, "window": window})
    print(f"slope={data['slope']:.6g} intercept={data['intercept']:.6g} "
          f"rms_residual={data['rms_residual']:.3g} r_squared={data['r_squared']:.6g}")
    return EXIT_OK


def cmd_simulate(args, client, mode: str) -> int:
    payload = {
        "points_per_axis": args.n, "box_length": args.box, "dt": args.dt,
        "t_end": args.tend, "eps": args.eps, "seed": args.seed,
        "band": [args.kmin, args.kmax], "scheme": args.scheme, "mode": mode,
        "record_every": args.record_every, "snapshot_every": args.snapshot_every}
    endpoint = "/damped-ep" if mode == "damped" else "/simulate"
    data = _post(client, endpoint, payload)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "diagnostics.csv").write_text(data["csv"], encoding="utf-8")
        for snap in data["snapshots"]:
            (out_dir / snap["filename"]).write_bytes(base64.b64decode(snap["data_base64"]))
        print(f"wrote {out_dir / 'diagnostics.csv'} and {len(data['snapshots'])} snapshot(s)")
    else:
        sys.stdout.write(data["csv"])
    print(f"final time: {data['final_time']:g}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args, _client) -> int:
    import uvicorn

    from .service import app
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_series_out(p):
    p.add_argument("--out", default=None, help="output CSV path ('-' for stdout)")


def build_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    defaults = defaults or {}
    parser = argparse.ArgumentParser(
        prog="epns",
        description="Spectral laboratory for a coupled two-phase flow model.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
    parser.add_argument("--config", default=None,
                        help="key = value config file with per-subcommand sections")
    sub = parser.add_subparsers(dest="command", required=True)
    registry = {}

    p = registry["eigen"] = sub.add_parser(
        "eigen", help="dump eigenvalues and symbols over a log-spaced r grid")
    p.add_argument("--t", type=float, default=1.0, help="evaluation time")
    p.add_argument("--rmin", type=float, default=1e-3)
    p.add_argument("--rmax", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=100)
    _add_series_out(p)

    p = registry["linear-decay"] = sub.add_parser(
        "linear-decay", help="whole-space norm series of the linear flow")
    p.add_argument("--target", choices=["n", "u", "v", "diff"], required=True)
    p.add_argument("--k", type=int, choices=range(4), default=0, help="derivative order")
    p.add_argument("--profile", default="gaussian:sigma=1,A=1",
                   help="radial amplitude, e.g. gaussian:sigma=1,A=1 or bump:A=0.5,rc=0.5")
    p.add_argument("--data", choices=DATA_ROLES, default=None,
                   help="which initial component carries the profile "
                        "(default: n0 for target n, v0 otherwise)")
    p.add_argument("--alignment", choices=["aligned", "orthogonal"], default="aligned")
    p.add_argument("--tmin", type=float, default=1e2)
    p.add_argument("--tmax", type=float, default=1e4)
    p.add_argument("--samples", type=int, default=25)
    p.add_argument("--r0", type=float, default=0.5)
    p.add_argument("--R0", type=float, default=2.0)
    _add_series_out(p)

    p = registry["lower-bound"] = sub.add_parser(
        "lower-bound", help="optimality lower bound vs the actual norm")
    p.add_argument("--alpha0", type=float, required=True)
    p.add_argument("--r0", type=float, required=True)
    p.add_argument("--target", choices=["uv", "diff"], default="uv")
    p.add_argument("--tmin", type=float, default=1e2)
    p.add_argument("--tmax", type=float, default=1e4)
    p.add_argument("--samples", type=int, default=25)
    _add_series_out(p)

    for name, mode in (("simulate", "epns"), ("damped-ep", "damped")):
        p = registry[name] = sub.add_parser(name, help=f"periodic-box run of the {mode} system")
        p.add_argument("--n", type=int, default=32, help="grid points per axis")
        p.add_argument("--box", type=float, default=2.0 * math.pi, help="box side length")
        p.add_argument("--dt", type=float, default=1e-2)
        p.add_argument("--tend", type=float, default=1.0)
        p.add_argument("--eps", type=float, default=1e-3, help="initial amplitude")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--kmin", type=int, default=1, help="lowest initial mode")
        p.add_argument("--kmax", type=int, default=3, help="highest initial mode")
        p.add_argument("--scheme", choices=["etd1", "etd2rk"], default="etd2rk")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--snapshot-every", dest="snapshot_every", type=int, default=0)
        p.add_argument("--record-every", dest="record_every", type=int, default=1)

    p = registry["fit"] = sub.add_parser("fit", help="fit a decay rate to a CSV series")
    p.add_argument("csv", help="CSV file with a leading time column")
    p.add_argument("--model", choices=["power", "exp"], default="power")
    p.add_argument("--window", default=None, help="fit window 'a,b'")
    p.add_argument("--column", default=None, help="value column name (default: second column)")

    p = registry["serve"] = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    for section, values in defaults.items():
        registry[section].set_defaults(
            **{key.replace("-", "_"): value for key, value in values.items()})
    return parser


def _extract_config(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return {}
    return config_mod.parse_config_file(known.config)


HANDLERS = {
    "eigen": cmd_eigen,
    "linear-decay": cmd_linear_decay,
    "lower-bound": cmd_lower_bound,
    "fit": cmd_fit,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        defaults = _extract_config(argv)
    except config_mod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    parser = build_parser(defaults)
    args = parser.parse_args(argv)

    if args.command == "serve":
        return cmd_serve(args, None)

    client = make_client(args.server)
    try:
        if args.command in ("simulate", "damped-ep"):
            mode = "damped" if args.command == "damped-ep" else "epns"
            return cmd_simulate(args, client, mode)
        return HANDLERS[args.command](args, client)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    finally:
        client.close()


if __name__ == "__main__":
    sys.exit(main())
