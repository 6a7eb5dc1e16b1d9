"""Run configuration: key/value config files, per-subcommand schemas, env plumbing.

Config files are line-oriented ``key = value`` text with one ``[section]``
per subcommand and no nesting.  Unknown sections or keys are rejected, as are
non-positive values for parameters that must be positive.
"""

from __future__ import annotations

import os


class ConfigError(ValueError):
    """Config file could not be parsed or validated."""


def worker_count() -> int:
    """Worker cap from ``EPNS_THREADS``; 0 or unset means automatic."""
    raw = os.environ.get("EPNS_THREADS", "0")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"EPNS_THREADS must be an integer, got {raw!r}") from exc
    if value < 0:
        raise ConfigError("EPNS_THREADS must be nonnegative")
    if value == 0:
        return min(8, os.cpu_count() or 1)
    return value


def _positive(x: float) -> bool:
    return x > 0


def _nonnegative(x: float) -> bool:
    return x >= 0


# key -> (type, validator or None); validators get the coerced value
SCHEMAS = {
    "eigen": {
        "t": (float, _nonnegative),
        "rmin": (float, _positive),
        "rmax": (float, _positive),
        "samples": (int, _positive),
        "out": (str, None),
    },
    "linear-decay": {
        "target": (str, None),
        "k": (int, _nonnegative),
        "profile": (str, None),
        "data": (str, None),
        "alignment": (str, None),
        "tmin": (float, _positive),
        "tmax": (float, _positive),
        "samples": (int, _positive),
        "r0": (float, _positive),
        "R0": (float, _positive),
        "out": (str, None),
    },
    "lower-bound": {
        "alpha0": (float, _positive),
        "r0": (float, _positive),
        "target": (str, None),
        "tmin": (float, _positive),
        "tmax": (float, _positive),
        "samples": (int, _positive),
        "out": (str, None),
    },
    "simulate": {
        "n": (int, _positive),
        "box": (float, _positive),
        "dt": (float, _positive),
        "tend": (float, _nonnegative),
        "eps": (float, _nonnegative),
        "seed": (int, _nonnegative),
        "scheme": (str, None),
        "out": (str, None),
        "snapshot-every": (int, _nonnegative),
        "record-every": (int, _positive),
        "kmin": (int, _positive),
        "kmax": (int, _positive),
    },
    "fit": {
        "model": (str, None),
        "window": (str, None),
        "column": (str, None),
    },
    "serve": {
        "host": (str, None),
        "port": (int, _positive),
    },
}
SCHEMAS["damped-ep"] = dict(SCHEMAS["simulate"])


def parse_config_file(path) -> dict:
    """Parse and validate a config file into ``{section: {key: value}}``."""
    sections: dict = {}
    current = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                name = line[1:-1].strip()
                if name not in SCHEMAS:
                    raise ConfigError(f"{path}:{lineno}: unknown section [{name}]")
                current = sections.setdefault(name, {})
                continue
            if current is None:
                raise ConfigError(f"{path}:{lineno}: key outside of any [section]")
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = key.strip(), value.strip()
            section_name = next(s for s, d in sections.items() if d is current)
            schema = SCHEMAS[section_name]
            if key not in schema:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r} in [{section_name}]")
            typ, validator = schema[key]
            try:
                coerced = typ(value)
            except ValueError as exc:
                raise ConfigError(
                    f"{path}:{lineno}: key {key!r} expects {typ.__name__}, got {value!r}"
                ) from exc
            if validator is not None and not validator(coerced):
                raise ConfigError(f"{path}:{lineno}: key {key!r} fails validation "
                                  f"({value!r})")
            current[key] = coerced
    return sections
