"""Plain ``key=value`` configuration files.

Precedence, highest first: command-line flag, ``FILTER_SEED`` (seed only),
config file, built-in default.
"""

from __future__ import annotations

import os

from .errors import InvalidConfigError

SEED_ENV = "FILTER_SEED"
KEYS = {
    "seed": int,
    "runs": int,
    "particles": int,
    "steps": int,
    "sigma": float,
    "obs_var": float,
    "resample": str,
    "smoothing": lambda v: _parse_bool(v),
    "workers": int,
    "x0": float,
    "y0": float,
    "dx1": float,
    "dy1": float,
}


def _parse_bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def parse_config(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS:
            raise InvalidConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = KEYS[key](value)
        except ValueError as exc:
            raise InvalidConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return parse_config(fh.read(), str(path))
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from None


def resolve(cli: dict, file_values: dict, defaults: dict, environ=None) -> dict:
    """Merge settings; ``None`` in ``cli`` means the flag was not given."""
    environ = os.environ if environ is None else environ
    merged = dict(defaults)
    merged.update(file_values)
    if SEED_ENV in environ and environ[SEED_ENV] != "":
        try:
            merged["seed"] = int(environ[SEED_ENV], 0)
        except ValueError:
            raise InvalidConfigError(f"{SEED_ENV} is not an integer: {environ[SEED_ENV]!r}") from None
    merged.update({k: v for k, v in cli.items() if v is not None})
    return merged
