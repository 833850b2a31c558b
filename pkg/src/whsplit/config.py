import os
from collections.abc import MutableMapping
from contextlib import contextmanager

_DELETE_MARKER = object()

DEFAULTS = {
    "conj-tol": 1e-8,
    "max-scan-groups": 30,
    "full-ranking-groups": 20,
    "top-k": 32,
    "tie-rtol": 1e-14,
    "rank-rtol": 1e-10,
    "success-rtol": 1e-9,
    "stability-margin": 0.0,
}


def _env_key(key):
    return "WHSPLIT_" + key.upper().replace("-", "_")


def _coerce(default, value):
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


class Configuration(MutableMapping):
    """Process-wide numerical settings.

    Values resolve in order: explicitly set, ``WHSPLIT_<KEY>`` environment
    variable, built-in default.
    """

    def __init__(self):
        self._values = {}

    def __getitem__(self, key):
        try:
            return self._values[key]
        except KeyError:
            pass

        try:
            default = DEFAULTS[key]
        except KeyError:
            raise KeyError(f"Unknown configuration key {key!r}") from None

        if (env := os.environ.get(_env_key(key))) is not None:
            return _coerce(default, env)

        return default

    def __setitem__(self, key, value):
        self._values[key] = value

    def __delitem__(self, key):
        del self._values[key]

    def __iter__(self):
        return iter(DEFAULTS.keys() | self._values.keys())

    def __len__(self):
        return len(DEFAULTS.keys() | self._values.keys())

    def resolved(self):
        return {k: self[k] for k in sorted(self)}


_CONFIG = Configuration()


def get(key):
    return _CONFIG[key]


def resolved():
    return _CONFIG.resolved()


@contextmanager
def set(**kw):
    config = _CONFIG
    saved = {}

    for k, v in kw.items():
        k = k.replace("_", "-")
        try:
            old = config._values[k]
        except KeyError:
            saved[k], config[k] = _DELETE_MARKER, v
        else:
            saved[k], config[k] = old, v

    try:
        yield
    finally:
        for k, v in saved.items():
            if v is _DELETE_MARKER:
                del config[k]
            else:
                config[k] = v
