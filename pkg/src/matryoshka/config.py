"""Experiment configuration: TOML documents layered over built-in defaults."""

from __future__ import annotations

import copy
import json
import re
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

DEFAULTS: dict = {
    "seed": 20240901,
    "schemes": ["matryoshka", "pdm-qpsk"],
    "workers": 1,
    "constellation": {
        "r_inner": 1.0,
        "r_outer": 1.38,
        "offset_angle": 0.15,
        "base_angle": float(np.pi / 4),
        "rule": "global",
    },
    "link": {
        "span_loss_db": 22.8,
        "fiber_loss_db_per_km": 0.18,
        "fiber_length_km": 60.0,
        "span_length_equiv_km": 115.0,
        "amp_noise_figure_db": 5.0,
        "launch_power_dbm_per_channel": 0.0,
        "mdl_db": 0.0,
        "nli_coeff": 0.0,
        "symbol_rate_hz": 30e9,
        "wavelength_nm": 1549.3,
        "coupling": True,
        "phase_noise_var": 0.0,
    },
    "ber": {
        "snr_db": [5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0, 8.5, 9.0, 9.5, 10.0],
        "n_symbols": 1_000_000,
    },
    "mi": {
        "distance_km": [1150.0, 2300.0, 4600.0, 6900.0, 9200.0, 13800.0, 18400.0, 27600.0],
        "launch_power_dbm": [-2.0, 0.0, 2.0],
        "n_symbols": 100_000,
        "demapper": "exact",
    },
    "power": {
        "launch_power_dbm": [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 3.5, 4.0, 4.5, 5.0, 6.0, 7.0, 8.0, 10.0],
        "distance_km": [1200.0, 2400.0, 4800.0],
        "calibrate_nli": True,
        "optimum_dbm": 4.0,
        "n_symbols": 100_000,
    },
    "dsp": {
        "snr_db": [15.0],
        "n_symbols": 100_000,
        "n_spans": 1,
        "n_pilots": 1000,
        "n_taps": 1,
        "step_size": 0.03,
        "phase_window": 64,
        "mdl_db": 0.0,
        "coupling": True,
        "phase_noise_var": 0.0,
    },
}


class ConfigError(Exception):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _find_line(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=|^\s*\[\s*{re.escape(key)}\s*\]")
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.search(line):
            return i
    return None


def _merge(base: dict, override: dict, text: str, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown key '{where}'", _find_line(text, key))
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"'{where}' must be a section", _find_line(text, key))
            out[key] = _merge(base[key], val, text, where + ".")
            continue
        expected = base[key]
        if isinstance(expected, bool):
            ok = isinstance(val, bool)
        elif isinstance(expected, (int, float)):
            ok = isinstance(val, (int, float)) and not isinstance(val, bool)
            if ok and isinstance(expected, float):
                val = float(val)
        elif isinstance(expected, list):
            ok = isinstance(val, list) and len(val) > 0
        else:
            ok = isinstance(val, type(expected))
        if not ok:
            raise ConfigError(f"bad value for '{where}': {val!r}", _find_line(text, key))
        out[key] = val
    return out


def parse_config(text: str) -> dict:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(str(exc), int(m.group(1)) if m else None) from None
    return _merge(DEFAULTS, doc, text)


def load_config(path=None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot render {v!r}")


def dump_config(cfg: dict) -> str:
    """Render a config dict as TOML (top-level keys, then one table per section)."""
    lines = [f"{k} = {_toml_value(v)}" for k, v in cfg.items() if not isinstance(v, dict)]
    for k, v in cfg.items():
        if isinstance(v, dict):
            lines += ["", f"[{k}]"] + [f"{kk} = {_toml_value(vv)}" for kk, vv in v.items()]
    return "\n".join(lines) + "\n"


def child_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent stream for one work item.

    ``SeedSequence(master_seed, spawn_key=key)`` is a counter-based
    derivation: the stream for a given key does not depend on which other
    keys were drawn, so any grid point can be rerun alone.
    """
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
