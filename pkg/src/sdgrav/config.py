"""RunConfig: a sectioned ``key = value`` file checked against a fixed schema."""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .calculus import Grid3


class ConfigError(ValueError):
    pass


_TWO_PI = repr(2 * math.pi)

# section -> key -> (type, default); default None marks a required key
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "grid": {"nx": (int, None), "ny": (int, None), "nz": (int, None),
             "lx": (float, _TWO_PI), "ly": (float, _TWO_PI), "lz": (float, _TWO_PI)},
    "state": {"fixture": (str, "RAND"), "snapshot": (str, ""), "seed": (int, "0"), "delta_a": (float, "0.1")},
    "evolve": {"dt": (float, "1e-3"), "t": (float, "0.1"), "filter": (bool, "off"),
               "filter_strength": (float, "36"), "filter_order": (int, "16"), "filter_cutoff": (float, "0"),
               "collar_width": (int, "1"), "collar_tol": (float, "1e-5"), "budget": (float, "1e6"),
               "snapshot_every": (int, "0"), "densities": (str, "H1,H3,H4")},
    "verify": {"samples": (int, "20"), "corrupt_psi": (float, "0"), "fd_n": (int, "8")},
    "metric": {"dt": (float, "2e-3"), "t": (float, "0.16"), "spacings": (str, "20,10,5"),
               "node_stride": (int, "1")},
    "tolerances": {k: (float, v) for k, v in {
        "inverse": "1e-9", "skew": "1e-8", "factorization": "1e-9", "bihamiltonian": "1e-8",
        "vgrad": "1e-5", "helmholtz": "1e-6", "noether": "1e-8", "symmetry": "1e-6", "recursion": "1e-5",
        "conservation": "1e-6", "adjoint": "1e-9", "trihamiltonian": "1e-7", "exact": "1e-8",
        "det": "1e-10", "ricci": "1e-9", "ricci_factor": "12",
    }.items()},
    "output": {"dir": (str, "out")},
}


@dataclass
class RunConfig:
    values: dict[str, dict[str, object]] = field(default_factory=dict)
    source: str = "<defaults>"

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.values[section]

    @property
    def grid(self) -> Grid3:
        g = self.values["grid"]
        return Grid3(g["nx"], g["ny"], g["nz"], g["lx"], g["ly"], g["lz"])

    @property
    def tolerances(self) -> dict[str, float]:
        return dict(self.values["tolerances"])

    def override(self, section: str, key: str, value) -> None:
        if value is None:
            return
        typ, _ = SCHEMA[section][key]
        self.values[section][key] = _convert(typ, str(value), section, key)


def _convert(typ, raw: str, section: str, key: str):
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "on", "true", "yes"):
                return True
            if low in ("0", "off", "false", "no"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot read {raw!r} as {typ.__name__}") from None


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
    values: dict[str, dict[str, object]] = {}
    for section, keys in SCHEMA.items():
        values[section] = {}
        for key, (typ, default) in keys.items():
            if cp.has_option(section, key):
                raw = cp.get(section, key)
            elif default is None:
                raise ConfigError(f"{source}: missing required key {key!r} in [{section}]")
            else:
                raw = str(default)
            values[section][key] = _convert(typ, raw, section, key)
    for key, tol in values["tolerances"].items():
        if not tol > 0:
            raise ConfigError(f"{source}: tolerance {key!r} must be positive")
    cfg = RunConfig(values, source)
    try:
        cfg.grid
    except ValueError as exc:
        raise ConfigError(f"{source}: [grid] {exc}") from None
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(p))
