"""Run configuration: a TOML file of dotted sections plus ``BIHARMLAB_`` overrides.

Every key has a default, so an empty file is a valid configuration.  An
environment variable ``BIHARMLAB_SECTION__KEY=value`` overrides
``section.key``; the value is parsed as a TOML value when possible (so
``9``, ``1.5``, ``true`` and ``[0, 1]`` work) and kept as a string otherwise.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analysis.suite import SuiteSettings
from .grid import DEFAULT_N_NODES, DEFAULT_R_MAX, DEFAULT_R_MIN
from .params import OperatorParams
from .spectral import (DEFAULT_MODES, DEFAULT_SECTORS, RESIDUAL_TOL, SPECTRAL_N,
                       SPECTRAL_R_MAX, SPECTRAL_R_MIN)

ENV_PREFIX = "BIHARMLAB_"
# tables that are values (profile specs), replaced whole rather than merged
LEAF_TABLES = {"form.u", "form.v"}

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "operator": {"N": 9, "alpha": 1.0, "beta": 2.0, "lambda": None, "lambda0": None},
    "grid": {"r_min": DEFAULT_R_MIN, "r_max": DEFAULT_R_MAX, "n": DEFAULT_N_NODES},
    "family": {"seed": 0, "pairs": 20, "continuity_pairs": 80, "accretivity_members": 100,
               "lemma_members": 24, "sweep_size": 30, "descent_iters": 100},
    "tolerances": {"residual": RESIDUAL_TOL, "stability_samples": 1000},
    "spectral": {"r_min": SPECTRAL_R_MIN, "r_max": SPECTRAL_R_MAX, "n": SPECTRAL_N,
                 "sectors": list(DEFAULT_SECTORS), "modes": DEFAULT_MODES,
                 "dense_oracle": False, "refinement": False},
    "evolution": {"scheme": "implicit-euler", "sectors": [0], "initial": "power-gaussian",
                  "p": 4.0, "sigma": 1.0, "dt": None, "T": None},
    "form": {"u": {"family": "power-gaussian", "p": 4.0, "sigma": 1.0},
             "v": {"family": "power-gaussian", "p": 5.0, "sigma": 0.5}},
    "run": {"threads": 1, "out": "biharmlab-out", "plots": False},
}


class ConfigError(ValueError):
    """Malformed or invalid configuration (exit code 2)."""


def _parse_env_value(raw: str) -> Any:
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def _merge(base: dict, extra: Mapping, path: str = "") -> dict:
    for key, val in extra.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and where not in LEAF_TABLES:
            if not isinstance(val, Mapping):
                raise ConfigError(f"{where!r} must be a section")
            _merge(base[key], val, where + ".")
        else:
            base[key] = val
    return base


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> dict:
    environ = os.environ if environ is None else environ
    out: Dict[str, Dict[str, Any]] = {}
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):]
        if "__" not in rest:
            continue
        section, key = rest.split("__", 1)
        section = section.lower()
        # keys are case sensitive (operator.N); match them case-insensitively
        known = DEFAULTS.get(section, {})
        key = next((k for k in known if k.lower() == key.lower()), key.lower())
        out.setdefault(section, {})[key] = _parse_env_value(raw)
    return out


@dataclass
class RunConfig:
    data: Dict[str, Dict[str, Any]]
    source: Optional[str] = None

    def __getitem__(self, section: str) -> dict:
        return self.data[section]

    # derived objects ---------------------------------------------------------
    def params(self) -> OperatorParams:
        op = self.data["operator"]
        lam = 0.0 if op["lambda"] is None else float(op["lambda"])
        lam0 = None if op["lambda0"] is None else float(op["lambda0"])
        return OperatorParams(int(op["N"]), float(op["alpha"]), float(op["beta"]), lam, lam0)

    @property
    def lambda_given(self) -> bool:
        return self.data["operator"]["lambda"] is not None

    def suite_settings(self) -> SuiteSettings:
        f, g, t = self.data["family"], self.data["grid"], self.data["tolerances"]
        return SuiteSettings(pairs=int(f["pairs"]), continuity_pairs=int(f["continuity_pairs"]),
                             accretivity_members=int(f["accretivity_members"]),
                             lemma_members=int(f["lemma_members"]),
                             sweep_size=int(f["sweep_size"]),
                             descent_iters=int(f["descent_iters"]), seed=int(f["seed"]),
                             threads=int(self.data["run"]["threads"]),
                             stability_samples=int(t["stability_samples"]),
                             grid=(float(g["r_min"]), float(g["r_max"]), int(g["n"])))

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def validate(self) -> "RunConfig":
        try:
            self.params()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid operator section: {exc}") from exc
        g = self.data["grid"]
        if not (0 < float(g["r_min"]) < float(g["r_max"])) or int(g["n"]) < 16:
            raise ConfigError("grid needs 0 < r_min < r_max and n >= 16")
        s = self.data["spectral"]
        if not (0 < float(s["r_min"]) < float(s["r_max"])) or int(s["n"]) < 64:
            raise ConfigError("spectral grid needs 0 < r_min < r_max and n >= 64")
        if not s["sectors"] or any(int(l) < 0 for l in s["sectors"]) or int(s["modes"]) < 1:
            raise ConfigError("spectral.sectors must be nonempty, l >= 0, modes >= 1")
        if int(self.data["run"]["threads"]) < 1:
            raise ConfigError("run.threads must be >= 1")
        if int(self.data["family"]["seed"]) < 0:
            raise ConfigError("family.seed must be a nonnegative integer")
        for key in ("dt", "T"):
            v = self.data["evolution"][key]
            if v is not None and not float(v) > 0:
                raise ConfigError(f"evolution.{key} must be > 0")
        return self


def load_config(path: Optional[str] = None, overrides: Optional[Mapping] = None,
                environ: Optional[Mapping[str, str]] = None) -> RunConfig:
    """Defaults, then the file, then environment, then explicit overrides."""
    data = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                _merge(data, tomllib.load(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path!r}: {exc}") from exc
    _merge(data, env_overrides(environ))
    if overrides:
        _merge(data, overrides)
    try:
        return RunConfig(data, path).validate()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
