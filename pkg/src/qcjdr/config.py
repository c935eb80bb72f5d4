"""Experiment configuration: YAML file + ``--set key=value`` overrides.

Unknown keys are rejected and every value is validated before any
computation starts. Defaults reproduce the fiducial device.
"""

import copy
import hashlib
import json
import re
from dataclasses import dataclass

import numpy as np
import yaml

from ._validation import ParameterError
from .jc import DEFAULT_CHI, JcConfig
from .physmodel import TransducerParams
from .qsim import NoiseModel

SCHEMA_VERSION = 1

DEFAULTS = {
    "temperature": 1e-3,
    "temperatures": None,
    "chi": DEFAULT_CHI,
    "seed": 0,
    "jobs": 1,
    "transducer": {
        "omega1": TransducerParams.omega1,
        "omega2": TransducerParams.omega2,
        "omega3": TransducerParams.omega3,
        "kappa1": TransducerParams.kappa1,
        "kappa3": TransducerParams.kappa3,
        "gamma": TransducerParams.gamma,
        "g1_max": TransducerParams.g1_max,
        "g3_max": TransducerParams.g3_max,
        "G1_max": TransducerParams.G1_max,
        "G3_max": TransducerParams.G3_max,
        "nbar0": None,
        "thermal_factor_in_alpha": False,
    },
    "rmpn": {"values": None, "start": 0.05, "stop": 0.5, "num": 4, "log": True},
    "codebook": {"n": 3, "M": 4, "kind": "parity", "seed": 0},
    "circuit": {"layers": [1, 2, 3], "include_unitary": True, "topology": "auto"},
    "optimizer": {"restarts": 16, "max_iters": 2000, "tol": 1e-9, "learning_rate": 0.05,
                  "unitary_restarts": 8},
    "noise": {"p1": 0.0, "p2": 0.0, "pm": 0.0},
    "jc": {"time_window": 5.0, "grid_points": 2001, "refine": True},
    "capacity": {"start": 1e-3, "stop": 10.0, "num": 40},
    "output": {"csv": None, "manifest": None, "model": None, "timing": False},
}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-3`` style numbers as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^[-+]?(?:[0-9][0-9_]*)(?:\.[0-9_]*)?(?:[eE][-+]?[0-9]+)$""", re.X),
    list("-+0123456789"),
)


def _yaml(text):
    return yaml.load(text, Loader=_Loader)


def _merge(base, update, path=""):
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ParameterError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ParameterError(f"{where!r} must be a mapping")
            _merge(base[key], value, where + ".")
        else:
            base[key] = value


def _parse_value(text):
    try:
        return _yaml(text)
    except yaml.YAMLError:
        return text


def apply_override(tree, assignment):
    if "=" not in assignment:
        raise ParameterError(f"override {assignment!r} is not of the form key=value")
    key, text = assignment.split("=", 1)
    parts = key.strip().split(".")
    update = {parts[-1]: _parse_value(text)}
    for part in reversed(parts[:-1]):
        update = {part: update}
    _merge(tree, update)


@dataclass(frozen=True)
class ExperimentConfig:
    tree: dict

    @classmethod
    def load(cls, path=None, overrides=()):
        tree = copy.deepcopy(DEFAULTS)
        if path is not None:
            try:
                with open(path) as fh:
                    loaded = _yaml(fh) or {}
            except OSError as exc:
                raise ParameterError(f"cannot read config {path!r}: {exc.strerror}") from exc
            if not isinstance(loaded, dict):
                raise ParameterError("configuration file must hold a mapping")
            _merge(tree, loaded)
        for item in overrides:
            apply_override(tree, item)
        cfg = cls(tree)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.tree[key]

    def validate(self):
        self.transducer(self.tree["temperature"])
        for T in self.temperatures:
            self.transducer(T)
        self.jc_config()
        self.noise_model()
        cb = self.tree["codebook"]
        if cb["kind"] not in ("parity", "random"):
            raise ParameterError(f"unknown codebook kind {cb['kind']!r}")
        if not 2 <= cb["M"] <= 2 ** cb["n"]:
            raise ParameterError("codebook needs 2 <= M <= 2**n")
        if any(int(L) < 0 for L in self.layers):
            raise ParameterError("layer counts must be non-negative")
        if self.tree["jobs"] < 1:
            raise ParameterError("jobs must be at least 1")
        if any(r < 0 for r in self.rmpn_values()):
            raise ParameterError("rmpn values must be non-negative")

    @property
    def temperatures(self):
        temps = self.tree["temperatures"]
        return list(temps) if temps is not None else [self.tree["temperature"]]

    @property
    def layers(self):
        layers = self.tree["circuit"]["layers"]
        return [layers] if isinstance(layers, int) else list(layers)

    def transducer(self, temperature):
        fields = {k: float(v) for k, v in self.tree["transducer"].items()
                  if k not in ("nbar0", "thermal_factor_in_alpha")}
        return TransducerParams(temperature=float(temperature), **fields)

    def channel_options(self):
        t = self.tree["transducer"]
        return {"nbar0": t["nbar0"], "thermal_factor_in_alpha": bool(t["thermal_factor_in_alpha"])}

    def jc_config(self):
        j = self.tree["jc"]
        return JcConfig(chi=float(self.tree["chi"]), time_window=float(j["time_window"]),
                        grid_points=int(j["grid_points"]), refine=bool(j["refine"]))

    def noise_model(self):
        return NoiseModel(**{k: float(v) for k, v in self.tree["noise"].items()})

    def rmpn_values(self):
        r = self.tree["rmpn"]
        if r["values"] is not None:
            return [float(v) for v in r["values"]]
        if r["num"] == 0:
            return []
        space = np.geomspace if r["log"] else np.linspace
        return [float(v) for v in space(r["start"], r["stop"], int(r["num"]))]

    def digest(self):
        blob = json.dumps(self.tree, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
