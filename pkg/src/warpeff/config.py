"""Scenario configuration: a validated key-value tree with filled defaults.

Configs are YAML trees. Unknown keys are fatal and reported with their
full path; numeric ranges are checked up front so batch runs fail before
any expensive assembly. Length-like keys carry coordinate units in the
name, curvature-like keys inverse length squared.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import yaml


class ConfigError(ValueError):
    pass


# Allowed keys per block; None marks a nested block handled recursively.
_SCHEMA = {
    "scenario": None,
    "manifold": {
        "kind": None,
        "n": None,
        "resolution": None,
        "lengths_coordinate_units": None,
        "radius_coordinate_units": None,
        "mode": None,
        "synthetic_r0_inverse_length_sq": None,
    },
    "conformal": {
        "source": None,
        "constant_value": None,
        "random": {"amplitude": None, "smoothness": None, "seed": None},
        "file": None,
        "volume_target": None,
    },
    "sources": {
        "flux": None,          # list of {degree, value}
        "string": {
            "kind": None,
            "beta": None,
            "value": None,
            "amplitude": None,
            "sigma_coordinate_units": None,
            "center": None,
        },
    },
    "physics": {"g_newton": None, "d": None},
    "spectrum": {"k": None},
    "verify": {
        "eta": None,
        "epsilon": None,
        "gamma_cap": None,
        "s_list": None,
        "expect_resonance": None,
    },
    "scan": {
        "ramp_value": None,
        "t_start": None,
        "t_stop": None,
        "t_num": None,
    },
    "sweep": {
        "count": None,
        "base_seed": None,
        "amplitude": None,
        "smoothness": None,
        "eta": None,
        "betas": None,
    },
    "nonlinear": {"d": None, "coupling": None, "f_constant": None},
    "example": {
        "name": None,
        "gamma": None,
        "volume_target": None,
        "radius_probe": None,
        "epsilons": None,
        "sigma_coordinate_units": None,
        "rescale_lambda": None,
    },
}

_DEFAULTS = {
    "scenario": "scenario",
    "manifold": {"kind": "sphere2", "n": 2, "resolution": 32,
                 "radius_coordinate_units": 1.0, "mode": "geometric"},
    "conformal": {"source": "zero"},
    "sources": {},
    "physics": {"g_newton": 1.0, "d": 4},
}


@dataclass
class ScenarioConfig:
    tree: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.tree[key]

    def get(self, *path, default=None):
        node = self.tree
        for key in path:
            if not isinstance(node, dict) or key not in node:
                return default
            node = node[key]
        return node

    @property
    def scenario_id(self) -> str:
        return str(self.tree.get("scenario", "scenario"))

    @property
    def scenario_hash(self) -> str:
        blob = json.dumps(self.tree, sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _check_keys(tree, schema, path=""):
    unknown = []
    for key, val in tree.items():
        here = f"{path}.{key}" if path else str(key)
        if key not in schema:
            unknown.append(here)
        elif isinstance(schema[key], dict) and isinstance(val, dict):
            unknown += _check_keys(val, schema[key], here)
    return unknown


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _validate(tree: dict) -> None:
    man = tree["manifold"]
    _require(man["kind"] in ("torus", "sphere2"),
             f"manifold.kind: unknown kind {man['kind']!r}")
    if man["kind"] == "torus":
        _require(2 <= int(man["n"]) <= 6,
                 "manifold.n: torus dimension must be in [2, 6]")
    else:
        _require(int(man["n"]) == 2, "manifold.n: sphere2 requires n = 2")
    _require(man.get("mode", "geometric") in ("geometric", "synthetic"),
             "manifold.mode: must be geometric or synthetic")
    conf = tree["conformal"]
    _require(conf["source"] in ("zero", "constant", "random", "file"),
             f"conformal.source: unknown source {conf['source']!r}")
    if conf["source"] == "random":
        rnd = conf.get("random", {})
        _require("seed" in rnd, "conformal.random.seed: required")
        _require(float(rnd.get("amplitude", 0.0)) >= 0,
                 "conformal.random.amplitude: must be nonnegative")
    if conf["source"] == "file":
        _require("file" in conf, "conformal.file: required")
    vt = conf.get("volume_target")
    if vt is not None:
        _require(float(vt) > 0, "conformal.volume_target: must be positive")
    src = tree.get("sources", {})
    for i, ent in enumerate(src.get("flux") or []):
        _require(set(ent) <= {"degree", "value"},
                 f"sources.flux[{i}]: only degree/value keys allowed")
        n = int(man["n"])
        _require(1 <= int(ent["degree"]) <= n,
                 f"sources.flux[{i}].degree: must be in [1, {n}]")
        _require(float(ent["value"]) >= 0,
                 f"sources.flux[{i}].value: must be nonnegative")
    st = src.get("string")
    if st:
        beta = float(st.get("beta", 0.0))
        _require(beta >= 0, "sources.string.beta: must be nonnegative")
        _require(st.get("kind", "constant") in ("constant", "gaussian"),
                 "sources.string.kind: must be constant or gaussian")
    phys = tree["physics"]
    _require(float(phys["g_newton"]) > 0,
             "physics.g_newton: must be positive")
    nl = tree.get("nonlinear")
    if nl:
        _require(int(nl.get("d", 0)) > 4,
                 "nonlinear.d: must exceed 4 (d = 4 is the linear problem)")
        _require(float(nl.get("coupling", 0.0)) != 0,
                 "nonlinear.coupling: must be nonzero")
    sc = tree.get("scan")
    if sc:
        _require(float(sc.get("t_stop", 1.0)) > float(sc.get("t_start", 0.0)),
                 "scan.t_stop: must exceed scan.t_start")
        _require(int(sc.get("t_num", 2)) >= 2, "scan.t_num: need >= 2 points")
    sw = tree.get("sweep")
    if sw:
        _require(int(sw.get("count", 1)) >= 1,
                 "sweep.count: must be positive")
    ver = tree.get("verify")
    if ver and ver.get("gamma_cap") is not None:
        _require(float(ver["gamma_cap"]) > 1,
                 "verify.gamma_cap: must exceed 1")


def _merge_defaults(tree: dict) -> dict:
    out = {}
    for key, dval in _DEFAULTS.items():
        if isinstance(dval, dict):
            block = dict(dval)
            block.update(tree.get(key) or {})
            out[key] = block
        else:
            out[key] = tree.get(key, dval)
    for key, val in tree.items():
        if key not in out:
            out[key] = val
    return out


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario config from YAML text."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    unknown = _check_keys(raw, _SCHEMA)
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(unknown))
    tree = _merge_defaults(raw)
    _validate(tree)
    return ScenarioConfig(tree)


def emit_config(config: ScenarioConfig) -> str:
    """Serialize a config so that parsing the output reproduces it."""
    return yaml.safe_dump(config.tree, sort_keys=True,
                          default_flow_style=False)


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())
