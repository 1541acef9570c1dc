"""Run configuration: JSON document, schema validation, object builders."""

import copy
import json
from dataclasses import dataclass
from importlib import resources
import math

import jsonschema
import numpy as np

from .domain import build_grid, density_measure, distance_to_complement, lebesgue, power_weight
from .errors import ConfigError, PreconditionError
from .exponents import as_exponent, cutoff_conjugates, interpolation_lambda
from .expr import compile_expr
from .families import build_family
from .forms import SobolevPair, diag_expr_form, grushin_form, identity_form, zero_form
from .geometry import Quasimetric

DEFAULTS = {
    "measures": {"w": {"preset": "lebesgue"}, "nu": {"preset": "lebesgue"}, "mu": {"preset": "lebesgue"}},
    "quasimetric": {"kind": "euclidean"},
    "form": {"preset": "identity"},
    "family": {"preset": "sine_decay", "count": 16},
    "exponents": {"p": 2, "N": "inf", "q": [1, 2]},
    "engine": {"eps": [0.1, 0.05, 0.02, 0.01], "c0": 1.0, "M": 1.0, "j_max": 4},
    "output": {"dir": "out", "prefix": "report"},
}


def schema():
    text = resources.files("sobocomp").joinpath("schema/runconfig.schema.json").read_text()
    return json.loads(text)


@dataclass
class RunConfig:
    data: dict

    @classmethod
    def from_dict(cls, raw):
        try:
            jsonschema.validate(raw, schema())
        except jsonschema.ValidationError as exc:
            where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
            raise ConfigError(f"config invalid at {where}: {exc.message}") from None
        data = copy.deepcopy(raw)
        for key, sub in DEFAULTS.items():
            merged = copy.deepcopy(sub)
            merged.update(data.get(key, {}))
            data[key] = merged
        cfg = cls(data)
        cfg._cross_check()
        return cfg

    def to_dict(self):
        return copy.deepcopy(self.data)

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    def _cross_check(self):
        dom = self.data["domain"]
        dim = dom["dim"]
        if len(dom["bounds"]) not in (1, dim) or len(dom["cells"]) not in (1, dim):
            raise ConfigError(f"domain bounds and cells must have 1 or {dim} entries")
        for path, text in self._expressions():
            try:
                compile_expr(text)
            except ConfigError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        ex = self.data["exponents"]
        N = as_exponent(ex["N"])
        for q in ex["q"]:
            if q > 1 and not (N == math.inf or q < N):
                # q <= p is still reachable on a local run
                if self.data["engine"].get("omega_prime") is None or q > ex["p"]:
                    raise ConfigError(f"exponent q={q} is not below N={ex['N']}")
            elif q > 1:
                interpolation_lambda(q, N)
        if "sigma" in ex and "s" in ex:
            try:
                cutoff_conjugates(ex["s"], ex["p"], ex["sigma"])
            except PreconditionError as exc:
                raise ConfigError(str(exc)) from None
        if self.data["form"]["preset"] == "diag" and len(self.data["form"].get("entries", [])) != dim:
            raise ConfigError(f"diag form needs {dim} entries")
        if self.data["quasimetric"]["kind"] == "grushin" and "kappa" not in self.data["quasimetric"]:
            raise ConfigError("grushin quasimetric needs an explicit kappa")

    def _expressions(self):
        d = self.data
        if "mask" in d["domain"]:
            yield "domain.mask", d["domain"]["mask"]
        for k, m in d["measures"].items():
            if "expr" in m:
                yield f"measures.{k}.expr", m["expr"]
        for i, e in enumerate(d["form"].get("entries", [])):
            yield f"form.entries[{i}]", e
        for k in ("omega_prime", "omega_dprime"):
            if k in d["engine"]:
                yield f"engine.{k}", d["engine"][k]
        if "probe" in d and "density" in d["probe"]:
            yield "probe.density", d["probe"]["density"]
        if "partition" in d:
            yield "partition.K", d["partition"]["K"]


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    return RunConfig.from_dict(raw)


def dumps_config(cfg):
    return json.dumps(cfg.to_dict(), sort_keys=True, indent=2)


def make_domain(cfg, cells=None):
    d = cfg["domain"]
    bounds = d["bounds"][0] if len(d["bounds"]) == 1 else d["bounds"]
    c = cells if cells is not None else (d["cells"][0] if len(d["cells"]) == 1 else d["cells"])
    return build_grid(d["dim"], bounds, c, d.get("mask"))


def make_measure(cfg, domain, key):
    m = cfg["measures"][key]
    if m["preset"] == "lebesgue":
        return lebesgue(domain)
    if m["preset"] == "density":
        if "expr" not in m:
            raise ConfigError(f"measures.{key} needs expr")
        return density_measure(domain, m["expr"], label=m["expr"])
    rho = distance_to_complement(domain)
    return power_weight(domain, rho, float(m.get("alpha", 0.0)))


def make_quasimetric(cfg):
    q = cfg["quasimetric"]
    return Quasimetric(q["kind"], kappa=q.get("kappa"), beta=q.get("beta"))


def make_form(cfg, domain):
    f = cfg["form"]
    if f["preset"] == "identity":
        return identity_form(domain)
    if f["preset"] == "zero":
        return zero_form(domain)
    if f["preset"] == "grushin":
        return grushin_form(domain)
    return diag_expr_form(domain, f["entries"])


def make_family(cfg, domain):
    spec = cfg["family"]
    if spec["preset"] != "file":
        return build_family(domain, spec)
    path = spec.get("path")
    if not path:
        raise ConfigError("file family needs a path")
    try:
        data = np.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read family file {path}: {exc}") from None
    f, g = np.asarray(data["f"], dtype=float), np.asarray(data["g"], dtype=float)
    if f.ndim != 2 or f.shape[1] != domain.n_active or g.shape != f.shape + (domain.dim,):
        raise ConfigError(f"family arrays do not match the domain ({domain.n_active} active cells)")
    return [SobolevPair(fi, gi, label=f"file[{i}]") for i, (fi, gi) in enumerate(zip(f, g))]


def make_mask(domain, text):
    return np.asarray(compile_expr(text)(domain.centers), dtype=bool)
