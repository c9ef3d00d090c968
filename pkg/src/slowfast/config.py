"""YAML run configuration with line-precise diagnostics.

Schema (all sections optional except ``model``)::

    model:                       # builder name plus its parameters (lam comes
      name: toy                  # from simulation.lam)
      n: 2
    analysis:
      grid: [[0, 0], [0.5, -0.5]]   # default: [simulation.x0]
      max_steps: 64
      tolerances: {poisson_tail: 1.0e-12}
    simulation:
      x0: [0.5, 0.0]
      v0: [1, -1]
      t_end: 1.0
      lam: 10.0
      M: 10000                   # Monte Carlo replicas for the summary
      paths: 3                   # trajectory CSVs written
      seed: 1
      h: null                    # default t_end / 1e4
      report_dt: 0.1
      frozen_measure_mode: state_dependent
    experiment:
      t: 1.0
      lambda_grid: [10, 100, 1000, 10000]
      M: 100000
      observable: {name: tanh, i: 0}
      decay_grid: [1, 2, ..., 20]   # expected jump counts rate * t
      delta_grid: [0.001, 0.01, 0.1]
      gap_t: 0.5
    verify:
      profile: full              # or quick
      seed: 2024
      thresholds: {...}          # see acceptance.Thresholds
    output:
      directory: out
"""

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import ValidationError
from .tolerances import Tolerances


class ConfigError(ValidationError):
    def __init__(self, message, source="<config>", line=None):
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")
        self.line = line


def _to_python(node, path, lines):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        out = {}
        for k, v in node.value:
            key = k.value
            if key in out:
                raise ConfigError(f"duplicate key {'.'.join(path + (key,))!r}", line=k.start_mark.line + 1)
            out[key] = _to_python(v, path + (key,), lines)
        return out
    if isinstance(node, yaml.SequenceNode):
        return [_to_python(v, path + (i,), lines) for i, v in enumerate(node.value)]
    return _scalar(node)


def _scalar(node):
    loader = yaml.SafeLoader("")
    try:
        return loader.construct_object(node, deep=True)
    finally:
        loader.dispose()


SECTIONS = ("model", "analysis", "simulation", "experiment", "verify", "output")

SIM_DEFAULTS = dict(x0=None, v0=None, t_end=1.0, lam=10.0, M=10_000, paths=1, seed=0, h=None,
                    report_dt=None, frozen_measure_mode="state_dependent")
EXP_DEFAULTS = dict(t=1.0, lambda_grid=[10.0, 100.0, 1000.0, 10000.0], M=100_000,
                    observable={"name": "tanh", "i": 0}, decay_grid=list(range(1, 21)),
                    delta_grid=[1e-3, 1e-2, 1e-1], gap_t=0.5, marginal_lambdas=[10.0, 100.0, 1000.0],
                    marginal_M=10_000)
ANA_DEFAULTS = dict(grid=None, max_steps=64, tolerances={})
VER_DEFAULTS = dict(profile="full", seed=2024, thresholds={})


@dataclass
class RunConfig:
    model: dict
    analysis: dict
    simulation: dict
    experiment: dict
    verify: dict
    output: dict
    source: str = "<config>"
    lines: dict = field(default_factory=dict, repr=False)
    text: str = ""

    def error(self, message, *path):
        line = None
        for k in range(len(path), 0, -1):
            if path[:k] in self.lines:
                line = self.lines[path[:k]]
                break
        return ConfigError(message, self.source, line)

    @property
    def tolerances(self):
        return Tolerances(**self.analysis["tolerances"])

    def echo(self):
        """Resolved configuration as YAML (written next to every output).

        The output directory is left out so that reruns into different
        directories produce identical files.
        """
        data = {s: _plain(getattr(self, s)) for s in SECTIONS if s != "output"}
        return "".join(yaml.safe_dump({s: v}, sort_keys=True) for s, v in data.items())


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def parse_config(text, source="<config>") -> RunConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"not valid YAML: {getattr(exc, 'problem', exc)}", source,
                          mark.line + 1 if mark else None) from None
    lines = {}
    if node is None:
        raise ConfigError("configuration is empty", source, 1)
    try:
        data = _to_python(node, (), lines)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[1], source, exc.line) from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(str(exc), source, mark.line + 1 if mark else None) from None
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", source, 1)
    for key in data:
        if key not in SECTIONS:
            raise ConfigError(f"unknown section {key!r} (expected one of {', '.join(SECTIONS)})",
                              source, lines.get((key,)))
    for key in SECTIONS:
        if data.get(key) is None:
            data[key] = {}
        if not isinstance(data[key], dict):
            raise ConfigError(f"section {key!r} must be a mapping", source, lines.get((key,)))
    cfg = RunConfig(data["model"], {**ANA_DEFAULTS, **data["analysis"]},
                    {**SIM_DEFAULTS, **data["simulation"]}, {**EXP_DEFAULTS, **data["experiment"]},
                    {**VER_DEFAULTS, **data["verify"]}, {"directory": "out", **data["output"]},
                    source, lines, text)
    validate(cfg, data)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path))


# ---------------------------------------------------------------------------
# validation

def _unknown(cfg, section, given, allowed):
    for key in given:
        if key not in allowed:
            raise cfg.error(f"unknown key {section}.{key}", section, key)


def _number(cfg, path, value, lo=None, hi=None, integer=False, strict_lo=False, allow_none=False):
    name = ".".join(map(str, path))
    if value is None and allow_none:
        return None
    if isinstance(value, str):
        # YAML 1.1 reads exponent forms without a dot (1e-12) as strings
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise cfg.error(f"{name} must be a number, got {value!r}", *path)
    if integer and not float(value).is_integer():
        raise cfg.error(f"{name} must be an integer, got {value!r}", *path)
    if not np.isfinite(value):
        raise cfg.error(f"{name} must be finite", *path)
    if lo is not None and (value <= lo if strict_lo else value < lo):
        raise cfg.error(f"{name} must be {'>' if strict_lo else '>='} {lo}, got {value!r}", *path)
    if hi is not None and value > hi:
        raise cfg.error(f"{name} must be <= {hi}, got {value!r}", *path)
    return int(value) if integer else float(value)


def _vector(cfg, path, value, allow_none=False, ints=False):
    name = ".".join(map(str, path))
    if value is None and allow_none:
        return None
    if not isinstance(value, list) or not value:
        raise cfg.error(f"{name} must be a non-empty list", *path)
    return [_number(cfg, path + (i,), c, integer=ints) for i, c in enumerate(value)]


def validate(cfg: RunConfig, raw: dict):
    from .harness import OBSERVABLES
    from .models import MODELS
    from .tolerances import Tolerances

    m = cfg.model
    if "name" not in m:
        raise cfg.error("model.name is required", "model")
    if m["name"] not in MODELS:
        raise cfg.error(f"unknown model {m['name']!r}; known: {', '.join(sorted(MODELS))}",
                        "model", "name")
    if "lam" in m:
        raise cfg.error("set the rate in simulation.lam, not model.lam", "model", "lam")

    a = cfg.analysis
    _unknown(cfg, "analysis", raw["analysis"], ANA_DEFAULTS)
    a["max_steps"] = _number(cfg, ("analysis", "max_steps"), a["max_steps"], 1, integer=True)
    if a["grid"] is not None:
        if not isinstance(a["grid"], list) or not a["grid"]:
            raise cfg.error("analysis.grid must be a non-empty list of points", "analysis", "grid")
        a["grid"] = [_vector(cfg, ("analysis", "grid", i), p) for i, p in enumerate(a["grid"])]
    if not isinstance(a["tolerances"], dict):
        raise cfg.error("analysis.tolerances must be a mapping", "analysis", "tolerances")
    known = {f.name for f in fields(Tolerances)}
    for k, v in a["tolerances"].items():
        if k not in known:
            raise cfg.error(f"unknown tolerance {k!r}", "analysis", "tolerances", k)
        a["tolerances"][k] = _number(cfg, ("analysis", "tolerances", k), v, 0, strict_lo=True)

    s = cfg.simulation
    _unknown(cfg, "simulation", raw["simulation"], SIM_DEFAULTS)
    s["t_end"] = _number(cfg, ("simulation", "t_end"), s["t_end"], 0, strict_lo=True)
    s["lam"] = _number(cfg, ("simulation", "lam"), s["lam"], 0, strict_lo=True)
    s["M"] = _number(cfg, ("simulation", "M"), s["M"], 1, integer=True)
    s["paths"] = _number(cfg, ("simulation", "paths"), s["paths"], 0, integer=True)
    s["seed"] = _number(cfg, ("simulation", "seed"), s["seed"], 0, 2 ** 64 - 1, integer=True)
    s["h"] = _number(cfg, ("simulation", "h"), s["h"], 0, strict_lo=True, allow_none=True)
    s["report_dt"] = _number(cfg, ("simulation", "report_dt"), s["report_dt"], 0, strict_lo=True,
                             allow_none=True)
    s["x0"] = _vector(cfg, ("simulation", "x0"), s["x0"], allow_none=True)
    if s["v0"] is not None and not isinstance(s["v0"], (list, int, str)):
        raise cfg.error("simulation.v0 must be a state label or index", "simulation", "v0")
    if s["frozen_measure_mode"] not in ("state_dependent", "anchored_at_x0"):
        raise cfg.error("simulation.frozen_measure_mode must be state_dependent or anchored_at_x0",
                        "simulation", "frozen_measure_mode")

    e = cfg.experiment
    _unknown(cfg, "experiment", raw["experiment"], EXP_DEFAULTS)
    e["t"] = _number(cfg, ("experiment", "t"), e["t"], 0, strict_lo=True)
    e["gap_t"] = _number(cfg, ("experiment", "gap_t"), e["gap_t"], 0, strict_lo=True)
    e["M"] = _number(cfg, ("experiment", "M"), e["M"], 1000, integer=True)
    e["marginal_M"] = _number(cfg, ("experiment", "marginal_M"), e["marginal_M"], 1, integer=True)
    for key in ("lambda_grid", "decay_grid", "delta_grid", "marginal_lambdas"):
        if not isinstance(e[key], list):
            raise cfg.error(f"experiment.{key} must be a list", "experiment", key)
        e[key] = [_number(cfg, ("experiment", key, i), c, 0, strict_lo=key != "delta_grid")
                  for i, c in enumerate(e[key])]
    if not e["lambda_grid"]:
        raise cfg.error("experiment.lambda_grid must not be empty", "experiment", "lambda_grid")
    if any(b <= a_ for a_, b in zip(e["lambda_grid"], e["lambda_grid"][1:])):
        raise cfg.error("experiment.lambda_grid must be increasing", "experiment", "lambda_grid")
    obs = e["observable"]
    if isinstance(obs, str):
        obs = e["observable"] = {"name": obs}
    if not isinstance(obs, dict) or obs.get("name") not in OBSERVABLES:
        raise cfg.error(f"experiment.observable.name must be one of {', '.join(sorted(OBSERVABLES))}",
                        "experiment", "observable")

    v = cfg.verify
    _unknown(cfg, "verify", raw["verify"], VER_DEFAULTS)
    if v["profile"] not in ("full", "quick"):
        raise cfg.error("verify.profile must be full or quick", "verify", "profile")
    v["seed"] = _number(cfg, ("verify", "seed"), v["seed"], 0, 2 ** 64 - 1, integer=True)
    from .acceptance import Thresholds
    if not isinstance(v["thresholds"], dict):
        raise cfg.error("verify.thresholds must be a mapping", "verify", "thresholds")
    names = {f.name for f in fields(Thresholds)}
    for k, val in v["thresholds"].items():
        if k not in names:
            raise cfg.error(f"unknown threshold {k!r}", "verify", "thresholds", k)
        v["thresholds"][k] = _number(cfg, ("verify", "thresholds", k), val)

    o = cfg.output
    _unknown(cfg, "output", raw["output"], {"directory": None})
    if not isinstance(o["directory"], str) or not o["directory"]:
        raise cfg.error("output.directory must be a non-empty string", "output", "directory")
