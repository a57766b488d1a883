"""YAML experiment configs: schema validation with line-located errors.

A config has four blocks::

    name: access_line_reliable
    environment: {kind: access, arrival_prob: [...], success_prob: [...], ...}
    topology: {kind: line}            # line | grid | edges
    learner: {algorithm: td_rdac, T: 3000, ...}   # or a list of such blocks
    trial: {seeds: [0, 1, 2], eval_episodes: 1}

Unknown keys are rejected anywhere in the tree.
"""

from __future__ import annotations

import copy
import numbers
from dataclasses import dataclass
from pathlib import Path

import yaml

ALGORITHMS = ("td_rdac", "dpg_exact", "dpg_inexact", "aloha", "dpc")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.message = message
        self.line = line
        self.source = source
        super().__init__(str(self))

    def __str__(self) -> str:
        where = self.source or "<config>"
        if self.line is not None:
            where = f"{where}:{self.line}"
        return f"{where}: {self.message}"


# --- value checkers --------------------------------------------------------------

def _num(v) -> bool:
    return isinstance(v, numbers.Real) and not isinstance(v, bool)


def _int(v) -> bool:
    return isinstance(v, numbers.Integral) and not isinstance(v, bool)


def _prob(v) -> bool:
    return _num(v) and 0 <= v <= 1


def _prob_list(v) -> bool:
    return isinstance(v, list) and len(v) > 0 and all(_prob(x) for x in v)


def _pos_int(v) -> bool:
    return _int(v) and v >= 1


def _nonneg(v) -> bool:
    return _num(v) and v >= 0


def _pos(v) -> bool:
    return _num(v) and v > 0


def _opt(check):
    return lambda v: v is None or check(v)


def _scalar_or_list(check):
    return lambda v: check(v) or (isinstance(v, list) and len(v) > 0 and all(check(x) for x in v))


def _pairs(v) -> bool:
    return isinstance(v, list) and all(isinstance(e, list) and len(e) == 2 and all(_int(x) for x in e) for e in v)


def _points(v) -> bool:
    return isinstance(v, list) and len(v) > 0 and all(
        isinstance(p, list) and len(p) == 2 and all(_num(x) for x in p) for p in v
    )


def _int_lists(v) -> bool:
    return isinstance(v, list) and len(v) > 0 and all(isinstance(e, list) and all(_int(x) for x in e) for e in v)


def _one_of(*choices):
    return lambda v: v in choices


# key -> (checker, description, default)
ENV_ACCESS = {
    "kind": (_one_of("access"), "'access'", None),
    "arrival_prob": (_prob_list, "list of probabilities", None),
    "success_prob": (_prob_list, "list of probabilities", None),
    "deadline": (_pos_int, "positive integer", 2),
    "normalize": (_one_of("none", "arrivals"), "'none' or 'arrivals'", "none"),
    "gamma": (lambda v: _num(v) and 0 <= v < 1, "number in [0, 1)", 0.9),
}
ENV_POWER = {
    "kind": (_one_of("power"), "'power'", None),
    "p_max": (_pos_int, "positive integer", 5),
    "kappa": (_nonneg, "non-negative number", 0.1),
    "sigma": (_scalar_or_list(_pos), "positive number or list", 0.1),
    "price": (_scalar_or_list(_nonneg), "non-negative number or list", 0.1),
    "normalize": (lambda v: isinstance(v, bool), "boolean", False),
    "gamma": (lambda v: _num(v) and 0 <= v < 1, "number in [0, 1)", 0.9),
}
TOPOLOGY = {
    "kind": (_one_of("line", "grid", "edges"), "'line', 'grid' or 'edges'", None),
    "nodes": (_opt(_pos_int), "positive integer", None),
    "rows": (_opt(_pos_int), "positive integer", None),
    "cols": (_opt(_pos_int), "positive integer", None),
    "spacing": (_pos, "positive number", 1.0),
    "edges": (_opt(_pairs), "list of [m, n] pairs", None),
    "positions": (_opt(_points), "list of [x, y] points", None),
    "availability": (_opt(_int_lists), "list of AP index lists", None),
}
LEARNER = {
    "algorithm": (_one_of(*ALGORITHMS), " or ".join(ALGORITHMS), None),
    "T": (_pos_int, "positive integer", 1000),
    "H": (_pos_int, "positive integer", 100),
    "eta": (_opt(_pos), "positive number", None),
    "c_eta": (_pos, "positive number", 1.0),
    "alpha": (lambda v: _num(v) and 0 < v <= 1, "number in (0, 1]", 0.1),
    "alpha_schedule": (_one_of("constant", "log_h"), "'constant' or 'log_h'", "constant"),
    "lam": (_opt(_nonneg), "non-negative number", None),
    "eval_interval": (_pos_int, "positive integer", 10),
    "warm_start": (lambda v: isinstance(v, bool), "boolean", False),
    "grad_clip": (_opt(_pos), "positive number", None),
    "init": (_one_of("zeros", "random"), "'zeros' or 'random'", "zeros"),
    "init_scale": (_nonneg, "non-negative number", 1.0),
    "transmit_prob": (_opt(_scalar_or_list(lambda v: _num(v) and 0 < v <= 1)), "probability in (0, 1]", None),
    "label": (_opt(lambda v: isinstance(v, str) and v.isidentifier()), "identifier", None),
}
TRIAL = {
    "seeds": (lambda v: isinstance(v, list) and len(v) > 0 and all(_int(s) and s >= 0 for s in v),
              "non-empty list of non-negative integers", [0]),
    "eval_episodes": (_pos_int, "positive integer", 1),
    "eval_steps": (_pos_int, "positive integer", 500),
    "output_dir": (_opt(lambda v: isinstance(v, str)), "path string", None),
}
TOP = ("name", "description", "environment", "topology", "learner", "trial")


# --- line tracking --------------------------------------------------------------

def _line_map(node, path=(), out=None) -> dict:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _line_map(v, path + (k.value,), out)
            # errors about a key point at the key, not its value
            out[path + (k.value,)] = k.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Validator:
    def __init__(self, lines: dict, source: str | None):
        self.lines = lines
        self.source = source

    def fail(self, message: str, path=()):
        line = None
        p = tuple(path)
        while line is None and p is not None:
            line = self.lines.get(p)
            p = p[:-1] if p else None
        raise ConfigError(message, line, self.source)

    def block(self, data, schema: dict, path: tuple) -> dict:
        if not isinstance(data, dict):
            self.fail(f"'{'.'.join(map(str, path))}' must be a mapping", path)
        for key in data:
            if key not in schema:
                self.fail(f"unknown key '{key}' in {'.'.join(map(str, path)) or 'config'}", path + (key,))
        out = {}
        for key, (check, desc, default) in schema.items():
            if key in data:
                if not check(data[key]):
                    self.fail(f"'{key}' must be {desc}, got {data[key]!r}", path + (key,))
                out[key] = data[key]
            elif default is None and key in ("kind", "algorithm", "arrival_prob", "success_prob"):
                self.fail(f"missing required key '{key}'", path)
            else:
                out[key] = copy.deepcopy(default)
        return out


@dataclass
class ExperimentConfig:
    name: str
    environment: dict
    topology: dict
    learners: list[dict]
    trial: dict
    source: str | None = None

    def learner_label(self, i: int) -> str:
        block = self.learners[i]
        return block.get("label") or block["algorithm"]

    def echo(self, learner_index: int, seed: int) -> dict:
        """A complete single-learner, single-seed config that reproduces one run."""
        return {
            "name": self.name,
            "environment": copy.deepcopy(self.environment),
            "topology": copy.deepcopy(self.topology),
            "learner": copy.deepcopy(self.learners[learner_index]),
            "trial": {**copy.deepcopy(self.trial), "seeds": [int(seed)]},
        }


def _validate(data, lines: dict, source: str | None) -> ExperimentConfig:
    v = _Validator(lines, source)
    if not isinstance(data, dict):
        v.fail("config must be a mapping")
    for key in data:
        if key not in TOP:
            v.fail(f"unknown top-level key '{key}'", (key,))
    for key in ("name", "environment", "topology", "learner"):
        if key not in data:
            v.fail(f"missing required block '{key}'")
    if not isinstance(data["name"], str) or not data["name"]:
        v.fail("'name' must be a non-empty string", ("name",))

    env = data["environment"]
    if not isinstance(env, dict) or env.get("kind") not in ("access", "power"):
        v.fail("environment.kind must be 'access' or 'power'", ("environment", "kind"))
    env = v.block(env, ENV_ACCESS if env["kind"] == "access" else ENV_POWER, ("environment",))
    topo = v.block(data["topology"], TOPOLOGY, ("topology",))

    raw_learners = data["learner"]
    many = isinstance(raw_learners, list)
    items = raw_learners if many else [raw_learners]
    if not items:
        v.fail("learner list is empty", ("learner",))
    learners = []
    for i, item in enumerate(items):
        path = ("learner", i) if many else ("learner",)
        blk = v.block(item, LEARNER, path)
        if blk["algorithm"] == "aloha" and env["kind"] != "access":
            v.fail("aloha needs an access environment", path + ("algorithm",))
        if blk["algorithm"] == "dpc" and env["kind"] != "power":
            v.fail("dpc needs a power environment", path + ("algorithm",))
        if blk["eval_interval"] > blk["T"]:
            v.fail("eval_interval cannot exceed T", path + ("eval_interval",))
        learners.append(blk)
    labels = [b.get("label") or b["algorithm"] for b in learners]
    if len(set(labels)) != len(labels):
        v.fail("learners must have distinct labels (set 'label' to disambiguate)", ("learner",))

    trial = v.block(data.get("trial", {}), TRIAL, ("trial",))
    cfg = ExperimentConfig(data["name"], env, topo, learners, trial, source)
    try:
        from recmarl.experiment.build import build_environment

        build_environment(cfg)
    except ConfigError:
        raise
    except (ValueError, IndexError) as exc:
        v.fail(f"invalid environment: {exc}", ("environment",))
    return cfg


def loads(text: str, source: str | None = None) -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, source) from exc
    if node is None:
        raise ConfigError("config is empty", None, source)
    return _validate(data, _line_map(node), source)


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, str(path)) from exc
    return loads(text, str(path))


def from_dict(data: dict, source: str | None = None) -> ExperimentConfig:
    return loads(yaml.safe_dump(data, sort_keys=False), source)


def bundled_path(name: str) -> Path:
    from importlib import resources

    return Path(str(resources.files("recmarl.experiment").joinpath("configs", f"{name}.yaml")))


def resolve(ref: str) -> Path:
    """A config path, or the name of a bundled config."""
    p = Path(ref)
    if p.exists():
        return p
    bundled = bundled_path(ref.removesuffix(".yaml"))
    if bundled.exists():
        return bundled
    return p
