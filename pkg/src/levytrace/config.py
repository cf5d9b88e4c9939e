"""Experiment configuration files.

Plain ``key = value`` files with ``[section]`` headers, read with
:mod:`configparser`.  Every key is validated against a schema so that a
typo is reported with its line and column instead of being ignored.

Example::

    [experiment]
    kind = trace_ladder
    seed = 42

    [model]
    alpha = 1.0
    d = 2

    [domain]
    shape = square

    [run]
    t = 0.2, 0.1, 0.05
    eps = 0.1
    n_paths = 262144
"""
from __future__ import annotations

import configparser
import enum
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .geometry import Ball, Box, Domain, load_polygon, unit_square

__all__ = ["Kind", "ExperimentConfig", "DomainSpec", "load_config", "parse_config"]


class Kind(str, enum.Enum):
    CF_TEST = "cf_test"
    KERNEL_ORACLE = "kernel_oracle"
    HALFSPACE = "halfspace"
    C_H = "c_H"
    TRACE_LADDER = "trace_ladder"
    PROP1 = "prop1"
    CONE_LEMMAS = "cone_lemmas"
    SCALING_CERTS = "scaling_certs"


def _floats(s):
    return tuple(float(x) for x in s.replace(";", ",").split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in s.replace(";", ",").split(",") if x.strip())


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "yes", "true", "on"):
        return True
    if v in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _alpha(s):
    v = s.strip().lower()
    return "gaussian" if v == "gaussian" else float(v)


def _alphas(s):
    return tuple(_alpha(x) for x in s.split(",") if x.strip())


# section -> key -> parser
SCHEMA = {
    "experiment": {"kind": str, "seed": int, "workers": int, "out": str},
    "model": {"alpha": _alpha, "alphas": _alphas, "d": int, "dims": _ints,
              "sum_alphas": _floats},
    "domain": {"shape": str, "sides": _floats, "radius": float, "center": _floats,
               "file": str},
    "run": {
        "t": _floats, "eps": float, "n_paths": int, "steps": int, "q": _floats,
        "xi": _floats, "t_step": float, "u": _floats, "dt_ratio": int,
        "eta": _floats, "beta": float, "gamma": float, "w": float, "r": float,
        "x": float, "eps_list": _floats, "q_points": int, "q_max": float,
        "strip_pairs": int, "deficit_paths": int, "ch_paths": int,
        "inequality_suite": _bool, "remainder_paths": int, "cone_d": int,
        "shapes": str,
    },
}

DEFAULTS = {
    "experiment": {"seed": 0, "workers": 1, "out": None},
    "model": {"alpha": 1.0, "d": 2},
}


@dataclass(frozen=True)
class DomainSpec:
    shape: str = "square"
    sides: tuple = ()
    radius: float = 1.0
    center: tuple = ()
    file: str | None = None

    def build(self, d=2) -> Domain:
        if self.shape == "square":
            return unit_square()
        if self.shape == "box":
            return Box.from_sides(self.sides or (1.0,) * d)
        if self.shape == "ball":
            c = self.center or (0.0,) * d
            return Ball(c, self.radius, len(c))
        if self.shape == "polygon":
            return load_polygon(self.file)
        raise ConfigError(f"unknown domain shape {self.shape!r}")


@dataclass
class ExperimentConfig:
    """Validated experiment description; ``run`` holds the kind-specific keys."""

    kind: Kind
    seed: int = 0
    workers: int = 1
    out: str | None = None
    alpha: float | str = 1.0
    d: int = 2
    model: dict = field(default_factory=dict)
    domain: DomainSpec = field(default_factory=DomainSpec)
    run: dict = field(default_factory=dict)
    source: str | None = None

    @property
    def t_ladder(self):
        return self.run.get("t", ())

    def get(self, key, default=None):
        return self.run.get(key, default)


def _locate(text):
    """``(section, key) -> (line, column of the value)`` from the raw text.

    ``(section, key, "key")`` maps to the column of the key itself.
    """
    where = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = (lineno, line.index("[") + 1)
            continue
        m = re.match(r"(\s*)([^=:#;\s][^=:]*?)\s*[=:]\s*", line)
        if m and section is not None:
            key = m.group(2).strip().lower()
            where[(section, key)] = (lineno, m.end() + 1)
            where[(section, key, "key")] = (lineno, len(m.group(1)) + 1)
    return where


def parse_config(text, source=None, base_dir=None) -> ExperimentConfig:
    where = _locate(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", exc.lineno, 1) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", exc.lineno, 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("cannot parse line", lineno, 1) from None

    values = {}
    for section in cp.sections():
        loc = where.get((section, None), (None, None))
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", *loc)
        values[section] = {}
        for key, raw in cp.items(section):
            kloc = where.get((section, key), (None, None))
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]",
                                  *where.get((section, key, "key"), kloc))
            try:
                values[section][key] = SCHEMA[section][key](raw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}", *kloc) from None

    exp = {**DEFAULTS["experiment"], **values.get("experiment", {})}
    if "kind" not in exp:
        raise ConfigError("missing [experiment] kind", *where.get(("experiment", None), (None, None)))
    try:
        kind = Kind(exp["kind"])
    except ValueError:
        raise ConfigError(f"unknown experiment kind {exp['kind']!r}",
                          *where.get(("experiment", "kind"), (None, None))) from None
    model = {**DEFAULTS["model"], **values.get("model", {})}
    run = values.get("run", {})

    def fail(msg, section, key):
        raise ConfigError(msg, *where.get((section, key), where.get((section, None), (None, None))))

    for key in ("n_paths", "ch_paths", "deficit_paths", "strip_pairs", "remainder_paths",
                "steps", "q_points", "dt_ratio"):
        if key in run and run[key] <= 0:
            fail(f"{key} must be positive", "run", key)
    if exp["workers"] < 1:
        fail("workers must be >= 1", "experiment", "workers")
    if exp["seed"] < 0:
        fail("seed must be >= 0", "experiment", "seed")
    for key in ("t", "eta", "eps_list"):
        seq = run.get(key)
        if seq is not None:
            if any(v <= 0 for v in seq):
                fail(f"{key} values must be positive", "run", key)
            if any(b >= a for a, b in zip(seq, seq[1:])):
                fail(f"{key} ladder must be strictly decreasing", "run", key)

    dom = values.get("domain", {})
    file = dom.get("file")
    if file is not None:
        path = Path(file)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        if not path.exists():
            fail(f"file not found: {file}", "domain", "file")
        file = str(path)
    shape = dom.get("shape", "polygon" if file else "square")
    if shape not in ("square", "box", "ball", "polygon"):
        fail(f"unknown domain shape {shape!r}", "domain", "shape")
    if shape == "polygon" and file is None:
        fail("polygon domain needs 'file'", "domain", "shape")
    if "radius" in dom and not dom["radius"] > 0:
        fail("radius must be positive", "domain", "radius")
    spec = DomainSpec(shape, dom.get("sides", ()), dom.get("radius", 1.0), dom.get("center", ()),
                      file)
    return ExperimentConfig(kind, exp["seed"], exp["workers"], exp["out"], model["alpha"],
                            model["d"], model, spec, run, source)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path), path.parent)
