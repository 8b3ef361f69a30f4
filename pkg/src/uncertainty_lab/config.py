"""Experiment configuration: a TOML file with a handful of flat tables.

Top-level keys are ``kind`` and ``seed``; the tables are ``geometry``,
``set``, ``band``, ``run``, ``constants`` and ``output``. Every value is
validated here, before any computation, and problems are reported as
:class:`~uncertainty_lab.errors.ConfigError` carrying the dotted field path.
"""

import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .suites import SUITES

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

KINDS = ("thm7", "thm11", "lemma-suite", "concentration", "scale-sweep", "gamma-sweep", "shell-cover")
SECTIONS = ("geometry", "set", "band", "run", "constants", "output")
SET_TYPES = ("full", "empty", "ball-union", "thick", "intervals", "boxes", "file")
SEED_ENV = "UNCERTAINTY_LAB_SEED"

_ALLOWED = {
    "geometry": {"d", "L", "N", "points_per_unit"},
    "set": {"type", "G", "delta", "sequence", "offset", "coverage", "gamma", "a", "intervals", "boxes",
            "path", "seed"},
    "band": {"centers", "sides", "b", "shift"},
    "run": {"p", "seeds", "lemmas", "instances", "max_iter", "restarts", "E", "dims", "gammas", "L_list",
            "max_spread", "max_residual", "mode", "jobs"},
    "constants": {"c", "c_tilde", "C_B", "C_kov", "N_d"},
    "output": {"dir"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    geometry: dict = field(default_factory=dict)
    set: dict = field(default_factory=dict)
    band: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    source: str | None = None


def _number(path, v, *, integer=False, positive=False, nonneg=False, lo=None, hi=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if isinstance(v, float) and math.isnan(v):
        raise ConfigError(path, "NaN is not allowed")
    if positive and not v > 0:
        raise ConfigError(path, f"must be positive, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(path, f"must be nonnegative, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be at least {lo}, got {v!r}")
    if hi is not None and v > hi:
        raise ConfigError(path, f"must be at most {hi}, got {v!r}")
    return int(v) if integer else float(v)


def _p_value(path, v):
    if isinstance(v, str):
        if v.lower() in ("inf", "infinity"):
            return math.inf
        raise ConfigError(path, f"expected a number or 'inf', got {v!r}")
    return _number(path, v, lo=1)


def _number_list(path, v, **kw):
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a nonempty list of numbers")
    return [_number(f"{path}[{i}]", x, **kw) for i, x in enumerate(v)]


def _vector(path, v, d, **kw):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return [_number(path, v, **kw)] * d
    vals = _number_list(path, v, **kw)
    if len(vals) != d:
        raise ConfigError(path, f"expected {d} entries, got {len(vals)}")
    return vals


def _choice(path, v, options):
    if v not in options:
        raise ConfigError(path, f"must be one of {', '.join(options)}; got {v!r}")
    return v


def load_config(path):
    """Read and validate a configuration file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file {str(path)!r} does not exist")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"not valid TOML: {exc}") from None
    return validate(raw, base_dir=path.parent, source=str(path))


def root_seed(cfg_seed):
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return cfg_seed
    try:
        return int(env)
    except ValueError:
        raise ConfigError(SEED_ENV, f"expected an integer, got {env!r}") from None


def validate(raw, base_dir=".", source=None):
    """Check a parsed mapping and return an :class:`ExperimentConfig` with normalised values."""
    unknown = set(raw) - {"kind", "seed", *SECTIONS}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    if "kind" not in raw:
        raise ConfigError("kind", "missing")
    kind = _choice("kind", raw["kind"], KINDS)
    seed = root_seed(_number("seed", raw.get("seed", 0), integer=True, nonneg=True))
    sections = {}
    for name in SECTIONS:
        sec = raw.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(name, "expected a table")
        extra = set(sec) - _ALLOWED[name]
        if extra:
            raise ConfigError(f"{name}.{sorted(extra)[0]}", "unknown key")
        sections[name] = dict(sec)
    geometry = _validate_geometry(sections["geometry"], kind)
    d = geometry.get("d", 1)
    run = _validate_run(sections["run"], kind, d)
    set_ = _validate_set(sections["set"], kind, d, Path(base_dir))
    band = _validate_band(sections["band"], kind, d)
    consts = _validate_constants(sections["constants"])
    output = {"dir": str(sections["output"].get("dir", "out"))}
    return ExperimentConfig(kind, seed, geometry, set_, band, run, consts, output, source)


def _validate_geometry(sec, kind):
    out = {}
    if kind == "shell-cover" or kind == "lemma-suite":
        return out
    if "d" not in sec:
        raise ConfigError("geometry.d", "missing")
    out["d"] = _number("geometry.d", sec["d"], integer=True, lo=1, hi=3)
    if kind != "scale-sweep":
        if "L" not in sec:
            raise ConfigError("geometry.L", "missing")
        out["L"] = _number("geometry.L", sec["L"], positive=True)
    elif "L" in sec:
        raise ConfigError("geometry.L", "scale sweeps take run.L_list instead")
    if "N" in sec:
        n = _number("geometry.N", sec["N"], integer=True, lo=4)
        if n & (n - 1):
            raise ConfigError("geometry.N", f"must be a power of two, got {n}")
        out["N"] = n
    out["points_per_unit"] = _number("geometry.points_per_unit", sec.get("points_per_unit", 8.0), positive=True)
    return out


def _validate_set(sec, kind, d, base_dir):
    if kind in ("shell-cover", "lemma-suite"):
        return {}
    if kind in ("scale-sweep", "gamma-sweep"):
        default = "thick"
    else:
        default = None
    kind_set = sec.get("type", default)
    if kind_set is None:
        raise ConfigError("set.type", "missing")
    t = _choice("set.type", kind_set, SET_TYPES)
    if default == "thick" and t != "thick":
        raise ConfigError("set.type", "sweeps build their own thick set; use type = \"thick\"")
    out = {"type": t}
    if t != "thick" and "a" in sec:
        out["a"] = _vector("set.a", sec["a"], d, positive=True)
    if t in ("ball-union", "thick"):
        out["sequence"] = _choice("set.sequence", sec.get("sequence", "periodic"), ("periodic", "seeded-random"))
        out["coverage"] = _choice("set.coverage", sec.get("coverage", "exact" if d == 1 else "center"),
                                  ("center", "exact"))
        if out["coverage"] == "exact" and d != 1:
            raise ConfigError("set.coverage", "exact coverage needs d = 1")
        if "seed" in sec:
            out["seed"] = _number("set.seed", sec["seed"], integer=True, nonneg=True)
    if t == "ball-union":
        for key in ("G", "delta"):
            if key not in sec:
                raise ConfigError(f"set.{key}", "missing")
        out["G"] = _number("set.G", sec["G"], positive=True)
        out["delta"] = _number("set.delta", sec["delta"], positive=True)
        if out["delta"] > out["G"] / 2:
            raise ConfigError("set.delta", f"must not exceed G/2 = {out['G'] / 2}")
        out["offset"] = _vector("set.offset", sec.get("offset", 0.0), d)
    elif t == "thick":
        if kind != "gamma-sweep":
            if "gamma" not in sec:
                raise ConfigError("set.gamma", "missing")
            out["gamma"] = _number("set.gamma", sec["gamma"], positive=True, hi=1)
        if "a" not in sec:
            raise ConfigError("set.a", "missing")
        out["a"] = _number("set.a", sec["a"], positive=True)
    elif t == "intervals":
        if d != 1:
            raise ConfigError("set.intervals", "interval sets need d = 1")
        ivs = sec.get("intervals")
        if not isinstance(ivs, list):
            raise ConfigError("set.intervals", "expected a list of [lo, hi] pairs")
        out["intervals"] = [_pair(f"set.intervals[{i}]", iv) for i, iv in enumerate(ivs)]
    elif t == "boxes":
        boxes = sec.get("boxes")
        if not isinstance(boxes, list):
            raise ConfigError("set.boxes", "expected a list of boxes")
        parsed = []
        for i, box in enumerate(boxes):
            if not isinstance(box, list) or len(box) != d:
                raise ConfigError(f"set.boxes[{i}]", f"expected {d} [lo, hi] pairs")
            parsed.append([_pair(f"set.boxes[{i}][{j}]", s) for j, s in enumerate(box)])
        out["boxes"] = parsed
    elif t == "file":
        if "path" not in sec:
            raise ConfigError("set.path", "missing")
        p = Path(sec["path"])
        if not p.is_absolute():
            p = base_dir / p
        if not p.is_file():
            raise ConfigError("set.path", f"file {str(p)!r} does not exist")
        out["path"] = str(p)
    return out


def _pair(path, v):
    vals = _number_list(path, v)
    if len(vals) != 2 or vals[1] < vals[0]:
        raise ConfigError(path, "expected [lo, hi] with lo <= hi")
    return vals


def _validate_band(sec, kind, d):
    if kind in ("shell-cover", "lemma-suite"):
        return {}
    out = {}
    if "b" in sec and ("sides" in sec or "centers" in sec):
        raise ConfigError("band.b", "give either b (half-widths) or sides/centers")
    if "b" in sec:
        out["sides"] = [2 * x for x in _vector("band.b", sec["b"], d, positive=True)]
        out["centers"] = [[0.0] * d]
    else:
        if "sides" not in sec:
            raise ConfigError("band.sides", "missing")
        out["sides"] = _vector("band.sides", sec["sides"], d, positive=True)
        centers = sec.get("centers", [[0.0] * d])
        if not isinstance(centers, list) or not centers:
            raise ConfigError("band.centers", "expected a nonempty list of points")
        out["centers"] = [_vector(f"band.centers[{i}]", c, d) for i, c in enumerate(centers)]
    shift = sec.get("shift", [0] * d)
    out["shift"] = [int(x) for x in _vector("band.shift", shift, d, integer=True)]
    return out


def _validate_run(sec, kind, d):
    out = {"p": _p_value("run.p", sec.get("p", 2.0))}
    out["jobs"] = _number("run.jobs", sec.get("jobs", 1), integer=True, lo=1)
    out["max_iter"] = _number("run.max_iter", sec.get("max_iter", 2000), integer=True, lo=1)
    out["restarts"] = _number("run.restarts", sec.get("restarts", 8), integer=True, lo=1)
    if "seeds" in sec:
        out["seeds"] = [int(x) for x in _number_list("run.seeds", sec["seeds"], integer=True, nonneg=True)]
    if kind == "lemma-suite":
        lemmas = sec.get("lemmas", list(SUITES))
        if not isinstance(lemmas, list):
            raise ConfigError("run.lemmas", "expected a list of lemma names")
        for i, name in enumerate(lemmas):
            _choice(f"run.lemmas[{i}]", name, tuple(SUITES))
        out["lemmas"] = list(lemmas)
        out["instances"] = _number("run.instances", sec.get("instances", 100), integer=True, nonneg=True)
    if kind == "shell-cover":
        out["E"] = _number_list("run.E", sec.get("E", [4, 25, 100]))
        for i, e in enumerate(out["E"]):
            if not e > 1:
                raise ConfigError(f"run.E[{i}]", f"must exceed 1, got {e}")
        out["dims"] = [int(x) for x in _number_list("run.dims", sec.get("dims", [2, 3]), integer=True, lo=1, hi=3)]
    if kind == "scale-sweep":
        if "L_list" not in sec:
            raise ConfigError("run.L_list", "missing")
        out["L_list"] = _number_list("run.L_list", sec["L_list"], positive=True)
        out["max_spread"] = _number("run.max_spread", sec.get("max_spread", 4.0), lo=1)
    if kind == "gamma-sweep":
        if "gammas" not in sec:
            raise ConfigError("run.gammas", "missing")
        out["gammas"] = _number_list("run.gammas", sec["gammas"], positive=True, hi=1)
        if out["p"] != 2:
            raise ConfigError("run.p", "the thickness sweep fits lambda_min and needs p = 2")
        out["max_residual"] = _number("run.max_residual", sec.get("max_residual", 0.5), nonneg=True)
    if kind in ("thm7", "thm11"):
        if "gammas" in sec:
            out["gammas"] = _number_list("run.gammas", sec["gammas"], positive=True, hi=1)
        out["mode"] = _choice("run.mode", sec.get("mode", "general"), ("general", "integer-multiple"))
    return out


def _validate_constants(sec):
    out = {}
    for key in ("c", "c_tilde", "C_B", "C_kov", "N_d"):
        if key in sec:
            out[key] = _number(f"constants.{key}", sec[key], positive=True)
    if out.get("c_tilde", 3) < 3:
        raise ConfigError("constants.c_tilde", "must be at least 3")
    if out.get("C_B", 1) < 1:
        raise ConfigError("constants.C_B", "must be at least 1")
    return out
