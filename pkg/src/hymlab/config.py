"""Scenario configuration files.

Format: sections of ``key = value`` lines (``configparser``), values written as
Python/TOML-style literals (numbers, quoted strings, lists, inline dicts,
``true``/``false``/``none``). Bare words are read as strings. A JSON file with
the same section/key layout is accepted as a mirror. See ``configs/SCHEMA.md``.
"""

from __future__ import annotations

import ast
import configparser
import json
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .flows import FlowOptions
from .lab import Scenario

_WORDS = {"true": True, "false": False, "none": None, "null": None}
_BAREWORD = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-/]*$")


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _pair(x):
    return isinstance(x, (list, tuple)) and len(x) == 2 and all(_num(v) for v in x)


def _opt(check):
    return lambda x: x is None or check(x)


def _int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _lifts(x):
    return isinstance(x, (list, tuple)) and len(x) >= 1 and all(_num(v) or isinstance(v, complex) for v in x)


# section -> key -> (validator, description used in error messages)
SCHEMA = {
    "scenario": {"name": (lambda x: isinstance(x, str), "string"),
                 "seed": (lambda x: _int(x) and 0 <= x < 2 ** 64, "unsigned 64-bit integer"),
                 "out": (lambda x: isinstance(x, str), "string")},
    "geometry": {"potential": (lambda x: isinstance(x, str), "string"),
                 "potential_params": (lambda x: isinstance(x, dict), "inline dict"),
                 "base_point": (_pair, "pair of numbers"),
                 "base_samples": (lambda x: isinstance(x, (list, tuple)) and len(x) > 0 and all(map(_pair, x)),
                                  "list of number pairs")},
    "spectral": {"lifts": (_lifts, "list of real or complex numbers"),
                 "slope": (_opt(_lifts), "list of numbers or none")},
    "grid": {"N": (lambda x: _int(x) and x >= 8 and x % 2 == 0, "even integer >= 8")},
    "sweep": {"t0": (lambda x: _num(x) and x > 0, "positive number"),
              "count": (lambda x: _int(x) and x >= 1, "positive integer"),
              "amplitude": (lambda x: _num(x) and x >= 0, "nonnegative number"),
              "kmax": (lambda x: _int(x) and x >= 1, "positive integer"),
              "t_ref": (lambda x: _num(x) and x > 0, "positive number")},
    "flow": {},
    "normalize": {"eps0": (lambda x: _num(x) and x > 0, "positive number"),
                  "amplitude": (lambda x: _num(x) and x >= 0, "nonnegative number"),
                  "shift": (_num, "number"),
                  "moser_samples": (lambda x: _int(x) and x >= 1, "positive integer")},
    "poincare": {"samples": (lambda x: _int(x) and x >= 1, "positive integer"),
                 "dense_N": (lambda x: _int(x) and x >= 8 and x % 2 == 0, "even integer >= 8")},
    "check": {"scales": (lambda x: isinstance(x, (list, tuple)) and all(_num(v) and v > 0 for v in x),
                         "list of positive numbers"),
              "t_values": (lambda x: isinstance(x, (list, tuple)) and all(_num(v) and v > 0 for v in x),
                           "list of positive numbers"),
              "curvature_samples": (lambda x: _int(x) and x >= 1, "positive integer")},
}

_FLOW_TYPES = {"tol": float, "max_steps": int, "t_max": float, "t_end": float, "dt0": float, "dt_max": float,
               "dt_min": float, "growth": float, "record_every": int, "check_every": int, "fixed_dt": float,
               "track_gauge": bool, "gauge_fix": bool, "scheme": str, "rtol": float}


def _typed(kind):
    def check(x):
        if x is None or kind is str:
            return x is None or isinstance(x, str)
        if kind is bool:
            return isinstance(x, bool)
        return _int(x) if kind is int else _num(x)
    return check


SCHEMA["flow"] = {k: (_typed(t), t.__name__) for k, t in _FLOW_TYPES.items()}


@dataclass
class Config:
    scenario: Scenario
    normalize: dict = field(default_factory=lambda: {"eps0": 1e-2, "amplitude": 1e-4, "shift": 10.0,
                                                      "moser_samples": 8})
    poincare: dict = field(default_factory=lambda: {"samples": 1000, "dense_N": 16})
    check: dict = field(default_factory=lambda: {"scales": [1.0, 0.5, 0.1], "t_values": [1.0, 0.5, 0.1, 0.01],
                                                  "curvature_samples": 20})
    source: str | None = None


def _parse_value(text):
    s = text.strip()
    if s.lower() in _WORDS:
        return _WORDS[s.lower()]
    try:
        return ast.literal_eval(re.sub(r"\b(true|false|none|null)\b",
                                       lambda m: repr(_WORDS[m.group(1)]), s))
    except (ValueError, SyntaxError):
        if _BAREWORD.match(s):
            return s
        raise


def _line_index(text):
    """Map (section, key) to 1-based line numbers by scanning the raw text."""
    where, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        m = re.match(r"^\[([^\]]+)\]$", stripped)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = no
            continue
        m = re.match(r"^([A-Za-z_][A-Za-z0-9_]*)\s*[=:]", stripped)
        if m and section is not None:
            where.setdefault((section, m.group(1)), no)
    return where


def _read_text_config(text, name):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=name)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"{name}" + (f":{line}" if line else "") + f": {exc.message.splitlines()[0]}") from None
    lines = _line_index(text)
    raw = {}
    for sec in cp.sections():
        raw[sec] = {}
        for key, val in cp.items(sec):
            try:
                raw[sec][key] = _parse_value(val)
            except (ValueError, SyntaxError):
                raise ConfigError(f"{name}:{lines.get((sec, key), '?')}: [{sec}] {key}: cannot parse value "
                                  f"{val!r}") from None
    return raw, lines


def parse_config(text, name="<config>"):
    """Parse config text (structured text or JSON) into a :class:`Config`."""
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{name}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(raw, dict) or not all(isinstance(v, dict) for v in raw.values()):
            raise ConfigError(f"{name}: JSON config must map section names to objects")
        lines = {}
    else:
        raw, lines = _read_text_config(text, name)
    return _build(raw, lines, name)


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def _build(raw, lines, name):
    def fail(sec, key, msg):
        line = lines.get((sec, key)) or lines.get((sec, None))
        loc = f"{name}:{line}" if line else name
        raise ConfigError(f"{loc}: [{sec}]" + (f" {key}" if key else "") + f": {msg}")

    for sec, entries in raw.items():
        if sec not in SCHEMA:
            fail(sec, None, f"unknown section (expected one of {', '.join(SCHEMA)})")
        for key, val in entries.items():
            if key not in SCHEMA[sec]:
                fail(sec, key, f"unknown field (expected one of {', '.join(SCHEMA[sec])})")
            check, desc = SCHEMA[sec][key]
            if isinstance(val, list) and key in ("base_point",):
                val = tuple(val)
            if not check(val):
                fail(sec, key, f"expected {desc}, got {val!r}")

    get = lambda sec: raw.get(sec, {})  # noqa: E731
    sc_kw = {}
    for sec, mapping in (("scenario", {"name": "name", "seed": "seed", "out": "out"}),
                         ("geometry", {"potential": "potential", "potential_params": "potential_params",
                                       "base_point": "base_point", "base_samples": "base_samples"}),
                         ("spectral", {"lifts": "lifts", "slope": "slope"}),
                         ("grid", {"N": "N"}),
                         ("sweep", {"t0": "t0", "count": "count", "amplitude": "amplitude", "kmax": "kmax",
                                    "t_ref": "t_ref"})):
        for key, attr in mapping.items():
            if key in get(sec):
                val = get(sec)[key]
                if attr in ("base_point", "lifts", "slope") and val is not None:
                    val = tuple(val)
                if attr == "base_samples":
                    val = tuple(tuple(map(float, p)) for p in val)
                sc_kw[attr] = val
    if "lifts" in sc_kw and abs(sum(sc_kw["lifts"])) > 1e-12:
        fail("spectral", "lifts", "lifts must sum to zero")
    if sc_kw.get("slope") is not None and len(sc_kw["slope"]) != len(sc_kw.get("lifts", (0, 0))):
        fail("spectral", "slope", "slope needs one coefficient per lift")
    flow_kw = {k: (float(v) if _FLOW_TYPES[k] is float and v is not None else v) for k, v in get("flow").items()}
    if flow_kw.get("scheme", "etdrk4") not in ("etdrk4", "lawson"):
        fail("flow", "scheme", "expected 'etdrk4' or 'lawson'")
    try:
        sc = Scenario(flow=FlowOptions(**flow_kw), **sc_kw)
        sc.potential_obj()
    except (ValueError, KeyError, OSError) as exc:
        fail("geometry", "potential", str(exc))
    cfg = Config(sc, source=name)
    cfg.normalize.update(get("normalize"))
    cfg.poincare.update(get("poincare"))
    cfg.check.update(get("check"))
    return cfg


def default_config() -> Config:
    return Config(Scenario())


def override(cfg: Config, seed=None, grid=None, out=None) -> Config:
    """Apply command-line overrides; returns a new config."""
    sc = cfg.scenario
    kw = {}
    if seed is not None:
        kw["seed"] = seed
    if grid is not None:
        kw["N"] = grid
    if out is not None:
        kw["out"] = out
    return replace(cfg, scenario=replace(sc, **kw)) if kw else cfg


def to_json(cfg: Config) -> str:
    """JSON mirror of a config (round-trips through :func:`parse_config`)."""
    sc = cfg.scenario
    flow = {f.name: getattr(sc.flow, f.name) for f in fields(sc.flow)}
    lifts = list(sc.lifts)
    if any(isinstance(v, complex) for v in lifts):
        raise ConfigError("complex lifts have no JSON mirror; use the text format")
    doc = {"scenario": {"name": sc.name, "seed": sc.seed, "out": sc.out},
           "geometry": {"potential": sc.potential, "potential_params": dict(sc.potential_params),
                        "base_point": list(sc.base_point), "base_samples": [list(p) for p in sc.base_samples]},
           "spectral": {"lifts": lifts, "slope": None if sc.slope is None else list(sc.slope)},
           "grid": {"N": sc.N},
           "sweep": {"t0": sc.t0, "count": sc.count, "amplitude": sc.amplitude, "kmax": sc.kmax,
                     "t_ref": sc.t_ref},
           "flow": flow, "normalize": dict(cfg.normalize), "poincare": dict(cfg.poincare),
           "check": dict(cfg.check)}
    return json.dumps(doc, indent=2, sort_keys=True)


__all__ = ["Config", "SCHEMA", "load_config", "parse_config", "default_config", "override", "to_json"]
