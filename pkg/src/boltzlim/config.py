"""INI run configuration: typed keys, documented defaults, line-precise errors."""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, msg: str, path=None, line: int | None = None):
        where = f"{path}:{line}: " if path and line else (f"{path}: " if path else "")
        super().__init__(where + msg)
        self.line = line


def _floats(s: str):
    return [float(x) for x in re.split(r"[,\s]+", s.strip()) if x]


def _ints(s: str):
    return [int(x) for x in re.split(r"[,\s]+", s.strip()) if x]


def _words(s: str):
    return [x for x in re.split(r"[,\s]+", s.strip()) if x]


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


def _bool(s: str):
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _choice(*opts):
    def parse(s):
        s = s.strip()
        if s not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}; got {s!r}")
        return s
    return parse


# section -> key -> (parser, default, help)
SCHEMA = {
    "kinetic": {
        "epsilon": (float, 0.2, "Knudsen/Mach scale, in (0, 1)"),
        "q": (float, 1.0, "collision-rate exponent, rate = eps^-(2+q)"),
        "collision_mode": (_choice("bgk", "hard_sphere"), "bgk", "collision operator"),
        "extent": (float, 6.0, "velocity box half-width"),
        "per_axis": (int, 16, "velocity nodes per axis"),
        "cells": (int, 32, "spatial cells on the slab"),
        "length": (float, 1.0, "slab length"),
        "t_end": (float, 0.5, "final time"),
        "dt": (_opt_float, None, "time step (auto from cfl when empty)"),
        "cfl": (float, 0.9, "transport Courant number for the automatic step"),
        "angles": (_ints, [8, 8], "hard-sphere angular grid n_mu n_phi"),
        "wall_kind": (_choice("specular", "diffuse", "maxwell_accommodation"), "diffuse", "both walls"),
        "accommodation": (float, 1.0, "coefficient a of the accommodation schedule"),
        "schedule": (_choice("const", "linear", "quadratic"), "const", "alpha_eps = a, a eps or a eps^2"),
        "profile": (_choice("cos", "sin", "linear", "uniform", "zero"), "cos", "initial tangential shear U(x)"),
        "amplitude": (float, 1.0, "shear amplitude"),
        "snapshot_every": (int, 0, "write a snapshot every n steps (0: first and last)"),
        "bound_n": (_ints, [1, 2, 4], "N values for the boundary-term bound"),
    },
    "fluid": {
        "scenario": (_choice("channel_shear", "lid_cavity", "periodic_box"), "channel_shear", "flow setup"),
        "epsilon": (float, 1e-2, "viscosity"),
        "lam": (float, 0.0, "slip coefficient lambda"),
        "wall_mode": (_choice("slip", "dirichlet"), "slip", "wall closure for the channel"),
        "nx": (int, 64, "cells in x"),
        "ny": (int, 64, "cells in y"),
        "length_x": (float, 1.0, "domain length in x"),
        "length_y": (float, 1.0, "domain length in y"),
        "t_end": (float, 1.0, "final time"),
        "dt": (_opt_float, None, "time step (auto from cfl when empty)"),
        "cfl": (float, 0.4, "advective Courant number, at most 0.5"),
        "profile": (_choice("cos", "sin", "linear", "uniform"), "cos", "channel shear profile U(y)"),
        "amplitude": (float, 1.0, "initial velocity amplitude"),
        "lid_velocity": (float, 1.0, "cavity lid speed"),
        "advection": (_choice("upwind", "muscl"), "upwind", "advection scheme"),
        "snapshot_every": (int, 0, "write a snapshot every n steps (0: first and last)"),
    },
    "sweep": {
        "eps_list": (_floats, [0.4, 0.2, 0.1], "strictly decreasing epsilons"),
        "lam_schedule": (_choice("zero", "const", "linear"), "linear", "fluid lambda_eps = 0, c or c eps"),
        "lam_coeff": (float, 1.0, "coefficient c of the lambda schedule"),
        "pair_refinement": (_bool, False, "also run 2 eps for every eps (fluid)"),
        "seed": (int, 0, "recorded for reproducibility; runs are deterministic"),
    },
    "kernel": {
        "kinds": (_words, ["diffuse", "maxwell_accommodation", "specular"], "kernels to check"),
        "accommodations": (_floats, [0.25, 0.5, 1.0], "alpha values for maxwell_accommodation"),
        "extent": (float, 6.0, "velocity box half-width"),
        "per_axis": (int, 16, "velocity nodes per axis"),
    },
}


@dataclass
class RunConfig:
    kinetic: dict = field(default_factory=dict)
    fluid: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    kernel: dict = field(default_factory=dict)
    source: str | None = None
    cond_a_violated: bool = False


def defaults() -> RunConfig:
    return RunConfig(**{s: {k: (list(d) if isinstance(d, list) else d) for k, (_, d, _) in keys.items()}
                        for s, keys in SCHEMA.items()})


def defaults_help() -> str:
    lines = []
    for s, keys in SCHEMA.items():
        lines.append(f"[{s}]")
        for k, (_, d, h) in keys.items():
            shown = " ".join(str(x) for x in d) if isinstance(d, list) else ("" if d is None else d)
            lines.append(f"  {k} = {shown}    # {h}")
    return "\n".join(lines)


def _line_index(text: str):
    """(section, key) -> line number, section -> line number."""
    keys, secs, cur = {}, {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            cur = m.group(1).strip()
            secs.setdefault(cur, i)
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", s)
        if m and cur is not None:
            keys.setdefault((cur, m.group(1).strip().lower()), i)
    return keys, secs


def _validate(cfg: RunConfig, path=None, lines=None):
    lines = lines or {}

    def err(sec, key, msg):
        raise ConfigError(f"[{sec}] {key}: {msg}", path, lines.get((sec, key)))

    k = cfg.kinetic
    if not 0 < k["epsilon"] < 1:
        err("kinetic", "epsilon", "must lie in (0, 1)")
    if k["q"] <= 0:
        err("kinetic", "q", "must be positive")
    if k["per_axis"] < 2 or k["per_axis"] % 2:
        err("kinetic", "per_axis", "must be even and >= 2")
    if k["cells"] < 1:
        err("kinetic", "cells", "must be >= 1")
    if k["t_end"] < 0:
        err("kinetic", "t_end", "must be nonnegative")
    if len(k["angles"]) != 2:
        err("kinetic", "angles", "expected two integers n_mu n_phi")
    if not 0 <= k["accommodation"] <= 1:
        err("kinetic", "accommodation", "must lie in [0, 1]")
    if any(n < 1 for n in k["bound_n"]):
        err("kinetic", "bound_n", "N must be >= 1")
    f = cfg.fluid
    if f["epsilon"] < 0 or f["lam"] < 0:
        err("fluid", "epsilon" if f["epsilon"] < 0 else "lam", "must be nonnegative")
    if f["nx"] < 2 or f["ny"] < 2:
        err("fluid", "nx" if f["nx"] < 2 else "ny", "need at least 2 cells")
    if not 0 < f["cfl"] <= 0.5:
        err("fluid", "cfl", "must lie in (0, 0.5]")
    e = cfg.sweep["eps_list"]
    if not e or any(x <= 0 for x in e):
        err("sweep", "eps_list", "needs positive values")
    if any(b >= a for a, b in zip(e, e[1:])):
        err("sweep", "eps_list", f"must be strictly decreasing, got {e}")
    for kind in cfg.kernel["kinds"]:
        if kind not in ("specular", "diffuse", "maxwell_accommodation"):
            err("kernel", "kinds", f"unknown kernel kind {kind!r}")
    if any(not 0 <= a <= 1 for a in cfg.kernel["accommodations"]):
        err("kernel", "accommodations", "values must lie in [0, 1]")
    # alpha_eps / eps must vanish as eps -> 0; only the quadratic schedule guarantees it
    cfg.cond_a_violated = k["wall_kind"] == "diffuse" or (
        k["wall_kind"] == "maxwell_accommodation" and k["schedule"] != "quadratic" and k["accommodation"] > 0)
    return cfg


def apply_overrides(cfg: RunConfig, overrides) -> RunConfig:
    """Apply 'section.key=value' strings."""
    for item in overrides or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, val = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        sec, key = sec.strip().lower(), key.strip().lower()
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"override {item!r}: unknown key {sec}.{key}")
        try:
            getattr(cfg, sec)[key] = SCHEMA[sec][key][0](val)
        except ValueError as exc:
            raise ConfigError(f"override {item!r}: {exc}") from None
    return _validate(cfg)


def parse_text(text: str, path=None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=str(path or "<config>"))
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], path, line) from None
    lines, secs = _line_index(text)
    cfg = defaults()
    cfg.source = str(path) if path else None
    for sec in cp.sections():
        name = sec.strip().lower()
        if name not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]; expected one of {', '.join(SCHEMA)}", path, secs.get(sec))
        for key, raw in cp.items(sec):
            if key not in SCHEMA[name]:
                raise ConfigError(f"[{name}] unknown key {key!r}", path, lines.get((sec, key)))
            try:
                getattr(cfg, name)[key] = SCHEMA[name][key][0](raw)
            except ValueError as exc:
                raise ConfigError(f"[{name}] {key}: {exc}", path, lines.get((sec, key))) from None
    return _validate(cfg, path, {(s.lower(), k): v for (s, k), v in lines.items()})


def parse_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config file not found", p)
    return parse_text(p.read_text(), p)
