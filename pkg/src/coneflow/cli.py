"""Command-line front end: ``coneflow <command> --config FILE [--out DIR] [--seed N] [--grid N]``.

Every command writes ``summary.json`` (sorted keys, no timings, so two runs
with the same config and seed are byte-identical) plus CSV/SVG artifacts,
and exits with status 0 on pass, 1 on a numerical failure and 2 on an
invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import time
from importlib import resources

import jsonschema
import numpy as np

from . import io as cio
from .decomposition import FrequencyLattice, GridFunction, decompose, random_band_limited
from .hyperbolicity import (R_pqt_limit, estimate_splitting, hook_structure, local_exponents,
                            sample_invariant_set)
from .maps import MapModel, WeightField, cat_cones
from .norms import NormParams, aniso_norm, classical_norms, dagger_norms, write_norm_csv
from .spectra import resonance_report, srb_and_correlations, stability_experiment
from .svg import heatmap_svg
from .symbols import SIGNS, ConeSystem
from .transfer import (TransferOperator, fit_block_decay, growth_rate, lasota_yorke_measure,
                       ly_probe_suite, s1_block_norm_scan)

SCHEMA_VERSION = 1
PROBE_COMMANDS = ("norm", "ly", "blocks")

# per-command options and their defaults; anything else is rejected
OPTIONS = {
    "decompose": {"function": "bump", "center": None, "radius": 1.0, "kmax": 24},
    "norm": {"count": 5, "kmin": 0, "kmax": 24},
    "exponents": {"points": 50, "m": [1, 5, 10, 20]},
    "rpqt": {"m_max": 12, "points": 256},
    "ly": {"m": 6, "bands": [5, 6], "per_band": 3, "growth_m": 8, "residual_ratio_min": 10.0},
    "blocks": {"n_max": 7, "t": 2, "floor": 1e-14},
    "resonances": {"refinement": 2, "count": 24, "expect_unit": True},
    "srb": {"m_max": 8, "lattice": 256},
    "stability": {"eps": [0.0, 1e-3, 1e-2], "Xis": [16, 32], "min_modulus": 0.45},
    "selftest": {},
}

DEFAULT_TOL = {"decompose": 1e-10, "resonances": 1e-8, "srb": 0.1, "ly": 0.1}


class ConfigError(ValueError):
    pass


# configuration loading

def _schema():
    return json.loads(resources.files("coneflow").joinpath("schema/config.schema.json")
                      .read_text())


def bundled_config(name):
    """Text of a bundled config (``configs/<name>.json``)."""
    path = resources.files("coneflow").joinpath(f"configs/{name}.json")
    if not path.is_file():
        raise ConfigError(f"no bundled config named {name!r}")
    return path.read_text()


def _locate(text, path):
    """Line number of the value at ``path`` (keys and indices) in JSON ``text``."""
    dec = json.JSONDecoder()
    ws = re.compile(r"[ \t\n\r]*")

    def skip(i):
        return ws.match(text, i).end()

    def walk(i, rest):
        i = skip(i)
        if not rest:
            return i
        head, tail = rest[0], rest[1:]
        if text[i] == "{":
            i = skip(i + 1)
            while text[i] != "}":
                key, i = json.decoder.scanstring(text, i + 1)
                i = skip(skip(i) + 1)
                if key == head:
                    return walk(i, tail)
                _, i = dec.raw_decode(text, i)
                i = skip(i)
                if text[i] == ",":
                    i = skip(i + 1)
            return i
        if text[i] == "[" and isinstance(head, int):
            i = skip(i + 1)
            for _ in range(head):
                _, i = dec.raw_decode(text, i)
                i = skip(skip(i) + 1)
            return walk(i, tail)
        return i

    try:
        pos = walk(0, list(path))
    except (ValueError, IndexError):
        pos = 0
    return text.count("\n", 0, pos) + 1


def _key_line(text, path, key):
    """Line of ``key`` inside the object at ``path`` (falls back to the object)."""
    start = _locate(text, path)
    lines = text.splitlines()
    for j in range(start - 1, len(lines)):
        if f'"{key}"' in lines[j]:
            return j + 1
    return start


def load_config(text, source="<config>"):
    """Parse and validate a config; errors carry the offending line number."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{source}:{err.lineno}: invalid JSON: {err.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{source}:1: a config must be a JSON object")
    version = cfg.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"{source}:{_key_line(text, [], 'schema_version') if version is not None else 1}: "
            f"schema_version {version!r} is not supported; this release reads version "
            f"{SCHEMA_VERSION}. Migration: add \"schema_version\": 1 and move command-specific "
            f"settings under \"options\"")
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            line = _key_line(text, path, extra[0]) if extra else _locate(text, path)
            msg = f"unknown key(s) {', '.join(map(repr, extra))}"
        else:
            line = _locate(text, path)
            msg = err.message
        where = "/".join(map(str, path)) or "(root)"
        raise ConfigError(f"{source}:{line}: {where}: {msg}")
    allowed = OPTIONS[cfg["command"]]
    for key in cfg.get("options", {}):
        if key not in allowed:
            raise ConfigError(f"{source}:{_key_line(text, ['options'], key)}: options: unknown "
                              f"key {key!r} for command {cfg['command']!r} (allowed: "
                              f"{', '.join(sorted(allowed)) or 'none'})")
    return cfg


# building objects from a config

def _num(v):
    return math.inf if v == "inf" else float(v)


def _map(cfg):
    return MapModel.from_dict(cfg.get("map", {"linear": [[2, 1], [1, 1]]}))


def _weight(cfg, d):
    w = cfg.get("weight")
    if w is None:
        return WeightField.constant(1.0, d)
    if "terms" in w:
        return WeightField(d, terms={tuple(t["k"]): complex(t["re"], t.get("im", 0.0))
                                     for t in w["terms"]})
    return WeightField.constant(w.get("constant", 1.0), d)


def _cones(spec, mp):
    spec = spec or {"plus_aperture": 0.6, "minus_aperture": 0.6}
    inner = {k: spec[k] for k in ("inner_plus_aperture", "inner_minus_aperture") if k in spec}
    if "plus_axes" in spec:
        return ConeSystem(spec["plus_axes"], spec["minus_axes"], spec["plus_aperture"],
                          spec["minus_aperture"], **inner)
    return cat_cones(spec["plus_aperture"], spec["minus_aperture"], mp.A, **inner)


def _norms(cfg, theta):
    out = []
    for n in cfg.get("norms", [{"p": 1, "q": -1, "t": "inf"}]):
        out.append((NormParams(n["p"], n["q"], _num(n.get("t", "inf")), theta),
                    n.get("family", "C")))
    return out


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, complex):
        return [_jsonable(v.real), _jsonable(v.imag)]
    return v


class Context:
    def __init__(self, cfg, out, quiet):
        self.cfg = cfg
        self.out = out
        self.quiet = quiet
        self.opts = dict(OPTIONS[cfg["command"]])
        self.opts.update(cfg.get("options", {}))
        self.tol = dict(cfg.get("tolerances", {}))
        try:
            self.map = _map(cfg)
            self.theta = _cones(cfg.get("cones"), self.map)
            self.target = (_cones(cfg["target_cones"], self.map) if "target_cones" in cfg
                           else self.theta)
            self.weight = _weight(cfg, self.map.d)
        except ValueError as err:
            raise ConfigError(f"map, cones or weight: {err}") from None
        self.seed = cfg.get("seed")
        self.grid = cfg.get("grid", 256)

    def path(self, name):
        return os.path.join(self.out, name)

    def log(self, msg):
        if not self.quiet:
            print(msg, file=sys.stderr)


# commands

def _test_function(ctx, lat):
    o = ctx.opts
    if o["function"] == "bump":
        c = o["center"] or [math.pi] * lat.d
        x = lat.points()
        r2 = sum((x[i] - c[i]) ** 2 for i in range(lat.d)) / o["radius"] ** 2
        with np.errstate(divide="ignore", over="ignore"):
            vals = np.where(r2 < 1, np.exp(-1.0 / np.maximum(1 - r2, 1e-300)), 0.0)
        return GridFunction(lat, vals)
    if o["function"] == "random":
        if ctx.seed is None:
            raise ConfigError("decompose with a random function needs a seed")
        return random_band_limited(lat, ctx.seed, o["kmax"])
    raise ConfigError(f"unknown function kind {o['function']!r}")


def cmd_decompose(ctx):
    lat = FrequencyLattice(ctx.grid)
    u = _test_function(ctx, lat)
    b = decompose(ctx.theta, u, ctx.cfg.get("n_max"))
    rec = sum((b[k] for k in b), GridFunction(lat, np.zeros(lat.shape)))
    norm2 = u.norm_lt(2, normalized=True) ** 2
    energies = b.parseval_energies(u)
    parseval = abs(sum(energies.values()) - norm2) / norm2
    recon = (rec - u).norm_lt(2) / u.norm_lt(2)
    names = cio.write_blocks(ctx.path("blocks"), b)
    rows = [{"n": n, "sigma": s, "energy": energies[(n, s)]} for n, s in b]
    cio.write_table_csv(ctx.path("energies.csv"), rows, ["n", "sigma", "energy"])
    grid = np.array([[energies[(n, s)] for n in range(b.n_max + 1)] for s in SIGNS])
    with open(ctx.path("energy_heatmap.svg"), "w") as fh:
        fh.write(heatmap_svg(grid, list(SIGNS), list(range(b.n_max + 1)),
                             "block energies over (n, sigma)") + "\n")
    tol = ctx.tol.get("parseval", DEFAULT_TOL["decompose"])
    return {"n_max": b.n_max, "grid": ctx.grid, "parseval_error": parseval,
            "reconstruction_error": recon, "blocks": names,
            "pass": parseval <= tol and recon <= tol}


def cmd_norm(ctx):
    lat = FrequencyLattice(ctx.grid)
    rng = np.random.default_rng(ctx.seed)
    o = ctx.opts
    funcs = [random_band_limited(lat, rng, o["kmax"], kmin=o["kmin"]) for _ in range(o["count"])]
    rows, results, ok = [], [], True
    for i, u in enumerate(funcs):
        for params, fam in _norms(ctx.cfg, ctx.theta):
            val = aniso_norm(u, params, fam, normalized=True)
            rows.append((f"u{i}", fam, params.p, params.q, params.t, val))
            entry = {"function": f"u{i}", "family": fam, "p": params.p, "q": params.q,
                     "t": params.t, "value": val}
            if fam == "W":
                dn = dagger_norms(u, params, normalized=True)
                entry.update(dagger=dn.dagger, double_dagger=dn.double_dagger)
                ok &= dn.double_dagger <= dn.dagger * (1 + 1e-12)
            ok &= math.isfinite(val) and val >= 0
            results.append(entry)
        cl = classical_norms(u, 1.0, 2)
        rows.append((f"u{i}", "bessel", 1.0, 1.0, 2.0, cl.bessel))
    write_norm_csv(ctx.path("norms.csv"), rows)
    return {"results": results, "pass": bool(ok)}


def cmd_exponents(ctx):
    o = ctx.opts
    rng = np.random.default_rng(ctx.seed if ctx.seed is not None else 0)
    pts = rng.uniform(0, 2 * math.pi, (ctx.map.d, o["points"]))
    split = estimate_splitting(ctx.map, pts)
    rows, per_m = [], []
    for m in o["m"]:
        lam, nu = local_exponents(ctx.map, split, m=m)
        for j in range(len(lam)):
            rows.append({"point": j, "m": m, "lambda": float(lam[j]), "nu": float(nu[j])})
        per_m.append({"m": m,
                      "lambda_rate": [float(lam.min() ** (1 / m)), float(lam.max() ** (1 / m))],
                      "nu_rate": [float(nu.min() ** (1 / m)), float(nu.max() ** (1 / m))]})
    cio.write_table_csv(ctx.path("exponents.csv"), rows, ["point", "m", "lambda", "nu"])
    ok = all(r["lambda_rate"][1] < 1 < r["nu_rate"][0] for r in per_m)
    return {"points": o["points"], "exponents": per_m, "pass": ok}


def _omega(ctx, count):
    return sample_invariant_set(ctx.map, count=count, rng=ctx.seed if ctx.seed is not None else 0)


def cmd_rpqt(ctx):
    o = ctx.opts
    om = _omega(ctx, o["points"])
    split = estimate_splitting(ctx.map, om)
    results = []
    for params, _ in _norms(ctx.cfg, ctx.theta):
        R, roots = R_pqt_limit(ctx.map, ctx.weight, split, params.p, params.q, params.t,
                               o["m_max"])
        results.append({"R": R, "p": params.p, "q": params.q, "t": params.t,
                        "roots": list(roots)})
    first = dict(results[0])
    first.pop("roots")
    return {**first, "m_max": o["m_max"], "results": results, "pass": results[0]["R"] < 1}


def cmd_ly(ctx):
    o = ctx.opts
    lat = FrequencyLattice(ctx.grid)
    params, fam = _norms(ctx.cfg, ctx.theta)[0]
    weak = ctx.cfg.get("weak", {"p": 0.0, "q": params.q - 1})
    high, mixed = ly_probe_suite(lat, params, ctx.seed, tuple(o["bands"]), o["per_band"],
                                 family=fam)
    op = TransferOperator(ctx.map, ctx.weight, ctx.theta, ctx.target)
    rep = lasota_yorke_measure(op, params.p, params.q, weak["p"], weak["q"], params.t,
                               high + mixed, o["m"], fam)
    gr, rates = growth_rate(op, params, high, range(1, o["growth_m"] + 1), fam)
    d = rep.to_dict()
    with open(ctx.path("ly.json"), "w") as fh:
        json.dump(_jsonable(d), fh, indent=2, sort_keys=True)
        fh.write("\n")
    cio.write_table_csv(ctx.path("ly.csv"), [d], list(d))
    ok = rep.passed and rep.residual_ratio > o["residual_ratio_min"]
    return {"report": d, "growth_rate": gr, "growth_rates": rates, "pass": bool(ok)}


def cmd_blocks(ctx):
    o = ctx.opts
    om = _omega(ctx, 256)
    hs = hook_structure(ctx.map, ctx.theta, ctx.target, om)
    op = TransferOperator(ctx.map, ctx.weight, hs.source, hs.target)
    t = _num(o["t"])
    rows = s1_block_norm_scan(op, hs, o["n_max"], t=t, rng=ctx.seed)
    slope, levels, env = fit_block_decay(rows, floor=o["floor"])
    cio.write_table_csv(ctx.path("blocks.csv"), rows, ["ell", "tau", "n", "sigma", "value"])
    target = -(ctx.map.r - 1) + 0.25 if math.isfinite(ctx.map.r) else -math.inf
    ok = slope <= target if math.isfinite(target) else True
    return {"hooks": hs.to_dict(), "slope": slope, "levels": levels.tolist(),
            "envelope": env.tolist(), "slope_bound": target, "pass": bool(ok)}


def cmd_resonances(ctx):
    o = ctx.opts
    params, _ = _norms(ctx.cfg, ctx.theta)[0]
    op = TransferOperator(ctx.map, ctx.weight, ctx.theta, ctx.target)
    rep = resonance_report(op, params, ctx.cfg.get("Xi", 16), o["refinement"], o["count"])
    rep.to_json(ctx.path("resonances.json"))
    rep.to_svg(ctx.path("spectrum.svg"), "Galerkin spectrum")
    cio.write_table_csv(ctx.path("eigenvalues.csv"),
                        [{"re": float(z.real), "im": float(z.imag), "abs": float(abs(z)),
                          "stable": bool(f)} for z, f in zip(rep.eigenvalues, rep.stableFlags)],
                        ["re", "im", "abs", "stable"])
    lead = complex(rep.eigenvalues[0])
    ok = True
    if o["expect_unit"]:
        ok = abs(lead - 1) <= ctx.tol.get("leading", DEFAULT_TOL["resonances"])
    return {"leading": lead, "bound": rep.boundRpqt,
            "resonances": [complex(z) for z in rep.resonances],
            "stable_count": int(rep.stableFlags.sum()), "converged": rep.converged,
            "pass": bool(ok)}


def _default_observable(x):
    return np.cos(x[0]) + 0.5 * np.sin(x[0] + 2 * x[1])


def cmd_srb(ctx):
    o = ctx.opts
    params, _ = _norms(ctx.cfg, ctx.theta)[0]
    tab = srb_and_correlations(ctx.map, (_default_observable, _default_observable), o["m_max"],
                               params, ctx.cfg.get("Xi", 16), o["lattice"],
                               grid=ctx.cfg.get("grid", 1024), theta=ctx.theta)
    d = tab.to_dict()
    cio.write_table_csv(ctx.path("correlations.csv"),
                        [{"m": int(m), "C": float(c)} for m, c in zip(tab.m, tab.correlations)],
                        ["m", "C"])
    return {**d, "pass": tab.log_gap <= ctx.tol.get("log_gap", DEFAULT_TOL["srb"])}


def cmd_stability(ctx):
    o = ctx.opts
    params, _ = _norms(ctx.cfg, ctx.theta)[0]
    om = _omega(ctx, 64)
    rows = stability_experiment(ctx.map, params, o["eps"], tuple(o["Xis"]), ctx.theta, om,
                                o["min_modulus"])
    cio.write_table_csv(ctx.path("stability.csv"), rows, ["eps", "displacement", "matched"])
    factor = ctx.tol.get("displacement_per_eps", 10.0)
    ok = all(r["displacement"] <= factor * r["eps"] + 1e-12 for r in rows)
    return {"rows": rows, "pass": bool(ok)}


def cmd_selftest(ctx):
    from .selftest import run_selftest

    rows = run_selftest(log=ctx.log)
    cio.write_table_csv(ctx.path("selftest.csv"), rows, ["name", "value", "threshold", "pass"])
    return {"checks": rows, "pass": all(r["pass"] for r in rows)}


COMMANDS = {
    "decompose": cmd_decompose, "norm": cmd_norm, "exponents": cmd_exponents,
    "rpqt": cmd_rpqt, "ly": cmd_ly, "blocks": cmd_blocks, "resonances": cmd_resonances,
    "srb": cmd_srb, "stability": cmd_stability, "selftest": cmd_selftest,
}


def run(cfg, out=None, quiet=False):
    """Run a validated config; returns ``(status, summary)``."""
    out = out or cfg.get("output") or f"coneflow-{cfg['command']}"
    os.makedirs(out, exist_ok=True)
    ctx = Context(cfg, out, quiet)
    if cfg["command"] in PROBE_COMMANDS and ctx.seed is None:
        raise ConfigError(f"command {cfg['command']!r} uses random probes and needs a seed "
                          "(config key \"seed\" or --seed)")
    t0 = time.perf_counter()
    try:
        summary = COMMANDS[cfg["command"]](ctx)
        status = 0 if summary.get("pass", True) else 1
    except ConfigError:
        raise
    except Exception as err:
        summary = {"pass": False, "error": f"{type(err).__name__}: {err}"}
        status = 1
    summary = {"command": cfg["command"], "seed": ctx.seed, **summary}
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    ctx.log(f"{cfg['command']}: {'pass' if status == 0 else 'FAIL'} "
            f"({time.perf_counter() - t0:.1f} s) -> {out}")
    return status, summary


def main(argv=None):
    ap = argparse.ArgumentParser(prog="coneflow", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="config file, or @name for a bundled config "
                                     "(default: @<command>)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--grid", type=int)
    ap.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    src = args.config or f"@{args.command}"
    try:
        if src.startswith("@"):
            text = bundled_config(src[1:])
        else:
            with open(src) as fh:
                text = fh.read()
        cfg = load_config(text, src)
        if cfg["command"] != args.command:
            raise ConfigError(f"{src}:{_key_line(text, [], 'command')}: config is for "
                              f"{cfg['command']!r}, not {args.command!r}")
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.grid is not None:
            cfg["grid"] = args.grid
        status, _ = run(cfg, args.out, args.quiet)
    except ConfigError as err:
        print(f"coneflow: error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"coneflow: error: {err}", file=sys.stderr)
        return 2
    return status


if __name__ == "__main__":
    sys.exit(main())
