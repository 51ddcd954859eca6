"""Experiment runner: ``renormlab run <config.json>`` and ``renormlab list``.

A config is a JSON object with ``experiment``, ``params``, ``seed`` and
``output`` (a file-name prefix).  Parameters may also sit at the top level
next to ``experiment``; either way each experiment validates its own set and
rejects unknown names.  Every run writes RFC-4180 CSV tables plus a JSON
record; only ``wall_time`` differs between reruns of the same config.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Callable

import numpy as np

from .maps import Family, MapSpec
from .rotation import ContinuedFraction

log = logging.getLogger("renormlab")

SCHEMA_VERSION = 1
REQUIRED = object()
RESERVED = {"experiment", "params", "seed", "output"}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


# ---------------------------------------------------------------- params

def _cf(v):
    if isinstance(v, dict):
        extra = set(v) - {"a", "depth"}
        if extra or "a" not in v or "depth" not in v:
            raise ValueError("cf object needs exactly 'a' and 'depth'")
        return ContinuedFraction.constant(int(v["a"]), int(v["depth"]))
    if isinstance(v, list) and v and all(isinstance(a, int) and not isinstance(a, bool) for a in v):
        return ContinuedFraction(tuple(v))
    raise ValueError("cf must be a list of positive integers or {'a': .., 'depth': ..}")


def _int(v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValueError("expected an integer")
    return v


def _float(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValueError("expected a finite number")
    return float(v)


def _ints(v):
    if not isinstance(v, list) or not v:
        raise ValueError("expected a non-empty list of integers")
    return [_int(x) for x in v]


def _floats(v):
    if not isinstance(v, list) or not v:
        raise ValueError("expected a non-empty list of numbers")
    return [_float(x) for x in v]


def _family(v):
    return Family(v).value


PARSERS = {"cf": _cf, "int": _int, "float": _float, "ints": _ints, "floats": _floats,
           "family": _family}


@dataclass(frozen=True)
class Param:
    kind: str
    default: object = REQUIRED
    doc: str = ""


MAP = {"family": Param("family", "Arnold"), "b": Param("float", 0.0),
       "cf": Param("cf", REQUIRED, "partial quotients")}
PAIR = {"family_f": Param("family", "Arnold"), "b_f": Param("float", 0.0),
        "family_g": Param("family", "PerturbedArnold"), "b_g": Param("float", 0.03),
        "cf": Param("cf", REQUIRED, "partial quotients")}


@dataclass(frozen=True)
class Experiment:
    name: str
    kind: str                 # theorem / lemma / proposition / corollary / definition
    quote: str
    params: dict
    runner: Callable

    def anchor(self) -> str:
        return f"{self.name} → {self.kind} '{self.quote}'"

    def validate(self, raw: dict) -> dict:
        problems, out = [], {}
        for k in sorted(set(raw) - set(self.params)):
            problems.append(f"unknown parameter '{k}' for {self.name}")
        for k, p in self.params.items():
            if k not in raw:
                if p.default is REQUIRED:
                    problems.append(f"missing required parameter '{k}'")
                else:
                    out[k] = p.default
                continue
            try:
                PARSERS[p.kind](raw[k])
                out[k] = raw[k]
            except (ValueError, TypeError) as exc:
                problems.append(f"parameter '{k}': {exc}")
        if problems:
            raise ConfigError(problems)
        return out


def parsed(exp: Experiment, params: dict) -> dict:
    return {k: PARSERS[exp.params[k].kind](v) for k, v in params.items()}


# ---------------------------------------------------------------- results

@dataclass
class Outcome:
    outputs: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)     # name -> (header, rows)
    verdicts: dict = field(default_factory=dict)
    stage: str = "setup"


def _spec(p, suffix=""):
    from .rotation import tuned_map
    return tuned_map(p["family" + suffix], p["cf"], p["b" + suffix])


def _pmap(fn, items, jobs):
    """Order-preserving map; processes only when jobs > 1."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as ex:
        return list(ex.map(fn, items))


def _csv_rows(writer_fn) -> tuple:
    buf = io.StringIO()
    writer_fn(buf)
    buf.seek(0)
    rows = list(csv.reader(buf))
    return rows[0], rows[1:]


def _level_range(p, o: Outcome) -> tuple:
    """(lo, hi) from the config, with hi clamped to depth(cf) - 2 and the clamp recorded."""
    lo, hi = p["levels"][0], p["levels"][-1]
    top = p["cf"].depth - 2
    if hi > top:
        log.warning("levels clamped to [%d, %d]: level n needs depth(cf) >= n + 2", lo, top)
        hi = top
    o.outputs["levels_used"] = [lo, hi]
    return lo, hi


def run_tune(p, seed, jobs, o: Outcome):
    from .rotation import tune
    o.stage = "tune"
    r = tune(p["family"], p["b"], p["cf"])
    o.outputs.update(theta=r.theta, bracket=list(r.bracket), steps=r.steps,
                     comparison_depth=r.comparison_depth)
    o.tables["tune"] = (["theta", "lo", "hi", "steps"],
                        [[repr(r.theta), repr(r.bracket[0]), repr(r.bracket[1]), r.steps]])
    o.verdicts["certified"] = bool(r.certified)


def run_partition(p, seed, jobs, o: Outcome):
    from .partition import (backward_moments, disjoint_preimages_check, dynamical_partition,
                            partition_to_csv, restrict, return_structure)
    lo, hi = _level_range(p, o)
    o.stage = "tune"
    f = _spec(p)
    o.stage = "return structure"
    rs = return_structure(f, p["cf"], hi)
    o.stage = "partition"
    parts = [dynamical_partition(restrict(rs, n)) for n in range(lo, hi + 1)]
    o.tables["partition"] = _csv_rows(lambda fh: partition_to_csv(parts, fh))
    o.stage = "combinatorics"
    disjoint = all(disjoint_preimages_check(restrict(rs, n)) for n in range(lo, hi + 1))
    moments = [(n, m, backward_moments(restrict(rs, n), m))
               for n in range(max(lo, 2), hi + 1) for m in range(0, n - 1)]
    o.tables["moments"] = (["n", "m", "ell", "expected", "ok"],
                           [[n, m, r.ell, r.expected, int(r.ok)] for n, m, r in moments])
    o.verdicts["disjoint_preimages"] = bool(disjoint)
    o.verdicts["moments"] = all(r.ok for _, _, r in moments)


def run_realbounds(p, seed, jobs, o: Outcome):
    from .partition import real_bounds_stats
    lo, hi = _level_range(p, o)
    o.stage = "tune"
    f = _spec(p)
    o.stage = "real bounds"
    stats = real_bounds_stats(f, p["cf"], lo, hi)
    o.tables["realbounds"] = (["n", "max_ratio"], [[s.level, repr(s.ratio)] for s in stats])
    ratios = {s.level: s.ratio for s in stats}
    o.verdicts["ratios_in_range"] = all(1 / 50 <= r <= 50 for r in ratios.values())
    mid = min(max(p["split"], lo), hi)
    head = max(r for n, r in ratios.items() if n <= mid)
    tail = max(r for n, r in ratios.items() if n >= mid)
    o.outputs.update(head_max=head, tail_max=tail)
    o.verdicts["tail_bounded"] = bool(tail <= 1.25 * head)


def run_converge(p, seed, jobs, o: Outcome):
    from .renorm import convergence_scan
    lo, hi = _level_range(p, o)
    o.stage = "tune"
    f, g = _spec(p, "_f"), _spec(p, "_g")
    o.stage = "convergence scan"
    scan = convergence_scan(f, g, p["cf"], lo, hi, p["grid"])
    o.stage = "grid doubling"
    fine = convergence_scan(f, g, p["cf"], lo, hi, 2 * p["grid"])
    o.tables["converge"] = _csv_rows(scan.to_csv)
    o.outputs["fit"] = scan.fit.to_dict()
    d = scan.distances
    o.verdicts["monotone"] = all(d[i + 1] < d[i] for i in range(len(d) - 1))
    o.verdicts["fit"] = bool(scan.fit.slope < 0 and scan.fit.r2 >= 0.9)
    o.verdicts["grid_stable"] = all(abs(a - b) < 0.05 * a for a, b in zip(d, fine.distances) if a > 0)


def run_yoccoz(p, seed, jobs, o: Outcome):
    from .parabolic import make_almost_parabolic, yoccoz_profile
    rows, Cs = [], []
    for eps in p["eps"]:
        o.stage = f"profile eps={eps!r}"
        prof = yoccoz_profile(make_almost_parabolic(eps))
        Cs.append(prof.C_fit)
        rows += [[repr(eps), int(j), repr(float(ln)), int(m), repr(float(pr))]
                 for j, ln, m, pr in zip(prof.j, prof.length, prof.m, prof.product)]
    o.tables["yoccoz"] = (["eps", "j", "length", "m", "product"], rows)
    o.outputs["C_fit"] = Cs
    o.verdicts["C_bound"] = all(C <= 50 for C in Cs)
    o.verdicts["C_stable"] = bool(max(Cs) / min(Cs) <= 3)


def run_parabolic_fixed(p, seed, jobs, o: Outcome):
    from .parabolic import complex_fixed_points, fixed_point_residual, make_almost_parabolic
    rows, ok_range, ok_res = [], True, True
    for eps in p["eps"]:
        o.stage = f"fixed points eps={eps!r}"
        ap = make_almost_parabolic(eps)
        zp, prod = complex_fixed_points(ap)
        res = fixed_point_residual(ap)
        rows.append([repr(eps), ap.length_a, repr(zp.real), repr(zp.imag), repr(prod), repr(res)])
        ok_range &= 2 <= prod <= 5
        ok_res &= res <= 1e-12
    o.tables["fixed_points"] = (["eps", "a", "re_zp", "im_zp", "a_im_zp", "residual"], rows)
    o.verdicts["a_im_in_range"] = bool(ok_range)
    o.verdicts["residual"] = bool(ok_res)


def _cubic_cell(args):
    from .complexgeom import cubic_growth_check
    f, cf, n, B, R, samples, seed = args
    return cubic_growth_check(f, cf, n, B, R, samples, seed)


def run_cubic_growth(p, seed, jobs, o: Outcome):
    from .complexgeom import cubic_growth_samples
    o.stage = "harness"
    self_test = cubic_growth_samples(lambda z: z ** 3, p["B"], p["R"], p["samples"],
                                     np.random.default_rng(seed))
    o.outputs["harness_C"] = self_test.C
    o.stage = "tune"
    f = _spec(p)
    o.stage = "cubic growth"
    res = _pmap(_cubic_cell, [(f, p["cf"], n, p["B"], p["R"], p["samples"], seed + n)
                              for n in p["levels"]], jobs)
    o.tables["cubic_growth"] = (["n", "C", "count", "discarded"],
                                [[n, repr(r.C), r.count, r.discarded] for n, r in zip(p["levels"], res)])
    Cs = [r.C for r in res]
    o.verdicts["harness"] = bool(abs(self_test.C - 1.0) <= 1e-12)
    o.verdicts["positive"] = all(C > 0 for C in Cs) and all(r.count >= 50 for r in res)
    o.verdicts["ratio"] = bool(max(Cs) / min(Cs) <= 4)


def run_prop33(p, seed, jobs, o: Outcome):
    from .complexgeom import pullback_cloud
    from .fitting import linear_fit
    o.stage = "tune"
    f = _spec(p)
    o.stage = "pullback"
    cloud = pullback_cloud(f, p["cf"], p["n"], p["N"], p["samples"], seed)
    o.tables["prop33"] = _csv_rows(cloud.to_csv)
    o.outputs.update(residual=cloud.residual, discarded=cloud.discarded, retained=int(cloud.x.size))
    o.stage = "fit"
    fit = linear_fit(cloud.x, cloud.y)
    o.outputs["fit"] = fit.to_dict()
    o.verdicts["retained"] = bool(cloud.x.size >= 30)
    o.verdicts["inverse_residual"] = bool(cloud.residual <= 1e-9)


def run_poincare(p, seed, jobs, o: Outcome):
    from .complexgeom import quasi_invariance_measure
    theta = p["angle"]
    x0 = p["start"]
    o.stage = "identity"
    ident = quasi_invariance_measure(lambda z: z, (x0, x0 + p["lengths"][0]), theta)
    o.stage = "tune"
    f = _spec(p)
    rows, losses = [], []
    for L in p["lengths"]:
        o.stage = f"loss L={L!r}"
        q = quasi_invariance_measure(f, (x0, x0 + L), theta)
        losses.append(q.loss)
        rows.append([repr(L), repr(q.loss), repr(q.theta_min_out)])
    o.tables["poincare"] = (["length", "loss", "theta_min_out"], rows)
    o.verdicts["identity_zero"] = ident.loss == 0.0
    o.verdicts["superlinear"] = all(losses[i + 1] <= 0.5 * losses[i] for i in range(len(losses) - 1)
                                    if p["lengths"][i + 1] <= 0.5 * p["lengths"][i])


def _holo_cell(args):
    from .holopair import build_holo_pair, control_report
    f, cf, n = args
    hp = build_holo_pair(f, cf, n)
    return n, hp.checks, control_report(hp).to_dict()


def run_holopair_control(p, seed, jobs, o: Outcome):
    o.stage = "tune"
    f = _spec(p)
    o.stage = "build and control"
    res = _pmap(_holo_cell, [(f, p["cf"], n) for n in p["levels"]], jobs)
    rows, Ks = [], []
    allpass = True
    for n, checks, rep in res:
        Ks.append(rep["K_est"])
        allpass &= all(v[0] for v in checks.values())
        for g, v in rep["conditions"].items():
            rows.append([n, g, repr(v["K"]), int(v["passed"])])
            allpass &= v["passed"]
    o.tables["control"] = (["n", "condition", "K", "passed"], rows)
    o.outputs["K_est"] = Ks
    o.verdicts["all_pass"] = bool(allpass)
    o.verdicts["K_stable"] = bool(max(Ks) / min(Ks) <= 2)


def _cloud(p, seed, o):
    from .holopair import build_holo_pair, limit_set_sample
    o.stage = "tune"
    f = _spec(p)
    o.stage = "build"
    hp = build_holo_pair(f, p["cf"], p["n"])
    o.stage = "limit set"
    return hp, limit_set_sample(hp, p["depth"], p["per_arc"], p["cap"], seed)


def run_limitset(p, seed, jobs, o: Outcome):
    from .holopair import conjugation_gap, forward_consistency
    hp, cloud = _cloud(p, seed, o)
    o.tables["limitset"] = _csv_rows(cloud.to_csv)
    o.outputs.update(counts=list(cloud.counts), skipped=cloud.skipped)
    o.stage = "consistency"
    cons = forward_consistency(hp, cloud)
    o.outputs.update(chain_error=cons.chain, link_error=cons.link)
    o.verdicts["conjugation_closed"] = conjugation_gap(hp, cloud) <= 2.0
    o.verdicts["forward_consistent"] = bool(cons.chain <= 1e-6)


def run_deep_point(p, seed, jobs, o: Outcome):
    from .holopair import deep_point_exponent
    hp, cloud = _cloud(p, seed, o)
    o.stage = "deep point"
    fit = deep_point_exponent(cloud.points, p["r_lo"], p["r_hi"], p["grid"])
    fine = deep_point_exponent(cloud.points, p["r_lo"], p["r_hi"], 2 * p["grid"])
    o.tables["deep_point"] = (["r", "hole"], [[repr(r), repr(h)] for r, h in zip(fit.radii, fit.holes)])
    o.outputs.update(fit=fit.fit.to_dict(), fit_fine=fine.fit.to_dict(), excluded=list(fit.excluded))
    o.verdicts["deep"] = bool(fit.fit.slope > 1.05)
    o.verdicts["grid_stable"] = bool(abs(fit.fit.slope - fine.fit.slope) <= 0.1)


def run_expansion(p, seed, jobs, o: Outcome):
    from .holopair import build_holo_pair, expansion_survey
    o.stage = "tune"
    f = _spec(p)
    o.stage = "build"
    hp = build_holo_pair(f, p["cf"], p["n"])
    o.stage = "survey"
    sv = expansion_survey(hp, p["samples"], p["k"], p["min_im_frac"], seed)
    o.tables["expansion"] = _csv_rows(sv.to_csv)
    done = sv.complete
    o.outputs.update(fraction_expanding=sv.fraction_expanding(), complete=int(done.sum()))
    o.verdicts["single_step"] = bool(sv.fraction_expanding() >= 0.95)
    o.verdicts["growth"] = bool(done.any() and np.all(sv.last[done] >= 5.0))


def run_rigidity(p, seed, jobs, o: Outcome):
    from .complexgeom import modulus_lower_bound, round_annulus_bound, round_annulus_modulus
    from .rigidity import orbit_conjugacy, qs_distortion, rigidity_scan
    lo, hi = _level_range(p, o)
    o.stage = "tune"
    f, g = _spec(p, "_f"), _spec(p, "_g")
    o.stage = "rigidity fit"
    scan = rigidity_scan(f, g, p["cf"], lo, hi)
    o.tables["rigidity"] = _csv_rows(scan.to_csv)
    o.outputs["fit"] = scan.fit.to_dict()
    o.stage = "qs distortion"
    qs = qs_distortion(orbit_conjugacy(f, g, p["cf"], p["qs_level"]), p["scales"])
    ident = qs_distortion(orbit_conjugacy(f, f, p["cf"], p["qs_level"]), p["scales"])
    o.outputs.update(qs=qs, qs_identity=ident)
    o.stage = "modulus"
    radii = np.geomspace(1.1, 100.0, 20)
    mod_ok = all(round_annulus_bound(R).lower <= round_annulus_modulus(R) for R in radii)
    o.verdicts["fit"] = bool(scan.fit.slope < 0 and scan.fit.r2 >= 0.8)
    o.verdicts["qs_identity"] = ident == 1.0
    o.verdicts["modulus_bound"] = bool(mod_ok)


REGISTRY = {e.name: e for e in [
    Experiment("tune", "definition", "the closest return times",
               {**MAP}, run_tune),
    Experiment("partition", "lemma", "pairwise disjoint and each",
               {**MAP, "levels": Param("ints", [2, 12])}, run_partition),
    Experiment("realbounds", "theorem", "every pair I,J of adjacent atoms",
               {**MAP, "levels": Param("ints", [4, 14]), "split": Param("int", 8)}, run_realbounds),
    Experiment("converge", "corollary", "converge together exponentially fast",
               {**PAIR, "levels": Param("ints", [3, 12]), "grid": Param("int", 256)}, run_converge),
    Experiment("yoccoz", "lemma", "m(j)=min{j+1, a-j}",
               {"eps": Param("floats", [1e-4, 1e-3, 1e-2])}, run_yoccoz),
    Experiment("parabolic-fixed", "lemma", "there exist two attracting fixed points",
               {"eps": Param("floats", [1e-4, 1e-3, 1e-2])}, run_parabolic_fixed),
    Experiment("cubic-growth", "proposition", "|ℛⁿf(z)| ≥ C|z|³",
               {**MAP, "levels": Param("ints", [6, 8, 10]), "B": Param("float", 2.0),
                "R": Param("float", 10.0), "samples": Param("int", 2000)}, run_cubic_growth),
    Experiment("prop33", "proposition", "dist(f^{-q_{n+1}+1}(z), f(I_n))",
               {**MAP, "n": Param("int", 10), "N": Param("int", 2),
                "samples": Param("int", 400)}, run_prop33),
    Experiment("poincare", "lemma", "(1-a^{1+δ})θ",
               {**MAP, "start": Param("float", 0.25), "lengths": Param("floats", [0.04, 0.02, 0.01]),
                "angle": Param("float", math.pi / 3)}, run_poincare),
    Experiment("holopair-control", "theorem", "controlled by K>1, or simply K-controlled",
               {**MAP, "levels": Param("ints", [8, 10])}, run_holopair_control),
    Experiment("limitset", "proposition", "be its limit set",
               {**MAP, "n": Param("int", 8), "depth": Param("int", 10), "per_arc": Param("int", 200),
                "cap": Param("int", 4000)}, run_limitset),
    Experiment("deep-point", "theorem", "δ-deep point of K_Γ",
               {**MAP, "n": Param("int", 8), "depth": Param("int", 10), "per_arc": Param("int", 200),
                "cap": Param("int", 4000), "r_lo": Param("float", 0.02),
                "r_hi": Param("float", 0.5), "grid": Param("int", 128)}, run_deep_point),
    Experiment("expansion", "proposition", "‖F'(z)‖_Y ≥ 1+ϱ",
               {**MAP, "n": Param("int", 8), "samples": Param("int", 1000), "k": Param("int", 20),
                "min_im_frac": Param("float", 0.1)}, run_expansion),
    Experiment("rigidity", "theorem", "are C^{1+α} conjugate for some",
               {**PAIR, "levels": Param("ints", [4, 12]), "qs_level": Param("int", 12),
                "scales": Param("int", 6)}, run_rigidity),
]}


def list_experiments() -> dict:
    return {name: {"anchor": e.anchor(), "kind": e.kind, "quote": e.quote,
                   "required": sorted(k for k, p in e.params.items() if p.default is REQUIRED),
                   "optional": sorted(k for k, p in e.params.items() if p.default is not REQUIRED)}
            for name, e in REGISTRY.items()}


# ---------------------------------------------------------------- run

@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: dict
    seed: int = 0
    output: str = "run"

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "params": self.params,
                "seed": self.seed, "output": self.output}


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    problems = []
    name = raw.get("experiment")
    if name not in REGISTRY:
        raise ConfigError([f"unknown experiment {name!r}; choose from {sorted(REGISTRY)}"])
    params = dict(raw.get("params", {}))
    for k, v in raw.items():
        if k not in RESERVED:
            if k in params:
                problems.append(f"parameter '{k}' given twice")
            params[k] = v
    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        problems.append("seed must be a non-negative integer")
    output = raw.get("output", name)
    if not isinstance(output, str) or not output or os.sep in output:
        problems.append("output must be a plain file-name prefix")
    try:
        params = REGISTRY[name].validate(params)
    except ConfigError as exc:
        problems += exc.problems
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(name, params, seed, output)


def artifact_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__
        return __version__


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def run(config: ExperimentConfig, output_dir: Path, jobs: int = 1) -> dict:
    """Execute one experiment and write its CSV tables and JSON record."""
    exp = REGISTRY[config.experiment]
    out = Outcome()
    error = None
    t0 = time.perf_counter()
    try:
        exp.runner(parsed(exp, config.params), config.seed, jobs, out)
    except Exception as exc:        # recorded with the failing stage
        log.debug("stage '%s' failed", out.stage, exc_info=True)
        error = {"stage": out.stage, "type": type(exc).__name__, "message": str(exc)}
    wall = time.perf_counter() - t0
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, (header, rows) in sorted(out.tables.items()):
        path = output_dir / f"{config.output}_{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\r\n")
            w.writerow(header)
            w.writerows(rows)
        files.append(path.name)
    record = {
        "schema_version": SCHEMA_VERSION,
        "artifact_version": artifact_version(),
        "config": config.to_dict(),
        "anchor": exp.anchor(),
        "outputs": _jsonable(out.outputs),
        "verdicts": _jsonable(out.verdicts),
        "passed": error is None and all(out.verdicts.values()),
        "error": error,
        "files": files,
        "wall_time": round(wall, 3),
    }
    with open(output_dir / f"{config.output}.json", "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
    return record


def _jobs(arg) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("RENORMLAB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring RENORMLAB_JOBS=%r", env)
    return 1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="renormlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config", type=Path)
    r.add_argument("--output-dir", type=Path, default=Path("."))
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.add_argument("--jobs", type=int, default=None, help="worker cap (default: RENORMLAB_JOBS or 1)")
    sub.add_parser("list", help="list experiments with their anchors")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list":
        for name, info in list_experiments().items():
            req = ", ".join(info["required"]) or "-"
            print(f"{info['anchor']}   required: {req}")
        return 0

    try:
        raw = json.loads(args.config.read_text(encoding="utf-8"))
        if args.seed is not None and isinstance(raw, dict):
            raw["seed"] = args.seed
        cfg = parse_config(raw)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        for p in exc.problems:
            print(f"error: {p}", file=sys.stderr)
        return 2
    rec = run(cfg, args.output_dir, _jobs(args.jobs))
    for k, v in rec["verdicts"].items():
        print(f"{k}: {'PASS' if v else 'FAIL'}")
    if rec["error"]:
        e = rec["error"]
        print(f"error in stage '{e['stage']}': {e['type']}: {e['message']}", file=sys.stderr)
    return 0 if rec["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
