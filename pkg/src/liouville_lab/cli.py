"""Command-line front end: config ingestion, experiment orchestration,
report persistence, and plot-data emission.

Subcommands
    generate   sample exact family members onto the grid, write field
               files plus a deterministic manifest
    solve      Dirichlet-solve each family member from its boundary
               trace; failures keep their best iterate and the run
               continues
    diagnose   load previously written fields and emit the JSON/CSV/
               curve/figure report bundle
    sweep      re-run the quantization estimate over a parameter range,
               one CSV row per (run, k)
    cascade    classify the family's pole collapse scales

Exit codes: 0 success (including "inconclusive" verdicts — nulls are
results), 2 config/validation errors (message names the offending key),
3 solver failure on every k, 4 I/O errors.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import report as rp
from .config import ConfigError, parse_config, read_config_doc
from .diagnostics import (DataError, detect_cascade, run_diagnostics)
from .field import ScalarField
from .grid import DiskGrid, GridConfigError
from .solver import DirichletProblem, SolverFailure, green_decompose, \
    solve_dirichlet
from .weights import ConfigValidationError

SWEEP_BUDGET = 10_000


class MissingFieldsError(OSError):
    """Diagnose was pointed at a directory without the fields it needs."""


class AllSolvesFailed(RuntimeError):
    """Every family member stalled; nothing usable was produced."""


def _field_names(k):
    return f"field_k{k:03d}.csv", f"field_k{k:03d}.json"


def _pool_map(fn, items, jobs):
    """Order-preserving map, threaded when jobs > 1 (writes stay in the
    caller, so only the numeric work runs concurrently)."""
    if jobs <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _manifest_entry(out, k, mem, extra=None):
    csv_name, json_name = _field_names(k)
    entry = {
        "k": int(k), "lam": float(mem.lam), "tau": float(mem.tau),
        "eps": float(mem.eps),
        "poles": [[p.real, p.imag] for p in mem.pole_config.poles],
        "alphas": [int(a) for a in mem.pole_config.alphas],
        "files": {"values": csv_name, "header": json_name},
        "sha256": {csv_name: rp.file_digest(os.path.join(out, csv_name)),
                   json_name: rp.file_digest(os.path.join(out, json_name))},
    }
    if extra:
        entry.update(extra)
    return entry


def cmd_generate(cfg, args):
    if cfg.mode not in ("exact", "both"):
        raise ConfigError("mode", "generate needs mode 'exact' or 'both'")
    fam = cfg.family
    grid = DiskGrid(cfg.grid_r, cfg.grid_n)
    out = cfg.out
    os.makedirs(out, exist_ok=True)

    def build(k):
        mem = fam.member(k)
        return k, mem, mem.exact.sample(grid)

    entries = []
    for k, mem, fld in _pool_map(build, list(fam.ks()), args.jobs):
        csv_name, json_name = _field_names(k)
        fld.save(os.path.join(out, csv_name), os.path.join(out, json_name))
        entries.append(_manifest_entry(out, k, mem))
        print(f"k={k}: lam={mem.lam:g} tau={mem.tau:g} -> {csv_name}")
    path = rp.write_manifest(entries, os.path.join(out, "manifest.json"),
                             config=cfg)
    print(f"manifest: {path}")
    return 0


def _boundary_of(cfg, mem):
    if cfg.boundary == "exact-trace":
        src = mem.exact if mem.exact is not None else mem.seed
        return src.evaluator
    c = float(cfg.boundary["constant"])
    return lambda x, y: np.full_like(np.asarray(x, float), c)


def _py(x):
    if isinstance(x, (np.floating, np.integer)):
        return float(x)
    raise TypeError(f"not JSON-serializable: {type(x)}")


def _record_doc(k, record, failed):
    newton = [s for s in record.steps if s.get("kind") == "newton"]
    return {
        "k": int(k),
        "converged": bool(record.converged),
        "failed": bool(failed),
        "message": record.message,
        "stages": int(record.stages),
        "iterations": len(newton),
        "final_residual": record.final_residual,
        "tol_effective": record.tol_effective,
        "quadratic_tail": record.quadratic_tail(),
        "max_principle_ok": getattr(record, "max_principle_ok", None),
        "steps": record.steps,
    }


def cmd_solve(cfg, args):
    if cfg.mode not in ("solve", "both"):
        raise ConfigError("mode", "solve needs mode 'solve' or 'both'")
    fam = cfg.family
    grid = DiskGrid(cfg.grid_r, cfg.grid_n)
    out = cfg.out
    os.makedirs(out, exist_ok=True)

    def run(k):
        mem = fam.member(k)
        initial = mem.seed.sample(grid) if mem.seed is not None else None
        prob = DirichletProblem(mem.weight, _boundary_of(cfg, mem), grid,
                                initial=initial)
        try:
            fld = solve_dirichlet(prob)
            return k, mem, fld, fld.record, False
        except SolverFailure as ex:
            return k, mem, ex.best_field, ex.record, True

    entries, records, failures = [], [], 0
    for k, mem, fld, record, failed in _pool_map(run, list(fam.ks()), args.jobs):
        csv_name, json_name = _field_names(k)
        fld.save(os.path.join(out, csv_name), os.path.join(out, json_name))
        doc = _record_doc(k, record, failed)
        rec_name = f"convergence_k{k:03d}.json"
        with open(os.path.join(out, rec_name), "w") as fh:
            fh.write(json.dumps(doc, indent=2, sort_keys=True, default=_py)
                     + "\n")
        entries.append(_manifest_entry(out, k, mem, extra={
            "converged": bool(record.converged), "record": rec_name}))
        records.append(doc)
        failures += failed
        state = "stalled" if failed else \
            f"converged in {doc['iterations']} steps"
        print(f"k={k}: {state} (residual {doc['final_residual']:.3e})")
    rp.write_manifest(entries, os.path.join(out, "manifest.json"), config=cfg)
    if failures == len(entries):
        raise AllSolvesFailed("no family member converged; "
                              "best iterates and records were kept")
    return 0


def _load_fields(cfg, src):
    fam = cfg.family
    ks = list(fam.ks())
    man_path = os.path.join(src, "manifest.json")
    if not os.path.exists(man_path):
        raise MissingFieldsError(
            f"no manifest under {src!r} (missing k = "
            f"{', '.join(str(k) for k in ks)}); run generate or solve first")
    with open(man_path) as fh:
        manifest = json.load(fh)
    by_k = {e["k"]: e for e in manifest.get("entries", [])}
    absent = [k for k in ks
              if k not in by_k
              or not os.path.exists(os.path.join(src, by_k[k]["files"]["values"]))]
    if absent:
        raise MissingFieldsError(
            f"fields missing under {src!r} for k = "
            f"{', '.join(str(k) for k in absent)}")
    fields = []
    for k in ks:
        files = by_k[k]["files"]
        fields.append(ScalarField.load(os.path.join(src, files["values"]),
                                       os.path.join(src, files["header"])))
    return fields


def cmd_diagnose(cfg, args):
    fam = cfg.family
    src = args.fields or cfg.out
    fields = _load_fields(cfg, src)
    weights = [fam.member(k).weight for k in fam.ks()]
    out = cfg.out
    os.makedirs(out, exist_ok=True)

    grid = fields[0].grid
    # loaded fields carry inside-node values only, so the identity circle
    # must keep the interpolation stencil clear of the rim
    r_id = min(0.9 * grid.radius, grid.radius - 3.0 * grid.h)
    tol = cfg.tolerances["quadrature"]
    green_pairs = None
    if "green" in cfg.diagnostics:
        pairs = []
        for fld, w in zip(fields, weights):
            dec = green_decompose(fld, w, seed=cfg.seed)
            pairs.append((dec.lap_regular_sup, dec.quad_tol))
        green_pairs = pairs
    rep = run_diagnostics(fields, weights, cfg.deltas.values(), family=fam,
                          names=tuple(cfg.diagnostics), r=r_id, tol=tol,
                          slope_tol=cfg.tolerances["plateau_slope"],
                          green_pairs=green_pairs)
    rp.write_json(rp.report_doc(rep, family=fam, config=cfg),
                  os.path.join(out, "report.json"))
    rp.write_report_csv(rep, os.path.join(out, "report.csv"), family=fam)
    rp.write_curves(rep, out, family=fam)
    rp.render_figures(rep, out, field=fields[-1], family=fam)
    v = rep.verdict
    if v.inconclusive:
        print("quantization: inconclusive (no plateau resolved)")
    else:
        print(f"quantization: sigma_hat = {v.sigma_hat:.6f} "
              f"(= 8 pi x {v.n}, residual {v.residual:.2e})")
    if rep.cascade is not None:
        print(f"cascade: s1 = {rep.cascade.s1}, groups = {rep.cascade.groups}")
    print(f"report: {os.path.join(out, 'report.json')}")
    return 0


def _derived_doc(cfg, param, value):
    doc = cfg.to_dict()
    doc.pop("sweep", None)
    if param == "lam0":
        doc["family"]["lam"]["lam0"] = float(value)
    elif param == "alpha":
        doc["family"]["alpha"] = int(value)
    else:
        doc["grid"]["n"] = int(value)
    return doc


def cmd_sweep(cfg, args):
    sw = cfg.sweep
    if not sw:
        raise ConfigError("sweep", "sweep needs {\"param\": ..., \"values\": [...]}")
    fam = cfg.family
    if fam.kind == "perturbed_bubble":
        raise ConfigError("sweep", "sweep drives exact families only")
    param, values = sw["param"], list(sw["values"])
    k_count = len(list(fam.ks()))
    total = len(values) * k_count
    if total > SWEEP_BUDGET:
        raise ConfigError("sweep.values",
                          f"{total} runs exceed the budget of {SWEEP_BUDGET}")
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "sweep.csv")
    if not values:
        rp.write_sweep_csv([], path)
        print(f"empty sweep range: wrote header-only {path}")
        return 0

    from .diagnostics import estimate_sigma, mass_profile

    def run(item):
        idx, value = item
        sub = parse_config(_derived_doc(cfg, param, value))
        grid = DiskGrid(sub.grid_r, sub.grid_n)
        subfam = sub.family
        fields, weights, lams = [], [], []
        for k in subfam.ks():
            mem = subfam.member(k)
            fields.append(mem.exact.sample(grid))
            weights.append(mem.weight)
            lams.append(mem.lam)
        mp = mass_profile(fields, weights, sub.deltas.values(),
                          tol=sub.tolerances["quadrature"])
        v = estimate_sigma(mp, slope_tol=sub.tolerances["plateau_slope"])
        rows = []
        for k, lam in zip(subfam.ks(), lams):
            rows.append([idx, param, float(value), int(k), float(lam),
                         float(v.sigma_hat),
                         "" if v.n is None else int(v.n),
                         float(v.residual), float(v.plateau_quality),
                         int(v.inconclusive)])
        return rows

    rows = []
    for chunk in _pool_map(run, list(enumerate(values)), args.jobs):
        rows.extend(chunk)
    rp.write_sweep_csv(rows, path)
    print(f"swept {param} over {len(values)} values ({total} runs): {path}")
    return 0


def cmd_cascade(cfg, args):
    fam = cfg.family
    if not fam.pole_rules:
        raise ConfigError("family.pole_rules",
                          "cascade classification needs moving poles")
    out = cfg.out
    os.makedirs(out, exist_ok=True)
    c = detect_cascade(fam)
    rp.write_json(rp.cascade_doc(c), os.path.join(out, "cascade.json"))
    ks = list(c.ks)
    for j in range(len(fam.pole_rules)):
        mods = [(k, abs(fam.pole_config(k).poles[j])) for k in ks]
        with open(os.path.join(out, f"curve_pole{j}.dat"), "w") as fh:
            fh.write(f"# k  |p_{j}(k)|\n")
            for k, m in mods:
                fh.write(f"{k} {m!r}\n")
    rp.render_cascade_figure(c, fam, out)
    print(f"s1 = {c.s1}; groups = {c.groups}; "
          f"exponents = {tuple(round(e, 4) for e in c.exponents)}")
    if c.unresolved:
        print(f"unresolved adjacent pairs: {c.unresolved} (inconclusive)")
    return 0


def _build_config(args):
    doc = read_config_doc(args.config)
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a JSON object")
    if args.grid_n is not None:
        doc.setdefault("grid", {})["n"] = args.grid_n
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.out is not None:
        doc["out"] = args.out
    return parse_config(doc)


def _parser():
    p = argparse.ArgumentParser(
        prog="liouville-lab",
        description="numerical laboratory for singular Liouville fields")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config path")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for per-k work")
    common.add_argument("--grid-n", type=int, dest="grid_n",
                        help="grid resolution override")
    common.add_argument("--seed", type=int, help="probe-point RNG seed override")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, doc in (
            ("generate", cmd_generate, "write exact fields and a manifest"),
            ("solve", cmd_solve, "Dirichlet-solve the family"),
            ("diagnose", cmd_diagnose, "report bundle from existing fields"),
            ("sweep", cmd_sweep, "quantization estimate over a range"),
            ("cascade", cmd_cascade, "classify pole collapse scales")):
        sp = sub.add_parser(name, parents=[common], help=doc)
        sp.set_defaults(fn=fn)
        if name == "diagnose":
            sp.add_argument("--fields",
                            help="directory holding the field files "
                                 "(default: the output directory)")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    args.jobs = max(1, args.jobs)
    try:
        cfg = _build_config(args)
        return args.fn(cfg, args)
    except (ConfigError, ConfigValidationError, GridConfigError,
            DataError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    except (AllSolvesFailed, SolverFailure) as ex:
        print(f"solver failure: {ex}", file=sys.stderr)
        return 3
    except OSError as ex:
        print(f"i/o error: {ex}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
