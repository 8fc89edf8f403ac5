"""Report persistence: JSON documents whose numbers carry tolerance
metadata, a frozen-column CSV table, gnuplot-ready two-column curve
files, and PNG figures rendered off-screen.

Everything written here is deterministic for a fixed input: keys are
sorted, floats use repr round-tripping, and no wall-clock content is
embedded, so re-running the same experiment reproduces the bytes.

CSV column schema (report-csv/1), frozen so downstream plots survive
upgrades.  One row per family step k:

    k               ladder index
    lam             peak amplitude lambda_k
    tau             fastest collapse scale tau_k (0 when no poles move)
    eps             slowest collapse scale eps_k
    sigma_hat       plateau mass estimate (repeated on every row)
    n_hat           quantization rung sigma_hat/(8 pi), empty if inconclusive
    plateau_quality worst |d ln M / d ln delta| over the plateau window
    pohozaev_defect |m^2 - mu^2 - 4(1+alpha)(m - mu)| on the annulus
    pohozaev_gap    boundary-vs-annulus identity residual
    energy          gradient-energy identity value (O(1) along families)
    profile         sup deviation from the matched-bubble profile in B_r
    oscillation     boundary oscillation of the field on |x| = r
    peak_relation   peak + boundary-min + weight-at-peak combination
    lap_psi_sup     sup |Laplacian psi| of the Green regular part
    mass_0..mass_{L-1}  concentration mass at each delta level (descending)

Missing or inapplicable entries are written as nan, which gnuplot
skips.  Delta levels are recorded in a leading '#' comment so the
mass_* columns stay self-describing.
"""

import csv
import hashlib
import json
import os

import numpy as np

REPORT_JSON_SCHEMA = "report-json/1"
REPORT_CSV_SCHEMA = "report-csv/1"
MANIFEST_SCHEMA = "manifest/1"
SWEEP_CSV_SCHEMA = "sweep-csv/1"

CSV_FIXED_COLUMNS = (
    "k", "lam", "tau", "eps", "sigma_hat", "n_hat", "plateau_quality",
    "pohozaev_defect", "pohozaev_gap", "energy", "profile", "oscillation",
    "peak_relation", "lap_psi_sup",
)

SWEEP_COLUMNS = (
    "run", "param", "value", "k", "lam", "sigma_hat", "n_hat", "residual",
    "plateau_quality", "inconclusive",
)

FIGURE_DPI = 110
PNG_METADATA = {"Software": "liouville-lab"}


def _num(x):
    """JSON-safe float: non-finite values become None."""
    x = float(x)
    return x if np.isfinite(x) else None


def measured(value, tol, kind):
    """A number plus the tolerance it was computed to and what that
    tolerance means ('quadrature-error', 'plateau-slope', ...)."""
    return {"value": _num(value), "tol": _num(tol), "tol_kind": str(kind)}


def _mass_block(mp):
    deltas = [float(d) for d in mp.deltas]
    per_k = []
    for i, k in enumerate(mp.ks):
        row = [measured(mp.masses[i, j], mp.errors[i, j], "quadrature-error")
               for j in range(len(deltas))]
        for j in range(len(deltas)):
            if bool(mp.flagged[i, j]):
                row[j]["flagged"] = True
        entry = {"k": int(k), "masses": row}
        if mp.mu_local is not None:
            entry["mu_local"] = measured(mp.mu_local[i],
                                         np.nanmax(mp.errors[i]),
                                         "quadrature-error")
            entry["mu_scale"] = _num(mp.mu_scale[i])
        per_k.append(entry)
    return {"deltas": deltas, "per_k": per_k,
            "monotone_defect": measured(mp.monotone_defect(),
                                        float(np.nanmax(mp.errors, initial=0.0)),
                                        "quadrature-error")}


def _verdict_block(v, slope_tol):
    return {
        "sigma_hat": measured(v.sigma_hat, v.plateau_quality * abs(v.sigma_hat),
                              "plateau-slope-x-sigma"),
        "n": None if v.n is None else int(v.n),
        "residual": measured(v.residual, slope_tol, "plateau-slope"),
        "plateau_quality": measured(v.plateau_quality, slope_tol, "plateau-slope"),
        "window": None if v.window is None else [_num(v.window[0]), _num(v.window[1])],
        "inconclusive": bool(v.inconclusive),
    }


def _identity_seq(values, tol, kind):
    out = []
    for v in values:
        item = measured(v.value, tol, kind)
        if not v.applicable:
            item["applicable"] = False
        out.append(item)
    return out


def _cascade_block(c):
    return {
        "s1": int(c.s1),
        "groups": [[int(j) for j in g] for g in c.groups],
        "eps_by_k": [_num(e) for e in c.eps_by_k],
        "z": [[_num(z.real), _num(z.imag)] for z in c.z],
        "q": [[_num(q.real), _num(q.imag)] for q in c.q],
        "diverging": [bool(b) for b in c.diverging],
        "exponents": [_num(e) for e in c.exponents],
        "unresolved": [[int(a), int(b)] for a, b in c.unresolved],
        "order": [int(j) for j in c.order],
        "ks": [int(k) for k in c.ks],
        "resolved": bool(c.resolved),
    }


def report_doc(report, family=None, config=None):
    """Flatten a DiagnosticsReport into a JSON-able dict.  Every measured
    number is wrapped with the tolerance it was computed to; structural
    integers (k, n, indices) stay bare."""
    tols = dict(report.tolerances)
    quad_tol = float(tols.get("quadrature", 1e-8))
    slope_tol = float(tols.get("plateau_slope", 0.05))
    doc = {
        "schema": REPORT_JSON_SCHEMA,
        "ks": [int(k) for k in report.ks],
        "tolerances": {k: _num(v) for k, v in sorted(tols.items())},
        "mass": _mass_block(report.mass),
        "quantization": _verdict_block(report.verdict, slope_tol),
        "energy": _identity_seq(report.energy, quad_tol, "quadrature-error"),
        "peak_relation": _identity_seq(report.peak_relation, quad_tol,
                                       "quadrature-error"),
        "profile": [measured(p, quad_tol, "grid-interpolation")
                    for p in report.profile],
        "oscillation": [measured(o, quad_tol, "grid-interpolation")
                        for o in report.oscillation],
        "peak_data": [dict(d) for d in report.peak_data],
    }
    if report.pohozaev:
        doc["pohozaev"] = [{
            "algebraic_defect": measured(p.algebraic_defect, p.quad_tol,
                                         "quadrature-error"),
            "identity_gap": measured(p.identity_gap, p.quad_tol,
                                     "quadrature-error"),
            "m_hat": measured(p.m_hat, p.quad_tol, "quadrature-error"),
            "mu_hat": measured(p.mu_hat, p.quad_tol, "quadrature-error"),
            "r_in": _num(p.r_in), "r_out": _num(p.r_out),
            "notes": list(p.notes),
        } for p in report.pohozaev]
    if report.green_defect:
        doc["green"] = [{"lap_psi_sup": measured(s, q, "quadrature-error")}
                        for s, q in report.green_defect]
    if report.cascade is not None:
        doc["cascade"] = _cascade_block(report.cascade)
    slopes = report.sequence_slopes()
    if slopes:
        doc["sequence_slopes"] = {name: measured(s, slope_tol, "trend-gate")
                                  for name, s in sorted(slopes.items())}
    if family is not None:
        doc["family"] = family.to_dict()
    if config is not None:
        doc["config"] = config.to_dict()
    return doc


def canonical_json(doc):
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(doc, path):
    with open(path, "w") as fh:
        fh.write(canonical_json(doc))
    return path


def _fmt(x):
    """CSV/gnuplot cell: full-precision repr, nan for missing."""
    if x is None:
        return "nan"
    x = float(x)
    return repr(x) if np.isfinite(x) else "nan"


def _seq_lookup(values, ks):
    """Map a per-k sequence (same order as ks) to {k: value}."""
    return {int(k): v for k, v in zip(ks, values)}


def report_rows(report, family=None):
    """(header, rows) for the frozen report-csv/1 table."""
    levels = len(report.mass.deltas)
    header = list(CSV_FIXED_COLUMNS) + [f"mass_{j}" for j in range(levels)]
    ks = [int(k) for k in report.ks]
    v = report.verdict
    energy = _seq_lookup(report.energy, ks)
    peak = _seq_lookup(report.peak_relation, ks)
    profile = _seq_lookup(report.profile, ks)
    osc = _seq_lookup(report.oscillation, ks)
    poho = _seq_lookup(report.pohozaev, ks[-len(report.pohozaev):]
                       if report.pohozaev else [])
    green = _seq_lookup(report.green_defect, ks[:len(report.green_defect)])
    rows = []
    for i, k in enumerate(ks):
        lam = tau = eps = None
        if family is not None:
            lam = family.lam_at(k)
            tau = family.tau_at(k)
            eps = family.eps_at(k)
        p = poho.get(k)
        e = energy.get(k)
        pk = peak.get(k)
        g = green.get(k)
        row = [
            str(k), _fmt(lam), _fmt(tau), _fmt(eps),
            _fmt(v.sigma_hat),
            "" if v.n is None else str(int(v.n)),
            _fmt(v.plateau_quality),
            _fmt(None if p is None else p.algebraic_defect),
            _fmt(None if p is None else p.identity_gap),
            _fmt(None if e is None or not e.applicable else e.value),
            _fmt(profile.get(k)),
            _fmt(osc.get(k)),
            _fmt(None if pk is None or not pk.applicable else pk.value),
            _fmt(None if g is None else g[0]),
        ]
        row += [_fmt(report.mass.masses[i, j]) for j in range(levels)]
        rows.append(row)
    return header, rows


def write_report_csv(report, path, family=None):
    header, rows = report_rows(report, family)
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {REPORT_CSV_SCHEMA}\n")
        fh.write("# deltas: " + " ".join(_fmt(d) for d in report.mass.deltas)
                 + "\n")
        wr = csv.writer(fh)
        wr.writerow(header)
        wr.writerows(rows)
    return path


def write_sweep_csv(rows, path):
    """Aggregated sweep table, one row per (run, k).  An empty row list
    still writes the header so downstream tooling sees the schema."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# schema: {SWEEP_CSV_SCHEMA}\n")
        wr = csv.writer(fh)
        wr.writerow(SWEEP_COLUMNS)
        for row in rows:
            assert len(row) == len(SWEEP_COLUMNS)
            wr.writerow([_fmt(c) if isinstance(c, float) else str(c)
                         for c in row])
    return path


def _write_curve(path, pairs, title):
    with open(path, "w") as fh:
        fh.write(f"# {title}\n")
        for x, y in pairs:
            fh.write(f"{_fmt(x)} {_fmt(y)}\n")
    return path


def write_curves(report, outdir, family=None):
    """One two-column gnuplot file per curve.  Mass profiles come out
    per k (delta vs mass/2pi); the k-sequences (defects, identities)
    come out once each."""
    paths = []
    mp = report.mass
    deltas = np.asarray(mp.deltas, float)
    for i, k in enumerate(mp.ks):
        pairs = [(d, m / (2.0 * np.pi)) for d, m in zip(deltas, mp.masses[i])
                 if np.isfinite(m)]
        paths.append(_write_curve(
            os.path.join(outdir, f"curve_mass_k{int(k)}.dat"), pairs,
            f"delta  mass/2pi   (k={int(k)})"))
    ks = [int(k) for k in report.ks]
    seqs = [
        ("curve_energy.dat", "k  energy-identity",
         [(k, e.value) for k, e in zip(ks, report.energy) if e.applicable]),
        ("curve_profile.dat", "k  profile-residual",
         list(zip(ks, report.profile))),
        ("curve_oscillation.dat", "k  boundary-oscillation",
         list(zip(ks, report.oscillation))),
        ("curve_peak_relation.dat", "k  peak-boundary-relation",
         [(k, p.value) for k, p in zip(ks, report.peak_relation)
          if p.applicable]),
    ]
    if report.pohozaev:
        kp = ks[-len(report.pohozaev):]
        seqs.append(("curve_pohozaev_defect.dat", "k  algebraic-defect",
                     [(k, p.algebraic_defect) for k, p in
                      zip(kp, report.pohozaev)]))
    if report.cascade is not None:
        c = report.cascade
        seqs.append(("curve_cascade_eps.dat", "k  fastest-scale",
                     list(zip(c.ks, c.eps_by_k))))
    for name, title, pairs in seqs:
        if pairs:
            paths.append(_write_curve(os.path.join(outdir, name), pairs, title))
    return paths


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path):
    fig.savefig(path, dpi=FIGURE_DPI, metadata=dict(PNG_METADATA))
    return path


def render_figures(report, outdir, field=None, family=None):
    """PNG figures next to the delimited output: the mass-profile
    ladder, the defect/identity sequences, cascade moduli when present,
    and a heatmap of the last field when one is supplied."""
    plt = _pyplot()
    paths = []
    mp = report.mass
    deltas = np.asarray(mp.deltas, float)

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    top = 0.0
    for i, k in enumerate(mp.ks):
        m = mp.masses[i] / (2.0 * np.pi)
        ax.semilogx(deltas, m, marker="o", ms=3, label=f"k={int(k)}")
        top = max(top, float(np.nanmax(m, initial=0.0)))
    for n in range(1, int(top / 4.0) + 2):
        ax.axhline(4.0 * n, color="0.8", lw=0.8, zorder=0)
    ax.set_xlabel("delta")
    ax.set_ylabel("mass / 2 pi")
    ax.set_title("concentration mass vs window radius")
    if len(mp.ks) <= 10:
        ax.legend(fontsize=8)
    fig.tight_layout()
    paths.append(_save(fig, os.path.join(outdir, "fig_mass_ladder.png")))
    plt.close(fig)

    ks = [int(k) for k in report.ks]
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    drew = False
    if report.pohozaev:
        kp = ks[-len(report.pohozaev):]
        dseq = [abs(p.algebraic_defect) for p in report.pohozaev]
        if any(d > 0 for d in dseq):
            ax.semilogy(kp, dseq, marker="s", label="pohozaev defect")
            drew = True
        gseq = [abs(p.identity_gap) for p in report.pohozaev]
        if any(g > 0 for g in gseq):
            ax.semilogy(kp, gseq, marker="^", label="identity gap")
            drew = True
    if not drew:
        ax.plot(ks, report.profile, marker="o", label="profile residual")
    ax.set_xlabel("k")
    ax.set_title("defect sequences")
    ax.legend(fontsize=8)
    fig.tight_layout()
    paths.append(_save(fig, os.path.join(outdir, "fig_defects.png")))
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for label, seq in (("energy", [(k, e.value) for k, e in
                                   zip(ks, report.energy) if e.applicable]),
                       ("profile", list(zip(ks, report.profile))),
                       ("peak relation", [(k, p.value) for k, p in
                                          zip(ks, report.peak_relation)
                                          if p.applicable])):
        if seq:
            xs, ys = zip(*seq)
            ax.plot(xs, ys, marker="o", ms=3, label=label)
    ax.set_xlabel("k")
    ax.set_title("bounded-sequence checks (flat = no trend)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    paths.append(_save(fig, os.path.join(outdir, "fig_sequences.png")))
    plt.close(fig)

    if report.cascade is not None and family is not None:
        paths.append(render_cascade_figure(report.cascade, family, outdir))

    if field is not None:
        fig, ax = plt.subplots(figsize=(5.4, 4.6))
        g = field.grid
        vals = np.array(field.values, float)
        vals[~g.inside] = np.nan
        im = ax.imshow(vals.T, origin="lower",
                       extent=(-g.radius, g.radius, -g.radius, g.radius))
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_title("field heatmap")
        fig.tight_layout()
        paths.append(_save(fig, os.path.join(outdir, "fig_field.png")))
        plt.close(fig)
    return paths


def render_cascade_figure(cascade, family, outdir):
    """Log-log pole moduli vs k, coloured by detected scale group."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    kk = np.asarray(cascade.ks, float)
    for gi, group in enumerate(cascade.groups):
        for j in group:
            mods = [abs(family.pole_config(int(k)).poles[j]) for k in cascade.ks]
            ax.loglog(kk, mods, marker="o", ms=3, color=f"C{gi % 10}",
                      label=f"group {gi}" if j == group[0] else None)
    ax.set_xlabel("k")
    ax.set_ylabel("|p_j(k)|")
    ax.set_title(f"pole moduli cascade (s1 = {cascade.s1})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = _save(fig, os.path.join(outdir, "fig_cascade.png"))
    plt.close(fig)
    return path


def cascade_doc(cascade):
    """Standalone JSON document for a cascade detection run."""
    return {"schema": "cascade-json/1", **_cascade_block(cascade)}


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(entries, path, config=None):
    """Per-k inventory of generated artifacts.  Byte-identical across
    re-runs of the same config: sorted keys, no timestamps, content
    digests instead of mtimes."""
    doc = {"schema": MANIFEST_SCHEMA, "entries": entries}
    if config is not None:
        doc["config"] = config.to_dict()
    return write_json(doc, path)
