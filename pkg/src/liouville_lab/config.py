"""Experiment configuration: schema, validation, canonical round-trip.

A config is a JSON document with a top-level ``schema`` version.  Parsing is
strict: unknown keys, missing mode-required fields, or out-of-range values
raise :class:`ConfigError` carrying the offending key, which the CLI turns
into an exit-2 message naming that key.  ``ExperimentConfig.to_dict`` emits a
canonical form (defaults filled in), so parse -> serialize -> parse is the
identity on the canonical form.
"""

import json
from dataclasses import dataclass, field as dc_field

from .families import CollapsingFamily, make_family, FAMILY_SCHEMA
from .grid import MIN_NODES
from .weights import ConfigValidationError

CONFIG_SCHEMA = "liouville-lab/1"

MODES = ("exact", "solve", "both")
DIAGNOSTIC_NAMES = ("quantization", "pohozaev", "identities", "cascade",
                    "green", "ladder")
_TOL_KEYS = ("quadrature", "solver", "plateau_slope")
_TOL_DEFAULTS = {"quadrature": 1e-8, "solver": 1e-9, "plateau_slope": 0.05}


class ConfigError(ConfigValidationError):
    """Invalid experiment config; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


@dataclass(frozen=True)
class DeltaGridSpec:
    start: float
    levels: int
    ratio: float

    def __post_init__(self):
        if not (self.start > 0.0):
            raise ConfigError("deltas.start", f"must be positive, got {self.start}")
        if not (4 <= int(self.levels) <= 64):
            raise ConfigError("deltas.levels", f"need 4..64 levels, got {self.levels}")
        if not (0.0 < self.ratio < 1.0):
            raise ConfigError("deltas.ratio", f"must be in (0,1), got {self.ratio}")
        object.__setattr__(self, "levels", int(self.levels))

    def values(self):
        return [self.start * self.ratio ** i for i in range(self.levels)]

    def to_dict(self):
        return {"start": self.start, "levels": self.levels, "ratio": self.ratio}


@dataclass(frozen=True)
class ExperimentConfig:
    family: CollapsingFamily
    grid_n: int
    grid_r: float
    mode: str
    diagnostics: tuple
    deltas: DeltaGridSpec
    tolerances: dict
    out: str = "."
    seed: int = 0
    boundary: str = "exact-trace"
    sweep: dict = dc_field(default_factory=dict)

    def k_count(self):
        return self.family.k_max - self.family.k_min + 1

    def to_dict(self):
        return {
            "schema": CONFIG_SCHEMA,
            "family": self.family.to_dict(),
            "grid": {"n": self.grid_n, "r": self.grid_r},
            "mode": self.mode,
            "diagnostics": list(self.diagnostics),
            "deltas": self.deltas.to_dict(),
            "tolerances": {k: self.tolerances[k] for k in _TOL_KEYS},
            "out": self.out,
            "seed": self.seed,
            "boundary": self.boundary,
            "sweep": dict(self.sweep),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _require(d, key, parent=""):
    if key not in d:
        raise ConfigError(parent + key, "missing")
    return d[key]


def parse_config(doc):
    """Validate a config dict (already JSON-decoded) into ExperimentConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("schema", "config must be a JSON object")
    schema = doc.get("schema")
    if schema != CONFIG_SCHEMA:
        raise ConfigError("schema",
                          f"unrecognized version {schema!r}, expected {CONFIG_SCHEMA!r}")
    known = {"schema", "family", "grid", "mode", "diagnostics", "deltas",
             "tolerances", "out", "seed", "boundary", "sweep"}
    for k in doc:
        if k not in known:
            raise ConfigError(k, "unknown key")

    fam_doc = _require(doc, "family")
    if isinstance(fam_doc, dict):
        if "schema" not in fam_doc:
            fam_doc = dict(fam_doc, schema=FAMILY_SCHEMA)
        fam_known = {"schema", "kind", "k_range", "lam", "poles", "alpha"}
        for k in fam_doc:
            if k not in fam_known:
                raise ConfigError(f"family.{k}", "unknown key")
    try:
        family = make_family(fam_doc)
    except ConfigValidationError as ex:
        raise ConfigError("family", str(ex)) from ex
    if family.k_max - family.k_min + 1 < 4:
        raise ConfigError("family.k_range",
                          f"need at least 4 family steps (K >= 4), got "
                          f"{family.k_max - family.k_min + 1}")

    grid = _require(doc, "grid")
    n = _require(grid, "n", "grid.")
    r = _require(grid, "r", "grid.")
    if not (isinstance(n, int) and n >= MIN_NODES and n % 2 == 1):
        raise ConfigError("grid.n", f"need an odd integer >= {MIN_NODES}, got {n!r}")
    if not (isinstance(r, (int, float)) and r > 0.0):
        raise ConfigError("grid.r", f"need a positive radius, got {r!r}")

    mode = _require(doc, "mode")
    if mode not in MODES:
        raise ConfigError("mode", f"must be one of {MODES}, got {mode!r}")
    if mode in ("exact", "both") and family.kind == "perturbed_bubble":
        raise ConfigError("mode",
                          "perturbed-bubble families have no exact members; use mode 'solve'")
    boundary = doc.get("boundary", "exact-trace")
    if boundary != "exact-trace" and not (
            isinstance(boundary, dict) and set(boundary) == {"constant"}
            and isinstance(boundary.get("constant"), (int, float))):
        raise ConfigError("boundary",
                          "must be 'exact-trace' or {\"constant\": value}")

    diags = doc.get("diagnostics", ["quantization"])
    if not isinstance(diags, list) or not diags:
        raise ConfigError("diagnostics", "must be a non-empty list of names")
    for dname in diags:
        if dname not in DIAGNOSTIC_NAMES:
            raise ConfigError("diagnostics",
                              f"unknown diagnostic {dname!r}; known: {DIAGNOSTIC_NAMES}")

    deltas_doc = doc.get("deltas", {"start": float(r), "levels": 10, "ratio": 0.5})
    try:
        deltas = DeltaGridSpec(float(_require(deltas_doc, "start", "deltas.")),
                               _require(deltas_doc, "levels", "deltas."),
                               float(_require(deltas_doc, "ratio", "deltas.")))
    except (TypeError, ValueError) as ex:
        if isinstance(ex, ConfigError):
            raise
        raise ConfigError("deltas", str(ex)) from ex

    tol_doc = doc.get("tolerances", {})
    if not isinstance(tol_doc, dict):
        raise ConfigError("tolerances", "must be an object")
    tols = dict(_TOL_DEFAULTS)
    for k, v in tol_doc.items():
        if k not in _TOL_KEYS:
            raise ConfigError(f"tolerances.{k}", "unknown tolerance")
        if not (isinstance(v, (int, float)) and 0.0 < v < 1.0):
            raise ConfigError(f"tolerances.{k}", f"must be in (0,1), got {v!r}")
        tols[k] = float(v)

    out = doc.get("out", ".")
    if not isinstance(out, str) or not out:
        raise ConfigError("out", "must be a non-empty path string")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", f"must be a nonnegative integer, got {seed!r}")

    sweep = doc.get("sweep", {})
    if sweep:
        if not (isinstance(sweep, dict) and set(sweep) == {"param", "values"}):
            raise ConfigError("sweep", "must be {\"param\": name, \"values\": [...]}")
        if sweep["param"] not in ("lam0", "alpha", "grid_n"):
            raise ConfigError("sweep.param",
                              f"sweepable: lam0, alpha, grid_n; got {sweep['param']!r}")
        if not isinstance(sweep["values"], list):
            raise ConfigError("sweep.values", "must be a list")

    return ExperimentConfig(family, n, float(r), mode, tuple(diags), deltas,
                            tols, out, seed, boundary, dict(sweep))


def read_config_doc(path):
    """Raw config dict from disk.  Unreadable files raise OSError (an I/O
    problem, not a validation one); malformed JSON raises ConfigError."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as ex:
            raise ConfigError("config", f"not valid JSON ({ex})") from ex


def load_config(path):
    return parse_config(read_config_doc(path))
