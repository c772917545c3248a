"""Monte Carlo pipelines: degree counts, connectivity and lemma ladders.

Every replication's randomness comes from hash64(master_seed, s_index, rep),
results are gathered in (s index, replication) order before anything is
written, and floats are printed with 17 significant digits, so the output
files are a pure function of the ExperimentSpec.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats

from . import analytics
from .errors import ConfigError, InvalidArgument
from .graph_stats import degree_summary, is_connected, one_hop_cover_check
from .model import ModelParams
from .rng import hash64
from .sampler import sample_configuration, sample_graph

log = logging.getLogger(__name__)

MODES = ("degrees", "connectivity", "lemma-ladder")
DEFAULT_MASTER_SEED = 12345

SUMMARY_FILE = "summary.csv"
REPLICATIONS_FILE = "replications.jsonl"

DEGREE_COLUMNS = (
    "s_index", "s", "k", "xi", "r_s", "replications", "mean_n", "nu", "mean_Dk", "se_mean",
    "mean_ci_low", "mean_ci_high", "mean_z", "mean_within_4se", "tv_nu", "tv_nu_se",
    "tv_limit", "tv_limit_se", "limit_mean", "regime_ok", "pmf",
)
CONNECTIVITY_COLUMNS = (
    "s_index", "s", "gamma_index", "gamma_label", "gamma", "kappa", "rho", "r_hat", "cover_b",
    "cover_radius", "replications", "mean_n",
    "connected_frac", "connected_ci_low", "connected_ci_high",
    "no_isolated_frac", "no_isolated_ci_low", "no_isolated_ci_high",
    "one_hop_frac", "one_hop_ci_low", "one_hop_ci_high",
)
LADDER_COLUMNS = ("s_index", "s", "lemma", "k", "xi", "j", "m", "value", "limit", "normalized", "abs_gap")


class PersistenceError(OSError):
    pass


# --- experiment spec and config ------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    params: ModelParams
    mode: str
    s_list: tuple
    replications: int = 1
    master_seed: int = DEFAULT_MASTER_SEED
    out_dir: str | None = None
    k: int = 0
    xi: float = 0.0
    gamma_list: tuple = ()
    threads: int = 1
    truncate_radius: float | None = None
    accept_bias: bool = False
    record_wall_time: bool = False
    lemma: str = "L1"
    j: int = 1
    m: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.s_list:
            raise ConfigError("s_list must not be empty")
        for s in self.s_list:
            if not s > math.e:
                raise ConfigError(f"every s must exceed e, got {s}")
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if self.k < 0:
            raise ConfigError(f"k must be >= 0, got {self.k}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.mode == "connectivity" and not self.gamma_list:
            raise ConfigError("connectivity mode needs gamma_list")
        if self.truncate_radius is not None and not self.accept_bias:
            raise ConfigError("truncate_radius biases the graph; set accept_bias = true to use it")
        if self.mode == "lemma-ladder" and self.lemma not in analytics.LEMMAS:
            raise ConfigError(f"lemma must be one of {analytics.LEMMAS}, got {self.lemma!r}")


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(x) for x in str(text).replace(",", " ").split())


def _gammas(text):
    return tuple(x.strip() for x in str(text).replace(",", " ").split())


def _opt_float(text):
    return None if str(text).strip().lower() in ("", "none") else float(text)


CONFIG_KEYS = {
    "d": int, "alpha": float, "beta": float, "eta": float, "paper_literal_c0": _bool,
    "mode": str, "k": int, "xi": float, "s_list": _floats, "gamma_list": _gammas,
    "replications": int, "master_seed": int, "out_dir": str, "threads": int,
    "truncate_radius": _opt_float, "accept_bias": _bool, "record_wall_time": _bool,
    "lemma": str, "j": int, "m": int,
}

REQUIRED = {
    "degrees": ("d", "alpha", "beta", "s_list", "k", "xi", "replications"),
    "connectivity": ("d", "alpha", "beta", "s_list", "gamma_list", "replications"),
    "lemma-ladder": ("d", "alpha", "beta", "s_list", "lemma", "k", "xi"),
}


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def spec_from_mapping(raw: dict, mode: str | None = None) -> ExperimentSpec:
    """Build an ExperimentSpec from string (or already typed) values; ``mode`` overrides raw['mode']."""
    raw = {k: v for k, v in raw.items() if v is not None}
    mode = mode or raw.get("mode")
    if mode is None:
        raise ConfigError("missing required key 'mode'")
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    for key in REQUIRED[mode]:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    typed = {}
    for key, value in raw.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            typed[key] = CONFIG_KEYS[key](value) if isinstance(value, str) else value
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    try:
        params = ModelParams(typed.pop("d"), typed.pop("alpha"), typed.pop("beta"),
                             typed.pop("eta", 1.0), typed.pop("paper_literal_c0", False))
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from None
    typed.pop("mode", None)
    if "s_list" in typed:
        typed["s_list"] = tuple(typed["s_list"])
    if "gamma_list" in typed:
        typed["gamma_list"] = tuple(typed["gamma_list"])
    return ExperimentSpec(params=params, mode=mode, **typed)


def resolve_gamma(label, rho: float) -> float:
    """'2rho', '0.1rho', 'rho/10', 'rho' or a plain number."""
    if isinstance(label, (int, float)):
        return float(label)
    t = label.strip().lower().replace("*", "")
    try:
        if t.endswith("rho"):
            coef = t[:-3]
            return (float(coef) if coef else 1.0) * rho
        if t.startswith("rho/"):
            return rho / float(t[4:])
        return float(t)
    except ValueError:
        raise ConfigError(f"cannot read gamma value {label!r}") from None


# --- statistics ------------------------------------------------------------------

def tv_distance(p, q_mean: float) -> float:
    """Total variation between a finite pmf p on {0..M} and Poisson(q_mean).

    The Poisson mass beyond M enters exactly through its survival function.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise InvalidArgument("p must be a non-negative vector summing to 1")
    if not (q_mean >= 0 and math.isfinite(q_mean)):
        raise InvalidArgument(f"Poisson mean must be finite and >= 0, got {q_mean}")
    support = np.arange(p.size)
    q = stats.poisson.pmf(support, q_mean)
    tail = stats.poisson.sf(p.size - 1, q_mean)
    return float(min(1.0, 0.5 * np.abs(p - q).sum() + 0.5 * tail))


def tv_standard_error(p, q_mean: float, replications: int) -> float:
    """Delta-method standard error of tv_distance under multinomial sampling of p."""
    p = np.asarray(p, dtype=float)
    q = stats.poisson.pmf(np.arange(p.size), q_mean)
    g = 0.5 * np.sign(p - q)
    var = (np.dot(g * g, p) - np.dot(g, p) ** 2) / replications
    return float(math.sqrt(max(var, 0.0)))


def empirical_pmf(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return np.bincount(values) / len(values)


def wilson_interval(successes: int, trials: int, level=0.95):
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def poisson_regime_ok(params: ModelParams, k: int) -> bool:
    d, a, b = params.d, params.alpha, params.beta
    return a * b > max(2 * d, (k + 1) * d, (2 * k + 3) * (a - d))


# --- records and persistence ------------------------------------------------------

@dataclass
class ReplicationRecord:
    s: float
    s_index: int
    replication: int
    seed: int
    n: int
    degree_counts: dict = field(default_factory=dict)
    gamma: float | None = None
    gamma_index: int | None = None
    connected: bool | None = None
    no_isolated: bool | None = None
    one_hop: bool | None = None
    wall_time: float | None = None

    def to_json(self) -> str:
        rec = asdict(self)
        rec["degree_counts"] = {str(k): v for k, v in sorted(self.degree_counts.items())}
        return json.dumps(rec, default=_json_float, separators=(",", ":"))


def _json_float(x):
    raise TypeError(f"not serialisable: {type(x)}")


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


class _Writer:
    """Appends rows and records as soon as a cell is complete."""

    def __init__(self, out_dir, columns, with_replications=True):
        self.out_dir = out_dir
        self.columns = columns
        self.with_replications = with_replications
        if out_dir is None:
            return
        try:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, SUMMARY_FILE), "w", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerow(columns)
            if with_replications:
                open(os.path.join(out_dir, REPLICATIONS_FILE), "w").close()
        except OSError as exc:
            raise PersistenceError(f"cannot write to {out_dir}: {exc}") from exc

    def cell(self, row: dict, records=()):
        if self.out_dir is None:
            return
        try:
            if self.with_replications and records:
                with open(os.path.join(self.out_dir, REPLICATIONS_FILE), "a") as fh:
                    fh.writelines(r.to_json() + "\n" for r in records)
            with open(os.path.join(self.out_dir, SUMMARY_FILE), "a", newline="") as fh:
                csv.writer(fh, lineterminator="\n").writerow([fmt(row[c]) for c in self.columns])
        except OSError as exc:
            raise PersistenceError(f"cannot write to {self.out_dir}: {exc}") from exc


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def _graph(spec, config, radius, seed):
    return sample_graph(config, spec.params, radius, seed, truncate_radius=spec.truncate_radius,
                        accept_bias=spec.accept_bias)


# --- degrees ----------------------------------------------------------------------

@dataclass
class ExperimentResult:
    rows: list
    records: list

    @property
    def ok(self):
        return all(r.get("mean_within_4se", True) is not False for r in self.rows)


def _degree_oracle(spec, s):
    params = spec.params
    if params.eta == 0:
        # edgeless: D_0 = n exactly, D_k = 0 for k >= 1; the radius is immaterial
        r_s = analytics.scaling_radius(replace(params, eta=1.0), s, spec.k, spec.xi).r_s
        return r_s, (s if spec.k == 0 else 0.0)
    r_s = analytics.scaling_radius(params, s, spec.k, spec.xi).r_s
    return r_s, analytics.expected_Dk(params, s, spec.k, spec.xi)


def run_degree_experiment(spec: ExperimentSpec) -> ExperimentResult:
    params, k, xi = spec.params, spec.k, spec.xi
    regime_ok = params.eta > 0 and params.finite_degree_regime and poisson_regime_ok(params, k)
    if not regime_ok:
        warnings.warn(f"parameters {params} lie outside the Poisson-convergence regime for k={k}",
                      stacklevel=2)
    writer = _Writer(spec.out_dir, DEGREE_COLUMNS)
    rows, all_records = [], []
    for s_idx, s in enumerate(spec.s_list):
        r_s, nu = _degree_oracle(spec, s)
        log.info("degrees: s=%g r_s=%.6g nu=%.6g, %d replications", s, r_s, nu, spec.replications)

        def one(rep, s=s, s_idx=s_idx, r_s=r_s):
            t0 = time.perf_counter()
            seed = hash64(spec.master_seed, s_idx, rep)
            config = sample_configuration(params, s, seed)
            g = _graph(spec, config, r_s, seed)
            counts = degree_summary(g).counts
            wall = time.perf_counter() - t0 if spec.record_wall_time else None
            return ReplicationRecord(s, s_idx, rep, seed, config.n, counts, wall_time=wall)

        records = _map(one, range(spec.replications), spec.threads)
        dk = np.array([r.degree_counts.get(k, 0) for r in records])
        reps = len(dk)
        mean = float(dk.mean())
        se = float(dk.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
        pmf = empirical_pmf(dk)
        limit = math.exp(-xi)
        z = (mean - nu) / se if se > 0 else (0.0 if mean == nu else math.inf)
        row = {
            "s_index": s_idx, "s": float(s), "k": k, "xi": float(xi), "r_s": r_s, "replications": reps,
            "mean_n": float(np.mean([r.n for r in records])), "nu": nu, "mean_Dk": mean, "se_mean": se,
            "mean_ci_low": mean - 1.959963984540054 * se, "mean_ci_high": mean + 1.959963984540054 * se,
            "mean_z": z, "mean_within_4se": bool(abs(z) <= 4),
            "tv_nu": tv_distance(pmf, nu), "tv_nu_se": tv_standard_error(pmf, nu, reps),
            "tv_limit": tv_distance(pmf, limit), "tv_limit_se": tv_standard_error(pmf, limit, reps),
            "limit_mean": limit, "regime_ok": regime_ok,
            "pmf": "[" + ",".join("%.17g" % x for x in pmf) + "]",
        }
        if not row["mean_within_4se"]:
            log.warning("degrees: s=%g mean D_%d=%.6g is %.2f SE from nu=%.6g", s, k, mean, z, nu)
        writer.cell(row, records)
        rows.append(row)
        all_records.extend(records)
    return ExperimentResult(rows, all_records)


# --- connectivity -------------------------------------------------------------------

def run_connectivity_experiment(spec: ExperimentSpec) -> ExperimentResult:
    params = spec.params
    kappa = analytics.kappa_constant(params)
    rho = analytics.rho_root(params, kappa)
    gammas = [resolve_gamma(g, rho) for g in spec.gamma_list]
    for g in gammas:
        if not g > 0:
            raise ConfigError(f"gamma values must be positive, got {g}")
    writer = _Writer(spec.out_dir, CONNECTIVITY_COLUMNS)
    rows, all_records = [], []
    for s_idx, s in enumerate(spec.s_list):
        for g_idx, (label, gamma_) in enumerate(zip(spec.gamma_list, gammas)):
            r_hat = analytics.hat_radius(params, kappa, s, gamma_)
            b = analytics.cover_factor(params, kappa, gamma_)
            cover = analytics.tilde_radius(params, s, b)
            log.info("connectivity: s=%g gamma=%s (%.6g) r_hat=%.6g", s, label, gamma_, r_hat)

            # the same seed per (s, rep) across gammas couples the graphs
            def one(rep, s=s, s_idx=s_idx, g_idx=g_idx, gamma_=gamma_, r_hat=r_hat, cover=cover):
                t0 = time.perf_counter()
                seed = hash64(spec.master_seed, s_idx, rep)
                config = sample_configuration(params, s, seed)
                g = _graph(spec, config, r_hat, seed)
                wall = time.perf_counter() - t0 if spec.record_wall_time else None
                return ReplicationRecord(
                    s, s_idx, rep, seed, config.n, degree_summary(g).counts, gamma=gamma_, gamma_index=g_idx,
                    connected=is_connected(g), no_isolated=bool(g.n <= 1 or not np.any(g.degrees == 0)),
                    one_hop=one_hop_cover_check(g, config, cover), wall_time=wall,
                )

            records = _map(one, range(spec.replications), spec.threads)
            reps = len(records)
            row = {
                "s_index": s_idx, "s": float(s), "gamma_index": g_idx, "gamma_label": str(label),
                "gamma": gamma_, "kappa": kappa, "rho": rho, "r_hat": r_hat, "cover_b": b,
                "cover_radius": cover, "replications": reps,
                "mean_n": float(np.mean([r.n for r in records])),
            }
            for name in ("connected", "no_isolated", "one_hop"):
                hits = sum(bool(getattr(r, name)) for r in records)
                row[f"{name}_frac"] = hits / reps
                row[f"{name}_ci_low"], row[f"{name}_ci_high"] = wilson_interval(hits, reps)
            writer.cell(row, records)
            rows.append(row)
            all_records.extend(records)
    return ExperimentResult(rows, all_records)


# --- lemma ladder ---------------------------------------------------------------------

def run_lemma_ladder(spec: ExperimentSpec) -> ExperimentResult:
    params = spec.params
    writer = _Writer(spec.out_dir, LADDER_COLUMNS, with_replications=False)
    rows = []
    for s_idx, s in enumerate(spec.s_list):
        value = analytics.lemma_value(spec.lemma, params, s, spec.k, spec.xi, spec.j, spec.m)
        limit = analytics.lemma_limit(spec.lemma, params, s, spec.xi, spec.j)
        row = {"s_index": s_idx, "s": float(s), "lemma": spec.lemma, "k": spec.k, "xi": float(spec.xi),
               "j": spec.j, "m": spec.m, "value": value, "limit": limit, "normalized": value / limit,
               "abs_gap": abs(value / limit - 1.0)}
        writer.cell(row)
        rows.append(row)
    return ExperimentResult(rows, [])


RUNNERS = {
    "degrees": run_degree_experiment,
    "connectivity": run_connectivity_experiment,
    "lemma-ladder": run_lemma_ladder,
}


def run(spec: ExperimentSpec) -> ExperimentResult:
    return RUNNERS[spec.mode](spec)
