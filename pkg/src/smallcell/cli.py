"""Experiment orchestration: figure-data sweeps, cross-validation, one-shot evaluators.

Subcommands
-----------
fig2      coverage vs serving order and SIR threshold (analytic + MC columns)
fig3      coverage vs serving order for BS/blockage intensity combinations
fig4      azimuth-averaged LoS probability vs distance
fig5      average rate over a BS-intensity x blockage-intensity grid
validate  analytic-vs-MC cross-validation suite; nonzero exit on failure
coverage  one coverage value
rate      one average-rate value with association components
assoc     association distribution
los       LoS probability at one point

Configuration is a JSON document with a flat "params" object (NetworkParams
field names; keys with a "_db" suffix are converted from decibels once, at
this boundary) plus optional "sweep" lists per figure. Command-line flags
override file values. Output is CSV with a '#' metadata header carrying the
seed and a digest of the effective config, so a figure can be reproduced
from the file alone; reruns at a fixed seed are byte-identical regardless of
the worker count (set via the SMALLCELL_WORKERS environment variable).

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (
    LaplaceMode,
    ModelError,
    association_distribution,
    association_probability,
    average_rate,
    conditional_rate,
    coverage_probabilities,
    coverage_probability,
    laplace_interference,
)
from .geometry import ParameterError
from .pathloss import (
    NetworkParams,
    default_params,
    expected_blockage_count,
    los_probability,
    mean_los_probability,
)
from .simulate import (
    WORKERS_ENV,
    AssociationRule,
    BlockageMode,
    TrialConfig,
    estimate_association,
    estimate_coverage,
    estimate_laplace,
    estimate_rate,
    link_blockage_stats,
    resolve_workers,
    sample_sir_forced_k,
)

_PARAM_FIELDS = (
    "bs_intensity",
    "blockage_intensity",
    "blockage_length",
    "blockage_width",
    "blockage_orientation",
    "alpha_los",
    "alpha_nlos",
    "tx_power",
    "sir_threshold",
)

_MODES = {"exact": LaplaceMode.EXACT_ANGULAR, "bound": LaplaceMode.BESSEL_BOUND}
_BLOCKAGE = {"geometric": BlockageMode.GEOMETRIC, "probabilistic": BlockageMode.PROBABILISTIC}
_ASSOC = {
    "table1": AssociationRule.TABLE1,
    "argmax": AssociationRule.ARGMAX_NO_FADING,
    "argmax_fading": AssociationRule.ARGMAX_WITH_FADING,
}


class ConfigError(ValueError):
    pass


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass
class ExperimentConfig:
    params: NetworkParams
    seed: int = 1
    trials: int = 100_000
    mode: LaplaceMode = LaplaceMode.EXACT_ANGULAR
    blockage: BlockageMode = BlockageMode.PROBABILISTIC
    association: AssociationRule = AssociationRule.TABLE1
    region_radius: float | None = None
    k_max: int = 5
    mc_samples: int = 200_000
    sweep: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "params": {name: getattr(self.params, name) for name in _PARAM_FIELDS},
            "seed": self.seed,
            "trials": self.trials,
            "mode": self.mode.value,
            "blockage": self.blockage.value,
            "association": self.association.value,
            "region_radius": self.region_radius,
            "k_max": self.k_max,
            "mc_samples": self.mc_samples,
            "sweep": self.sweep,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _params_from_dict(raw: dict) -> NetworkParams:
    known = dict(raw)
    resolved = {}
    for key in list(known):
        if key.endswith("_db"):
            base = key[: -len("_db")]
            if base not in _PARAM_FIELDS:
                raise ConfigError(f"unknown parameter {key!r}")
            resolved[base] = db_to_linear(float(known.pop(key)))
    for key, value in known.items():
        if key not in _PARAM_FIELDS:
            raise ConfigError(f"unknown parameter {key!r}")
        if key in resolved:
            raise ConfigError(f"parameter {key!r} given both linear and in dB")
        resolved[key] = float(value)
    try:
        return default_params(**resolved)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | None, overrides: argparse.Namespace | None = None) -> ExperimentConfig:
    doc: dict = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
    params = _params_from_dict(doc.get("params", {}))
    cfg = ExperimentConfig(
        params=params,
        seed=int(doc.get("seed", 1)),
        trials=int(doc.get("trials", 100_000)),
        mode=_parse_choice(doc.get("mode", "exact"), _MODES, "mode"),
        blockage=_parse_choice(doc.get("blockage", "probabilistic"), _BLOCKAGE, "blockage"),
        association=_parse_choice(doc.get("association", "table1"), _ASSOC, "association"),
        region_radius=(None if doc.get("region_radius") is None else float(doc["region_radius"])),
        k_max=int(doc.get("k_max", 5)),
        mc_samples=int(doc.get("mc_samples", 200_000)),
        sweep=dict(doc.get("sweep", {})),
    )
    if overrides is not None:
        cfg = _apply_overrides(cfg, overrides)
    if cfg.trials < 1:
        raise ConfigError("trials must be at least 1")
    return cfg


def _parse_choice(value, table: dict, what: str):
    if isinstance(value, str) and value in table:
        return table[value]
    raise ConfigError(f"invalid {what} {value!r}; expected one of {sorted(table)}")


def _apply_overrides(cfg: ExperimentConfig, ns: argparse.Namespace) -> ExperimentConfig:
    if getattr(ns, "seed", None) is not None:
        cfg.seed = ns.seed
    if getattr(ns, "trials", None) is not None:
        cfg.trials = ns.trials
    if getattr(ns, "mode", None) is not None:
        cfg.mode = _parse_choice(ns.mode, _MODES, "mode")
    if getattr(ns, "blockage", None) is not None:
        cfg.blockage = _parse_choice(ns.blockage, _BLOCKAGE, "blockage")
    if getattr(ns, "assoc", None) is not None:
        cfg.association = _parse_choice(ns.assoc, _ASSOC, "assoc")
    return cfg


# --- CSV emission ---------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return ""
        return format(float(x), ".12g")
    return str(x)


def emit_csv(cfg: ExperimentConfig, name: str, header: list[str], rows: list[tuple]) -> str:
    lines = [
        f"# smallcell {__version__} {name}",
        f"# seed={cfg.seed} trials={cfg.trials} mode={cfg.mode.value}"
        f" blockage={cfg.blockage.value} association={cfg.association.value}",
        f"# config_digest=sha256:{cfg.digest()}",
        ",".join(header),
    ]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- figure sweeps ----------------------------------------------------------------

def run_fig2(cfg: ExperimentConfig, workers: int | None = None) -> str:
    """Coverage vs serving order k and threshold, analytic and forced-k MC."""
    ks = [int(k) for k in cfg.sweep.get("k", [1, 2, 3, 4, 5])]
    t_db = [float(t) for t in cfg.sweep.get("sir_threshold_db", np.arange(-10.0, 10.1, 2.5))]
    thresholds = np.array([db_to_linear(t) for t in t_db])
    rows = []
    for k in ks:
        analytic = coverage_probabilities(k, thresholds, cfg.params, cfg.mode)
        sirs = sample_sir_forced_k(
            cfg.params, k, cfg.trials, cfg.seed, cfg.blockage,
            region_radius=cfg.region_radius, workers=workers,
        )
        for t_dB, t_lin, cov in zip(t_db, thresholds, analytic):
            p_mc = float((sirs > t_lin).mean())
            hw = 1.96 * math.sqrt(max(p_mc * (1 - p_mc), 0.0) / sirs.size)
            status = "ok" if cov.converged else "flagged"
            rows.append((k, t_dB, cov.probability, p_mc, hw, status))
    return emit_csv(cfg, "fig2", ["k", "T_dB", "p_analytic", "p_mc", "mc_halfwidth", "status"], rows)


def run_fig3(cfg: ExperimentConfig, workers: int | None = None) -> str:
    """Coverage vs k for BS/blockage intensity combinations at the default threshold."""
    lam_b = [float(x) for x in cfg.sweep.get(
        "bs_intensity", [1.0 / (800.0**2 * math.pi), 1.0 / (200.0**2 * math.pi)]
    )]
    lam_c = [float(x) for x in cfg.sweep.get("blockage_intensity", [0.0002, 0.002])]
    ks = [int(k) for k in cfg.sweep.get("k", [1, 2, 3, 4, 5])]
    t = cfg.params.sir_threshold
    rows = []
    for lb in lam_b:
        for lc in lam_c:
            params = default_params(
                bs_intensity=lb,
                blockage_intensity=lc,
                blockage_length=cfg.params.blockage_length,
                blockage_width=cfg.params.blockage_width,
                blockage_orientation=cfg.params.blockage_orientation,
                alpha_los=cfg.params.alpha_los,
                alpha_nlos=cfg.params.alpha_nlos,
                tx_power=cfg.params.tx_power,
                sir_threshold=cfg.params.sir_threshold,
            )
            for k in ks:
                cov = coverage_probability(k, t, params, cfg.mode)
                sirs = sample_sir_forced_k(
                    params, k, cfg.trials, cfg.seed, cfg.blockage, workers=workers
                )
                p_mc = float((sirs > t).mean())
                hw = 1.96 * math.sqrt(max(p_mc * (1 - p_mc), 0.0) / sirs.size)
                rows.append(
                    (lb, lc, k, cov.probability, p_mc, hw, "ok" if cov.converged else "flagged")
                )
    return emit_csv(
        cfg,
        "fig3",
        ["bs_intensity", "blockage_intensity", "k", "p_analytic", "p_mc", "mc_halfwidth", "status"],
        rows,
    )


def run_fig4(cfg: ExperimentConfig, workers: int | None = None) -> str:
    """Azimuth-averaged LoS probability vs link distance."""
    lam_c = [float(x) for x in cfg.sweep.get("blockage_intensity", [0.0005, 0.001, 0.002])]
    r_grid = np.asarray(cfg.sweep.get("r", np.arange(0.0, 1000.1, 25.0)), dtype=float)
    rows = []
    for lc in lam_c:
        params = default_params(blockage_intensity=lc)
        vals = mean_los_probability(r_grid, params)
        for r, v in zip(r_grid, np.atleast_1d(vals)):
            rows.append((lc, r, v))
    return emit_csv(cfg, "fig4", ["blockage_intensity", "r_m", "p_los"], rows)


def _fig5_grids(cfg: ExperimentConfig):
    lam_b = cfg.sweep.get("bs_intensity")
    lam_c = cfg.sweep.get("blockage_intensity")
    if lam_b is None:
        lam_b = np.geomspace(1.0 / (800.0**2 * math.pi), 1.2e-3, 8)
    if lam_c is None:
        lam_c = np.geomspace(1e-4, 2e-3, 8)
    return np.asarray(lam_b, dtype=float), np.asarray(lam_c, dtype=float)


def _fig5_cell(args):
    (lb, lc, base, mode, k_max, mc_samples, seed, trials, rate_tol) = args
    try:
        params = default_params(
            bs_intensity=lb,
            blockage_intensity=lc,
            alpha_los=base.alpha_los,
            alpha_nlos=base.alpha_nlos,
            blockage_length=base.blockage_length,
            blockage_width=base.blockage_width,
            sir_threshold=base.sir_threshold,
        )
        rate = average_rate(
            params, k_max=k_max, mode=mode, mc_samples=mc_samples, seed=seed, rate_tol=rate_tol
        )
    except ModelError:
        return (lb, lc, float("nan"), float("nan"), float("nan"), "rejected")
    mc_cfg = TrialConfig(params=params, trials=trials, master_seed=seed)
    mc_rate, mc_hw = estimate_rate(mc_cfg)
    status = "ok" if rate.converged else "flagged"
    if rate.tail_warning:
        status = "tail_warning"
    return (lb, lc, rate.value, mc_rate, mc_hw, status)


def run_fig5(cfg: ExperimentConfig, workers: int | None = None, rate_tol: float = 1e-3) -> str:
    """Average rate over the intensity grid, analytic and end-to-end MC."""
    lam_b, lam_c = _fig5_grids(cfg)
    jobs = [
        (lb, lc, cfg.params, cfg.mode, cfg.k_max, cfg.mc_samples, cfg.seed, cfg.trials, rate_tol)
        for lb in lam_b
        for lc in lam_c
    ]
    n_workers = resolve_workers(workers)
    if n_workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_fig5_cell, jobs))
    else:
        rows = [_fig5_cell(j) for j in jobs]
    return emit_csv(
        cfg,
        "fig5",
        ["bs_intensity", "blockage_intensity", "rate_analytic", "rate_mc", "mc_halfwidth", "status"],
        rows,
    )


# --- cross-validation suite ---------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    note: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        out = f"{verdict} {self.name}: measured={_fmt(self.measured)} tolerance={_fmt(self.tolerance)}"
        if self.note:
            out += f" ({self.note})"
        return out


def _check_los_law(cfg: ExperimentConfig, n_pairs: int, draws: int) -> list[CheckResult]:
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x105)))
    results = []
    worst_f, worst_c = 0.0, 0.0
    ok_f, ok_c = True, True
    for i in range(n_pairs):
        r = float(10.0 + 990.0 * rng.random())
        theta = float(2.0 * math.pi * rng.random())
        counts = link_blockage_stats(r, theta, cfg.params, draws, master_seed=cfg.seed + i)
        p_hat = float((counts == 0).mean())
        p_true = float(los_probability(r, theta, cfg.params))
        # +3/n keeps the test exact-Poisson-fair when the expected LoS count
        # over all draws is small (a single chance event is not a violation)
        tol_p = 3.0 * math.sqrt(p_true * (1 - p_true) / draws) + 3.0 / draws
        z_p = abs(p_hat - p_true) / tol_p
        mean_hat = float(counts.mean())
        mean_true = float(expected_blockage_count(r, theta, cfg.params))
        tol_m = 3.0 * math.sqrt(mean_true / draws) + 3.0 / draws
        z_m = abs(mean_hat - mean_true) / tol_m
        worst_f, worst_c = max(worst_f, z_p), max(worst_c, z_m)
        ok_f &= z_p <= 1.0
        ok_c &= z_m <= 1.0
    results.append(
        CheckResult("los_frequency_vs_formula", ok_f, worst_f, 1.0, "worst |err|/(3se+3/n)")
    )
    results.append(
        CheckResult("blockage_count_mean_vs_formula", ok_c, worst_c, 1.0, "worst |err|/(3se+3/n)")
    )
    return results


def _check_laplace(cfg: ExperimentConfig) -> list[CheckResult]:
    t = cfg.params.sir_threshold
    worst = 0.0
    ok = True
    bound_ok = True
    for r_k in (200.0, 400.0):
        for s in (t * r_k**cfg.params.alpha_los, t * r_k**cfg.params.alpha_nlos):
            ana = laplace_interference(s, r_k, cfg.params, LaplaceMode.EXACT_ANGULAR)
            mc, se = estimate_laplace(
                cfg.params, s, r_k, cfg.trials, cfg.seed, cfg.region_radius
            )
            # allowance for rare LoS-interferer events unseen at this trial count
            tol = 3.0 * se + 3.0 / cfg.trials
            z = abs(ana.value - mc) / tol if tol else 0.0
            worst = max(worst, z)
            ok &= z <= 1.0
            bnd = laplace_interference(s, r_k, cfg.params, LaplaceMode.BESSEL_BOUND)
            bound_ok &= bnd.value >= ana.value
    out = [CheckResult("laplace_exact_vs_mc", ok, worst, 1.0, "worst |err|/(3se+3/n)")]
    out.append(
        CheckResult(
            "laplace_bound_above_exact",
            bound_ok,
            float(bound_ok),
            1.0,
            "closed-form substitution diverges; see docs",
        )
    )
    return out


def _mixed_coverage(cfg: ExperimentConfig, k_max: int = 8) -> float:
    dist = association_distribution(cfg.params, k_max, cfg.mc_samples, cfg.seed)
    total = 0.0
    for k, p in enumerate(dist.probs, start=1):
        if p < 1e-7:
            continue
        total += p * coverage_probability(k, cfg.params.sir_threshold, cfg.params, cfg.mode).probability
    return total


def _check_coverage(cfg: ExperimentConfig, workers) -> list[CheckResult]:
    analytic = _mixed_coverage(cfg)
    sim_cfg = TrialConfig(
        params=cfg.params, trials=cfg.trials, master_seed=cfg.seed,
        blockage_mode=cfg.blockage, association=cfg.association,
        region_radius=cfg.region_radius,
    )
    est = estimate_coverage(sim_cfg, cfg.params.sir_threshold, workers=workers)
    delta = abs(analytic - est.probability)
    return [CheckResult("coverage_analytic_vs_mc", delta <= 0.02, delta, 0.02)]


def _check_association(cfg: ExperimentConfig, workers) -> list[CheckResult]:
    sim_cfg = TrialConfig(
        params=cfg.params, trials=cfg.trials, master_seed=cfg.seed,
        blockage_mode=cfg.blockage, association=AssociationRule.TABLE1,
        region_radius=cfg.region_radius,
    )
    assoc = estimate_association(sim_cfg, workers=workers)
    worst = 0.0
    ok = True
    for k in (1, 2, 3):
        est = association_probability(k, cfg.params, cfg.mc_samples, cfg.seed)
        freq = assoc.frequencies[k - 1]
        se_sim = math.sqrt(max(freq * (1 - freq), 1.0 / sim_cfg.trials) / sim_cfg.trials)
        tol = 3.0 * math.hypot(se_sim, est.standard_error)
        z = abs(est.probability - freq) / tol if tol else 0.0
        worst = max(worst, z)
        ok &= z <= 1.0
    dist = association_distribution(cfg.params, 5, cfg.mc_samples, cfg.seed)
    total = sum(dist.probs) + max(dist.tail_mass, 0.0)
    sum_ok = abs(total - 1.0) <= 0.005
    return [
        CheckResult("association_analytic_vs_mc", ok, worst, 1.0, "worst |err|/3se"),
        CheckResult("association_mass_sums_to_one", sum_ok, total, 0.005, "sum + tail"),
    ]


def _check_rate(cfg: ExperimentConfig, workers) -> list[CheckResult]:
    ccdf = conditional_rate(1, cfg.params, cfg.mode, "ccdf")
    pdf = conditional_rate(1, cfg.params, cfg.mode, "pdf")
    rel = abs(ccdf.value - pdf.value) / abs(ccdf.value)
    dual = CheckResult("rate_dual_path", rel <= 0.01, rel, 0.01, "relative")
    analytic = average_rate(
        cfg.params, cfg.k_max, cfg.mode, cfg.mc_samples, cfg.seed, rate_tol=1e-4
    )
    sim_cfg = TrialConfig(
        params=cfg.params, trials=cfg.trials, master_seed=cfg.seed,
        blockage_mode=cfg.blockage, association=cfg.association,
        region_radius=cfg.region_radius,
    )
    mc, _hw = estimate_rate(sim_cfg, workers=workers)
    rel2 = abs(analytic.value - mc) / abs(mc)
    return [dual, CheckResult("rate_analytic_vs_mc", rel2 <= 0.03, rel2, 0.03, "relative")]


def _check_closed_form(cfg: ExperimentConfig) -> list[CheckResult]:
    params = default_params(blockage_intensity=1e3, alpha_nlos=4.0)
    cov = coverage_probability(1, 1.0, params)
    target = 1.0 / (1.0 + math.pi / 4.0)
    delta = abs(cov.probability - target)
    return [CheckResult("all_nlos_closed_form", delta <= 0.01, delta, 0.01)]


def _check_all_los_association(cfg: ExperimentConfig) -> list[CheckResult]:
    params = default_params(blockage_intensity=0.0, alpha_los=3.0)
    sim_cfg = TrialConfig(
        params=params, trials=min(cfg.trials, 20_000), master_seed=cfg.seed
    )
    assoc = estimate_association(sim_cfg)
    freq1 = float(assoc.frequencies[0])
    return [CheckResult("all_los_nearest_association", freq1 == 1.0, freq1, 1.0)]


def run_validate(cfg: ExperimentConfig, workers: int | None = None) -> tuple[str, bool]:
    checks: list[CheckResult] = []
    checks += _check_los_law(cfg, n_pairs=6, draws=min(cfg.trials, 100_000))
    checks += _check_laplace(cfg)
    checks += _check_coverage(cfg, workers)
    checks += _check_association(cfg, workers)
    checks += _check_rate(cfg, workers)
    checks += _check_closed_form(cfg)
    checks += _check_all_los_association(cfg)
    ok = all(c.passed for c in checks)
    lines = [
        f"# smallcell {__version__} validate",
        f"# seed={cfg.seed} trials={cfg.trials} config_digest=sha256:{cfg.digest()}",
    ]
    lines += [c.line() for c in checks]
    lines.append(f"{'OK' if ok else 'FAILED'} ({sum(c.passed for c in checks)}/{len(checks)} checks passed)")
    return "\n".join(lines) + "\n", ok


# --- single-point evaluators ----------------------------------------------------------

def run_coverage_point(cfg: ExperimentConfig, k: int, threshold: float) -> str:
    cov = coverage_probability(k, threshold, cfg.params, cfg.mode)
    header = ["k", "threshold_linear", "probability", "converged"]
    return emit_csv(cfg, "coverage", header, [(k, threshold, cov.probability, cov.converged)])


def run_rate_point(cfg: ExperimentConfig) -> str:
    rate = average_rate(cfg.params, cfg.k_max, cfg.mode, cfg.mc_samples, cfg.seed)
    rows = [("total", float("nan"), rate.value, rate.tail_mass, rate.converged)]
    for k, p, r in rate.components:
        rows.append((f"k={k}", p, r, float("nan"), ""))
    header = ["component", "association_probability", "rate_bps_hz", "tail_mass", "converged"]
    return emit_csv(cfg, "rate", header, rows)


def run_assoc_point(cfg: ExperimentConfig) -> str:
    dist = association_distribution(cfg.params, cfg.k_max, cfg.mc_samples, cfg.seed)
    rows = [
        (k + 1, p, se)
        for k, (p, se) in enumerate(zip(dist.probs, dist.standard_errors))
    ]
    rows.append(("tail", dist.tail_mass, float("nan")))
    return emit_csv(cfg, "assoc", ["k", "probability", "standard_error"], rows)


def run_los_point(cfg: ExperimentConfig, r: float, theta: float | None) -> str:
    if theta is None:
        val = float(np.atleast_1d(mean_los_probability(r, cfg.params))[0])
        rows = [(r, "azimuth_mean", val)]
    else:
        rows = [(r, theta, float(los_probability(r, theta, cfg.params)))]
    return emit_csv(cfg, "los", ["r_m", "theta", "p_los"], rows)


# --- entry point ------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smallcell",
        description="Coverage and rate analysis of blockage-limited small-cell networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("fig2", "fig3", "fig4", "fig5", "validate", "coverage", "rate", "assoc", "los"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--mode", choices=sorted(_MODES), default=None)
        p.add_argument("--blockage", choices=sorted(_BLOCKAGE), default=None)
        p.add_argument("--assoc", choices=sorted(_ASSOC), default=None)
        p.add_argument("--workers", type=int, default=None,
                       help=f"worker processes (default: ${WORKERS_ENV} or CPU count)")
        if name == "coverage":
            p.add_argument("--k", type=int, default=1)
            p.add_argument("--threshold-db", type=float, default=None)
        if name == "los":
            p.add_argument("--r", type=float, required=True)
            p.add_argument("--theta", type=float, default=None)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = load_config(ns.config, ns)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    workers = ns.workers
    try:
        if ns.command == "fig2":
            _write(run_fig2(cfg, workers), ns.out)
        elif ns.command == "fig3":
            _write(run_fig3(cfg, workers), ns.out)
        elif ns.command == "fig4":
            _write(run_fig4(cfg, workers), ns.out)
        elif ns.command == "fig5":
            _write(run_fig5(cfg, workers), ns.out)
        elif ns.command == "validate":
            report, ok = run_validate(cfg, workers)
            _write(report, ns.out)
            return 0 if ok else 1
        elif ns.command == "coverage":
            threshold = (
                db_to_linear(ns.threshold_db)
                if ns.threshold_db is not None
                else cfg.params.sir_threshold
            )
            _write(run_coverage_point(cfg, ns.k, threshold), ns.out)
        elif ns.command == "rate":
            _write(run_rate_point(cfg), ns.out)
        elif ns.command == "assoc":
            _write(run_assoc_point(cfg), ns.out)
        elif ns.command == "los":
            _write(run_los_point(cfg, ns.r, ns.theta), ns.out)
    except (ParameterError, ModelError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
