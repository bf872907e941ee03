"""Finite-sample regret interval estimation.

Cross-fitting: nuisances are fit on the out-of-fold sample and the
uncertainty set is estimated on the held-in fold; interval endpoints are
averaged over folds. A doubly robust variant is available for the
odds-ratio (MSM / Rosenbaum) assumptions, and percentile bootstrap CIs wrap
the full pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .assumptions import (
    BoundingFunctions,
    CausalAssumption,
    UncertaintySet,
    bounding_functions,
    map_to_uncertainty_set,
)
from .bounds import baseline_interval, delta_interval
from .core import (
    ConfigError,
    DataError,
    NumericError,
    ObservationalDataset,
    PerformanceMeasure,
    PolicyRegretError,
    RegretInterval,
)
from .nuisance import ClassifierConfig, NuisanceModels, fit_nuisances, floor_probs
from .vstats import IdentifiedVStats, estimate_identified

METHODS = ("delta", "baseline")

DR_ASSUMPTIONS = ("msm", "rosenbaum")


@dataclass(frozen=True)
class EstimationConfig:
    k_folds: int = 2
    estimator: str = "plugin"
    bootstrap_b: int = 200
    ci_level: float = 0.95
    seed: int = 0
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    jobs: int = 1
    min_group_size: int = 50

    def __post_init__(self):
        if self.k_folds < 2:
            raise ConfigError("k_folds must be >= 2")
        if self.estimator not in ("plugin", "doubly_robust"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.bootstrap_b < 0:
            raise ConfigError("bootstrap_b must be >= 0")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigError("ci_level must lie in (0, 1)")


@dataclass
class RegretReport:
    """Intervals per measure and method, with per-fold diagnostics."""

    intervals: Dict[str, Dict[str, RegretInterval]]
    diagnostics: list
    groups: Optional[Dict[str, "RegretReport"]] = None
    skipped_groups: Optional[Dict[str, str]] = None

    def interval(self, measure: PerformanceMeasure, method: str) -> RegretInterval:
        return self.intervals[measure.label][method]

    def to_dict(self) -> dict:
        out = {
            "intervals": {
                label: {method: iv.to_dict() for method, iv in methods.items()}
                for label, methods in self.intervals.items()
            },
            "diagnostics": self.diagnostics,
        }
        if self.groups is not None:
            out["groups"] = {g: rep.to_dict() for g, rep in self.groups.items()}
        if self.skipped_groups:
            out["skipped_groups"] = dict(self.skipped_groups)
        return out

    def csv_rows(self, group: str = "all") -> list:
        rows = []
        for label in sorted(self.intervals):
            for method in METHODS:
                iv = self.intervals[label][method]
                rows.append(
                    {
                        "group": group,
                        "measure": label,
                        "method": method,
                        "lower": iv.lower,
                        "upper": iv.upper,
                        "ci_lower": iv.ci_lower,
                        "ci_upper": iv.ci_upper,
                    }
                )
        if self.groups:
            for g in sorted(self.groups):
                rows.extend(self.groups[g].csv_rows(group=g))
        return rows


def _fold_indices(n: int, k: int, seed: int) -> list:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D]))
    perm = rng.permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(perm, k)]


def plugin_vstat_bound(
    fold: ObservationalDataset,
    tau: BoundingFunctions,
    e1_model,
    t: int,
) -> Tuple[float, float]:
    """Plug-in interval on v_1(t, 0) from one evaluation fold."""
    identified = estimate_identified(fold)
    uset = map_to_uncertainty_set(tau, e1_model, fold, identified)
    return uset.h10 if t == 1 else uset.h00


def dr_vstat_bound(
    fold: ObservationalDataset,
    lam: float,
    e1_model,
    mu1_model,
    t: int,
    side: str,
) -> float:
    """Doubly robust endpoint of the v_1(t,0) interval under an odds-ratio bound.

    The fold average of
        factor * pi_t(x) * [ (1 - D) * mu1(x) + D * (e0(x)/e1(x)) * (Y - mu1(x)) ]
    with factor = lam (upper) or 1/lam (lower) has bias that is a product of
    the propensity and outcome-regression errors, unlike the plug-in.
    """
    if side not in ("upper", "lower"):
        raise ConfigError(f"side must be 'upper' or 'lower', got {side!r}")
    factor = lam if side == "upper" else 1.0 / lam
    e1 = floor_probs(e1_model.predict(fold.x))
    e0 = 1.0 - e1
    mu1 = mu1_model.predict(fold.x)
    pi_t = fold.pi1 if t == 1 else 1.0 - fold.pi1
    d = fold.d.astype(float)
    y = np.where(fold.d == 1, fold.y, 0.0)
    phi = factor * pi_t * ((1.0 - d) * mu1 + d * (e0 / e1) * (y - mu1))
    rho_t0 = float(np.mean(pi_t * (1.0 - d)))
    return min(max(float(phi.mean()), 0.0), rho_t0)


def _dr_uncertainty_set(
    fold: ObservationalDataset,
    assumption: CausalAssumption,
    nuisances: NuisanceModels,
    identified: IdentifiedVStats,
) -> UncertaintySet:
    lam = assumption.lam if assumption.kind == "msm" else assumption.gamma
    intervals = {}
    for t in (0, 1):
        lo = dr_vstat_bound(fold, lam, nuisances.e1, nuisances.mu1, t, "lower")
        hi = dr_vstat_bound(fold, lam, nuisances.e1, nuisances.mu1, t, "upper")
        intervals[t] = (min(lo, hi), max(lo, hi))
    return UncertaintySet(
        h10=intervals[1],
        h00=intervals[0],
        rho10=float(identified.rho[1, 0]),
        rho00=float(identified.rho[0, 0]),
        identified=identified,
        diagnostics={"estimator": "doubly_robust"},
    )


def fold_uncertainty_set(
    train: ObservationalDataset,
    test: ObservationalDataset,
    assumption: CausalAssumption,
    config: EstimationConfig,
) -> UncertaintySet:
    """Fit nuisances on `train` and estimate the uncertainty set on `test`."""
    nuisances = fit_nuisances(train, assumption, config.classifier)
    identified = estimate_identified(test)
    if config.estimator == "doubly_robust":
        if assumption.kind not in DR_ASSUMPTIONS:
            raise ConfigError(
                "doubly_robust estimation is only defined for msm/rosenbaum "
                f"assumptions, not {assumption.kind!r}"
            )
        uset = _dr_uncertainty_set(test, assumption, nuisances, identified)
    else:
        tau = bounding_functions(assumption, nuisances, test)
        uset = map_to_uncertainty_set(tau, nuisances.e1, test, identified)
    if nuisances.dropped_levels:
        uset.diagnostics["dropped_levels"] = list(nuisances.dropped_levels)
    return uset


def cross_fit_regret(
    data: ObservationalDataset,
    measures: Sequence[PerformanceMeasure],
    assumption: CausalAssumption,
    config: EstimationConfig,
    with_bootstrap: Optional[bool] = None,
) -> RegretReport:
    """Cross-fitted delta and baseline regret intervals for each measure."""
    if not measures:
        raise ConfigError("measure list is empty")
    if data.n < 2 * config.k_folds:
        raise DataError(
            f"n = {data.n} too small for k_folds = {config.k_folds}"
        )
    folds = _fold_indices(data.n, config.k_folds, config.seed)
    endpoints = {m.label: {meth: [] for meth in METHODS} for m in measures}
    diagnostics = []
    for k, test_idx in enumerate(folds):
        mask = np.zeros(data.n, dtype=bool)
        mask[test_idx] = True
        train = data.subset(np.flatnonzero(~mask))
        test = data.subset(test_idx)
        try:
            uset = fold_uncertainty_set(train, test, assumption, config)
            fold_diag = {"fold": k, **uset.diagnostics, "h10": list(uset.h10), "h00": list(uset.h00)}
            for m in measures:
                d_iv = delta_interval(uset, m)
                b_iv = baseline_interval(uset, m)
                endpoints[m.label]["delta"].append((d_iv.lower, d_iv.upper))
                endpoints[m.label]["baseline"].append((b_iv.lower, b_iv.upper))
        except PolicyRegretError as exc:
            raise type(exc)(f"fold {k}: {exc}") from exc
        diagnostics.append(fold_diag)

    intervals = {}
    for m in measures:
        intervals[m.label] = {}
        for meth in METHODS:
            pts = np.asarray(endpoints[m.label][meth])
            intervals[m.label][meth] = RegretInterval(
                lower=float(pts[:, 0].mean()),
                upper=float(pts[:, 1].mean()),
                method=meth,
                measure=m,
            )
    report = RegretReport(intervals=intervals, diagnostics=diagnostics)

    if with_bootstrap is None:
        with_bootstrap = config.bootstrap_b > 0
    if with_bootstrap and config.bootstrap_b > 0:
        cis = bootstrap_ci(data, measures, assumption, config)
        for m in measures:
            for meth in METHODS:
                iv = report.intervals[m.label][meth]
                lo_ci, hi_ci = cis[(m.label, meth)]
                report.intervals[m.label][meth] = replace(
                    iv, ci_lower=lo_ci, ci_upper=hi_ci
                )
    return report


def _bootstrap_replicate(data, measures, assumption, config, seed_seq):
    rng = np.random.default_rng(seed_seq)
    idx = rng.integers(0, data.n, data.n)
    rep_seed = int(seed_seq.generate_state(1)[0] % (2**31))
    rep_config = replace(config, seed=rep_seed, bootstrap_b=0)
    try:
        report = cross_fit_regret(
            data.subset(idx), measures, assumption, rep_config, with_bootstrap=False
        )
    except PolicyRegretError as exc:
        return ("error", str(exc))
    out = {}
    for m in measures:
        for meth in METHODS:
            iv = report.intervals[m.label][meth]
            out[(m.label, meth)] = (iv.lower, iv.upper)
    return ("ok", out)


def bootstrap_ci(
    data: ObservationalDataset,
    measures: Sequence[PerformanceMeasure],
    assumption: CausalAssumption,
    config: EstimationConfig,
) -> Dict[Tuple[str, str], Tuple[float, float]]:
    """Percentile CIs for the lower and upper interval endpoints.

    Each replicate row-resamples the data and re-runs the full cross-fit
    pipeline (nuisances refit, fold assignment re-randomized). Results are
    independent of the worker count.
    """
    if config.bootstrap_b < 1:
        raise ConfigError("bootstrap_b must be >= 1 for bootstrap_ci")
    children = np.random.SeedSequence([config.seed, 0xB0075]).spawn(config.bootstrap_b)
    runner = Parallel(n_jobs=config.jobs) if config.jobs != 1 else None
    if runner is not None:
        results = runner(
            delayed(_bootstrap_replicate)(data, measures, assumption, config, c)
            for c in children
        )
    else:
        results = [
            _bootstrap_replicate(data, measures, assumption, config, c)
            for c in children
        ]
    failures = [msg for status, msg in results if status == "error"]
    if len(failures) > 0.10 * config.bootstrap_b:
        raise NumericError(
            f"bootstrap replicate failure rate {len(failures)}/{config.bootstrap_b}; "
            f"first failure: {failures[0]}"
        )
    ok = [payload for status, payload in results if status == "ok"]
    alpha = 1.0 - config.ci_level
    cis = {}
    for m in measures:
        for meth in METHODS:
            lowers = np.array([rep[(m.label, meth)][0] for rep in ok])
            uppers = np.array([rep[(m.label, meth)][1] for rep in ok])
            cis[(m.label, meth)] = (
                float(np.quantile(lowers, alpha / 2)),
                float(np.quantile(uppers, 1.0 - alpha / 2)),
            )
    return cis


def subgroup_report(
    data: ObservationalDataset,
    measures: Sequence[PerformanceMeasure],
    assumption: CausalAssumption,
    config: EstimationConfig,
) -> RegretReport:
    """Pooled report plus independent cross-fit runs per subgroup label."""
    if data.group is None:
        raise DataError("dataset has no group column")
    pooled = cross_fit_regret(data, measures, assumption, config)
    groups: Dict[str, RegretReport] = {}
    skipped: Dict[str, str] = {}
    for label in sorted(set(data.group.tolist())):
        idx = np.flatnonzero(data.group == label)
        if len(idx) < config.min_group_size:
            skipped[str(label)] = (
                f"group size {len(idx)} below minimum {config.min_group_size}"
            )
            continue
        try:
            groups[str(label)] = cross_fit_regret(
                data.subset(idx), measures, assumption, config
            )
        except PolicyRegretError as exc:
            skipped[str(label)] = f"failed: {exc}"
    pooled.groups = groups
    pooled.skipped_groups = skipped
    return pooled
