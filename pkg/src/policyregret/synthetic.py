"""Synthetic worlds with oracle access to the potential outcome, plus the
experiment protocols built on them: regret-interval characterization,
Monte Carlo coverage, assumption-violation sweeps, and design sensitivity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .assumptions import CausalAssumption, UncertaintySet, bounding_functions, map_to_uncertainty_set
from .bounds import baseline_interval, delta_interval, separation_bound
from .core import (
    ConfigError,
    DataError,
    NumericError,
    ObservationalDataset,
    PerformanceMeasure,
    PolicyRegretError,
)
from .estimation import (
    METHODS,
    EstimationConfig,
    _fold_indices,
    cross_fit_regret,
)
from .nuisance import fit_nuisances
from .vstats import IdentifiedVStats, VStatTable, delta_value, estimate_identified

DEFAULT_MEASURES = (
    PerformanceMeasure.accuracy(),
    PerformanceMeasure.class_perf(0),
    PerformanceMeasure.class_perf(1),
    PerformanceMeasure.predictive_value(0),
    PerformanceMeasure.predictive_value(1),
)


def _sigmoid(v: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-v))


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class FunctionModel:
    """Adapter exposing an arbitrary x -> probability function as a model."""

    def __init__(self, fn):
        self.fn = fn

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.atleast_2d(x)), dtype=float)


@dataclass(frozen=True)
class SyntheticWorld:
    """A fixed parameterization of the synthetic data-generating process.

    Covariates X are observed, confounders U are not; the status-quo
    selection depends on both plus the instrument Z scaled by beta0, while
    beta1 injects a direct Z effect on outcomes (an exclusion violation).
    """

    v_dim: int
    u_dim: int
    z_levels: int
    w_pi0: np.ndarray
    w_pi: np.ndarray
    w_mu1: np.ndarray
    w_mu0: np.ndarray
    w_z: np.ndarray
    beta0: float
    beta1: float
    mode: str
    lam: float
    lambda_star_range: Tuple[float, float]
    seed: int

    def __post_init__(self):
        if self.mode not in ("msm", "iv"):
            raise ConfigError(f"unknown world mode {self.mode!r}")
        if min(self.v_dim, self.u_dim, self.z_levels) < 1:
            raise ConfigError("world dimensions must be positive")
        if self.lam < 1.0:
            raise ConfigError("lambda must be >= 1")

    @classmethod
    def sample(
        cls,
        seed: int,
        mode: str = "msm",
        lam: float = 1.4,
        beta0: float = 1.0,
        beta1: float = 0.0,
        v_dim: int = 5,
        u_dim: int = 2,
        z_levels: int = 3,
        lambda_star_range: Optional[Tuple[float, float]] = None,
    ) -> "SyntheticWorld":
        """Draw the weight vectors uniformly; deterministic given seed."""
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x57A7]))
        dim = v_dim + u_dim
        draw = lambda size, scale: rng.uniform(-1.0, 1.0, size) / math.sqrt(scale)
        if lambda_star_range is None:
            lambda_star_range = (1.0 / lam, lam)
        return cls(
            v_dim=v_dim,
            u_dim=u_dim,
            z_levels=z_levels,
            w_pi0=draw(dim, dim),
            w_pi=draw(v_dim, v_dim),
            w_mu1=draw(dim, dim),
            w_mu0=draw(dim, dim),
            w_z=draw((v_dim, z_levels), v_dim),
            beta0=beta0,
            beta1=beta1,
            mode=mode,
            lam=lam,
            lambda_star_range=lambda_star_range,
            seed=seed,
        )


@dataclass(frozen=True)
class OracleSample:
    """An observational dataset plus the ground truth hidden from it."""

    data: ObservationalDataset
    y1: np.ndarray
    mu1: np.ndarray          # true p(Y(1)=1 | V, Z) pre-selection
    mu0: np.ndarray          # true p(Y(1)=1 | V, Z) on the unselected arm
    pi0: np.ndarray          # true status-quo selection probability
    clip_fraction: float

    def __post_init__(self):
        d1 = self.data.d == 1
        if np.any(self.data.y[d1] != self.y1[d1]):
            raise DataError("observed y must equal y1 on every d=1 row")


def generate(world: SyntheticWorld, n: int) -> OracleSample:
    """Draw n rows from the world; bitwise-deterministic given world.seed."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([world.seed, 0xDA7A]))
    x = rng.standard_normal((n, world.v_dim))
    u = rng.standard_normal((n, world.u_dim))
    v = np.column_stack([x, u])
    gamma = _softmax(x @ world.w_z)
    z = (gamma.cumsum(axis=1) < rng.random(n)[:, None]).sum(axis=1)

    pi0 = _sigmoid(v @ world.w_pi0 + world.beta0 * z)
    d = (rng.random(n) < pi0).astype(np.int8)
    pi = _sigmoid(x @ world.w_pi)
    t = (rng.random(n) < pi).astype(np.int8)

    mu1 = _sigmoid(v @ world.w_mu1 + world.beta1 * z)
    if world.mode == "msm":
        lam_star = rng.uniform(*world.lambda_star_range, n)
        raw = lam_star * mu1
        clip_fraction = float(np.mean(raw > 1.0))
        mu0 = np.clip(raw, 0.0, 1.0)
    else:
        clip_fraction = 0.0
        mu0 = _sigmoid(v @ world.w_mu0 + world.beta1 * z)

    mu_d = np.where(d == 1, mu1, mu0)
    y1 = (rng.random(n) < mu_d).astype(np.int8)
    y = np.where(d == 1, y1.astype(float), np.nan)

    # binary outcome-side proxy: a noisy signal of the hidden confounder
    w = (u[:, 0] + 0.5 * rng.standard_normal(n) > 0).astype(np.int64)

    data = ObservationalDataset(x=x, d=d, pi1=pi, y=y, t=t, z=z.astype(np.int64), w=w)
    return OracleSample(
        data=data, y1=y1, mu1=mu1, mu0=mu0, pi0=pi0, clip_fraction=clip_fraction
    )


def oracle_table(sample: OracleSample) -> VStatTable:
    """The fully identified empirical table built with oracle outcomes."""
    data = sample.data
    weights = {1: data.pi1, 0: 1.0 - data.pi1}
    v = np.empty((2, 2, 2))
    for y in (0, 1):
        y_mask = sample.y1 == y
        for tt in (0, 1):
            for dd in (0, 1):
                v[y, tt, dd] = float(np.mean(weights[tt] * (data.d == dd) * y_mask))
    return VStatTable.from_v(v)


def oracle_regret(sample: OracleSample, measure: PerformanceMeasure) -> float:
    return delta_value(oracle_table(sample), measure)


def _trial_report(
    seed: int,
    n: int,
    assumption: CausalAssumption,
    config: EstimationConfig,
    measures: Sequence[PerformanceMeasure],
    world_kwargs: dict,
):
    """One Monte Carlo trial: fresh weights, fresh data, full pipeline."""
    world = SyntheticWorld.sample(seed=seed, **world_kwargs)
    sample = generate(world, n)
    trial_config = replace(config, seed=seed, bootstrap_b=0)
    try:
        report = cross_fit_regret(
            sample.data, measures, assumption, trial_config, with_bootstrap=False
        )
    except PolicyRegretError as exc:
        return ("error", str(exc))
    out = {}
    for m in measures:
        oracle = oracle_regret(sample, m)
        for meth in METHODS:
            iv = report.intervals[m.label][meth]
            out[(m.label, meth)] = {
                "lower": iv.lower,
                "upper": iv.upper,
                "width": iv.width,
                "covered": bool(iv.contains(oracle)),
                "oracle": oracle,
            }
    return ("ok", out)


def _run_trials(seeds, n, assumption, config, measures, world_kwargs):
    if config.jobs != 1:
        results = Parallel(n_jobs=config.jobs)(
            delayed(_trial_report)(s, n, assumption, config, measures, world_kwargs)
            for s in seeds
        )
    else:
        results = [
            _trial_report(s, n, assumption, config, measures, world_kwargs)
            for s in seeds
        ]
    failures = [msg for status, msg in results if status == "error"]
    if len(failures) > 0.10 * len(seeds):
        raise NumericError(
            f"trial failure rate {len(failures)}/{len(seeds)}; first: {failures[0]}"
        )
    return [payload for status, payload in results if status == "ok"], len(failures)


def _summarize_trials(ok, measures) -> List[dict]:
    rows = []
    for m in measures:
        for meth in METHODS:
            cells = [trial[(m.label, meth)] for trial in ok]
            rows.append(
                {
                    "measure": m.label,
                    "method": meth,
                    "coverage": float(np.mean([c["covered"] for c in cells])),
                    "mean_lower": float(np.mean([c["lower"] for c in cells])),
                    "mean_upper": float(np.mean([c["upper"] for c in cells])),
                    "mean_width": float(np.mean([c["width"] for c in cells])),
                    "trials": len(cells),
                }
            )
    return rows


def _trial_seeds(master_seed: int, count: int, salt: int) -> List[int]:
    children = np.random.SeedSequence([master_seed, salt]).spawn(count)
    return [int(c.generate_state(1)[0] % (2**31)) for c in children]


def coverage_experiment(
    world_kwargs: dict,
    n_grid: Sequence[int],
    trials: int,
    assumption: CausalAssumption,
    config: EstimationConfig,
    measures: Sequence[PerformanceMeasure] = (PerformanceMeasure.accuracy(),),
) -> List[dict]:
    """Coverage of the oracle regret per sample size and interval method.

    Weight vectors are resampled per trial, so coverage is over worlds as
    well as over sampling noise.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rows = []
    for n in n_grid:
        seeds = _trial_seeds(config.seed, trials, salt=n)
        ok, n_failed = _run_trials(seeds, n, assumption, config, measures, world_kwargs)
        for row in _summarize_trials(ok, measures):
            rows.append({"n": int(n), **row, "failed_trials": n_failed})
    return rows


VIOLATION_KNOBS = ("lambda_star", "beta0", "beta1")


def violation_sweep(
    world_kwargs: dict,
    knob: str,
    grid: Sequence[float],
    trials: int,
    n: int,
    assumption: CausalAssumption,
    config: EstimationConfig,
    measures: Sequence[PerformanceMeasure] = (PerformanceMeasure.accuracy(),),
) -> List[dict]:
    """Sweep one generative knob while holding the assumption fixed.

    lambda_star pins the confounding multiplier to a single value (possibly
    outside the assumed range); beta0 scales instrument relevance; beta1
    scales the exclusion-restriction violation.
    """
    if knob not in VIOLATION_KNOBS:
        raise ConfigError(f"unknown sweep knob {knob!r}")
    if not len(grid):
        raise ConfigError("sweep grid is empty")
    rows = []
    for point in grid:
        kwargs = dict(world_kwargs)
        if knob == "lambda_star":
            kwargs["lambda_star_range"] = (float(point), float(point))
        else:
            kwargs[knob] = float(point)
        seeds = _trial_seeds(config.seed, trials, salt=hash(round(float(point), 9)) % (2**31))
        ok, n_failed = _run_trials(seeds, n, assumption, config, measures, kwargs)
        for row in _summarize_trials(ok, measures):
            rows.append({"knob": knob, "value": float(point), **row, "failed_trials": n_failed})
    return rows


def design_sensitivity(
    world: SyntheticWorld,
    lambda_grid: Sequence[float],
    config: EstimationConfig,
    n: int = 20000,
    measures: Sequence[PerformanceMeasure] = DEFAULT_MEASURES,
) -> Dict[str, dict]:
    """Smallest assumed lambda at which each interval first contains zero.

    Nuisances depend only on the data, so they are fit once per fold and the
    uncertainty set is re-mapped per grid point.
    """
    grid = [float(g) for g in lambda_grid]
    if grid != sorted(grid) or grid[0] < 1.0:
        raise ConfigError("lambda grid must be ascending and start at >= 1")
    sample = generate(world, n)
    data = sample.data
    folds = _fold_indices(data.n, config.k_folds, config.seed)
    fitted = []
    for test_idx in folds:
        mask = np.zeros(data.n, dtype=bool)
        mask[test_idx] = True
        train = data.subset(np.flatnonzero(~mask))
        test = data.subset(test_idx)
        fitted.append(
            (test, fit_nuisances(train, CausalAssumption.msm(grid[0]), config.classifier),
             estimate_identified(test))
        )

    out: Dict[str, dict] = {
        m.label: {"delta": math.inf, "baseline": math.inf} for m in measures
    }
    for lam in grid:
        assumption = CausalAssumption.msm(lam)
        endpoints = {m.label: {meth: [] for meth in METHODS} for m in measures}
        for test, nuisances, identified in fitted:
            tau = bounding_functions(assumption, nuisances, test)
            uset = map_to_uncertainty_set(tau, nuisances.e1, test, identified)
            for m in measures:
                d_iv = delta_interval(uset, m)
                b_iv = baseline_interval(uset, m)
                endpoints[m.label]["delta"].append((d_iv.lower, d_iv.upper))
                endpoints[m.label]["baseline"].append((b_iv.lower, b_iv.upper))
        for m in measures:
            for meth in METHODS:
                if not math.isinf(out[m.label][meth]):
                    continue
                pts = np.asarray(endpoints[m.label][meth])
                lo, hi = float(pts[:, 0].mean()), float(pts[:, 1].mean())
                if lo <= 0.0 <= hi:
                    out[m.label][meth] = lam
    return out


def random_uncertainty_fixture(rng: np.random.Generator) -> UncertaintySet:
    """A random valid table with random sub-intervals on the unidentified cells.

    Mixing the Dirichlet draw with the uniform table keeps every cell, and
    hence every measure denominator, bounded away from zero.
    """
    flat = 0.6 * rng.dirichlet(np.ones(8)) + 0.4 / 8.0
    v = flat.reshape((2, 2, 2))
    table = VStatTable.from_v(v)
    rho = table.rho
    identified = IdentifiedVStats(v1=v[:, :, 1].copy(), rho=rho.copy())
    intervals = {}
    for t in (0, 1):
        cap = float(rho[t, 0])
        lo = rng.uniform(0.0, cap)
        hi = rng.uniform(lo, cap)
        intervals[t] = (lo, hi)
    return UncertaintySet(
        h10=intervals[1],
        h00=intervals[0],
        rho10=float(rho[1, 0]),
        rho00=float(rho[0, 0]),
        identified=identified,
    )


def separation_characterization(
    n_fixtures: int,
    seed: int,
    measures: Sequence[PerformanceMeasure] = DEFAULT_MEASURES,
) -> List[dict]:
    """Guaranteed vs. measured width improvement of delta over baseline."""
    if n_fixtures < 1:
        raise ConfigError("n_fixtures must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5E9A]))
    rows = []
    for i in range(n_fixtures):
        uset = random_uncertainty_fixture(rng)
        for m in measures:
            measured = baseline_interval(uset, m).width - delta_interval(uset, m).width
            rows.append(
                {
                    "fixture": i,
                    "measure": m.label,
                    "bound": separation_bound(uset, m),
                    "improvement": measured,
                }
            )
    return rows


def healthcare_schema_dataset(n: int, seed: int, lam: float = 1.2) -> ObservationalDataset:
    """A stand-in dataset mimicking a screening program's schema.

    Columns: numeric covariates (x_0 risk score, x_1 age, x_2 cost score,
    remaining noise), status-quo enrollment d, a threshold proposed policy
    (top 45% of risk scores), selectively observed outcome y, and a binary
    group label with group-dependent selection rates.
    """
    world = SyntheticWorld.sample(seed=seed, mode="msm", lam=lam)
    sample = generate(world, n)
    data = sample.data
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x9E09]))
    group = np.where(data.x[:, 1] + 0.3 * rng.standard_normal(n) > 0, "group_b", "group_a")
    risk = data.x[:, 0]
    pi1 = (risk > np.quantile(risk, 0.55)).astype(float)
    return ObservationalDataset(
        x=data.x.copy(),
        d=data.d.copy(),
        pi1=pi1,
        y=data.y.copy(),
        t=pi1.astype(np.int8),
        z=data.z.copy(),
        w=data.w.copy(),
        group=group,
    )


def generate_simple(
    n: int, seed: int, v_dim: int = 3, world_seed: Optional[int] = None
) -> Tuple[ObservationalDataset, dict]:
    """A well-specified logistic world for rate and robustness experiments.

    Both nuisances are exactly logistic in x, so the built-in learner is
    correctly specified. world_seed fixes the weight vectors independently
    of the data draw. Returns the data plus the true probability functions
    as FunctionModel adapters.
    """
    if world_seed is None:
        world_seed = seed
    wrng = np.random.default_rng(np.random.SeedSequence([world_seed, 0x51AB]))
    w_e = wrng.uniform(-1.0, 1.0, v_dim)
    w_mu = wrng.uniform(-1.0, 1.0, v_dim)
    w_pi = wrng.uniform(-1.0, 1.0, v_dim)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x51AC]))
    x = rng.standard_normal((n, v_dim))
    e1 = _sigmoid(x @ w_e)
    mu1 = _sigmoid(x @ w_mu)
    pi = _sigmoid(x @ w_pi)
    d = (rng.random(n) < e1).astype(np.int8)
    y1 = (rng.random(n) < mu1).astype(np.int8)
    y = np.where(d == 1, y1.astype(float), np.nan)
    t = (rng.random(n) < pi).astype(np.int8)
    data = ObservationalDataset(x=x, d=d, pi1=pi, y=y, t=t)
    truth = {
        "e1": FunctionModel(lambda xx: _sigmoid(xx @ w_e)),
        "mu1": FunctionModel(lambda xx: _sigmoid(xx @ w_mu)),
        "w_e": w_e,
        "w_mu": w_mu,
        "w_pi": w_pi,
        "y1": y1,
    }
    return data, truth
