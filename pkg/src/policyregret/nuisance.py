"""Nuisance regressions: propensity e_d(x), outcome mu_1(x), and the
instrument/proxy-conditional variants consumed by the assumption mappings.

The built-in learners are an L2-regularized logistic regression trained by
full-batch Newton steps and a histogram binner for nonparametric sanity
checks. All predicted probabilities are floored into [EPS_POS, 1 - EPS_POS].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .core import ConfigError, DataError, NumericError, ObservationalDataset

EPS_POS = 1e-3

# instrument / proxy levels with fewer fold rows than this are dropped from
# per-level fits (dropping only widens bounds)
MIN_LEVEL_ROWS = 20

# equal-mass mu1-score bins used to stratify proximal proxy frequencies
PROXIMAL_BINS = 10
MIN_PROXIMAL_CELL = 5


def floor_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, EPS_POS, 1.0 - EPS_POS)


@dataclass(frozen=True)
class ClassifierConfig:
    learner: str = "logistic"
    l2_penalty: Optional[float] = None  # None -> 1/n
    max_iter: int = 100
    tol: float = 1e-8
    seed: int = 0
    n_bins: int = 10
    score_column: int = 0

    def __post_init__(self):
        if self.learner not in ("logistic", "histogram"):
            raise ConfigError(f"unknown learner {self.learner!r}")


class ConstantModel:
    """Laplace-smoothed constant probability, used when one label is absent."""

    def __init__(self, n_pos: int, n: int, alpha: float = 1.0):
        self.p = (n_pos + alpha) / (n + 2 * alpha)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return floor_probs(np.full(np.atleast_2d(x).shape[0], self.p))


class LogisticModel:
    """Logistic regression fit by Newton iterations on standardized features."""

    def __init__(self, mean, scale, beta):
        self.mean = mean
        self.scale = scale
        self.beta = beta

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        zs = (x - self.mean) / self.scale
        logits = self.beta[0] + zs @ self.beta[1:]
        return floor_probs(1.0 / (1.0 + np.exp(-logits)))


class HistogramModel:
    """Per-bin label frequency over a single score column."""

    def __init__(self, column, edges, probs):
        self.column = column
        self.edges = edges
        self.probs = probs

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = np.clip(
            np.searchsorted(self.edges, x[:, self.column], side="right") - 1,
            0,
            len(self.probs) - 1,
        )
        return floor_probs(self.probs[idx])


def _fit_logistic(x: np.ndarray, labels: np.ndarray, config: ClassifierConfig):
    n, p = x.shape
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    zs = (x - mean) / scale
    design = np.column_stack([np.ones(n), zs])
    lam = config.l2_penalty if config.l2_penalty is not None else 1.0 / n
    beta = np.zeros(p + 1)
    penalty = lam * np.ones(p + 1)
    penalty[0] = 0.0  # intercept unpenalized
    for _ in range(config.max_iter):
        logits = design @ beta
        mu = 1.0 / (1.0 + np.exp(-logits))
        grad = design.T @ (mu - labels) / n + penalty * beta
        if np.linalg.norm(grad) < config.tol:
            break
        wgt = np.maximum(mu * (1.0 - mu), 1e-10)
        hess = (design.T * wgt) @ design / n + np.diag(penalty + 1e-10)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise NumericError("singular Hessian in logistic Newton solve")
        beta = beta - step
    return LogisticModel(mean=mean, scale=scale, beta=beta)


def fit_classifier(x: np.ndarray, labels: np.ndarray, config: ClassifierConfig):
    """Fit a probabilistic binary classifier; deterministic given config."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    labels = np.asarray(labels, dtype=float)
    if labels.shape[0] != x.shape[0]:
        raise DataError("feature/label row counts differ")
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == len(labels):
        return ConstantModel(n_pos, len(labels))
    if config.learner == "histogram":
        scores = x[:, config.score_column]
        edges = np.quantile(scores, np.linspace(0, 1, config.n_bins + 1))
        edges = np.unique(edges)
        idx = np.clip(np.searchsorted(edges, scores, side="right") - 1, 0, len(edges) - 2)
        probs = np.array(
            [labels[idx == b].mean() if np.any(idx == b) else labels.mean()
             for b in range(len(edges) - 1)]
        )
        return HistogramModel(config.score_column, edges[:-1], probs)
    return _fit_logistic(x, labels, config)


@dataclass(frozen=True)
class ProximalFrequencies:
    """Empirical (w, z) dependence ratios within D=1, per mu1-score stratum."""

    edges: np.ndarray       # bin edges over mu1 scores, len bins - 1
    ratio_lo: np.ndarray
    ratio_hi: np.ndarray

    def ratios_for(self, mu1_scores: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        idx = np.clip(
            np.searchsorted(self.edges, mu1_scores, side="right"),
            0,
            len(self.ratio_lo) - 1,
        )
        return self.ratio_lo[idx], self.ratio_hi[idx]


@dataclass(frozen=True)
class NuisanceModels:
    e1: object
    mu1: object
    per_level: Optional[Dict[int, Tuple[object, object]]] = None
    proximal_freqs: Optional[ProximalFrequencies] = None
    dropped_levels: tuple = ()


def _fit_proximal_freqs(data, mu1_model) -> ProximalFrequencies:
    d1 = data.d == 1
    scores = mu1_model.predict(data.x[d1])
    z = data.z[d1]
    w = data.w[d1]
    edges = np.quantile(scores, np.linspace(0, 1, PROXIMAL_BINS + 1))[1:-1]
    bins = np.searchsorted(edges, scores, side="right")
    n_bins = len(edges) + 1
    z_vals = np.unique(z)
    w_vals = np.unique(w)
    ratio_lo = np.empty(n_bins)
    ratio_hi = np.empty(n_bins)
    for b in range(n_bins):
        sel = bins == b
        total = int(sel.sum())
        if total == 0:
            raise NumericError("proximal cell count below threshold (empty stratum)")
        zb, wb = z[sel], w[sel]
        ratios = []
        for zv in z_vals:
            pz = np.mean(zb == zv)
            for wv in w_vals:
                joint_n = int(np.sum((zb == zv) & (wb == wv)))
                if joint_n < MIN_PROXIMAL_CELL:
                    continue
                pw = np.mean(wb == wv)
                ratios.append((joint_n / total) / (pw * pz))
        if not ratios:
            raise NumericError("proximal cell count below threshold")
        ratio_lo[b] = min(ratios)
        ratio_hi[b] = max(ratios)
    return ProximalFrequencies(edges=edges, ratio_lo=ratio_lo, ratio_hi=ratio_hi)


def fit_nuisances(data: ObservationalDataset, assumption, config: ClassifierConfig) -> NuisanceModels:
    """Fit the nuisance set required by an assumption on one training fold."""
    d1 = data.d == 1
    if not np.any(d1):
        raise DataError("cannot identify mu_1: training fold has no d=1 rows")
    e1 = fit_classifier(data.x, data.d.astype(float), config)
    mu1 = fit_classifier(data.x[d1], data.y[d1], config)

    per_level = None
    dropped = []
    if assumption.kind in ("iv", "proximal_t", "proximal_tw"):
        if data.z is None:
            raise DataError(f"assumption {assumption.kind!r} requires a z column")
    if assumption.kind in ("iv", "proximal_t"):
        per_level = {}
        for level in np.unique(data.z):
            sel = data.z == level
            if int(sel.sum()) < MIN_LEVEL_ROWS or not np.any(sel & d1):
                dropped.append(int(level))
                continue
            e1_z = fit_classifier(data.x[sel], data.d[sel].astype(float), config)
            mu_sel = sel & d1
            mu1_z = fit_classifier(data.x[mu_sel], data.y[mu_sel], config)
            per_level[int(level)] = (e1_z, mu1_z)
        if not per_level:
            raise DataError("every instrument level fell below the minimum row count")

    proximal_freqs = None
    if assumption.kind == "proximal_tw":
        if data.w is None:
            raise DataError("proximal_tw requires a w column")
        proximal_freqs = _fit_proximal_freqs(data, mu1)

    return NuisanceModels(
        e1=e1,
        mu1=mu1,
        per_level=per_level,
        proximal_freqs=proximal_freqs,
        dropped_levels=tuple(dropped),
    )
