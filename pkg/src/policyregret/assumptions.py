"""Causal assumptions, their pointwise outcome bounds, and the implied
uncertainty set over partially identified v-statistics.

Each assumption yields bounding functions tau_lo(x) <= E[Y(1)|D=0,X=x]
<= tau_hi(x); averaging pi_t(x) * e0(x) * tau(x) then brackets v_1(t,0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .core import ConfigError, DataError, NumericError, PositivityError, ObservationalDataset
from .nuisance import EPS_POS, NuisanceModels
from .vstats import IdentifiedVStats, VStatTable

# runs with more than this fraction of tau_lo > tau_hi crossings abort when
# the bounds are structurally ordered: heavy crossing then signals a numeric
# misfit. IV bounds can cross legitimately (the crossing is the violation
# signal), so for them the fraction is recorded, not fatal.
MAX_CROSSING_FRACTION = 0.01

ASSUMPTION_KINDS = ("manski", "msm", "rosenbaum", "iv", "proximal_t", "proximal_tw")


@dataclass(frozen=True)
class CausalAssumption:
    kind: str
    lam: Optional[float] = None
    gamma: Optional[float] = None
    z_column: Optional[str] = None
    w_column: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ASSUMPTION_KINDS:
            raise ConfigError(f"unknown assumption {self.kind!r}")
        if self.kind == "msm" and (self.lam is None or self.lam < 1.0):
            raise ConfigError("msm requires lambda >= 1")
        if self.kind == "rosenbaum" and (self.gamma is None or self.gamma < 1.0):
            raise ConfigError("rosenbaum requires gamma >= 1")
        if self.kind == "proximal_tw" and self.w_column is None:
            raise ConfigError("proximal_tw requires a w column")

    @classmethod
    def manski(cls):
        return cls(kind="manski")

    @classmethod
    def msm(cls, lam: float):
        return cls(kind="msm", lam=lam)

    @classmethod
    def rosenbaum(cls, gamma: float):
        return cls(kind="rosenbaum", gamma=gamma)

    @classmethod
    def iv(cls, z_column: str = "z"):
        return cls(kind="iv", z_column=z_column)

    @classmethod
    def proximal_t(cls, z_column: str = "z"):
        return cls(kind="proximal_t", z_column=z_column)

    @classmethod
    def proximal_tw(cls, z_column: str = "z", w_column: str = "w"):
        return cls(kind="proximal_tw", z_column=z_column, w_column=w_column)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambda": self.lam,
            "gamma": self.gamma,
            "z_column": self.z_column,
            "w_column": self.w_column,
        }


@dataclass(frozen=True)
class BoundingFunctions:
    """Evaluable pointwise bounds on the unobserved outcome regression.

    evaluate() clips both outputs into [0, 1] and repairs numerically crossed
    pairs by swapping, reporting the crossing count.
    """

    lo: Callable[[np.ndarray], np.ndarray]
    hi: Callable[[np.ndarray], np.ndarray]
    ordered: bool = True  # False when lo > hi is possible in population (IV)

    def evaluate(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, int]:
        lo = np.clip(np.asarray(self.lo(x), dtype=float), 0.0, 1.0)
        hi = np.clip(np.asarray(self.hi(x), dtype=float), 0.0, 1.0)
        crossed = lo > hi
        n_crossed = int(crossed.sum())
        if n_crossed:
            lo_fixed = np.where(crossed, hi, lo)
            hi = np.where(crossed, lo, hi)
            lo = lo_fixed
        return lo, hi, n_crossed


def bounding_functions(
    assumption: CausalAssumption,
    nuisances: NuisanceModels,
    data: ObservationalDataset,
) -> BoundingFunctions:
    """Build the bounding functions an assumption implies from fitted nuisances."""
    kind = assumption.kind

    if kind == "manski":
        return BoundingFunctions(
            lo=lambda x: np.zeros(np.atleast_2d(x).shape[0]),
            hi=lambda x: np.ones(np.atleast_2d(x).shape[0]),
        )

    if kind in ("msm", "rosenbaum"):
        lam = assumption.lam if kind == "msm" else assumption.gamma
        mu1 = nuisances.mu1
        return BoundingFunctions(
            lo=lambda x: mu1.predict(x) / lam,
            hi=lambda x: mu1.predict(x) * lam,
        )

    if kind == "iv":
        if not nuisances.per_level:
            raise DataError("iv assumption requires per-level nuisance models")
        levels = sorted(nuisances.per_level)

        def _mu_range(x):
            x = np.atleast_2d(x)
            mu_lo = np.full(x.shape[0], -np.inf)
            mu_hi = np.full(x.shape[0], np.inf)
            for level in levels:
                e1_z, mu1_z = nuisances.per_level[level]
                e1z = e1_z.predict(x)
                m1z = mu1_z.predict(x)
                mu_lo = np.maximum(mu_lo, m1z * e1z)
                mu_hi = np.minimum(mu_hi, (1.0 - e1z) + m1z * e1z)
            return mu_lo, mu_hi

        def _tau(x, side):
            x = np.atleast_2d(x)
            e1 = nuisances.e1.predict(x)
            e0 = 1.0 - e1
            if np.any(e0 < EPS_POS):
                raise PositivityError(
                    "estimated e0(x) below positivity floor on "
                    f"{int(np.sum(e0 < EPS_POS))} rows"
                )
            mu_lo, mu_hi = _mu_range(x)
            m1 = nuisances.mu1.predict(x)
            mu = mu_lo if side == "lo" else mu_hi
            return (mu - m1 * e1) / e0

        return BoundingFunctions(
            lo=lambda x: _tau(x, "lo"), hi=lambda x: _tau(x, "hi"), ordered=False
        )

    if kind == "proximal_t":
        if not nuisances.per_level:
            raise DataError("proximal_t assumption requires per-level nuisance models")
        levels = sorted(nuisances.per_level)

        def _extreme(x, side):
            x = np.atleast_2d(x)
            preds = np.stack(
                [nuisances.per_level[level][1].predict(x) for level in levels]
            )
            return preds.min(axis=0) if side == "lo" else preds.max(axis=0)

        return BoundingFunctions(
            lo=lambda x: _extreme(x, "lo"), hi=lambda x: _extreme(x, "hi")
        )

    # proximal_tw
    freqs = nuisances.proximal_freqs
    if freqs is None:
        raise DataError("proximal_tw assumption requires fitted proxy frequencies")
    mu1 = nuisances.mu1

    def _tw(x, side):
        scores = mu1.predict(np.atleast_2d(x))
        r_lo, r_hi = freqs.ratios_for(scores)
        return scores * (r_lo if side == "lo" else r_hi)

    return BoundingFunctions(lo=lambda x: _tw(x, "lo"), hi=lambda x: _tw(x, "hi"))


@dataclass(frozen=True)
class UncertaintySet:
    """Intervals on v_1(1,0) and v_1(0,0) plus the identified half.

    Each point (a, b) with a in h10 and b in h00 determines a full table via
    v_0(t,0) = rho_t0 - v_1(t,0).
    """

    h10: Tuple[float, float]
    h00: Tuple[float, float]
    rho10: float
    rho00: float
    identified: IdentifiedVStats
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, (lo, hi), cap in (("h10", self.h10, self.rho10), ("h00", self.h00, self.rho00)):
            if not (-1e-12 <= lo <= hi <= cap + 1e-12):
                raise NumericError(
                    f"{name} interval [{lo}, {hi}] violates 0 <= lo <= hi <= rho ({cap})"
                )

    def table_at(self, v110: float, v100: float) -> VStatTable:
        v = np.empty((2, 2, 2))
        v[:, :, 1] = self.identified.v1
        v[1, 1, 0] = v110
        v[0, 1, 0] = self.rho10 - v110
        v[1, 0, 0] = v100
        v[0, 0, 0] = self.rho00 - v100
        return VStatTable(v=v, rho=self.identified.rho)

    def corner_tables(self):
        """Tables at the four vertices of h10 x h00 (extremes of every measure)."""
        return [
            self.table_at(a, b)
            for a in self.h10
            for b in self.h00
        ]

    def sample_point(self, rng: np.random.Generator) -> VStatTable:
        a = rng.uniform(self.h10[0], self.h10[1])
        b = rng.uniform(self.h00[0], self.h00[1])
        return self.table_at(a, b)

    @property
    def alpha(self) -> float:
        """Width of the v_0(0,0) interval, the cancellation term."""
        return self.h00[1] - self.h00[0]

    def to_dict(self) -> dict:
        return {
            "h10": list(self.h10),
            "h00": list(self.h00),
            "rho10": self.rho10,
            "rho00": self.rho00,
            "diagnostics": dict(self.diagnostics),
        }


def map_to_uncertainty_set(
    tau: BoundingFunctions,
    e1_model,
    data_fold: ObservationalDataset,
    identified: IdentifiedVStats,
) -> UncertaintySet:
    """Fold-average the Lemma-style plug-in bounds into an uncertainty set."""
    if data_fold.n < 1:
        raise DataError("empty fold")
    x = data_fold.x
    e0 = 1.0 - e1_model.predict(x)
    tau_lo, tau_hi, n_crossed = tau.evaluate(x)
    if tau.ordered and n_crossed > MAX_CROSSING_FRACTION * data_fold.n:
        raise NumericError(
            f"bounding functions crossed on {n_crossed}/{data_fold.n} rows; "
            "nuisance model is a poor fit"
        )
    rho10 = float(identified.rho[1, 0])
    rho00 = float(identified.rho[0, 0])
    intervals = {}
    for t, cap in ((1, rho10), (0, rho00)):
        pi_t = data_fold.pi1 if t == 1 else 1.0 - data_fold.pi1
        lo = float(np.mean(pi_t * e0 * tau_lo))
        hi = float(np.mean(pi_t * e0 * tau_hi))
        intervals[t] = (min(max(lo, 0.0), cap), min(max(hi, 0.0), cap))
    return UncertaintySet(
        h10=intervals[1],
        h00=intervals[0],
        rho10=rho10,
        rho00=rho00,
        identified=identified,
        diagnostics={"tau_crossings": n_crossed},
    )


def set_size(uset: UncertaintySet) -> float:
    """Lebesgue size: the product of the two interval widths."""
    return (uset.h10[1] - uset.h10[0]) * (uset.h00[1] - uset.h00[0])
