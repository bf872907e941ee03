"""Joint action/outcome probability tables and performance-measure algebra.

Every measure here decomposes into the eight probabilities
v[y][t][d] = p(T=t, D=d, Y(1)=y). Only the d=1 half is identified from
selectively labeled data; the d=0 half is interval-valued downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DataError,
    ObservationalDataset,
    PerformanceMeasure,
    ZeroDenominatorError,
)

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class VStatTable:
    """A fully specified table: v indexed [y, t, d], rho indexed [t, d]."""

    v: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        if v.shape != (2, 2, 2) or rho.shape != (2, 2):
            raise DataError("v must be (2,2,2) [y,t,d] and rho (2,2) [t,d]")
        if np.any(v < -_SUM_TOL) or np.any(rho < -_SUM_TOL):
            raise DataError("v-statistics must be nonnegative")
        if abs(v.sum() - 1.0) > 1e-9:
            raise DataError("v-statistics must sum to 1")
        if np.max(np.abs(v.sum(axis=0) - rho)) > 1e-9:
            raise DataError("cell sums v_0(t,d) + v_1(t,d) must equal rho_td")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "rho", rho)
        v.setflags(write=False)
        rho.setflags(write=False)

    @classmethod
    def from_v(cls, v) -> "VStatTable":
        v = np.asarray(v, dtype=float)
        return cls(v=v, rho=v.sum(axis=0))

    def to_dict(self) -> dict:
        out = {}
        for y in (0, 1):
            for t in (0, 1):
                for d in (0, 1):
                    out[f"v_{y}{t}{d}"] = float(self.v[y, t, d])
        for t in (0, 1):
            for d in (0, 1):
                out[f"rho_{t}{d}"] = float(self.rho[t, d])
        return out


@dataclass(frozen=True)
class IdentifiedVStats:
    """The identified half of a table: v1 indexed [y, t] = v_y(t, 1)."""

    v1: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        v1 = np.asarray(self.v1, dtype=float)
        rho = np.asarray(self.rho, dtype=float)
        if v1.shape != (2, 2) or rho.shape != (2, 2):
            raise DataError("v1 must be (2,2) [y,t] and rho (2,2) [t,d]")
        if np.any(v1 < -_SUM_TOL) or np.any(v1 > 1 + _SUM_TOL):
            raise DataError("identified v-statistics must lie in [0, 1]")
        for t in (0, 1):
            if abs(v1[:, t].sum() - rho[t, 1]) > 1e-9:
                raise DataError("v_0(t,1) + v_1(t,1) must equal rho_t1")
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "rho", rho)
        v1.setflags(write=False)
        rho.setflags(write=False)


def estimate_identified(data: ObservationalDataset) -> IdentifiedVStats:
    """Sample-average estimates of the identified v-statistics and rho.

    Uses the expected policy pi1(x) as the weight on T = 1; deterministic
    policies reduce to indicator counting.
    """
    pi = data.pi1
    weights = {1: pi, 0: 1.0 - pi}
    d1 = data.d == 1
    y_obs = np.where(d1, data.y, 0.0)
    v1 = np.empty((2, 2))
    rho = np.empty((2, 2))
    for t in (0, 1):
        v1[1, t] = np.mean(weights[t] * d1 * y_obs)
        v1[0, t] = np.mean(weights[t] * d1 * (1.0 - y_obs))
        rho[t, 1] = np.mean(weights[t] * d1)
        rho[t, 0] = np.mean(weights[t] * ~d1)
    return IdentifiedVStats(v1=v1, rho=rho)


def _psi(rho: np.ndarray, policy: str, a: int) -> float:
    """p(A = a) under the given policy: marginal of rho over the other axis."""
    if policy == "proposed":
        return float(rho[a, 0] + rho[a, 1])
    return float(rho[0, a] + rho[1, a])


def measure_value(table: VStatTable, policy: str, m: PerformanceMeasure) -> float:
    """Evaluate the measure for one policy at a fully specified table."""
    if policy not in ("proposed", "status_quo"):
        raise ValueError(f"unknown policy {policy!r}")
    v, rho = table.v, table.rho

    if m.kind == "utility":
        u = np.asarray(m.u)
        total = 0.0
        for act in (0, 1):
            for y in (0, 1):
                # p(A = act, Y(1) = y) marginalizes the other policy's action
                if policy == "proposed":
                    p_ay = v[y, act, 0] + v[y, act, 1]
                else:
                    p_ay = v[y, 0, act] + v[y, 1, act]
                total += u[act, y] * p_ay
        return total

    if m.kind == "class_perf":
        y = m.y
        denom = float(v[y].sum())
        if denom <= 0:
            raise ZeroDenominatorError(
                f"class_perf(y={y}) requires p(Y(1)={y}) > 0"
            )
        if policy == "proposed":
            num = v[y, 1, 0] + v[y, 1, 1]
        else:
            num = v[y, 0, 1] + v[y, 1, 1]
        return float(num / denom)

    a = m.a
    psi = _psi(rho, policy, a)
    if psi <= 0:
        raise ZeroDenominatorError(
            f"predictive_value(a={a}) requires p(A={a}) > 0 under {policy}"
        )
    if policy == "proposed":
        num = v[a, a, 0] + v[a, a, 1]
    else:
        num = v[a, 0, a] + v[a, 1, a]
    return float(num / psi)


def delta_value(table: VStatTable, m: PerformanceMeasure) -> float:
    """Regret of the proposed policy over the status quo at a table.

    Closed decompositions over the disagreement cells; agrees with
    measure_value(proposed) - measure_value(status_quo) to float precision.
    """
    v, rho = table.v, table.rho

    if m.kind == "utility":
        u = np.asarray(m.u)
        total = 0.0
        for a in (0, 1):
            ap = 1 - a
            for y in (0, 1):
                lam = u[a, y] - u[ap, y]
                total += lam * v[y, a, ap]
        return total

    if m.kind == "class_perf":
        y = m.y
        denom = float(v[y].sum())
        if denom <= 0:
            raise ZeroDenominatorError(
                f"class_perf(y={y}) requires p(Y(1)={y}) > 0"
            )
        return float((v[y, 1, 0] - v[y, 0, 1]) / denom)

    a = m.a
    ap = 1 - a
    psi_pi = _psi(rho, "proposed", a)
    psi_pi0 = _psi(rho, "status_quo", a)
    if psi_pi <= 0 or psi_pi0 <= 0:
        raise ZeroDenominatorError(
            f"predictive_value(a={a}) requires p(A={a}) > 0 under both policies"
        )
    sigma = (1 - 2 * a) * (rho[1, 0] - rho[0, 1])
    num = sigma * v[a, a, a] + psi_pi0 * v[a, a, ap] - psi_pi * v[a, ap, a]
    return float(num / (psi_pi * psi_pi0))
