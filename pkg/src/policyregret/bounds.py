"""Closed-form regret intervals over an uncertainty set.

Every supported measure is a ratio of functions affine in the two free
coordinates (v_1(1,0), v_1(0,0)), so its extremes over the box h10 x h00 sit
at the four vertices; evaluating the corner tables is exactly the
monotone-dependence closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assumptions import UncertaintySet
from .core import PerformanceMeasure, RegretInterval, ZeroDenominatorError
from .vstats import delta_value, measure_value


@dataclass(frozen=True)
class BoundSelector:
    """Derived quantities driving interval endpoints and the separation bound."""

    measure: PerformanceMeasure
    alpha: float            # width of the v_0(0,0) interval (cancellation term)
    psi_proposed: tuple     # (psi_0, psi_1) under the proposed policy
    psi_status_quo: tuple
    lambda_ay: tuple = None     # utility gaps u_ay - u_a'y, indexed [a][y]
    tilde_y: int = None
    gamma_bar_y: float = None   # sum of upper-bounded v_y(a, a') cells
    sigma_a: float = None

    @classmethod
    def from_set(cls, uset: UncertaintySet, m: PerformanceMeasure) -> "BoundSelector":
        rho = uset.identified.rho
        alpha = uset.alpha
        psi_pi = (float(rho[0, 0] + rho[0, 1]), float(rho[1, 0] + rho[1, 1]))
        psi_pi0 = (float(rho[0, 0] + rho[1, 0]), float(rho[0, 1] + rho[1, 1]))
        kwargs = {}
        if m.kind == "utility":
            u = np.asarray(m.u)
            lam = tuple(
                tuple(float(u[a, y] - u[1 - a, y]) for y in (0, 1)) for a in (0, 1)
            )
            kwargs["lambda_ay"] = lam
            kwargs["tilde_y"] = int(lam[1][1] > lam[1][0])
        elif m.kind == "class_perf":
            y = m.y
            v1 = uset.identified.v1
            # upper bounds of the four v_y(t, d) cells
            hi10 = uset.h10[1] if y == 1 else uset.rho10 - uset.h10[0]
            hi00 = uset.h00[1] if y == 1 else uset.rho00 - uset.h00[0]
            kwargs["gamma_bar_y"] = float(hi10 + hi00 + v1[y, 0] + v1[y, 1])
        else:
            kwargs["sigma_a"] = float((1 - 2 * m.a) * (rho[1, 0] - rho[0, 1]))
        return cls(
            measure=m,
            alpha=alpha,
            psi_proposed=psi_pi,
            psi_status_quo=psi_pi0,
            **kwargs,
        )


def delta_interval(uset: UncertaintySet, m: PerformanceMeasure) -> RegretInterval:
    """Regret interval that cancels shared unidentified terms."""
    values = [delta_value(tbl, m) for tbl in uset.corner_tables()]
    return RegretInterval(
        lower=min(values), upper=max(values), method="delta", measure=m
    )


def baseline_interval(uset: UncertaintySet, m: PerformanceMeasure) -> RegretInterval:
    """Difference of independently bounded per-policy performances."""
    tables = uset.corner_tables()
    vals_pi = [measure_value(tbl, "proposed", m) for tbl in tables]
    vals_pi0 = [measure_value(tbl, "status_quo", m) for tbl in tables]
    return RegretInterval(
        lower=min(vals_pi) - max(vals_pi0),
        upper=max(vals_pi) - min(vals_pi0),
        method="baseline",
        measure=m,
    )


def separation_bound(uset: UncertaintySet, m: PerformanceMeasure) -> float:
    """Guaranteed width improvement of the delta interval over the baseline."""
    sel = BoundSelector.from_set(uset, m)
    if m.kind == "utility":
        u = np.asarray(m.u)
        return 2.0 * sel.alpha * float(u[0, 0] + u[0, 1])
    if m.kind == "class_perf":
        v11 = float(uset.identified.v1[m.y, 1])
        if sel.gamma_bar_y <= 0:
            raise ZeroDenominatorError("gamma_bar is zero: class absent from every cell")
        return 2.0 * sel.alpha * v11 / sel.gamma_bar_y**2
    if m.a == 1:
        return 0.0
    denom = max(sel.psi_proposed[0], sel.psi_status_quo[0])
    if denom <= 0:
        raise ZeroDenominatorError("psi_0 is zero under both policies")
    return 2.0 * sel.alpha / denom
