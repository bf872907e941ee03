"""Shared domain types: datasets, performance measures, regret intervals.

A dataset row records the covariates, the confounded status-quo action d,
the proposed-policy action probability pi1 (or a realized draw t), and the
outcome y, which is observed only when d = 1 (selective labels). Optional
categorical columns carry an instrument/proxy z, an outcome proxy w, and a
subgroup label.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np


class PolicyRegretError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PolicyRegretError):
    """Invalid configuration or unknown option."""


class DataError(PolicyRegretError):
    """Malformed or invariant-violating input data."""


class NumericError(PolicyRegretError):
    """Numeric or model failure during computation."""


class ZeroDenominatorError(NumericError):
    """A measure's denominator precondition was violated."""


class PositivityError(NumericError):
    """Estimated propensity fell below the positivity floor."""


MISSING_SENTINELS = ("", "NA")


def _require_binary(values: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(values)
    bad = ~np.isin(arr, (0, 1))
    if bad.any():
        raise DataError(f"column {name!r} must contain only 0/1 values")
    return arr.astype(np.int8)


@dataclass(frozen=True)
class ObservationalDataset:
    """Immutable container for observational rows collected under the status quo.

    y is NaN exactly where d == 0. pi1 is always populated: when the source
    provides only a realized action t, it is copied into pi1 (deterministic
    policies have pi1 in {0, 1}).
    """

    x: np.ndarray
    d: np.ndarray
    pi1: np.ndarray
    y: np.ndarray
    t: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    group: Optional[np.ndarray] = None
    masked_y_count: int = 0

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        n = x.shape[0]
        if n < 1:
            raise DataError("dataset must contain at least one row")
        d = _require_binary(self.d, "d")
        pi1 = np.asarray(self.pi1, dtype=float)
        y = np.asarray(self.y, dtype=float)
        for name, arr in (("d", d), ("pi1", pi1), ("y", y)):
            if arr.shape != (n,):
                raise DataError(f"column {name!r} length does not match x rows")
        if np.any(pi1 < 0) or np.any(pi1 > 1) or np.any(~np.isfinite(pi1)):
            raise DataError("pi1 out of range [0, 1]")
        observed = ~np.isnan(y)
        if np.any(observed != (d == 1)):
            raise DataError("y must be present exactly when d = 1")
        if np.any(~np.isin(y[observed], (0.0, 1.0))):
            raise DataError("column 'y' must contain only 0/1 values")
        t = self.t
        if t is not None:
            t = _require_binary(t, "t")
            if t.shape != (n,):
                raise DataError("column 't' length does not match x rows")
        for name in ("z", "w"):
            col = getattr(self, name)
            if col is not None:
                col = np.asarray(col, dtype=np.int64)
                if col.shape != (n,):
                    raise DataError(f"column {name!r} length does not match x rows")
                object.__setattr__(self, name, col)
        if self.group is not None:
            grp = np.asarray(self.group, dtype=object)
            if grp.shape != (n,):
                raise DataError("group column length does not match x rows")
            object.__setattr__(self, "group", grp)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "pi1", pi1)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)
        for arr in (self.x, self.d, self.pi1, self.y, self.t, self.z, self.w):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def subset(self, idx: np.ndarray) -> "ObservationalDataset":
        """Row subset / resample; index array may repeat rows."""
        take = lambda a: None if a is None else np.asarray(a)[idx].copy()
        return ObservationalDataset(
            x=self.x[idx].copy(),
            d=take(self.d),
            pi1=take(self.pi1),
            y=take(self.y),
            t=take(self.t),
            z=take(self.z),
            w=take(self.w),
            group=take(self.group),
            masked_y_count=0,
        )

    def to_csv(self, path: str) -> None:
        header = [f"x_{j}" for j in range(self.p)] + ["d", "pi1", "y"]
        optional = [(k, getattr(self, k)) for k in ("t", "z", "w", "group")]
        header += [k for k, col in optional if col is not None]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(self.n):
                row = [repr(float(v)) for v in self.x[i]]
                row += [str(int(self.d[i])), repr(float(self.pi1[i]))]
                row.append("" if math.isnan(self.y[i]) else str(int(self.y[i])))
                for k, col in optional:
                    if col is not None:
                        row.append(str(col[i]))
                writer.writerow(row)


DEFAULT_SCHEMA = {
    "x": None,  # None -> all columns named x_<k>, ordered by k
    "d": "d",
    "t": "t",
    "pi1": "pi1",
    "y": "y",
    "z": "z",
    "w": "w",
    "group": "group",
}


def _parse_binary_cell(raw: str, column: str, row: int) -> int:
    raw = raw.strip()
    if raw not in ("0", "1"):
        raise DataError(f"column {column!r} row {row}: expected 0/1, got {raw!r}")
    return int(raw)


def load_dataset(path: str, schema: Optional[dict] = None) -> ObservationalDataset:
    """Load and validate a CSV dataset.

    The schema maps logical column names onto file headers; missing optional
    columns are skipped. A y value on a d = 0 row is treated as missing and
    counted in masked_y_count rather than trusted.
    """
    spec = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(spec)
        if unknown:
            raise ConfigError(f"unknown schema keys: {sorted(unknown)}")
        spec.update(schema)

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: missing header row")
        headers = list(reader.fieldnames)
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: no data rows")

    if spec["x"] is None:
        x_cols = sorted(
            (h for h in headers if h.startswith("x_") and h[2:].isdigit()),
            key=lambda h: int(h[2:]),
        )
    else:
        x_cols = list(spec["x"])
    if not x_cols:
        raise DataError("no covariate (x_*) columns found")
    missing = [c for c in x_cols + [spec["d"]] if c not in headers]
    if missing:
        raise DataError(f"missing required columns: {missing}")
    has_pi1 = spec["pi1"] in headers
    has_t = spec["t"] in headers
    if not has_pi1 and not has_t:
        raise DataError("dataset must provide a pi1 or t column")
    if spec["y"] not in headers:
        raise DataError(f"missing required columns: [{spec['y']!r}]")

    n = len(rows)
    x = np.empty((n, len(x_cols)))
    d = np.empty(n, dtype=np.int8)
    pi1 = np.empty(n)
    y = np.full(n, np.nan)
    t = np.empty(n, dtype=np.int8) if has_t else None
    z = np.empty(n, dtype=np.int64) if spec["z"] in headers else None
    w = np.empty(n, dtype=np.int64) if spec["w"] in headers else None
    group = np.empty(n, dtype=object) if spec["group"] in headers else None
    masked = 0

    for i, row in enumerate(rows):
        try:
            for j, c in enumerate(x_cols):
                x[i, j] = float(row[c])
        except (TypeError, ValueError):
            raise DataError(f"row {i}: non-numeric covariate value")
        d[i] = _parse_binary_cell(row[spec["d"]], spec["d"], i)
        if has_t:
            t[i] = _parse_binary_cell(row[spec["t"]], spec["t"], i)
        if has_pi1:
            val = float(row[spec["pi1"]])
            if not 0.0 <= val <= 1.0:
                raise DataError(f"row {i}: pi1 out of range")
            pi1[i] = val
        else:
            pi1[i] = float(t[i])
        y_raw = (row[spec["y"]] or "").strip()
        if d[i] == 1:
            if y_raw in MISSING_SENTINELS:
                raise DataError(f"row {i}: y missing on a d=1 row")
            y[i] = _parse_binary_cell(y_raw, spec["y"], i)
        elif y_raw not in MISSING_SENTINELS:
            masked += 1  # selective-labels rule: d=0 outcomes are unobservable
        if z is not None:
            z[i] = int(row[spec["z"]])
        if w is not None:
            w[i] = int(row[spec["w"]])
        if group is not None:
            group[i] = row[spec["group"]]

    return ObservationalDataset(
        x=x, d=d, pi1=pi1, y=y, t=t, z=z, w=w, group=group, masked_y_count=masked
    )


@dataclass(frozen=True)
class PerformanceMeasure:
    """A policy performance measure evaluated against the potential outcome.

    kind is one of:
      * "utility": expected utility with a 2x2 nonnegative matrix u[a][y]
      * "class_perf": p(action = 1 | outcome = y) for the stored class y
      * "predictive_value": p(outcome = a | action = a) for the stored a
    """

    kind: str
    u: Optional[tuple] = None
    y: Optional[int] = None
    a: Optional[int] = None

    def __post_init__(self):
        if self.kind == "utility":
            u = np.asarray(self.u, dtype=float)
            if u.shape != (2, 2) or np.any(u < 0) or np.any(~np.isfinite(u)):
                raise ConfigError("utility matrix must be 2x2 and nonnegative")
            object.__setattr__(self, "u", tuple(map(tuple, u.tolist())))
        elif self.kind == "class_perf":
            if self.y not in (0, 1):
                raise ConfigError("class_perf requires y in {0, 1}")
        elif self.kind == "predictive_value":
            if self.a not in (0, 1):
                raise ConfigError("predictive_value requires a in {0, 1}")
        else:
            raise ConfigError(f"unknown measure kind {self.kind!r}")

    @classmethod
    def utility(cls, u) -> "PerformanceMeasure":
        return cls(kind="utility", u=tuple(map(tuple, np.asarray(u, float).tolist())))

    @classmethod
    def accuracy(cls) -> "PerformanceMeasure":
        return cls.utility([[1.0, 0.0], [0.0, 1.0]])

    @classmethod
    def class_perf(cls, y: int) -> "PerformanceMeasure":
        return cls(kind="class_perf", y=y)

    @classmethod
    def predictive_value(cls, a: int) -> "PerformanceMeasure":
        return cls(kind="predictive_value", a=a)

    @property
    def label(self) -> str:
        if self.kind == "utility":
            u = np.asarray(self.u)
            if np.allclose(u, np.eye(2)):
                return "accuracy"
            flat = ",".join(repr(float(v)) for v in u.ravel())
            return f"utility[{flat}]"
        if self.kind == "class_perf":
            return "tpr" if self.y == 1 else "fpr"
        return "ppv" if self.a == 1 else "npv"

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "label": self.label}
        if self.kind == "utility":
            out["u"] = [list(r) for r in self.u]
        elif self.kind == "class_perf":
            out["y"] = self.y
        else:
            out["a"] = self.a
        return out


_MEASURE_ALIASES = {
    "accuracy": PerformanceMeasure.accuracy,
    "tpr": lambda: PerformanceMeasure.class_perf(1),
    "fpr": lambda: PerformanceMeasure.class_perf(0),
    "ppv": lambda: PerformanceMeasure.predictive_value(1),
    "npv": lambda: PerformanceMeasure.predictive_value(0),
}


def parse_measure(spec: str) -> PerformanceMeasure:
    """Parse a measure spec: an alias or "utility:u00,u01,u10,u11"."""
    spec = spec.strip().lower()
    if spec in _MEASURE_ALIASES:
        return _MEASURE_ALIASES[spec]()
    if spec.startswith("utility:"):
        try:
            vals = [float(v) for v in spec.split(":", 1)[1].split(",")]
        except ValueError:
            raise ConfigError(f"bad utility values in {spec!r}")
        if len(vals) != 4:
            raise ConfigError("utility measure needs 4 values u00,u01,u10,u11")
        return PerformanceMeasure.utility([[vals[0], vals[1]], [vals[2], vals[3]]])
    raise ConfigError(f"unknown measure {spec!r}")


@dataclass(frozen=True)
class RegretInterval:
    """Lower/upper regret endpoints, with optional bootstrap CI around them."""

    lower: float
    upper: float
    method: str  # "delta" | "baseline"
    measure: PerformanceMeasure
    ci_lower: Optional[float] = None
    ci_upper: Optional[float] = None

    def __post_init__(self):
        if self.method not in ("delta", "baseline"):
            raise ConfigError(f"unknown interval method {self.method!r}")
        if self.lower > self.upper + 1e-12:
            raise NumericError(
                f"regret interval lower {self.lower} exceeds upper {self.upper}"
            )
        if self.ci_lower is not None and self.ci_upper is not None:
            if self.ci_lower > self.ci_upper:
                raise NumericError("ci_lower exceeds ci_upper")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "method": self.method,
            "measure": self.measure.to_dict(),
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
        }


def dump_json(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
