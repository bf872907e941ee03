import numpy as np
import pytest

from policyregret.assumptions import CausalAssumption
from policyregret.core import (
    ConfigError,
    DataError,
    ObservationalDataset,
    PerformanceMeasure,
)
from policyregret.estimation import (
    EstimationConfig,
    bootstrap_ci,
    cross_fit_regret,
    dr_vstat_bound,
    plugin_vstat_bound,
    subgroup_report,
)
from policyregret.nuisance import ClassifierConfig
from policyregret.synthetic import (
    FunctionModel,
    SyntheticWorld,
    generate,
    oracle_regret,
)

ACC = PerformanceMeasure.accuracy()
MSM14 = CausalAssumption.msm(1.4)


def _cfg(**kw):
    kw.setdefault("bootstrap_b", 0)
    return EstimationConfig(**kw)


def _const(p):
    return FunctionModel(lambda x: np.full(np.atleast_2d(x).shape[0], p))


class TestConfig:
    def test_validation(self):
        with pytest.raises(ConfigError):
            EstimationConfig(k_folds=1)
        with pytest.raises(ConfigError):
            EstimationConfig(estimator="magic")
        with pytest.raises(ConfigError):
            EstimationConfig(ci_level=1.0)

    def test_dr_requires_odds_ratio_assumption(self):
        w = SyntheticWorld.sample(seed=0)
        data = generate(w, 600).data
        with pytest.raises(ConfigError, match="doubly_robust"):
            cross_fit_regret(
                data, [ACC], CausalAssumption.manski(),
                _cfg(estimator="doubly_robust"),
            )


class TestPluginVstatBound:
    def test_constant_inputs(self):
        # tau in [0, 0.8], e0 = 0.5, pi1 = 1 -> h10 = [0, 0.4] before capping
        n = 40
        d = np.array([0, 1] * (n // 2))
        fold = ObservationalDataset(
            x=np.zeros((n, 1)), d=d, pi1=np.ones(n),
            y=np.where(d == 1, 1.0, np.nan),
        )
        from policyregret.assumptions import BoundingFunctions

        tau = BoundingFunctions(
            lo=lambda x: np.zeros(np.atleast_2d(x).shape[0]),
            hi=lambda x: np.full(np.atleast_2d(x).shape[0], 0.8),
        )
        lo, hi = plugin_vstat_bound(fold, tau, _const(0.5), t=1)
        assert lo == 0.0
        assert hi == pytest.approx(0.4, abs=1e-15)


class TestDrVstatBound:
    def test_hand_computed_value(self):
        # rows: (d=1, y=1) and (d=0); pi1 = 0.5, e1_hat = 0.8, mu1_hat = 0.6
        # phi_1 = 1.2 * 0.5 * (0.2/0.8) * (1 - 0.6) = 0.06
        # phi_2 = 1.2 * 0.5 * 0.6 = 0.36; mean = 0.21; rho_10 = 0.25
        fold = ObservationalDataset(
            x=np.zeros((2, 1)), d=np.array([1, 0]),
            pi1=np.array([0.5, 0.5]), y=np.array([1.0, np.nan]),
        )
        val = dr_vstat_bound(fold, 1.2, _const(0.8), _const(0.6), t=1, side="upper")
        assert val == pytest.approx(0.21, abs=1e-12)

    def test_lower_side_uses_inverse_lambda(self):
        fold = ObservationalDataset(
            x=np.zeros((2, 1)), d=np.array([1, 0]),
            pi1=np.array([0.5, 0.5]), y=np.array([1.0, np.nan]),
        )
        hi = dr_vstat_bound(fold, 1.2, _const(0.8), _const(0.6), t=1, side="upper")
        lo = dr_vstat_bound(fold, 1.2, _const(0.8), _const(0.6), t=1, side="lower")
        assert lo == pytest.approx(hi / 1.2 ** 2, abs=1e-12)

    def test_clamped_to_rho(self):
        fold = ObservationalDataset(
            x=np.zeros((2, 1)), d=np.array([1, 1]),
            pi1=np.array([1.0, 1.0]), y=np.array([1.0, 1.0]),
        )
        val = dr_vstat_bound(fold, 2.0, _const(0.5), _const(0.9), t=1, side="upper")
        assert val == 0.0  # rho_10 = 0 forces the collapse

    def test_dr_matches_plugin_at_truth(self):
        w = SyntheticWorld.sample(seed=1, mode="msm", lam=1.4)
        s = generate(w, 30000)
        e1 = FunctionModel(lambda x: s.pi0[: np.atleast_2d(x).shape[0]])
        # supply exact per-row truths by indexing (x rows are the sample rows)
        data = s.data
        e1 = FunctionModel(lambda x: s.pi0)
        mu1 = FunctionModel(lambda x: s.mu1)
        dr = dr_vstat_bound(data, 1.4, e1, mu1, t=1, side="upper")
        plug = float(np.mean(data.pi1 * (1.0 - s.pi0) * np.clip(1.4 * s.mu1, 0, 1)))
        # small gap from the clip at 1 (DR has no pointwise clip)
        assert dr == pytest.approx(plug, abs=0.02)


class TestCrossFitRegret:
    def test_coverage_and_width_on_msm_world(self):
        w = SyntheticWorld.sample(seed=2, mode="msm", lam=1.4)
        s = generate(w, 20000)
        report = cross_fit_regret(s.data, [ACC], MSM14, _cfg(seed=3))
        d_iv = report.interval(ACC, "delta")
        b_iv = report.interval(ACC, "baseline")
        truth = oracle_regret(s, ACC)
        assert d_iv.contains(truth)
        assert d_iv.width < b_iv.width

    def test_all_d1_collapses_to_point(self):
        rng = np.random.default_rng(4)
        n = 400
        data = ObservationalDataset(
            x=rng.standard_normal((n, 2)),
            d=np.ones(n, dtype=int),
            pi1=rng.random(n),
            y=rng.integers(0, 2, n).astype(float),
        )
        report = cross_fit_regret(data, [ACC], MSM14, _cfg(seed=0))
        d_iv = report.interval(ACC, "delta")
        assert d_iv.lower == pytest.approx(d_iv.upper, abs=1e-12)
        b_iv = report.interval(ACC, "baseline")
        assert b_iv.lower == pytest.approx(d_iv.lower, abs=1e-12)

    def test_k2_vs_k4_stability(self):
        w = SyntheticWorld.sample(seed=5)
        data = generate(w, 8000).data
        r2 = cross_fit_regret(data, [ACC], MSM14, _cfg(seed=6, k_folds=2))
        r4 = cross_fit_regret(data, [ACC], MSM14, _cfg(seed=6, k_folds=4))
        h10s = np.array([d["h10"] for d in r4.diagnostics])
        fold_se = h10s[:, 1].std() / np.sqrt(len(h10s)) + 1e-3
        gap = abs(r2.interval(ACC, "delta").upper - r4.interval(ACC, "delta").upper)
        assert gap < 10 * fold_se

    def test_determinism(self):
        w = SyntheticWorld.sample(seed=7)
        data = generate(w, 2000).data
        r1 = cross_fit_regret(data, [ACC], MSM14, _cfg(seed=8))
        r2 = cross_fit_regret(data, [ACC], MSM14, _cfg(seed=8))
        assert r1.interval(ACC, "delta").lower == r2.interval(ACC, "delta").lower
        assert r1.interval(ACC, "delta").upper == r2.interval(ACC, "delta").upper

    def test_too_small_dataset(self):
        data = ObservationalDataset(
            x=np.zeros((3, 1)), d=np.array([1, 1, 1]),
            pi1=np.full(3, 0.5), y=np.ones(3),
        )
        with pytest.raises(DataError):
            cross_fit_regret(data, [ACC], MSM14, _cfg(k_folds=2))

    def test_empty_measure_list(self):
        w = SyntheticWorld.sample(seed=9)
        data = generate(w, 400).data
        with pytest.raises(ConfigError):
            cross_fit_regret(data, [], MSM14, _cfg())

    def test_dr_close_to_plugin_on_large_sample(self):
        w = SyntheticWorld.sample(seed=10, mode="msm", lam=1.2)
        data = generate(w, 20000).data
        a = CausalAssumption.msm(1.2)
        rp = cross_fit_regret(data, [ACC], a, _cfg(seed=11))
        rd = cross_fit_regret(data, [ACC], a, _cfg(seed=11, estimator="doubly_robust"))
        assert rp.interval(ACC, "delta").upper == pytest.approx(
            rd.interval(ACC, "delta").upper, abs=0.03
        )


class TestBootstrap:
    def _data(self, n=1200, seed=12):
        return generate(SyntheticWorld.sample(seed=seed), n).data

    def test_b1_degenerate(self):
        data = self._data()
        cis = bootstrap_ci(data, [ACC], MSM14, _cfg(seed=13, bootstrap_b=1))
        lo_ci, hi_ci = cis[("accuracy", "delta")]
        assert lo_ci <= hi_ci

    def test_determinism_and_jobs_independence(self):
        data = self._data()
        c1 = bootstrap_ci(data, [ACC], MSM14, _cfg(seed=14, bootstrap_b=8))
        c2 = bootstrap_ci(data, [ACC], MSM14, _cfg(seed=14, bootstrap_b=8))
        c3 = bootstrap_ci(data, [ACC], MSM14, _cfg(seed=14, bootstrap_b=8, jobs=2))
        assert c1 == c2 == c3

    def test_ci_attached_to_report(self):
        data = self._data()
        report = cross_fit_regret(
            data, [ACC], MSM14, EstimationConfig(bootstrap_b=8, seed=15)
        )
        iv = report.interval(ACC, "delta")
        assert iv.ci_lower is not None and iv.ci_upper is not None
        assert iv.ci_lower <= iv.lower + 1e-9
        assert iv.ci_upper >= iv.upper - 1e-9


class TestSubgroups:
    def _grouped(self, sizes, seed=16):
        n = sum(sizes)
        data = generate(SyntheticWorld.sample(seed=seed), n).data
        labels = np.concatenate(
            [np.full(k, f"g{i}", dtype=object) for i, k in enumerate(sizes)]
        )
        return ObservationalDataset(
            x=data.x.copy(), d=data.d.copy(), pi1=data.pi1.copy(),
            y=data.y.copy(), group=labels,
        )

    def test_small_group_skipped(self):
        data = self._grouped([400, 10])
        report = subgroup_report(data, [ACC], MSM14, _cfg(seed=17))
        assert "g0" in report.groups
        assert "g1" in report.skipped_groups
        assert "below minimum" in report.skipped_groups["g1"]

    def test_homogeneous_groups_cover_pooled(self):
        data = self._grouped([3000, 3000], seed=18)
        report = subgroup_report(data, [ACC], MSM14, _cfg(seed=19))
        pooled = report.interval(ACC, "delta")
        center = 0.5 * (pooled.lower + pooled.upper)
        for g in ("g0", "g1"):
            g_iv = report.groups[g].interval(ACC, "delta")
            assert g_iv.contains(center, tol=0.05)

    def test_no_group_column(self):
        data = generate(SyntheticWorld.sample(seed=20), 300).data
        with pytest.raises(DataError):
            subgroup_report(data, [ACC], MSM14, _cfg())

    def test_lower_selection_rate_widens_interval(self):
        # same outcome process, one group selects far fewer rows: its
        # unidentified mass rho_t0 is larger, so its interval is wider
        rng = np.random.default_rng(21)
        n = 6000
        x = rng.standard_normal((n, 2))
        group = np.where(np.arange(n) < n // 2, "high", "low").astype(object)
        p_sel = np.where(group == "high", 0.85, 0.3)
        d = (rng.random(n) < p_sel).astype(int)
        pi1 = 1.0 / (1.0 + np.exp(-x[:, 0]))
        mu = 1.0 / (1.0 + np.exp(-x[:, 1]))
        y = np.where(d == 1, (rng.random(n) < mu).astype(float), np.nan)
        data = ObservationalDataset(x=x, d=d, pi1=pi1, y=y, group=group)
        report = subgroup_report(data, [ACC], MSM14, _cfg(seed=22))
        w_high = report.groups["high"].interval(ACC, "delta").width
        w_low = report.groups["low"].interval(ACC, "delta").width
        assert w_low > w_high
