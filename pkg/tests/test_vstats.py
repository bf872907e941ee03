import numpy as np
import pytest

from policyregret.core import (
    DataError,
    ObservationalDataset,
    PerformanceMeasure,
    ZeroDenominatorError,
)
from policyregret.vstats import (
    VStatTable,
    delta_value,
    estimate_identified,
    measure_value,
)


def _table(entries, remainder=(0, 0, 0)):
    """Build a table from {(y,t,d): value}; leftover mass goes to `remainder`."""
    v = np.zeros((2, 2, 2))
    for (y, t, d), val in entries.items():
        v[y, t, d] = val
    v[remainder] += 1.0 - v.sum()
    return VStatTable.from_v(v)


class TestVStatTable:
    def test_sum_to_one_enforced(self):
        v = np.full((2, 2, 2), 0.2)
        with pytest.raises(DataError):
            VStatTable.from_v(v)

    def test_nonnegativity_enforced(self):
        v = np.full((2, 2, 2), 0.125)
        v[0, 0, 0] = -0.1
        v[1, 1, 1] = 0.35
        with pytest.raises(DataError):
            VStatTable.from_v(v)

    def test_rho_cell_sum_consistency(self):
        v = np.full((2, 2, 2), 0.125)
        with pytest.raises(DataError):
            VStatTable(v=v, rho=np.full((2, 2), 0.3))

    def test_serialization_keys(self):
        tbl = VStatTable.from_v(np.full((2, 2, 2), 0.125))
        d = tbl.to_dict()
        assert d["v_101"] == 0.125
        assert d["rho_01"] == 0.25


class TestEstimateIdentified:
    def test_four_row_worked_example(self):
        # rows {(t=1,d=1,y=1),(t=1,d=1,y=0),(t=0,d=1,y=1),(t=0,d=0,y=.)}
        data = ObservationalDataset(
            x=np.zeros((4, 1)),
            d=np.array([1, 1, 1, 0]),
            pi1=np.array([1.0, 1.0, 0.0, 0.0]),
            y=np.array([1.0, 0.0, 1.0, np.nan]),
        )
        ident = estimate_identified(data)
        assert ident.v1[1, 1] == pytest.approx(0.25)
        assert ident.v1[0, 1] == pytest.approx(0.25)
        assert ident.v1[1, 0] == pytest.approx(0.25)
        assert ident.v1[0, 0] == pytest.approx(0.0)
        assert ident.rho[0, 0] == pytest.approx(0.25)
        assert ident.rho[1, 0] == pytest.approx(0.0)

    def test_degenerate_point_mass(self):
        data = ObservationalDataset(
            x=np.zeros((3, 1)),
            d=np.ones(3, dtype=int),
            pi1=np.ones(3),
            y=np.ones(3),
        )
        ident = estimate_identified(data)
        assert ident.v1[1, 1] == pytest.approx(1.0)
        assert ident.v1[0, 1] == 0.0
        assert ident.rho[0, 0] == 0.0

    def test_stochastic_policy_symmetry(self):
        data = ObservationalDataset(
            x=np.zeros((2, 1)),
            d=np.ones(2, dtype=int),
            pi1=np.full(2, 0.5),
            y=np.ones(2),
        )
        ident = estimate_identified(data)
        assert ident.v1[1, 1] == pytest.approx(0.5)
        assert ident.v1[1, 0] == pytest.approx(0.5)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(0)
        n = 200
        d = rng.integers(0, 2, n)
        data = ObservationalDataset(
            x=rng.standard_normal((n, 2)),
            d=d,
            pi1=rng.random(n),
            y=np.where(d == 1, rng.integers(0, 2, n).astype(float), np.nan),
        )
        perm = rng.permutation(n)
        a = estimate_identified(data)
        b = estimate_identified(data.subset(perm))
        np.testing.assert_allclose(a.v1, b.v1, atol=1e-15)
        np.testing.assert_allclose(a.rho, b.rho, atol=1e-15)


class TestMeasureValue:
    def test_utility_worked_example(self):
        # m_u(pi) = 0.2 + 0.1 + 0.06 + 0.3 = 0.66 for accuracy utilities
        tbl = _table({
            (1, 1, 1): 0.2, (1, 1, 0): 0.1, (0, 0, 1): 0.06, (0, 0, 0): 0.3,
            (1, 0, 1): 0.04, (0, 1, 0): 0.1, (0, 1, 1): 0.1,
        }, remainder=(1, 0, 0))
        m = PerformanceMeasure.accuracy()
        assert measure_value(tbl, "proposed", m) == pytest.approx(0.66)

    def test_class_perf_worked_example(self):
        # v_1(.,.) = 0.10, 0.15, 0.04, 0.20 for (00, 10, 01, 11)
        tbl = _table({
            (1, 0, 0): 0.10, (1, 1, 0): 0.15, (1, 0, 1): 0.04, (1, 1, 1): 0.20,
        })
        m = PerformanceMeasure.class_perf(1)
        assert measure_value(tbl, "proposed", m) == pytest.approx(0.35 / 0.49)

    def test_agreeing_policies(self):
        # rho_10 = rho_01 = 0 and zero disagreement-cell mass
        tbl = _table({(1, 1, 1): 0.3, (0, 1, 1): 0.1, (1, 0, 0): 0.2})
        for m in (
            PerformanceMeasure.accuracy(),
            PerformanceMeasure.class_perf(1),
            PerformanceMeasure.predictive_value(1),
        ):
            assert measure_value(tbl, "proposed", m) == pytest.approx(
                measure_value(tbl, "status_quo", m)
            )

    def test_zero_denominator_named(self):
        tbl = _table({(0, 1, 1): 0.5})
        with pytest.raises(ZeroDenominatorError, match="p\\(Y\\(1\\)=1\\)"):
            measure_value(tbl, "proposed", PerformanceMeasure.class_perf(1))


class TestDeltaValue:
    def test_utility_worked_example(self):
        tbl = _table({
            (1, 1, 0): 0.10, (0, 1, 0): 0.10, (1, 0, 1): 0.04, (0, 0, 1): 0.06,
        })
        assert delta_value(tbl, PerformanceMeasure.accuracy()) == pytest.approx(0.02)

    def test_symmetric_disagreement_is_zero(self):
        tbl = _table({(1, 1, 0): 0.07, (1, 0, 1): 0.07, (1, 1, 1): 0.2})
        assert delta_value(tbl, PerformanceMeasure.class_perf(1)) == pytest.approx(0.0)

    def test_ppv_worked_example(self):
        tbl = _table({
            (1, 1, 1): 0.2, (0, 1, 1): 0.1,      # rho_11 = 0.3
            (1, 1, 0): 0.15, (0, 1, 0): 0.05,    # rho_10 = 0.2
            (1, 0, 1): 0.04, (0, 0, 1): 0.06,    # rho_01 = 0.1
        })
        m = PerformanceMeasure.predictive_value(1)
        assert delta_value(tbl, m) == pytest.approx(0.10)

    def test_consistency_identity_random_tables(self):
        rng = np.random.default_rng(7)
        measures = [
            PerformanceMeasure.accuracy(),
            PerformanceMeasure.utility([[2.0, 0.5], [0.1, 3.0]]),
            PerformanceMeasure.class_perf(0),
            PerformanceMeasure.class_perf(1),
            PerformanceMeasure.predictive_value(0),
            PerformanceMeasure.predictive_value(1),
        ]
        for _ in range(100):
            v = 0.6 * rng.dirichlet(np.ones(8)).reshape(2, 2, 2) + 0.05
            tbl = VStatTable.from_v(v)
            for m in measures:
                direct = measure_value(tbl, "proposed", m) - measure_value(
                    tbl, "status_quo", m
                )
                assert delta_value(tbl, m) == pytest.approx(direct, abs=1e-12)

    def test_cancellation_witness(self):
        # delta_u depends only on the disagreement cells: moving mass between
        # the y-splits of the agreement cells (1,1) and (0,0) leaves it fixed
        base = {
            (1, 1, 1): 0.20, (0, 1, 1): 0.10,
            (1, 0, 0): 0.15, (0, 0, 0): 0.15,
            (1, 1, 0): 0.10, (0, 1, 0): 0.05,
            (1, 0, 1): 0.04, (0, 0, 1): 0.06,
        }
        shifted = dict(base)
        shifted[(1, 1, 1)], shifted[(0, 1, 1)] = 0.05, 0.25
        shifted[(1, 0, 0)], shifted[(0, 0, 0)] = 0.27, 0.03
        m = PerformanceMeasure.accuracy()
        t1, t2 = _table(base), _table(shifted)
        assert delta_value(t1, m) == pytest.approx(delta_value(t2, m), abs=1e-12)
        assert measure_value(t1, "proposed", m) != pytest.approx(
            measure_value(t2, "proposed", m)
        )
