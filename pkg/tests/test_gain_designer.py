import math

import numpy as np
import pytest

from autogcas.gain_designer import (
    K_MAX,
    Candidate,
    DesignPoint,
    GainVerificationError,
    GridSpec,
    ObjectiveError,
    ObjectiveWeights,
    SimOptions,
    build_schedule,
    evaluate_objective,
    normalise,
    objective_components,
    optimize_point,
    totals,
    verify_gains,
)
from autogcas.gcas import K1_MIN, EcbfGains, lookup_gains

from helpers import synthetic_log

Q_MAX = 0.22


def _pulse_log():
    t = np.arange(0.0, 6.0 + 1e-9, 0.001)
    q = np.where((t >= 2.0) & (t <= 4.0), Q_MAX, 0.0)
    h = 400.0 - 50.0 * t
    return synthetic_log(t, dt=0.001, q_gcas=q, h=h)


class TestObjective:
    def test_degenerate_log(self):
        t = np.arange(0.0, 1.0, 0.01)
        log = synthetic_log(t, h=np.full(t.size, 100.0))
        assert objective_components(log, 100.0) == (0.0, 0.0, 0.0)

    def test_rectangular_pulse(self):
        j1, j2, j3 = objective_components(_pulse_log(), 100.0)
        assert j1 == pytest.approx(-2.0 * Q_MAX, rel=1e-3)
        assert j2 == -Q_MAX
        assert j3 == pytest.approx(0.0, abs=1e-9)

    def test_dted_shifts_buffer(self):
        t = np.arange(0.0, 1.0, 0.01)
        log = synthetic_log(t, h=np.full(t.size, 180.0))
        assert objective_components(log, 100.0, h_dted=50.0)[2] == pytest.approx(30.0)

    def test_empty_log(self):
        with pytest.raises(ObjectiveError):
            objective_components(synthetic_log(np.zeros(0)), 100.0)

    def test_weight_masking(self):
        log = _pulse_log()
        ref = [(0.0, 0.0, 20.0), (-1.0, -0.3, 0.0)]
        jt, j1, _, _ = evaluate_objective(log, ObjectiveWeights(1.0, 0.0, 0.0), 100.0, reference=ref)
        pool = np.array([r[0] for r in ref] + [j1])
        assert jt == pytest.approx((j1 - pool.min()) / (pool.max() - pool.min()))

    def test_normalise_constant_column(self):
        out = normalise(np.array([[1.0, 2.0], [1.0, 4.0]]))
        np.testing.assert_array_equal(out, [[0.0, 0.0], [0.0, 1.0]])

    def test_collision_is_dominated(self):
        safe = Candidate(1.0, (-0.5, -0.22, 3.0), False, 103.0)
        crash = Candidate(5.0, (-0.9, -0.22, 1e6), True, -1.0)
        for w in [(0.2, 0.3, 0.5), (0.9, 0.0, 0.1), (0.0, 0.0, 1.0)]:
            score = totals([safe, crash], ObjectiveWeights(*w))
            assert np.argmin(score) == 0

    def test_invalid_weights(self):
        with pytest.raises(ValueError):
            ObjectiveWeights(0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            ObjectiveWeights.parse("0.5,0.5")
        assert ObjectiveWeights.parse("1,0,0").w1 == 1.0


class TestGrid:
    def test_default_node_count(self):
        g = GridSpec()
        assert g.shape == (7, 6, 6)
        assert np.prod(g.shape) == 252

    def test_loads(self):
        g = GridSpec.loads("# grid\nphi_deg 0\ntheta_deg -30\nvt_mps 250\n")
        assert g.shape == (1, 1, 1)
        assert g.theta[0] == pytest.approx(math.radians(-30.0))

    def test_loads_missing_axis(self):
        with pytest.raises(ValueError, match="missing"):
            GridSpec.loads("phi_deg 0\ntheta_deg -30\n")


class TestDesignPoint:
    def test_must_dive(self):
        with pytest.raises(ValueError):
            DesignPoint(0.0, 0.1, 250.0)

    def test_random_is_seeded(self):
        a = DesignPoint.random(0.0, -0.5, 250.0, np.random.default_rng(3))
        b = DesignPoint.random(0.0, -0.5, 250.0, np.random.default_rng(3))
        assert a == b and a.h > 100.0


class TestVerifyGains:
    def test_repeated_roots(self):
        assert verify_gains((4.0, 4.0)).eigenvalues == (-2.0, -2.0)
        assert verify_gains((9.0, 6.0)).eigenvalues == (-3.0, -3.0)

    def test_complex_pair_rejected(self):
        with pytest.raises(GainVerificationError, match=r"\(4.0, 3.0\)"):
            verify_gains((4.0, 3.0))

    def test_every_critical_gain_accepted(self):
        for k1 in np.geomspace(K1_MIN, K_MAX, 500):
            verify_gains(EcbfGains.from_k1(float(k1)))


@pytest.fixture(scope="module")
def report(cfg):
    dp = DesignPoint(0.0, math.radians(-20.0), 250.0, alpha=math.radians(2.0), h=900.0)
    return optimize_point(dp, ObjectiveWeights(), cfg, n_sweep=10, n_golden=4)


class TestOptimisation:
    """One short closed-loop design node; the full grid runs through the CLI."""

    def test_chosen_gain_is_best_feasible(self, report):
        score = totals(report.candidates, ObjectiveWeights())
        best = report.candidates[int(np.argmin(score))]
        assert report.gains.k1 == pytest.approx(best.k1)
        assert not best.collided and not report.failed
        verify_gains(report.gains)

    def test_chosen_gain_is_timely(self, report):
        best = min(report.candidates, key=lambda c: abs(c.k1 - report.gains.k1))
        assert abs(best.min_h - 100.0) <= 30.0

    def test_sweep_is_log_spaced(self, report):
        ks = [c.k1 for c in report.candidates[:10]]
        np.testing.assert_allclose(ks, np.geomspace(K1_MIN, K_MAX, 10))

    def test_all_collide_flags_failure(self, cfg):
        # far too low to recover at any gain
        dp = DesignPoint(0.0, math.radians(-60.0), 330.0, h=300.0)
        rep = optimize_point(dp, ObjectiveWeights(), cfg, SimOptions(duration=20.0), n_sweep=3, n_golden=2)
        assert rep.failed and rep.gains.k1 == pytest.approx(K1_MIN)


def test_single_node_schedule(cfg):
    grid = GridSpec(np.array([0.0]), np.radians([-60.0]), np.array([330.0]))
    # one-second runs keep the node cheap; only the plumbing is under test
    opts = SimOptions(duration=1.0)
    sched, reports = build_schedule(grid, ObjectiveWeights(), cfg, seed=1, opts=opts)
    assert sched.shape == (1, 1, 1)
    assert sched.metadata["seed"] == "1"
    g = lookup_gains(sched, 1.0, -0.3, 250.0)
    assert g.k2 == pytest.approx(sched.k2[0, 0, 0])


def test_node_design_independent_of_grid(cfg):
    opts = SimOptions(duration=1.0)
    one = GridSpec(np.array([0.0]), np.radians([-60.0]), np.array([330.0]))
    two = GridSpec(np.array([0.0]), np.radians([-70.0, -60.0]), np.array([330.0]))
    s1, r1 = build_schedule(one, ObjectiveWeights(), cfg, seed=3, opts=opts)
    s2, r2 = build_schedule(two, ObjectiveWeights(), cfg, seed=3, opts=opts)
    assert s2.k2[0, 1, 0] == s1.k2[0, 0, 0]
    assert r2[1].point.h == r1[0].point.h
