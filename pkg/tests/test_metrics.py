import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autogcas.harness.metrics import (
    NotApplicableError,
    dtw_distance,
    nuisance_check,
    reference_command,
    run_metrics,
)
from autogcas.harness.log import COLUMN_INDEX

from helpers import brute_force_dtw, minmax, synthetic_log

Q_MAX = 0.22


def dive_log(h_min=100.0, sat=1.0, t_act=4.0, t_cpa=7.0, t_end=12.0, dt=0.01):
    t = np.arange(0.0, t_end + dt / 2, dt)
    h = h_min + 2.0 * (t - t_cpa) ** 2
    active = t >= t_act
    q = np.where(active & (t < t_cpa), Q_MAX, 0.0)
    # knock a fraction of the pre-CPA window off the bound
    window = np.flatnonzero(active & (t < t_cpa))
    n_off = int(round((1.0 - sat) * window.size))
    q[window[window.size - n_off:]] = 0.5 * Q_MAX
    return synthetic_log(t, dt=dt, h=h, q_cmd=q, q_gcas=q, gcas_active=active.astype(float))


class TestDtw:
    def test_identity(self):
        assert dtw_distance([0.0, 0.3, 1.0, 0.2], [0.0, 0.3, 1.0, 0.2]) == 0.0

    def test_hand_checked_2x2(self):
        assert dtw_distance([0.0, 0.0], [0.0, 1.0]) == 1.0

    def test_constant_sequence_maps_to_zeros(self):
        assert dtw_distance([5.0, 5.0, 5.0], [0.0, 0.0]) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dtw_distance([], [1.0])

    def test_brute_force_sample(self, rng):
        for _ in range(50):
            n, m = rng.integers(1, 7, 2)
            a, b = rng.normal(size=n), rng.normal(size=m)
            assert dtw_distance(a, b) == pytest.approx(brute_force_dtw(minmax(a), minmax(b)), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=6), st.lists(st.floats(-5, 5), min_size=1, max_size=6))
    def test_matches_brute_force_raw(self, a, b):
        assert dtw_distance(a, b, normalise=False) == pytest.approx(brute_force_dtw(a, b), abs=1e-9)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=8), st.lists(st.floats(-5, 5), min_size=1, max_size=8))
    def test_symmetric(self, a, b):
        assert dtw_distance(a, b) == pytest.approx(dtw_distance(b, a), abs=1e-12)


class TestNuisanceCheck:
    def test_constructed_pass(self):
        f = nuisance_check(dive_log())
        assert f.timely and f.aggressive
        assert f.cpa_clearance == pytest.approx(0.0)
        assert f.saturation == 1.0
        assert f.t_activation == pytest.approx(4.0) and f.t_cpa == pytest.approx(7.0)

    def test_early_pull_up_is_not_timely(self):
        assert not nuisance_check(dive_log(h_min=180.0), tolerance_m=30.0).timely

    def test_partial_saturation(self):
        f = nuisance_check(dive_log(sat=0.7), saturation_fraction=0.8)
        assert f.saturation == pytest.approx(0.7, abs=0.01)
        assert not f.aggressive

    def test_lower_bound_counts(self):
        log = dive_log()
        log.data[:, COLUMN_INDEX["q_cmd"]] = np.where(log["q_cmd"] > 0, -0.1, 0.0)
        assert nuisance_check(log).saturation == 1.0

    def test_terrain_estimate_sets_clearance(self):
        log = dive_log(h_min=160.0)
        log.data[:, COLUMN_INDEX["h_dted"]] = 60.0
        assert nuisance_check(log).cpa_clearance == pytest.approx(0.0)

    def test_not_applicable_without_activation(self):
        log = dive_log()
        log.data[:, COLUMN_INDEX["gcas_active"]] = 0.0
        with pytest.raises(NotApplicableError):
            nuisance_check(log)


class TestReferenceCommand:
    def test_rectangular_pulse_then_ramp(self):
        log = dive_log()
        ref = reference_command(log)
        t = log.t
        assert np.all(ref[t < 4.0 - 1e-9] == 0.0)
        assert np.all(ref[(t >= 4.0 - 1e-9) & (t < 7.0 - 1e-9)] == Q_MAX)
        assert ref[-1] == pytest.approx(0.0)
        assert np.all(np.diff(ref[t >= 7.0 - 1e-9]) <= 1e-15)

    def test_self_distance_zero(self):
        ref = reference_command(dive_log())
        assert dtw_distance(ref, ref) == 0.0

    def test_not_applicable(self):
        log = dive_log()
        log.data[:, COLUMN_INDEX["gcas_active"]] = 0.0
        with pytest.raises(NotApplicableError):
            reference_command(log)


class TestRunMetrics:
    def test_success_and_flags(self):
        m = run_metrics(dive_log(h_min=97.0))
        assert m.success and m.activated and m.timely and m.aggressive
        assert m.max_q_cmd == Q_MAX
        assert m.dtw > 0

    def test_ideal_command_has_zero_distance(self):
        log = dive_log()
        log.data[:, COLUMN_INDEX["q_gcas"]] = reference_command(log)
        assert run_metrics(log).dtw == pytest.approx(0.0, abs=1e-12)

    def test_below_tolerance_fails(self):
        assert not run_metrics(dive_log(h_min=94.0)).success

    def test_ground_contact_fails(self):
        log = dive_log()
        log.terminated = "ground contact"
        assert not run_metrics(log).success

    def test_no_activation(self):
        log = dive_log(h_min=400.0)
        log.data[:, COLUMN_INDEX["gcas_active"]] = 0.0
        m = run_metrics(log)
        assert m.success and not m.activated and math.isnan(m.dtw) and m.timely is None

    def test_empty(self):
        with pytest.raises(ValueError):
            run_metrics(synthetic_log(np.zeros(0)))
