import math

import numpy as np
import pytest

from logic.errors import DomainError
from logic.evaluation import (
    db_to_linear,
    evaluate_estimates,
    linear_to_db,
    nmse_metric,
    per_antenna_snr,
    upper_bound_snr,
)
from logic.learning import channels_to_real, nmse_loss


def test_db_conversions():
    assert db_to_linear(10.0) == pytest.approx(10.0)
    assert db_to_linear(0.0) == 1.0
    assert linear_to_db(100.0) == pytest.approx(20.0)
    assert linear_to_db(0.0) == -math.inf


class TestNmse:
    def test_exact_estimate(self, multipath_set):
        assert nmse_metric(multipath_set[0], multipath_set[0]) == 0.0

    def test_zero_estimate_is_one(self):
        assert nmse_metric([1 + 1j, 2], [0, 0]) == pytest.approx(1.0)

    def test_doubled_estimate(self):
        assert nmse_metric([1j, -1], [2j, -2]) == pytest.approx(1.0)

    def test_orthogonal_error_of_equal_norm(self):
        assert nmse_metric([1, 1j], [2, 0]) == pytest.approx(1.0)

    def test_orthogonal_components_add(self, multipath_set, rng):
        for u in (0, 5, 17):
            h = multipath_set[u].entries
            along = (rng.normal() + 1j * rng.normal()) * h
            noise = rng.normal(size=h.size) + 1j * rng.normal(size=h.size)
            across = noise - (np.vdot(h, noise) / np.vdot(h, h)) * h
            expected = (np.sum(np.abs(along) ** 2) + np.sum(np.abs(across) ** 2)) / np.sum(np.abs(h) ** 2)
            assert nmse_metric(h, h + along + across) == pytest.approx(expected, rel=1e-10)

    def test_scale_invariant(self, multipath_set, rng):
        h = multipath_set[3].entries
        estimate = h + 0.2 * (rng.normal(size=h.size) + 1j * rng.normal(size=h.size))
        reference = nmse_metric(h, estimate)
        for c in (-3.0, 1e-3, 250.0):
            assert nmse_metric(c * h, c * estimate) == pytest.approx(reference, rel=1e-12)
            assert nmse_loss(c * channels_to_real([estimate]), c * channels_to_real([h])) == \
                pytest.approx(reference, rel=1e-12)

    def test_zero_true_channel(self):
        with pytest.raises(DomainError):
            nmse_metric([0, 0], [1, 1])

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            nmse_metric([1, 1], [1, 1, 1])


class TestBeamformingSnr:
    def test_half_matched(self):
        assert per_antenna_snr([1, 1], [1, 0], rho=1.0) == pytest.approx(0.5)
        assert upper_bound_snr([1, 1], rho=1.0) == pytest.approx(1.0)

    def test_perfect_estimate_reaches_bound(self, multipath_set):
        h = multipath_set[4]
        assert per_antenna_snr(h, h, rho=2.0) == pytest.approx(upper_bound_snr(h, rho=2.0))

    def test_invariant_to_complex_scaling(self, multipath_set, rng):
        h = multipath_set[6].entries
        estimate = h + 0.3 * (rng.normal(size=h.size) + 1j * rng.normal(size=h.size))
        scaled = (0.2 - 1.7j) * estimate
        assert per_antenna_snr(h, scaled, 1.0) == pytest.approx(per_antenna_snr(h, estimate, 1.0))

    def test_never_exceeds_bound(self, multipath_set, rng):
        for h in multipath_set:
            estimate = rng.normal(size=16) + 1j * rng.normal(size=16)
            assert per_antenna_snr(h, estimate, 1.0) <= upper_bound_snr(h, 1.0) * (1 + 1e-12)

    def test_orthogonal_estimate(self):
        assert per_antenna_snr([1, 1], [1, -1], rho=1.0) == pytest.approx(0.0, abs=1e-15)

    def test_zero_estimate(self):
        with pytest.raises(DomainError):
            per_antenna_snr([1, 1], [0, 0], rho=1.0)


class TestEvaluateEstimates:
    def test_mean_of_linear_values(self):
        metrics = evaluate_estimates([[1, 1], [1, 1]], [[1, 1], [1, 0]], rho=1.0)
        assert metrics.num_samples == 2
        assert metrics.mean_snr_per_antenna_db == pytest.approx(10 * math.log10(0.75))
        assert metrics.upper_bound_db == pytest.approx(0.0)
        assert metrics.nmse == pytest.approx(0.25)

    def test_matches_per_sample_functions(self, multipath_set, rng):
        truth = multipath_set.matrix
        estimates = truth + 0.5 * (rng.normal(size=truth.shape) + 1j * rng.normal(size=truth.shape))
        metrics = evaluate_estimates(truth, estimates, rho=db_to_linear(3.0))
        nmse = np.mean([nmse_metric(h, e) for h, e in zip(truth, estimates)])
        snr = np.mean([per_antenna_snr(h, e, db_to_linear(3.0)) for h, e in zip(truth, estimates)])
        assert metrics.nmse == pytest.approx(nmse)
        assert metrics.mean_snr_per_antenna_db == pytest.approx(linear_to_db(snr))
        assert metrics.mean_snr_per_antenna_db <= metrics.upper_bound_db

    def test_zero_estimates_count_as_no_gain(self):
        metrics = evaluate_estimates([[1, 1], [1, 1]], [[0, 0], [1, 1]], rho=1.0)
        assert metrics.zero_estimates == 1
        assert metrics.mean_snr_per_antenna_db == pytest.approx(10 * math.log10(0.5))

    def test_to_dict(self):
        data = evaluate_estimates([[1, 1j]], [[1, 1j]], rho=1.0).to_dict()
        assert set(data) == {"nmse", "mean_snr_per_antenna_db", "upper_bound_db", "num_samples", "zero_estimates"}

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            evaluate_estimates([[1, 1]], [[1, 1], [1, 1]], rho=1.0)
