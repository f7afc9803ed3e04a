import json
import math

import numpy as np
import pytest

from logic.channel_model import AoaGrid, ArrayGeometry, ScenarioParams, generate_scenario
from logic.errors import DomainError
from logic.pilot_design import (
    BijectivityReport,
    PilotSequence,
    compute_alpha,
    corollary1_length,
    design_pilot,
    distinguishability_curve,
    distinguishability_report,
    min_pilot_length,
    pair_max_angle,
    pilot_requirement_curve,
    scan_mapping_angle,
)


class TestDesignPilot:
    def test_single_symbol_is_j(self):
        pilot = design_pilot(1)
        np.testing.assert_allclose(pilot.symbols, [1j], atol=1e-12)

    def test_two_symbols(self):
        np.testing.assert_allclose(design_pilot(2).angles, [math.pi / 4, math.pi / 2])

    def test_power_four(self):
        pilot = design_pilot(4, power=4.0)
        np.testing.assert_allclose(np.abs(pilot.symbols), 2.0)
        np.testing.assert_allclose(pilot.angles, [math.pi / 8, math.pi / 4, 3 * math.pi / 8, math.pi / 2])

    @pytest.mark.parametrize("n", [3, 10, 257])
    def test_angles_evenly_sample_first_quadrant(self, n):
        angles = design_pilot(n).angles
        assert angles[0] > 0
        assert angles[-1] == pytest.approx(math.pi / 2)
        np.testing.assert_allclose(np.diff(angles), math.pi / (2 * n))

    @pytest.mark.parametrize("n, power", [(0, 1.0), (2, 0.0), (2, -1.0), (1.5, 1.0)])
    def test_invalid(self, n, power):
        with pytest.raises(DomainError):
            design_pilot(n, power)

    def test_sequence_rejects_uneven_power(self):
        with pytest.raises(DomainError):
            PilotSequence(np.array([1.0, 2.0j]), 1.0)


class TestPairAngle:
    def test_hand_example(self):
        assert pair_max_angle([1, 1j], [1, -1]) == pytest.approx(math.pi / 2)

    def test_identical(self, multipath_set):
        assert pair_max_angle(multipath_set[0], multipath_set[0]) == 0.0

    def test_positive_rescaling_keeps_zero_angle(self, multipath_set):
        h = multipath_set[4].entries
        assert pair_max_angle(h, 2.5 * h) == 0.0

    def test_wraps_around(self):
        assert pair_max_angle([1], [np.exp(1.5j * math.pi)]) == pytest.approx(math.pi / 2)

    def test_symmetric(self, multipath_set):
        for u, v in [(0, 1), (3, 7), (5, 20)]:
            forward = pair_max_angle(multipath_set[u], multipath_set[v])
            assert forward == pytest.approx(pair_max_angle(multipath_set[v], multipath_set[u]))

    def test_global_phase_changes_the_angle(self):
        base = pair_max_angle([1, 1], [1, 1j])
        rotated = pair_max_angle([1, 1], np.exp(1j * math.pi / 4) * np.array([1, 1j]))
        assert base == pytest.approx(math.pi / 2)
        assert rotated == pytest.approx(3 * math.pi / 4)

    def test_zero_entry_names_element(self):
        with pytest.raises(DomainError, match="Element 1"):
            pair_max_angle([1, 0], [1, 1])


class TestAlpha:
    def test_three_channel_set(self):
        assert compute_alpha([[1, 1j], [1, -1], [1j, 1j]]) == pytest.approx(math.pi / 2)

    def test_two_channel_set_is_pair_angle(self, multipath_set):
        pair = multipath_set.subset([2, 9])
        assert compute_alpha(pair) == pytest.approx(pair_max_angle(multipath_set[2], multipath_set[9]), rel=1e-12)

    def test_needs_two_channels(self):
        with pytest.raises(DomainError):
            compute_alpha([[1, 1j]])

    def test_degenerate_pair_is_reported(self):
        scan = scan_mapping_angle([[1, 1j], [2, 2j], [1, -1]])
        assert scan.degenerate
        assert scan.closest_pair == (0, 1)

    def test_equal_phases_give_exact_zero(self, multipath_set):
        h = multipath_set[0].entries
        scan = scan_mapping_angle([h, 2 * h, -h])
        assert scan.alpha == 0.0
        assert scan.closest_pair == (0, 1)

    def test_parallel_scan_matches_sequential(self, multipath_set):
        sequential = scan_mapping_angle(multipath_set, jobs=1)
        parallel = scan_mapping_angle(multipath_set, jobs=4)
        assert sequential == parallel


class TestPilotLength:
    def test_wide_array_alpha(self):
        assert min_pilot_length(0.2476) == 7

    def test_two_antenna_alpha_with_rounding_straddle(self):
        assert min_pilot_length(3.07e-5) in {51166, 51167}

    def test_quadrant(self):
        assert min_pilot_length(math.pi / 2) == 1

    @pytest.mark.parametrize("alpha", [0.0, -0.1, 4.0])
    def test_invalid_alpha(self, alpha):
        with pytest.raises(DomainError):
            min_pilot_length(alpha)

    def test_closed_form_examples(self):
        assert corollary1_length(101, 0.1) == 2
        assert corollary1_length(2, math.pi / 2) == 1
        assert corollary1_length(10 ** 6, 0.5) == 1

    def test_closed_form_needs_two_antennas(self):
        with pytest.raises(DomainError):
            corollary1_length(1, 0.3)

    def test_closed_form_agrees_with_scan(self):
        for m in range(2, 65):
            for k in range(1, 21):
                delta = round(0.05 * k, 2)
                channels = generate_scenario(ArrayGeometry(m), 2, 1, AoaGrid(aoas=[0.0, delta]), "unit")
                assert corollary1_length(m, delta) == min_pilot_length(compute_alpha(channels)), (m, delta)

    def test_more_antennas_need_fewer_pilots(self):
        scenario = ScenarioParams(num_users=20, num_paths=1, aoa_grid=AoaGrid(min_separation=0.05), seed=1)
        lengths = [min_pilot_length(compute_alpha(scenario.build(m))) for m in range(2, 65)]
        assert all(b <= a for a, b in zip(lengths, lengths[1:]))
        assert lengths[-1] < lengths[0]

    def test_requirement_curve_matches_closed_form(self):
        scenario = ScenarioParams(num_users=20, num_paths=1, aoa_grid=AoaGrid(min_separation=0.05), seed=1)
        rows = pilot_requirement_curve(scenario, [2, 4, 16, 64])
        assert [r.num_antennas for r in rows] == [2, 4, 16, 64]
        for row in rows:
            assert row.corollary1_length == row.min_pilot_length
        assert rows[-1].min_pilot_length == 7


class TestDistinguishability:
    def test_two_single_antenna_channels(self):
        report = distinguishability_report([[1], [1j]], design_pilot(1))
        assert report.pairs_total == 1
        assert report.pairs_distinguishable == 1
        assert report.distinguishable_fraction == 1.0
        assert report.bijective

    def test_duplicate_channels_never_separate(self):
        channels = [[1, 1j], [1, 1j], [1, -1]]
        for n in (1, 4, 64):
            report = distinguishability_report(channels, design_pilot(n))
            assert report.pairs_total == 3
            assert report.pairs_distinguishable == 2
            assert report.undistinguishable_pairs == [(0, 1)]
            assert report.channels_uniquely_identified_fraction == pytest.approx(1 / 3)
            assert report.degenerate
            assert report.min_pilot_length is None

    def test_designed_length_is_sufficient(self, multipath_set):
        alpha = compute_alpha(multipath_set)
        report = distinguishability_report(multipath_set, design_pilot(min_pilot_length(alpha)))
        assert report.distinguishable_fraction == 1.0
        assert report.channels_uniquely_identified_fraction == 1.0
        assert report.min_pilot_length == min_pilot_length(alpha)

    def test_listed_pairs_are_capped(self):
        channels = [[1 + 0.01j * k] for k in range(1, 31)]
        report = distinguishability_report(channels, design_pilot(1), max_listed_pairs=10)
        assert report.pairs_total == 435
        assert report.pairs_distinguishable == 0
        assert len(report.undistinguishable_pairs) == 10
        assert report.undistinguishable_pairs_truncated
        assert report.undistinguishable_pairs[:2] == [(0, 1), (0, 2)]
        assert not report.degenerate

    def test_nested_pilots_never_lose_pairs(self):
        for seed in range(10):
            channels = generate_scenario(ArrayGeometry(4), 30, 3, AoaGrid(min_separation=0.1), "complex-gaussian",
                                         seed=seed)
            for n in (1, 2, 3, 5):
                short = distinguishability_report(channels, design_pilot(n))
                long = distinguishability_report(channels, design_pilot(2 * n))
                assert long.pairs_distinguishable >= short.pairs_distinguishable

    def test_curve_reports_every_length(self, multipath_set):
        reports = distinguishability_curve(multipath_set, [1, 2, 4])
        assert [r.pilot_length for r in reports] == [1, 2, 4]
        assert len({r.alpha for r in reports}) == 1

    def test_report_serializes(self, unit_grid_set):
        report = distinguishability_report(unit_grid_set, design_pilot(3))
        data = json.loads(json.dumps(report.to_dict()))
        assert data["pilot_length"] == 3
        assert data["pairs_total"] == 45
        assert isinstance(BijectivityReport(**{k: v for k, v in data.items()
                                              if k not in ("distinguishable_fraction", "bijective")}),
                          BijectivityReport)


def _random_sets(count, max_length=1024):
    """Random multipath sets whose designed pilot stays small enough to enumerate"""
    rng = np.random.default_rng(2718)
    seed = 0
    produced = 0
    while produced < count:
        seed += 1
        num_users = int(rng.integers(2, 65))
        m = int(rng.integers(2, 33))
        paths = int(rng.choice([1, 3]))
        aoas = rng.uniform(0.0, math.pi, size=num_users)
        gain_model = "unit" if paths == 1 and rng.random() < 0.5 else "complex-gaussian"
        try:
            channels = generate_scenario(ArrayGeometry(m), num_users, paths, AoaGrid(aoas=aoas), gain_model, seed)
        except DomainError:
            continue
        scan = scan_mapping_angle(channels)
        if scan.degenerate or min_pilot_length(scan.alpha) > max_length:
            continue
        produced += 1
        yield channels, min_pilot_length(scan.alpha)


def test_designed_pilots_separate_random_sets():
    shortened_failures = 0
    for channels, n in _random_sets(100):
        assert distinguishability_report(channels, design_pilot(n)).distinguishable_fraction == 1.0
        short = max(1, math.ceil(n / 4))
        if distinguishability_report(channels, design_pilot(short)).distinguishable_fraction < 1.0:
            shortened_failures += 1
    assert shortened_failures > 0
