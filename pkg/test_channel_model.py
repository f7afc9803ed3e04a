import math

import numpy as np
import pytest

from logic.channel_model import (
    AoaGrid,
    ArrayGeometry,
    ChannelSet,
    ChannelVector,
    PathComponent,
    ScenarioParams,
    array_response,
    generate_scenario,
    synthesize_channel,
)
from logic.errors import ConfigurationError, DomainError


class TestArrayResponse:
    def test_broadside_is_all_ones(self):
        h = array_response(ArrayGeometry(4), math.pi / 2)
        np.testing.assert_allclose(h.entries, np.ones(4), atol=1e-12)

    def test_endfire_alternates(self):
        h = array_response(ArrayGeometry(2), 0.0)
        np.testing.assert_allclose(h.entries, [1, -1], atol=1e-12)

    def test_sixty_degrees(self):
        h = array_response(ArrayGeometry(3), math.pi / 3)
        np.testing.assert_allclose(h.entries, [1, 1j, -1], atol=1e-12)

    def test_unit_magnitude(self, rng):
        geometry = ArrayGeometry(64, 0.37)
        for aoa in rng.uniform(0, math.pi, size=20):
            np.testing.assert_allclose(np.abs(array_response(geometry, aoa).entries), 1.0, atol=1e-12)

    @pytest.mark.parametrize("aoa", [-0.1, math.pi, 4.0])
    def test_out_of_range_aoa(self, aoa):
        with pytest.raises(DomainError):
            array_response(ArrayGeometry(4), aoa)

    def test_invalid_geometry(self):
        with pytest.raises(DomainError):
            ArrayGeometry(0)
        with pytest.raises(DomainError):
            ArrayGeometry(4, 0.0)


class TestSynthesizeChannel:
    def test_single_path_matches_response(self):
        h = synthesize_channel(ArrayGeometry(4), [PathComponent(1.0, math.pi / 2)])
        np.testing.assert_allclose(h.entries, np.ones(4), atol=1e-12)

    def test_cancelling_paths_give_zero(self):
        h = synthesize_channel(ArrayGeometry(4), [PathComponent(1.0, 0.4), PathComponent(-1.0, 0.4)])
        assert h.is_zero()

    def test_two_paths(self):
        h = synthesize_channel(ArrayGeometry(2), [PathComponent(1.0, math.pi / 2), PathComponent(1j, 0.0)])
        np.testing.assert_allclose(h.entries, [1 + 1j, 1 - 1j], atol=1e-12)

    def test_empty_paths(self):
        with pytest.raises(DomainError):
            synthesize_channel(ArrayGeometry(4), [])

    def test_linearity(self, rng):
        geometry = ArrayGeometry(12)
        paths = [PathComponent(complex(rng.normal(), rng.normal()), float(rng.uniform(0, math.pi)))
                 for _ in range(6)]
        whole = synthesize_channel(geometry, paths).entries
        parts = synthesize_channel(geometry, paths[:2]).entries + synthesize_channel(geometry, paths[2:]).entries
        np.testing.assert_allclose(whole, parts, atol=1e-12)

    def test_conjugate_symmetry(self, rng):
        geometry = ArrayGeometry(10)
        gains = rng.normal(size=3) + 1j * rng.normal(size=3)
        aoas = rng.uniform(0.05, math.pi - 0.05, size=3)
        h = synthesize_channel(geometry, [PathComponent(g, a) for g, a in zip(gains, aoas)])
        mirrored = synthesize_channel(geometry, [PathComponent(np.conj(g), math.pi - a)
                                                 for g, a in zip(gains, aoas)])
        np.testing.assert_allclose(mirrored.entries, np.conj(h.entries), atol=1e-12)


class TestGenerateScenario:
    def test_unit_grid_users_are_array_responses(self, unit_grid_set):
        assert len(unit_grid_set) == 10
        assert unit_grid_set.num_paths == 1
        assert unit_grid_set.aoa_separation == pytest.approx(0.3)
        for u, channel in enumerate(unit_grid_set):
            expected = array_response(ArrayGeometry(8), 0.3 * u).entries
            np.testing.assert_allclose(channel.entries, expected, atol=1e-12)
            assert channel.meta["user"] == u

    def test_seed_reproducible(self, unit_grid_set, multipath_set):
        again = generate_scenario(ArrayGeometry(8), 10, 1, AoaGrid(min_separation=0.3), "unit", seed=7)
        assert again.same_entries(unit_grid_set)
        again = generate_scenario(ArrayGeometry(16), 24, 3, AoaGrid(min_separation=0.1), "complex-gaussian", seed=11)
        assert again.matrix.tobytes() == multipath_set.matrix.tobytes()

    def test_different_seed_differs(self, multipath_set):
        other = generate_scenario(ArrayGeometry(16), 24, 3, AoaGrid(min_separation=0.1), "complex-gaussian", seed=12)
        assert not other.same_entries(multipath_set)

    def test_multipath_matches_synthesis(self, multipath_set):
        geometry = multipath_set.geometry
        for u, channel in enumerate(multipath_set):
            paths = [PathComponent(g, a) for g, a in zip(multipath_set.path_gains[u], multipath_set.path_aoas[u])]
            np.testing.assert_allclose(channel.entries, synthesize_channel(geometry, paths).entries, atol=1e-12)

    def test_infeasible_separation(self):
        with pytest.raises(ConfigurationError):
            generate_scenario(ArrayGeometry(4), 40, 1, AoaGrid(min_separation=0.1), "unit")

    def test_explicit_aoa_list(self):
        aoas = [0.2, 0.9, 1.7]
        channels = generate_scenario(ArrayGeometry(6), 3, 1, AoaGrid(aoas=aoas), "unit")
        assert channels.aoa_separation == pytest.approx(0.7)
        np.testing.assert_allclose(channels[2].entries, array_response(ArrayGeometry(6), 1.7).entries)

    def test_grid_layout_neighbours_are_close(self):
        scenario = ScenarioParams(num_antennas=16, num_users=50, num_paths=4, aoa_grid=AoaGrid(min_separation=0.002),
                                  gain_model="complex-gaussian", layout="grid", seed=5)
        matrix = scenario.build().matrix
        neighbour = np.linalg.norm(matrix[1] - matrix[0])
        far = np.linalg.norm(matrix[-1] - matrix[0])
        assert neighbour < far

    def test_same_users_at_every_antenna_count(self, small_scenario):
        small = small_scenario.build(4).matrix
        large = small_scenario.build(16).matrix
        np.testing.assert_allclose(large[:, :4], small, atol=1e-12)

    def test_unknown_gain_model(self):
        with pytest.raises(ConfigurationError):
            generate_scenario(ArrayGeometry(4), 3, 1, AoaGrid(min_separation=0.1), "rician")


class TestChannelSet:
    def test_rejects_zero_channel(self):
        geometry = ArrayGeometry(2)
        with pytest.raises(DomainError):
            ChannelSet((ChannelVector([1, 1]), ChannelVector([0, 0])), geometry)

    def test_rejects_duplicates(self):
        geometry = ArrayGeometry(2)
        with pytest.raises(DomainError):
            ChannelSet((ChannelVector([1, 1j]), ChannelVector([1, 1j])), geometry)

    def test_rejects_mixed_geometry(self):
        with pytest.raises(DomainError):
            ChannelSet((ChannelVector([1, 1j]), ChannelVector([1, 1j, 1])), ArrayGeometry(2))

    def test_entries_are_read_only(self, unit_grid_set):
        with pytest.raises(ValueError):
            unit_grid_set[0].entries[0] = 5

    def test_subset_keeps_metadata(self, multipath_set):
        sub = multipath_set.subset([3, 1])
        assert len(sub) == 2
        np.testing.assert_array_equal(sub.matrix[0], multipath_set.matrix[3])
        np.testing.assert_array_equal(sub.path_aoas[1], multipath_set.path_aoas[1])

    def test_scenario_params_round_trip(self, small_scenario):
        assert ScenarioParams.from_dict(small_scenario.to_dict()) == small_scenario

    def test_scenario_params_unknown_key(self):
        with pytest.raises(ConfigurationError):
            ScenarioParams.from_dict({"num_antenas": 4})
