"""Tests for source descriptors and dihedral-aligned K-means."""

import math

import numpy as np
import pytest

from intentforge.engine.clustering import (
    MAP_NAMES,
    TRANSFORMS,
    ClusterResult,
    FeatureMaps,
    SourceClusters,
    build_feature_maps,
    cluster,
    cluster_sources,
    descriptor,
    dihedral,
    direction_bin,
    log_polar,
    purity,
    radial_edges,
    transform_window,
)
from intentforge.engine.config import ClusterConfig, RunConfig
from intentforge.engine.models import Agent, Scene, Source
from intentforge.engine.pipeline import archetype_clusters
from intentforge.errors import InputError


def _random_maps(seed: int, half_width: int = 4) -> FeatureMaps:
    rng = np.random.default_rng(seed)
    size = 2 * half_width + 1
    return FeatureMaps(half_width, *(rng.random((size, size)) for _ in MAP_NAMES))


def _transformed(maps: FeatureMaps, rotation: int, mirror: bool) -> FeatureMaps:
    arrays = [np.flipud(m) if mirror else m for m in maps.stack()]
    return FeatureMaps(maps.half_width, *(np.rot90(a, rotation) for a in arrays))


class TestFeatureMaps:
    def test_direction_bins(self):
        assert direction_bin(1, 0) == 0
        assert direction_bin(1, 1) == 1
        assert direction_bin(0, 1) == 2
        assert direction_bin(-1, 0) == 4
        assert direction_bin(0, -1) == 6

    def test_accumulation(self):
        src = Source((5, 5))
        maps = build_feature_maps(src, [[(5, 5), (6, 5), (6, 5)]], half_width=2)
        assert maps.density[2, 2] == 1
        assert maps.density[2, 3] == 2
        assert maps.activeness[2, 2] == 1.0
        assert maps.activeness[2, 3] == 0.0
        assert maps.entropy[2, 2] == 0.0

    def test_entropy_of_two_directions(self):
        src = Source((5, 5))
        tracks = [[(5, 5), (6, 5)], [(5, 5), (5, 6)]]
        maps = build_feature_maps(src, tracks, half_width=2)
        assert maps.entropy[2, 2] == pytest.approx(math.log(2))

    def test_cells_outside_window_ignored(self):
        maps = build_feature_maps(Source((0, 0)), [[(9, 9), (9, 8)]], half_width=2)
        assert maps.density.sum() == 0


class TestLogPolar:
    def test_edges(self):
        edges = radial_edges(10, 5)
        assert len(edges) == 6
        assert edges[0] == 0.0 and edges[1] == 1.0
        assert edges[-1] == pytest.approx(10 * math.sqrt(2))

    def test_centre_mass_spread(self):
        values = np.zeros((5, 5))
        values[2, 2] = 3.0
        hist = log_polar(values, radial_bins=3)
        assert np.allclose(hist[0], 1 / 8)
        assert hist[1:].sum() == 0

    def test_normalized(self):
        hist = log_polar(_random_maps(0).density)
        assert hist.sum() == pytest.approx(1.0)

    def test_empty_map(self):
        assert log_polar(np.zeros((5, 5))).sum() == 0


class TestDihedral:
    @pytest.mark.parametrize("rotation,mirror", TRANSFORMS)
    def test_matches_window_transform(self, rotation, mirror):
        maps = _random_maps(1)
        expected = descriptor(_transformed(maps, rotation, mirror))
        assert np.allclose(dihedral(descriptor(maps), rotation, mirror), expected)

    def test_identity(self):
        desc = descriptor(_random_maps(2))
        assert np.array_equal(dihedral(desc, 0, False), desc)

    def test_eight_transforms(self):
        assert len(set(TRANSFORMS)) == 8


class TestKMeans:
    def test_rotated_copies_share_a_cluster(self):
        a, b = _random_maps(3), _random_maps(4)
        descs = [descriptor(_transformed(a, r, m)) for r, m in TRANSFORMS[:4]]
        descs += [descriptor(_transformed(b, r, m)) for r, m in TRANSFORMS[4:]]
        result = cluster(np.stack(descs), 2, np.random.default_rng(0))
        assert len(set(result.labels[:4])) == 1
        assert len(set(result.labels[4:])) == 1
        assert result.labels[0] != result.labels[4]
        assert result.inertia == pytest.approx(0.0, abs=1e-12)

    def test_history_non_increasing(self):
        descs = np.stack([descriptor(_random_maps(s)) for s in range(12)])
        result = cluster(descs, 3, np.random.default_rng(5), restarts=1)
        assert all(b <= a + 1e-12 for a, b in zip(result.history, result.history[1:]))

    def test_k_bounds(self):
        descs = np.stack([descriptor(_random_maps(s)) for s in range(2)])
        with pytest.raises(InputError):
            cluster(descs, 3, np.random.default_rng(0))

    def test_purity(self):
        assert purity([0, 0, 1, 1], ["a", "a", "b", "a"]) == 0.75
        assert purity([], []) == 1.0

    def test_to_dict(self):
        descs = np.stack([descriptor(_random_maps(s)) for s in range(4)])
        doc = cluster(descs, 2, np.random.default_rng(0)).to_dict()
        assert len(doc["labels"]) == 4
        assert all(len(t) == 2 for t in doc["transforms"])


class TestClusterSources:
    def test_relation_shape_checked(self):
        scene = Scene.open(9, 9, agents=[Agent("a", [(1, 1)], horizon=2)])
        with pytest.raises(InputError):
            cluster_sources(scene, [Source((4, 4))], np.ones((2, 1)), ClusterConfig(k=1))

    def test_mean_maps(self):
        agents = [Agent(f"a{i}", [(i, 4), (i + 1, 4)], horizon=3) for i in range(4)]
        scene = Scene.open(9, 9, agents=agents)
        sources = [Source((2, 4)), Source((6, 4))]
        relations = np.array([[1, 0], [1, 0], [0, 1], [0, 1]])
        clusters = cluster_sources(scene, sources, relations, ClusterConfig(k=2, half_width=3, restarts=2))
        means = clusters.mean_maps()
        assert len(means) == 2
        assert means[0].shape == (3, 7, 7)

    def test_mean_maps_align_rotated_duplicate(self):
        maps = _random_maps(5)
        turned = _transformed(maps, 3, False)
        quarter = TRANSFORMS.index((1, False))
        result = ClusterResult(
            labels=np.array([0, 0]), centroids=np.zeros((1, 1)),
            transforms=np.array([0, quarter]), inertia=0.0,
        )
        clusters = SourceClusters([maps, turned], np.zeros((2, 1)), result)
        (mean,) = clusters.mean_maps()
        assert np.allclose(mean, maps.stack())

    @pytest.mark.parametrize("t", range(len(TRANSFORMS)))
    def test_window_transform_matches_descriptor(self, t):
        maps = _random_maps(6)
        moved = FeatureMaps(maps.half_width, *transform_window(maps.stack(), t))
        assert np.allclose(descriptor(moved), dihedral(descriptor(maps), *TRANSFORMS[t]))


@pytest.mark.slow
def test_archetype_purity():
    run = RunConfig()
    _, clusters, score = archetype_clusters(run, seed=0)
    assert len(clusters.result.labels) == 30
    assert score >= 0.9
