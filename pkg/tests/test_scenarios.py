import numpy as np
import pytest

from ctst.errors import EmptyGraphError, UnknownScenarioError
from ctst.graph import Graph
from ctst.scenarios import ScenarioSpec, ego_2hop, generate, grid_graph, sbm_graph


def test_sbm_extreme_probabilities_give_cliques():
    g, labels = sbm_graph(4, 5, 1.0, 0.0, seed=0)
    assert g.num_edges == 4 * 10
    for i, j, _ in g.edges:
        assert labels[i] == labels[j]
    assert np.all(g.degrees == 4)


def test_sbm_intra_cluster_edge_count():
    counts = []
    for s in range(100):
        g, labels = sbm_graph(seed=s)
        counts.append(sum(1 for i, j, _ in g.edges if labels[i] == labels[j] == 0))
    assert abs(np.mean(counts) - 150) <= 15


def test_grid_shape():
    g = grid_graph(10, 10)
    assert g.num_nodes == 100 and g.num_edges == 180
    assert g.degrees[0] == 2 and g.degrees[99] == 2
    assert g.degrees[55] == 4 and g.degrees[5] == 3
    assert grid_graph(1, 1).num_edges == 0


def test_ego_star_covers_everything():
    g = Graph(6, [(0, v) for v in range(1, 6)])
    for s in range(10):
        _, aff = ego_2hop(g, s)
        assert aff == frozenset(range(6))


def test_ego_interior_grid_center():
    g = grid_graph(10, 10)
    sizes = {}
    for s in range(300):
        u, aff = ego_2hop(g, s)
        assert u in aff
        sizes[u] = len(aff)
    interior = [u for u in sizes if 2 <= u // 10 <= 7 and 2 <= u % 10 <= 7]
    assert interior and all(sizes[u] == 13 for u in interior)


def test_ego_isolated_graph():
    with pytest.raises(EmptyGraphError):
        ego_2hop(Graph(5), 0)


def test_unknown_scenario():
    with pytest.raises(UnknownScenarioError):
        ScenarioSpec("III")


def test_spec_round_trip():
    s = ScenarioSpec("IIa", n=7, seed=3, grid_shape=(4, 5))
    assert ScenarioSpec.from_dict(s.to_dict()) == s


@pytest.mark.parametrize("name", ["Ia", "Ib", "IIa", "IIb"])
def test_null_mode_and_determinism(name):
    spec = ScenarioSpec(name, n=8, n_prime=6, seed=4, null_mode=True, nodes_per_cluster=5, grid_shape=(4, 4))
    a, b = generate(spec), generate(spec)
    assert a.affected == frozenset()
    np.testing.assert_array_equal(a.samples.X, b.samples.X)
    np.testing.assert_array_equal(a.samples.X_prime, b.samples.X_prime)
    assert a.samples.X.shape[1:] == (8, {"Ia": 1, "Ib": 2, "IIa": 3, "IIb": 2}[name])
    assert a.samples.X_prime.shape[1] == 6


def test_affected_sets():
    ib = generate(ScenarioSpec("Ib", seed=1))
    assert len(ib.affected) == 50 and ib.affected == frozenset(range(50, 100))
    ia = generate(ScenarioSpec("Ia", seed=1))
    assert ia.affected == frozenset(range(25)) | frozenset(range(75, 100))
    iia = generate(ScenarioSpec("IIa", seed=1))
    assert iia.center in iia.affected and 6 <= len(iia.affected) <= 13


def test_ia_moments():
    inst = generate(ScenarioSpec("Ia", n=20_000, n_prime=20_000, seed=0, nodes_per_cluster=1))
    Xp = inst.samples.X_prime[:, :, 0]
    assert abs(Xp[0].var() - 1) < 0.05 and np.abs(Xp[0]).max() <= np.sqrt(3)
    assert abs(Xp[3].mean() - 1) < 0.05 and abs(Xp[3].var() - 1) < 0.05
    assert abs(Xp[1].mean()) < 0.05 and abs(inst.samples.X[2].var() - 1) < 0.05


def test_ib_moments():
    inst = generate(ScenarioSpec("Ib", n=20_000, n_prime=20_000, seed=0, nodes_per_cluster=1))
    X, Xp = inst.samples.X, inst.samples.X_prime
    corr = lambda a: np.corrcoef(a.T)[0, 1]
    assert abs(corr(X[0]) + 0.8) < 0.02 and abs(corr(Xp[1]) + 0.8) < 0.02
    assert abs(corr(X[2]) - 0.8) < 0.02 and abs(corr(Xp[2])) < 0.03
    np.testing.assert_allclose(Xp[3].mean(axis=0), [1, 1], atol=0.05)


def test_iib_moments():
    inst = generate(ScenarioSpec("IIb", n=20_000, n_prime=20_000, seed=0, grid_shape=(1, 2)))
    X, Xp = inst.samples.X, inst.samples.X_prime
    assert abs(X[0].var(axis=0).mean() - 10) < 0.4
    # mixture: 5 within-component + 10 between-component variance per axis
    assert abs(Xp[0].var(axis=0).mean() - 15) < 0.6
    np.testing.assert_allclose(Xp[0].mean(axis=0), 0, atol=0.1)
