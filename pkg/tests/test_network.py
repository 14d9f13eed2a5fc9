import math
from datetime import date

import numpy as np
import pandas as pd
import pytest

from src.data.ingest import aggregate
from src.data.models import EventRecord
from src.errors import InputValidationError, NumericalError
from src.network import (
    BipartiteNetwork,
    bipartite_modularity,
    build_network,
    interaction_asymmetry,
    modularity_q,
    nested_rank,
    network_stats,
    node_stats,
    push_pull,
    weighted_connectance,
    weighted_nestedness,
    web_asymmetry,
)


def net(weights):
    return BipartiteNetwork.from_matrix(np.asarray(weights, dtype=float))


def random_network(rng, n_f, n_a, high=4):
    """Integer weights with every row and column non-empty."""
    while True:
        w = rng.integers(0, high, size=(n_f, n_a)).astype(float)
        if (w.sum(axis=1) > 0).all() and (w.sum(axis=0) > 0).all():
            return net(w)


# === Oracles ===


def set_partitions(n):
    """All restricted growth strings of length n."""
    labels = [0] * n

    def grow(i, top):
        if i == n:
            yield list(labels)
            return
        for value in range(top + 2):
            labels[i] = value
            yield from grow(i + 1, max(top, value))

    if n:
        yield from grow(1, 0)


def exhaustive_modularity(w):
    w = np.asarray(w, dtype=float)
    m = w.sum()
    b = w / m - np.outer(w.sum(axis=1), w.sum(axis=0)) / m**2
    n_f = w.shape[0]
    best = -np.inf
    for labels in set_partitions(w.shape[0] + w.shape[1]):
        g, h = np.array(labels[:n_f]), np.array(labels[n_f:])
        best = max(best, b[g[:, None] == h[None, :]].sum())
    return best


def brute_force_wnodf(w):
    """Pair enumeration: within a pair, the node with the larger marginal total nests the other."""
    w = np.asarray(w, dtype=float)

    def side(m):
        total, pairs = 0.0, 0
        for i in range(m.shape[0]):
            for j in range(m.shape[0]):
                if i >= j:
                    continue
                pairs += 1
                for hi, lo in ((i, j), (j, i)):
                    fill_lo = sum(1 for v in m[lo] if v > 0)
                    if math.fsum(m[hi]) > math.fsum(m[lo]) and fill_lo > 0:
                        hits = sum(1 for k in range(m.shape[1]) if 0 < m[lo, k] < m[hi, k])
                        total += hits / fill_lo
        return total, pairs

    rows, row_pairs = side(w)
    cols, col_pairs = side(w.T)
    return (rows + cols) / (row_pairs + col_pairs)


def bersier_connectance(w):
    """Quantitative connectance evaluated node by node."""
    w = np.asarray(w, dtype=float)
    m = w.sum()

    def partners(values):
        total = sum(values)
        h = -sum((v / total) * math.log2(v / total) for v in values if v > 0)
        return 2**h

    ld = sum(w[i].sum() * partners(w[i]) for i in range(w.shape[0]))
    ld += sum(w[:, j].sum() * partners(w[:, j]) for j in range(w.shape[1]))
    return ld / (2 * m) / (w.shape[0] + w.shape[1])


# === Construction ===


def test_build_network_sums_day_range(taxonomy):
    records = [
        EventRecord(date(2020, 1, 1), "park", "walking", "u1"),
        EventRecord(date(2020, 1, 2), "park", "walking", "u2", 4),
        EventRecord(date(2020, 1, 2), "beach", "yoga", "u3"),
    ]
    counts = aggregate(records, taxonomy, "full")
    whole = build_network(counts)
    day = build_network(counts, date(2020, 1, 2), date(2020, 1, 2))
    assert whole.weights[whole.features.index("park"), whole.activities.index("walking")] == 5
    np.testing.assert_array_equal(day.weights, counts.counts[:, :, 1])
    with pytest.raises(InputValidationError):
        build_network(counts, date(2020, 1, 2), date(2020, 1, 1))


def test_network_validation():
    with pytest.raises(InputValidationError, match="negative"):
        net([[1, -1]])
    with pytest.raises(InputValidationError, match="non-finite"):
        net([[1, np.nan]])
    with pytest.raises(InputValidationError, match="unique"):
        BipartiteNetwork(["a", "a"], ["x"], np.ones((2, 1)))


def test_matrix_csv_roundtrip_labels(tmp_path):
    original = BipartiteNetwork(["coast", "park"], ["walking", "self care"], np.array([[1.0, 0.0], [2.5, 3.0]]))
    path = original.write_csv(tmp_path / "m.csv")
    assert path.read_text(encoding="utf-8").splitlines()[0] == "feature,walking,self care"
    loaded = BipartiteNetwork.read_csv(path)
    assert loaded.features == original.features
    np.testing.assert_array_equal(loaded.weights, original.weights)


# === Global statistics ===


@pytest.mark.parametrize("shape,expected", [((11, 16), 5 / 27), ((39, 186), 147 / 225), ((4, 4), 0.0)])
def test_web_asymmetry(shape, expected):
    assert web_asymmetry(net(np.ones(shape))) == pytest.approx(expected, abs=1e-9)


def test_web_asymmetry_drops_zero_marginal_nodes():
    w = np.ones((3, 4))
    w[2] = 0
    w[:, 3] = 0
    assert web_asymmetry(net(w)) == pytest.approx(1 / 5)
    with pytest.raises(InputValidationError, match="empty network"):
        web_asymmetry(net(np.zeros((2, 2))))


@pytest.mark.parametrize("shape", [(1, 1), (3, 5), (11, 16)])
def test_connectance_uniform_complete(shape):
    assert weighted_connectance(net(np.full(shape, 2.0))) == pytest.approx(0.5)


def test_connectance_diagonal_and_oracle():
    assert weighted_connectance(net(np.eye(2))) == pytest.approx(0.25)
    assert weighted_connectance(net([[1, 1], [0, 2]])) == pytest.approx(bersier_connectance([[1, 1], [0, 2]]), abs=1e-12)


def test_connectance_matches_oracle_on_random_networks(rng):
    for _ in range(20):
        candidate = random_network(rng, 5, 7, high=6)
        assert weighted_connectance(candidate) == pytest.approx(bersier_connectance(candidate.weights), abs=1e-12)


def test_nestedness_perfect_staircase():
    assert weighted_nestedness(net([[3, 2, 1], [2, 1, 0], [1, 0, 0]])) == pytest.approx(1.0)


def test_nestedness_uniform_is_zero():
    assert weighted_nestedness(net(np.ones((4, 5)))) == 0.0


def test_nestedness_needs_pairs():
    with pytest.raises(NumericalError):
        weighted_nestedness(net([[2.0]]))


def test_nestedness_ranks_pairs_by_marginal_total():
    # row 0 (total 10) nests row 1 (total 3) on 2 of its 3 cells; no column pair scores
    assert weighted_nestedness(net([[5, 5, 0], [1, 1, 1]])) == pytest.approx(1 / 6)
    assert brute_force_wnodf([[5, 5, 0], [1, 1, 1]]) == pytest.approx(1 / 6)


def test_nestedness_float_ties_do_not_score():
    # both rows total 0.6; summed left to right the first comes out one ulp larger
    tied = [[0.1, 0.2, 0.3], [0.3, 0.2, 0.1]]
    assert weighted_nestedness(net(tied)) == 0.0
    assert brute_force_wnodf(tied) == 0.0


def test_nestedness_matches_brute_force(rng):
    for size in range(2, 6):
        for _ in range(10):
            candidate = random_network(rng, size, size)
            assert weighted_nestedness(candidate) == pytest.approx(brute_force_wnodf(candidate.weights), abs=1e-12)


# === Modularity ===


def test_modularity_identity_pattern():
    result = bipartite_modularity(net(np.eye(2)), restarts=5, seed=1)
    assert result.q == pytest.approx(0.5)
    assert result.n_modules == 2


def test_modularity_uniform_single_module():
    result = bipartite_modularity(net(np.ones((3, 4))), restarts=5, seed=1)
    assert result.q == pytest.approx(0.0, abs=1e-12)
    assert result.n_modules == 1


def test_modularity_q_of_given_partition():
    w = net([[2, 0], [0, 1]])
    assert modularity_q(w, [0, 1], [0, 1]) == pytest.approx(4 / 9, abs=1e-12)
    assert modularity_q(w, [0, 0], [0, 0]) == pytest.approx(0.0, abs=1e-12)


def test_modularity_relabel_invariant():
    w = net([[3, 1, 0], [0, 2, 4]])
    assert modularity_q(w, [0, 1], [0, 0, 1]) == pytest.approx(modularity_q(w, [7, 3], [7, 7, 3]))


@pytest.mark.slow
def test_modularity_matches_exhaustive_optimum():
    hits = 0
    for instance in range(100):
        rng = np.random.default_rng(instance)
        n_f, n_a = rng.integers(2, 5, size=2)
        candidate = random_network(rng, n_f, n_a)
        found = bipartite_modularity(candidate, restarts=20, seed=instance).q
        optimum = exhaustive_modularity(candidate.weights)
        assert found <= optimum + 1e-12
        hits += found >= optimum - 1e-12
    assert hits >= 95


def test_modularity_is_deterministic_and_parallel_safe(rng):
    candidate = random_network(rng, 6, 9)
    serial = bipartite_modularity(candidate, restarts=8, seed=3, workers=1)
    threaded = bipartite_modularity(candidate, restarts=8, seed=3, workers=4)
    assert serial.q == threaded.q
    assert serial.partition() == threaded.partition()
    assert serial.restart == threaded.restart


def test_modularity_zero_weight():
    with pytest.raises(NumericalError):
        bipartite_modularity(net(np.zeros((2, 2))), restarts=1)


# === Node statistics ===


def test_push_pull_single_link_and_star():
    values = push_pull(net([[5.0]]))
    assert values.tolist() == [0.0, 0.0]
    star = push_pull(net([[1.0, 1.0, 1.0]]))
    assert star[("feature", "f0")] == pytest.approx(2 / 3)
    for a in ("a0", "a1", "a2"):
        assert star[("activity", a)] == pytest.approx(-2 / 3)


def test_interaction_asymmetry_star():
    assert interaction_asymmetry(net([[1.0, 1.0, 1.0]])) == pytest.approx(2 / 3)
    assert interaction_asymmetry(net(np.eye(3))) == pytest.approx(0.0)


def test_push_pull_range_and_consistency(rng):
    candidate = random_network(rng, 6, 8, high=9)
    values = push_pull(candidate)
    assert values.between(-1.0, 1.0).all()
    w = candidate.weights
    d_fa = w / w.sum(axis=1, keepdims=True)
    d_af = w / w.sum(axis=0, keepdims=True)
    np.testing.assert_allclose(d_fa * w.sum(axis=1, keepdims=True), d_af * w.sum(axis=0, keepdims=True))


def test_nested_rank_orders_and_ties():
    ranks = nested_rank(BipartiteNetwork(["c", "b", "a"], ["x"], np.array([[5.0], [3.0], [1.0]])))
    assert ranks["feature"].to_dict() == {"c": 0.0, "b": 0.5, "a": 1.0}
    tied = nested_rank(BipartiteNetwork(["b", "a", "c"], ["x"], np.array([[5.0], [5.0], [1.0]])))
    assert tied["feature"].to_dict() == {"b": 0.5, "a": 0.0, "c": 1.0}
    assert tied[("activity", "x")] == 0.0


def test_nested_rank_float_ties_fall_back_to_labels():
    ranks = nested_rank(BipartiteNetwork(["b", "a"], ["x", "y"], np.array([[0.1, 0.2], [0.3, 0.0]])))
    assert ranks["feature"].to_dict() == {"b": 1.0, "a": 0.0}
    scaled = nested_rank(BipartiteNetwork(["b", "a"], ["x", "y"], np.array([[0.1, 0.2], [0.3, 0.0]]) * 7.3))
    assert scaled["feature"].to_dict() == {"b": 1.0, "a": 0.0}


def test_nested_rank_grid(rng):
    for _ in range(100):
        candidate = random_network(rng, 11, 16, high=20)
        ranks = nested_rank(candidate)
        assert sorted(ranks["activity"]) == [k / 15 for k in range(16)]
        assert sorted(ranks["feature"]) == [k / 10 for k in range(11)]


def test_node_stats_table():
    frame = node_stats(net([[1.0, 1.0, 1.0]]))
    assert list(frame.columns) == ["kind", "label", "push_pull", "nested_rank"]
    assert frame["kind"].tolist() == ["feature", "activity", "activity", "activity"]


# === Invariants ===


def test_statistics_are_scale_invariant(rng):
    for _ in range(5):
        candidate = random_network(rng, 5, 6, high=7)
        c = float(rng.uniform(1e-3, 1e3))
        before = network_stats(candidate, restarts=10, seed=4)
        after = network_stats(candidate.scaled(c), restarts=10, seed=4)
        for name in ("web_asymmetry", "modularity", "weighted_nestedness", "interaction_asymmetry", "weighted_connectance"):
            assert getattr(after, name) == pytest.approx(getattr(before, name), abs=1e-12)
        pd.testing.assert_frame_equal(node_stats(candidate), node_stats(candidate.scaled(c)), atol=1e-12, rtol=0)


def test_network_stats_ranges(rng):
    stats = network_stats(random_network(rng, 11, 16, high=30), restarts=5, seed=9)
    assert stats.web_asymmetry == pytest.approx(5 / 27)
    assert 0.0 < stats.weighted_connectance <= 1.0
    assert stats.n_features == 11
