#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Pruebas de la selección diversa: Jaccard, clustering, greedy contra fuerza
bruta y la instancia de conjunto independiente.
"""
import numpy as np
import pytest

from errors import SelectionGuardError
from models import Linkage, SelectorConfig
from sample_data import (
    has_independent_set,
    independent_set_instance,
    make_explanation,
    random_explanations,
)
from selector import (
    brute_force_select,
    check_feasibility,
    cluster_explanations,
    diversity_of,
    greedy_select,
    jaccard_sim,
    similarity_matrix,
    topk_select,
)
from table_core import TupleSet


def _tuples(indices, n=20) -> TupleSet:
    return TupleSet.from_indices(indices, n)


def test_jaccard_examples():
    d_union = TupleSet.full(20)
    a = make_explanation("a", _tuples([1, 2, 3]), 0.5)
    b = make_explanation("b", _tuples([2, 3, 4]), 0.4)
    c = make_explanation("c", _tuples([10, 11]), 0.3)
    empty = make_explanation("e", TupleSet.empty(20), 0.1)
    assert jaccard_sim(a, b, d_union) == pytest.approx(0.5)
    assert jaccard_sim(a, c, d_union) == 0.0
    assert jaccard_sim(a, a, d_union) == 1.0
    assert jaccard_sim(empty, empty, d_union) == 0.0
    # restringido a D_{g1∪g2}
    assert jaccard_sim(a, b, _tuples([2, 3])) == 1.0

    sims = similarity_matrix([a, b, c, empty], d_union)
    assert np.allclose(sims, sims.T)
    assert sims[0, 0] == 1.0 and sims[3, 3] == 0.0
    assert diversity_of(sims[:1, :1]) is None
    assert diversity_of(similarity_matrix([a, c], d_union)) == 1.0


def test_jaccard_distance_is_a_metric():
    rng = np.random.default_rng(5)
    exps, d_union = random_explanations(rng, 12, universe=30)
    dist = 1.0 - similarity_matrix(exps, d_union)
    n = len(exps)
    for i in range(n):
        for j in range(n):
            assert dist[i, j] == pytest.approx(dist[j, i])
            for m in range(n):
                assert dist[i, j] <= dist[i, m] + dist[m, j] + 1e-12


def test_clustering_groups_overlapping_subpopulations():
    d_union = TupleSet.full(20)
    left = _tuples(range(0, 5))
    right = _tuples(range(10, 15))
    exps = [
        make_explanation("a", left, 0.9),
        make_explanation("c", right, 0.8),
        make_explanation("b", left, 0.7),
        make_explanation("d", right, 0.6),
    ]
    assert cluster_explanations(exps, 2, d_union) == [[0, 2], [1, 3]]
    assert cluster_explanations(exps, 10, d_union) == [[0], [1], [2], [3]]
    with pytest.raises(ValueError):
        cluster_explanations([], 3, d_union)


def _reference_clusters(dist: np.ndarray, num_clusters: int, method: str):
    """Aglomerativo directo O(n³); None si el mínimo a fusionar está empatado"""
    combine = {"single": min, "complete": max, "average": lambda values: sum(values) / len(values)}[method]
    clusters = [[i] for i in range(dist.shape[0])]
    while len(clusters) > num_clusters:
        scored = []
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                pairs = [dist[i, j] for i in clusters[a] for j in clusters[b]]
                scored.append((combine(pairs), a, b))
        scored.sort()
        if len(scored) > 1 and scored[1][0] - scored[0][0] < 1e-12:
            return None
        _, a, b = scored[0]
        clusters[a] = clusters[a] + clusters[b]
        del clusters[b]
    return sorted(sorted(members) for members in clusters)


def test_clustering_matches_reference_agglomeration():
    print("\n🧪 Clustering contra un aglomerativo de referencia")
    rng = np.random.default_rng(8)
    compared = 0
    for trial in range(60):
        method = ("single", "complete", "average")[trial % 3]
        exps, d_union = random_explanations(
            rng, int(rng.integers(5, 13)), universe=400, density=float(rng.uniform(0.1, 0.6))
        )
        num_clusters = int(rng.integers(2, 5))
        dist = 1.0 - similarity_matrix(exps, d_union)
        expected = _reference_clusters(dist, num_clusters, method)
        if expected is None:
            continue
        assert cluster_explanations(exps, num_clusters, d_union, Linkage(method)) == expected, f"instancia {trial}"
        compared += 1
    assert compared >= 30
    print(f"✅ {compared} instancias con la misma partición")


def test_greedy_respects_clusters_and_tau():
    d_union = TupleSet.full(20)
    left = _tuples(range(0, 5))
    right = _tuples(range(10, 15))
    exps = [
        make_explanation("a", left, 0.9),
        make_explanation("b", left, 0.7),
        make_explanation("c", right, 0.8),
    ]
    result = greedy_select(exps, SelectorConfig(k=3, tau=0.5, num_clusters=10, use_clustering=False), d_union)
    assert [e.subpopulation.key for e in result.chosen] == ["Segment=a", "Segment=c"]
    assert result.objective == pytest.approx(1.7)
    assert result.feasibility_note == "Solo 2 de 3 explicaciones satisfacen las restricciones"
    assert check_feasibility(result, SelectorConfig(k=3, tau=0.5)) == []

    low_support = [make_explanation("z", left, 0.9, support=0.01)]
    empty = greedy_select(low_support, SelectorConfig(k=2, sigma=0.05), d_union)
    assert empty.chosen == [] and empty.objective == 0.0


def test_greedy_is_seeded():
    rng = np.random.default_rng(99)
    exps, d_union = random_explanations(rng, 15)
    cfg = SelectorConfig(k=4, tau=0.4, num_clusters=5, seed=3)
    first = greedy_select(exps, cfg, d_union)
    second = greedy_select(exps, cfg, d_union)
    assert [e.key for e in first.chosen] == [e.key for e in second.chosen]


def test_greedy_against_brute_force():
    print("\n🧪 Greedy vs fuerza bruta (100 instancias)")
    rng = np.random.default_rng(17)
    ratios = []
    for trial in range(100):
        count = int(rng.integers(2, 16))
        k = int(rng.integers(1, 5))
        tau = float(rng.uniform(0.2, 0.8))
        exps, d_union = random_explanations(rng, count)
        cfg = SelectorConfig(k=k, tau=tau, seed=trial)
        greedy = greedy_select(exps, cfg, d_union)
        brute = brute_force_select(exps, cfg, d_union)
        top = topk_select(exps, k, d_union, sigma=cfg.sigma)
        assert check_feasibility(greedy, cfg) == [], f"instancia {trial}"
        assert check_feasibility(brute, cfg) == [], f"instancia {trial}"
        assert greedy.objective <= brute.objective + 1e-12
        assert brute.objective <= top.objective + 1e-12
        ratios.append(greedy.objective / brute.objective)
    average = float(np.mean(ratios))
    print(f"✅ Razón media greedy/óptimo = {average:.3f}")
    assert average >= 0.55


def test_independent_set_reduction():
    """σ=1, τ=0, Δ=1: existe selección de tamaño k ⇔ existe conjunto independiente de tamaño k"""
    print("\n🧪 Reducción desde conjunto independiente")
    exps, d_union = independent_set_instance()
    for k in range(1, 6):
        result = brute_force_select(exps, SelectorConfig(k=k, tau=0.0, sigma=1.0), d_union)
        assert (len(result.chosen) == k) == has_independent_set(k), f"k={k}"
        print(f"   k={k}: {len(result.chosen) == k}")
    assert has_independent_set(3) and not has_independent_set(4)


def test_brute_force_guard_and_ties():
    rng = np.random.default_rng(1)
    many, d_union = random_explanations(rng, 100)
    with pytest.raises(SelectionGuardError):
        brute_force_select(many, SelectorConfig(k=5), d_union)

    d_union = TupleSet.full(20)
    twins = [
        make_explanation("b", _tuples([0, 1]), 0.5),
        make_explanation("a", _tuples([0, 1]), 0.5),
    ]
    chosen = brute_force_select(twins, SelectorConfig(k=1, tau=0.0), d_union).chosen
    assert [e.subpopulation.key for e in chosen] == ["Segment=a"]


def test_topk_ignores_similarity():
    d_union = TupleSet.full(20)
    same = _tuples([0, 1, 2])
    exps = [make_explanation(name, same, delta) for name, delta in (("a", 0.2), ("b", 0.9), ("c", 0.5))]
    result = topk_select(exps, 2)
    assert [e.subpopulation.key for e in result.chosen] == ["Segment=b", "Segment=c"]
    assert result.pairwise_sims[0][1] == 1.0
    assert topk_select([], 3).chosen == []

    thin = [make_explanation("t", same, 0.95, support=0.01)] + exps
    filtered = topk_select(thin, 2, sigma=0.05)
    assert [e.subpopulation.key for e in filtered.chosen] == ["Segment=b", "Segment=c"]


if __name__ == "__main__":
    print("=" * 60)
    print("PRUEBAS - SELECCIÓN DIVERSA")
    print("=" * 60)
    test_jaccard_examples()
    test_jaccard_distance_is_a_metric()
    test_clustering_groups_overlapping_subpopulations()
    test_clustering_matches_reference_agglomeration()
    test_greedy_respects_clusters_and_tau()
    test_greedy_is_seeded()
    test_greedy_against_brute_force()
    test_independent_set_reduction()
    test_brute_force_guard_and_ties()
    test_topk_ignores_similarity()
    print("\n✅ Todas las pruebas de selección pasaron")
