# -*- coding: utf-8 -*-
"""
Selección del conjunto final de k explicaciones: similitud Jaccard,
clustering jerárquico, greedy con semilla y selectores de referencia
(fuerza bruta y top-k).
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.cluster import hierarchy
from scipy.spatial.distance import squareform

from config import settings
from errors import SelectionGuardError
from explanation_miner import DisparityExplanation, ranking_key
from models import ClusterDistance, Linkage, SelectorConfig
from table_core import TupleSet

# Configurar logger
logger = logging.getLogger(__name__)


class SelectionResult(BaseModel):
    """Conjunto elegido, su objetivo (Σ Δ) y la matriz de similitudes"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    chosen: List[DisparityExplanation] = Field(default_factory=list)
    objective: float = 0.0
    pairwise_sims: List[List[float]] = Field(default_factory=list)
    diversity: Optional[float] = None
    feasibility_note: Optional[str] = None


# ===== SIMILITUD =====

def jaccard_sim(e1: DisparityExplanation, e2: DisparityExplanation, d_union: TupleSet) -> float:
    """Jaccard entre las subpoblaciones restringidas a D_{g1∪g2}"""
    a = e1.tuples & d_union
    b = e2.tuples & d_union
    union = a.union_len(b)
    if union == 0:
        return 0.0
    return a.intersection_len(b) / union


def similarity_matrix(exps: Sequence[DisparityExplanation], d_union: TupleSet) -> np.ndarray:
    n = len(exps)
    sims = np.eye(n)
    restricted = [e.tuples & d_union for e in exps]
    for i in range(n):
        if restricted[i].cardinality == 0:
            sims[i, i] = 0.0
        for j in range(i + 1, n):
            union = restricted[i].union_len(restricted[j])
            value = restricted[i].intersection_len(restricted[j]) / union if union else 0.0
            sims[i, j] = sims[j, i] = value
    return sims


def diversity_of(sims: np.ndarray) -> Optional[float]:
    """Distancia media (1 − SIM) entre pares; None con menos de dos elementos"""
    n = sims.shape[0]
    if n < 2:
        return None
    upper = sims[np.triu_indices(n, k=1)]
    return float(np.mean(1.0 - upper))


def _distance_matrix(
    exps: Sequence[DisparityExplanation], d_union: TupleSet, distance: ClusterDistance
) -> np.ndarray:
    if distance == ClusterDistance.JACCARD:
        dist = 1.0 - similarity_matrix(exps, d_union)
    else:
        restricted = [e.tuples & d_union for e in exps]
        n = len(exps)
        dist = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                a, b = restricted[i], restricted[j]
                dist[i, j] = dist[j, i] = a.union_len(b) - a.intersection_len(b)
    np.fill_diagonal(dist, 0.0)
    return dist


# ===== CLUSTERING =====

def cluster_explanations(
    exps: Sequence[DisparityExplanation],
    num_clusters: int,
    d_union: TupleSet,
    linkage: Linkage = Linkage.AVERAGE,
    distance: ClusterDistance = ClusterDistance.JACCARD,
) -> List[List[int]]:
    """
    Clustering aglomerativo sobre la distancia entre subpoblaciones, cortado a
    min(num_clusters, |exps|) grupos. Devuelve índices, ordenados por su
    primer miembro.
    """
    if not exps:
        raise ValueError("exps no puede ser vacío")
    n = len(exps)
    if n <= num_clusters:
        return [[i] for i in range(n)]

    condensed = squareform(_distance_matrix(exps, d_union, distance), checks=False)
    tree = hierarchy.linkage(condensed, method=linkage.value)
    labels = hierarchy.cut_tree(tree, n_clusters=num_clusters).ravel()

    clusters: dict = {}
    for index, label in enumerate(labels):
        clusters.setdefault(int(label), []).append(index)
    return sorted(clusters.values(), key=lambda members: members[0])


# ===== SELECTORES =====

def _result(chosen: List[DisparityExplanation], d_union: TupleSet, k: int) -> SelectionResult:
    sims = similarity_matrix(chosen, d_union)
    note = None
    if len(chosen) < k:
        note = f"Solo {len(chosen)} de {k} explicaciones satisfacen las restricciones"
    return SelectionResult(
        chosen=chosen,
        objective=math.fsum(e.delta for e in chosen),
        pairwise_sims=sims.round(12).tolist(),
        diversity=diversity_of(sims),
        feasibility_note=note,
    )


def _eligible(exps: Sequence[DisparityExplanation], sigma: float) -> List[DisparityExplanation]:
    return sorted((e for e in exps if e.support >= sigma), key=ranking_key)


def greedy_select(exps: Sequence[DisparityExplanation], cfg: SelectorConfig, d_union: TupleSet) -> SelectionResult:
    """
    Un representante aleatorio (con semilla) por cluster; la primera elección
    es el cluster de mayor Δ y las siguientes el representante de mayor Δ con
    SIM < tau contra todo lo ya elegido.
    """
    candidates = _eligible(exps, cfg.sigma)
    if not candidates:
        return _result([], d_union, cfg.k)

    rng = np.random.default_rng(cfg.seed)
    if cfg.use_clustering:
        clusters = cluster_explanations(candidates, cfg.num_clusters, d_union, cfg.linkage, cfg.distance)
    else:
        clusters = [[i] for i in range(len(candidates))]
    # orden de visita por cluster; el primero es el representante
    orders = [[members[j] for j in rng.permutation(len(members))] for members in clusters]
    sims = similarity_matrix(candidates, d_union)

    chosen: List[int] = []
    open_clusters = set(range(len(clusters)))

    def representative(cluster: int) -> Optional[int]:
        pool = orders[cluster] if cfg.resample_rejected else orders[cluster][:1]
        for index in pool:
            if all(sims[index, other] < cfg.tau for other in chosen):
                return index
        return None

    while len(chosen) < cfg.k and open_clusters:
        feasible: List[Tuple[int, int]] = []
        for cluster in sorted(open_clusters):
            index = representative(cluster)
            if index is not None:
                feasible.append((cluster, index))
        if not feasible:
            break
        best_delta = max(candidates[index].delta for _, index in feasible)
        tied = [(c, i) for c, i in feasible if candidates[i].delta == best_delta]
        if not chosen and len(tied) > 1:
            cluster, index = tied[int(rng.integers(len(tied)))]
        else:
            cluster, index = min(tied, key=lambda pair: pair[1])
        chosen.append(index)
        open_clusters.discard(cluster)

    result = _result([candidates[i] for i in chosen], d_union, cfg.k)
    logger.info(f"✅ Greedy: {len(result.chosen)} explicaciones, objetivo {result.objective:.6f}")
    return result


def brute_force_select(
    exps: Sequence[DisparityExplanation],
    cfg: SelectorConfig,
    d_union: TupleSet,
    force: bool = False,
) -> SelectionResult:
    """Subconjunto factible (|Φ| ≤ k, soporte ≥ σ, SIM ≤ tau) de máximo Σ Δ"""
    candidates = _eligible(exps, cfg.sigma)
    n = len(candidates)
    size = min(cfg.k, n)
    combinations = sum(math.comb(n, i) for i in range(1, size + 1))
    if combinations > settings.brute_force_max_combinations and not force:
        raise SelectionGuardError(
            f"La búsqueda exhaustiva requiere {combinations} combinaciones "
            f"(límite {settings.brute_force_max_combinations})"
        )

    sims = similarity_matrix(candidates, d_union)
    deltas = [e.delta for e in candidates]
    labels = [" || ".join(e.key) for e in candidates]
    best: Tuple[float, Tuple[str, ...]] = (0.0, ())
    best_indices: List[int] = []

    def better(objective: float, subset: List[int]) -> bool:
        if objective != best[0]:
            return objective > best[0]
        return tuple(sorted(labels[i] for i in subset)) < best[1] or not best_indices

    def search(start: int, subset: List[int], objective: float) -> None:
        nonlocal best, best_indices
        if subset and better(objective, subset):
            best = (objective, tuple(sorted(labels[i] for i in subset)))
            best_indices = list(subset)
        if len(subset) == size:
            return
        for i in range(start, n):
            # candidatos ordenados por Δ: cota superior con los siguientes
            bound = math.fsum([objective] + deltas[i:i + size - len(subset)])
            if bound < best[0]:
                return
            if all(sims[i, j] <= cfg.tau for j in subset):
                subset.append(i)
                search(i + 1, subset, math.fsum(deltas[j] for j in subset))
                subset.pop()

    search(0, [], 0.0)
    result = _result([candidates[i] for i in sorted(best_indices)], d_union, cfg.k)
    logger.info(f"✅ Fuerza bruta: {len(result.chosen)} explicaciones, objetivo {result.objective:.6f}")
    return result


def topk_select(
    exps: Sequence[DisparityExplanation],
    k: int,
    d_union: Optional[TupleSet] = None,
    sigma: float = 0.0,
) -> SelectionResult:
    """
    Top-k por Δ entre las explicaciones con soporte ≥ sigma. Sin restricción
    de diversidad: las similitudes solo se reportan.
    """
    chosen = _eligible(exps, sigma)[:k]
    if d_union is None:
        d_union = _union_of(chosen)
    return _result(chosen, d_union, k)


def _union_of(exps: Sequence[DisparityExplanation]) -> Optional[TupleSet]:
    union = None
    for e in exps:
        union = e.tuples if union is None else union | e.tuples
    return union


def check_feasibility(result: SelectionResult, cfg: SelectorConfig) -> List[str]:
    """Violaciones de |Φ| ≤ k, soporte ≥ σ y SIM ≤ tau (lista vacía si es factible)"""
    problems = []
    if len(result.chosen) > cfg.k:
        problems.append(f"{len(result.chosen)} explicaciones > k={cfg.k}")
    for e in result.chosen:
        if e.support < cfg.sigma:
            problems.append(f"soporte {e.support:.4f} < sigma en {e.subpopulation.key}")
    n = len(result.chosen)
    for i in range(n):
        for j in range(i + 1, n):
            if result.pairwise_sims[i][j] > cfg.tau:
                problems.append(f"SIM({i},{j}) = {result.pairwise_sims[i][j]:.4f} > tau")
    return problems
