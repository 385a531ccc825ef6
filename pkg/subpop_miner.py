# -*- coding: utf-8 -*-
"""
Minero de subpoblaciones tipo Apriori sobre los atributos inmutables, más el
filtro de escenario según la dirección de la disparidad.
"""
import logging
from collections import defaultdict
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from errors import ConfigError
from models import DirectionMode
from table_core import (
    Dataset,
    Pattern,
    Predicate,
    TupleSet,
    evaluate_pattern,
    group_average,
    support_fraction,
)

# Configurar logger
logger = logging.getLogger(__name__)

Item = Tuple[str, str]
Itemset = Tuple[Item, ...]


class Subpopulation(BaseModel):
    """Subpoblación ψ_g con sus rebanadas por grupo y promedios"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pattern: Pattern
    tuples: TupleSet
    tuples_g1: TupleSet
    tuples_g2: TupleSet
    avg_g1: Optional[float] = None
    avg_g2: Optional[float] = None
    support: float
    direction: Optional[DirectionMode] = None

    @property
    def key(self) -> str:
        return self.pattern.serialize()

    @property
    def gap(self) -> Optional[float]:
        if self.avg_g1 is None or self.avg_g2 is None:
            return None
        return self.avg_g1 - self.avg_g2


def materialize_subpopulation(
    ds: Dataset, pattern: Pattern, tuples: TupleSet, g1_set: TupleSet, g2_set: TupleSet
) -> Subpopulation:
    """Calcula rebanadas, promedios y el soporte restringido a los grupos"""
    in_g1 = tuples & g1_set
    in_g2 = tuples & g2_set
    return Subpopulation(
        pattern=pattern,
        tuples=tuples,
        tuples_g1=in_g1,
        tuples_g2=in_g2,
        avg_g1=group_average(ds, in_g1) if in_g1.cardinality else None,
        avg_g2=group_average(ds, in_g2) if in_g2.cardinality else None,
        support=support_fraction(ds, in_g1 | in_g2),
    )


def _generate_candidates(frequent: List[Itemset]) -> List[Tuple[Itemset, Itemset, Itemset]]:
    """Une pares que comparten los primeros k-2 ítems y poda por subconjuntos"""
    known = set(frequent)
    by_prefix: Dict[Itemset, List[Itemset]] = defaultdict(list)
    for itemset in frequent:
        by_prefix[itemset[:-1]].append(itemset)

    candidates = []
    for prefix in sorted(by_prefix):
        group = sorted(by_prefix[prefix])
        for i, left in enumerate(group):
            for right in group[i + 1:]:
                # misma columna con igualdad: conjunto vacío
                if left[-1][0] == right[-1][0]:
                    continue
                candidate = left + (right[-1],)
                subsets = (candidate[:j] + candidate[j + 1:] for j in range(len(candidate) - 2))
                if all(subset in known for subset in subsets):
                    candidates.append((candidate, left, right))
    return candidates


def mine_frequent_subpopulations(
    ds: Dataset,
    sigma: float,
    g1: Pattern,
    g2: Pattern,
    max_predicates: Optional[int] = None,
) -> List[Subpopulation]:
    """
    Todos los patrones de igualdad sobre inmutables con soporte (fracción de
    todas las filas) >= sigma, generados por niveles. Orden canónico.
    """
    if not 0.0 < sigma <= 1.0:
        raise ConfigError(f"sigma debe estar en (0, 1]; recibido {sigma}")

    tidsets: Dict[Itemset, TupleSet] = {}
    level: List[Itemset] = []
    for name in ds.immutable_attributes:
        for value in sorted(ds.attribute(name).domain):
            tids = ds.predicate_set(Predicate(attribute=name, value=value))
            if tids.cardinality / ds.n >= sigma:
                itemset = ((name, value),)
                tidsets[itemset] = tids
                level.append(itemset)

    depth = 1
    while level and (max_predicates is None or depth < max_predicates):
        next_level: List[Itemset] = []
        for candidate, left, right in _generate_candidates(level):
            tids = tidsets[left] & tidsets[right]
            if tids.cardinality / ds.n >= sigma:
                tidsets[candidate] = tids
                next_level.append(candidate)
        logger.debug(f"Nivel {depth + 1}: {len(next_level)} patrones frecuentes")
        level = next_level
        depth += 1

    g1_set = evaluate_pattern(ds, g1)
    g2_set = evaluate_pattern(ds, g2)
    subpops = [
        materialize_subpopulation(ds, Pattern.equalities(dict(itemset)), tids, g1_set, g2_set)
        for itemset, tids in tidsets.items()
    ]
    subpops.sort(key=lambda sub: sub.key)
    logger.info(f"✅ {len(subpops)} subpoblaciones con soporte >= {sigma}")
    return subpops


def scenario_filter(
    subs: List[Subpopulation],
    mode: DirectionMode,
    global_avg_g1: float,
    global_avg_g2: float,
    min_arm: int,
) -> List[Subpopulation]:
    """Conserva las subpoblaciones cuya brecha va en la dirección del escenario"""
    global_gap = global_avg_g1 - global_avg_g2
    if mode == DirectionMode.REVERSE_OF_GLOBAL and global_gap == 0:
        logger.warning("⚠️ Brecha global nula: no hay tendencia que revertir")
        return []

    kept = []
    for sub in subs:
        if sub.tuples_g1.cardinality < min_arm or sub.tuples_g2.cardinality < min_arm:
            continue
        gap = sub.gap
        if mode == DirectionMode.G1_ABOVE:
            keep = gap > 0
        elif mode == DirectionMode.G1_BELOW:
            keep = gap < 0
        else:
            keep = gap * global_gap < 0
        if keep:
            resolved = DirectionMode.G1_ABOVE if gap > 0 else DirectionMode.G1_BELOW
            kept.append(sub.model_copy(update={"direction": resolved}))
    logger.info(f"✅ Filtro de escenario ({mode.value}): {len(kept)}/{len(subs)} subpoblaciones")
    return kept
