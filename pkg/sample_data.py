# -*- coding: utf-8 -*-
"""
Datos de ejemplo compartidos por los scripts de prueba.
"""
from itertools import combinations
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from explanation_miner import DisparityExplanation
from models import AttributeKind, CateEstimate, DirectionMode
from subpop_miner import Subpopulation
from table_core import Dataset, Pattern, Predicate, TupleSet

# Tabla de salarios de desarrolladores (cuatro filas)
SALARY_ROWS = [
    {"Gender": "Non-binary", "Ethnicity": "White", "Education": "BS", "Role": "Business analyst", "YearsCoding": "6-8", "Salary": "83K"},
    {"Gender": "Male", "Ethnicity": "South Asian", "Education": "PhD", "Role": "Data analyst", "YearsCoding": "4-6", "Salary": "124K"},
    {"Gender": "Female", "Ethnicity": "South Asian", "Education": "MS", "Role": "Back-end developer", "YearsCoding": "2-4", "Salary": "75K"},
    {"Gender": "Male", "Ethnicity": "East Asian", "Education": "BS", "Role": "Back-end developer", "YearsCoding": "6-8", "Salary": "59K"},
]

SALARY_KINDS: Dict[str, AttributeKind] = {
    "Gender": AttributeKind.IMMUTABLE,
    "Ethnicity": AttributeKind.IMMUTABLE,
    "Role": AttributeKind.IMMUTABLE,
    "Education": AttributeKind.MUTABLE,
    "YearsCoding": AttributeKind.MUTABLE,
    "Salary": AttributeKind.OUTCOME,
}

# Grafo de cinco vértices para la reducción desde conjunto independiente
IS_VERTICES = ["v1", "v2", "v3", "v4", "v5"]
IS_EDGES = [("v1", "v2"), ("v2", "v3"), ("v1", "v4"), ("v2", "v5"), ("v4", "v5")]


def salary_frame() -> pd.DataFrame:
    return pd.DataFrame(SALARY_ROWS, dtype=str)


def salary_dataset() -> Dataset:
    return Dataset.from_frame(salary_frame(), SALARY_KINDS)


def write_salary_csv(path: str) -> str:
    salary_frame().to_csv(path, index=False)
    return path


def fake_cate(value: float, significant: bool = True) -> CateEstimate:
    return CateEstimate(
        value=value,
        std_error=0.1,
        p_value=0.001 if significant else 0.5,
        n_treated=10,
        n_control=10,
        significant=significant,
    )


def make_explanation(
    name: str,
    tuples: TupleSet,
    delta: float,
    support: float = 1.0,
    treatment: str = "Action=yes",
) -> DisparityExplanation:
    """Explicación armada a mano: la subpoblación es `Segment=<name>`"""
    empty = TupleSet.empty(tuples.n)
    sub = Subpopulation(
        pattern=Pattern.of(Predicate(attribute="Segment", value=name)),
        tuples=tuples,
        tuples_g1=tuples,
        tuples_g2=empty,
        avg_g1=1.0,
        avg_g2=0.0,
        support=support,
        direction=DirectionMode.G1_ABOVE,
    )
    return DisparityExplanation(
        subpopulation=sub,
        treatment=Pattern.parse(treatment),
        cate_g1=fake_cate(delta),
        cate_g2=fake_cate(0.0),
        delta=delta,
        support=support,
        direction=DirectionMode.G1_ABOVE,
    )


def random_explanations(
    rng: np.random.Generator, count: int, universe: int = 60, density: float = 0.3
) -> Tuple[List[DisparityExplanation], TupleSet]:
    """Candidatos con tuplas aleatorias y Δ en (0, 1]; devuelve también D_{g1∪g2}"""
    exps = []
    for i in range(count):
        mask = rng.random(universe) < density
        if not mask.any():
            mask[rng.integers(universe)] = True
        exps.append(make_explanation(f"s{i:02d}", TupleSet.from_mask(mask), float(rng.uniform(0.01, 1.0))))
    return exps, TupleSet.full(universe)


def independent_set_instance() -> Tuple[List[DisparityExplanation], TupleSet]:
    """
    Una explicación por vértice; sus tuplas son las aristas incidentes, así
    que SIM > 0 exactamente entre vértices adyacentes.
    """
    universe = len(IS_EDGES)
    exps = []
    for vertex in IS_VERTICES:
        incident = [i for i, edge in enumerate(IS_EDGES) if vertex in edge]
        exps.append(make_explanation(vertex, TupleSet.from_indices(incident, universe), delta=1.0, support=1.0))
    return exps, TupleSet.full(universe)


def has_independent_set(size: int, vertices: Sequence[str] = IS_VERTICES, edges=IS_EDGES) -> bool:
    """Búsqueda directa sobre todos los subconjuntos"""
    adjacent = {frozenset(edge) for edge in edges}
    return any(
        all(frozenset((a, b)) not in adjacent for a, b in combinations(group, 2))
        for group in combinations(vertices, size)
    )
