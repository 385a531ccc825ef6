# -*- coding: utf-8 -*-
"""
Estimación del CATE de un tratamiento binario (patrón) sobre el outcome dentro
de un conjunto de tuplas, ajustando por confusores con OLS.
"""
import hashlib
import logging
import threading
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import statsmodels.api as sm

from causal_graph import AdjustmentSet
from errors import EstimationError, InsufficientOverlap, PatternError, SingularDesign
from models import AttributeKind, CateEstimate, SamplingConfig
from table_core import Dataset, Pattern, TupleSet, evaluate_pattern

# Configurar logger
logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10


def treatment_indicator(ds: Dataset, scope: TupleSet, treatment: Pattern) -> np.ndarray:
    """1 para las tuplas del alcance que satisfacen el tratamiento, 0 si no"""
    for attribute in treatment.attributes():
        if ds.attribute(attribute).kind != AttributeKind.MUTABLE:
            raise PatternError(f"El tratamiento usa el atributo no mutable {attribute}")
    treated = evaluate_pattern(ds, treatment)
    return treated.mask()[scope.indices()].astype(np.int8)


def _sample_rows(rows: np.ndarray, cfg: SamplingConfig, scope: TupleSet) -> np.ndarray:
    if rows.shape[0] <= cfg.max_rows:
        return rows
    # Semilla por alcance: la muestra no depende del orden de ejecución
    material = f"{cfg.seed}:{scope.digest()}".encode("utf-8")
    seed = int.from_bytes(hashlib.blake2b(material, digest_size=8).digest(), "big")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(rows, size=cfg.max_rows, replace=False))


def _confounder_dummies(ds: Dataset, rows: np.ndarray, adj: AdjustmentSet) -> Tuple[List[np.ndarray], List[str]]:
    """One-hot de los confusores, sin el primer nivel del dominio (referencia)"""
    columns, names = [], []
    for name in adj.confounders:
        attr = ds.attribute(name)
        if attr.kind == AttributeKind.OUTCOME:
            continue
        codes = ds.columns[name][rows]
        for code in range(1, len(attr.domain)):
            columns.append((codes == code).astype(float))
            names.append(f"{name}={attr.domain[code]}")
    return columns, names


def build_design(
    ds: Dataset, rows: np.ndarray, indicator: np.ndarray, adj: AdjustmentSet
) -> Tuple[np.ndarray, List[str]]:
    """
    Matriz [intercepto, T, dummies]. Se podan dummies de varianza cero,
    columnas duplicadas y columnas linealmente dependientes de las anteriores.
    """
    dummies, dummy_names = _confounder_dummies(ds, rows, adj)
    kept, kept_names, seen = [], [], set()
    for column, name in zip(dummies, dummy_names):
        if column.min() == column.max():
            continue
        signature = column.tobytes()
        if signature in seen:
            continue
        seen.add(signature)
        kept.append(column)
        kept_names.append(name)

    intercept = np.ones(rows.shape[0])
    treatment = indicator.astype(float)
    if kept:
        base = np.column_stack([intercept] + kept)
        r_diag = np.abs(np.diag(np.linalg.qr(base, mode="r")))
        independent = r_diag >= RANK_TOLERANCE * r_diag.max()
        kept = [column for column, ok in zip(kept, independent[1:]) if ok]
        kept_names = [name for name, ok in zip(kept_names, independent[1:]) if ok]

    # T al final: su pivote mide lo que no explican intercepto y confusores
    ordered = np.column_stack([intercept] + kept + [treatment])
    r_diag = np.abs(np.diag(np.linalg.qr(ordered, mode="r")))
    if r_diag[-1] < RANK_TOLERANCE * r_diag.max():
        raise SingularDesign("El tratamiento es colineal con los confusores")

    design = np.column_stack([intercept, treatment] + kept)
    return design, ["const", "treatment"] + kept_names


def estimate_cate(
    ds: Dataset,
    scope: TupleSet,
    treatment: Pattern,
    adj: AdjustmentSet,
    cfg: SamplingConfig,
) -> CateEstimate:
    """
    CATE(T, O | alcance) como coeficiente de T en OLS de O ~ 1 + T + dummies(Z).
    Si el alcance excede max_rows se estima sobre una muestra uniforme con semilla.
    """
    if scope.cardinality == 0:
        raise EstimationError("El alcance está vacío")
    rows = _sample_rows(scope.indices(), cfg, scope)
    treated_all = evaluate_pattern(ds, treatment).mask()
    indicator = treated_all[rows].astype(np.int8)
    n_treated = int(indicator.sum())
    n_control = int(indicator.shape[0] - n_treated)
    if n_treated < cfg.min_arm or n_control < cfg.min_arm:
        raise InsufficientOverlap(n_treated, n_control, cfg.min_arm)

    design, _ = build_design(ds, rows, indicator, adj)
    if design.shape[0] <= design.shape[1]:
        raise SingularDesign("Sin grados de libertad residuales")
    outcome = ds.outcome_values[rows]
    results = sm.OLS(outcome, design).fit()

    value = float(results.params[1])
    std_error = float(results.bse[1])
    p_value = float(results.pvalues[1])
    if not np.isfinite(p_value):
        p_value = 0.0 if std_error == 0.0 and value != 0.0 else 1.0
    return CateEstimate(
        value=value,
        std_error=std_error if np.isfinite(std_error) else 0.0,
        p_value=min(max(p_value, 0.0), 1.0),
        n_treated=n_treated,
        n_control=n_control,
        significant=p_value < cfg.alpha,
    )


CacheEntry = Union[CateEstimate, EstimationError]


class EstimateCache:
    """
    Caché concurrente de estimaciones: (alcance, tratamiento, ajuste, semilla).
    Último escritor gana; la función es determinista así que duplicar trabajo es inocuo.
    """

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._entries: Dict[Tuple[str, str, str, int, int, int], CacheEntry] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    def estimate(
        self,
        ds: Dataset,
        scope: TupleSet,
        treatment: Pattern,
        adj: AdjustmentSet,
        cfg: SamplingConfig,
        scope_key: Optional[str] = None,
    ) -> CateEstimate:
        key = (
            scope_key or scope.digest(),
            treatment.serialize(),
            adj.digest(),
            cfg.seed,
            cfg.max_rows,
            cfg.min_arm,
        )
        if self.enabled:
            entry = self._entries.get(key)
            if entry is not None:
                self.hits += 1
                if isinstance(entry, EstimationError):
                    raise entry
                # alpha no forma parte de la clave
                return entry.model_copy(update={"significant": entry.p_value < cfg.alpha})
        self.misses += 1
        try:
            entry = estimate_cate(ds, scope, treatment, adj, cfg)
        except EstimationError as exc:
            entry = exc
        if self.enabled:
            with self._lock:
                self._entries[key] = entry
        if isinstance(entry, EstimationError):
            raise entry
        return entry
