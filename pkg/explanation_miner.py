# -*- coding: utf-8 -*-
"""
Minero de explicaciones: para cada subpoblación candidata busca el patrón de
tratamiento (sobre mutables) cuyo efecto causal difiere más entre g1 y g2.
"""
import itertools
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict

from causal_graph import AdjustmentCache, CausalDag
from cate import EstimateCache
from errors import DagError, EstimationError
from models import CateEstimate, DirectionMode, MinerConfig
from subpop_miner import Subpopulation
from table_core import Dataset, Pattern, Predicate, TupleSet

# Configurar logger
logger = logging.getLogger(__name__)


class DisparityExplanation(BaseModel):
    """Par (ψ_g, ψ_e) con sus CATE por grupo, Δ y soporte"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    subpopulation: Subpopulation
    treatment: Pattern
    cate_g1: CateEstimate
    cate_g2: CateEstimate
    delta: float
    support: float
    direction: DirectionMode
    adjustment: Tuple[str, ...] = ()

    @property
    def key(self) -> Tuple[str, str]:
        return (self.subpopulation.key, self.treatment.serialize())

    @property
    def tuples(self) -> TupleSet:
        return self.subpopulation.tuples


def ranking_key(exp: DisparityExplanation) -> Tuple[float, str, str]:
    """Δ descendente; empates por serialización canónica"""
    return (-exp.delta, exp.subpopulation.key, exp.treatment.serialize())


def disparity_score(cate_g1: CateEstimate, cate_g2: CateEstimate, max_abs_outcome: float) -> float:
    """|CATE_g1 − CATE_g2| normalizado por el máximo |outcome|"""
    if max_abs_outcome <= 0:
        raise ValueError("max_abs_outcome debe ser > 0")
    return abs(cate_g1.value - cate_g2.value) / max_abs_outcome


def direction_consistent(cate_g1: CateEstimate, cate_g2: CateEstimate, direction: DirectionMode) -> bool:
    """True si el tratamiento favorece al grupo que indica la dirección resuelta"""
    if direction == DirectionMode.G1_ABOVE:
        return cate_g1.value > cate_g2.value
    if direction == DirectionMode.G1_BELOW:
        return cate_g1.value < cate_g2.value
    raise ValueError("La dirección debe resolverse a g1_above o g1_below por subpoblación")


class MinerContext:
    """Cachés compartidas entre workers y contadores de la búsqueda"""

    def __init__(self, enable_cache: bool = True):
        self.estimates = EstimateCache(enabled=enable_cache)
        self.adjustments = AdjustmentCache(enabled=enable_cache)
        self.candidates_per_subpopulation: Dict[str, int] = {}
        self._lock = threading.Lock()

    def record(self, sub_key: str, candidates: int) -> None:
        with self._lock:
            self.candidates_per_subpopulation[sub_key] = candidates


class _TreatmentSearch:
    """Recorrido del retículo de tratamientos para una subpoblación"""

    def __init__(self, ds: Dataset, dag: CausalDag, sub: Subpopulation, cfg: MinerConfig, context: MinerContext):
        self.ds = ds
        self.dag = dag
        self.sub = sub
        self.cfg = cfg
        self.context = context
        self.sampling = cfg.sampling()
        self.direction = sub.direction or (
            DirectionMode.G1_ABOVE if (sub.gap or 0.0) > 0 else DirectionMode.G1_BELOW
        )
        self.evaluated = 0

    def _eligible(self, treatment: Pattern) -> bool:
        """min_arm tratadas y de control en ambas rebanadas"""
        treated = self.ds.predicate_set(treatment.predicates[0])
        for predicate in treatment.predicates[1:]:
            treated = treated & self.ds.predicate_set(predicate)
        for group_slice in (self.sub.tuples_g1, self.sub.tuples_g2):
            n_treated = group_slice.intersection_len(treated)
            if n_treated < self.cfg.min_arm or group_slice.cardinality - n_treated < self.cfg.min_arm:
                return False
        return True

    def _evaluate(self, treatment: Pattern) -> Optional[DisparityExplanation]:
        self.evaluated += 1
        try:
            adjustment = self.context.adjustments.adjustment_for(self.dag, treatment, self.ds.outcome)
            cate_g1 = self.context.estimates.estimate(
                self.ds, self.sub.tuples_g1, treatment, adjustment, self.sampling, scope_key=f"{self.sub.key}|g1"
            )
            cate_g2 = self.context.estimates.estimate(
                self.ds, self.sub.tuples_g2, treatment, adjustment, self.sampling, scope_key=f"{self.sub.key}|g2"
            )
        except DagError as exc:
            logger.warning(f"⚠️ Tratamiento {treatment} descartado en {self.sub.key}: {exc}")
            return None
        except EstimationError as exc:
            logger.debug(f"Tratamiento {treatment} descartado en {self.sub.key}: {exc}")
            return None
        # significancia primero, luego dirección
        if not (cate_g1.significant and cate_g2.significant):
            return None
        if not direction_consistent(cate_g1, cate_g2, self.direction):
            return None
        return DisparityExplanation(
            subpopulation=self.sub,
            treatment=treatment,
            cate_g1=cate_g1,
            cate_g2=cate_g2,
            delta=disparity_score(cate_g1, cate_g2, self.ds.max_abs_outcome),
            support=self.sub.support,
            direction=self.direction,
            adjustment=adjustment.confounders,
        )

    def _evaluate_all(self, treatments: List[Pattern]) -> List[DisparityExplanation]:
        survivors = []
        for treatment in sorted(set(treatments), key=Pattern.sort_key):
            if not self._eligible(treatment):
                continue
            found = self._evaluate(treatment)
            if found is not None:
                survivors.append(found)
        survivors.sort(key=ranking_key)
        return survivors

    def _singles(self) -> List[Pattern]:
        singles = []
        for name in self.ds.mutable_attributes:
            if not self.dag.has_node(name):
                continue
            for value in sorted(self.ds.attribute(name).domain):
                single = Pattern.of(Predicate(attribute=name, value=value))
                if self._eligible(single):
                    singles.append(single)
        return singles

    def run(self) -> Optional[DisparityExplanation]:
        singles = self._singles()
        survivors = self._evaluate_all(singles)
        best = list(survivors[:1])

        if self.cfg.exhaustive_treatments:
            for size in range(2, self.cfg.max_treatment_predicates + 1):
                combos = [
                    Pattern(predicates=tuple(p.predicates[0] for p in combo))
                    for combo in itertools.combinations(singles, size)
                    if len({p.predicates[0].attribute for p in combo}) == size
                ]
                best.extend(self._evaluate_all(combos)[:1])
        else:
            base = survivors[: self.cfg.beam_width]
            frontier = base
            for _ in range(2, self.cfg.max_treatment_predicates + 1):
                if not frontier:
                    break
                extended = []
                for head in frontier:
                    used = set(head.treatment.attributes())
                    for tail in base:
                        if tail.treatment.attributes()[0] in used:
                            continue
                        extended.append(head.treatment.conjoin(tail.treatment))
                level = self._evaluate_all(extended)
                best.extend(level[:1])
                frontier = level[: self.cfg.beam_width]

        self.context.record(self.sub.key, self.evaluated)
        if not best:
            return None
        return min(best, key=ranking_key)


def mine_treatments_for_subpopulation(
    ds: Dataset,
    dag: CausalDag,
    sub: Subpopulation,
    cfg: MinerConfig,
    context: Optional[MinerContext] = None,
) -> Optional[DisparityExplanation]:
    """Mejor explicación (máximo Δ) significativa y consistente con la dirección, o None"""
    if sub.direction is None and not sub.gap:
        return None
    search = _TreatmentSearch(ds, dag, sub, cfg, context or MinerContext(cfg.enable_cache))
    return search.run()


def mine_all(
    ds: Dataset,
    dag: CausalDag,
    subs: List[Subpopulation],
    cfg: MinerConfig,
    context: Optional[MinerContext] = None,
) -> List[DisparityExplanation]:
    """Aplica la búsqueda a cada subpoblación en paralelo; salida en orden canónico"""
    context = context or MinerContext(cfg.enable_cache)
    missing = [name for name in ds.mutable_attributes if not dag.has_node(name)]
    if missing:
        logger.warning(f"⚠️ Atributos mutables ausentes del DAG (no se usan como tratamiento): {missing}")

    def work(sub: Subpopulation) -> Optional[DisparityExplanation]:
        return mine_treatments_for_subpopulation(ds, dag, sub, cfg, context)

    if cfg.workers > 1 and len(subs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            found = list(pool.map(work, subs))
    else:
        found = [work(sub) for sub in subs]

    explanations = sorted((exp for exp in found if exp is not None), key=ranking_key)
    logger.info(
        f"✅ {len(explanations)} explicaciones para {len(subs)} subpoblaciones "
        f"(caché: {context.estimates.hits} aciertos / {context.estimates.misses} fallos)"
    )
    return explanations
