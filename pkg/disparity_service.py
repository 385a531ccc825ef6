# -*- coding: utf-8 -*-
"""
Servicio que orquesta el pipeline completo: carga → subpoblaciones → filtro
de escenario → explicaciones → selección → CATE global → reporte.
"""
import logging
import time
from contextlib import contextmanager
from typing import Iterator, List, NamedTuple, Optional, Sequence

import numpy as np

from causal_graph import CausalDag, default_two_layer_dag, load_dag, validate_against_schema
from config import settings
from errors import (
    ConfigError,
    DagError,
    DisparityExplainerError,
    EstimationError,
    StageError,
)
from explanation_miner import DisparityExplanation, MinerContext, mine_all
from models import (
    ExplanationReport,
    ExplanationRow,
    PipelineConfig,
    SeedRobustnessSummary,
    SelectorConfig,
    SelectorKind,
    SigmaSweepPoint,
    StageTiming,
    SubpopulationSummary,
)
from reporting import describe_explanation
from selector import SelectionResult, brute_force_select, check_feasibility, greedy_select, topk_select
from subpop_miner import Subpopulation, mine_frequent_subpopulations, scenario_filter
from table_core import Dataset, Pattern, TupleSet, evaluate_pattern, group_average, load_csv

# Configurar logger
logger = logging.getLogger(__name__)

NOT_SIGNIFICANT = "not statistically significant"
NOT_ESTIMABLE = "not estimable"


class LoadedInputs(NamedTuple):
    dataset: Dataset
    dag: CausalDag
    g1: Pattern
    g2: Pattern
    g1_set: TupleSet
    g2_set: TupleSet


class MinedCandidates(NamedTuple):
    inputs: LoadedInputs
    subpopulations: List[Subpopulation]
    filtered: List[Subpopulation]
    explanations: List[DisparityExplanation]
    context: MinerContext


@contextmanager
def _stage(name: str, timings: List[StageTiming]) -> Iterator[None]:
    """Mide la etapa y agrega su nombre a cualquier error que escape"""
    started = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        logger.error(f"❌ Etapa {name} falló: {exc}")
        raise StageError(name, exc) from exc
    finally:
        seconds = time.perf_counter() - started
        timings.append(StageTiming(stage=name, seconds=seconds))
        logger.info(f"⏱️ [stage] {name}: {seconds:.3f}s")


class DisparityExplainerService:
    """Punto único de entrada al motor, compartido por la CLI y la API"""

    def __init__(self):
        self.runs_completed = 0
        logger.info(f"✅ {settings.service_name} inicializado (workers={settings.get_workers()})")

    # ===== ETAPAS =====

    def load_inputs(self, config: PipelineConfig) -> LoadedInputs:
        ds = load_csv(config.dataset, config.kinds(), bins=config.bins)
        if config.dag:
            dag = load_dag(config.dag)
        else:
            logger.info("ℹ️ Sin DAG configurado: se usa el DAG de dos capas")
            dag = default_two_layer_dag(ds.immutable_attributes, ds.mutable_attributes, ds.outcome)
        validate_against_schema(dag, ds)
        if not dag.has_node(ds.outcome):
            raise DagError(f"El outcome {ds.outcome} no aparece en el DAG")

        g1, g2 = Pattern.parse(config.g1), Pattern.parse(config.g2)
        if not len(g1) or not len(g2):
            raise ConfigError("g1 y g2 deben ser patrones no vacíos")
        g1_set, g2_set = evaluate_pattern(ds, g1), evaluate_pattern(ds, g2)
        for label, tuples in (("g1", g1_set), ("g2", g2_set)):
            if tuples.cardinality == 0:
                raise ConfigError(f"El grupo {label} no tiene tuplas en el dataset")
        if g1_set.intersection_len(g2_set):
            logger.warning("⚠️ Los grupos g1 y g2 se solapan")
        return LoadedInputs(ds, dag, g1, g2, g1_set, g2_set)

    def mine_subpopulations(self, config: PipelineConfig, inputs: LoadedInputs):
        subs = mine_frequent_subpopulations(
            inputs.dataset, config.sigma, inputs.g1, inputs.g2, config.max_subpop_predicates
        )
        filtered = scenario_filter(
            subs,
            config.mode,
            group_average(inputs.dataset, inputs.g1_set),
            group_average(inputs.dataset, inputs.g2_set),
            config.min_arm,
        )
        return subs, filtered

    def mine_candidates(self, config: PipelineConfig, timings: List[StageTiming]) -> MinedCandidates:
        workers = config.workers or settings.get_workers()
        with _stage("load", timings):
            inputs = self.load_inputs(config)
        with _stage("subpopulations", timings):
            subs, filtered = self.mine_subpopulations(config, inputs)
        context = MinerContext(enable_cache=config.enable_cache and settings.enable_cache)
        with _stage("explanations", timings):
            explanations = mine_all(inputs.dataset, inputs.dag, filtered, config.miner_config(workers), context)
        return MinedCandidates(inputs, subs, filtered, explanations, context)

    def select(
        self,
        config: PipelineConfig,
        explanations: Sequence[DisparityExplanation],
        d_union: TupleSet,
        selector_cfg: Optional[SelectorConfig] = None,
    ) -> SelectionResult:
        cfg = selector_cfg or config.selector_config()
        if config.selector == SelectorKind.TOPK:
            return topk_select(explanations, cfg.k, d_union, sigma=cfg.sigma)
        if config.selector == SelectorKind.BRUTE_FORCE:
            result = brute_force_select(explanations, cfg, d_union, force=config.force_brute_force)
        else:
            result = greedy_select(explanations, cfg, d_union)
        problems = check_feasibility(result, cfg)
        if problems:
            raise DisparityExplainerError(f"Selección no factible: {'; '.join(problems)}")
        return result

    def _global_effects(self, mined: MinedCandidates, config: PipelineConfig, exp: DisparityExplanation):
        inputs = mined.inputs
        adjustment = mined.context.adjustments.adjustment_for(inputs.dag, exp.treatment, inputs.dataset.outcome)
        sampling = config.miner_config(1).sampling()
        try:
            global_g1 = mined.context.estimates.estimate(
                inputs.dataset, inputs.g1_set, exp.treatment, adjustment, sampling, scope_key="global|g1"
            )
            global_g2 = mined.context.estimates.estimate(
                inputs.dataset, inputs.g2_set, exp.treatment, adjustment, sampling, scope_key="global|g2"
            )
        except EstimationError as exc:
            logger.warning(f"⚠️ CATE global no estimable para {exp.treatment}: {exc}")
            return None, None, NOT_ESTIMABLE
        note = None if global_g1.significant and global_g2.significant else NOT_SIGNIFICANT
        return global_g1, global_g2, note

    # ===== OPERACIONES PÚBLICAS =====

    def run(self, config: PipelineConfig) -> ExplanationReport:
        """Ejecuta el pipeline completo y arma el reporte"""
        logger.info(f"🚀 Corrida: dataset={config.dataset}, selector={config.selector.value}, seed={config.seed}")
        timings: List[StageTiming] = []
        mined = self.mine_candidates(config, timings)
        inputs = mined.inputs
        d_union = inputs.g1_set | inputs.g2_set

        with _stage("selection", timings):
            selection = self.select(config, mined.explanations, d_union)

        rows: List[ExplanationRow] = []
        with _stage("global", timings):
            for exp in selection.chosen:
                global_g1, global_g2, note = self._global_effects(mined, config, exp)
                rows.append(
                    ExplanationRow(
                        subpopulation=str(exp.subpopulation.pattern),
                        treatment=exp.treatment.serialize(),
                        sentence=describe_explanation(
                            exp.subpopulation.key,
                            exp.treatment.serialize(),
                            inputs.dataset.outcome,
                            config.g1,
                            config.g2,
                            exp.cate_g1.value,
                            exp.cate_g2.value,
                        ),
                        support=exp.support,
                        avg_g1=exp.subpopulation.avg_g1,
                        avg_g2=exp.subpopulation.avg_g2,
                        cate_g1=exp.cate_g1,
                        cate_g2=exp.cate_g2,
                        global_cate_g1=global_g1,
                        global_cate_g2=global_g2,
                        global_note=note,
                        delta=exp.delta,
                    )
                )
        rows.sort(key=lambda row: (-row.delta, row.subpopulation, row.treatment))

        report = ExplanationReport(
            explanations=rows,
            objective=selection.objective,
            diversity=selection.diversity,
            pairwise_sims=selection.pairwise_sims,
            selector=config.selector,
            num_subpopulations=len(mined.filtered),
            num_candidates=len(mined.explanations),
            feasibility_note=selection.feasibility_note,
            global_avg_g1=group_average(inputs.dataset, inputs.g1_set),
            global_avg_g2=group_average(inputs.dataset, inputs.g2_set),
            seed=config.seed,
            config=config.echo(),
            timings=timings,
        )
        self.runs_completed += 1
        logger.info(f"✅ Reporte con {len(rows)} explicaciones (objetivo {report.objective:.6f})")
        return report

    def list_subpopulations(self, config: PipelineConfig) -> List[SubpopulationSummary]:
        """Solo la primera etapa: subpoblaciones que pasan el filtro de escenario"""
        timings: List[StageTiming] = []
        with _stage("load", timings):
            inputs = self.load_inputs(config)
        with _stage("subpopulations", timings):
            _, filtered = self.mine_subpopulations(config, inputs)
        return [
            SubpopulationSummary(pattern=str(s.pattern), support=s.support, avg_g1=s.avg_g1, avg_g2=s.avg_g2)
            for s in filtered
        ]

    def sigma_sweep(self, config: PipelineConfig, sigmas: Sequence[float]) -> List[SigmaSweepPoint]:
        """Número de subpoblaciones candidatas por σ (método del codo)"""
        timings: List[StageTiming] = []
        with _stage("load", timings):
            inputs = self.load_inputs(config)
        points = []
        with _stage("sigma_sweep", timings):
            for sigma in sigmas:
                subs = mine_frequent_subpopulations(
                    inputs.dataset, sigma, inputs.g1, inputs.g2, config.max_subpop_predicates
                )
                points.append(SigmaSweepPoint(sigma=sigma, num_subpopulations=len(subs)))
        return points

    def seed_robustness(self, config: PipelineConfig, seeds: Sequence[int]) -> SeedRobustnessSummary:
        """Repite la selección con varias semillas sobre los mismos candidatos"""
        if not seeds:
            raise ConfigError("Se requiere al menos una semilla")
        timings: List[StageTiming] = []
        mined = self.mine_candidates(config, timings)
        d_union = mined.inputs.g1_set | mined.inputs.g2_set
        objectives, diversities, runtimes = [], [], []
        for seed in seeds:
            started = time.perf_counter()
            cfg = config.selector_config().model_copy(update={"seed": seed})
            result = self.select(config, mined.explanations, d_union, cfg)
            runtimes.append(time.perf_counter() - started)
            objectives.append(result.objective)
            diversities.append(result.diversity)
        known = [d for d in diversities if d is not None]
        return SeedRobustnessSummary(
            seeds=list(seeds),
            objectives=objectives,
            diversities=diversities,
            objective_mean=float(np.mean(objectives)),
            objective_variance=float(np.var(objectives)),
            diversity_mean=float(np.mean(known)) if known else None,
            diversity_variance=float(np.var(known)) if known else None,
            runtime_mean=float(np.mean(runtimes)),
        )

    def get_health_status(self, active_jobs: int = 0) -> dict:
        return {
            "status": "healthy",
            "service": settings.service_name,
            "version": settings.service_version,
            "workers": settings.get_workers(),
            "cache_enabled": settings.enable_cache,
            "active_jobs": active_jobs,
        }


# Instancia global del servicio
explainer_service = DisparityExplainerService()
