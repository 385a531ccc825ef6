# -*- coding: utf-8 -*-
"""
Generador de datasets sintéticos a partir de un SCM lineal con efectos
plantados por subpoblación y grupo. Sirve de verdad de terreno para las
pruebas del estimador y del pipeline completo.
"""
import logging
import os
from typing import Dict, List, NamedTuple, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator

from causal_graph import CausalDag, serialize_dag
from errors import ConfigError, PatternError
from models import AttributeKind, DirectionMode, PipelineConfig
from table_core import AttributeSchema, Dataset, Pattern, PredicateOp

# Configurar logger
logger = logging.getLogger(__name__)

FEASIBILITY_FACTOR = 10


class ImmutableAttr(BaseModel):
    """Atributo inmutable muestreado de forma independiente"""
    name: str
    probabilities: List[float] = Field(..., min_length=1)
    levels: Optional[List[str]] = None

    @field_validator("probabilities")
    @classmethod
    def _normalized(cls, probabilities: List[float]) -> List[float]:
        if any(p < 0 for p in probabilities) or not np.isclose(sum(probabilities), 1.0):
            raise ValueError("Las probabilidades deben ser no negativas y sumar 1")
        return probabilities

    def labels(self) -> List[str]:
        return self.levels or [f"{self.name}_{j}" for j in range(len(self.probabilities))]


class MutableAttr(BaseModel):
    """
    Atributo mutable con logits lineales en sus padres:
    logit_j = j · (bias + Σ_p weight_p · código_p).
    """
    name: str
    domain_size: int = Field(2, ge=2)
    bias: float = 0.0
    weights: Dict[str, float] = Field(default_factory=dict)
    levels: Optional[List[str]] = None

    def labels(self) -> List[str]:
        return self.levels or [f"{self.name}_{j}" for j in range(self.domain_size)]


class PlantedEffect(BaseModel):
    """Efecto del tratamiento dentro de la subpoblación, distinto por grupo"""
    subpopulation: str = ""
    treatment: str
    effect_g1: float
    effect_g2: float

    @model_validator(mode="after")
    def _distinct(self) -> "PlantedEffect":
        if self.effect_g1 == self.effect_g2:
            raise ValueError("effect_g1 y effect_g2 deben diferir (si no, Δ = 0)")
        return self


class ScmSpec(BaseModel):
    """Especificación del modelo causal estructural lineal"""
    immutable_attrs: List[ImmutableAttr]
    mutable_attrs: List[MutableAttr] = Field(default_factory=list)
    outcome_name: str = "Outcome"
    intercept: float = 0.0
    outcome_weights: Dict[str, List[float]] = Field(default_factory=dict)
    planted_effects: List[PlantedEffect] = Field(default_factory=list)
    g1: str = "Group=A"
    g2: str = "Group=B"
    noise_sd: float = Field(1.0, ge=0.0)
    n: int = Field(10_000, ge=1)
    seed: int = 0
    min_arm: int = Field(10, ge=1)


class PlantedTruth(BaseModel):
    subpopulation: str
    treatment: str
    effect_g1: float
    effect_g2: float
    true_delta: float


class SyntheticData(NamedTuple):
    dataset: Dataset
    dag: CausalDag
    ground_truth: List[PlantedTruth]
    frame: pd.DataFrame
    kinds: Dict[str, AttributeKind]


# ===== MUESTREO =====

def _pattern_mask(pattern: Pattern, codes: Dict[str, np.ndarray], labels: Dict[str, List[str]], n: int) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    for predicate in pattern.predicates:
        if predicate.attribute not in codes:
            raise PatternError(f"Atributo desconocido en el patrón: {predicate.attribute}")
        try:
            level = labels[predicate.attribute].index(predicate.value)
        except ValueError:
            raise PatternError(f"Valor '{predicate.value}' fuera del dominio de {predicate.attribute}") from None
        if predicate.op == PredicateOp.EQUALS:
            mask &= codes[predicate.attribute] == level
        else:
            mask &= codes[predicate.attribute] != level
    return mask


def _expected_mass(pattern: Pattern, spec: ScmSpec) -> float:
    """n · P(patrón) con inmutables independientes"""
    by_name = {a.name: a for a in spec.immutable_attrs}
    probability = 1.0
    for predicate in pattern.predicates:
        attr = by_name[predicate.attribute]
        if predicate.value not in attr.labels():
            raise ConfigError(f"Valor '{predicate.value}' fuera del dominio de {attr.name}")
        p = attr.probabilities[attr.labels().index(predicate.value)]
        probability *= p if predicate.op == PredicateOp.EQUALS else 1.0 - p
    return spec.n * probability


def _check_spec(spec: ScmSpec) -> Dict[str, AttributeKind]:
    kinds: Dict[str, AttributeKind] = {a.name: AttributeKind.IMMUTABLE for a in spec.immutable_attrs}
    for attr in spec.mutable_attrs:
        if attr.name in kinds:
            raise ConfigError(f"Atributo duplicado: {attr.name}")
        unknown = [p for p in attr.weights if p not in kinds]
        if unknown:
            raise ConfigError(f"{attr.name} depende de atributos no definidos antes: {unknown}")
        kinds[attr.name] = AttributeKind.MUTABLE
    if spec.outcome_name in kinds:
        raise ConfigError(f"El outcome {spec.outcome_name} colisiona con un atributo")

    for name, weights in spec.outcome_weights.items():
        if name not in kinds:
            raise ConfigError(f"Pesos del outcome para un atributo desconocido: {name}")

    for effect in spec.planted_effects:
        subpop = Pattern.parse(effect.subpopulation)
        treatment = Pattern.parse(effect.treatment)
        if any(kinds.get(a) != AttributeKind.IMMUTABLE for a in subpop.attributes()):
            raise ConfigError(f"La subpoblación plantada '{subpop}' debe usar solo inmutables")
        if not len(treatment) or any(kinds.get(a) != AttributeKind.MUTABLE for a in treatment.attributes()):
            raise ConfigError(f"El tratamiento plantado '{treatment}' debe usar solo mutables")
        mass = _expected_mass(subpop, spec)
        if mass < FEASIBILITY_FACTOR * spec.min_arm:
            raise ConfigError(
                f"Especificación inviable: masa esperada {mass:.1f} de '{subpop}' "
                f"< {FEASIBILITY_FACTOR} × min_arm"
            )
    return kinds


def _generating_dag(spec: ScmSpec, kinds: Dict[str, AttributeKind]) -> CausalDag:
    outcome = spec.outcome_name
    edges = set()
    for attr in spec.mutable_attrs:
        edges.update((parent, attr.name) for parent, w in attr.weights.items() if w != 0)
    for name, weights in spec.outcome_weights.items():
        if any(w != 0 for w in weights):
            edges.add((name, outcome))
    group_attrs = set(Pattern.parse(spec.g1).attributes()) | set(Pattern.parse(spec.g2).attributes())
    for effect in spec.planted_effects:
        involved = set(Pattern.parse(effect.subpopulation).attributes())
        involved |= set(Pattern.parse(effect.treatment).attributes()) | group_attrs
        edges.update((name, outcome) for name in involved)
    return CausalDag(nodes=list(kinds) + [outcome], edges=sorted(edges))


def generate(spec: ScmSpec) -> SyntheticData:
    """Muestrea el SCM; mismo spec y semilla producen el mismo dataset bit a bit"""
    kinds = _check_spec(spec)
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    codes: Dict[str, np.ndarray] = {}
    labels: Dict[str, List[str]] = {}

    for attr in spec.immutable_attrs:
        labels[attr.name] = attr.labels()
        codes[attr.name] = rng.choice(len(attr.probabilities), size=n, p=attr.probabilities).astype(np.int32)

    for attr in spec.mutable_attrs:
        labels[attr.name] = attr.labels()
        score = np.full(n, attr.bias)
        for parent, weight in attr.weights.items():
            score = score + weight * codes[parent]
        logits = np.outer(score, np.arange(attr.domain_size))
        logits -= logits.max(axis=1, keepdims=True)
        probs = np.exp(logits)
        probs /= probs.sum(axis=1, keepdims=True)
        draws = rng.random(n)
        sampled = (probs.cumsum(axis=1) < draws[:, None]).sum(axis=1)
        codes[attr.name] = np.minimum(sampled, attr.domain_size - 1).astype(np.int32)

    outcome = np.full(n, spec.intercept, dtype=float)
    for name, weights in spec.outcome_weights.items():
        if len(weights) != len(labels[name]):
            raise ConfigError(f"Se esperaban {len(labels[name])} pesos para {name}")
        outcome += np.asarray(weights, dtype=float)[codes[name]]

    g1_mask = _pattern_mask(Pattern.parse(spec.g1), codes, labels, n)
    g2_mask = _pattern_mask(Pattern.parse(spec.g2), codes, labels, n)
    for effect in spec.planted_effects:
        scope = _pattern_mask(Pattern.parse(effect.subpopulation), codes, labels, n)
        treated = scope & _pattern_mask(Pattern.parse(effect.treatment), codes, labels, n)
        outcome[treated & g1_mask] += effect.effect_g1
        outcome[treated & g2_mask] += effect.effect_g2
    outcome += rng.normal(0.0, spec.noise_sd, size=n) if spec.noise_sd > 0 else 0.0

    schema = [AttributeSchema(name=name, domain=tuple(labels[name]), kind=kind) for name, kind in kinds.items()]
    schema.append(AttributeSchema(name=spec.outcome_name, kind=AttributeKind.OUTCOME))
    dataset = Dataset(schema, codes, outcome)

    truth = [
        PlantedTruth(
            subpopulation=Pattern.parse(e.subpopulation).serialize(),
            treatment=Pattern.parse(e.treatment).serialize(),
            effect_g1=e.effect_g1,
            effect_g2=e.effect_g2,
            true_delta=abs(e.effect_g1 - e.effect_g2) / dataset.max_abs_outcome,
        )
        for e in spec.planted_effects
    ]
    frame = dataset.to_frame()
    all_kinds = {**kinds, spec.outcome_name: AttributeKind.OUTCOME}
    logger.info(f"✅ Dataset sintético: {n} filas, {len(truth)} efectos plantados (seed={spec.seed})")
    return SyntheticData(dataset, _generating_dag(spec, kinds), truth, frame, all_kinds)


# ===== EMISIÓN =====

def write_bundle(
    data: SyntheticData,
    spec: ScmSpec,
    directory: str,
    stem: str = "synthetic",
    mode: DirectionMode = DirectionMode.G1_ABOVE,
) -> Dict[str, str]:
    """Escribe CSV + lista de aristas + configuración JSON lista para `run`"""
    os.makedirs(directory, exist_ok=True)
    paths = {
        "dataset": os.path.join(directory, f"{stem}.csv"),
        "dag": os.path.join(directory, f"{stem}.dag"),
        "config": os.path.join(directory, f"{stem}.json"),
        "truth": os.path.join(directory, f"{stem}_truth.json"),
    }
    data.frame.to_csv(paths["dataset"], index=False, float_format="%.17g")
    with open(paths["dag"], "w", encoding="utf-8") as handle:
        handle.write(serialize_dag(data.dag))
    config = PipelineConfig(
        dataset=os.path.basename(paths["dataset"]),
        dag=os.path.basename(paths["dag"]),
        attributes={k: v for k, v in data.kinds.items() if v != AttributeKind.OUTCOME},
        outcome=spec.outcome_name,
        g1=spec.g1,
        g2=spec.g2,
        mode=mode,
        min_arm=spec.min_arm,
        seed=spec.seed,
    )
    with open(paths["config"], "w", encoding="utf-8") as handle:
        handle.write(config.model_dump_json(indent=2, exclude={"workers"}))
    with open(paths["truth"], "w", encoding="utf-8") as handle:
        handle.write("[\n" + ",\n".join(t.model_dump_json() for t in data.ground_truth) + "\n]\n")
    logger.info(f"✅ Paquete sintético escrito en {directory}")
    return paths


# ===== ESCENARIOS PREDEFINIDOS =====

def _group_attr() -> ImmutableAttr:
    return ImmutableAttr(name="Group", probabilities=[0.5, 0.5], levels=["A", "B"])


def confounded_effect_spec(
    n: int = 10_000, seed: int = 0, effect_g1: float = 5.0, effect_g2: float = 0.0, noise_sd: float = 1.0
) -> ScmSpec:
    """
    Un confusor binario Z que empuja al tratamiento M y al outcome: la
    diferencia de medias ingenua queda sesgada en 4 · (0.82 − 0.18) ≈ 2.56.
    """
    return ScmSpec(
        immutable_attrs=[_group_attr(), ImmutableAttr(name="Z", probabilities=[0.5, 0.5], levels=["z0", "z1"])],
        mutable_attrs=[MutableAttr(name="M", bias=-1.5, weights={"Z": 3.0}, levels=["no", "yes"])],
        outcome_weights={"Z": [0.0, 4.0]},
        planted_effects=[PlantedEffect(treatment="M=yes", effect_g1=effect_g1, effect_g2=effect_g2)],
        noise_sd=noise_sd,
        n=n,
        seed=seed,
    )


def planted_benchmark_spec(
    n: int = 6_000, seed: int = 0, effect: float = 8.0, baseline: float = 2.0
) -> ScmSpec:
    """
    Tres tratamientos distintos plantados en tres regiones. El efecto en g2
    (baseline) no es nulo: ambos CATE deben salir significativos.
    """
    return ScmSpec(
        immutable_attrs=[
            _group_attr(),
            ImmutableAttr(name="Region", probabilities=[0.34, 0.33, 0.33], levels=["north", "south", "west"]),
            ImmutableAttr(name="Age", probabilities=[0.5, 0.5], levels=["junior", "senior"]),
        ],
        mutable_attrs=[
            MutableAttr(name="Training", bias=-0.5, weights={"Age": 1.0}, levels=["no", "yes"]),
            MutableAttr(name="Remote", bias=-0.5, weights={"Region": 0.5}, levels=["no", "yes"]),
            MutableAttr(name="Overtime", bias=0.0, weights={"Age": -0.5}, levels=["no", "yes"]),
        ],
        intercept=20.0,
        outcome_weights={"Age": [0.0, 3.0], "Region": [0.0, 1.0, 2.0]},
        planted_effects=[
            PlantedEffect(subpopulation="Region=north", treatment="Training=yes", effect_g1=effect, effect_g2=baseline),
            PlantedEffect(subpopulation="Region=south", treatment="Remote=yes", effect_g1=effect, effect_g2=baseline),
            PlantedEffect(subpopulation="Region=west", treatment="Overtime=yes", effect_g1=effect, effect_g2=baseline),
        ],
        n=n,
        seed=seed,
    )


def null_spec(n: int = 2_000, seed: int = 0) -> ScmSpec:
    """Mismo esquema que el benchmark, sin pesos ni efectos: outcome = ruido"""
    base = planted_benchmark_spec(n=n, seed=seed)
    return base.model_copy(update={"intercept": 0.0, "outcome_weights": {}, "planted_effects": []})


PRESETS = {
    "confounded": confounded_effect_spec,
    "benchmark": planted_benchmark_spec,
    "null": null_spec,
}
