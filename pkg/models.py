import os
from typing import Optional, Dict, Any, List
from pydantic import BaseModel, ConfigDict, Field, model_validator
from enum import Enum

from errors import ConfigError


class AttributeKind(str, Enum):
    """Rol de un atributo en el esquema"""
    IMMUTABLE = "immutable"
    MUTABLE = "mutable"
    OUTCOME = "outcome"


class DirectionMode(str, Enum):
    """Dirección de la disparidad buscada por el escenario"""
    G1_ABOVE = "g1_above"
    G1_BELOW = "g1_below"
    REVERSE_OF_GLOBAL = "reverse_of_global"


class SelectorKind(str, Enum):
    """Estrategia de selección del conjunto final"""
    GREEDY = "greedy"
    BRUTE_FORCE = "brute_force"
    TOPK = "topk"


class Linkage(str, Enum):
    SINGLE = "single"
    COMPLETE = "complete"
    AVERAGE = "average"


class ClusterDistance(str, Enum):
    JACCARD = "jaccard"
    SYMMETRIC_DIFFERENCE = "symmetric_difference"


class ReportFormat(str, Enum):
    JSON = "json"
    MARKDOWN = "markdown"


# ====== Configuraciones por etapa ======

class SamplingConfig(BaseModel):
    """Muestreo y umbrales del estimador de CATE"""
    model_config = ConfigDict(frozen=True)

    max_rows: int = Field(50_000, description="Tamaño máximo de muestra por alcance")
    seed: int = Field(0, description="Semilla del muestreo")
    min_arm: int = Field(10, ge=1, description="Mínimo de tuplas por brazo (tratado/control)")
    alpha: float = Field(0.05, gt=0.0, lt=1.0, description="Nivel de significancia")

    @model_validator(mode="after")
    def _check_rows(self) -> "SamplingConfig":
        if self.max_rows < 2 * self.min_arm:
            raise ValueError("max_rows debe ser al menos 2 × min_arm")
        return self


class MinerConfig(BaseModel):
    """Parámetros del minero de explicaciones"""
    model_config = ConfigDict(frozen=True)

    max_treatment_predicates: int = Field(2, ge=1)
    beam_width: int = Field(20, ge=1)
    workers: int = Field(1, ge=1)
    seed: int = 0
    min_arm: int = Field(10, ge=1)
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    max_rows: int = 50_000
    enable_cache: bool = True
    exhaustive_treatments: bool = False

    def sampling(self) -> SamplingConfig:
        return SamplingConfig(
            max_rows=self.max_rows, seed=self.seed, min_arm=self.min_arm, alpha=self.alpha
        )


class SelectorConfig(BaseModel):
    """Parámetros de la selección diversa"""
    model_config = ConfigDict(frozen=True)

    k: int = Field(5, ge=1)
    tau: float = Field(0.55, ge=0.0, le=1.0)
    num_clusters: int = Field(10, ge=1)
    seed: int = 0
    sigma: float = Field(0.05, ge=0.0, le=1.0)
    linkage: Linkage = Linkage.AVERAGE
    distance: ClusterDistance = ClusterDistance.JACCARD
    use_clustering: bool = True
    resample_rejected: bool = False


# ====== Estimaciones ======

class CateEstimate(BaseModel):
    """Efecto causal condicional estimado por OLS"""
    model_config = ConfigDict(frozen=True)

    value: float = Field(..., description="Coeficiente del tratamiento, en unidades del outcome")
    std_error: float = Field(..., description="Error estándar OLS del coeficiente")
    p_value: float = Field(..., ge=0.0, le=1.0)
    n_treated: int
    n_control: int
    significant: bool


# ====== Configuración del pipeline ======

class PipelineConfig(BaseModel):
    """Configuración completa de una corrida (archivo JSON + flags de la CLI)"""
    model_config = ConfigDict(extra="forbid")

    dataset: str = Field(..., description="Ruta del CSV")
    dag: Optional[str] = Field(None, description="Ruta del DAG (lista de aristas); None usa el DAG de dos capas")
    attributes: Dict[str, AttributeKind] = Field(..., description="Rol de cada atributo")
    outcome: str = Field(..., description="Columna de outcome")
    g1: str = Field(..., description="Patrón del grupo 1, p.ej. 'Role=Analyst'")
    g2: str = Field(..., description="Patrón del grupo 2")
    mode: DirectionMode = DirectionMode.G1_ABOVE
    sigma: float = Field(0.05, gt=0.0, le=1.0)
    tau: float = Field(0.55, ge=0.0, le=1.0)
    k: int = Field(5, ge=1)
    num_clusters: int = Field(10, ge=1)
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    max_rows: int = Field(50_000, ge=2)
    beam_width: int = Field(20, ge=1)
    max_treatment_predicates: int = Field(2, ge=1)
    min_arm: int = Field(10, ge=1)
    bins: int = Field(10, ge=1)
    max_subpop_predicates: Optional[int] = Field(None, ge=1)
    workers: Optional[int] = Field(None, ge=1)
    seed: int = 0
    selector: SelectorKind = SelectorKind.GREEDY
    linkage: Linkage = Linkage.AVERAGE
    distance: ClusterDistance = ClusterDistance.JACCARD
    use_clustering: bool = True
    resample_rejected: bool = False
    enable_cache: bool = True
    exhaustive_treatments: bool = False
    force_brute_force: bool = False

    @model_validator(mode="after")
    def _check_kinds(self) -> "PipelineConfig":
        if self.outcome in self.attributes and self.attributes[self.outcome] != AttributeKind.OUTCOME:
            raise ValueError(f"El outcome '{self.outcome}' no puede ser inmutable o mutable")
        extra_outcomes = [
            name for name, kind in self.attributes.items()
            if kind == AttributeKind.OUTCOME and name != self.outcome
        ]
        if extra_outcomes:
            raise ValueError(f"Solo puede haber un outcome; sobran: {extra_outcomes}")
        if self.max_rows < 2 * self.min_arm:
            raise ValueError("max_rows debe ser al menos 2 × min_arm")
        return self

    @classmethod
    def from_json_file(cls, path: str, overrides: Optional[Dict[str, Any]] = None) -> "PipelineConfig":
        """Carga la configuración desde JSON; los overrides (flags) ganan"""
        try:
            with open(path, "r", encoding="utf-8") as handle:
                raw = handle.read()
        except OSError as exc:
            raise ConfigError(f"No se pudo leer la configuración {path}: {exc}") from exc
        try:
            base = cls.model_validate_json(raw)
        except ValueError as exc:
            raise ConfigError(f"Configuración inválida en {path}: {exc}") from exc
        # rutas relativas del archivo: relativas a su directorio
        folder = os.path.dirname(os.path.abspath(path))
        relocated = {
            key: os.path.join(folder, value)
            for key, value in (("dataset", base.dataset), ("dag", base.dag))
            if value and not os.path.isabs(value)
        }
        if relocated:
            base = base.model_copy(update=relocated)
        return base.with_overrides(overrides or {})

    def with_overrides(self, overrides: Dict[str, Any]) -> "PipelineConfig":
        clean = {key: value for key, value in overrides.items() if value is not None}
        if not clean:
            return self
        try:
            return type(self).model_validate({**self.model_dump(), **clean})
        except ValueError as exc:
            raise ConfigError(f"Override inválido: {exc}") from exc

    def kinds(self) -> Dict[str, AttributeKind]:
        """Mapa de roles incluyendo el outcome"""
        return {**self.attributes, self.outcome: AttributeKind.OUTCOME}

    def miner_config(self, workers: int) -> MinerConfig:
        return MinerConfig(
            max_treatment_predicates=self.max_treatment_predicates,
            beam_width=self.beam_width,
            workers=workers,
            seed=self.seed,
            min_arm=self.min_arm,
            alpha=self.alpha,
            max_rows=self.max_rows,
            enable_cache=self.enable_cache,
            exhaustive_treatments=self.exhaustive_treatments,
        )

    def selector_config(self) -> SelectorConfig:
        return SelectorConfig(
            k=self.k,
            tau=self.tau,
            num_clusters=self.num_clusters,
            seed=self.seed,
            sigma=self.sigma,
            linkage=self.linkage,
            distance=self.distance,
            use_clustering=self.use_clustering,
            resample_rejected=self.resample_rejected,
        )

    def echo(self) -> Dict[str, Any]:
        """Eco de la configuración para el reporte, sin los ajustes que no cambian el resultado"""
        return self.model_dump(mode="json", exclude={"workers", "enable_cache"})


# ====== Reporte ======

class StageTiming(BaseModel):
    stage: str
    seconds: float


class ExplanationRow(BaseModel):
    """Una fila del reporte: subpoblación, tratamiento y efectos"""
    subpopulation: str
    treatment: str
    sentence: str
    support: float
    avg_g1: float
    avg_g2: float
    cate_g1: CateEstimate
    cate_g2: CateEstimate
    global_cate_g1: Optional[CateEstimate] = None
    global_cate_g2: Optional[CateEstimate] = None
    global_note: Optional[str] = Field(None, description="p.ej. 'not statistically significant'")
    delta: float


class ExplanationReport(BaseModel):
    """Reporte final de la corrida"""
    explanations: List[ExplanationRow] = Field(default_factory=list)
    objective: float = 0.0
    diversity: Optional[float] = None
    pairwise_sims: List[List[float]] = Field(default_factory=list)
    selector: SelectorKind = SelectorKind.GREEDY
    num_subpopulations: int = 0
    num_candidates: int = 0
    feasibility_note: Optional[str] = None
    global_avg_g1: Optional[float] = None
    global_avg_g2: Optional[float] = None
    seed: int = 0
    config: Dict[str, Any] = Field(default_factory=dict)
    timings: List[StageTiming] = Field(default_factory=list)

    def canonical(self) -> "ExplanationReport":
        """Copia sin metadatos volátiles (tiempos)"""
        return self.model_copy(update={"timings": []})


class SigmaSweepPoint(BaseModel):
    sigma: float
    num_subpopulations: int


class SubpopulationSummary(BaseModel):
    pattern: str
    support: float
    avg_g1: Optional[float] = None
    avg_g2: Optional[float] = None


class SeedRobustnessSummary(BaseModel):
    seeds: List[int]
    objectives: List[float]
    diversities: List[Optional[float]]
    objective_mean: float
    objective_variance: float
    diversity_mean: Optional[float] = None
    diversity_variance: Optional[float] = None
    runtime_mean: float


# ====== API ======

class HealthResponse(BaseModel):
    """Modelo para respuesta de health check"""
    status: str
    service: str
    version: str
    workers: int
    cache_enabled: bool
    active_jobs: int


class SubpopsRequest(BaseModel):
    config: PipelineConfig
    sigmas: Optional[List[float]] = None


class SubpopsResponse(BaseModel):
    subpopulations: List[SubpopulationSummary] = Field(default_factory=list)
    sweep: List[SigmaSweepPoint] = Field(default_factory=list)


class ErrorResponse(BaseModel):
    """Modelo para respuestas de error"""
    error: str
    detail: Optional[str] = None
    error_code: Optional[str] = None
