"""
Jerarquía de errores del explicador de disparidades.

Cada error lleva su código de salida para la CLI:
1 para errores de configuración/entrada, 2 para errores internos.
"""
from typing import Optional


class DisparityExplainerError(Exception):
    """Error base del servicio"""

    exit_code = 2


class InputError(DisparityExplainerError):
    """Configuración o archivos de entrada inválidos"""

    exit_code = 1


class DatasetError(InputError):
    """CSV ilegible, columnas faltantes o valores fuera de dominio"""


class PatternError(InputError):
    """Patrón mal formado o inconsistente con el esquema"""


class DagError(InputError):
    """DAG causal mal formado o cíclico"""

    def __init__(self, message: str, line: Optional[int] = None, cycle: Optional[list] = None):
        super().__init__(message)
        self.line = line
        self.cycle = cycle or []


class ConfigError(InputError):
    """Configuración del pipeline inválida"""


class EstimationError(DisparityExplainerError):
    """El CATE no puede estimarse sobre el alcance dado"""


class InsufficientOverlap(EstimationError):
    """Menos de min_arm tuplas tratadas o de control"""

    def __init__(self, n_treated: int, n_control: int, min_arm: int):
        super().__init__(
            f"Solapamiento insuficiente: {n_treated} tratadas / {n_control} control (mínimo {min_arm})"
        )
        self.n_treated = n_treated
        self.n_control = n_control
        self.min_arm = min_arm


class SingularDesign(EstimationError):
    """El indicador de tratamiento es colineal con los confusores"""


class SelectionGuardError(DisparityExplainerError):
    """La búsqueda exhaustiva excede el límite de combinaciones"""


class StageError(DisparityExplainerError):
    """Error propagado desde una etapa del pipeline"""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)
