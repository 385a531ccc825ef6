import os
from typing import List, Optional
from pydantic_settings import BaseSettings, SettingsConfigDict

class Settings(BaseSettings):
    """Configuración del servicio explicador de disparidades"""

    # Configuración del servicio
    service_host: str = "0.0.0.0"
    service_port: int = 8001
    service_name: str = "Disparity Explainer Service"
    service_version: str = "1.0.0"

    # Configuración de CORS
    cors_origins: List[str] = ["*"]

    # Configuración de logging
    log_level: str = "INFO"

    # Configuración del motor
    default_workers: Optional[int] = None
    enable_cache: bool = True
    brute_force_max_combinations: int = 10_000_000

    # Environment
    environment: str = "development"

    # Configuración Pydantic v2 para BaseSettings
    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=False,
        extra="ignore",  # Ignorar variables de entorno no declaradas
    )

    def get_workers(self) -> int:
        """Obtener el número de workers (por defecto, el paralelismo disponible)"""
        if self.default_workers and self.default_workers > 0:
            return self.default_workers
        return os.cpu_count() or 1

# Instancia global de configuración
settings = Settings()
