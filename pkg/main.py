"""
Aplicación FastAPI para el servicio explicador de disparidades
"""
from fastapi import FastAPI, HTTPException, BackgroundTasks
from fastapi.concurrency import run_in_threadpool
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
import uvicorn
import uuid
import logging
from datetime import datetime
from typing import Dict, Any
from contextlib import asynccontextmanager

from config import settings
from errors import DisparityExplainerError
from models import (
    ExplanationReport, HealthResponse, PipelineConfig,
    SubpopsRequest, SubpopsResponse, ErrorResponse
)
from disparity_service import explainer_service

# Configurar logger
logger = logging.getLogger(__name__)

# Almacenamiento en memoria para estados de tareas
task_statuses: Dict[str, Dict[str, Any]] = {}


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Maneja el ciclo de vida de la aplicación (startup/shutdown)."""
    logger.info(f"🚀 Iniciando {settings.service_name} v{settings.service_version}")
    yield
    logger.info(f"🛑 Deteniendo servicio ({len(task_statuses)} tareas en memoria)")


# Crear aplicación FastAPI con lifespan
app = FastAPI(
    title=settings.service_name,
    version=settings.service_version,
    description="Explicaciones causales de disparidades entre grupos en datos tabulares",
    lifespan=lifespan
)

# Configurar CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


def _active_jobs() -> int:
    return sum(1 for info in task_statuses.values() if info["status"] in ("pending", "processing"))


@app.get("/", response_model=dict)
async def root():
    """Endpoint raíz"""
    return {
        "service": settings.service_name,
        "version": settings.service_version,
        "status": "running",
        "endpoints": {
            "health": "/health",
            "runs": "/runs",
            "runs_start": "/runs/start",
            "subpops": "/subpops",
            "docs": "/docs"
        }
    }


@app.get("/health", response_model=HealthResponse)
async def health_check():
    """Health check del servicio"""
    try:
        status = explainer_service.get_health_status(active_jobs=_active_jobs())
        return HealthResponse(**status)
    except Exception as e:
        raise HTTPException(
            status_code=503,
            detail=f"Servicio no disponible: {str(e)}"
        )


def process_run_task(task_id: str, config: PipelineConfig):
    """
    Ejecuta el pipeline en background y actualiza el estado en task_statuses.
    """
    try:
        task_statuses[task_id]["status"] = "processing"
        task_statuses[task_id]["updated_at"] = datetime.now().isoformat()

        report = explainer_service.run(config)

        task_statuses[task_id]["status"] = "completed"
        task_statuses[task_id]["result"] = report.canonical().model_dump(mode="json")
        task_statuses[task_id]["timings"] = [t.model_dump() for t in report.timings]
        task_statuses[task_id]["updated_at"] = datetime.now().isoformat()
        task_statuses[task_id]["completed_at"] = datetime.now().isoformat()

    except Exception as e:
        logger.error(f"❌ Tarea {task_id} falló: {e}")
        task_statuses[task_id]["status"] = "error"
        task_statuses[task_id]["error"] = str(e)
        task_statuses[task_id]["updated_at"] = datetime.now().isoformat()


@app.post("/runs/start")
async def run_start(config: PipelineConfig, background_tasks: BackgroundTasks):
    """
    Inicia una corrida asíncrona del pipeline.
    Retorna inmediatamente con un task_id para hacer polling.
    """
    task_id = str(uuid.uuid4())

    task_statuses[task_id] = {
        "task_id": task_id,
        "status": "pending",
        "created_at": datetime.now().isoformat(),
        "updated_at": datetime.now().isoformat(),
        "selector": config.selector.value,
    }

    background_tasks.add_task(process_run_task, task_id, config)

    return {
        "task_id": task_id,
        "status": "pending",
        "message": "Corrida iniciada. Use el endpoint /runs/status/{task_id} para verificar el progreso.",
        "poll_url": f"/runs/status/{task_id}",
        "created_at": task_statuses[task_id]["created_at"]
    }


@app.get("/runs/status/{task_id}")
async def run_status(task_id: str):
    """
    Obtiene el estado actual de una corrida.
    Estados posibles: pending, processing, completed, error
    """
    if task_id not in task_statuses:
        raise HTTPException(
            status_code=404,
            detail=f"Tarea con ID {task_id} no encontrada"
        )

    status_info = task_statuses[task_id]

    response = {
        "task_id": status_info["task_id"],
        "status": status_info["status"],
        "created_at": status_info["created_at"],
        "updated_at": status_info["updated_at"],
    }

    if status_info["status"] == "completed":
        response["result"] = status_info.get("result")
        response["timings"] = status_info.get("timings")
        response["completed_at"] = status_info.get("completed_at")
    elif status_info["status"] == "error":
        response["error"] = status_info.get("error")
    elif status_info["status"] in ["pending", "processing"]:
        response["message"] = "Corrida en proceso. Vuelva a consultar en unos segundos."

    return response


@app.post("/runs", response_model=ExplanationReport)
async def run_sync(config: PipelineConfig):
    """
    Ejecuta el pipeline y devuelve el reporte.
    NOTA: síncrono; para datasets grandes use /runs/start y /runs/status
    """
    report = await run_in_threadpool(explainer_service.run, config)
    return report


@app.post("/subpops", response_model=SubpopsResponse)
async def subpops(request: SubpopsRequest):
    """Subpoblaciones candidatas y, opcionalmente, el barrido de σ"""
    summaries = await run_in_threadpool(explainer_service.list_subpopulations, request.config)
    response = SubpopsResponse(subpopulations=summaries)
    if request.sigmas:
        response.sweep = await run_in_threadpool(explainer_service.sigma_sweep, request.config, request.sigmas)
    return response


@app.exception_handler(DisparityExplainerError)
async def explainer_exception_handler(request, exc: DisparityExplainerError):
    """Errores del motor: 422 si son de entrada, 500 si son internos"""
    status_code = 422 if exc.exit_code == 1 else 500
    return JSONResponse(
        status_code=status_code,
        content=ErrorResponse(
            error="Entrada inválida" if status_code == 422 else "Error del motor",
            detail=str(exc),
            error_code=type(getattr(exc, "cause", exc)).__name__
        ).model_dump()
    )


@app.exception_handler(Exception)
async def global_exception_handler(request, exc):
    """Manejador global de excepciones"""
    return JSONResponse(
        status_code=500,
        content=ErrorResponse(
            error="Error interno del servidor",
            detail=str(exc)
        ).model_dump()
    )


if __name__ == "__main__":
    logging.basicConfig(level=getattr(logging, settings.log_level.upper(), logging.INFO))
    uvicorn.run(
        "main:app",
        host=settings.service_host,
        port=settings.service_port,
        reload=settings.environment == "development",
        log_level=settings.log_level.lower()
    )
