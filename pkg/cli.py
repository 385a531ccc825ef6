# -*- coding: utf-8 -*-
"""
Punto de entrada de línea de comandos.

    python cli.py run --config run.json [--k 5 --sigma 0.05 ...]
    python cli.py subpops --config run.json --sigmas 0.3,0.1,0.05
    python cli.py oracle --config run.json
    python cli.py robustness --config run.json --seeds 1,2,3
    python cli.py synth --preset benchmark --out ./synthetic
    python cli.py serve

Códigos de salida: 0 éxito, 1 error de configuración/entrada, 2 error interno.
"""
import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

import uvicorn

import synthkit
from config import settings
from disparity_service import explainer_service
from errors import ConfigError, DisparityExplainerError
from models import (
    ClusterDistance,
    DirectionMode,
    Linkage,
    PipelineConfig,
    ReportFormat,
    SelectorKind,
    SubpopsResponse,
)
from reporting import report_render

# Configurar logger
logger = logging.getLogger(__name__)


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Lista de números inválida: '{text}'") from None


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Lista de enteros inválida: '{text}'") from None


# Campos de PipelineConfig expuestos como flags (--campo o --campo-con-guiones)
_SCALAR_FLAGS = {
    "k": int,
    "sigma": float,
    "tau": float,
    "seed": int,
    "workers": int,
    "alpha": float,
    "num_clusters": int,
    "beam_width": int,
    "max_treatment_predicates": int,
    "min_arm": int,
    "max_rows": int,
    "bins": int,
    "max_subpop_predicates": int,
}
_SWITCH_FLAGS = ("use_clustering", "resample_rejected", "enable_cache", "exhaustive_treatments")


def _flag_names(field: str) -> List[str]:
    names = [f"--{field}"]
    if "_" in field:
        names.append(f"--{field.replace('_', '-')}")
    return names


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="Configuración JSON de la corrida")
    parser.add_argument("--dataset", help="CSV de entrada (sobrescribe la configuración)")
    parser.add_argument("--dag", help="DAG como lista de aristas 'A -> B'")
    for field, kind in _SCALAR_FLAGS.items():
        parser.add_argument(*_flag_names(field), dest=field, type=kind)
    for field in _SWITCH_FLAGS:
        parser.add_argument(*_flag_names(field), dest=field, action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--selector", choices=[s.value for s in SelectorKind])
    parser.add_argument("--mode", choices=[m.value for m in DirectionMode])
    parser.add_argument("--linkage", choices=[l.value for l in Linkage])
    parser.add_argument("--distance", choices=[d.value for d in ClusterDistance])
    parser.add_argument("--format", choices=[f.value for f in ReportFormat], default=ReportFormat.JSON.value)
    parser.add_argument("--output", help="Archivo de salida (por defecto stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="disparity-explainer", description="Explicaciones causales de disparidades")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Pipeline completo")
    _add_pipeline_flags(run)
    run.add_argument("--force", action="store_true", help="Ignora el límite de combinaciones de la fuerza bruta")

    oracle = sub.add_parser("oracle", help="Pipeline completo con el selector de fuerza bruta")
    _add_pipeline_flags(oracle)
    oracle.add_argument("--force", action="store_true")

    subpops = sub.add_parser("subpops", help="Solo la etapa de subpoblaciones")
    _add_pipeline_flags(subpops)
    subpops.add_argument("--sigmas", type=_float_list, help="Barrido de σ, p.ej. 0.3,0.1,0.05")

    robustness = sub.add_parser("robustness", help="Repite la selección con varias semillas")
    _add_pipeline_flags(robustness)
    robustness.add_argument("--seeds", type=_int_list, required=True)

    synth = sub.add_parser("synth", help="Genera un dataset sintético con efectos plantados")
    synth.add_argument("--preset", choices=["confounded", "benchmark", "null"], default="benchmark")
    synth.add_argument("--spec", help="ScmSpec en JSON (en lugar de un preset)")
    synth.add_argument("--n", type=int)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True, help="Directorio de salida")
    synth.add_argument("--stem", default="synthetic")

    serve = sub.add_parser("serve", help="Levanta la API HTTP")
    serve.add_argument("--host", default=settings.service_host)
    serve.add_argument("--port", type=int, default=settings.service_port)
    return parser


def _load_config(args: argparse.Namespace, **forced: Any) -> PipelineConfig:
    fields = ["dataset", "dag", "selector", "mode", "linkage", "distance", *_SCALAR_FLAGS, *_SWITCH_FLAGS]
    overrides: Dict[str, Any] = {field: getattr(args, field) for field in fields}
    overrides.update(forced)
    return PipelineConfig.from_json_file(args.config, overrides)


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        with open(output, "w", encoding="utf-8") as handle:
            handle.write(text)
        logger.info(f"✅ Salida escrita en {output}")
    else:
        sys.stdout.write(text)


def _command_run(args: argparse.Namespace, selector: Optional[SelectorKind] = None) -> int:
    forced: Dict[str, Any] = {"force_brute_force": True} if args.force else {}
    if selector is not None:
        forced["selector"] = selector.value
    config = _load_config(args, **forced)
    report = explainer_service.run(config)
    _emit(report_render(report, ReportFormat(args.format)), args.output)
    return 0


def _command_subpops(args: argparse.Namespace) -> int:
    config = _load_config(args)
    response = SubpopsResponse(subpopulations=explainer_service.list_subpopulations(config))
    if args.sigmas:
        response.sweep = explainer_service.sigma_sweep(config, args.sigmas)
    if ReportFormat(args.format) == ReportFormat.JSON:
        _emit(response.model_dump_json(indent=2) + "\n", args.output)
        return 0
    lines = ["| Subpopulation | Support | Avg g1 | Avg g2 |", "|---|---|---|---|"]
    lines += [f"| {s.pattern} | {s.support:.2%} | {s.avg_g1:,.2f} | {s.avg_g2:,.2f} |" for s in response.subpopulations]
    if response.sweep:
        lines += ["", "| σ | #subpopulations |", "|---|---|"]
        lines += [f"| {p.sigma:g} | {p.num_subpopulations} |" for p in response.sweep]
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def _command_robustness(args: argparse.Namespace) -> int:
    config = _load_config(args)
    summary = explainer_service.seed_robustness(config, args.seeds)
    _emit(summary.model_dump_json(indent=2) + "\n", args.output)
    return 0


def _command_synth(args: argparse.Namespace) -> int:
    if args.spec:
        try:
            with open(args.spec, "r", encoding="utf-8") as handle:
                spec = synthkit.ScmSpec.model_validate_json(handle.read())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"ScmSpec inválido en {args.spec}: {exc}") from exc
    else:
        builder = synthkit.PRESETS[args.preset]
        spec = builder(seed=args.seed) if args.n is None else builder(n=args.n, seed=args.seed)
    data = synthkit.generate(spec)
    paths = synthkit.write_bundle(data, spec, args.out, stem=args.stem)
    sys.stdout.write(json.dumps(paths, indent=2) + "\n")
    return 0


def _command_serve(args: argparse.Namespace) -> int:
    uvicorn.run("main:app", host=args.host, port=args.port, log_level=settings.log_level.lower())
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _command_run(args)
        if args.command == "oracle":
            return _command_run(args, selector=SelectorKind.BRUTE_FORCE)
        if args.command == "subpops":
            return _command_subpops(args)
        if args.command == "robustness":
            return _command_robustness(args)
        if args.command == "synth":
            return _command_synth(args)
        return _command_serve(args)
    except DisparityExplainerError as exc:
        logger.error(f"❌ {exc}")
        return exc.exit_code
    except Exception as exc:
        logger.exception(f"❌ Error interno: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
