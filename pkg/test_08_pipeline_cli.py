#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Pruebas end-to-end a través de la CLI: paquete sintético → run → reporte.
Determinismo con 1 y 8 workers, recuperación de efectos plantados, formatos
de salida, códigos de salida y forma del escalado.
"""
import json
import os
import tempfile
import time

import numpy as np
import pandas as pd
import pytest

import cli
from disparity_service import explainer_service
from models import ExplanationReport, PipelineConfig, ReportFormat
from reporting import report_render
from synthkit import generate, planted_benchmark_spec, write_bundle

PLANTED = {
    ("Region=north", "Training=yes"),
    ("Region=south", "Remote=yes"),
    ("Region=west", "Overtime=yes"),
}
# σ por encima de Region & Age: quedan solo las regiones y las edades
FOCUSED = ["--sigma", "0.2", "--k", "3", "--tau", "0.3"]


def _bundle(folder: str, n: int = 3_000, seed: int = 0) -> str:
    spec = planted_benchmark_spec(n=n, seed=seed)
    return write_bundle(generate(spec), spec, folder, stem=f"bench_{n}")["config"]


def _run(argv, folder: str, name: str) -> str:
    output = os.path.join(folder, name)
    assert cli.main(argv + ["--output", output]) == 0
    with open(output, "r", encoding="utf-8") as handle:
        return handle.read()


def test_reports_are_identical_across_worker_counts():
    print("\n🧪 Determinismo con 1 y 8 workers")
    with tempfile.TemporaryDirectory() as folder:
        config = _bundle(folder)
        serial = _run(["run", "--config", config, "--workers", "1"] + FOCUSED, folder, "w1.json")
        parallel = _run(["run", "--config", config, "--workers", "8"] + FOCUSED, folder, "w8.json")
    assert serial == parallel
    print("✅ Reportes JSON idénticos byte a byte")


def test_planted_explanations_are_reported():
    print("\n🧪 Recuperación end-to-end de los efectos plantados")
    with tempfile.TemporaryDirectory() as folder:
        config = _bundle(folder)
        report = json.loads(_run(["run", "--config", config] + FOCUSED, folder, "report.json"))
    rows = report["explanations"]
    assert {(row["subpopulation"], row["treatment"]) for row in rows} == PLANTED
    assert [row["delta"] for row in rows] == sorted((row["delta"] for row in rows), reverse=True)
    assert report["timings"] == []
    for row in rows:
        assert row["cate_g1"]["significant"] and row["cate_g2"]["significant"]
        assert row["support"] >= 0.2
        assert "is more influenced by" in row["sentence"]
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            assert report["pairwise_sims"][i][j] <= 0.3
    print(f"✅ {len(rows)} explicaciones plantadas en el reporte")


def test_topk_and_oracle_bracket_greedy():
    with tempfile.TemporaryDirectory() as folder:
        config = _bundle(folder)
        base = ["--config", config, "--sigma", "0.05", "--k", "3", "--tau", "0.3"]
        greedy = json.loads(_run(["run"] + base, folder, "greedy.json"))
        oracle = json.loads(_run(["oracle"] + base, folder, "oracle.json"))
        top = json.loads(_run(["run"] + base + ["--selector", "topk"], folder, "topk.json"))
    assert oracle["selector"] == "brute_force"
    assert greedy["objective"] <= oracle["objective"] + 1e-12
    assert oracle["objective"] <= top["objective"] + 1e-12


def test_markdown_and_json_renderings():
    with tempfile.TemporaryDirectory() as folder:
        config_path = _bundle(folder)
        markdown = _run(["run", "--config", config_path, "--format", "markdown"] + FOCUSED, folder, "report.md")
        config = PipelineConfig.from_json_file(config_path, {"sigma": 0.2, "k": 3, "tau": 0.3})
        report = explainer_service.run(config)
    table_rows = [line for line in markdown.splitlines() if line.startswith("| ") and not line.startswith("| #")]
    assert len(table_rows) == len(report.explanations) == 3
    assert "| # | Subpopulation | Treatment |" in markdown

    parsed = ExplanationReport.model_validate_json(report_render(report, ReportFormat.JSON))
    assert parsed == report.canonical()
    assert parsed.timings == [] and parsed != report
    assert [t.stage for t in report.timings] == ["load", "subpopulations", "explanations", "selection", "global"]

    empty = report_render(ExplanationReport(), ReportFormat.JSON)
    assert json.loads(empty)["explanations"] == []


def test_subpops_and_robustness_commands():
    with tempfile.TemporaryDirectory() as folder:
        config = _bundle(folder)
        listing = json.loads(
            _run(["subpops", "--config", config, "--sigmas", "0.3,0.1,0.05"], folder, "subpops.json")
        )
        robustness = json.loads(
            _run(["robustness", "--config", config, "--seeds", "1,2,3"] + FOCUSED, folder, "robust.json")
        )
    counts = [point["num_subpopulations"] for point in listing["sweep"]]
    assert counts == sorted(counts)
    assert all(row["support"] >= 0.05 for row in listing["subpopulations"])
    assert robustness["seeds"] == [1, 2, 3] and len(robustness["objectives"]) == 3


def test_synth_command_bundles_run_end_to_end():
    """El preset nulo deja el outcome sin aristas: el DAG lo declara como nodo aislado"""
    with tempfile.TemporaryDirectory() as folder:
        out = os.path.join(folder, "null")
        assert cli.main(["synth", "--preset", "null", "--n", "1000", "--seed", "3", "--out", out]) == 0
        report = json.loads(_run(["run", "--config", os.path.join(out, "synthetic.json")], folder, "null.json"))
    assert report["num_subpopulations"] >= 0
    assert isinstance(report["explanations"], list)


def _minority_groups_config(folder: str, **overrides) -> PipelineConfig:
    """g1 y g2 son el 15 % de las filas cada uno; el resto es Group=C"""
    rng = np.random.default_rng(11)
    n = 6_000
    group = rng.choice(["A", "B", "C"], size=n, p=[0.15, 0.15, 0.70])
    region = rng.choice(["r0", "r1", "r2"], size=n)
    treated = rng.random(n) < 0.5
    outcome = 5.0 * (group == "A") + treated * np.where(group == "A", 4.0, 1.0) + rng.normal(0.0, 1.0, n)
    path = os.path.join(folder, "minority.csv")
    pd.DataFrame({
        "Group": group,
        "Region": region,
        "M": np.where(treated, "yes", "no"),
        "Y": np.round(outcome, 6),
    }).to_csv(path, index=False)
    base = {
        "dataset": path,
        "attributes": {"Group": "immutable", "Region": "immutable", "M": "mutable"},
        "outcome": "Y",
        "g1": "Group=A",
        "g2": "Group=B",
        "k": 3,
        "workers": 1,
    }
    return PipelineConfig.model_validate({**base, **overrides})


def test_every_selector_respects_group_support():
    print("\n🧪 Soporte restringido a g1 ∪ g2 con todos los selectores")
    with tempfile.TemporaryDirectory() as folder:
        loose = {
            kind: explainer_service.run(_minority_groups_config(folder, sigma=0.05, selector=kind))
            for kind in ("greedy", "topk")
        }
        strict = {
            kind: explainer_service.run(_minority_groups_config(folder, sigma=0.2, selector=kind))
            for kind in ("greedy", "topk")
        }
    # con σ=0.05 las regiones (≈ 0.1 de soporte) sí se explican
    assert loose["topk"].explanations and loose["greedy"].explanations
    for report in list(loose.values()) + list(strict.values()):
        sigma = report.config["sigma"]
        assert all(row.support >= sigma for row in report.explanations)
    assert strict["topk"].explanations == [] and strict["greedy"].explanations == []
    print("✅ Ningún selector reporta filas con soporte < σ")


def test_exit_codes_for_bad_inputs():
    print("\n🧪 Códigos de salida")
    with tempfile.TemporaryDirectory() as folder:
        broken = os.path.join(folder, "broken.json")
        with open(broken, "w", encoding="utf-8") as handle:
            handle.write('{"dataset": "missing.csv"}')
        assert cli.main(["run", "--config", broken]) == 1
        assert cli.main(["run", "--config", os.path.join(folder, "nowhere.json")]) == 1

        config = _bundle(folder, n=2_000)
        assert cli.main(["run", "--config", config, "--sigma", "0"]) == 1
        assert cli.main(["run", "--config", config, "--dataset", os.path.join(folder, "missing.csv")]) == 1

        wrong_group = os.path.join(folder, "wrong_group.json")
        with open(config, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        raw["g1"] = "Group=Z"
        with open(wrong_group, "w", encoding="utf-8") as handle:
            json.dump(raw, handle)
        assert cli.main(["run", "--config", wrong_group]) == 1
    print("✅ Errores de configuración → 1")


def test_every_config_knob_has_a_flag():
    print("\n🧪 Flags de la CLI para los parámetros de la corrida")
    with tempfile.TemporaryDirectory() as folder:
        config = _bundle(folder, n=2_000)
        knobs = [
            "--alpha", "0.01", "--num_clusters", "4", "--beam-width", "5", "--min_arm", "20",
            "--max_rows", "1000", "--linkage", "single", "--no-use-clustering",
        ]
        report = json.loads(_run(["run", "--config", config] + FOCUSED + knobs, folder, "knobs.json"))
        assert cli.main(["run", "--config", config, "--alpha", "2"]) == 1
        assert cli.main(["run", "--config", config, "--min_arm", "0"]) == 1
    echoed = report["config"]
    assert echoed["alpha"] == 0.01 and echoed["num_clusters"] == 4 and echoed["beam_width"] == 5
    assert echoed["min_arm"] == 20 and echoed["max_rows"] == 1000
    assert echoed["linkage"] == "single" and echoed["use_clustering"] is False
    assert echoed["sigma"] == 0.2 and echoed["k"] == 3
    print("✅ Los flags llegan al eco de la configuración")


def test_runtime_grows_roughly_linearly():
    print("\n🧪 Escalado n vs 4n")
    timings = {}
    with tempfile.TemporaryDirectory() as folder:
        for n in (3_000, 12_000):
            config = PipelineConfig.from_json_file(_bundle(folder, n=n), {"workers": 1})
            started = time.perf_counter()
            explainer_service.run(config)
            timings[n] = time.perf_counter() - started
    ratio = timings[12_000] / timings[3_000]
    print(f"✅ t(4n)/t(n) = {ratio:.2f}")
    assert ratio <= 6.0


if __name__ == "__main__":
    print("=" * 60)
    print("PRUEBAS - PIPELINE Y CLI")
    print("=" * 60)
    test_reports_are_identical_across_worker_counts()
    test_planted_explanations_are_reported()
    test_topk_and_oracle_bracket_greedy()
    test_markdown_and_json_renderings()
    test_subpops_and_robustness_commands()
    test_synth_command_bundles_run_end_to_end()
    test_every_selector_respects_group_support()
    test_exit_codes_for_bad_inputs()
    test_every_config_knob_has_a_flag()
    test_runtime_grows_roughly_linearly()
    print("\n✅ Todas las pruebas del pipeline pasaron")
