#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Pruebas del núcleo tabular: patrones, conjuntos de tuplas, carga de CSV,
binning y las fórmulas de soporte y promedio.
"""
import os
import tempfile

import numpy as np
import pytest

from errors import DatasetError, PatternError
from models import AttributeKind
from sample_data import SALARY_KINDS, salary_dataset, write_salary_csv
from table_core import (
    AttributeSchema,
    Dataset,
    Pattern,
    Predicate,
    PredicateOp,
    TupleSet,
    bin_numeric,
    evaluate_pattern,
    group_average,
    load_csv,
    support_fraction,
)


def test_support_fraction_matches_reference_ratio():
    """16,508 de 47,702 filas → 34.61%"""
    print("\n🧪 Soporte 16,508 / 47,702")
    n = 47_702
    codes = np.zeros(n, dtype=np.int32)
    codes[:16_508] = 1
    schema = [
        AttributeSchema(name="Role", domain=("Developer", "Analyst"), kind=AttributeKind.IMMUTABLE),
        AttributeSchema(name="Salary", kind=AttributeKind.OUTCOME),
    ]
    ds = Dataset(schema, {"Role": codes}, np.ones(n))
    tuples = evaluate_pattern(ds, Pattern.parse("Role=Analyst"))
    assert tuples.cardinality == 16_508
    assert support_fraction(ds, tuples) == pytest.approx(0.3461, abs=1e-4)
    print("✅ soporte = 0.3461")


def test_salary_table_loads_with_suffixes():
    print("\n🧪 Carga de la tabla de salarios")
    with tempfile.TemporaryDirectory() as folder:
        ds = load_csv(write_salary_csv(os.path.join(folder, "salaries.csv")), SALARY_KINDS)
    assert ds.n == 4
    assert list(ds.outcome_values) == [83_000, 124_000, 75_000, 59_000]
    assert ds.max_abs_outcome == 124_000
    assert ds.attribute("YearsCoding").domain == ("2-4", "4-6", "6-8")
    assert ds.immutable_attributes == ["Ethnicity", "Gender", "Role"]
    assert ds.mutable_attributes == ["Education", "YearsCoding"]
    print("✅ outcome parseado (K → miles) y dominios ordenados")


def test_group_averages_on_salary_table():
    ds = salary_dataset()
    developers = evaluate_pattern(ds, Pattern.parse("Role=Back-end developer"))
    others = evaluate_pattern(ds, Pattern.parse("Role!=Back-end developer"))
    assert group_average(ds, developers) == pytest.approx(67_000)
    assert group_average(ds, others) == pytest.approx(103_500)
    assert evaluate_pattern(ds, Pattern.parse("YearsCoding=6-8")).indices().tolist() == [0, 3]
    with pytest.raises(DatasetError):
        group_average(ds, TupleSet.empty(ds.n))


def test_pattern_canonical_form():
    a = Pattern.parse("Role=Data analyst & Gender=Male")
    b = Pattern.parse("Gender=Male&Role=Data analyst")
    assert a == b
    assert a.serialize() == "Gender=Male & Role=Data analyst"
    assert str(Pattern()) == "*"
    assert Pattern.parse("Gender!=Male").predicates[0].op == PredicateOp.NOT_EQUALS
    assert a.attributes() == ("Gender", "Role")


def test_pattern_errors():
    with pytest.raises(PatternError):
        Pattern.parse("Gender=Male & Gender=Female")
    with pytest.raises(PatternError):
        Pattern.parse("Gender")
    ds = salary_dataset()
    with pytest.raises(PatternError):
        evaluate_pattern(ds, Pattern.parse("Gender=Robot"))
    with pytest.raises(PatternError):
        evaluate_pattern(ds, Pattern.parse("Salary=83K"))
    with pytest.raises(PatternError):
        evaluate_pattern(ds, Pattern.parse("Height=Tall"))


def test_not_equals_excludes_missing_values():
    schema = [
        AttributeSchema(name="Color", domain=("blue", "red"), kind=AttributeKind.IMMUTABLE),
        AttributeSchema(name="Score", kind=AttributeKind.OUTCOME),
    ]
    ds = Dataset(schema, {"Color": np.array([0, 1, -1, 1])}, np.array([1.0, 2.0, 3.0, 4.0]))
    assert evaluate_pattern(ds, Pattern.parse("Color!=blue")).indices().tolist() == [1, 3]
    assert evaluate_pattern(ds, Pattern.parse("Color=blue")).indices().tolist() == [0]


def test_tuple_set_operations():
    a = TupleSet.from_indices([1, 2, 3], 10)
    b = TupleSet.from_indices([2, 3, 4], 10)
    assert (a & b).indices().tolist() == [2, 3]
    assert (a | b).cardinality == 4
    assert (a - b).indices().tolist() == [1]
    assert (~a).cardinality == 7
    assert a.intersection_len(b) == 2 and a.union_len(b) == 4
    assert TupleSet.from_indices([2, 3], 10).issubset(a)
    assert a.digest() == TupleSet.from_mask(a.mask()).digest()
    with pytest.raises(ValueError):
        _ = a & TupleSet.full(11)


def test_bin_numeric():
    binned = bin_numeric(list(range(11)), 5)
    assert binned.codes.tolist() == [0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 4]
    assert binned.labels[0] == "[0, 2)"
    flat = bin_numeric([3.0, 3.0, 3.0], 4)
    assert flat.codes.tolist() == [0, 0, 0] and len(flat.labels) == 1
    with pytest.raises(ValueError):
        bin_numeric([1.0], 0)


def test_numeric_columns_are_binned_only_when_wide():
    with tempfile.TemporaryDirectory() as folder:
        path = os.path.join(folder, "ages.csv")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("Age,Income\n")
            for age in range(20, 40):
                handle.write(f"{age},{age * 1000}\n")
        kinds = {"Age": AttributeKind.IMMUTABLE, "Income": AttributeKind.OUTCOME}
        wide = load_csv(path, kinds, bins=4)
        narrow = load_csv(path, kinds, bins=50)
    assert len(wide.attribute("Age").domain) == 4
    assert len(narrow.attribute("Age").domain) == 20


def test_csv_errors_and_missing_outcomes():
    kinds = {"Group": AttributeKind.IMMUTABLE, "Pay": AttributeKind.OUTCOME}
    with tempfile.TemporaryDirectory() as folder:
        empty = os.path.join(folder, "empty.csv")
        open(empty, "w").close()
        with pytest.raises(DatasetError):
            load_csv(empty, kinds)

        header_only = os.path.join(folder, "header.csv")
        with open(header_only, "w", encoding="utf-8") as handle:
            handle.write("Group,Pay\n")
        with pytest.raises(DatasetError):
            load_csv(header_only, kinds)

        bad = os.path.join(folder, "bad.csv")
        with open(bad, "w", encoding="utf-8") as handle:
            handle.write("Group,Pay\nA,10\nB,lots\n")
        with pytest.raises(DatasetError):
            load_csv(bad, kinds)

        gaps = os.path.join(folder, "gaps.csv")
        with open(gaps, "w", encoding="utf-8") as handle:
            handle.write('Group,Pay\nA,10\nB,\nA,"$1,000"\n')
        ds = load_csv(gaps, kinds)
        assert ds.n == 2
        assert list(ds.outcome_values) == [10.0, 1000.0]

        with pytest.raises(DatasetError):
            load_csv(gaps, {"Region": AttributeKind.IMMUTABLE, "Pay": AttributeKind.OUTCOME})


def test_na_like_categories_are_kept():
    print("\n🧪 'NA', 'None' y 'null' como categorías")
    kinds = {"Region": AttributeKind.IMMUTABLE, "Pay": AttributeKind.OUTCOME}
    with tempfile.TemporaryDirectory() as folder:
        path = os.path.join(folder, "regions.csv")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("Region,Pay\nNA,1\nEU,2\nNone,3\nnull,4\n,5\nN/A,NA\n")
        ds = load_csv(path, kinds)
    assert set(ds.attribute("Region").domain) == {"EU", "NA", "None", "null"}
    # el outcome 'NA' sí es faltante: la última fila se descarta
    assert ds.n == 5
    assert evaluate_pattern(ds, Pattern.parse("Region=NA")).indices().tolist() == [0]
    assert evaluate_pattern(ds, Pattern.parse("Region!=EU")).indices().tolist() == [0, 2, 3]
    print("✅ Solo las celdas vacías cuentan como faltantes")


def test_narrow_numeric_columns_get_distinct_labels():
    kinds = {"Code": AttributeKind.IMMUTABLE, "Pay": AttributeKind.OUTCOME}
    with tempfile.TemporaryDirectory() as folder:
        path = os.path.join(folder, "codes.csv")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("Code,Pay\n")
            for code in range(1_234_500, 1_234_521):
                handle.write(f"{code},{code % 7}\n")
        ds = load_csv(path, kinds, bins=10)
    domain = ds.attribute("Code").domain
    assert len(domain) == len(set(domain)) == 10
    assert domain[0] == "[1234500, 1234502)"
    assert bin_numeric([0.1, 0.2, 0.3], 2).labels == ["[0.1, 0.2)", "[0.2, 0.3)"]


def _random_dataset(rng, n: int = 300) -> Dataset:
    sizes = {"A": 2, "B": 3, "C": 4}
    schema = [
        AttributeSchema(name=name, domain=tuple(f"{name.lower()}{i}" for i in range(size)), kind=AttributeKind.IMMUTABLE)
        for name, size in sizes.items()
    ]
    schema.append(AttributeSchema(name="Score", kind=AttributeKind.OUTCOME))
    # ~10 % de faltantes por columna
    columns = {
        name: np.where(rng.random(n) < 0.1, -1, rng.integers(0, size, n)).astype(np.int32)
        for name, size in sizes.items()
    }
    return Dataset(schema, columns, rng.normal(size=n))


def _random_predicate(rng, ds: Dataset) -> Predicate:
    attr = ds.schema[int(rng.integers(0, 3))]
    op = PredicateOp.EQUALS if rng.random() < 0.6 else PredicateOp.NOT_EQUALS
    return Predicate(attribute=attr.name, op=op, value=attr.domain[int(rng.integers(0, len(attr.domain)))])


def test_conjunction_is_intersection():
    print("\n🧪 evaluate(p1 ∧ p2) = evaluate(p1) ∩ evaluate(p2)")
    rng = np.random.default_rng(21)
    checked = 0
    for _ in range(20):
        ds = _random_dataset(rng)
        for _ in range(25):
            first, second = _random_predicate(rng, ds), _random_predicate(rng, ds)
            clash = (
                first.attribute == second.attribute
                and first.op == second.op == PredicateOp.EQUALS
                and first.value != second.value
            )
            if clash:
                continue
            p1, p2 = Pattern.of(first), Pattern.of(second)
            assert evaluate_pattern(ds, p1.conjoin(p2)) == evaluate_pattern(ds, p1) & evaluate_pattern(ds, p2)
            checked += 1
    assert checked > 300
    print(f"✅ {checked} pares verificados")


def test_equalities_partition_non_missing_rows():
    rng = np.random.default_rng(22)
    for _ in range(20):
        ds = _random_dataset(rng)
        for attr in ds.schema[:3]:
            parts = [evaluate_pattern(ds, Pattern.equalities({attr.name: v})) for v in attr.domain]
            union = TupleSet.empty(ds.n)
            for i, part in enumerate(parts):
                for other in parts[i + 1:]:
                    assert part.intersection_len(other) == 0
                union = union | part
            expected = np.flatnonzero(ds.columns[attr.name] != -1).tolist()
            assert union.indices().tolist() == expected


if __name__ == "__main__":
    print("=" * 60)
    print("PRUEBAS - NÚCLEO TABULAR")
    print("=" * 60)
    test_support_fraction_matches_reference_ratio()
    test_salary_table_loads_with_suffixes()
    test_group_averages_on_salary_table()
    test_pattern_canonical_form()
    test_pattern_errors()
    test_not_equals_excludes_missing_values()
    test_tuple_set_operations()
    test_bin_numeric()
    test_numeric_columns_are_binned_only_when_wide()
    test_csv_errors_and_missing_outcomes()
    test_na_like_categories_are_kept()
    test_narrow_numeric_columns_get_distinct_labels()
    test_conjunction_is_intersection()
    test_equalities_partition_non_missing_rows()
    print("\n✅ Todas las pruebas del núcleo tabular pasaron")
