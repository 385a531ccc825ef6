# -*- coding: utf-8 -*-
"""
Representación columnar del dataset, álgebra de patrones y primitivas de
soporte/promedio que consumen el resto de los módulos.

Las columnas categóricas se codifican por diccionario (código -1 = faltante)
y los conjuntos de tuplas son vectores de bits empaquetados de ancho fijo.
"""
import re
import hashlib
import logging
import threading
from enum import Enum
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator

from errors import DatasetError, PatternError
from models import AttributeKind

# Configurar logger
logger = logging.getLogger(__name__)

MISSING_CODE = -1
# marcadores de outcome faltante (la fila se descarta)
OUTCOME_MISSING_TOKENS = frozenset({"", "na", "n/a", "nan", "null", "none"})


# ==========================================
# ESQUEMA
# ==========================================

class AttributeSchema(BaseModel):
    """Nombre, dominio ordenado y rol de un atributo"""
    model_config = ConfigDict(frozen=True)

    name: str
    domain: Tuple[str, ...] = ()
    kind: AttributeKind

    @field_validator("domain")
    @classmethod
    def _unique_values(cls, domain: Tuple[str, ...]) -> Tuple[str, ...]:
        if any(value == "" for value in domain):
            raise ValueError("los valores del dominio no pueden ser vacíos")
        if len(set(domain)) != len(domain):
            raise ValueError("los valores del dominio deben ser únicos")
        return domain

    def code_of(self, value: str) -> int:
        try:
            return self.domain.index(value)
        except ValueError:
            raise PatternError(f"Valor '{value}' fuera del dominio de {self.name}") from None


# ==========================================
# CONJUNTOS DE TUPLAS
# ==========================================

class TupleSet:
    """Vector de bits de ancho fijo sobre los ids de tupla 0..n-1"""

    __slots__ = ("_bits", "n", "_count")

    def __init__(self, bits: np.ndarray, n: int):
        self._bits = bits
        self.n = n
        self._count: Optional[int] = None

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "TupleSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(np.packbits(mask), int(mask.shape[0]))

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "TupleSet":
        mask = np.zeros(n, dtype=bool)
        mask[np.fromiter(indices, dtype=np.int64)] = True
        return cls.from_mask(mask)

    @classmethod
    def empty(cls, n: int) -> "TupleSet":
        return cls.from_mask(np.zeros(n, dtype=bool))

    @classmethod
    def full(cls, n: int) -> "TupleSet":
        return cls.from_mask(np.ones(n, dtype=bool))

    @property
    def cardinality(self) -> int:
        if self._count is None:
            self._count = int(np.bitwise_count(self._bits).sum())
        return self._count

    def __len__(self) -> int:
        return self.cardinality

    def _check(self, other: "TupleSet") -> None:
        if self.n != other.n:
            raise ValueError(f"TupleSets de distinto ancho: {self.n} vs {other.n}")

    def __and__(self, other: "TupleSet") -> "TupleSet":
        self._check(other)
        return TupleSet(np.bitwise_and(self._bits, other._bits), self.n)

    def __or__(self, other: "TupleSet") -> "TupleSet":
        self._check(other)
        return TupleSet(np.bitwise_or(self._bits, other._bits), self.n)

    def __sub__(self, other: "TupleSet") -> "TupleSet":
        self._check(other)
        return TupleSet(np.bitwise_and(self._bits, np.invert(other._bits)), self.n)

    def __invert__(self) -> "TupleSet":
        return TupleSet.from_mask(~self.mask())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TupleSet):
            return NotImplemented
        return self.n == other.n and np.array_equal(self._bits, other._bits)

    def __hash__(self) -> int:
        return hash((self.n, self._bits.tobytes()))

    def __repr__(self) -> str:
        return f"TupleSet(n={self.n}, cardinality={self.cardinality})"

    def issubset(self, other: "TupleSet") -> bool:
        return (self - other).cardinality == 0

    def intersection_len(self, other: "TupleSet") -> int:
        self._check(other)
        return int(np.bitwise_count(np.bitwise_and(self._bits, other._bits)).sum())

    def union_len(self, other: "TupleSet") -> int:
        self._check(other)
        return int(np.bitwise_count(np.bitwise_or(self._bits, other._bits)).sum())

    def mask(self) -> np.ndarray:
        return np.unpackbits(self._bits, count=self.n).astype(bool)

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask())

    def digest(self) -> str:
        """Huella estable para claves de caché"""
        return hashlib.blake2b(self._bits.tobytes(), digest_size=16).hexdigest()


# ==========================================
# PREDICADOS Y PATRONES
# ==========================================

class PredicateOp(str, Enum):
    EQUALS = "="
    NOT_EQUALS = "!="


class Predicate(BaseModel):
    """Expresión simple de la forma A op a"""
    model_config = ConfigDict(frozen=True)

    attribute: str
    op: PredicateOp = PredicateOp.EQUALS
    value: str

    def sort_key(self) -> Tuple[str, str, str]:
        return (self.attribute, self.op.value, self.value)

    def serialize(self) -> str:
        return f"{self.attribute}{self.op.value}{self.value}"


class Pattern(BaseModel):
    """Conjunción de predicados, en orden canónico (atributo, op, valor)"""
    model_config = ConfigDict(frozen=True)

    predicates: Tuple[Predicate, ...] = ()

    @field_validator("predicates")
    @classmethod
    def _canonical(cls, predicates: Tuple[Predicate, ...]) -> Tuple[Predicate, ...]:
        ordered = tuple(sorted(set(predicates), key=Predicate.sort_key))
        equals_seen: Dict[str, str] = {}
        for predicate in ordered:
            if predicate.op != PredicateOp.EQUALS:
                continue
            previous = equals_seen.setdefault(predicate.attribute, predicate.value)
            if previous != predicate.value:
                raise PatternError(
                    f"Dos igualdades distintas sobre {predicate.attribute}: '{previous}' y '{predicate.value}'"
                )
        return ordered

    @classmethod
    def of(cls, *predicates: Predicate) -> "Pattern":
        return cls(predicates=tuple(predicates))

    @classmethod
    def equalities(cls, items: Mapping[str, str]) -> "Pattern":
        return cls(predicates=tuple(Predicate(attribute=a, value=v) for a, v in items.items()))

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        """Gramática `Attr=Value`, `Attr!=Value`, unidos por `&`"""
        predicates = []
        for raw in (text or "").split("&"):
            term = raw.strip()
            if not term:
                continue
            match = re.fullmatch(r"\s*([^!=]+?)\s*(!=|=)\s*(.+?)\s*", term)
            if not match:
                raise PatternError(f"Predicado mal formado: '{term}'")
            attribute, op, value = match.groups()
            predicates.append(Predicate(attribute=attribute, op=PredicateOp(op), value=value))
        return cls(predicates=tuple(predicates))

    def __len__(self) -> int:
        return len(self.predicates)

    def attributes(self) -> Tuple[str, ...]:
        return tuple(sorted({p.attribute for p in self.predicates}))

    def conjoin(self, other: "Pattern") -> "Pattern":
        return Pattern(predicates=self.predicates + other.predicates)

    def serialize(self) -> str:
        return " & ".join(p.serialize() for p in self.predicates)

    def sort_key(self) -> Tuple[Tuple[str, str, str], ...]:
        return tuple(p.sort_key() for p in self.predicates)

    def __str__(self) -> str:
        return self.serialize() or "*"


# ==========================================
# DATASET
# ==========================================

class BinnedColumn(NamedTuple):
    codes: np.ndarray
    labels: List[str]


def _natural_key(value: str) -> Tuple:
    return tuple(int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", value))


class Dataset:
    """Tabla columnar inmutable con una columna de outcome numérica"""

    def __init__(
        self,
        schema: Sequence[AttributeSchema],
        columns: Mapping[str, np.ndarray],
        outcome_values: np.ndarray,
    ):
        outcomes = [a for a in schema if a.kind == AttributeKind.OUTCOME]
        if len(outcomes) != 1:
            raise DatasetError(f"El esquema debe tener exactamente un outcome (tiene {len(outcomes)})")
        self.schema: Tuple[AttributeSchema, ...] = tuple(schema)
        self.outcome: str = outcomes[0].name
        self.outcome_values = np.asarray(outcome_values, dtype=float)
        self.n = int(self.outcome_values.shape[0])
        if self.n < 1:
            raise DatasetError("El dataset está vacío")
        self._by_name = {a.name: a for a in self.schema}
        if len(self._by_name) != len(self.schema):
            raise DatasetError("Nombres de atributo duplicados en el esquema")

        self.columns: Dict[str, np.ndarray] = {}
        for attr in self.schema:
            if attr.kind == AttributeKind.OUTCOME:
                continue
            if attr.name not in columns:
                raise DatasetError(f"Falta la columna {attr.name}")
            codes = np.asarray(columns[attr.name], dtype=np.int32)
            if codes.shape[0] != self.n:
                raise DatasetError(f"La columna {attr.name} tiene {codes.shape[0]} filas, se esperaban {self.n}")
            if codes.size and (codes.min() < MISSING_CODE or codes.max() >= len(attr.domain)):
                raise DatasetError(f"Códigos fuera de dominio en {attr.name}")
            codes.setflags(write=False)
            self.columns[attr.name] = codes
        self.outcome_values.setflags(write=False)
        self.max_abs_outcome = float(np.max(np.abs(self.outcome_values)))

        self._predicate_cache: Dict[Tuple[str, str, int], TupleSet] = {}
        self._lock = threading.Lock()

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, attributes={len(self.schema)}, outcome={self.outcome})"

    # --- esquema ---

    def attribute(self, name: str) -> AttributeSchema:
        try:
            return self._by_name[name]
        except KeyError:
            raise PatternError(f"Atributo desconocido: {name}") from None

    def names_of_kind(self, kind: AttributeKind) -> List[str]:
        return sorted(a.name for a in self.schema if a.kind == kind)

    @property
    def immutable_attributes(self) -> List[str]:
        return self.names_of_kind(AttributeKind.IMMUTABLE)

    @property
    def mutable_attributes(self) -> List[str]:
        return self.names_of_kind(AttributeKind.MUTABLE)

    def decode(self, name: str, code: int) -> Optional[str]:
        return None if code == MISSING_CODE else self.attribute(name).domain[code]

    # --- predicados ---

    def predicate_set(self, predicate: Predicate) -> TupleSet:
        """Conjunto de tuplas que satisfacen un predicado (memoizado)"""
        attr = self.attribute(predicate.attribute)
        if attr.kind == AttributeKind.OUTCOME:
            raise PatternError(f"No se admiten predicados sobre el outcome {attr.name}")
        code = attr.code_of(predicate.value)
        key = (attr.name, predicate.op.value, code)
        cached = self._predicate_cache.get(key)
        if cached is not None:
            return cached
        codes = self.columns[attr.name]
        if predicate.op == PredicateOp.EQUALS:
            mask = codes == code
        else:
            mask = (codes != code) & (codes != MISSING_CODE)
        result = TupleSet.from_mask(mask)
        with self._lock:
            self._predicate_cache.setdefault(key, result)
        return result

    # --- conversión ---

    def to_frame(self) -> pd.DataFrame:
        """DataFrame con los valores decodificados (faltantes como vacío)"""
        data = {}
        for attr in self.schema:
            if attr.kind == AttributeKind.OUTCOME:
                data[attr.name] = self.outcome_values
                continue
            labels = np.array(list(attr.domain) + [""], dtype=object)
            data[attr.name] = labels[self.columns[attr.name]]
        return pd.DataFrame(data, columns=[a.name for a in self.schema])

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        kinds: Mapping[str, AttributeKind],
        bins: int = 10,
    ) -> "Dataset":
        """Codifica un DataFrame de strings según el mapa de roles"""
        missing = [name for name in kinds if name not in frame.columns]
        if missing:
            raise DatasetError(f"Faltan columnas en el encabezado: {missing}")
        outcome_names = [n for n, k in kinds.items() if k == AttributeKind.OUTCOME]
        if len(outcome_names) != 1:
            raise DatasetError("La configuración debe declarar exactamente un outcome")
        outcome = outcome_names[0]

        raw_outcome = frame[outcome]
        parsed = _parse_outcome(raw_outcome)
        tokens = raw_outcome.astype("string").str.strip().str.lower().fillna("")
        blank = tokens.isin(sorted(OUTCOME_MISSING_TOKENS)).to_numpy(dtype=bool)
        unparseable = ~blank & parsed.isna().to_numpy()
        if unparseable.any():
            row = int(np.flatnonzero(unparseable)[0])
            raise DatasetError(f"Outcome no numérico en la fila {row + 1}: '{raw_outcome.iloc[row]}'")
        keep = parsed.notna().to_numpy()
        dropped = int((~keep).sum())
        if dropped:
            logger.warning(f"⚠️ Se descartan {dropped} filas con outcome faltante")
        if not keep.any():
            raise DatasetError("El archivo no contiene filas con outcome válido")
        frame = frame.loc[keep].reset_index(drop=True)
        outcome_values = parsed.loc[keep].to_numpy(dtype=float)

        schema: List[AttributeSchema] = []
        columns: Dict[str, np.ndarray] = {}
        for name, kind in kinds.items():
            if kind == AttributeKind.OUTCOME:
                schema.append(AttributeSchema(name=name, kind=kind))
                continue
            codes, domain = _encode_column(frame[name], bins)
            try:
                schema.append(AttributeSchema(name=name, domain=tuple(domain), kind=kind))
            except ValueError as exc:
                raise DatasetError(f"Dominio inválido para {name}: {exc}") from exc
            columns[name] = codes
        return cls(schema, columns, outcome_values)


_SUFFIXES = {"K": 1e3, "M": 1e6, "B": 1e9}


def _parse_outcome(raw: pd.Series) -> pd.Series:
    """Parsea el outcome admitiendo '$', separadores de miles, sufijos K/M/B y '%'"""
    text = raw.astype("string").str.strip().str.replace(r"[$,\s]", "", regex=True).fillna("")
    multiplier = pd.Series(1.0, index=raw.index)
    suffix = text.str[-1:].str.upper()
    for letter, factor in _SUFFIXES.items():
        multiplier = multiplier.mask((suffix == letter).fillna(False).astype(bool), factor)
    multiplier = multiplier.mask((suffix == "%").fillna(False).astype(bool), 0.01)
    has_suffix = suffix.isin(list(_SUFFIXES) + ["%"]).fillna(False).astype(bool)
    stripped = text.mask(has_suffix, text.str[:-1])
    return pd.to_numeric(stripped.astype(object), errors="coerce").astype(float) * multiplier


def _encode_column(raw: pd.Series, bins: int) -> Tuple[np.ndarray, List[str]]:
    values = raw.astype("string").str.strip()
    values = values.mask((values == "").fillna(False).astype(bool))
    present = values.dropna().astype(str)
    numeric = pd.to_numeric(present.astype(object), errors="coerce")
    if len(present) and numeric.notna().all() and present.nunique() > bins:
        full = pd.to_numeric(values.astype(object), errors="coerce").to_numpy(dtype=float)
        binned = bin_numeric(full, bins)
        return binned.codes, binned.labels
    domain = sorted(present.unique().tolist(), key=_natural_key)
    lookup = {value: code for code, value in enumerate(domain)}
    codes = np.array(
        [lookup.get(value, MISSING_CODE) if isinstance(value, str) else MISSING_CODE
         for value in values.astype(object).tolist()],
        dtype=np.int32,
    )
    return codes, domain


# ==========================================
# OPERACIONES
# ==========================================

def load_csv(path: str, schema_config: Mapping[str, AttributeKind], bins: int = 10) -> Dataset:
    """Lee un CSV con encabezado y lo codifica según el mapa de roles"""
    try:
        # solo las celdas vacías son faltantes; "NA" o "None" son categorías válidas
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, na_values=[""], encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DatasetError(f"Archivo vacío: {path}") from None
    except (OSError, UnicodeDecodeError, pd.errors.ParserError) as exc:
        raise DatasetError(f"No se pudo leer {path}: {exc}") from exc
    if frame.empty:
        raise DatasetError(f"Archivo vacío: {path} (solo encabezado)")
    frame.columns = [str(c).strip() for c in frame.columns]
    dataset = Dataset.from_frame(frame, schema_config, bins=bins)
    logger.info(f"✅ Dataset cargado: {dataset.n} filas, {len(dataset.schema)} atributos")
    return dataset


def _edge_texts(edges: Sequence[float]) -> List[str]:
    """Menor precisión (desde 6 cifras) con la que los bordes quedan distintos"""
    for digits in range(6, 18):
        texts = [f"{edge:.{digits}g}" for edge in edges]
        if len(set(texts)) == len(texts):
            return texts
    return [f"{edge!r}#{i}" for i, edge in enumerate(edges)]


def bin_numeric(values: Sequence[float], bins: int) -> BinnedColumn:
    """Binning de ancho igual; las etiquetas son intervalos semiabiertos"""
    if bins < 1:
        raise ValueError("bins debe ser >= 1")
    data = np.asarray(values, dtype=float)
    if data.size == 0:
        raise ValueError("values no puede ser vacío")
    finite = ~np.isnan(data)
    if not finite.any():
        raise ValueError("values no contiene números")
    low, high = float(np.min(data[finite])), float(np.max(data[finite]))
    codes = np.full(data.shape[0], MISSING_CODE, dtype=np.int32)
    if high == low:
        codes[finite] = 0
        return BinnedColumn(codes, [f"[{low:g}, {high:g}]"])
    width = (high - low) / bins
    raw = np.floor((data[finite] - low) / width)
    codes[finite] = np.clip(raw, 0, bins - 1).astype(np.int32)
    edges = _edge_texts([low + i * width for i in range(bins + 1)])
    labels = [f"[{edges[i]}, {edges[i + 1]})" for i in range(bins)]
    return BinnedColumn(codes, labels)


def evaluate_pattern(ds: Dataset, p: Pattern) -> TupleSet:
    """ψ(D): las tuplas que satisfacen todos los predicados"""
    result = TupleSet.full(ds.n)
    for predicate in p.predicates:
        result = result & ds.predicate_set(predicate)
    return result


def group_average(ds: Dataset, ts: TupleSet) -> float:
    """Promedio del outcome sobre las tuplas del conjunto"""
    if ts.cardinality == 0:
        raise DatasetError("Promedio indefinido sobre un conjunto vacío")
    return float(ds.outcome_values[ts.mask()].mean())


def support_fraction(ds: Dataset, numerator: TupleSet) -> float:
    """|numerator| / |D| (el denominador es siempre el dataset completo)"""
    return numerator.cardinality / ds.n
