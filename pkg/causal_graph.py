# -*- coding: utf-8 -*-
"""
DAG causal de entrada: parseo de la lista de aristas, inserción del nodo de
tratamiento y conjuntos de ajuste por la puerta trasera.
"""
import hashlib
import logging
import threading
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
from pydantic import BaseModel, ConfigDict

from errors import DagError
from table_core import Dataset, Pattern

# Configurar logger
logger = logging.getLogger(__name__)

TREATMENT_PREFIX = "T["


class CausalDag:
    """Grafo dirigido acíclico inmutable sobre nombres de atributo"""

    def __init__(
        self,
        nodes: Iterable[str] = (),
        edges: Iterable[Tuple[str, str]] = (),
        treatment_node: Optional[str] = None,
        treatment_attributes: Sequence[str] = (),
    ):
        graph = nx.DiGraph()
        graph.add_nodes_from(nodes)
        for parent, child in edges:
            if parent == child:
                raise DagError(f"Auto-arista no permitida: {parent} -> {child}")
            graph.add_edge(parent, child)
        if not nx.is_directed_acyclic_graph(graph):
            cycle = [edge[0] for edge in nx.find_cycle(graph)]
            raise DagError(f"El grafo tiene un ciclo: {' -> '.join(cycle + cycle[:1])}", cycle=cycle)
        self.graph = nx.freeze(graph)
        self.treatment_node = treatment_node
        self.treatment_attributes: Tuple[str, ...] = tuple(sorted(treatment_attributes))
        self._fingerprint: Optional[int] = None

    @property
    def nodes(self) -> List[str]:
        return sorted(self.graph.nodes)

    @property
    def edges(self) -> List[Tuple[str, str]]:
        return sorted(self.graph.edges)

    def has_node(self, node: str) -> bool:
        return self.graph.has_node(node)

    def parents(self, node: str) -> List[str]:
        return sorted(self.graph.predecessors(node))

    def children(self, node: str) -> List[str]:
        return sorted(self.graph.successors(node))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CausalDag):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __repr__(self) -> str:
        return f"CausalDag(nodes={len(self.graph)}, edges={self.graph.number_of_edges()})"


class AdjustmentSet(BaseModel):
    """Conjunto Z de confusores a controlar"""
    model_config = ConfigDict(frozen=True)

    confounders: Tuple[str, ...] = ()

    def digest(self) -> str:
        return hashlib.blake2b("|".join(self.confounders).encode("utf-8"), digest_size=8).hexdigest()


# ==========================================
# PARSEO Y SERIALIZACIÓN
# ==========================================

def parse_dag(text: str) -> CausalDag:
    """
    Parsea líneas 'A -> B', líneas vacías y comentarios '#'. Una línea con un
    solo nombre (sin espacios) declara un nodo aislado.
    """
    edges: List[Tuple[str, str]] = []
    nodes: List[str] = []
    seen = set()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line and ">" not in line:
            if len(line.split()) != 1:
                raise DagError(f"Línea {number} mal formada: '{raw.strip()}'", line=number)
            nodes.append(line)
            continue
        parts = line.split("->")
        if len(parts) != 2 or not parts[0].strip() or not parts[1].strip():
            raise DagError(f"Línea {number} mal formada: '{raw.strip()}'", line=number)
        edge = (parts[0].strip(), parts[1].strip())
        if edge in seen:
            raise DagError(f"Arista duplicada en la línea {number}: {edge[0]} -> {edge[1]}", line=number)
        seen.add(edge)
        edges.append(edge)
    return CausalDag(nodes=nodes, edges=edges)


def serialize_dag(dag: CausalDag) -> str:
    """Lista de aristas canónica (ordenada), una por línea; luego los nodos aislados"""
    lines = [f"{parent} -> {child}\n" for parent, child in dag.edges]
    lines += [f"{node}\n" for node in dag.nodes if dag.graph.degree(node) == 0]
    return "".join(lines)


def load_dag(path: str) -> CausalDag:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise DagError(f"No se pudo leer el DAG {path}: {exc}") from exc
    dag = parse_dag(text)
    logger.info(f"✅ DAG cargado: {len(dag.nodes)} nodos, {len(dag.edges)} aristas")
    return dag


def default_two_layer_dag(immutables: Sequence[str], mutables: Sequence[str], outcome: str) -> CausalDag:
    """DAG por defecto: inmutables → mutables y outcome; mutables → outcome"""
    edges = [(i, m) for i in immutables for m in mutables]
    edges += [(a, outcome) for a in list(immutables) + list(mutables)]
    return CausalDag(nodes=list(immutables) + list(mutables) + [outcome], edges=edges)


def validate_against_schema(dag: CausalDag, ds: Dataset) -> CausalDag:
    """Verifica que los nodos existan en el esquema y que el outcome no cause mutables"""
    known = {attr.name for attr in ds.schema}
    unknown = [node for node in dag.nodes if node not in known]
    if unknown:
        raise DagError(f"Nodos del DAG ausentes del esquema: {unknown}")
    if dag.has_node(ds.outcome):
        mutables = set(ds.mutable_attributes)
        leaking = [child for child in dag.children(ds.outcome) if child in mutables]
        if leaking:
            logger.warning(f"⚠️ El outcome {ds.outcome} apunta a atributos mutables: {leaking}")
    return dag


# ==========================================
# NODO DE TRATAMIENTO Y AJUSTE
# ==========================================

def treatment_node_name(treatment: Pattern) -> str:
    return f"{TREATMENT_PREFIX}{treatment.serialize()}]"


def insert_treatment_node(dag: CausalDag, treatment: Pattern) -> CausalDag:
    """
    Agrega el nodo T del tratamiento: sus padres son la unión de los padres de
    los atributos constituyentes (sin ellos mismos) y sus hijos la unión de
    sus hijos. Los padres que descienden de algún constituyente son mediadores
    y no entran. Los constituyentes se conservan.
    """
    constituents = treatment.attributes()
    absent = [a for a in constituents if not dag.has_node(a)]
    if absent:
        raise DagError(f"Atributos del tratamiento ausentes del DAG: {absent}")
    members = set(constituents)
    descendants = {d for a in constituents for d in nx.descendants(dag.graph, a)}
    parents = sorted({p for a in constituents for p in dag.parents(a)} - members - descendants)
    children = sorted({c for a in constituents for c in dag.children(a)} - members)

    node = treatment_node_name(treatment)
    edges = list(dag.edges)
    edges += [(p, node) for p in parents]
    edges += [(node, c) for c in children]
    try:
        return CausalDag(
            nodes=dag.nodes + [node],
            edges=edges,
            treatment_node=node,
            treatment_attributes=constituents,
        )
    except DagError as exc:
        raise DagError(f"Insertar {node} crea un ciclo: {exc}", cycle=exc.cycle) from exc


def backdoor_adjustment_set(dag_with_T: CausalDag, outcome: str) -> AdjustmentSet:
    """Padres del nodo de tratamiento, sin el outcome ni los constituyentes"""
    node = dag_with_T.treatment_node
    if node is None or not dag_with_T.has_node(node):
        raise DagError("El DAG no contiene un nodo de tratamiento")
    if not dag_with_T.has_node(outcome):
        raise DagError(f"El outcome {outcome} no es un nodo del DAG")
    excluded = set(dag_with_T.treatment_attributes) | {outcome}
    return AdjustmentSet(confounders=tuple(p for p in dag_with_T.parents(node) if p not in excluded))


def dag_fingerprint(dag: CausalDag) -> int:
    """Hash estable de 64 bits de la lista canónica de aristas"""
    if dag._fingerprint is None:
        payload = serialize_dag(dag).encode("utf-8")
        dag._fingerprint = int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")
    return dag._fingerprint


class AdjustmentCache:
    """Caché de conjuntos de ajuste por DAG ya visto (huella del DAG + constituyentes)"""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self._entries: Dict[Tuple[int, Tuple[str, ...]], AdjustmentSet] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def adjustment_for(self, dag: CausalDag, treatment: Pattern, outcome: str) -> AdjustmentSet:
        key = (dag_fingerprint(dag), treatment.attributes())
        if self.enabled:
            cached = self._entries.get(key)
            if cached is not None:
                self.hits += 1
                return cached
        self.misses += 1
        adjustment = backdoor_adjustment_set(insert_treatment_node(dag, treatment), outcome)
        if self.enabled:
            with self._lock:
                self._entries[key] = adjustment
        return adjustment
