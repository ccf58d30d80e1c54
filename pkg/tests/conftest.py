"""Shared fixtures: small hand-checkable tables, the five-node study-network
DAG, and an oracle that computes event probabilities by explicit summation,
independent of the library's marginalization code."""

from __future__ import annotations

import itertools
from pathlib import Path

import numpy as np
import pytest

from crfactor import (
    Certificate,
    JointTable,
    ModelGraph,
    TraceStep,
    Variable,
    build_joint_from_cpts,
)

DATA = Path(__file__).parent / "data"


# ---------------------------------------------------------------------------
# Independent oracle: explicit sums over a {states: prob} dict.


def oracle_event_prob(probs: dict[tuple[int, ...], float], names: tuple[str, ...], event: dict[str, int]) -> float:
    pos = {n: i for i, n in enumerate(names)}
    total = 0.0
    for states, p in probs.items():
        if all(states[pos[k]] == v for k, v in event.items()):
            total += p
    return total


def oracle_cr(probs, names, block_events: list[dict[str, int]]) -> float:
    """CR from the definition: joint event over product of block events."""
    union: dict[str, int] = {}
    for ev in block_events:
        for k, v in ev.items():
            assert union.setdefault(k, v) == v
    denom = 1.0
    for ev in block_events:
        denom *= oracle_event_prob(probs, names, ev)
    return oracle_event_prob(probs, names, union) / denom


# ---------------------------------------------------------------------------
# Two-variable table with attraction on the diagonal.

D2_PROBS = {(0, 0): 0.4, (0, 1): 0.1, (1, 0): 0.1, (1, 1): 0.4}
D2_NAMES = ("A", "B")


@pytest.fixture(scope="session")
def d2_table() -> JointTable:
    arr = np.zeros((2, 2))
    for states, p in D2_PROBS.items():
        arr[states] = p
    return JointTable([Variable("A", 2), Variable("B", 2)], arr)


# Three-variable chain: uniform A, P(B = A) = 0.9, P(C = B) = 0.8.

D3_NAMES = ("A", "B", "C")
D3_PROBS = {
    (a, b, c): 0.5 * (0.9 if b == a else 0.1) * (0.8 if c == b else 0.2)
    for a, b, c in itertools.product(range(2), repeat=3)
}


@pytest.fixture(scope="session")
def d3_table() -> JointTable:
    arr = np.zeros((2, 2, 2))
    for states, p in D3_PROBS.items():
        arr[states] = p
    return JointTable([Variable(n, 2) for n in D3_NAMES], arr)


@pytest.fixture(scope="session")
def coins_table() -> JointTable:
    """Two independent fair coins."""
    return JointTable([Variable("A", 2), Variable("B", 2)], np.full((2, 2), 0.25))


# ---------------------------------------------------------------------------
# The five-node study network: D -> G <- I, I -> S, G -> L.


STUDENT_NODES = ("D", "I", "G", "S", "L")
STUDENT_EDGES = (("D", "G"), ("I", "G"), ("I", "S"), ("G", "L"))


@pytest.fixture(scope="session")
def student_graph() -> ModelGraph:
    return ModelGraph("directed", STUDENT_NODES, STUDENT_EDGES)


def student_table(graph: ModelGraph, seed: int) -> JointTable:
    from crfactor.randgen import random_cpts

    cpts = random_cpts(graph, seed=seed)
    return build_joint_from_cpts(graph, cpts, [Variable(n, 2) for n in graph.nodes])


# ---------------------------------------------------------------------------
# A five-node undirected fixture: a four-cycle A-B-D-C-A with a pendant E on
# B. Satisfies (C ⊥ B | A,D), (A ⊥ D | B,C) and (E ⊥ A,D | B).

FIG4_NODES = ("A", "B", "C", "D", "E")
FIG4_EDGES = (("A", "B"), ("A", "C"), ("B", "D"), ("C", "D"), ("B", "E"))


@pytest.fixture(scope="session")
def fig4_graph() -> ModelGraph:
    return ModelGraph("undirected", FIG4_NODES, FIG4_EDGES)


# ---------------------------------------------------------------------------
# Hand-written rewrite traces reproducing the two four-factor reductions of
# CR(D,I,G,S,L) on the study network (one by repeated splits, one by merges).
# The certificates are recorded exactly as claimed by the derivation being
# reproduced; the first one, (D ⊥ I S L | G), is knowingly false for this
# DAG (G is a collider child), which the acceptance suite documents.


def f1_partition_trace() -> tuple:
    g = Certificate("graph", x=("D",), y=("I", "S", "L"), z=("G",))
    s = Certificate("graph", x=("S",), y=("G", "L"), z=("I",))
    i = Certificate("graph", x=("I",), y=("L",), z=("G",))
    return (
        TraceStep("bipartition", (), {"left": [0], "right": [1, 2, 3, 4]}),
        TraceStep("single_block", (0,), {}),
        TraceStep("ci_reduce", (0,), {"keep": 0, "y": ["I", "S", "L"], "w": ["G"]}, g),
        TraceStep("bipartition", (1,), {"left": [2], "right": [0, 1, 3]}),
        TraceStep("single_block", (1,), {}),
        TraceStep("ci_reduce", (1,), {"keep": 0, "y": ["G", "L"], "w": ["I"]}, s),
        TraceStep("bipartition", (2,), {"left": [0], "right": [1, 2]}),
        TraceStep("single_block", (2,), {}),
        TraceStep("ci_reduce", (2,), {"keep": 0, "y": ["L"], "w": ["G"]}, i),
    )


def f1_merge_trace() -> tuple:
    i = Certificate("graph", x=("I",), y=("L",), z=("G",))
    d = Certificate("graph", x=("D",), y=("I", "L"), z=("G",))
    s = Certificate("graph", x=("S",), y=("D", "G", "L"), z=("I",))
    return (
        TraceStep("merge", (), {"i": 2, "j": 4}),
        TraceStep("merge", (0,), {"i": 1, "j": 2}),
        TraceStep("ci_reduce", (1,), {"keep": 0, "y": ["L"], "w": ["G"]}, i),
        TraceStep("merge", (0,), {"i": 0, "j": 1}),
        TraceStep("ci_reduce", (1,), {"keep": 0, "y": ["I", "L"], "w": ["G"]}, d),
        TraceStep("ci_reduce", (0,), {"keep": 1, "y": ["D", "G", "L"], "w": ["I"]}, s),
    )
