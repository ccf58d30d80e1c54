"""Independence certificates.

Graph-based tests (d-separation for DAGs, vertex separation for undirected
graphs), a numeric conditional-independence test against a joint table, and
the exchange identity satisfied by any two non-adjacent nodes of a Markov
network once their joint blanket is covered by the conditioning blocks.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping

from .cr import Block, conditional_cr_value, cr_value
from .errors import ModelError, PreconditionError
from .model import Assignment, JointTable, ModelGraph, REL_TOL


@dataclass(frozen=True)
class CIQuery:
    """A conditional-independence statement (x ⊥ y | z) over node names."""

    x: tuple[str, ...]
    y: tuple[str, ...]
    z: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(self.x))
        object.__setattr__(self, "y", tuple(self.y))
        object.__setattr__(self, "z", tuple(self.z))
        if not self.x or not self.y:
            raise ModelError("a CI query needs non-empty x and y sets")
        sx, sy, sz = set(self.x), set(self.y), set(self.z)
        if sx & sy or sx & sz or sy & sz:
            raise ModelError("CI query sets must be pairwise disjoint")


def d_separated(dag: ModelGraph, query: CIQuery) -> bool:
    """Whether every path between x and y is blocked given z, by the
    linear-time reachability method (chain/fork nodes block when observed,
    colliders block unless they have an observed descendant)."""
    if dag.kind != "directed":
        raise ModelError("d-separation requires a directed graph")
    for n in query.x + query.y + query.z:
        dag.declaration_index(n)
    z = set(query.z)

    # z and all ancestors of z: colliders in this set can pass the ball.
    anc_z = set(z)
    frontier = list(z)
    while frontier:
        n = frontier.pop()
        for p in dag.parents(n):
            if p not in anc_z:
                anc_z.add(p)
                frontier.append(p)

    y = set(query.y)
    # Walk (node, direction) states; "up" means the edge into the node was
    # traversed child->parent, "down" means parent->child.
    visited: set[tuple[str, str]] = set()
    frontier2 = [(n, "up") for n in query.x]
    while frontier2:
        node, direction = frontier2.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node not in z and node in y:
            return False
        if direction == "up" and node not in z:
            for p in dag.parents(node):
                frontier2.append((p, "up"))
            for c in dag.children(node):
                frontier2.append((c, "down"))
        elif direction == "down":
            if node not in z:
                for c in dag.children(node):
                    frontier2.append((c, "down"))
            if node in anc_z:
                for p in dag.parents(node):
                    frontier2.append((p, "up"))
    return True


def u_separated(graph: ModelGraph, query: CIQuery) -> bool:
    """Whether removing z disconnects x from y in an undirected graph."""
    if graph.kind != "undirected":
        raise ModelError("vertex separation requires an undirected graph")
    for n in query.x + query.y + query.z:
        graph.declaration_index(n)
    z = set(query.z)
    y = set(query.y)
    seen = set(query.x)
    frontier = list(seen)
    while frontier:
        n = frontier.pop()
        if n in y:
            return False
        for m in graph.neighbors(n):
            if m not in z and m not in seen:
                seen.add(m)
                frontier.append(m)
    return True


def separated(graph: ModelGraph, query: CIQuery) -> bool:
    """Dispatch to d-separation or vertex separation by graph kind."""
    if graph.kind == "directed":
        return d_separated(graph, query)
    return u_separated(graph, query)


def ci_deviation(table: JointTable, query: CIQuery) -> float:
    """Worst-case deviation from P(x,y|z) = P(x|z) P(y|z) across assignments.

    Measured as |conditional CR - 1| where the conditional marginals are
    positive, and as the absolute factorization gap where they vanish.
    Assignments with P(z) = 0 are skipped.
    """
    for n in query.x + query.y + query.z:
        table.cardinality(n)
    worst = 0.0
    for za in _assignments(table, query.z):
        pz = table.event_prob(za)
        if pz == 0.0:
            continue
        for xa in _assignments(table, query.x):
            pxz = table.event_prob({**za, **xa})
            for ya in _assignments(table, query.y):
                pyz = table.event_prob({**za, **ya})
                pxyz = table.event_prob({**za, **xa, **ya})
                if pxz > 0.0 and pyz > 0.0:
                    dev = abs(pxyz * pz / (pxz * pyz) - 1.0)
                else:
                    dev = abs(pxyz * pz - pxz * pyz)
                worst = max(worst, dev)
    return worst


def numeric_ci_test(table: JointTable, query: CIQuery, tol: float = REL_TOL) -> bool:
    """True when the table satisfies (x ⊥ y | z) within tol."""
    return ci_deviation(table, query) <= tol


def mutual_independence_deviation(
    table: JointTable,
    groups: Iterable[tuple[str, ...]],
    condition: Block | None = None,
) -> float:
    """Worst-case |CR(g_1, ..., g_k | condition) - 1| over all assignments of
    the grouped variables; 0 exactly when the groups are mutually independent
    (given the condition)."""
    groups = [tuple(g) for g in groups]
    blocks = tuple(Block(g) for g in groups)
    names = tuple(n for g in groups for n in g)
    cond_free = condition.free_vars if condition is not None else ()
    worst = 0.0
    for a in _assignments(table, names + tuple(cond_free)):
        worst = max(worst, abs(conditional_cr_value(table, blocks, condition, a) - 1.0))
    return worst


def _assignments(table: JointTable, names: Iterable[str]):
    names = tuple(dict.fromkeys(names))
    if not names:
        yield {}
        return
    for states in itertools.product(*(range(table.cardinality(n)) for n in names)):
        yield dict(zip(names, states))


def is_markov(table: JointTable, graph: ModelGraph, tol: float = REL_TOL) -> bool:
    """Numeric pairwise Markov check: every pair of non-adjacent nodes is
    conditionally independent given all remaining nodes. For strictly
    positive tables this is equivalent to the global Markov property."""
    if graph.kind != "undirected":
        raise ModelError("the Markov check requires an undirected graph")
    if set(graph.nodes) != set(table.names):
        raise ModelError("graph nodes do not match table variables")
    for u, v in itertools.combinations(graph.nodes, 2):
        if graph.has_edge(u, v):
            continue
        rest = tuple(n for n in graph.nodes if n not in (u, v))
        if not numeric_ci_test(table, CIQuery((u,), (v,), rest), tol):
            return False
    return True


def unconnected_nodes_check(
    table: JointTable,
    graph: ModelGraph,
    a: str,
    b: str,
    w_vars: Iterable[str],
    x_vars: Iterable[str],
    assignment: Assignment,
    default: Mapping[str, int] | None = None,
) -> tuple[float, float]:
    """Both sides of the exchange identity for two non-adjacent nodes a, b:

        CR(W, a=0, b=0, X=0) CR(W, a, b, X=0)
          = CR(W, a=0, b, X=0) CR(W, a, b=0, X=0)

    W is a free block, X is pinned to the default configuration, and W ∪ X
    must cover the Markov blanket of {a, b} (which gives (a ⊥ b | W, X)).
    The caller asserts equality of the returned pair.
    """
    if graph.kind != "undirected":
        raise ModelError("the identity is about undirected graphs")
    w = graph.sort_nodes(w_vars)
    x = graph.sort_nodes(x_vars)
    if a == b:
        raise ModelError("the two nodes must be distinct")
    for n in (a, b):
        graph.declaration_index(n)
    if graph.has_edge(a, b):
        raise PreconditionError(f"nodes {a!r} and {b!r} are adjacent")
    if set(w) & set(x):
        raise PreconditionError("W and X must be disjoint")
    if {a, b} & (set(w) | set(x)):
        raise PreconditionError("W and X must not contain a or b")
    blanket = set(graph.markov_blanket((a, b)))
    if not blanket <= set(w) | set(x):
        raise PreconditionError("W and X do not cover the Markov blanket of {a, b}")

    default = default or {}
    pin = {n: default.get(n, 0) for n in x}

    def blocks(a_pinned: bool, b_pinned: bool) -> tuple[Block, ...]:
        parts: list[Block] = []
        if w:
            parts.append(Block(w))
        parts.append(Block([(a, default.get(a, 0))]) if a_pinned else Block([a]))
        parts.append(Block([(b, default.get(b, 0))]) if b_pinned else Block([b]))
        if x:
            parts.append(Block([(n, pin[n]) for n in x]))
        return tuple(parts)

    lhs = cr_value(table, blocks(True, True), assignment) * cr_value(table, blocks(False, False), assignment)
    rhs = cr_value(table, blocks(True, False), assignment) * cr_value(table, blocks(False, True), assignment)
    return lhs, rhs
