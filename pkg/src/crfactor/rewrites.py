"""Value-preserving rewrites of factor expressions, with recorded traces.

Each rewrite implements one algebraic identity of co-occurrence rates:

    single_block   CR(b) = 1
    bipartition    CR(L, R) = CR(L) CR(merge L, merge R) CR(R)
    merge          CR(.., b_i, b_j, ..) = CR(.., b_i b_j, ..) CR(b_i, b_j)
    duplicate      CR(.., b, ..) = CR(.., b, b, ..) P(b)
    condition      CR(b_1..b_n) = sum_x CR(b_1..b_n|x) CR(b_1,x)..CR(b_n,x) P(x)
    ci_reduce      (x ⊥ y | w)  =>  CR(x-block, y w-block) = CR(x-block, w-block)
    ci_split       (x ⊥ y | w)  =>  CR(w, x y) = CR(x,w) CR(y,w) CR(x,y)^-1
    ci_collapse    (x ⊥ y | w)  =>  CR(w x, w y) = 1 / P(w)
    independence   blocks mutually independent  =>  CR(b_1..b_n) = 1

The first five need no side conditions and hold on every strictly positive
table; the last four consume an independence certificate, sourced either
from graph separation or from a numeric test, and fail loudly when the
certificate does not validate.

A rewrite targets a node by its path (child positions from the root),
returns a new tree plus a trace step, and never reorders untouched
siblings. Replaying a recorded trace from the initial expression reproduces
the final expression exactly, re-validating every certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .cr import Block
from .errors import CertificateError, ModelError, RewriteError
from .expr import ONE, CRTerm, FactorExpr, PTerm, Product, Sum
from .model import JointTable, ModelGraph, REL_TOL
from .separation import (
    CIQuery,
    ci_deviation,
    mutual_independence_deviation,
    separated,
)

RULES = (
    "bipartition",
    "merge",
    "duplicate",
    "condition",
    "ci_reduce",
    "ci_split",
    "ci_collapse",
    "independence",
    "single_block",
)


@dataclass(frozen=True)
class Certificate:
    """An independence fact and the source that justifies it.

    kind is "graph" (separation in the model graph) or "numeric" (a CI test
    against the joint table). CI-shaped facts use (x, y, z); mutual
    independence of several groups uses `groups` (with z as the conditioning
    set, usually empty).
    """

    kind: str
    x: tuple[str, ...] = ()
    y: tuple[str, ...] = ()
    z: tuple[str, ...] = ()
    groups: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        if self.kind not in ("graph", "numeric"):
            raise RewriteError(f"unknown certificate kind {self.kind!r}")
        object.__setattr__(self, "x", tuple(self.x))
        object.__setattr__(self, "y", tuple(self.y))
        object.__setattr__(self, "z", tuple(self.z))
        object.__setattr__(self, "groups", tuple(tuple(g) for g in self.groups))


@dataclass(frozen=True)
class TraceStep:
    rule: str
    path: tuple[int, ...]
    params: Mapping
    certificate: Certificate | None = None

    def __post_init__(self):
        if self.rule not in RULES:
            raise RewriteError(f"unknown rule {self.rule!r}")
        object.__setattr__(self, "path", tuple(self.path))
        object.__setattr__(self, "params", dict(self.params))


OperationTrace = tuple[TraceStep, ...]


class Context:
    """Validation context carried by certificate-consuming rewrites."""

    def __init__(self, graph: ModelGraph | None = None, table: JointTable | None = None, tol: float = REL_TOL):
        self.graph = graph
        self.table = table
        self.tol = tol


def validate_certificate(cert: Certificate, ctx: Context) -> None:
    """Raise CertificateError unless the certificate's declared source
    confirms the recorded independence fact."""
    if cert.kind == "graph":
        if ctx.graph is None:
            raise CertificateError("graph certificate given but no graph to check it against")
        if cert.groups:
            pairs = [
                (gi, gj)
                for i, gi in enumerate(cert.groups)
                for gj in cert.groups[i + 1 :]
            ]
            ok = all(separated(ctx.graph, CIQuery(gi, gj, cert.z)) for gi, gj in pairs)
        else:
            ok = separated(ctx.graph, CIQuery(cert.x, cert.y, cert.z))
        if not ok:
            raise CertificateError(f"graph separation does not hold: {cert}")
    else:
        if ctx.table is None:
            raise CertificateError("numeric certificate given but no table to check it against")
        if cert.groups:
            cond = Block(cert.z) if cert.z else None
            dev = mutual_independence_deviation(ctx.table, cert.groups, cond)
        else:
            dev = ci_deviation(ctx.table, CIQuery(cert.x, cert.y, cert.z))
        if dev > ctx.tol:
            raise CertificateError(f"numeric CI test fails (deviation {dev:.3e}): {cert}")


# ---------------------------------------------------------------------------
# Tree surgery


def get_node(root: FactorExpr, path: Sequence[int]) -> FactorExpr:
    node = root
    for idx in path:
        if isinstance(node, Product):
            if not 0 <= idx < len(node.children):
                raise RewriteError(f"no child {idx} at {path!r}")
            node = node.children[idx]
        elif isinstance(node, Sum):
            if idx != 0:
                raise RewriteError(f"a sum has a single child, got index {idx}")
            node = node.child
        else:
            raise RewriteError(f"path {path!r} descends into a leaf")
    return node


def _set_node(root: FactorExpr, path: Sequence[int], new: FactorExpr) -> FactorExpr:
    if not path:
        return new
    head, rest = path[0], path[1:]
    if isinstance(root, Product):
        kids = list(root.children)
        kids[head] = _set_node(kids[head], rest, new)
        return Product(tuple(kids))
    if isinstance(root, Sum) and head == 0:
        return Sum(root.over, _set_node(root.child, rest, new))
    raise RewriteError(f"cannot descend path {path!r}")


def _splice(root: FactorExpr, path: Sequence[int], replacement: Sequence[FactorExpr]) -> FactorExpr:
    """Replace the node at `path` with the given factors, dropping literal
    ones. Inside a product the factors are spliced in place (later siblings
    shift, order is preserved); elsewhere they are wrapped as needed."""
    filtered = [r for r in replacement if r != ONE]

    def wrap() -> FactorExpr:
        if not filtered:
            return ONE
        if len(filtered) == 1:
            return filtered[0]
        return Product(tuple(filtered))

    if not path:
        return wrap()
    parent_path, idx = tuple(path[:-1]), path[-1]
    parent = get_node(root, parent_path)
    if isinstance(parent, Product):
        kids = list(parent.children)
        if not 0 <= idx < len(kids):
            raise RewriteError(f"no child {idx} under {parent_path!r}")
        kids[idx : idx + 1] = filtered
        return _set_node(root, parent_path, Product(tuple(kids)))
    if isinstance(parent, Sum):
        if idx != 0:
            raise RewriteError("a sum has a single child")
        return _set_node(root, parent_path, Sum(parent.over, wrap()))
    raise RewriteError("target's parent cannot hold children")


def _target_cr(root: FactorExpr, path: Sequence[int]) -> CRTerm:
    node = get_node(root, path)
    if not isinstance(node, CRTerm):
        raise RewriteError(f"rewrite target at {tuple(path)!r} is not a CR term")
    if node.exponent != 1:
        raise RewriteError("rewrites target CR terms with exponent 1")
    return node


def _merge_blocks(blocks: Iterable[Block]) -> Block:
    members = [m for b in blocks for m in b.members]
    try:
        return Block(members)
    except ModelError as exc:
        raise RewriteError(f"cannot merge blocks: {exc}") from None


# ---------------------------------------------------------------------------
# Certificate-free rewrites


def apply_single_block(root: FactorExpr, path: Sequence[int]) -> tuple[FactorExpr, TraceStep]:
    """CR(b) = 1 for any single block b."""
    term = _target_cr(root, path)
    if len(term.blocks) != 1:
        raise RewriteError("single_block applies to one-block CR terms")
    step = TraceStep("single_block", tuple(path), {})
    return _splice(root, path, []), step


def apply_bipartition(
    root: FactorExpr, path: Sequence[int], left: Sequence[int], right: Sequence[int]
) -> tuple[FactorExpr, TraceStep]:
    """Split a CR term in two: CR(L, R) = CR(L) CR(mL, mR) CR(R), where the
    cut factor treats each side as one merged block. The replacement keeps
    the order [left part, cut, right part]."""
    term = _target_cr(root, path)
    left = [int(i) for i in left]
    right = [int(i) for i in right]
    n = len(term.blocks)
    if sorted(left + right) != list(range(n)) or not left or not right:
        raise RewriteError("left/right must split the term's block indices into two non-empty parts")
    lblocks = tuple(term.blocks[i] for i in left)
    rblocks = tuple(term.blocks[i] for i in right)
    cut = CRTerm((_merge_blocks(lblocks), _merge_blocks(rblocks)), term.condition)
    replacement = [
        CRTerm(lblocks, term.condition),
        cut,
        CRTerm(rblocks, term.condition),
    ]
    step = TraceStep("bipartition", tuple(path), {"left": left, "right": right})
    return _splice(root, path, replacement), step


def apply_merge(root: FactorExpr, path: Sequence[int], i: int, j: int) -> tuple[FactorExpr, TraceStep]:
    """Merge blocks i and j into one: CR(.., b_i, b_j, ..) =
    CR(.., b_i b_j, ..) CR(b_i, b_j). The merged block takes the earlier
    position."""
    term = _target_cr(root, path)
    n = len(term.blocks)
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise RewriteError("merge needs two distinct block indices")
    merged = _merge_blocks((term.blocks[i], term.blocks[j]))
    lo, hi = min(i, j), max(i, j)
    blocks = list(term.blocks)
    blocks[lo] = merged
    del blocks[hi]
    replacement = [
        CRTerm(tuple(blocks), term.condition),
        CRTerm((term.blocks[i], term.blocks[j]), term.condition),
    ]
    step = TraceStep("merge", tuple(path), {"i": i, "j": j})
    return _splice(root, path, replacement), step


def apply_duplicate(root: FactorExpr, path: Sequence[int], index: int) -> tuple[FactorExpr, TraceStep]:
    """Duplicate block b at `index`: CR(.., b, ..) = CR(.., b, b, ..) P(b)."""
    term = _target_cr(root, path)
    if not 0 <= index < len(term.blocks):
        raise RewriteError(f"no block at index {index}")
    dup = term.blocks[index]
    blocks = list(term.blocks)
    blocks.insert(index + 1, dup)
    replacement = [
        CRTerm(tuple(blocks), term.condition),
        PTerm(dup, term.condition),
    ]
    step = TraceStep("duplicate", tuple(path), {"index": index})
    return _splice(root, path, replacement), step


def apply_condition(root: FactorExpr, path: Sequence[int], over: str) -> tuple[FactorExpr, TraceStep]:
    """Expand an unconditional CR term by total probability over one fresh
    variable:

        CR(b_1..b_n) = sum_x CR(b_1..b_n|x) CR(b_1,x) .. CR(b_n,x) P(x)
    """
    term = _target_cr(root, path)
    if term.condition is not None:
        raise RewriteError("the condition rewrite applies to unconditional CR terms")
    if over in term.variables:
        raise RewriteError(f"variable {over!r} already appears in the target term")
    # A clash with an enclosing sum would make the bound name ambiguous.
    node: FactorExpr = root
    for idx in path:
        if isinstance(node, Sum) and node.over == over:
            raise RewriteError(f"variable {over!r} is already bound by an enclosing sum")
        node = get_node(node, (idx,))
    over_block = Block([over])
    factors: list[FactorExpr] = [CRTerm(term.blocks, over_block)]
    factors.extend(CRTerm((b, over_block)) for b in term.blocks)
    factors.append(PTerm(over_block))
    replacement = [Sum(over, Product(tuple(factors)))]
    step = TraceStep("condition", tuple(path), {"over": over})
    return _splice(root, path, replacement), step


# ---------------------------------------------------------------------------
# Certificate-consuming rewrites


def _cond_vars(term: CRTerm) -> tuple[str, ...]:
    return term.condition.vars if term.condition is not None else ()


def apply_ci_reduce(
    root: FactorExpr,
    path: Sequence[int],
    keep: int,
    y_vars: Sequence[str],
    w_vars: Sequence[str],
    cert_kind: str = "graph",
    *,
    ctx: Context | None = None,
    validate: bool = True,
) -> tuple[FactorExpr, TraceStep]:
    """Drop variables made redundant by conditional independence:

        (x ⊥ y | w)  =>  CR(x-block, y w-block) = CR(x-block, w-block)

    `keep` names the retained block (0 or 1); the other block's members must
    split exactly into y_vars and w_vars, with w_vars non-empty (an empty w
    is the plain independence rewrite)."""
    term = _target_cr(root, path)
    if len(term.blocks) != 2:
        raise RewriteError("ci_reduce applies to two-block CR terms")
    if keep not in (0, 1):
        raise RewriteError("keep must be 0 or 1")
    kept = term.blocks[keep]
    other = term.blocks[1 - keep]
    y_vars = tuple(y_vars)
    w_vars = tuple(w_vars)
    if not w_vars or not y_vars:
        raise RewriteError("ci_reduce needs non-empty y and w variable sets")
    if set(y_vars) | set(w_vars) != set(other.vars) or set(y_vars) & set(w_vars):
        raise RewriteError("y and w must partition the reduced block's variables")
    cert = Certificate(cert_kind, x=kept.vars, y=y_vars, z=w_vars + _cond_vars(term))
    if validate:
        validate_certificate(cert, ctx or Context())
    result = CRTerm((kept, other.restrict(w_vars)), term.condition)
    step = TraceStep(
        "ci_reduce", tuple(path), {"keep": keep, "y": list(y_vars), "w": list(w_vars)}, cert
    )
    return _splice(root, path, [result]), step


def apply_ci_split(
    root: FactorExpr,
    path: Sequence[int],
    w_index: int,
    x_vars: Sequence[str],
    y_vars: Sequence[str],
    cert_kind: str = "graph",
    *,
    ctx: Context | None = None,
    validate: bool = True,
) -> tuple[FactorExpr, TraceStep]:
    """Split a grouped block across a separator:

        (x ⊥ y | w)  =>  CR(w, x y) = CR(x, w) CR(y, w) CR(x, y)^-1

    `w_index` names the separator block (kept whole); the other block's
    members must split exactly into x_vars and y_vars."""
    term = _target_cr(root, path)
    if len(term.blocks) != 2:
        raise RewriteError("ci_split applies to two-block CR terms")
    if w_index not in (0, 1):
        raise RewriteError("w_index must be 0 or 1")
    w_block = term.blocks[w_index]
    xy = term.blocks[1 - w_index]
    x_vars = tuple(x_vars)
    y_vars = tuple(y_vars)
    if not x_vars or not y_vars:
        raise RewriteError("ci_split needs non-empty x and y variable sets")
    if set(x_vars) | set(y_vars) != set(xy.vars) or set(x_vars) & set(y_vars):
        raise RewriteError("x and y must partition the grouped block's variables")
    cert = Certificate(cert_kind, x=x_vars, y=y_vars, z=w_block.vars + _cond_vars(term))
    if validate:
        validate_certificate(cert, ctx or Context())
    xb = xy.restrict(x_vars)
    yb = xy.restrict(y_vars)
    replacement = [
        CRTerm((xb, w_block), term.condition),
        CRTerm((yb, w_block), term.condition),
        CRTerm((xb, yb), term.condition, exponent=-1),
    ]
    step = TraceStep(
        "ci_split", tuple(path), {"w_index": w_index, "x": list(x_vars), "y": list(y_vars)}, cert
    )
    return _splice(root, path, replacement), step


def apply_ci_collapse(
    root: FactorExpr,
    path: Sequence[int],
    cert_kind: str = "graph",
    *,
    ctx: Context | None = None,
    validate: bool = True,
) -> tuple[FactorExpr, TraceStep]:
    """Collapse two blocks overlapping on a shared separator:

        (x ⊥ y | w)  =>  CR(w x, w y) = 1 / P(w)

    Both blocks must carry the shared variables with identical bindings.
    When either private part is empty the identity needs no certificate
    (CR(w, w y) = 1 / P(w) holds unconditionally)."""
    term = _target_cr(root, path)
    if len(term.blocks) != 2:
        raise RewriteError("ci_collapse applies to two-block CR terms")
    b1, b2 = term.blocks
    shared = set(b1.vars) & set(b2.vars)
    if not shared:
        raise RewriteError("ci_collapse needs a shared separator in both blocks")
    sub1 = {m for m in b1.members if m[0] in shared}
    sub2 = {m for m in b2.members if m[0] in shared}
    if sub1 != sub2:
        raise RewriteError("shared sub-blocks carry different bindings")
    x_vars = tuple(n for n in b1.vars if n not in shared)
    y_vars = tuple(n for n in b2.vars if n not in shared)
    cert = None
    if x_vars and y_vars:
        cert = Certificate(
            cert_kind, x=x_vars, y=y_vars, z=tuple(sorted(shared)) + _cond_vars(term)
        )
        if validate:
            validate_certificate(cert, ctx or Context())
    result = PTerm(b1.restrict(shared), term.condition, exponent=-1)
    step = TraceStep("ci_collapse", tuple(path), {}, cert)
    return _splice(root, path, [result]), step


def apply_independence(
    root: FactorExpr,
    path: Sequence[int],
    cert_kind: str = "graph",
    *,
    ctx: Context | None = None,
    validate: bool = True,
) -> tuple[FactorExpr, TraceStep]:
    """Mutually independent blocks co-occur at rate one: the term becomes a
    literal 1 (and vanishes from an enclosing product)."""
    term = _target_cr(root, path)
    groups = tuple(b.vars for b in term.blocks)
    cert = Certificate(cert_kind, z=_cond_vars(term), groups=groups)
    if validate and len(term.blocks) > 1:
        validate_certificate(cert, ctx or Context())
    step = TraceStep("independence", tuple(path), {}, cert)
    return _splice(root, path, []), step


# ---------------------------------------------------------------------------
# Replay

_CERT_FREE = {
    "single_block": lambda root, step: apply_single_block(root, step.path),
    "bipartition": lambda root, step: apply_bipartition(
        root, step.path, step.params["left"], step.params["right"]
    ),
    "merge": lambda root, step: apply_merge(root, step.path, step.params["i"], step.params["j"]),
    "duplicate": lambda root, step: apply_duplicate(root, step.path, step.params["index"]),
    "condition": lambda root, step: apply_condition(root, step.path, step.params["over"]),
}


def replay_step(
    root: FactorExpr, step: TraceStep, *, ctx: Context | None = None, validate: bool = True
) -> FactorExpr:
    if step.rule in _CERT_FREE:
        new_root, _ = _CERT_FREE[step.rule](root, step)
        return new_root
    kind = step.certificate.kind if step.certificate is not None else "graph"
    if step.rule == "ci_reduce":
        new_root, _ = apply_ci_reduce(
            root,
            step.path,
            step.params["keep"],
            step.params["y"],
            step.params["w"],
            kind,
            ctx=ctx,
            validate=validate,
        )
    elif step.rule == "ci_split":
        new_root, _ = apply_ci_split(
            root,
            step.path,
            step.params["w_index"],
            step.params["x"],
            step.params["y"],
            kind,
            ctx=ctx,
            validate=validate,
        )
    elif step.rule == "ci_collapse":
        new_root, _ = apply_ci_collapse(root, step.path, kind, ctx=ctx, validate=validate)
    elif step.rule == "independence":
        new_root, _ = apply_independence(root, step.path, kind, ctx=ctx, validate=validate)
    else:
        raise RewriteError(f"unknown rule {step.rule!r}")
    return new_root


def replay_trace(
    initial: FactorExpr,
    trace: Iterable[TraceStep],
    *,
    graph: ModelGraph | None = None,
    table: JointTable | None = None,
    tol: float = REL_TOL,
    validate: bool = True,
) -> FactorExpr:
    """Re-run a recorded trace from an initial expression.

    Deterministic: the same trace on the same initial expression always
    yields the same final expression. With validate=True every certificate
    is re-checked against the supplied graph/table and a failing certificate
    raises CertificateError; validate=False replays the raw algebra (used to
    inspect traces whose certificates are knowingly wrong)."""
    ctx = Context(graph=graph, table=table, tol=tol)
    expr = initial
    for step in trace:
        expr = replay_step(expr, step, ctx=ctx, validate=validate)
    return expr


def singleton_cr(names: Iterable[str]) -> CRTerm:
    """CR over one free singleton block per name: the usual starting point
    of a whole-model factorization."""
    return CRTerm(tuple(Block([n]) for n in names))


# ---------------------------------------------------------------------------
# (De)serialization of traces


def step_to_dict(step: TraceStep) -> dict:
    out: dict = {"rule": step.rule, "path": list(step.path), "params": dict(step.params)}
    if step.certificate is not None:
        cert = step.certificate
        cert_dict: dict = {"kind": cert.kind}
        if cert.groups:
            cert_dict["groups"] = [list(g) for g in cert.groups]
        else:
            cert_dict["x"] = list(cert.x)
            cert_dict["y"] = list(cert.y)
        if cert.z:
            cert_dict["z"] = list(cert.z)
        out["certificate"] = cert_dict
    return out


def step_from_dict(data: Mapping) -> TraceStep:
    cert = None
    if data.get("certificate") is not None:
        c = data["certificate"]
        cert = Certificate(
            c.get("kind", "graph"),
            x=tuple(c.get("x", ())),
            y=tuple(c.get("y", ())),
            z=tuple(c.get("z", ())),
            groups=tuple(tuple(g) for g in c.get("groups", ())),
        )
    try:
        return TraceStep(data["rule"], tuple(data["path"]), dict(data.get("params", {})), cert)
    except KeyError as exc:
        raise RewriteError(f"trace step is missing field {exc}") from None


def trace_to_dicts(trace: Iterable[TraceStep]) -> list[dict]:
    return [step_to_dict(s) for s in trace]


def trace_from_dicts(items: Iterable[Mapping]) -> OperationTrace:
    return tuple(step_from_dict(d) for d in items)
