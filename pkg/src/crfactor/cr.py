"""Numeric co-occurrence rate evaluation straight from the definition.

The co-occurrence rate of a list of blocks b_1, ..., b_n is

    CR(b_1, ..., b_n) = P(b_1, ..., b_n) / (P(b_1) ... P(b_n)),

where each block is a group of variables treated as a single joint event.
The grouping matters: CR(A,B,C) and CR(A,BC) differ, although the numerator
event is the same. A block member is either free (its state is read from the
evaluation assignment) or pinned to a fixed state.

These functions are the semantic ground truth that the symbolic layer in
``expr``/``rewrites`` is tested against.
"""

from __future__ import annotations

from typing import Iterable, Sequence, Union

from .errors import ModelError, UndefinedCRError
from .model import Assignment, JointTable

BlockMemberSpec = Union[str, tuple[str, int]]


class Block:
    """An ordered group of variables forming one joint event.

    Members are (name, state) pairs; state ``None`` marks a free variable
    whose value comes from the evaluation assignment. A variable may appear
    at most once within a block.
    """

    __slots__ = ("members",)

    def __init__(self, members: Iterable[BlockMemberSpec]):
        norm: list[tuple[str, int | None]] = []
        seen = set()
        for m in members:
            if isinstance(m, str):
                name, state = m, None
            else:
                name, state = m
                if state is not None and (not isinstance(state, int) or state < 0):
                    raise ModelError(f"pinned state for {name!r} must be a non-negative integer")
            if not isinstance(name, str) or not name.isidentifier():
                raise ModelError(f"block member name must be an identifier, got {name!r}")
            if name in seen:
                raise ModelError(f"variable {name!r} appears twice in one block")
            seen.add(name)
            norm.append((name, state))
        if not norm:
            raise ModelError("a block needs at least one member")
        self.members = tuple(norm)

    @property
    def vars(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.members)

    @property
    def free_vars(self) -> tuple[str, ...]:
        return tuple(name for name, state in self.members if state is None)

    def restrict(self, names: Iterable[str]) -> "Block":
        keep = set(names)
        return Block([m for m in self.members if m[0] in keep])

    def __eq__(self, other):
        return isinstance(other, Block) and self.members == other.members

    def __hash__(self):
        return hash(self.members)

    def __str__(self):
        return " ".join(n if s is None else f"{n}={s}" for n, s in self.members)

    def __repr__(self):
        return f"Block({list(self.members)!r})"


def block(*members: BlockMemberSpec) -> Block:
    """Convenience constructor: ``block("A", ("B", 0))``."""
    return Block(members)


BlockList = Sequence[Block]


def block_event(b: Block, assignment: Assignment) -> dict[str, int]:
    """The concrete event described by a block at an assignment."""
    event: dict[str, int] = {}
    for name, state in b.members:
        if state is None:
            if name not in assignment:
                raise ModelError(f"free variable {name!r} is not bound by the assignment")
            event[name] = assignment[name]
        else:
            event[name] = state
    return event


def joint_event(blocks: BlockList, assignment: Assignment) -> dict[str, int] | None:
    """The union of several blocks read as one joint event.

    Returns None when two occurrences of a variable disagree, i.e. the event
    is impossible.
    """
    merged: dict[str, int] = {}
    for b in blocks:
        for name, state in block_event(b, assignment).items():
            if merged.setdefault(name, state) != state:
                return None
    return merged


def cr_value(table: JointTable, blocks: BlockList, assignment: Assignment) -> float:
    """CR(b_1, ..., b_n) evaluated at an assignment.

    A repeated variable is counted once in the numerator event and once per
    occurrence in the denominator. With a single block the value is 1 (up to
    rounding). Raises UndefinedCRError on an empty block list or when any
    denominator marginal is zero; a zero numerator over positive denominators
    yields 0.
    """
    blocks = tuple(blocks)
    if not blocks:
        raise UndefinedCRError("CR of an empty block list is undefined")
    denom = 1.0
    for b in blocks:
        p = table.event_prob(block_event(b, assignment))
        if p == 0.0:
            raise UndefinedCRError(f"zero marginal for block ({b})")
        denom *= p
    event = joint_event(blocks, assignment)
    numer = 0.0 if event is None else table.event_prob(event)
    return numer / denom


def conditional_cr_value(
    table: JointTable, blocks: BlockList, cond: Block | None, assignment: Assignment
) -> float:
    """CR(b_1, ..., b_n | c) = P(b_1..b_n | c) / prod_i P(b_i | c).

    An absent or empty condition degenerates to the plain CR. Raises
    UndefinedCRError when P(c) = 0 or any conditional marginal P(b_i | c)
    is zero.
    """
    if cond is None:
        return cr_value(table, blocks, assignment)
    blocks = tuple(blocks)
    if not blocks:
        raise UndefinedCRError("CR of an empty block list is undefined")
    cond_event = block_event(cond, assignment)
    pc = table.event_prob(cond_event)
    if pc == 0.0:
        raise UndefinedCRError(f"conditioning event ({cond}) has probability zero")
    denom = 1.0
    for b in blocks:
        ev = joint_event((b,), assignment)
        merged = dict(cond_event)
        impossible = False
        for k, v in ev.items():
            if merged.setdefault(k, v) != v:
                impossible = True
                break
        p = 0.0 if impossible else table.event_prob(merged) / pc
        if p == 0.0:
            raise UndefinedCRError(f"zero conditional marginal for block ({b})")
        denom *= p
    full = joint_event(blocks, assignment)
    if full is None:
        return 0.0
    merged = dict(cond_event)
    for k, v in full.items():
        if merged.setdefault(k, v) != v:
            return 0.0
    return (table.event_prob(merged) / pc) / denom


def conditional_prob(table: JointTable, target: Block, given: Block, assignment: Assignment) -> float:
    """P(target | given) for block events at an assignment."""
    return table.conditional_prob(block_event(target, assignment), block_event(given, assignment))


def reconstruct_joint(table: JointTable, blocks: BlockList, assignment: Assignment) -> float:
    """CR(blocks) * prod_i P(b_i): equals P(assignment) whenever the blocks
    partition the table's variables."""
    value = cr_value(table, blocks, assignment)
    for b in blocks:
        value *= table.event_prob(block_event(b, assignment))
    return value


def marginal_cr_check(
    table: JointTable, blocks: BlockList, drop_var: str, assignment: Assignment
) -> tuple[float, float]:
    """Both sides of the marginal-elimination identity

        sum_x CR(..., x) P(x) = CR(...)

    where x ranges over the states of `drop_var`, which must occur in
    `blocks` as a singleton free block. Returns (lhs, rhs); with a single
    remaining empty list the right side is 1 by convention CR(x) = 1.
    """
    blocks = tuple(blocks)
    target = None
    for i, b in enumerate(blocks):
        if b.members == ((drop_var, None),):
            target = i
            break
    if target is None:
        raise ModelError(f"{drop_var!r} does not occur as a singleton free block")
    lhs = 0.0
    for s in range(table.cardinality(drop_var)):
        a = dict(assignment)
        a[drop_var] = s
        lhs += cr_value(table, blocks, a) * table.event_prob({drop_var: s})
    rest = blocks[:target] + blocks[target + 1 :]
    rhs = cr_value(table, rest, assignment) if rest else 1.0
    return lhs, rhs
