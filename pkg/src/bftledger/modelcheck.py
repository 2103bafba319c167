"""Bounded exhaustive model check of the one-shot swap consensus.

Explores every reachable configuration of honest authorities' consensus
state under an adversary that fully controls scheduling, both clients (they
can sign any proposal at any time since both accounts are locked), and up to
f byzantine authorities modeled as wildcard signers whose votes complete any
certificate. The state keeps, per honest authority, its last proposal, its
locked pre-commit, and the votes it has issued; certificates exist exactly
when enough votes do.

Safety is evaluated through the production rule implementations, so ablating
a rule here ablates exactly what authorities enforce. Agreement is violated
when commit certificates for different decisions become formable; the
checker reports the first such state and the action path to it.

Symmetry: honest authorities are interchangeable, so states are canonicalized
by sorting their records.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import errors
from .accounts import AccountId
from .committee import Certificate
from .errors import err
from .swap import (
    CommitStatement,
    DecisionValue,
    PreCommitStatement,
    Proposal,
    SwapInstance,
    is_safe_pre_commit,
    is_safe_proposal,
)

_SWID = AccountId(0, (0,))

PK1 = b"m-one"
PK2 = b"m-two"


@dataclass
class CheckResult:
    violation: bool
    states: int
    example: Optional[list] = None  # action path to the violating state

    def summary(self) -> str:
        status = "VIOLATION" if self.violation else "no violation"
        return f"{status} over {self.states} reachable states"


def _proposal(pv: tuple[int, int]) -> Proposal:
    return Proposal(_SWID, pv[0], DecisionValue(pv[1]))


def _precommit_cert(pv: tuple[int, int]) -> Certificate:
    return Certificate(value=PreCommitStatement(_proposal(pv)), votes=())


def _instance(proposed, locked) -> SwapInstance:
    inst = SwapInstance(id1=AccountId(0), n1=0, id2=AccountId(1), n2=0, pk1=PK1, pk2=PK2)
    inst.proposed = _proposal(proposed) if proposed is not None else None
    inst.locked = _precommit_cert(locked) if locked is not None else None
    return inst


# A record is (proposed, locked, prevotes, comvotes) where proposed/locked are
# (round, decision) or None and the vote fields are frozensets of (round, decision).
_FRESH = (None, None, frozenset(), frozenset())


def _step_proposal(record, pv, disabled):
    proposed, locked, pre, com = record
    if pv in pre:
        return None  # idempotent re-vote, no new state
    if not is_safe_proposal(_instance(proposed, locked), _proposal(pv), disabled):
        return None
    return (pv, locked, pre | {pv}, com)


def _step_precommit(record, pv, disabled):
    proposed, locked, pre, com = record
    if locked == pv and pv in com:
        return None
    if not is_safe_pre_commit(_instance(proposed, locked), _precommit_cert(pv), disabled):
        return None
    return (proposed, pv, pre, com | {pv})


def check_swap_agreement(
    max_round: int = 2,
    byzantine: int = 1,
    n: int = 4,
    disabled_rules: frozenset = frozenset(),
    max_states: int = 5_000_000,
    want_example: bool = False,
) -> CheckResult:
    """Exhaustively search all schedules up to the round bound.

    Raises BoundsTooLarge for bounds outside the desk-scale envelope.
    """
    if max_round > 3 or n > 7:
        raise err(errors.BOUNDS_TOO_LARGE, f"max_round={max_round}, n={n}")
    f = (n - 1) // 3
    if byzantine > f:
        raise err(errors.BOUNDS_TOO_LARGE, f"byzantine={byzantine} exceeds f={f}")
    quorum = 2 * f + 1
    honest = n - byzantine
    proposals = [
        (k, v) for k in range(max_round + 1) for v in (0, 1)
    ]

    def formable(state, field_index: int):
        counts: dict[tuple[int, int], int] = {}
        for record in state:
            for pv in record[field_index]:
                counts[pv] = counts.get(pv, 0) + 1
        return {pv for pv, c in counts.items() if c + byzantine >= quorum}

    def violated(state) -> bool:
        decisions = {v for (_k, v) in formable(state, 3)}
        return len(decisions) > 1

    initial = tuple([_FRESH] * honest)
    seen = {initial}
    frontier = [initial]
    parents: dict = {initial: None} if want_example else {}
    target = None

    while frontier:
        state = frontier.pop()
        if violated(state):
            target = state
            break
        precommits = formable(state, 2)
        # Authorities with identical records are interchangeable: act on the
        # first index of each distinct record only.
        first_of: dict = {}
        for i, record in enumerate(state):
            first_of.setdefault(record, i)
        for record, i in first_of.items():
            moves = [("prop", pv, _step_proposal(record, pv, disabled_rules)) for pv in proposals]
            moves += [("pre", pv, _step_precommit(record, pv, disabled_rules)) for pv in precommits]
            for kind, pv, new_record in moves:
                if new_record is None:
                    continue
                new_state = tuple(sorted(
                    (new_record if j == i else r for j, r in enumerate(state)),
                    key=_record_key,
                ))
                if new_state in seen:
                    continue
                if len(seen) >= max_states:
                    raise err(errors.BOUNDS_TOO_LARGE, f"state budget {max_states} exhausted")
                seen.add(new_state)
                frontier.append(new_state)
                if want_example:
                    parents[new_state] = (state, (kind, pv))

    example = None
    if target is not None and want_example:
        example = []
        cursor = target
        while parents.get(cursor) is not None:
            cursor, action = parents[cursor]
            example.append(action)
        example.reverse()
    return CheckResult(violation=target is not None, states=len(seen), example=example)


def _record_key(record):
    proposed, locked, pre, com = record
    return (
        proposed if proposed is not None else (-1, -1),
        locked if locked is not None else (-1, -1),
        tuple(sorted(pre)),
        tuple(sorted(com)),
    )


def ablation_matrix(max_round: int = 2, byzantine: int = 1, n: int = 4) -> dict[str, CheckResult]:
    """The baseline check plus one run per ablated safety rule."""
    results = {"baseline": check_swap_agreement(max_round, byzantine, n)}
    for rule in "abcd":
        results[f"without_{rule}"] = check_swap_agreement(
            max_round, byzantine, n, disabled_rules=frozenset(rule)
        )
    return results
