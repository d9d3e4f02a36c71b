"""Closed-form loss-tolerance analytics for tree-encoded logical measurements.

A logical cluster qubit is encoded in a tree described by a branching
vector ``b = (b0, b1, ..., bm)``: the attachment point hangs ``b0``
level-1 qubits, and every level-i qubit carries ``b_i`` children.  Each
physical qubit is lost independently with probability ``eps0``.  This
module evaluates, in closed form,

* ``R_k`` -- the probability that a (possibly lost) level-k qubit can be
  removed by an indirect Z measurement on qubits below it,
* ``P`` -- the probability that the adaptive strategy completes the
  logical measurement, and ``eps_eff = 1 - P``,
* ``Q`` -- the number of physical qubits the tree consumes.

All probability arithmetic is double precision.  Failure probabilities
are propagated in complement form (``expm1``/``log1p``) so that
``eps_eff`` keeps full relative accuracy deep below 1e-15, where ``1 - P``
would round to zero; ``P`` is then defined as ``1 - eps_eff``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidInputError

__all__ = [
    "SuccessReport",
    "validate_branching",
    "validate_loss",
    "qubit_count",
    "indirect_z_success",
    "logical_success",
]


@dataclass(frozen=True)
class SuccessReport:
    """Result of evaluating one (branching vector, loss rate) pair.

    ``p`` is always exactly ``1 - eps_eff`` in double precision; for
    extremely small ``eps_eff`` it therefore rounds to 1.0 while
    ``eps_eff`` retains its full relative accuracy.  ``r`` holds the
    indirect-measurement success probabilities ``R_1 .. R_{m+1}``
    (``R_{m+1}`` is 0 by convention: nothing hangs below the last level).
    """

    p: float
    eps_eff: float
    r: tuple[float, ...]


def validate_branching(b: Sequence[int]) -> tuple[int, ...]:
    """Normalize a branching vector to a tuple, rejecting bad input."""
    try:
        vec = tuple(int(v) for v in b)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"branching vector must be a sequence of integers, got {b!r}") from exc
    if len(vec) == 0:
        raise InvalidInputError("branching vector must be non-empty")
    for i, (v, orig) in enumerate(zip(vec, b)):
        if v != orig or v < 1:
            raise InvalidInputError(f"branching parameter b{i}={orig!r} must be an integer >= 1")
    return vec

def validate_loss(eps0: float) -> float:
    """Check a per-qubit loss probability and return it as a float."""
    try:
        e = float(eps0)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"loss rate must be a real number, got {eps0!r}") from exc
    if math.isnan(e) or not 0.0 <= e <= 1.0:
        raise InvalidInputError(f"loss rate must lie in [0, 1], got {eps0!r}")
    return e


def qubit_count(b: Sequence[int]) -> int:
    """Number of qubits in the tree: ``sum_i prod_{j<=i} b_j``.

    Level 1 holds b0 qubits and each level multiplies the previous level
    width by its branching parameter.  The attachment point itself (and
    any connector qubits consumed while splicing the tree into a larger
    cluster) is not part of the tree and is not counted.
    """
    vec = validate_branching(b)
    total = 0
    width = 1
    for v in vec:
        width *= v
        total += width
    return total


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


def _child_removal_base(eps0: float, inner_exp: int, q_next2: float) -> float:
    """Failure probability of one indirect-measurement branch.

    A branch through one child fails unless the child is present *and*
    each of its ``inner_exp`` children admits a Z removal, where
    ``q_next2`` is the indirect-removal failure probability two levels
    down.  Returned value ``u`` satisfies ``q_k = u ** b_k``.
    """
    if inner_exp == 0:
        survivors = 0.0
    else:
        arg = eps0 * q_next2
        if arg >= 1.0:
            survivors = 1.0
        else:
            # 1 - (1 - eps0*q_next2)^inner_exp, without cancellation
            survivors = -math.expm1(inner_exp * math.log1p(-arg))
    return _clamp01(eps0 + (1.0 - eps0) * survivors)


def _failure_levels(vec: tuple[int, ...], eps0: float) -> list[float]:
    """Indirect-removal *failure* probabilities ``q_k = 1 - R_k``.

    Returns ``[q_1, ..., q_{m+1}]`` with ``q_{m+1} = 1``; levels past the
    bottom of the tree are treated as certain failures with zero children.
    """
    m = len(vec) - 1
    q = [1.0] * (m + 2)  # q[k] = q_k for k = 1..m+1; q[0] unused
    for k in range(m, 0, -1):
        inner = vec[k + 1] if k + 1 <= m else 0
        q_next2 = q[k + 2] if k + 2 <= m + 1 else 1.0
        u = _child_removal_base(eps0, inner, q_next2)
        q[k] = _clamp01(u ** vec[k])
    return q[1:]


def _eps_eff_core(eps0: float, b0: int, b1: int, q1: float, q2: float) -> float:
    """Effective loss rate from the top two levels' failure probabilities.

    The success probability factors as
    ``P = (X^b0 - Y^b0) * W^b1`` with ``X = 1 - eps0*q1`` (a level-1 qubit
    is removable directly or indirectly), ``Y = eps0*(1 - q1)`` (lost but
    still indirectly removable) and ``W = 1 - eps0*q2`` (a level-2 qubit is
    removable).  ``eps_eff = (1 - X^b0 W^b1) + Y^b0 W^b1`` is accumulated
    from the two positive failure contributions so no cancellation occurs.
    """
    x_arg = eps0 * q1
    w_log = 0.0
    if b1 > 0:
        w_arg = eps0 * q2
        if w_arg >= 1.0:
            return 1.0
        w_log = b1 * math.log1p(-w_arg)
    if x_arg >= 1.0:
        term1 = 1.0
    else:
        term1 = -math.expm1(b0 * math.log1p(-x_arg) + w_log)
    y = eps0 * (1.0 - q1)
    term2 = math.exp(b0 * math.log(y) + w_log) if y > 0.0 else 0.0
    return _clamp01(term1 + term2)


def indirect_z_success(b: Sequence[int], eps0: float) -> tuple[float, ...]:
    """Per-level indirect Z measurement success probabilities.

    Returns ``(R_1, ..., R_{m+1})``.  ``R_k`` is the probability that a
    level-k qubit can be removed without touching it: some child must be
    present and all of that child's children must themselves admit a
    (direct or indirect) Z measurement.  The recursion bottoms out at
    ``R_{m+1} = 0``.
    """
    vec = validate_branching(b)
    e = validate_loss(eps0)
    return tuple(_clamp01(1.0 - qk) for qk in _failure_levels(vec, e))


def logical_success(b: Sequence[int], eps0: float) -> SuccessReport:
    """Probability that the tree-encoded logical measurement succeeds.

    The strategy walks the level-1 qubits in order until one is present
    to receive the logical-basis measurement; the qubits skipped over
    must be removed indirectly, the remaining level-1 qubits and the
    chosen qubit's children directly or indirectly.  For a depth-0 vector
    this reduces to ``P = (1 - eps0)^b0``.
    """
    vec = validate_branching(b)
    e = validate_loss(eps0)
    q = _failure_levels(vec, e)
    m = len(vec) - 1
    b1 = vec[1] if m >= 1 else 0
    q2 = q[1] if m >= 1 else 1.0
    eps_eff = _eps_eff_core(e, vec[0], b1, q[0], q2)
    return SuccessReport(
        p=1.0 - eps_eff,
        eps_eff=eps_eff,
        r=tuple(_clamp01(1.0 - qk) for qk in q),
    )
