"""Operational simulation of the loss channel on tree clusters.

Two validation routes for the closed-form analytics live here: exact
enumeration over every loss pattern (small trees) and seeded Monte Carlo
sampling (any size).  Both drive the same adaptive measurement strategy:

* walk the level-1 qubits in index order; the first *present* qubit
  receives the logical-basis measurement (no retry if its surroundings
  fail),
* every level-1 qubit skipped over (lost) must be removed indirectly,
* every later level-1 qubit and every child of the chosen qubit must be
  removable directly (present) or indirectly.

Loss is the only failure mode: a present qubit is measured successfully
with certainty.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .analytics import validate_branching, validate_loss
from .errors import CapacityError, InvalidInputError

__all__ = [
    "TreeGraph",
    "TrialOutcome",
    "FailureReason",
    "build_tree",
    "z_removal_feasible",
    "indirect_removal_feasible",
    "attempt_logical_measurement",
    "exact_success",
    "exact_indirect_success",
    "estimate_success",
]

ENUMERATION_CAP = 24       # largest tree (in qubits) we enumerate exhaustively
TRIAL_BLOCK = 8192         # Monte Carlo trials per RNG block (stream-splitting unit)


class FailureReason(Enum):
    NO_PRESENT_FIRST_LEVEL = "no_present_first_level"
    CHILD_REMOVAL_FAILED = "child_removal_failed"
    SIBLING_REMOVAL_FAILED = "sibling_removal_failed"


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    a_vertex: Optional[int] = None
    failure_reason: Optional[FailureReason] = None


@dataclass(frozen=True)
class TreeGraph:
    """Leveled tree of qubit vertices generated from a branching vector.

    Vertices are numbered level-major: level 1 occupies ids
    ``0 .. b0-1``, then level 2, and so on.  Level-1 vertices hang off a
    virtual attachment point that is not a stored qubit (``parent = -1``).
    """

    shape: tuple[int, ...]
    n: int
    level_bounds: tuple[tuple[int, int], ...]  # (start, stop) id range per level
    parent: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]

    def level_of(self, v: int) -> int:
        """1-based level of vertex ``v``."""
        for li, (lo, hi) in enumerate(self.level_bounds):
            if lo <= v < hi:
                return li + 1
        raise InvalidInputError(f"vertex {v} not in tree of size {self.n}")


def build_tree(b: Sequence[int]) -> TreeGraph:
    vec = validate_branching(b)
    bounds = []
    idx, width = 0, 1
    for v in vec:
        width *= v
        bounds.append((idx, idx + width))
        idx += width
    n = idx
    parent = [-1] * n
    children: list[tuple[int, ...]] = [()] * n
    for li in range(len(vec) - 1):
        bnext = vec[li + 1]
        lo, hi = bounds[li]
        nxt_lo = bounds[li + 1][0]
        for j, p in enumerate(range(lo, hi)):
            kids = tuple(range(nxt_lo + j * bnext, nxt_lo + (j + 1) * bnext))
            children[p] = kids
            for c in kids:
                parent[c] = p
    return TreeGraph(
        shape=vec,
        n=n,
        level_bounds=tuple(bounds),
        parent=tuple(parent),
        children=tuple(children),
    )


def _check_pattern(tree: TreeGraph, lost: Sequence[bool]) -> np.ndarray:
    arr = np.asarray(lost, dtype=bool)
    if arr.shape != (tree.n,):
        raise InvalidInputError(
            f"loss pattern must have one flag per vertex ({tree.n}), got shape {arr.shape}"
        )
    return arr


def indirect_removal_feasible(tree: TreeGraph, lost: Sequence[bool], v: int) -> bool:
    """Whether vertex ``v`` can be removed without measuring it directly.

    True iff some child ``c`` of ``v`` is present and every child of ``c``
    admits a Z removal (directly when present, else indirectly).  Leaves
    have no children and can never be removed indirectly.
    """
    pat = _check_pattern(tree, lost)
    if not 0 <= v < tree.n:
        raise InvalidInputError(f"vertex {v} not in tree of size {tree.n}")
    return _indirect(tree, pat, v)


def z_removal_feasible(tree: TreeGraph, lost: Sequence[bool], v: int) -> bool:
    """Direct-or-indirect Z removal of vertex ``v``."""
    pat = _check_pattern(tree, lost)
    return (not pat[v]) or _indirect(tree, pat, v)


def _indirect(tree: TreeGraph, pat: np.ndarray, v: int) -> bool:
    for c in tree.children[v]:
        if pat[c]:
            continue
        if all((not pat[g]) or _indirect(tree, pat, g) for g in tree.children[c]):
            return True
    return False


def attempt_logical_measurement(tree: TreeGraph, lost: Sequence[bool]) -> TrialOutcome:
    """Run the adaptive strategy on one loss pattern."""
    pat = _check_pattern(tree, lost)
    lo, hi = tree.level_bounds[0]
    first_level = range(lo, hi)
    a_vertex = next((v for v in first_level if not pat[v]), None)
    if a_vertex is None:
        return TrialOutcome(False, None, FailureReason.NO_PRESENT_FIRST_LEVEL)
    if not all((not pat[c]) or _indirect(tree, pat, c) for c in tree.children[a_vertex]):
        return TrialOutcome(False, None, FailureReason.CHILD_REMOVAL_FAILED)
    for v in first_level:
        if v < a_vertex and not _indirect(tree, pat, v):
            return TrialOutcome(False, None, FailureReason.SIBLING_REMOVAL_FAILED)
        if v > a_vertex and pat[v] and not _indirect(tree, pat, v):
            return TrialOutcome(False, None, FailureReason.SIBLING_REMOVAL_FAILED)
    return TrialOutcome(True, a_vertex, None)


# ---------------------------------------------------------------------------
# Vectorized strategy evaluation.  ``lost`` is a (batch, n) boolean matrix;
# all per-level arrays are views into it, so the same code serves both the
# exhaustive enumerator and the Monte Carlo sampler.
# ---------------------------------------------------------------------------

def _level_dp(shape: tuple[int, ...], lost: np.ndarray):
    """Bottom-up removal feasibility per level.

    Returns (per level-1 vertex, over the batch): ``present``, ``czrem``
    (all children removable), ``ind`` (indirectly removable) and ``zrem``.
    """
    batch = lost.shape[0]
    widths = []
    w = 1
    for v in shape:
        w *= v
        widths.append(w)
    offs = np.concatenate(([0], np.cumsum(widths)))
    m = len(shape) - 1

    present_top = czrem = ind = zrem = None
    czrem_next = zrem_next = None
    for li in range(m, -1, -1):
        present = ~lost[:, offs[li]:offs[li] + widths[li]]
        if li == m:
            czrem = np.ones((batch, widths[li]), dtype=bool)
            ind = np.zeros((batch, widths[li]), dtype=bool)
        else:
            bnext = shape[li + 1]
            kids_ok = zrem_next.reshape(batch, widths[li], bnext)
            czrem = kids_ok.all(axis=2)
            branch = (present_next & czrem_next).reshape(batch, widths[li], bnext)
            ind = branch.any(axis=2)
        zrem = present | ind
        present_next, czrem_next, zrem_next = present, czrem, zrem
        present_top = present
    return present_top, czrem, ind, zrem


def _strategy_success(shape: tuple[int, ...], lost: np.ndarray) -> np.ndarray:
    present, czrem, ind, zrem = _level_dp(shape, lost)
    batch, b0 = present.shape
    # prefix[k]: every earlier level-1 qubit is lost *and* indirectly removable
    skipped = (~present) & ind
    prefix = np.ones((batch, b0), dtype=bool)
    if b0 > 1:
        prefix[:, 1:] = np.logical_and.accumulate(skipped[:, :-1], axis=1)
    # suffix[k]: every later level-1 qubit is removable
    suffix = np.ones((batch, b0), dtype=bool)
    if b0 > 1:
        suffix[:, :-1] = np.logical_and.accumulate(zrem[:, :0:-1], axis=1)[:, ::-1]
    return (present & czrem & prefix & suffix).any(axis=1)


def _indirect_root_success(shape: tuple[int, ...], lost: np.ndarray) -> np.ndarray:
    present, czrem, _, _ = _level_dp(shape, lost)
    return (present & czrem).any(axis=1)


_PREDICATES = {
    "logical": _strategy_success,
    "indirect_root": _indirect_root_success,
}


@lru_cache(maxsize=4096)
def _pattern_counts(shape: tuple[int, ...], predicate: str) -> tuple[int, ...]:
    """Per-loss-weight counts of successful patterns.

    Entry ``k`` counts the loss patterns with exactly ``k`` lost qubits on
    which ``predicate`` holds; the exact success probability for any loss
    rate is then a short dot product against the binomial weights.
    """
    n = sum_qubits = 0
    widths = []
    w = 1
    for v in shape:
        w *= v
        widths.append(w)
        sum_qubits += w
    n = sum_qubits
    if n > ENUMERATION_CAP:
        raise CapacityError(
            f"tree has {n} qubits; exhaustive enumeration is capped at {ENUMERATION_CAP}"
        )
    fn = _PREDICATES[predicate]
    counts = np.zeros(n + 1, dtype=np.int64)
    total = 1 << n
    chunk = min(total, 1 << 18)
    cols = np.arange(n, dtype=np.int64)
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        lost = ((idx[:, None] >> cols[None, :]) & 1).astype(bool)
        ok = fn(shape, lost)
        pops = lost.sum(axis=1)
        counts += np.bincount(pops[ok], minlength=n + 1)
    return tuple(int(c) for c in counts)


def _counts_to_probability(counts: Sequence[int], n: int, eps0: float) -> float:
    terms = [
        c * eps0**k * (1.0 - eps0) ** (n - k)
        for k, c in enumerate(counts)
        if c
    ]
    return min(1.0, math.fsum(terms))


def exact_success(tree: TreeGraph, eps0: float) -> float:
    """Exhaustive-enumeration success probability of the strategy.

    Sums the pattern weights ``eps0^lost * (1-eps0)^present`` over all
    ``2^n`` loss patterns on which the logical measurement succeeds.
    Trees above the enumeration cap raise :class:`CapacityError`.
    """
    e = validate_loss(eps0)
    counts = _pattern_counts(tree.shape, "logical")
    return _counts_to_probability(counts, tree.n, e)


def exact_indirect_success(tree: TreeGraph, eps0: float) -> float:
    """Enumerated probability that the tree's attachment point is
    indirectly removable.

    This is the indirect-removal rate of any vertex whose descendant
    subtree has this tree's shape, so it checks one level of the
    analytics recursion at a time.
    """
    e = validate_loss(eps0)
    counts = _pattern_counts(tree.shape, "indirect_root")
    return _counts_to_probability(counts, tree.n, e)


def _block_successes(shape: tuple[int, ...], n: int, eps0: float,
                     seed_seq: np.random.SeedSequence, rows: int) -> int:
    rng = np.random.default_rng(seed_seq)
    # keep transient draw buffers near 32 MB even for very wide trees
    step = max(1, (1 << 22) // max(n, 1))
    done = 0
    hits = 0
    while done < rows:
        take = min(step, rows - done)
        lost = rng.random((take, n)) < eps0
        hits += int(_strategy_success(shape, lost).sum())
        done += take
    return hits


def estimate_success(tree: TreeGraph, eps0: float, trials: int, seed: int,
                     threads: int = 1) -> tuple[float, float]:
    """Monte Carlo estimate of the strategy success probability.

    Stream-splitting rule: trials are partitioned into fixed blocks of
    ``TRIAL_BLOCK``; block ``i`` draws its loss matrix row-major (one row
    per trial) from ``default_rng(SeedSequence(seed).spawn(nblocks)[i])``.
    The result is a pure function of ``(tree, eps0, trials, seed)``; the
    thread count only schedules blocks, whose integer hit counts are
    summed, so it cannot change the output.

    Returns ``(estimate, binomial standard error)``.
    """
    e = validate_loss(eps0)
    if not isinstance(trials, int) or trials < 1:
        raise InvalidInputError(f"trials must be a positive integer, got {trials!r}")
    if not isinstance(threads, int) or threads < 1:
        raise InvalidInputError(f"threads must be a positive integer, got {threads!r}")
    nblocks = (trials + TRIAL_BLOCK - 1) // TRIAL_BLOCK
    seqs = np.random.SeedSequence(seed).spawn(nblocks)
    sizes = [TRIAL_BLOCK] * (nblocks - 1) + [trials - TRIAL_BLOCK * (nblocks - 1)]

    def run(i: int) -> int:
        return _block_successes(tree.shape, tree.n, e, seqs[i], sizes[i])

    if threads == 1 or nblocks == 1:
        hits = sum(run(i) for i in range(nblocks))
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = sum(pool.map(run, range(nblocks)))
    est = hits / trials
    return est, math.sqrt(est * (1.0 - est) / trials)
