"""Non-crossing partitions, Łukasiewicz walks and weighted path counting.

A non-crossing partition of {1..M} maps to a walk whose step at
``t = min(B)`` is ``|B| - 1`` and whose every other step is ``-1``. Under
this map the weight ``prod_B kappa_|B|`` becomes a product of step weights,
so moments are partition functions of nonnegative walks.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import accumulate
from typing import Iterator, Mapping

from ._series import series_pow
from .errors import EnumerationTooLarge
from .freeprob import _as_lookup

__all__ = [
    "NonCrossingPartition",
    "LukasiewiczWalk",
    "WeightedStepSystem",
    "enumerate_nc",
    "enumerate_walks",
    "walk_from_partition",
    "partition_from_walk",
    "walk_weight",
    "ballot_partition_functions",
    "bridge_partition_enum",
    "bridge_partition_series",
    "good_rotations",
    "catalan",
]

ENUM_BOUND = 14


def catalan(n: int) -> int:
    from math import comb

    return comb(2 * n, n) // (n + 1)


@dataclass(frozen=True)
class NonCrossingPartition:
    """Non-crossing set partition of {1..M}; blocks sorted by their minimum."""

    M: int
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0]))
        object.__setattr__(self, "blocks", blocks)
        elems = [x for b in blocks for x in b]
        if sorted(elems) != list(range(1, self.M + 1)):
            raise ValueError("blocks must partition {1..M}")
        owner = {x: i for i, b in enumerate(blocks) for x in b}
        # a < b < c < d with a, c in one block and b, d in another
        for i, b in enumerate(blocks):
            for lo, hi in zip(b, b[1:]):
                inside = {owner[x] for x in range(lo + 1, hi)}
                for j in inside:
                    if any(x < lo or x > hi for x in blocks[j]):
                        raise ValueError(f"blocks {b} and {blocks[j]} cross")

    @classmethod
    def _trusted(cls, M, blocks):
        # skips validation for blocks produced by the enumerator
        obj = object.__new__(cls)
        object.__setattr__(obj, "M", M)
        object.__setattr__(obj, "blocks", tuple(blocks))
        return obj

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)


@dataclass(frozen=True)
class LukasiewiczWalk:
    """Excursion with steps in {-1, 0, 1, 2, ...} from 0 back to 0."""

    increments: tuple[int, ...]

    def __post_init__(self):
        inc = tuple(int(x) for x in self.increments)
        object.__setattr__(self, "increments", inc)
        if any(x < -1 for x in inc):
            raise ValueError("increments must be >= -1")
        h = self.heights
        if h[-1] != 0 or min(h) < 0:
            raise ValueError("walk must stay nonnegative and end at 0")

    @property
    def M(self) -> int:
        return len(self.increments)

    @property
    def heights(self) -> tuple[int, ...]:
        return (0,) + tuple(accumulate(self.increments))

    @property
    def down_steps(self) -> tuple[int, ...]:
        """1-based indices of the -1 steps."""
        return tuple(t for t, x in enumerate(self.increments, 1) if x == -1)


@dataclass(frozen=True)
class WeightedStepSystem:
    """Weights ``w_k`` for steps ``k >= -1``; missing steps have weight 0."""

    weights: Mapping[int, object]

    def __post_init__(self):
        if any(k < -1 for k in self.weights):
            raise ValueError("steps must be >= -1")
        object.__setattr__(self, "weights", dict(self.weights))

    def w(self, k: int):
        return self.weights.get(k, 0)

    @property
    def max_step(self) -> int:
        return max((k for k, v in self.weights.items() if v != 0), default=-1)

    @classmethod
    def from_cumulants(cls, cum, max_step: int, z=None) -> WeightedStepSystem:
        """``w_-1 = 1/z`` and ``w_k = kappa_{k+1} z^k``; ``z=None`` drops the z-powers."""
        kappa = _as_lookup(cum)
        if z is None:
            ws = {-1: 1}
            ws.update({k: kappa(k + 1) for k in range(max_step + 1)})
        else:
            z = Fraction(z)
            ws = {-1: 1 / z}
            ws.update({k: kappa(k + 1) * z**k for k in range(max_step + 1)})
        return cls(ws)


def _nc_blocks(elems: tuple[int, ...]) -> Iterator[list[tuple[int, ...]]]:
    # the block containing elems[0] splits the rest into independent gaps
    if not elems:
        yield []
        return
    first, rest = elems[0], elems[1:]
    n = len(rest)
    for mask in range(1 << n):
        chosen = [i for i in range(n) if mask >> i & 1]
        block = (first,) + tuple(rest[i] for i in chosen)
        cuts = [-1] + chosen + [n]
        gaps = [rest[a + 1 : b] for a, b in zip(cuts, cuts[1:])]
        yield from _combine(block, gaps)


def _combine(block, gaps):
    if not gaps:
        yield [block]
        return
    for head in _nc_blocks(gaps[0]):
        for tail in _combine(block, gaps[1:]):
            yield head + tail


def enumerate_nc(M: int, bound: int = ENUM_BOUND) -> Iterator[NonCrossingPartition]:
    """Stream every non-crossing partition of {1..M} exactly once."""
    if M > bound:
        raise EnumerationTooLarge(f"NC({M}) exceeds bound {bound}")
    if M < 1:
        raise ValueError("M must be >= 1")
    for blocks in _nc_blocks(tuple(range(1, M + 1))):
        yield NonCrossingPartition._trusted(M, sorted(blocks))


def enumerate_walks(M: int, bound: int = ENUM_BOUND) -> Iterator[LukasiewiczWalk]:
    """Depth-first enumeration of Łukasiewicz excursions of length M."""
    if M > bound:
        raise EnumerationTooLarge(f"walks of length {M} exceed bound {bound}")
    for inc in _paths(0, M, lambda h, r: 0 <= h <= r):
        yield LukasiewiczWalk(inc)


def _paths(start: int, L: int, ok, end: int = 0):
    # step sequences of length L from start to end; ok(h, remaining) prunes
    out = []

    def rec(h, seq):
        r = L - len(seq)
        if r == 0:
            if h == end:
                out.append(tuple(seq))
            return
        for k in range(-1, r - (h - end)):
            nh = h + k
            if ok(nh, r - 1):
                seq.append(k)
                rec(nh, seq)
                seq.pop()

    if ok(start, L):
        rec(start, [])
    return out


def walk_from_partition(pi: NonCrossingPartition) -> LukasiewiczWalk:
    """Up step ``|B| - 1`` at ``min(B)``, down step everywhere else."""
    inc = [-1] * pi.M
    for b in pi.blocks:
        inc[b[0] - 1] = len(b) - 1
    return LukasiewiczWalk(tuple(inc))


def partition_from_walk(walk: LukasiewiczWalk) -> NonCrossingPartition:
    """Inverse bijection: each down step joins the innermost open block."""
    stack: list[list] = []
    blocks = []
    for t, x in enumerate(walk.increments, 1):
        if x >= 0:
            block = [t]
            blocks.append(block)
            if x > 0:
                stack.append([block, x])
        else:
            top = stack[-1]
            top[0].append(t)
            top[1] -= 1
            if top[1] == 0:
                stack.pop()
    return NonCrossingPartition(walk.M, tuple(tuple(b) for b in blocks))


def walk_weight(walk: LukasiewiczWalk, cum):
    """Product of ``kappa_{k+1}`` over the non-down steps ``k``."""
    kappa = _as_lookup(cum)
    out = 1
    for x in walk.increments:
        if x >= 0:
            out = out * kappa(x + 1)
    return out


def _weighted_sum(start, L, steps, end=0, ok=None):
    # total weight and weight of paths staying > 0 before the last step
    kmax = steps.max_step
    total = 0
    good = 0

    def rec(h, r, w, pos):
        nonlocal total, good
        if r == 0:
            if h == end:
                total = total + w
                if pos:
                    good = good + w
            return
        # the remaining r-1 steps can lower the height by at most r-1
        hi = min(kmax, r - 1 - (h - end))
        for k in range(-1, hi + 1):
            wk = steps.w(k)
            if wk == 0:
                continue
            nh = h + k
            if ok is not None and not ok(nh, r - 1):
                continue
            rec(nh, r - 1, w * wk, pos and (r == 1 or nh > 0))

    rec(start, L, 1, start > 0)
    return total, good


def ballot_partition_functions(y0: int, L: int, steps: WeightedStepSystem, bound: int = ENUM_BOUND):
    """Partition functions ``(Z, Z_good)`` of walks from height y0 to 0 in L steps.

    ``Z`` sums over all step sequences; ``Z_good`` over those staying
    strictly positive before the last step. The cycle lemma gives
    ``Z_good = (y0 / L) Z``.

    Examples
    --------
    >>> s = WeightedStepSystem({-1: 1, 0: 1, 1: 1})
    >>> ballot_partition_functions(1, 3, s)
    (6, 2)
    """
    if L > bound:
        raise EnumerationTooLarge(f"L = {L} exceeds bound {bound}")
    if y0 < 0 or L < 1:
        raise ValueError("need y0 >= 0 and L >= 1")
    return _weighted_sum(y0, L, steps)


def bridge_partition_enum(H: int, M: int, steps: WeightedStepSystem, bound: int = ENUM_BOUND):
    """Total weight of walks from height H to 0 in M steps that stay >= 0."""
    if M > bound:
        raise EnumerationTooLarge(f"M = {M} exceeds bound {bound}")
    if H > M:
        return 0
    if M == 0:
        return 1 if H == 0 else 0
    total, _ = _weighted_sum(H, M, steps, ok=lambda h, r: h >= 0)
    return total


def bridge_partition_series(H: int, M: int, steps: WeightedStepSystem):
    """Bridge partition function from the cycle-lemma series formula.

    With ``Phi(x) = sum_k w_k x^k`` the bridges from H to 0 staying >= 0
    have total weight ``(H+1)/(M+1) [x^-(H+1)] Phi(x)^(M+1) / w_-1``.
    """
    if H > M:
        return 0
    w_down = steps.w(-1)
    if w_down == 0:
        return 0
    # x * Phi(x) as an ordinary power series
    deg = M - H
    coeffs = [steps.w(k - 1) for k in range(deg + 1)]
    c = series_pow(coeffs, M + 1, deg)[deg]
    out = Fraction(H + 1, M + 1) * c / w_down
    return out.expand() if hasattr(out, "expand") else out


def good_rotations(increments, y0: int | None = None) -> list[int]:
    """Rotation offsets whose path from y0 stays positive until the last step.

    ``y0`` defaults to ``-sum(increments)``. The cycle lemma says there are
    exactly ``y0`` such offsets.
    """
    inc = list(increments)
    L = len(inc)
    if y0 is None:
        y0 = -sum(inc)
    good = []
    for r in range(L):
        rot = inc[r:] + inc[:r]
        h = y0
        ok = y0 > 0
        for x in rot[:-1]:
            h += x
            if h <= 0:
                ok = False
                break
        if ok:
            good.append(r)
    return good
