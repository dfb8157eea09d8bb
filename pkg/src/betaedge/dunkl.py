"""Exact expansion of Dunkl operators acting on the Bessel generating function.

Writing ``D_1 (h G) = G T_1 h`` with

    T_1 h / N = sum_l kappa_l theta^(1-l) z_1^(l-1) h            (raise)
              + (1/N) d/dz_1 h                                     (partial)
              + (theta/N) sum_{j>=2} (h - s_1j h) / (z_1 - z_j)    (divided differences)

moments are constant terms of iterated ``T_1``. On ``z_1^p z_j^q`` the
divided difference splits into the degree-lowering term ``z_1^(p-1) z_j^q``
(present when ``p > q``) and a remainder ``Delta d_j`` which we call a swap.
Each surviving term is tagged by its signature ``(k, p)``: how many swaps
it used per variable ``j >= 2`` and how many partial derivatives.

Two lowering conventions are offered. ``"exact"`` keeps the true factor
``theta (N - 1 - Y_1) / N``, where ``Y_1`` counts ``j >= 2`` with
``deg z_j >= deg z_1``; its totals are the true moments. ``"simplified"``
replaces that factor by ``theta``; its walk class is exactly the free
moment and its classes match the walk functionals term by term.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .combinatorics import LukasiewiczWalk, enumerate_walks, walk_weight
from .errors import MismatchReport, SpecError, TermBudgetExceeded, UnsupportedSignature
from .freeprob import CumulantSequence, EnsembleSpec, cumulants, moment_nc

__all__ = [
    "DunklExpansion",
    "OperatorStep",
    "apply_step",
    "dunkl_moment",
    "dunkl_joint_moment",
    "classify_against_walks",
    "walk_functional",
    "class_prediction",
]

TERM_BUDGET = 2_000_000
LOWERING_MODES = ("exact", "simplified")


def _expand(c):
    return c.expand() if hasattr(c, "expand") else c


def _is_zero(c) -> bool:
    if hasattr(c, "expand"):
        import sympy

        return sympy.simplify(c) == 0
    return c == 0


@dataclass(frozen=True)
class OperatorStep:
    """One operator choice: ``raise``, ``lower``, ``swap`` or ``partial``.

    ``arg`` is the cumulant index for ``raise`` and the variable index
    (0-based, not the acting variable) for ``swap``.
    """

    tag: str
    arg: int | None = None


@dataclass(frozen=True)
class DunklExpansion:
    """Ledger of ``(N^-1 D_1)^M G`` at ``z = 0`` split by signature.

    ``ledger`` maps ``(k, p)`` to the exact class total; ``k`` lists swap
    counts for the variables other than the acting one.
    """

    N: int
    theta: object
    M: int
    ledger: Mapping[tuple[tuple[int, ...], int], object]
    lowering: str = "exact"
    l: int = 1
    total: object = field(init=False)

    def __post_init__(self):
        tot = 0
        for v in self.ledger.values():
            tot = tot + v
        object.__setattr__(self, "total", _expand(tot))

    @property
    def moment(self):
        """``E[p_M(lambda)] = N^(M+1) * total``."""
        return _expand(Fraction(self.N) ** (self.M + 1) * self.total)

    def get(self, k: Sequence[int], p: int):
        return self.ledger.get((tuple(k), p), 0)

    def to_records(self) -> list[dict]:
        return [
            {"signature": {"k": list(k), "p": p}, "value": str(v)}
            for (k, p), v in sorted(self.ledger.items())
        ]

    def to_json(self) -> str:
        return json.dumps(
            {
                "N": self.N,
                "theta": str(self.theta),
                "M": self.M,
                "lowering": self.lowering,
                "total": str(self.total),
                "moment": str(self.moment),
                "ledger": self.to_records(),
            }
        )


class _Context:
    def __init__(self, kappa, N, theta, lowering, max_l):
        if lowering not in LOWERING_MODES:
            raise SpecError(f"lowering must be one of {LOWERING_MODES}")
        self.N = N
        self.theta = theta
        self.lowering = lowering
        self.inv_N = Fraction(1, N)
        self.swap = _expand(theta * self.inv_N)
        self.raise_coef = [None] + [
            _expand(kappa(l) * theta ** (1 - l)) for l in range(1, max_l + 1)
        ]


def _bump(e, i, di, j=None, dj=0):
    e = list(e)
    e[i] += di
    if j is not None:
        e[j] += dj
    return tuple(e)


def _step(state, ctx, var, budget_left, track=True):
    # state maps (exponents, k, p) -> coefficient; budget_left bounds the
    # total degree after this step
    out = defaultdict(int)
    N = ctx.N
    for (e, kv, p), c in state.items():
        d = e[var]
        deg = sum(e)
        for l in range(1, budget_left - deg + 2):
            co = ctx.raise_coef[l]
            if co != 0:
                out[(_bump(e, var, l - 1), kv, p)] += c * co
        if d > 0:
            key = (_bump(e, var, -1), kv, p + 1 if track else p)
            out[key] += c * d * ctx.inv_N
        n_low = 0
        for j in range(N):
            if j == var:
                continue
            q = e[j]
            if d == q:
                continue
            kj = _bump(kv, j, 1) if track else kv
            if d > q:
                n_low += 1
                for a in range(1, d - q):
                    out[(_bump(e, var, -1 - a, j, a), kj, p)] += c * ctx.swap
            else:
                for a in range(q - d):
                    out[(_bump(e, var, q - 1 - a - d, j, d + a - q), kj, p)] -= c * ctx.swap
        if d > 0:
            f = n_low * ctx.inv_N if ctx.lowering == "exact" else 1
            if f != 0:
                out[(_bump(e, var, -1), kv, p)] += c * ctx.theta * f
    return {k: v for k, v in ((k, _expand(v)) for k, v in out.items()) if v != 0}


def apply_step(poly: Mapping[tuple[int, ...], object], op: OperatorStep, N: int, theta, cum, var: int = 0):
    """Image of ``poly`` (exponent tuple -> coefficient) under one operator.

    ``raise`` multiplies by ``kappa_l theta^(1-l) z_var^(l-1)``, ``lower``
    applies the exact ``theta (N-1-Y) / N`` lowering, ``swap`` the remainder
    ``(theta/N) Delta d_j`` and ``partial`` ``(1/N) d/dz_var``.
    """
    kappa = _kappa_lookup(cum, N, op.arg if op.tag == "raise" else 1)
    inv_N = Fraction(1, N)
    out = defaultdict(int)
    for e, c in poly.items():
        e = tuple(e)
        d = e[var]
        if op.tag == "raise":
            l = op.arg
            out[_bump(e, var, l - 1)] += c * kappa(l) * theta ** (1 - l)
        elif op.tag == "partial":
            if d > 0:
                out[_bump(e, var, -1)] += c * d * inv_N
        elif op.tag == "lower":
            n_low = sum(1 for j in range(N) if j != var and e[j] < d)
            if d > 0 and n_low:
                out[_bump(e, var, -1)] += c * theta * n_low * inv_N
        elif op.tag == "swap":
            j = op.arg
            if j == var or not 0 <= j < N:
                raise ValueError("swap needs a variable other than the acting one")
            q = e[j]
            if d > q:
                for a in range(1, d - q):
                    out[_bump(e, var, -1 - a, j, a)] += c * theta * inv_N
            elif d < q:
                for a in range(q - d):
                    out[_bump(e, var, q - 1 - a - d, j, d + a - q)] -= c * theta * inv_N
        else:
            raise ValueError(f"unknown operator {op.tag!r}")
    return {k: v for k, v in out.items() if v != 0}


def _kappa_lookup(source, N, max_l):
    if isinstance(source, EnsembleSpec):
        cum = cumulants(source, "finite", max_index=max(max_l, 1), N=N)
        return cum.__getitem__
    if isinstance(source, CumulantSequence):
        return source.__getitem__
    if isinstance(source, Mapping):
        return lambda l: source.get(l, 0)
    if callable(source):
        return source
    seq = list(source)
    return lambda l: seq[l - 1] if l <= len(seq) else 0


def dunkl_moment(
    spec,
    N: int,
    theta,
    M: int,
    lowering: str = "exact",
    var: int = 0,
    budget: int = TERM_BUDGET,
) -> DunklExpansion:
    """Expand ``(N^-1 D_1)^M G`` at zero and classify every term.

    Parameters
    ----------
    spec : EnsembleSpec, CumulantSequence, sequence or callable
        Source of the finite-N cumulants ``kappa_l(N)``; sequences and
        callables may hold symbolic values.
    theta : rational or symbol
        ``beta / 2``.
    lowering : {"exact", "simplified"}
        See the module docstring.
    var : int
        Acting variable; by symmetry any choice gives the same ledger.

    Returns
    -------
    DunklExpansion
        ``expansion.moment`` is ``E[p_M(lambda)]`` in exact mode.
    """
    if N < 1 or M < 0:
        raise ValueError("need N >= 1 and M >= 0")
    if isinstance(theta, (int, str)):
        theta = Fraction(theta)
    kappa = _kappa_lookup(spec, N, M)
    ctx = _Context(kappa, N, theta, lowering, M)
    zero = (0,) * N
    state = {(zero, zero, 0): 1}
    for step in range(M):
        state = _step(state, ctx, var, M - step - 1)
        if len(state) > budget:
            raise TermBudgetExceeded(f"{len(state)} terms after step {step + 1}")
    ledger = defaultdict(int)
    for (e, kv, p), c in state.items():
        k = tuple(x for j, x in enumerate(kv) if j != var)
        ledger[(k, p)] += c
    if M >= 1:
        ledger.setdefault(((0,) * (N - 1), 0), 0)
    ledger = {k: _expand(v) for k, v in ledger.items()}
    return DunklExpansion(N, theta, M, ledger, lowering)


def dunkl_joint_moment(
    spec,
    N: int,
    theta,
    powers: Sequence[int],
    lowering: str = "exact",
    budget: int = TERM_BUDGET,
):
    """Exact ``E[prod_i p_{k_i}(lambda)]`` from iterated symmetric Dunkl powers."""
    if N < 1 or any(k < 1 for k in powers):
        raise ValueError("need N >= 1 and positive powers")
    if isinstance(theta, (int, str)):
        theta = Fraction(theta)
    total_steps = sum(powers)
    kappa = _kappa_lookup(spec, N, total_steps)
    ctx = _Context(kappa, N, theta, lowering, max(total_steps, 1))
    zero = (0,) * N
    h = {(zero, (), 0): 1}
    done = 0
    for k in powers:
        acc = defaultdict(int)
        for var in range(N):
            state = h
            for i in range(k):
                state = _step(state, ctx, var, total_steps - done - i - 1, track=False)
                if len(state) > budget:
                    raise TermBudgetExceeded(f"{len(state)} terms")
            for key, c in state.items():
                acc[key] += c
        done += k
        h = {key: _expand(v) for key, v in acc.items() if v != 0}
    const = h.get((zero, (), 0), 0)
    return _expand(Fraction(N) ** total_steps * const)


def walk_functional(walk: LukasiewiczWalk, signature, N: int, theta):
    """Walk-level weight ``I_(k,p)`` of a signature class.

    Supported: ``k = 0`` with any ``p``, giving
    ``(N theta)^-p e_p(heights before the down steps)``; and a single
    variable swapped twice with ``p = 0``, giving
    ``-(1/N^2) sum_{down t} W(t)`` for that variable. Summing the latter
    over the ``N - 1`` variables gives the ``-(N-1)/N^2`` form.
    """
    k, p = signature
    k = tuple(k)
    h = walk.heights
    downs = walk.down_steps
    if all(x == 0 for x in k):
        before = [h[t - 1] for t in downs]
        # elementary symmetric polynomial e_p of the heights
        e = [1] + [0] * p
        for x in before:
            for i in range(p, 0, -1):
                e[i] += e[i - 1] * x
        return _expand(e[p] / (Fraction(N) * theta) ** p)
    if sorted(k)[-1] == 2 and sum(k) == 2 and p == 0:
        return Fraction(-sum(h[t] for t in downs), N * N)
    raise UnsupportedSignature(f"no walk functional for signature {signature}")


def class_prediction(signature, cum, M: int, N: int, theta):
    """``sum_walks I_(k,p) w`` over all excursions of length M."""
    total = 0
    for walk in enumerate_walks(M):
        I = walk_functional(walk, signature, N, theta)
        if I != 0:
            total = total + I * walk_weight(walk, cum)
    return _expand(total)


def classify_against_walks(expansion: DunklExpansion, cum) -> dict:
    """Check ledger classes against moments and walk functionals.

    Needs a ``"simplified"`` expansion. The walk class must equal the free
    moment; every ``(0, p)`` class and every single-variable double-swap
    class must equal its walk-functional sum.

    Returns
    -------
    dict
        ``signature -> (ledger value, predicted value)`` for every checked
        class.

    Raises
    ------
    MismatchReport
        At the first disagreeing class.
    """
    if expansion.lowering != "simplified":
        raise ValueError("walk classes match only the simplified expansion")
    N, M, theta = expansion.N, expansion.M, expansion.theta
    zero = (0,) * (N - 1)
    report = {}
    if M >= 1:
        sig = (zero, 0)
        got, want = expansion.get(*sig), moment_nc(cum, M)
        report[sig] = (got, want)
        if not _is_zero(got - want):
            raise MismatchReport(sig, got, want)
    sigs = [(zero, p) for p in range(1, M + 1)]
    for j in range(N - 1):
        k = [0] * (N - 1)
        k[j] = 2
        sigs.append((tuple(k), 0))
    for sig in sigs:
        got = expansion.get(*sig)
        want = class_prediction(sig, cum, M, N, theta)
        report[sig] = (got, want)
        if not _is_zero(got - want):
            raise MismatchReport(sig, got, want)
    return report
