"""Ensemble specifications, exact free cumulants and the Voiculescu transform.

An ensemble is the beta-addition of a Gaussian part of weight ``delta`` and
finitely many Laguerre parts ``alpha_i * L(gamma_i)``. Its free cumulants are

    kappa_l = delta * [l == 2] + sum_i alpha_i**l * gamma_i

in the limit, and the same with ``gamma_i`` replaced by ``L_i / N`` at finite
size. Everything here is exact (``fractions.Fraction``) unless a float is
passed in explicitly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._series import series_pow
from .errors import EnumerationTooLarge, NegativeCumulant, PoleEvaluation, SpecError

__all__ = [
    "Component",
    "EnsembleSpec",
    "CumulantSequence",
    "VoiculescuTransform",
    "cumulants",
    "voiculescu",
    "voiculescu_eval",
    "moment_nc",
    "moment_coefficient",
    "to_fraction",
]

NC_BOUND = 14


def to_fraction(x) -> Fraction:
    """Parse ints, Fractions and strings like ``"3"``, ``"0.25"`` or ``"1/2"``."""
    if isinstance(x, bool):
        raise SpecError(f"not a rational: {x!r}")
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except ValueError as exc:
            raise SpecError(f"not a rational: {x!r}") from exc
    if isinstance(x, float):
        return Fraction(x)
    raise SpecError(f"not a rational: {x!r}")


@dataclass(frozen=True)
class Component:
    """One Laguerre summand ``alpha * L``.

    Exactly one of ``gamma`` (limiting ratio L/N) or ``L`` (fixed integer
    width) is usually given; both may be set, in which case ``L`` wins at
    finite size and ``gamma`` in the limit.
    """

    alpha: Fraction
    gamma: Fraction | None = None
    L: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", to_fraction(self.alpha))
        if self.alpha == 0:
            raise SpecError("alpha must be nonzero")
        if self.gamma is None and self.L is None:
            raise SpecError("component needs gamma or L")
        if self.gamma is not None:
            object.__setattr__(self, "gamma", to_fraction(self.gamma))
            if self.gamma <= 0:
                raise SpecError("gamma must be positive")
        if self.L is not None:
            if to_fraction(self.L).denominator != 1 or int(self.L) < 1:
                raise SpecError("L must be a positive integer")
            object.__setattr__(self, "L", int(self.L))

    def width(self, N: int) -> int:
        """Laguerre width at size N; ``ceil(gamma * N)`` when only gamma is known."""
        if self.L is not None:
            return self.L
        return math.ceil(self.gamma * N)

    def to_dict(self) -> dict:
        d = {"alpha": str(self.alpha)}
        if self.gamma is not None:
            d["gamma"] = str(self.gamma)
        if self.L is not None:
            d["L"] = self.L
        return d


@dataclass(frozen=True)
class EnsembleSpec:
    """Parameters ``(delta, {(alpha_i, gamma_i or L_i)})`` of a beta-addition.

    Parameters
    ----------
    delta : rational
        Gaussian weight, nonnegative.
    components : sequence of Component or mappings
        Laguerre summands ordered by strictly decreasing ``|alpha|``.
    centering : {"uncentered", "centered"}
        ``"centered"`` forces ``kappa_1 = 0``, i.e. shifts the spectrum by
        ``-sum alpha_i gamma_i``.
    check_index : int
        Cumulants ``kappa_1 .. kappa_check_index`` must all be nonnegative.
    """

    delta: Fraction = Fraction(0)
    components: tuple[Component, ...] = ()
    centering: str = "uncentered"
    check_index: int = field(default=32, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "delta", to_fraction(self.delta))
        comps = tuple(
            c if isinstance(c, Component) else Component(**dict(c))
            for c in self.components
        )
        object.__setattr__(self, "components", comps)
        if self.delta < 0:
            raise SpecError("delta must be nonnegative")
        if self.centering not in ("uncentered", "centered"):
            raise SpecError(f"unknown centering {self.centering!r}")
        mags = [abs(c.alpha) for c in comps]
        if any(a <= b for a, b in zip(mags, mags[1:])):
            raise SpecError("|alpha_i| must be strictly decreasing")
        if self.delta == 0 and not comps:
            raise SpecError("empty spec: need delta > 0 or a component")
        for l in range(1, self.check_index + 1):
            val = self._raw(l, None, sign_only=True)
            if val < 0:
                raise NegativeCumulant(l, val)

    @property
    def is_limiting(self) -> bool:
        """True when every component carries a limiting ratio gamma."""
        return all(c.gamma is not None for c in self.components)

    @property
    def is_gaussian_only(self) -> bool:
        return not self.components

    def _raw(self, l: int, N: int | None, sign_only: bool = False) -> Fraction:
        if l == 1 and self.centering == "centered":
            return Fraction(0)
        total = self.delta if l == 2 else Fraction(0)
        for c in self.components:
            if sign_only:
                # the sign of kappa_l does not depend on N
                w = c.gamma if c.gamma is not None else Fraction(c.L)
            elif N is None:
                if c.gamma is None:
                    raise SpecError("limiting cumulants need gamma for every component")
                w = c.gamma
            else:
                w = Fraction(c.width(N), N)
            total += c.alpha**l * w
        return total

    def kappa(self, l: int, N: int | None = None) -> Fraction:
        """Closed-form cumulant, limiting when ``N`` is None."""
        if l < 1:
            raise ValueError("cumulant index starts at 1")
        return self._raw(l, N)

    def weights(self, N: int | None = None) -> tuple[Fraction, ...]:
        """Per-component ratios: gamma_i, or L_i / N at finite size."""
        if N is None:
            if not self.is_limiting:
                raise SpecError("limiting weights need gamma for every component")
            return tuple(c.gamma for c in self.components)
        return tuple(Fraction(c.width(N), N) for c in self.components)

    # construction helpers

    @classmethod
    def semicircle(cls, delta=1) -> EnsembleSpec:
        return cls(delta=delta)

    @classmethod
    def marchenko_pastur(cls, gamma=1, alpha=1, centering="uncentered") -> EnsembleSpec:
        return cls(components=(Component(alpha, gamma=gamma),), centering=centering)

    @classmethod
    def laguerre(cls, L: int, alpha=1, centering="uncentered") -> EnsembleSpec:
        return cls(components=(Component(alpha, L=L),), centering=centering)

    @classmethod
    def from_dict(cls, d: Mapping) -> EnsembleSpec:
        unknown = set(d) - {"delta", "components", "centering"}
        if unknown:
            raise SpecError(f"unknown spec fields: {sorted(unknown)}")
        comps = []
        for c in d.get("components", []):
            extra = set(c) - {"alpha", "gamma", "L"}
            if extra:
                raise SpecError(f"unknown component fields: {sorted(extra)}")
            if "alpha" not in c:
                raise SpecError("component missing alpha")
            L = c.get("L")
            if L is not None:
                L = to_fraction(L)
                if L.denominator != 1:
                    raise SpecError("L must be an integer")
                L = int(L)
            comps.append(Component(c["alpha"], gamma=c.get("gamma"), L=L))
        return cls(
            delta=d.get("delta", 0),
            components=tuple(comps),
            centering=d.get("centering", "uncentered"),
        )

    @classmethod
    def from_json(cls, source: str | Path) -> EnsembleSpec:
        """Load from a JSON file path or a JSON string."""
        text = str(source)
        if not text.lstrip().startswith("{"):
            text = Path(source).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid spec JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "delta": str(self.delta),
            "components": [c.to_dict() for c in self.components],
            "centering": self.centering,
        }


@dataclass(frozen=True)
class CumulantSequence:
    """Exact free cumulants ``kappa_1 .. kappa_max_index``.

    Indexing past ``max_index`` falls back to the closed form when the
    sequence came from a spec, so the map is effectively lazy.
    """

    values: tuple
    N: int | None = None
    spec: EnsembleSpec | None = None

    @property
    def kind(self) -> str:
        return "limiting" if self.N is None else "finite"

    @property
    def max_index(self) -> int:
        return len(self.values)

    def __getitem__(self, l: int):
        if l < 1:
            raise IndexError("cumulant index starts at 1")
        if l <= len(self.values):
            return self.values[l - 1]
        if self.spec is None:
            raise IndexError(f"kappa_{l} beyond stored range {len(self.values)}")
        val = self.spec.kappa(l, self.N)
        if val < 0:
            raise NegativeCumulant(l, val)
        return val

    def upto(self, n: int) -> list:
        return [self[l] for l in range(1, n + 1)]

    @classmethod
    def from_values(cls, values: Iterable, N: int | None = None) -> CumulantSequence:
        """Wrap arbitrary cumulants (rational or symbolic); no sign check."""
        return cls(tuple(values), N=N)


def cumulants(
    spec: EnsembleSpec, kind: str = "limiting", max_index: int = 8, N: int | None = None
) -> CumulantSequence:
    """Exact cumulants of ``spec``.

    Parameters
    ----------
    kind : {"limiting", "finite"}
        Finite-size cumulants need ``N`` and use ``L_i = ceil(gamma_i N)``
        unless the component fixes ``L``.

    Raises
    ------
    NegativeCumulant
        If any of the requested cumulants is negative.
    """
    if max_index < 1:
        raise ValueError("max_index must be >= 1")
    if kind == "limiting":
        N = None
    elif kind == "finite":
        if N is None or N < 1:
            raise SpecError("finite cumulants need a positive N")
        for c in spec.components:
            if c.width(N) < N:
                raise SpecError(f"L = {c.width(N)} < N = {N}: L_i/N must be >= 1")
    else:
        raise SpecError(f"unknown cumulant kind {kind!r}")
    vals = []
    for l in range(1, max_index + 1):
        v = spec.kappa(l, N)
        if v < 0:
            raise NegativeCumulant(l, v)
        vals.append(v)
    return CumulantSequence(tuple(vals), N=N, spec=spec)


def _is_exact(z) -> bool:
    return isinstance(z, Rational) and not isinstance(z, bool)


@dataclass(frozen=True)
class VoiculescuTransform:
    """Closed form ``V(z) = 1/z + c + delta z + sum_i w_i a_i / (1 - a_i z)``.

    ``w_i`` is gamma_i (limiting) or L_i/N, and ``c = -sum w_i a_i`` in
    centered mode so that the z^0 coefficient vanishes.
    """

    source: CumulantSequence
    delta: Fraction
    alphas: tuple[Fraction, ...]
    weights: tuple[Fraction, ...]
    shift: Fraction = Fraction(0)

    @property
    def poles(self) -> tuple[Fraction, ...]:
        return (Fraction(0),) + tuple(1 / a for a in self.alphas)

    @property
    def alpha1(self) -> Fraction | None:
        return self.alphas[0] if self.alphas else None

    def __call__(self, z, order: int = 0):
        return voiculescu_eval(self, z, order)

    def series_eval(self, z, terms: int):
        """Truncated ``1/z + sum_{l <= terms} kappa_l z^(l-1)``."""
        return 1 / z + sum(self.source[l] * z ** (l - 1) for l in range(1, terms + 1))


def voiculescu(spec: EnsembleSpec, N: int | None = None) -> VoiculescuTransform:
    """Voiculescu transform of ``spec``, limiting or at size ``N``."""
    kind = "limiting" if N is None else "finite"
    cum = cumulants(spec, kind, max_index=3, N=N)
    weights = spec.weights(N)
    alphas = tuple(c.alpha for c in spec.components)
    shift = Fraction(0)
    if spec.centering == "centered":
        shift = -sum((w * a for w, a in zip(weights, alphas)), Fraction(0))
    return VoiculescuTransform(cum, spec.delta, alphas, weights, shift)


def voiculescu_eval(vt: VoiculescuTransform, z, derivative_order: int = 0):
    """Evaluate ``V`` or one of its first three derivatives.

    Exact for rational ``z``; float, complex and numpy inputs use floating
    point.

    Raises
    ------
    PoleEvaluation
        If ``z`` is exactly 0 or ``1/alpha_i``.
    """
    n = derivative_order
    if n not in (0, 1, 2, 3):
        raise ValueError("derivative_order must be 0, 1, 2 or 3")
    if _is_exact(z):
        z = Fraction(z)
        if z == 0 or any(a * z == 1 for a in vt.alphas):
            raise PoleEvaluation(f"V has a pole at z = {z}")
        delta, shift = vt.delta, vt.shift
        alphas, weights = vt.alphas, vt.weights
    else:
        zarr = np.asarray(z)
        if np.any(zarr == 0) or any(np.any(float(a) * zarr == 1) for a in vt.alphas):
            raise PoleEvaluation("V evaluated at a pole")
        delta, shift = float(vt.delta), float(vt.shift)
        alphas = tuple(float(a) for a in vt.alphas)
        weights = tuple(float(w) for w in vt.weights)
    fact = math.factorial(n)
    out = (-1) ** n * fact / z ** (n + 1)
    if n == 0:
        out = out + shift + delta * z
    elif n == 1:
        out = out + delta
    for a, w in zip(alphas, weights):
        out = out + fact * w * a ** (n + 1) / (1 - a * z) ** (n + 1)
    return out


def moment_nc(cum: CumulantSequence | Sequence, M: int, bound: int = NC_BOUND):
    """Moment ``m_M`` as a sum over non-crossing partitions of products of cumulants.

    The block containing the first element splits the remaining elements
    into gaps that are partitioned independently, so the sum factorizes
    over gaps and is accumulated by gap length.

    Raises
    ------
    EnumerationTooLarge
        If ``M > bound``.
    """
    if M < 0:
        raise ValueError("M must be nonnegative")
    if M > bound:
        raise EnumerationTooLarge(f"NC({M}) enumeration exceeds bound {bound}")
    kappa = _as_lookup(cum)
    kap = [None] + [kappa(l) for l in range(1, M + 1)]
    # S[n] = sum over NC partitions of n points
    S = [1]
    for n in range(1, M + 1):
        total = 0
        rest = n - 1
        for mask in range(1 << rest):
            size = 1 + bin(mask).count("1")
            if kap[size] == 0:
                continue
            term = kap[size]
            gap = 0
            for i in range(rest):
                if mask >> i & 1:
                    term = term * S[gap]
                    gap = 0
                else:
                    gap += 1
            total = total + term * S[gap]
        S.append(total.expand() if hasattr(total, "expand") else total)
    return Fraction(S[M]) if isinstance(S[M], int) else S[M]


def moment_coefficient(cum: CumulantSequence | Sequence, M: int):
    """Moment ``m_M = [z^-1] V(z)^(M+1) / (M+1)`` by exact series arithmetic.

    With ``V(z) = (1 + sum kappa_l z^l) / z`` this is the coefficient of
    ``z^M`` in ``(1 + sum kappa_l z^l)^(M+1)``.
    """
    if M < 0:
        raise ValueError("M must be nonnegative")
    kappa = _as_lookup(cum)
    coeffs = [1] + [kappa(l) for l in range(1, M + 1)]
    c = series_pow(coeffs, M + 1, M)[M]
    out = Fraction(1, M + 1) * c
    return out.expand() if hasattr(out, "expand") else out


def _as_lookup(cum):
    if isinstance(cum, CumulantSequence):
        return cum.__getitem__
    if isinstance(cum, Mapping):
        return cum.__getitem__
    seq = list(cum)
    return lambda l: seq[l - 1]
