"""Critical point, edge parameters and saddle-point asymptotics of moments.

The right edge of the limiting spectrum is ``mu_+ = V(z_c)`` where ``z_c``
is the unique root of ``V'`` on ``(0, 1/alpha_1)``. Moments grow like
``mu_+^M M^(-3/2)`` with a constant fixed by ``V(z_c)`` and ``V''(z_c)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import NoConvergence, NoSignChange, PureGaussianSpec
from .freeprob import EnsembleSpec, VoiculescuTransform, voiculescu, voiculescu_eval

__all__ = [
    "EdgeParameters",
    "critical_point",
    "edge_parameters",
    "universality_residual",
    "contour_moment",
    "steepest_descent_moment",
    "free_start_asymptotic",
    "free_start_survival_constant",
    "critical_point_drift",
]

MAX_ITER = 200


@dataclass(frozen=True)
class EdgeParameters:
    """Edge data derived from ``V`` at its critical point."""

    z_c: float
    mu_plus: float
    sigma2: float
    p_minus1: float
    c0: float
    f2: float
    single_saddle: bool = True

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def to_dict(self) -> dict:
        return asdict(self)


def critical_point(vt: VoiculescuTransform) -> float:
    """Root of ``V'`` on ``(0, 1/alpha_1)`` by bisection.

    ``V'`` increases from ``-inf`` to ``+inf`` on that interval, so
    bisection cannot fail once the bracket is valid. It runs until the
    bracket stops shrinking, well past 1e-13 relative. Gaussian-only specs
    use ``(0, inf)`` with a doubling search for the upper end.

    Raises
    ------
    NoSignChange
        If ``V'`` does not change sign on the admissible interval.
    """
    a1 = vt.alpha1
    if a1 is not None and a1 > 0:
        lo, hi = 0.0, 1.0 / float(a1)
    else:
        lo, hi = 0.0, 1.0
        for _ in range(MAX_ITER):
            if voiculescu_eval(vt, hi, 1) > 0:
                break
            lo, hi = hi, 2 * hi
        else:
            raise NoSignChange("V' stays negative on (0, inf)")
    for _ in range(MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if voiculescu_eval(vt, mid, 1) < 0:
            lo = mid
        else:
            hi = mid
    z = 0.5 * (lo + hi)
    d1 = voiculescu_eval(vt, z, 1)
    d2 = voiculescu_eval(vt, z, 2)
    if not abs(d1) < 1e-10 * abs(d2):
        raise NoSignChange(f"bisection ended at z = {z} with V' = {d1}")
    return z


def edge_parameters(vt: VoiculescuTransform, z_c: float | None = None) -> EdgeParameters:
    """Edge parameters ``z_c, mu_+, sigma^2, P_-1, C_0`` and ``V''/V``."""
    if z_c is None:
        z_c = critical_point(vt)
    V = voiculescu_eval(vt, z_c, 0)
    V2 = voiculescu_eval(vt, z_c, 2)
    params = EdgeParameters(
        z_c=z_c,
        mu_plus=V,
        sigma2=z_c**2 * V2 / V,
        p_minus1=1.0 / (z_c * V),
        c0=2 ** (-1 / 3) * V2 ** (1 / 3),
        f2=V2 / V,
        single_saddle=bool(vt.alphas),
    )
    if not (z_c * V2 > 0 and V > 0 and params.sigma2 > 0 and 0 < params.p_minus1 < 1):
        raise ValueError(f"edge invariants violated: {params}")
    return params


def universality_residual(params: EdgeParameters) -> float:
    """``sigma P_-1 (mu_+ / (2 C_0))^(3/2) - 1/2``, zero for every valid spec."""
    p = params
    return p.sigma * p.p_minus1 * (p.mu_plus / (2 * p.c0)) ** 1.5 - 0.5


def _contour_sum(vt, M, n, z_c, V_c):
    # trapezoid rule on |z| = z_c using the upper half circle only
    phi = np.linspace(0.0, np.pi, n // 2 + 1)
    z = z_c * np.exp(1j * phi)
    vals = (voiculescu_eval(vt, z, 0) / V_c) ** (M + 1) * z
    w = np.full(phi.shape, 2.0)
    w[0] = w[-1] = 1.0
    return np.sum(w * vals.real) / n * V_c / (M + 1)


def contour_moment(
    vt: VoiculescuTransform,
    M: int,
    N_nodes: int = 1024,
    scaled: bool = False,
    max_nodes: int = 2**20,
) -> float:
    """Moment ``m_M`` from the contour integral of ``V^(M+1)`` around 0.

    Parameters
    ----------
    N_nodes : int
        Starting node count on the full circle; doubled until successive
        estimates agree to 1e-10 relative.
    scaled : bool
        Return ``m_M / V(z_c)^M`` instead, which stays finite for large M.

    Raises
    ------
    NoConvergence
        If ``max_nodes`` is reached first.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    z_c = critical_point(vt)
    V_c = voiculescu_eval(vt, z_c, 0)
    # floor below which differences are pure roundoff
    floor = 1e-14 * z_c * V_c / (M + 1)
    n = N_nodes
    prev = _contour_sum(vt, M, n, z_c, V_c)
    while n < max_nodes:
        n *= 2
        cur = _contour_sum(vt, M, n, z_c, V_c)
        if abs(cur - prev) <= max(1e-10 * abs(cur), floor):
            break
        prev = cur
    else:
        raise NoConvergence(f"contour quadrature unconverged at {n} nodes")
    return cur if scaled else cur * V_c**M


def steepest_descent_moment(params: EdgeParameters, M: int, scaled: bool = False) -> float:
    """Single-saddle asymptotic ``mu_+^M V^(3/2) / sqrt(2 pi V'') M^(-3/2)``.

    Raises
    ------
    PureGaussianSpec
        For Gaussian-only specs, which have two saddles at ``+-z_c``.
    """
    if not params.single_saddle:
        raise PureGaussianSpec("two symmetric saddles; single-saddle formula does not apply")
    const = params.mu_plus / math.sqrt(2 * math.pi * params.f2)
    out = const * M**-1.5
    return out if scaled else out * params.mu_plus**M


def free_start_asymptotic(vt: VoiculescuTransform, L: int, log: bool = False) -> float:
    """Asymptotic of ``(1/2 pi i) oint V(z)^(L+1) / (1 - z/z_c)^2 dz``.

    Equals ``sqrt(L+1) z_c^2 V(z_c)^(L+1) sqrt(V''/V) / sqrt(2 pi)``. Dividing
    by ``(L+1) V(z_c)^L`` gives the probability that a free-start walk of
    length L stays nonnegative.
    """
    p = edge_parameters(vt)
    if not p.single_saddle:
        raise PureGaussianSpec("two symmetric saddles; single-saddle formula does not apply")
    logval = (
        0.5 * math.log(L + 1)
        + 2 * math.log(p.z_c)
        + (L + 1) * math.log(p.mu_plus)
        + 0.5 * math.log(p.f2)
        - 0.5 * math.log(2 * math.pi)
    )
    return logval if log else math.exp(logval)


def free_start_survival_constant(params: EdgeParameters) -> float:
    """Limit of ``sqrt(L) P[walk stays >= 0]``: ``sigma / (P_-1 sqrt(2 pi))``."""
    return params.sigma / (params.p_minus1 * math.sqrt(2 * math.pi))


def critical_point_drift(spec: EnsembleSpec, N_list: Sequence[int]) -> list[tuple[int, float, float]]:
    """Rows ``(N, z_c(N), |z_c(N) - z_c| N^(2/3))`` under ``L_i = ceil(gamma_i N)``."""
    z_inf = critical_point(voiculescu(spec))
    rows = []
    for N in N_list:
        zN = critical_point(voiculescu(spec, N))
        rows.append((int(N), zN, abs(zN - z_inf) * N ** (2 / 3)))
    return rows
