"""Matrix models: tridiagonal beta ensembles and dense beta = 1, 2 additions.

Normalization: the Gaussian ensemble has density proportional to
``|Delta|^beta exp(-beta sum lambda^2 / (4N))`` and the Laguerre ensemble
``|Delta|^beta prod lambda^(beta/2 (L-N+1) - 1) exp(-beta lambda / 2)``.
These are the laws whose Bessel generating functions carry the free
cumulants of ``freeprob`` with ``theta = beta/2``; in particular the edges
sit at ``mu_+ N`` and fluctuate on the scale ``N^(1/3)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.linalg import eigvalsh_tridiagonal

from .edge import EdgeParameters, edge_parameters
from .freeprob import EnsembleSpec, voiculescu
from .stochastics import make_rng, tail_fit

__all__ = [
    "TridiagonalModel",
    "SpectrumSample",
    "tridiagonal_model",
    "sample_spectrum",
    "sample_classical_addition",
    "classical_addition_batch",
    "empirical_power_sum",
    "empirical_laplace",
    "rescaled_top",
    "edge_universality_experiment",
    "largest_eigenvalue_tail",
    "TRACY_WIDOM_MEAN",
]

# means of the Tracy-Widom laws (Bornemann, Math. Comp. 79, 2010)
TRACY_WIDOM_MEAN = {1: -1.2065335745820, 2: -1.7710868074116, 4: -2.3068848932410}


@dataclass(frozen=True)
class TridiagonalModel:
    """Symmetric tridiagonal matrix with the ensemble's eigenvalue law."""

    kind: str
    N: int
    L: int | None
    beta: float
    diagonal: np.ndarray
    offdiagonal: np.ndarray

    def eigenvalues(self, top: int | None = None) -> np.ndarray:
        """Eigenvalues in descending order; only the ``top`` largest if given."""
        if top is not None and top < self.N:
            vals = eigvalsh_tridiagonal(
                self.diagonal, self.offdiagonal, select="i", select_range=(self.N - top, self.N - 1)
            )
        else:
            vals = eigvalsh_tridiagonal(self.diagonal, self.offdiagonal)
        return vals[::-1]


@dataclass(frozen=True)
class SpectrumSample:
    """Eigenvalues sorted in descending order with provenance."""

    eigenvalues: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ev = np.sort(np.asarray(self.eigenvalues, dtype=float))[::-1]
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def N(self) -> int:
        return int(self.metadata.get("N", self.eigenvalues.size))


def _chi(rng, df):
    return np.sqrt(rng.chisquare(df))


def tridiagonal_model(kind: str, N: int, L: int | None, beta: float, rng: np.random.Generator) -> TridiagonalModel:
    """Dumitriu-Edelman model rescaled to this package's normalization.

    ``gaussian_beta``: ``sqrt(2N/beta)`` times ``tridiag(N(0,1), chi_{beta(N-i)}/sqrt 2)``.
    ``laguerre_beta``: ``B B^T / beta`` with ``B`` lower bidiagonal,
    diagonal ``chi_{beta(L-i+1)}`` and subdiagonal ``chi_{beta(N-i)}``.
    """
    if N < 1 or beta <= 0:
        raise ValueError("need N >= 1 and beta > 0")
    i = np.arange(1, N)
    if kind == "gaussian_beta":
        s = math.sqrt(2 * N / beta)
        d = s * rng.standard_normal(N)
        e = s * _chi(rng, beta * (N - i)) / math.sqrt(2)
        return TridiagonalModel(kind, N, None, beta, d, e)
    if kind == "laguerre_beta":
        if L is None or L < N:
            raise ValueError("Laguerre model needs L >= N")
        b = _chi(rng, beta * (L - np.arange(N)))
        c = _chi(rng, beta * (N - i))
        d = b**2
        d[1:] += c**2
        e = b[:-1] * c
        return TridiagonalModel(kind, N, L, beta, d / beta, e / beta)
    raise ValueError(f"unknown kind {kind!r}")


def sample_spectrum(
    kind: str, N: int, L: int | None, beta: float, rng: np.random.Generator, top: int | None = None
) -> SpectrumSample:
    """Eigenvalues of one tridiagonal draw (``top`` largest only if given)."""
    model = tridiagonal_model(kind, N, L, beta, rng)
    return SpectrumSample(model.eigenvalues(top), {"kind": kind, "N": N, "L": L, "beta": beta})


def _gaussian_dense(rng, size, N, beta):
    X = rng.standard_normal((size, N, N))
    if beta == 2:
        X = (X + 1j * rng.standard_normal((size, N, N))) / math.sqrt(2)
    return math.sqrt(N) * (X + np.conj(np.swapaxes(X, 1, 2))) / math.sqrt(2)


def _wishart_dense(rng, size, N, L, beta):
    Y = rng.standard_normal((size, N, L))
    if beta == 2:
        Y = (Y + 1j * rng.standard_normal((size, N, L))) / math.sqrt(2)
    return Y @ np.conj(np.swapaxes(Y, 1, 2))


def classical_addition_batch(spec: EnsembleSpec, N: int, beta: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """``(size, N)`` eigenvalues (ascending) of ``sqrt(delta) G + sum alpha_i W_i``."""
    if beta not in (1, 2):
        raise ValueError("dense models exist only for beta in {1, 2}")
    dtype = complex if beta == 2 else float
    H = np.zeros((size, N, N), dtype=dtype)
    if spec.delta:
        H = H + math.sqrt(spec.delta) * _gaussian_dense(rng, size, N, beta)
    for c in spec.components:
        L = c.width(N)
        if L < N:
            raise ValueError("Laguerre blocks need L >= N")
        H = H + float(c.alpha) * _wishart_dense(rng, size, N, L, beta)
    if spec.centering == "centered":
        shift = sum(float(c.alpha) * c.width(N) / N for c in spec.components)
        H = H - shift * np.eye(N)
    return np.linalg.eigvalsh(H)


def sample_classical_addition(spec: EnsembleSpec, N: int, beta: int, rng: np.random.Generator) -> SpectrumSample:
    """One dense draw of the beta = 1 or 2 matrix addition."""
    ev = classical_addition_batch(spec, N, beta, 1, rng)[0]
    return SpectrumSample(ev, {"spec": spec.to_dict(), "N": N, "beta": beta})


def empirical_power_sum(sample: SpectrumSample, M: int, params: EdgeParameters) -> float:
    """``sum_i (lambda_i / (mu_+ N))^M``."""
    N = sample.N
    return float(np.sum((sample.eigenvalues / (params.mu_plus * N)) ** M))


def empirical_laplace(sample: SpectrumSample, T: float, params: EdgeParameters) -> float:
    """``sum_i exp(T lambda'_i / mu_+)`` with ``lambda' = (lambda - mu_+ N) / N^(1/3)``."""
    N = sample.N
    lam = (sample.eigenvalues - params.mu_plus * N) / N ** (1 / 3)
    return float(np.sum(np.exp(T * lam / params.mu_plus)))


def rescaled_top(eigenvalues: np.ndarray, N: int, params: EdgeParameters) -> np.ndarray:
    """``lambda'_1 / C_0`` from each row's largest eigenvalue."""
    top = np.max(np.atleast_2d(eigenvalues), axis=1)
    return (top - params.mu_plus * N) / N ** (1 / 3) / params.c0


def _top_eigenvalues(spec, N, beta, reps, seed, top=1):
    # tridiagonal when the spec is a single ensemble, dense otherwise
    out = np.empty((reps, top))
    comps = spec.components
    single_lag = len(comps) == 1 and spec.delta == 0 and comps[0].alpha > 0
    gauss = not comps
    for r in range(reps):
        rng = make_rng(seed, r)
        if single_lag:
            c = comps[0]
            ev = tridiagonal_model("laguerre_beta", N, c.width(N), beta, rng).eigenvalues(top)
            ev = float(c.alpha) * ev
            if spec.centering == "centered":
                ev = ev - float(c.alpha) * c.width(N) / N
        elif gauss:
            ev = math.sqrt(spec.delta) * tridiagonal_model("gaussian_beta", N, None, beta, rng).eigenvalues(top)
        else:
            ev = classical_addition_batch(spec, N, beta, 1, rng)[0][::-1][:top]
        out[r] = ev[:top]
    return out


def edge_universality_experiment(
    specs: Sequence[EnsembleSpec], betas: Sequence[float], N: int, reps: int, seed
) -> dict:
    """Rescaled top eigenvalue ``lambda'_1 / C_0`` per (spec, beta) and pairwise KS tests.

    Finite-N edge parameters are used for the centering and scale.
    """
    samples = {}
    for b in betas:
        for si, spec in enumerate(specs):
            params = edge_parameters(voiculescu(spec, N))
            top = _top_eigenvalues(spec, N, b, reps, (seed, si, int(b * 1000)))
            samples[(si, b)] = rescaled_top(top, N, params)
    report = {"N": N, "reps": reps, "seed": seed, "summary": [], "ks": []}
    for (si, b), x in samples.items():
        report["summary"].append(
            {"spec": si, "beta": b, "mean": float(x.mean()), "std": float(x.std(ddof=1))}
        )
    for b in betas:
        for i, j in itertools.combinations(range(len(specs)), 2):
            res = stats.ks_2samp(samples[(i, b)], samples[(j, b)])
            report["ks"].append(
                {"beta": b, "pair": [i, j], "statistic": float(res.statistic), "pvalue": float(res.pvalue)}
            )
    report["samples"] = samples
    return report


def largest_eigenvalue_tail(
    spec: EnsembleSpec, N: int, beta: float, reps: int, xs: Sequence[float], seed
) -> dict:
    """Empirical ``P[lambda_1 > (1+x) mu_+(N) N]`` and its fit against ``x^(3/2)``."""
    params = edge_parameters(voiculescu(spec, N))
    top = _top_eigenvalues(spec, N, beta, reps, seed)[:, 0]
    thresh = (1 + np.asarray(xs)) * params.mu_plus * N
    counts = np.array([(top > t).sum() for t in thresh])
    probs = counts / reps
    slope, intercept, r2, npts = tail_fit(xs, probs, counts, power=1.5)
    return {
        "x": list(map(float, xs)),
        "prob": probs.tolist(),
        "count": counts.tolist(),
        "slope": slope,
        "r2": r2,
        "n_points": npts,
    }
