"""Samplers and Monte Carlo estimators for walks and Brownian excursions.

The step law at ``z`` is ``P(-1) = 1/(z V(z))`` and ``P(l) = kappa_{l+1}
z^l / V(z)``; at the critical point it has mean zero, and walks
conditioned to be excursions are the weight-biased Łukasiewicz paths.

Randomness: every estimator splits its paths into fixed-size chunks and
gives chunk ``c`` its own Philox stream derived from ``(seed, c)``. Results
therefore do not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .combinatorics import LukasiewiczWalk
from .edge import EdgeParameters, critical_point
from .errors import NegativeCumulant, UnsupportedSignature, VarianceGuard
from .freeprob import EnsembleSpec, cumulants, voiculescu, voiculescu_eval

__all__ = [
    "StepDistribution",
    "ExcursionPath",
    "LocalTimeProfile",
    "MCEstimate",
    "make_rng",
    "step_distribution",
    "sample_steps",
    "sample_excursion",
    "sample_excursions",
    "downstep_fraction",
    "downstep_fractions",
    "max_tail_curve",
    "tail_fit",
    "free_start_survival",
    "sample_brownian_excursion",
    "brownian_excursions",
    "local_time_profile",
    "local_time_functional",
    "local_time_l2",
    "excursion_area_brownian",
    "excursion_area_walk",
    "airy_laplace_first_moment",
    "airy2_laplace_exact",
    "limiting_functional",
    "clt_marginal_check",
    "ks_two_sample",
]

CHUNK = 1000
TAIL_MASS = 1e-15
OCCUPATION_CELLS = 4_000_000


def make_rng(seed, index: int = 0) -> np.random.Generator:
    """Philox generator for stream ``index`` of ``seed``."""
    ss = np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(ss))


def _chunked(n: int, seed, fn: Callable, workers: int = 1, chunk: int = CHUNK):
    # fn(rng, size) -> array; chunks are concatenated in index order
    sizes = [min(chunk, n - i) for i in range(0, n, chunk)]
    jobs = [(make_rng(seed, c), s) for c, s in enumerate(sizes)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda a: fn(*a), jobs))
    else:
        parts = [fn(*a) for a in jobs]
    return np.concatenate(parts) if parts else np.empty(0)


@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with its standard error ``std / sqrt(n)``."""

    mean: float
    std_error: float
    n_samples: int
    seed: object = None
    params: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, x, seed=None, params=None) -> MCEstimate:
        x = np.asarray(x, dtype=float)
        n = x.size
        se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return cls(float(np.mean(x)), se, int(n), seed, dict(params or {}))

    def scaled(self, factor: float) -> MCEstimate:
        return MCEstimate(self.mean * factor, self.std_error * abs(factor), self.n_samples, self.seed, self.params)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n"] = d.pop("n_samples")
        return d


@dataclass(frozen=True)
class StepDistribution:
    """Step law on ``{-1, 0, ..., l_max}`` with a Vose alias table."""

    steps: np.ndarray
    probabilities: np.ndarray
    z: float
    normalizer: float
    _prob: np.ndarray = field(init=False, repr=False, compare=False)
    _alias: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        K = p.size
        scaled = p * K
        prob = np.zeros(K)
        alias = np.zeros(K, dtype=np.int64)
        small = [i for i in range(K) if scaled[i] < 1]
        large = [i for i in range(K) if scaled[i] >= 1]
        while small and large:
            s, l = small.pop(), large.pop()
            prob[s] = scaled[s]
            alias[s] = l
            scaled[l] -= 1 - scaled[s]
            (small if scaled[l] < 1 else large).append(l)
        for i in small + large:
            prob[i] = 1.0
        object.__setattr__(self, "_prob", prob)
        object.__setattr__(self, "_alias", alias)

    @property
    def mean(self) -> float:
        return float(np.dot(self.steps, self.probabilities))

    @property
    def variance(self) -> float:
        return float(np.dot(self.steps.astype(float) ** 2, self.probabilities) - self.mean**2)

    @property
    def p_down(self) -> float:
        return float(self.probabilities[0])

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """O(1)-per-draw alias sampling."""
        idx = rng.integers(0, self.steps.size, size=size)
        u = rng.random(size=size)
        pick = np.where(u < self._prob[idx], idx, self._alias[idx])
        return self.steps[pick]


def step_distribution(spec: EnsembleSpec, N: int | None = None, z: float | None = None) -> StepDistribution:
    """Step law of the walk at ``z`` (default ``z_c``), limiting or at size N.

    The support is cut at the first ``l_max`` whose geometric tail bound
    falls below 1e-15.
    """
    vt = voiculescu(spec, N)
    if z is None:
        z = critical_point(vt)
    z = float(z)
    V = float(voiculescu_eval(vt, z, 0))
    alphas = [float(a) for a in vt.alphas]
    weights = [float(w) for w in vt.weights]
    a_max = max((abs(a) for a in alphas), default=0.0)
    if a_max * z >= 1:
        raise ValueError("z must lie below 1/alpha_1")
    probs = [1.0 / (z * V)]
    l = 0
    while True:
        kappa = spec.kappa(l + 1, N)
        if kappa < 0:
            raise NegativeCumulant(l + 1, kappa)
        probs.append(float(kappa) * z**l / V)
        # bound on sum_{m > l} kappa_{m+1} z^m / V for m >= 2
        tail = sum(w * abs(a) ** (l + 2) * z ** (l + 1) for a, w in zip(alphas, weights))
        tail /= V * (1 - a_max * z) if a_max else 1.0
        if l >= 1 and tail < TAIL_MASS:
            break
        l += 1
    p = np.array(probs)
    p /= p.sum()
    return StepDistribution(np.arange(-1, l + 1), p, z, V)


def sample_steps(dist: StepDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    return dist.sample(rng, n)


def _excursion_batch(dist: StepDistribution, M: int, n: int, rng) -> np.ndarray:
    # cycle lemma: M+1 iid steps conditioned on sum -1, rotated after the
    # first time the partial sums reach their minimum, last step dropped
    L = M + 1
    steps = dist.steps
    counts = []
    need = n
    rate = 1 / math.sqrt(2 * math.pi * dist.variance * L)
    while need > 0:
        batch = int(min(50_000, max(64, 1.5 * need / rate)))
        c = rng.multinomial(L, dist.probabilities, size=batch)
        ok = c[c @ steps == -1]
        counts.append(ok[:need])
        need -= len(counts[-1])
    counts = np.concatenate(counts)
    seq = np.stack([np.repeat(steps, row) for row in counts]).astype(np.int32)
    seq = rng.permuted(seq, axis=1)
    tau = np.argmin(np.cumsum(seq, axis=1), axis=1)
    idx = (tau[:, None] + 1 + np.arange(L)[None, :]) % L
    rot = np.take_along_axis(seq, idx, axis=1)
    return rot[:, :M]


def sample_excursion(M: int, dist: StepDistribution, rng: np.random.Generator) -> LukasiewiczWalk:
    """One exact weight-biased excursion of length M (cycle-lemma sampler)."""
    return LukasiewiczWalk(tuple(int(x) for x in _excursion_batch(dist, M, 1, rng)[0]))


def _excursion_chunks(dist: StepDistribution, M: int, n: int, seed, workers: int = 1):
    # yields consecutive (size, M) blocks; block c always uses stream c
    chunk = max(1, min(CHUNK, 2_000_000 // max(M, 1)))
    sizes = [min(chunk, n - i) for i in range(0, n, chunk)]

    def run(c, s):
        return _excursion_batch(dist, M, s, make_rng(seed, c))

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            yield from ex.map(lambda a: run(*a), enumerate(sizes))
    else:
        for c, s in enumerate(sizes):
            yield run(c, s)


def sample_excursions(dist: StepDistribution, M: int, n: int, seed, workers: int = 1) -> np.ndarray:
    """``(n, M)`` increments of independent excursions."""
    parts = list(_excursion_chunks(dist, M, n, seed, workers))
    return np.concatenate(parts) if parts else np.empty((0, M), dtype=np.int32)


def downstep_fraction(walk: LukasiewiczWalk, t1: float, t2: float) -> float:
    """Fraction of down steps among steps ``ceil(t1 M) .. floor(t2 M)``."""
    if not 0 < t1 < t2 < 1:
        raise ValueError("need 0 < t1 < t2 < 1")
    return float(downstep_fractions(np.asarray([walk.increments]), t1, t2)[0])


def downstep_fractions(increments: np.ndarray, t1: float, t2: float) -> np.ndarray:
    M = increments.shape[1]
    lo, hi = math.ceil(t1 * M), math.floor(t2 * M)
    window = increments[:, lo - 1 : hi]
    return np.mean(window == -1, axis=1)


def max_tail_curve(
    dist: StepDistribution,
    M: int,
    n_samples: int,
    seed,
    h_grid: Sequence[float] = tuple(np.arange(0, 4.01, 0.5)),
) -> list[tuple[float, float, int]]:
    """Rows ``(h, P[max W > h sqrt(M)], count)`` from sampled excursions."""
    inc = sample_excursions(dist, M, n_samples, seed)
    mx = np.max(np.cumsum(inc, axis=1), axis=1)
    rows = []
    for h in h_grid:
        cnt = int(np.sum(mx > h * math.sqrt(M)))
        rows.append((float(h), cnt / n_samples, cnt))
    return rows


def tail_fit(xs, probs, counts=None, power: float = 2.0, min_count: int = 10):
    """Least squares of ``log P`` against ``x^power`` over informative points.

    Points with ``P`` in ``(0, 1)`` and at least ``min_count`` hits are kept.

    Returns
    -------
    slope, intercept, r2, n_points
    """
    xs = np.asarray(xs, float)
    probs = np.asarray(probs, float)
    keep = (probs > 0) & (probs < 1)
    if counts is not None:
        keep &= np.asarray(counts) >= min_count
    if keep.sum() < 3:
        return float("nan"), float("nan"), float("nan"), int(keep.sum())
    res = stats.linregress(xs[keep] ** power, np.log(probs[keep]))
    return float(res.slope), float(res.intercept), float(res.rvalue**2), int(keep.sum())


def free_start_survival(dist: StepDistribution, L: int, n_walks: int, seed, workers: int = 1) -> MCEstimate:
    """Estimate ``P[S_t <= 0 for t = 1..L]`` for iid steps.

    Reading a walk ending at 0 backwards, this is the probability that it
    stays nonnegative. Dead walkers are dropped as soon as they exit.
    """

    def run(rng, size):
        pos = np.zeros(size, dtype=np.int64)
        alive = np.ones(size, dtype=bool)
        t, block = 0, 16
        while t < L and alive.any():
            b = min(block, L - t)
            idx = np.flatnonzero(alive)
            path = pos[idx, None] + np.cumsum(dist.sample(rng, (idx.size, b)), axis=1)
            dead = (path > 0).any(axis=1)
            alive[idx[dead]] = False
            pos[idx] = path[:, -1]
            t += b
            block = min(2 * block, 4096)
        return alive.astype(float)

    x = _chunked(n_walks, seed, run, workers, chunk=20_000)
    return MCEstimate.from_samples(x, seed, {"L": L})


@dataclass(frozen=True)
class ExcursionPath:
    """Path on the grid ``k/n, k = 0..n``."""

    values: np.ndarray
    kind: str = "brownian"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v[0] != 0 or v[-1] != 0 or np.any(v < 0):
            raise ValueError("excursion must start and end at 0 and stay >= 0")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n + 1)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, dx=1.0 / self.n))

    @classmethod
    def from_walk(cls, increments, sigma: float) -> ExcursionPath:
        """Rescaled walk ``W(floor(tM)) / (sigma sqrt(M))`` sampled at ``t = k/M``."""
        inc = np.asarray(increments)
        h = np.concatenate([[0], np.cumsum(inc)])
        return cls(h / (sigma * math.sqrt(inc.size)), kind="walk-rescaled")


def brownian_excursions(n: int, n_paths: int, rng: np.random.Generator) -> np.ndarray:
    """``(n_paths, n+1)`` Brownian excursions as norms of 3-d Brownian bridges.

    Each bridge is ``W(t) - t W(1)`` on the grid, which has exactly the
    bridge's finite-dimensional law.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    t = np.linspace(0.0, 1.0, n + 1)
    inc = rng.standard_normal((n_paths, 3, n)) / math.sqrt(n)
    W = np.concatenate([np.zeros((n_paths, 3, 1)), np.cumsum(inc, axis=2)], axis=2)
    B = W - t * W[:, :, -1:]
    E = np.sqrt(np.sum(B**2, axis=1))
    E[:, 0] = 0.0
    E[:, -1] = 0.0
    return E


def sample_brownian_excursion(n: int, rng: np.random.Generator) -> ExcursionPath:
    return ExcursionPath(brownian_excursions(n, 1, rng)[0])


def _occupation(values: np.ndarray, edges_scale: np.ndarray, n_bins: int) -> np.ndarray:
    # time spent in each bin by the piecewise-linear path; values has shape
    # (B, n+1), bin width edges_scale[b], returns (B, n_bins)
    u = values / edges_scale[:, None]
    lo = np.minimum(u[:, :-1], u[:, 1:])
    hi = np.maximum(u[:, :-1], u[:, 1:])
    n = values.shape[1] - 1
    edges = np.arange(n_bins + 1, dtype=float)
    span = hi - lo
    flat = span == 0
    span = np.where(flat, 1.0, span)
    F = np.clip((edges[None, None, :] - lo[:, :, None]) / span[:, :, None], 0.0, 1.0)
    # a flat segment sits in the bin [e_k, e_k+1) containing it
    level = np.minimum(lo, n_bins - 1e-9)
    F = np.where(flat[:, :, None], (edges[None, None, :] > level[:, :, None]).astype(float), F)
    cdf = F.sum(axis=1) / n
    return np.diff(cdf, axis=1)


@dataclass(frozen=True)
class LocalTimeProfile:
    """Occupation density ``l_y`` on bins of width ``bin_width``."""

    bin_width: float
    l_y: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sum(self.l_y) * self.bin_width)

    @property
    def l2(self) -> float:
        return float(np.sum(self.l_y**2) * self.bin_width)


def local_time_profile(path: ExcursionPath, bin_width: float | None = None) -> LocalTimeProfile:
    """Occupation histogram of the linearly interpolated path."""
    v = path.values
    top = float(v.max())
    if bin_width is None:
        bin_width = top / math.sqrt(path.n)
    n_bins = max(1, math.ceil(top / bin_width))
    occ = _occupation(v[None, :], np.array([bin_width]), n_bins)[0]
    return LocalTimeProfile(bin_width, occ / bin_width)


def local_time_functional(path: ExcursionPath, bin_width: float | None = None) -> float:
    """``int l_y^2 dy`` from the occupation histogram (default bin ``max / sqrt(n)``)."""
    return local_time_profile(path, bin_width).l2


def local_time_l2(E: np.ndarray, bins_per_path: int | None = None, batch: int | None = None) -> np.ndarray:
    """Vectorized ``int l_y^2 dy`` with ``bins_per_path`` bins up to each path's max.

    ``batch`` defaults to keeping the per-batch work array near 4e6 entries.
    """
    n = E.shape[1] - 1
    nb = bins_per_path or math.ceil(math.sqrt(n))
    if batch is None:
        batch = max(1, OCCUPATION_CELLS // (n * (nb + 1)))
    out = np.empty(E.shape[0])
    for i in range(0, E.shape[0], batch):
        v = E[i : i + batch]
        bw = v.max(axis=1) / nb
        occ = _occupation(v, bw, nb)
        out[i : i + batch] = np.sum(occ**2, axis=1) / bw
    return out


def _areas(E: np.ndarray) -> np.ndarray:
    n = E.shape[1] - 1
    return (E[:, 1:-1].sum(axis=1) + 0.5 * (E[:, 0] + E[:, -1])) / n


def excursion_area_brownian(n_paths: int, n_grid: int, seed, workers: int = 1) -> MCEstimate:
    """``E[int_0^1 e(t) dt]`` from Brownian excursions (exact value sqrt(pi/8))."""
    x = _chunked(n_paths, seed, lambda rng, s: _areas(brownian_excursions(n_grid, s, rng)), workers)
    return MCEstimate.from_samples(x, seed, {"n_grid": n_grid, "route": "brownian"})


def _walk_areas(dist, M, n, seed, workers):
    # W(0) = 0 and W(M) = 0, so the left Riemann sum is the sum of heights
    areas = [np.cumsum(inc, axis=1, dtype=np.int64).sum(axis=1) for inc in _excursion_chunks(dist, M, n, seed, workers)]
    return np.concatenate(areas) / (M * math.sqrt(dist.variance) * math.sqrt(M))


def excursion_area_walk(
    dist: StepDistribution, M: int, n_samples: int, seed, extrapolate: bool = True, workers: int = 1
) -> MCEstimate:
    """``E[int e]`` from rescaled conditioned walks.

    The lattice walk carries an ``O(M^-1/2)`` bias; with ``extrapolate`` the
    estimate is ``2 A(4M) - A(M)`` from independent batches at M and 4M,
    which cancels that term.
    """
    a = _walk_areas(dist, M, n_samples, seed, workers)
    if not extrapolate:
        return MCEstimate.from_samples(a, seed, {"M": M, "route": "walk"})
    b = _walk_areas(dist, 4 * M, n_samples, (seed, 1) if not isinstance(seed, tuple) else seed + (1,), workers)
    ea, eb = MCEstimate.from_samples(a), MCEstimate.from_samples(b)
    mean = 2 * eb.mean - ea.mean
    se = math.sqrt(4 * eb.std_error**2 + ea.std_error**2)
    return MCEstimate(mean, se, n_samples, seed, {"M": M, "route": "walk-extrapolated"})


AIRY_PREFACTOR = math.sqrt(2 / math.pi)


def airy_laplace_first_moment(
    T: float,
    beta: float,
    n_paths: int,
    n_grid: int,
    seed,
    prefactor: float = AIRY_PREFACTOR,
    workers: int = 1,
) -> MCEstimate:
    """``E[sum_i exp(T eta_i / 2)]`` for Airy(beta) via Brownian excursions.

    Estimates ``c T^(-3/2) E[exp(-(T^1.5/2) int e + (T^1.5/(2 beta)) int l^2)]``.
    The default ``c = sqrt(2/pi)`` reproduces the Airy-kernel value
    ``sqrt(2/pi) T^(-3/2) exp(T^3/96)`` at ``beta = 2``.

    Raises
    ------
    VarianceGuard
        If ``T^1.5 / (2 beta) > 2``.
    """
    if T <= 0 or beta <= 0:
        raise ValueError("need T > 0 and beta > 0")
    a = T**1.5
    if a / (2 * beta) > 2:
        raise VarianceGuard(f"T^1.5/(2 beta) = {a / (2 * beta):.3g} > 2")

    def run(rng, size):
        E = brownian_excursions(n_grid, size, rng)
        return np.exp(-0.5 * a * _areas(E) + a / (2 * beta) * local_time_l2(E))

    x = _chunked(n_paths, seed, run, workers, chunk=256)
    est = MCEstimate.from_samples(x, seed, {"T": T, "beta": beta, "n_grid": n_grid})
    return est.scaled(prefactor * T**-1.5)


def airy2_laplace_exact(T: float) -> float:
    """Airy-kernel value of ``E[sum exp(T eta_i / 2)]`` at ``beta = 2``."""
    t = T / 2
    return math.exp(t**3 / 12) / (2 * math.sqrt(math.pi) * t**1.5)


def limiting_functional(
    signature,
    params: EdgeParameters,
    T: float,
    theta: float,
    n_paths: int,
    seed,
    n_grid: int = 1024,
    workers: int = 1,
) -> MCEstimate:
    """Limit of the signature class as a Brownian-excursion expectation.

    ``(0, p)``: ``(sigma P_-1 T^1.5 / theta)^p E[(int e)^p] / p!``.
    Single-variable double swap, ``p = 0``: ``-sigma P_-1 T^1.5 E[int e]``.
    """
    k, p = signature
    k = tuple(k)
    c = params.sigma * params.p_minus1 * T**1.5
    if all(x == 0 for x in k):
        if p == 0:
            return MCEstimate(1.0, 0.0, n_paths, seed, {"signature": [list(k), p]})
        scale = (c / theta) ** p / math.factorial(p)
        fn = lambda rng, s: scale * _areas(brownian_excursions(n_grid, s, rng)) ** p  # noqa: E731
    elif sorted(k)[-1] == 2 and sum(k) == 2 and p == 0:
        fn = lambda rng, s: -c * _areas(brownian_excursions(n_grid, s, rng))  # noqa: E731
    else:
        raise UnsupportedSignature(f"no limiting functional for {signature}")
    x = _chunked(n_paths, seed, fn, workers)
    return MCEstimate.from_samples(x, seed, {"signature": [list(k), p], "T": T, "theta": theta})


def ks_two_sample(a, b, alpha: float = 0.01) -> dict:
    """Two-sample KS statistic with its asymptotic critical value at ``alpha``."""
    res = stats.ks_2samp(a, b)
    n, m = len(a), len(b)
    c = math.sqrt(-0.5 * math.log(alpha / 2))
    crit = c * math.sqrt((n + m) / (n * m))
    return {"statistic": float(res.statistic), "critical": crit, "pvalue": float(res.pvalue)}


def clt_marginal_check(dist: StepDistribution, M: int, t: float, n_samples: int, seed, alpha: float = 0.01) -> dict:
    """KS comparison of ``W(floor(tM)) / (sigma sqrt(M))`` with the excursion marginal.

    The Brownian side uses the exact marginal ``e(t) = sqrt(t(1-t)) chi_3``.
    """
    if not 0 < t < 1:
        raise ValueError("need 0 < t < 1")
    inc = sample_excursions(dist, M, n_samples, (seed, 0) if not isinstance(seed, tuple) else seed)
    k = math.floor(t * M)
    walk = inc[:, :k].sum(axis=1) / (math.sqrt(dist.variance * M))
    rng = make_rng(seed if not isinstance(seed, tuple) else seed[0], 10**6)
    bm = math.sqrt(t * (1 - t)) * np.sqrt(rng.chisquare(3, size=n_samples))
    out = ks_two_sample(walk, bm, alpha)
    out.update({"M": M, "t": t, "n": n_samples})
    return out
