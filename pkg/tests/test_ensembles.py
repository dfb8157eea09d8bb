import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate

from betaedge.dunkl import dunkl_moment
from betaedge.edge import edge_parameters
from betaedge.ensembles import (
    SpectrumSample,
    classical_addition_batch,
    edge_universality_experiment,
    empirical_laplace,
    empirical_power_sum,
    largest_eigenvalue_tail,
    sample_classical_addition,
    sample_spectrum,
    tridiagonal_model,
)
from betaedge.freeprob import Component, EnsembleSpec, cumulants, moment_nc, voiculescu
from betaedge.stochastics import MCEstimate, make_rng


def _mean_within(x, want, k=3.0):
    e = MCEstimate.from_samples(x)
    return abs(e.mean - want) < k * e.std_error


@pytest.mark.parametrize("beta", [1, 2, 4])
def test_gaussian_n1_variance_quadrature(beta):
    rng = make_rng(beta)
    x = np.array([tridiagonal_model("gaussian_beta", 1, None, beta, rng).diagonal[0] for _ in range(50_000)])
    dens = lambda t: math.exp(-beta * t * t / 4)  # noqa: E731
    Z = integrate.quad(dens, -np.inf, np.inf)[0]
    want = integrate.quad(lambda t: t * t * dens(t), -np.inf, np.inf)[0] / Z
    assert _mean_within(x**2, want)


def test_laguerre_n1_gamma_moments():
    rng = make_rng(0)
    x = np.array([sample_spectrum("laguerre_beta", 1, 1, 2, rng).eigenvalues[0] for _ in range(100_000)])
    for M in range(1, 5):
        assert _mean_within(x**M, math.factorial(M))


def test_tridiagonal_structure():
    m = tridiagonal_model("laguerre_beta", 30, 45, 1.5, make_rng(1))
    assert m.diagonal.shape == (30,) and m.offdiagonal.shape == (29,)
    ev = m.eigenvalues()
    assert np.all(ev >= -1e-10) and np.all(np.diff(ev) <= 0)
    assert np.allclose(m.eigenvalues(top=5), ev[:5])


@pytest.mark.parametrize("kind,N,L", [("laguerre_beta", 5, 3), ("gaussian_beta", 0, None), ("bogus", 2, None)])
def test_tridiagonal_errors(kind, N, L):
    with pytest.raises(ValueError):
        tridiagonal_model(kind, N, L, 2, make_rng(0))


def test_semicircle_bulk():
    N = 2000
    s = sample_spectrum("gaussian_beta", N, None, 2, make_rng(3))
    hist, edges = np.histogram(s.eigenvalues / N, bins=40, range=(-2, 2), density=True)
    mid = 0.5 * (edges[1:] + edges[:-1])
    dens = np.sqrt(np.maximum(4 - mid**2, 0)) / (2 * np.pi)
    assert np.max(np.abs(hist - dens)) < 0.02


def test_spectrum_sample_sorted():
    s = SpectrumSample(np.array([1.0, 3.0, 2.0]), {"N": 3})
    assert list(s.eigenvalues) == [3, 2, 1] and s.N == 3


def test_power_sum_m0():
    s = sample_spectrum("laguerre_beta", 50, 60, 2, make_rng(2))
    p = edge_parameters(voiculescu(EnsembleSpec.laguerre(60), 50))
    assert empirical_power_sum(s, 0, p) == 50


@pytest.mark.parametrize("beta", [1, 2])
def test_addition_first_moment(beta):
    spec = EnsembleSpec(Fraction(1, 2), (Component(2, gamma=Fraction(3, 2)), Component(Fraction(-1, 2), gamma=1)))
    N = 6
    ev = classical_addition_batch(spec, N, beta, 20_000, make_rng(4))
    assert _mean_within(ev.sum(axis=1), float(N * N * spec.kappa(1, N)))


def test_addition_bulk_second_moment():
    # at beta = 2 the finite-N free cumulant formula for E[p_2] is exact
    spec = EnsembleSpec(1, (Component(2, gamma=Fraction(3, 2)), Component(1, gamma=2)))
    N = 500
    x = [np.sum(sample_classical_addition(spec, N, 2, make_rng(5, r)).eigenvalues ** 2) / N**3 for r in range(12)]
    want = float(moment_nc(cumulants(spec, "finite", 2, N), 2))
    assert _mean_within(x, want)


def test_gaussian_addition_fourth_moment():
    N = 3
    ev = classical_addition_batch(EnsembleSpec.semicircle(), N, 2, 200_000, make_rng(6))
    want = float(dunkl_moment(EnsembleSpec.semicircle(), N, 1, 4).moment)
    assert _mean_within((ev**4).sum(axis=1), want)


def test_addition_rejects_other_beta():
    with pytest.raises(ValueError):
        classical_addition_batch(EnsembleSpec.semicircle(), 2, 4, 1, make_rng(0))


def test_laguerre_edge_location():
    N, gamma = 4000, 2
    p = edge_parameters(voiculescu(EnsembleSpec.marchenko_pastur(gamma)))
    tops = [sample_spectrum("laguerre_beta", N, gamma * N, 2, make_rng(7, r), top=1).eigenvalues[0] / N for r in range(10)]
    assert np.mean(tops) == pytest.approx((math.sqrt(gamma) + 1) ** 2, rel=0.01)
    assert p.mu_plus == pytest.approx((math.sqrt(gamma) + 1) ** 2)


def test_power_sum_close_to_laplace():
    N, T = 4000, 1.0
    spec = EnsembleSpec.laguerre(N)
    p = edge_parameters(voiculescu(spec, N))
    M = round(T * N ** (2 / 3))
    ps, lp = [], []
    for r in range(20):
        s = sample_spectrum("laguerre_beta", N, N, 2, make_rng(8, r), top=100)
        ps.append(empirical_power_sum(s, M, p))
        lp.append(empirical_laplace(s, T, p))
    assert abs(np.mean(ps) / np.mean(lp) - 1) < 0.05


def test_universality_null_calibration():
    spec = EnsembleSpec.marchenko_pastur(1)
    rep = edge_universality_experiment([spec, spec], [2], 200, 300, seed=1)
    assert rep["ks"][0]["pvalue"] > 0.01


def test_largest_eigenvalue_tail_decays():
    rep = largest_eigenvalue_tail(EnsembleSpec.marchenko_pastur(1), 10, 2, 20_000, np.linspace(0.02, 0.3, 12), seed=2)
    assert rep["slope"] < 0 and rep["n_points"] >= 3
    assert all(a >= b for a, b in zip(rep["prob"], rep["prob"][1:]))


def test_universality_sample_sizes():
    rep = edge_universality_experiment([EnsembleSpec.marchenko_pastur(1)], [2], 50, 40, seed=0)
    assert rep["samples"][(0, 2)].shape == (40,)
