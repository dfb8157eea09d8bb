"""Acceptance suite: one PASS/FAIL line per criterion with its value and tolerance."""

import math
import random
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from betaedge.combinatorics import (
    WeightedStepSystem,
    ballot_partition_functions,
    bridge_partition_enum,
    bridge_partition_series,
    catalan,
    enumerate_walks,
    walk_weight,
)
from betaedge.dunkl import classify_against_walks, dunkl_joint_moment, dunkl_moment
from betaedge.edge import contour_moment, edge_parameters, steepest_descent_moment, universality_residual
from betaedge.ensembles import (
    classical_addition_batch,
    edge_universality_experiment,
    empirical_laplace,
    largest_eigenvalue_tail,
    sample_spectrum,
)
from betaedge.freeprob import Component, EnsembleSpec, cumulants, moment_coefficient, moment_nc, voiculescu
from betaedge.stochastics import (
    MCEstimate,
    airy2_laplace_exact,
    airy_laplace_first_moment,
    clt_marginal_check,
    downstep_fractions,
    excursion_area_brownian,
    excursion_area_walk,
    make_rng,
    max_tail_curve,
    sample_excursions,
    step_distribution,
    tail_fit,
)
from conftest import random_spec

MIXED = EnsembleSpec(Fraction(1, 3), (Component(1, gamma=2), Component(Fraction(-1, 2), gamma=1)))


def test_c01_cross_route_moments(criterion):
    r = random.Random(101)
    walks = {M: list(enumerate_walks(M)) for M in range(1, 11)}
    bad = 0
    for _ in range(50):
        cum = cumulants(random_spec(r, allow_negative=True), max_index=10)
        for M in range(1, 11):
            a, b = moment_nc(cum, M), moment_coefficient(cum, M)
            c = sum(walk_weight(w, cum) for w in walks[M])
            bad += not (a == b == c)
    criterion("1 cross-route moments (50 specs, M<=10)", bad == 0, f"{bad} mismatches", "exact")


def test_c02_catalan(criterion):
    sc = cumulants(EnsembleSpec.semicircle(), max_index=14)
    mp = cumulants(EnsembleSpec.marchenko_pastur(1), max_index=10)
    ok = all(moment_nc(sc, 2 * n) == catalan(n) for n in range(1, 8))
    ok &= all(moment_nc(mp, M) == moment_coefficient(mp, M) == catalan(M) for M in range(1, 11))
    criterion("2 Catalan identities", ok, "semicircle n<=7, MP1 M<=10", "exact")


def test_c03_dunkl_table(criterion):
    k1, k2, k3, th = sp.symbols("kappa1 kappa2 kappa3 theta", positive=True)
    ok = True
    for N in (2, 3, 4):
        ex = dunkl_moment([k1, k2, k3], N, th, 3, lowering="simplified")
        zero = (0,) * (N - 1)
        ok &= sp.simplify(ex.get(zero, 0) - (k3 + 3 * k2 * k1 + k1**3)) == 0
        ok &= sp.simplify(ex.get(zero, 2) - 2 * k3 / (N**2 * th**2)) == 0
        for j in range(N - 1):
            k = [0] * (N - 1)
            k[j] = 2
            ok &= sp.simplify(ex.get(k, 0) + k3 / N**2) == 0
    criterion("3 M=3 Dunkl table (N=2,3,4)", bool(ok), "symbolic classes", "exact")


def test_c04_gamma_and_joint_moments(criterion):
    lag = EnsembleSpec.laguerre(1)
    exact = all(dunkl_moment(lag, 1, 1, M).moment == math.factorial(M) for M in range(1, 7))
    spec = EnsembleSpec(Fraction(1, 2), (Component(1, L=3), Component(Fraction(1, 2), L=2)))
    powers = [[1], [2], [1, 1], [3], [1, 2], [4], [2, 2]]
    worst = 0.0
    for beta in (1, 2):
        ev = classical_addition_batch(spec, 2, beta, 10**6, make_rng(404, beta))
        p = {k: (ev**k).sum(axis=1) for k in range(1, 5)}
        for pw in powers:
            est = MCEstimate.from_samples(np.prod([p[k] for k in pw], axis=0))
            want = float(dunkl_joint_moment(spec, 2, Fraction(beta, 2), pw))
            worst = max(worst, abs(est.mean - want) / est.std_error)
    criterion("4 Gamma(1) moments exact; N=2 joint moments vs MC (10^6)", exact and worst < 4,
              f"exact={exact}, max|z|={worst:.2f}", "exact / 4 sigma")


def test_c05_ballot_and_bridges(criterion):
    r = random.Random(505)
    ok = True
    for L in range(1, 11):
        steps = WeightedStepSystem({k: Fraction(r.randint(1, 9), r.randint(1, 9)) for k in range(-1, 4)})
        for y0 in range(L + 1):
            Z, good = ballot_partition_functions(y0, L, steps)
            ok &= good == Fraction(y0, L) * Z
    steps = WeightedStepSystem({k: Fraction(r.randint(1, 9), r.randint(1, 9)) for k in range(-1, 5)})
    ok &= all(bridge_partition_enum(H, M, steps) == bridge_partition_series(H, M, steps)
              for H in range(4) for M in range(1, 11))
    criterion("5 ballot and bridge identities", bool(ok), "y0<=L<=10, H<=3, M<=10", "exact")


def test_c06_steepest_descent(criterion):
    M = 2000
    ratios = []
    for g in (1, 2, 4):
        vt = voiculescu(EnsembleSpec.marchenko_pastur(g))
        ratios.append(float(contour_moment(vt, M, scaled=True) / steepest_descent_moment(edge_parameters(vt), M, scaled=True)))
    p1 = edge_parameters(voiculescu(EnsembleSpec.marchenko_pastur(1)))
    const = max(abs(steepest_descent_moment(p1, m, scaled=True) * m**1.5 * math.sqrt(math.pi) - 1) for m in (10, 100, 2000))
    ok = all(0.995 <= x <= 1.005 for x in ratios) and const < 1e-12
    criterion("6 steepest descent ratio at M=2000 (gamma=1,2,4)", ok,
              f"ratios={[round(x, 5) for x in ratios]}, const rel err={const:.1e}", "[0.995,1.005] / 1e-12")


def test_c07_universality_identity(criterion):
    r = random.Random(707)
    worst = max(abs(universality_residual(edge_parameters(voiculescu(random_spec(r, allow_negative=True))))) for _ in range(1000))
    criterion("7 universality identity (10^3 specs)", worst < 1e-10, f"{worst:.2e}", "1e-10")


def test_c08_walk_functionals(criterion):
    r = random.Random(808)
    checked = 0
    for N in (2, 3, 4):
        for M in range(1, 7):
            kap = [Fraction(r.randint(0, 6), r.randint(1, 5)) for _ in range(M)]
            theta = Fraction(r.randint(1, 4), r.randint(1, 4))
            ex = dunkl_moment(kap, N, theta, M, lowering="simplified")
            checked += len(classify_against_walks(ex, kap))
    criterion("8 walk-functional classes (M<=6, N<=4)", True, f"{checked} classes matched", "exact")


def test_c09_downstep_homogeneity(criterion):
    M, n = 10**4, 2000
    zs = []
    for i, spec in enumerate((EnsembleSpec.semicircle(), EnsembleSpec.marchenko_pastur(1))):
        d = step_distribution(spec)
        est = MCEstimate.from_samples(downstep_fractions(sample_excursions(d, M, n, (909, i)), 0.2, 0.8))
        zs.append((est.mean - d.p_down) / est.std_error)
    criterion("9 down-step fraction on [0.2M,0.8M] at M=10^4", all(abs(z) < 3 for z in zs),
              f"z={[round(z, 2) for z in zs]}", "3 sigma")


def test_c10_functional_clt(criterion):
    res = [clt_marginal_check(step_distribution(s), 8192, 0.5, 10**4, seed=1010 + i)
           for i, s in enumerate((EnsembleSpec.marchenko_pastur(1), MIXED))]
    criterion("10 KS midpoint marginal at M=8192", all(x["statistic"] < x["critical"] for x in res),
              f"D={[round(x['statistic'], 4) for x in res]}", f"critical={res[0]['critical']:.4f}")


def test_c11_excursion_area(criterion):
    b = excursion_area_brownian(10**5, 1024, seed=1111)
    w = excursion_area_walk(step_distribution(EnsembleSpec.marchenko_pastur(1)), 1024, 10**5, seed=1112)
    z = (b.mean - w.mean) / math.hypot(b.std_error, w.std_error)
    criterion("11 excursion area Brownian vs walk", abs(z) < 3,
              f"brownian={b.mean:.5f} walk={w.mean:.5f} z={z:.2f}", "3 sigma")


@pytest.mark.slow
def test_c12_airy_laplace_soft(criterion):
    N, T = 2000, 1.0
    p = edge_parameters(voiculescu(EnsembleSpec.laguerre(N), N))
    lap = [empirical_laplace(sample_spectrum("laguerre_beta", N, N, 2, make_rng(1212, r), top=100), T, p)
           for r in range(200)]
    emp = MCEstimate.from_samples(lap)
    Tp = 2 * p.c0 * T / p.mu_plus
    gs = airy_laplace_first_moment(Tp, 2, 10**5, 512, seed=1213)
    rel = emp.mean / gs.mean - 1
    criterion("12 (soft) LUE N=2000 Laplace vs excursion formula", abs(rel) < 0.1,
              f"empirical={emp.mean:.4f}+-{emp.std_error:.4f} excursion={gs.mean:.4f}+-{gs.std_error:.4f} "
              f"kernel={airy2_laplace_exact(Tp):.4f} rel={rel:+.3f}", "10%")


def test_c13_tails(criterion):
    rows = max_tail_curve(step_distribution(EnsembleSpec.marchenko_pastur(1)), 1024, 20_000, seed=1313,
                          h_grid=tuple(np.arange(0.5, 3.01, 0.25)))
    h, prob, cnt = map(np.array, zip(*rows))
    s1, _, r1, _ = tail_fit(h, prob, cnt, power=2)
    lam = largest_eigenvalue_tail(EnsembleSpec.marchenko_pastur(1), 10, 2, 20_000, np.linspace(0.02, 0.3, 12), seed=1314)
    ok = s1 < 0 and r1 > 0.9 and lam["slope"] < 0 and lam["r2"] > 0.9
    criterion("13 excursion-max tail vs h^2, lambda_1 tail vs x^1.5", ok,
              f"max: slope={s1:.3f} R2={r1:.4f}; lambda_1: slope={lam['slope']:.2f} R2={lam['r2']:.4f}",
              "slope<0, R2>0.9")


@pytest.mark.slow
def test_universality_collapse_soft(criterion):
    specs = [EnsembleSpec.marchenko_pastur(1), EnsembleSpec.marchenko_pastur(4), EnsembleSpec.semicircle()]
    rep = edge_universality_experiment(specs, [2], 1000, 500, seed=1400)
    pmin = min(k["pvalue"] for k in rep["ks"])
    criterion("universality collapse (soft): pairwise KS of rescaled lambda_1", pmin > 0.01,
              f"min p={pmin:.3f}", "p>0.01")
