import math
import random
from fractions import Fraction

import pytest

from betaedge.combinatorics import WeightedStepSystem, bridge_partition_enum
from betaedge.edge import (
    contour_moment,
    critical_point,
    critical_point_drift,
    edge_parameters,
    free_start_asymptotic,
    free_start_survival_constant,
    steepest_descent_moment,
    universality_residual,
)
from betaedge.errors import PureGaussianSpec
from betaedge.freeprob import Component, EnsembleSpec, cumulants, moment_coefficient, voiculescu, voiculescu_eval
from conftest import random_spec


@pytest.mark.parametrize("gamma", [1, 2, 4, Fraction(1, 4)])
def test_mp_critical_point(gamma):
    z = critical_point(voiculescu(EnsembleSpec.marchenko_pastur(gamma)))
    assert z == pytest.approx(1 / (math.sqrt(gamma) + 1), rel=1e-13)


def test_semicircle_critical_point(semicircle):
    assert critical_point(voiculescu(semicircle)) == pytest.approx(1.0, rel=1e-13)


def test_mp1_edge_parameters(mp1):
    p = edge_parameters(voiculescu(mp1))
    assert (p.z_c, p.mu_plus, p.sigma2, p.p_minus1) == pytest.approx((0.5, 4, 2, 0.5), rel=1e-12)
    assert p.c0 == pytest.approx(2 ** (4 / 3), rel=1e-12)
    assert p.f2 == pytest.approx(8, rel=1e-12)


def test_semicircle_edge_parameters(semicircle):
    p = edge_parameters(voiculescu(semicircle))
    assert (p.mu_plus, p.sigma2, p.p_minus1, p.c0) == pytest.approx((2, 1, 0.5, 1), rel=1e-12)
    assert not p.single_saddle


def test_mp4_edge():
    assert edge_parameters(voiculescu(EnsembleSpec.marchenko_pastur(4))).mu_plus == pytest.approx(9, rel=1e-12)


def test_voiculescu_examples(mp1, semicircle):
    vt = voiculescu(mp1)
    assert voiculescu_eval(vt, Fraction(1, 2)) == 4
    assert voiculescu_eval(vt, Fraction(1, 2), 1) == 0
    assert voiculescu_eval(voiculescu(semicircle), Fraction(1), 2) == 2


def test_mixed_sign_spec_residual():
    spec = EnsembleSpec(Fraction(1, 3), (Component(1, gamma=2), Component(Fraction(-1, 2), gamma=1)))
    assert abs(universality_residual(edge_parameters(voiculescu(spec)))) < 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_edge_invariants_random(seed):
    r = random.Random(seed)
    for _ in range(40):
        spec = random_spec(r, allow_negative=True)
        vt = voiculescu(spec)
        p = edge_parameters(vt)
        assert 0 < p.z_c
        if vt.alpha1 is not None and vt.alpha1 > 0:
            assert p.z_c < 1 / float(vt.alpha1)
        assert abs(voiculescu_eval(vt, p.z_c, 1)) < 1e-10 * voiculescu_eval(vt, p.z_c, 2)
        assert p.z_c * voiculescu_eval(vt, p.z_c, 2) > 0
        assert abs(universality_residual(p)) < 1e-10


@pytest.mark.parametrize("M", [1, 6, 12, 25, 40])
def test_contour_matches_exact(M):
    spec = EnsembleSpec(Fraction(1, 2), (Component(2, gamma=Fraction(3, 2)), Component(1, gamma=1)))
    exact = moment_coefficient(cumulants(spec, max_index=M), M)
    assert contour_moment(voiculescu(spec), M) == pytest.approx(float(exact), rel=1e-8)


def test_contour_examples(mp1, semicircle):
    assert contour_moment(voiculescu(mp1), 6) == pytest.approx(132, rel=1e-6)
    assert contour_moment(voiculescu(mp1), 1) == pytest.approx(1, rel=1e-10)
    assert abs(contour_moment(voiculescu(semicircle), 5)) < 1e-10


def test_contour_scaled(mp1):
    vt = voiculescu(mp1)
    assert contour_moment(vt, 30, scaled=True) * 4**30 == pytest.approx(contour_moment(vt, 30), rel=1e-12)


def test_steepest_descent_catalan_constant(mp1):
    p = edge_parameters(voiculescu(mp1))
    assert steepest_descent_moment(p, 1, scaled=True) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-12)


def test_steepest_descent_refuses_gaussian(semicircle):
    with pytest.raises(PureGaussianSpec):
        steepest_descent_moment(edge_parameters(voiculescu(semicircle)), 10)


def test_asymptotic_ratio_improves(mp1):
    vt = voiculescu(mp1)
    p = edge_parameters(vt)
    r = [contour_moment(vt, M, scaled=True) / steepest_descent_moment(p, M, scaled=True) for M in (250, 500, 1000, 2000)]
    assert all(abs(a - 1) > abs(b - 1) for a, b in zip(r, r[1:]))


def test_free_start_constants(mp1, semicircle):
    assert free_start_survival_constant(edge_parameters(voiculescu(mp1))) == pytest.approx(1.1284, abs=1e-4)
    assert free_start_survival_constant(edge_parameters(voiculescu(semicircle))) == pytest.approx(0.7979, abs=1e-4)


def test_free_start_asymptotic_growth(mp1):
    vt = voiculescu(mp1)
    a = free_start_asymptotic(vt, 99, log=True) - 100 * math.log(4)
    b = free_start_asymptotic(vt, 399, log=True) - 400 * math.log(4)
    assert b - a == pytest.approx(0.5 * math.log(4), rel=1e-12)


@pytest.mark.parametrize("L", [3, 5, 8])
def test_free_start_exact_identity(L, mp1):
    # bridges from every height, weighted at z_c, give the contour coefficient
    # (1/(L+1)) [z^-1] (1 - z/z_c)^-2 V(z)^(L+1)
    from betaedge._series import series_pow

    cum = cumulants(mp1, max_index=L + 2)
    steps = WeightedStepSystem.from_cumulants(cum, L + 1, z=Fraction(1, 2))
    lhs = sum(bridge_partition_enum(H, L, steps) for H in range(L + 1))
    P = series_pow([1] + [cum[l] for l in range(1, L + 1)], L + 1, L)
    rhs = Fraction(1, L + 1) * sum((n + 1) * 2**n * P[L - n] for n in range(L + 1))
    assert lhs == rhs


def test_critical_point_drift():
    rows = critical_point_drift(EnsembleSpec.marchenko_pastur(Fraction(4, 3)), [100, 1000, 10000])
    scaled = [r[2] for r in rows]
    assert scaled[0] > scaled[1] > scaled[2] > 0


def test_drift_vanishes_for_exact_schedules():
    for spec in (EnsembleSpec.marchenko_pastur(1), EnsembleSpec.marchenko_pastur(Fraction(3, 2))):
        for _, _, s in critical_point_drift(spec, [10, 100, 1000]):
            assert s < 1e-9
