import math

import numpy as np
import pytest

from sfrcm import analytics as A
from sfrcm.errors import DomainError, InvalidArgument, RegimeError
from sfrcm.model import ModelParams

from oracles import (
    c0_monte_carlo,
    c0_reference,
    kappa_beta2_d2,
    nu_beta2_d2,
    profile_beta2_d2,
)

P15 = ModelParams(2, 4, 1.5)
P2 = ModelParams(2, 4, 2)

# frozen from the oracles in tests/oracles.py and direct closed-form evaluation
C0_D2_A4_B15 = 8.352491995247561            # 1.5 * pi**1.5
RS_D2_A4_B15_K0_S1E4 = 0.009840775847180357
LAMBDA_D2_A4_B2_R001 = 7.414384232617454
KAPPA_D2_A4_B2 = 2.9982192774028014
RHO_D2_A4_B2 = 4.857807692694659
RHAT_D2_A4_B2_RHO_S5000 = 0.05253535968398943


def test_c0_closed_form():
    assert A.c0_constant(P15) == pytest.approx(C0_D2_A4_B15, rel=1e-13)
    for d, a, b in [(2, 3, 2), (3, 4, 2), (3, 5.5, 1.2), (4, 6, 3)]:
        assert A.c0_constant(ModelParams(d, a, b)) == pytest.approx(c0_reference(d, a, b), rel=1e-12)


def test_c0_monte_carlo():
    est, se = c0_monte_carlo(4.0, 1.5, 10**7, np.random.default_rng(0))
    assert abs(est / A.c0_constant(P15) - 1) < 0.01


def test_c0_regime_errors():
    with pytest.raises(RegimeError, match="beta > 1"):
        A.c0_constant(ModelParams(2, 4, 1))
    with pytest.raises(RegimeError, match=r"alpha\*beta > d"):
        A.c0_constant(ModelParams(2, 4, 0.5), allow_outside_regime=True)
    with pytest.raises(RegimeError, match="alpha > d"):
        A.c0_constant(ModelParams(2, 2, 3))
    assert A.c0_constant(ModelParams(2, 4, 0.9), allow_outside_regime=True) > 0


def test_c0_flat_angular_variant():
    lit = ModelParams(3, 4, 2, paper_literal_c0=True)
    assert A.c0_constant(lit) == pytest.approx(A.c0_constant(ModelParams(3, 4, 2)) / 2, rel=1e-13)
    assert A.c0_constant(ModelParams(2, 4, 2, paper_literal_c0=True)) == pytest.approx(A.c0_constant(P2), rel=1e-14)


def test_c0_trend_in_alpha():
    # Gamma(1 - d/alpha) falls towards 1 as alpha grows
    vals = [A.c0_constant(ModelParams(2, a, 10.0)) for a in (3, 4, 8, 16, 64)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_scaling_radius_golden_and_identity():
    sc = A.scaling_radius(P15, 1e4, 0, 0.0)
    assert sc.r_s == pytest.approx(RS_D2_A4_B15_K0_S1E4, rel=1e-13)
    for k, xi, s in [(0, 0.3, 50.0), (1, -0.2, 3.0), (3, 1.0, 1e7)]:
        sc = A.scaling_radius(P2, s, k, xi)
        loglog = (k - 1) * math.log(math.log(s))
        rhs = math.log(s) + loglog + xi + math.log(8 / (math.factorial(k) * 2))
        assert sc.c0 * s * sc.r_s ** 2 == pytest.approx(rhs, rel=1e-13)


def test_scaling_radius_monotone_in_xi():
    r = [A.scaling_radius(P2, 1e4, 0, xi).r_s for xi in (-1, 0, 0.5, 2)]
    assert all(a < b for a, b in zip(r, r[1:]))


def test_scaling_radius_domain_errors():
    with pytest.raises(InvalidArgument):
        A.scaling_radius(P2, 2.0, 0, 0)
    with pytest.raises(DomainError) as info:
        A.scaling_radius(P2, 5.0, 0, -5.0)
    smin = info.value.min_s
    assert smin > 5
    A.scaling_radius(P2, smin * 1.001, 0, -5.0)


def test_lambda_chain():
    assert A.lambda_s(P2, 0.01, 1.0) == pytest.approx(LAMBDA_D2_A4_B2_R001, rel=1e-13)
    c1, c2, c3 = A.lambda_constants(P2)
    assert (c1, c2) == pytest.approx((4.0, 8.0), rel=1e-15)
    assert c3 == pytest.approx(32 * math.pi, rel=1e-14)
    assert A.lambda_s(P2, 1e-9, 5.0) == pytest.approx(A.c0_constant(P2) * 5 ** 0.5, rel=1e-9)
    assert A.lambda_s(P2, 0.3, 1e6) == 0.0
    wc = A.lambda_cutoff(P2, 0.01)
    assert A.lambda_s(P2, 0.01, wc * 1.0001) == 0.0
    assert A.lambda_s(P2, 0.01, wc * 0.999) > 0


@pytest.mark.parametrize("r,w", [(0.05, 1.0), (0.05, 30.0), (0.01, 1.0), (0.2, 3.0), (0.003, 400.0)])
def test_profile_integral_against_independent_oracle(r, w):
    assert A.profile_integral(P2, r, w) == pytest.approx(profile_beta2_d2(r, w), rel=1e-9)


def test_profile_integral_vectorised_and_limits():
    w = np.array([1.0, 2.0, 50.0])
    vec = A.profile_integral(P2, 0.02, w)
    assert vec == pytest.approx([A.profile_integral(P2, 0.02, x) for x in w], rel=1e-12)
    # small radius: I(1) / r^d approaches c0
    c0 = A.c0_constant(P15)
    assert abs(A.profile_integral(P15, 1e-2, 1.0) / 1e-4 / c0 - 1) < 0.01
    assert abs(A.profile_integral(P15, 1e-3, 1.0) / 1e-6 / c0 - 1) < 0.01
    # eta -> 0: the profile vanishes like eta^(d/alpha)
    a = A.profile_integral(ModelParams(2, 4, 2, 1e-12), 0.05, 1.0)
    b = A.profile_integral(ModelParams(2, 4, 2, 1e-16), 0.05, 1.0)
    assert b < a < 1e-7
    assert a / b == pytest.approx(100, rel=1e-3)


def test_profile_integral_sandwich_random():
    rng = np.random.default_rng(8)
    for p in (P15, ModelParams(2, 3, 2), ModelParams(2, 2.5, 4)):
        c0 = A.c0_constant(p)
        for _ in range(40):
            r = 10 ** rng.uniform(-3, -0.7)
            w = 10 ** rng.uniform(0, 4)
            scaled = A.profile_integral(p, r, w) / r ** p.d
            assert A.lambda_s(p, r, w) <= scaled <= c0 * w ** (p.d / p.alpha)


def test_profile_integral_self_consistency():
    # one extra refinement level moves the value by far less than 1e-7
    from sfrcm import quadrature as Q
    from sfrcm.analytics import _spatial_rule

    r, w = 0.01, 3.0
    base = A.profile_integral(P2, r, w)
    rule = _spatial_rule(2, r / 64)
    tab = Q.edge_mass_table(2.0, -60)
    radius, weight = rule.nodes(3)
    finer = tab.weighted_sums(np.array([math.log(w)]), 4 * (math.log(r) - np.log(radius)), weight)[0]
    assert abs(finer / base - 1) < 1e-7


def test_expected_Dk_against_independent_oracle():
    for k in (0, 2):
        sc = A.scaling_radius(P2, 300.0, k, 0.0)
        want = nu_beta2_d2(300.0, k, sc.r_s)
        assert A.expected_Dk(P2, 300.0, k, 0.0) == pytest.approx(want, rel=1e-8)


def test_expected_Dk_grid_finite():
    for s in (20.0, 1e3, 1e5):
        for k in (0, 1, 3):
            for xi in (-0.5, 0.0, 1.0):
                v = A.expected_Dk(P15, s, k, xi)
                assert math.isfinite(v) and v >= 0


def test_expected_Dk_regime():
    with pytest.raises(RegimeError):
        A.expected_Dk(ModelParams(2, 4, 0.9), 1e3, 0, 0)
    assert A.expected_Dk(ModelParams(2, 4, 0.9), 1e3, 0, 0, allow_outside_regime=True) > 0


def test_expected_isolated_count_ladder_k0():
    vals = [A.expected_Dk(P15, s, 0, 0.0) for s in (1e4, 1e6, 1e8)]
    gaps = [abs(v - 1) for v in vals]
    assert gaps[0] > gaps[1] > gaps[2]


def test_f_j_growth_matches_log_factors():
    # s f_1(s, k+1) grows like log s and s^2 f_2(s, k+1) like (log s)^3
    p = ModelParams(2, 3, 5)
    ladder = (1e6, 1e8, 1e10)
    one = [s * A.f_j_integral(p, s, 0, 0.0, 1, 1) / math.log(s) for s in ladder]
    two = [s * s * A.f_j_integral(p, s, 0, 0.0, 2, 1) / math.log(s) ** 3 for s in ladder]
    assert max(one) / min(one) < 1.2
    assert max(two) / min(two) < 1.5
    assert A.f_j_integral(ModelParams(2, 4, 2, 1e-9), 1e4, 1, 0.0, 1, 1) < A.f_j_integral(P2, 1e4, 1, 0.0, 1, 1)


def test_f_j_requires_finite_moment():
    with pytest.raises(RegimeError):
        A.f_j_integral(P15, 1e4, 1, 0.0, 2, 2)


def test_lemma_ladders_approach_one():
    ladder = (1e4, 1e6, 1e8)
    for which, p, k in (("L1", P15, 0), ("L1", ModelParams(2, 2.5, 4), 0), ("L2", ModelParams(2, 2.5, 4), 2)):
        gaps = [abs(v - 1) for v in A.lemma_limit_sequence(which, p, k, 0.0, 1, 1, ladder)]
        assert gaps[0] > gaps[1] > gaps[2]


def test_lemma_ub_j1_matches_l1_normalisation():
    assert A.lemma_limit("UB", P15, 1e6, 0.3, 1) == A.lemma_limit("L1", P15, 1e6, 0.3, 1)
    ub = A.lemma_limit_sequence("UB", P15, 0, 0.0, 1, 1, (1e8,))[0]
    l1 = A.lemma_limit_sequence("L1", P15, 0, 0.0, 1, 1, (1e8,))[0]
    assert abs(ub - l1) < 1e-3


def test_lemma_u_tracks_l2_at_k1():
    # both target exp(-xi); the gap between them shrinks along the ladder
    ladder = (1e4, 1e6, 1e8, 1e10)
    u = A.lemma_limit_sequence("U", P15, 1, 0.0, 1, 1, ladder)
    l2 = A.lemma_limit_sequence("L2", P15, 1, 0.0, 1, 1, ladder)
    gaps = [abs(a - b) for a, b in zip(u, l2)]
    assert all(x > y for x, y in zip(gaps, gaps[1:]))


def test_lemma_regimes():
    with pytest.raises(RegimeError, match="alpha\\*beta > j\\*d"):
        A.lemma_value("UB", P15, 1e4, 0, 0.0, j=3)
    with pytest.raises(InvalidArgument):
        A.lemma_value("L2", P15, 1e4, 0, 0.0)
    with pytest.raises(InvalidArgument):
        A.lemma_value("nope", P15, 1e4, 0, 0.0)


def test_kappa():
    kappa = A.kappa_constant(P2)
    assert kappa == pytest.approx(KAPPA_D2_A4_B2, rel=1e-10)
    assert kappa == pytest.approx(kappa_beta2_d2(), rel=1e-10)
    assert kappa < math.pi
    assert A.kappa_constant(ModelParams(2, 4, 2, 1e6)) == pytest.approx(math.pi, rel=1e-3)
    with pytest.raises(RegimeError):
        A.kappa_constant(ModelParams(2, 4, 1))


def test_kappa_monte_carlo():
    rng = np.random.default_rng(21)
    n = 10**7
    rad = np.sqrt(rng.random(n))  # uniform in the unit disk
    w = (1 - rng.random(n)) ** -0.5
    est = math.pi * np.mean(-np.expm1(-w / rad ** 4))
    assert abs(est / A.kappa_constant(P2) - 1) < 0.01


def test_rho_and_q():
    kappa = A.kappa_constant(P2)
    rho = A.rho_root(P2, kappa)
    assert rho == pytest.approx(RHO_D2_A4_B2, abs=1e-10)
    assert abs(A.Q_of_gamma(P2, kappa, rho) - 1) < 1e-10
    assert A.Q_of_gamma(P2, kappa, rho - 1e-6) < 1 < A.Q_of_gamma(P2, kappa, rho + 1e-6)
    grid = np.linspace(0.01, 50, 100)
    q = A.Q_of_gamma(P2, kappa, grid)
    assert np.all(np.diff(q) > 0)
    assert A.Q_of_gamma(P2, kappa, 1e-9) < 1e-9
    t = A.T_of_gamma(P2, kappa, grid)
    assert np.all((t > 0) & (t < 1))


def test_hat_radius():
    kappa = A.kappa_constant(P2)
    rho = A.rho_root(P2, kappa)
    assert A.hat_radius(P2, kappa, 5000, rho) == pytest.approx(RHAT_D2_A4_B2_RHO_S5000, rel=1e-10)
    assert A.hat_radius(P2, kappa, 5000, 2 * rho) ** 2 == pytest.approx(2 * A.hat_radius(P2, kappa, 5000, rho) ** 2)
    assert A.hat_radius(P2, kappa, 1e12, rho) < A.hat_radius(P2, kappa, 1e6, rho)
    with pytest.raises(InvalidArgument):
        A.hat_radius(P2, kappa, 1.0, rho)


def test_cover_factor():
    kappa = A.kappa_constant(P2)
    rho = A.rho_root(P2, kappa)
    assert A.cover_factor(P2, kappa, rho / 2) == 1.0
    b = A.cover_factor(P2, kappa, 2 * rho)
    assert b > 1
    assert 2 * rho * A.T_of_gamma(P2, kappa, 2 * rho / b) > 1
