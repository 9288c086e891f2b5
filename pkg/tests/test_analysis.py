import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from satsis.analysis import (PersistenceCondition, endemic_limit_di,
                             endemic_limit_ds, harnack_ratio,
                             high_risk_threshold, local_r0, lyapunov_di,
                             lyapunov_ds, ode_pointwise_limit,
                             persistence_conditions_ds, solve_Sstar,
                             sstar_objective, support_from_initial)
from satsis.core import (DimensionError, DomainAssumptionError, EpidemicState,
                         build_grid, sample_field)

G = build_grid(400)


def const(v, n=400):
    return np.full(n, float(v))


def sim1(beta):
    return (sample_field(beta, G, "beta").values,
            sample_field("affine(5,1)", G, "gamma").values,
            sample_field("half_ramp", G, "m").values)


def cosine_initial(scale=1.0):
    S0 = scale * sample_field("scaled_cosine(1,2)", G, "initial").values
    I0 = scale * sample_field("scaled_cosine(1,1.5)", G, "initial").values
    return S0, I0


coefficient_rows = st.lists(
    st.tuples(st.floats(0.1, 5), st.floats(0.01, 3), st.floats(0, 2)),
    min_size=3, max_size=40)


class TestThreshold:
    def test_no_saturation(self):
        assert high_risk_threshold(const(2), const(1), const(0), G) == 0

    def test_closed_form_for_beta_six(self):
        # int_0^1/2 (1-2x)(5+x) dx = 31/24
        assert high_risk_threshold(*sim1("affine(6,1)"), G) == pytest.approx(
            31 / 24, abs=1e-5)

    def test_requires_high_risk(self):
        with pytest.raises(DomainAssumptionError):
            high_risk_threshold(*sim1("affine(5,1)"), G)


class TestEndemicDS:
    def test_constant_coefficients(self):
        pred = endemic_limit_ds(const(2), const(1), const(1), G, 3.5)
        assert pred.I_tilde == pytest.approx(1.25)
        np.testing.assert_allclose(pred.S_tilde, 2.25)
        assert pred.mass(G) == pytest.approx(3.5)

    def test_beta_six(self):
        pred = endemic_limit_ds(*sim1("affine(6,1)"), G, 3.5)
        # (3.5 - 31/24) / int (6 + x)
        assert pred.I_tilde == pytest.approx((3.5 - 31 / 24) / 6.5, abs=1e-6)
        assert pred.I_tilde == pytest.approx(0.33974, abs=1e-5)
        assert pred.feasible

    def test_infeasible(self):
        pred = endemic_limit_ds(*sim1("affine(5.1,1)"), G, 3.5)
        assert not pred.feasible
        assert pred.S_tilde is None and pred.I_tilde == 0
        assert np.isnan(pred.mass(G))

    def test_rejects_nonpositive_N(self):
        with pytest.raises(ValueError):
            endemic_limit_ds(const(2), const(1), const(1), G, 0.0)

    @given(coefficient_rows, st.floats(0.1, 50))
    @settings(max_examples=100)
    def test_mass_identity(self, rows, N):
        beta, gamma, m = (np.array(c) for c in zip(*rows))
        beta = gamma + beta
        g = build_grid(len(beta))
        pred = endemic_limit_ds(beta, gamma, m, g, N)
        assume(pred.feasible)
        assert pred.mass(g) == pytest.approx(N, rel=1e-10)


class TestPersistence:
    def test_no_saturation(self):
        S0, I0 = cosine_initial()
        cond = persistence_conditions_ds(S0, I0, const(2), const(1),
                                         const(0), G, 3.5)
        assert cond is PersistenceCondition.COND_I

    def test_cosine_initial_data_inconclusive(self):
        S0, I0 = cosine_initial()
        cond = persistence_conditions_ds(S0, I0, *sim1("affine(6,1)"), G, 3.5)
        assert cond is PersistenceCondition.NONE

    def test_dominating_susceptibles(self):
        _, I0 = cosine_initial()
        cond = persistence_conditions_ds(const(10), I0, *sim1("affine(6,1)"),
                                         G, 3.5)
        assert cond is PersistenceCondition.COND_I

    def test_small_infection_below_profile(self):
        beta, gamma, m = const(2), const(1), const(1)
        # profile m gamma/(beta-gamma) = 1, bound (N-1)/1
        cond = persistence_conditions_ds(const(0.5), const(0.5), beta, gamma,
                                         m, G, 3.0)
        assert cond is PersistenceCondition.COND_II

    def test_below_threshold_refused(self):
        S0, I0 = cosine_initial()
        with pytest.raises(DomainAssumptionError):
            persistence_conditions_ds(S0, I0, *sim1("affine(5.1,1)"), G, 3.5)


class TestEndemicDI:
    def test_constant_case(self):
        pred = endemic_limit_di(const(2.5), const(1), const(0.1), G, 3.5)
        assert pred.S_hat == pytest.approx(1.44)
        np.testing.assert_allclose(pred.I_hat, 2.06)
        assert pred.mass(G) == pytest.approx(3.5)
        assert pred.conditions["hyp_sum"]
        assert not pred.conditions["extinction"]

    def test_no_saturation(self):
        pred = endemic_limit_di(const(2), const(1), const(0), G, 3.5)
        assert pred.S_hat == pytest.approx(1.75)
        np.testing.assert_allclose(pred.I_hat, 1.75)

    def test_extinction_hypothesis(self):
        pred = endemic_limit_di(const(2), const(1), const(4), G, 3.5)
        assert pred.conditions["extinction"]
        assert pred.conditions["extinct_cells"].all()

    def test_support_restriction(self):
        support = G.centers < 0.5
        pred = endemic_limit_di(const(2), const(1), const(0), G, 3.5, support)
        # (N + 0) / (1 + 0.5)
        assert pred.S_hat == pytest.approx(3.5 / 1.5)
        assert np.all(pred.I_hat[~support] == 0)
        with pytest.raises(DimensionError):
            endemic_limit_di(const(2), const(1), const(0), G, 3.5,
                             np.ones(3, bool))

    @given(coefficient_rows, st.floats(0.1, 50))
    @settings(max_examples=100)
    def test_mass_identity(self, rows, N):
        beta, gamma, m = (np.array(c) for c in zip(*rows))
        beta = gamma + beta
        g = build_grid(len(beta))
        pred = endemic_limit_di(beta, gamma, m, g, N)
        assume(np.all(pred.I_hat >= 0))
        assert pred.mass(g) == pytest.approx(N, rel=1e-10)


class TestSstar:
    def test_linear_case(self):
        sol = solve_Sstar(const(1.5), const(1), const(0), G, 3.5)
        assert sol.S_star == pytest.approx(3.5 / 1.5, abs=1e-12)
        np.testing.assert_allclose(sol.I_limit, 3.5 / 3, atol=1e-12)

    def test_saturated_extinction(self):
        sol = solve_Sstar(const(1.5), const(1), const(1), G, 1.0)
        assert sol.S_star == 1.0
        assert np.all(sol.I_limit == 0)
        assert sol.iterations == 0

    def test_hypothesis_violation(self):
        with pytest.raises(DomainAssumptionError):
            solve_Sstar(const(3), const(1), const(0), G, 3.5)
        # outside the support the slope bound is not needed
        sol = solve_Sstar(const(3), const(1), const(0), G, 3.5,
                          support=G.centers < 0.25)
        assert sol.residual <= 1e-10

    def test_objective(self):
        assert sstar_objective(2.0, const(1.5), const(1), const(0.5), G,
                               3.5) == pytest.approx(2.0 + 0.5 - 3.5)

    @given(coefficient_rows, st.floats(0.1, 50))
    @settings(max_examples=100)
    def test_mass_identity_and_range(self, rows, N):
        beta, gamma, m = (np.array(c) for c in zip(*rows))
        g = build_grid(len(beta))
        assume(g.integrate(np.maximum(beta / gamma - 1, 0)) < 0.99)
        sol = solve_Sstar(beta, gamma, m, g, N)
        assert 0 < sol.S_star <= N / g.length
        assert sol.residual <= 1e-10
        assert g.length * sol.S_star + g.integrate(sol.I_limit) == \
            pytest.approx(N, abs=1e-10)


class TestOdeLimit:
    def test_endemic(self):
        S, I = ode_pointwise_limit(const(2), const(1), const(0), const(1), G)
        np.testing.assert_allclose(S, 0.5)
        np.testing.assert_allclose(I, 0.5)

    def test_threshold_case_goes_extinct(self):
        r0 = local_r0(const(2), const(1), const(1), const(1))
        assert np.all(r0 == 1)
        S, I = ode_pointwise_limit(const(2), const(1), const(1), const(1), G)
        np.testing.assert_allclose(S, 1)
        assert np.all(I == 0)

    @given(st.floats(0.01, 5), st.floats(0, 1), st.floats(0, 3),
           st.one_of(st.just(0.0), st.floats(1e-6, 10)))
    def test_low_risk_below_one(self, beta, excess, m, n):
        gamma = beta + excess + 1e-6
        assert local_r0([beta], [gamma], [m], [n])[0] < 1

    def test_empty_cell(self):
        assert local_r0([2.0], [1.0], [0.0], [0.0])[0] == 0
        with pytest.raises(ValueError):
            ode_pointwise_limit(const(2), const(1), const(0), const(-1), G)


class TestMonitors:
    def test_harnack(self):
        assert harnack_ratio(const(0.3)) == 1.0
        assert harnack_ratio(np.array([1.0, 0.0, 2.0])) == np.inf
        assert harnack_ratio(np.array([1.0, 4.0])) == 4.0

    def test_lyapunov_ds_at_equilibrium(self):
        beta, gamma, m = sim1("affine(6,1)")
        pred = endemic_limit_ds(beta, gamma, m, G, 3.5)
        state = EpidemicState(0, pred.S_tilde, const(pred.I_tilde))
        expected = 0.5 * pred.I_tilde ** 2 * (
            G.integrate(gamma / (beta - gamma)) + G.length)
        assert lyapunov_ds(state, beta, gamma, m, G) == pytest.approx(
            expected, rel=1e-12)

    def test_lyapunov_ds_zero(self):
        beta, gamma, m = sim1("affine(6,1)")
        state = EpidemicState(0, gamma * m / (beta - gamma), const(0))
        assert lyapunov_ds(state, beta, gamma, m, G) == pytest.approx(
            0, abs=1e-15)

    def test_lyapunov_di_without_high_risk(self):
        state = EpidemicState(0, const(1.7), const(0))
        value = lyapunov_di(state, const(1), const(2), const(0), G)
        assert value == pytest.approx(1.7 ** 2 / 2)

    def test_lyapunov_di_weighted_part(self):
        state = EpidemicState(0, const(0), const(1))
        # gamma (I+m)^2 / (2 (beta-gamma)) = 1 * 4 / 2
        assert lyapunov_di(state, const(2), const(1), const(1), G) == \
            pytest.approx(2.0)

    def test_support_from_initial(self):
        mask = support_from_initial(np.array([0.0, 1e-4, 0.5]), 1e-3)
        assert mask.tolist() == [False, False, True]
