"""Constraint-row algebra: reachability forcing, invariance margins, and the
weighted composite row.

The composite row's less obvious terms each get an independent oracle here:
the exchange credit is checked against an exact finite difference of the
blended barrier value in the weight variable, and the forcing magnitude is
recomputed from raw barrier evaluations.
"""

import math

import numpy as np
import pytest

from cbfseq.constraints import (
    ClassKappa,
    CompositeContext,
    FcbfParams,
    composite_row,
    fcbf_row,
    weighted_softmin,
    zcbf_row,
)
from cbfseq.dynamics import ControlAffineSystem, single_integrator, unicycle
from cbfseq.geometry import EllipsoidBarrier, softmin

UNIT_CIRCLE = EllipsoidBarrier(center=(0.0, 0.0), semi_axes=(1.0, 1.0))
SI = single_integrator()


def drifting_planar(fx, fy):
    """Planar system with constant drift, for exercising the Lf h terms."""
    f = np.array([fx, fy])
    eye = np.eye(2)
    return ControlAffineSystem(
        name="drifting",
        state_dim=2,
        input_dim=2,
        drift=lambda x: f,
        control_matrix=lambda x: eye,
    )


class TestClassKappa:
    def test_linear_and_cubic_values(self):
        assert ClassKappa.linear(2.0)(0.5) == pytest.approx(1.0)
        assert ClassKappa.cubic(20.0)(0.1) == pytest.approx(0.02)
        assert ClassKappa(1.5, 5)(-1.0) == pytest.approx(-1.5)

    def test_odd_symmetry_and_zero(self):
        mu = ClassKappa.cubic(3.0)
        assert mu(0.0) == 0.0
        for h in (0.2, 1.1, 4.0):
            assert mu(-h) == pytest.approx(-mu(h))

    def test_strictly_increasing(self):
        mu = ClassKappa(0.7, 3)
        grid = np.linspace(-2.0, 2.0, 41)
        vals = [mu(h) for h in grid]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_validation(self):
        with pytest.raises(ValueError):
            ClassKappa(0.0, 1)
        with pytest.raises(ValueError):
            ClassKappa(-1.0, 3)
        with pytest.raises(ValueError):
            ClassKappa(1.0, 2)
        with pytest.raises(ValueError):
            ClassKappa(1.0, 0)
        with pytest.raises(ValueError):
            ClassKappa(1.0, True)


class TestFcbfParams:
    def test_forcing_values(self):
        p = FcbfParams(gamma=1.0, rho=0.5)
        assert p.forcing(4.0) == pytest.approx(2.0)
        assert p.forcing(-4.0) == pytest.approx(-2.0)
        assert p.forcing(0.0) == 0.0

    def test_rho_zero_is_a_signum(self):
        p = FcbfParams(gamma=3.0, rho=0.0)
        assert p.forcing(0.01) == pytest.approx(3.0)
        assert p.forcing(-0.01) == pytest.approx(-3.0)
        assert p.forcing(0.0) == 0.0

    def test_odd_symmetry(self):
        p = FcbfParams(gamma=2.5, rho=0.8)
        rng = np.random.default_rng(2)
        for h in rng.uniform(0.01, 5.0, size=50):
            assert p.forcing(-h) == pytest.approx(-p.forcing(h), abs=1e-15)

    def test_validation(self):
        with pytest.raises(ValueError):
            FcbfParams(gamma=0.0)
        with pytest.raises(ValueError):
            FcbfParams(gamma=-1.0)
        with pytest.raises(ValueError):
            FcbfParams(rho=1.0)
        with pytest.raises(ValueError):
            FcbfParams(rho=-0.1)


class TestReachabilityRow:
    def test_outside_circle_example(self):
        # h = -3, grad = (-4, 0): row is -4 u_x >= sqrt(3)
        row = fcbf_row(UNIT_CIRCLE, SI, np.array([2.0, 0.0]), FcbfParams(1.0, 0.5))
        np.testing.assert_allclose(row.a, [-4.0, 0.0], atol=1e-12)
        assert row.b == pytest.approx(math.sqrt(3.0), abs=1e-12)
        assert row.label == "reach"

    def test_boundary_rhs_vanishes(self):
        row = fcbf_row(UNIT_CIRCLE, SI, np.array([1.0, 0.0]), FcbfParams(1.0, 0.5))
        np.testing.assert_allclose(row.a, [-2.0, 0.0], atol=1e-12)
        assert row.b == 0.0

    def test_rho_zero_demands_gamma(self):
        row = fcbf_row(UNIT_CIRCLE, SI, np.array([2.0, 0.0]), FcbfParams(2.0, 0.0))
        assert row.b == pytest.approx(2.0)

    def test_drift_enters_rhs(self):
        # Lf h = grad . f = (-4, 0) . (1, 2) = -4, so b = 4 + sqrt(3)
        row = fcbf_row(
            UNIT_CIRCLE, drifting_planar(1.0, 2.0), np.array([2.0, 0.0]), FcbfParams(1.0, 0.5)
        )
        assert row.b == pytest.approx(4.0 + math.sqrt(3.0), abs=1e-12)

    def test_unicycle_row_cannot_use_omega(self):
        # position barriers have zero heading gradient, so the omega column dies
        row = fcbf_row(UNIT_CIRCLE, unicycle(), np.array([2.0, 0.0, 0.3]), FcbfParams())
        assert row.a.shape == (2,)
        assert row.a[1] == 0.0
        assert row.a[0] == pytest.approx(-4.0 * math.cos(0.3), abs=1e-12)


class TestInvarianceRow:
    def test_inside_circle_example(self):
        # h = 0.75, grad = (-1, 0), mu = 2 h: row is -u_x >= -1.5
        row = zcbf_row(UNIT_CIRCLE, SI, np.array([0.5, 0.0]), ClassKappa.linear(2.0))
        np.testing.assert_allclose(row.a, [-1.0, 0.0], atol=1e-12)
        assert row.b == pytest.approx(-1.5, abs=1e-12)
        assert row.label == "safe"

    def test_boundary_rhs_is_minus_drift_term(self):
        row = zcbf_row(
            UNIT_CIRCLE, drifting_planar(0.5, 0.0), np.array([1.0, 0.0]), ClassKappa.cubic(20.0)
        )
        # Lf h = (-2, 0) . (0.5, 0) = -1 and mu(0) = 0
        assert row.b == pytest.approx(1.0, abs=1e-12)

    def test_arbitrary_callable_margin(self):
        row = zcbf_row(UNIT_CIRCLE, SI, np.array([0.5, 0.0]), lambda h: 4.0 * math.tanh(h))
        assert row.b == pytest.approx(-4.0 * math.tanh(0.75), abs=1e-12)

    def test_forcing_margin_reproduces_reachability_row(self):
        params = FcbfParams(gamma=1.7, rho=0.3)
        rng = np.random.default_rng(31)
        for _ in range(100):
            state = rng.uniform(-2.0, 2.0, size=2)
            a_ = fcbf_row(UNIT_CIRCLE, SI, state, params)
            b_ = zcbf_row(UNIT_CIRCLE, SI, state, params.forcing)
            assert (a_.a == b_.a).all()
            assert a_.b == b_.b

    def test_custom_labels_propagate(self):
        row = fcbf_row(UNIT_CIRCLE, SI, np.array([2.0, 0.0]), FcbfParams(), label="goal_a")
        assert row.label == "goal_a"
        row = zcbf_row(UNIT_CIRCLE, SI, np.array([0.5, 0.0]), ClassKappa.linear(1.0), label="wall")
        assert row.label == "wall"


class TestWeightedSoftmin:
    def test_matches_direct_softmin_of_products(self):
        rng = np.random.default_rng(41)
        for _ in range(200):
            m = int(rng.integers(1, 6))
            alpha = rng.uniform(0.0, 1.0, size=m)
            values = rng.normal(0.0, 2.0, size=m)
            assert weighted_softmin(alpha, values) == softmin(alpha * values)

    def test_all_zero_weights_literal_floor(self):
        for m in range(1, 6):
            got = weighted_softmin(np.zeros(m), np.full(m, 9.9))
            assert got == pytest.approx(-math.log(m), abs=1e-12)

    def test_active_only_drops_zero_weights(self):
        alpha = np.array([0.0, 0.6, 0.0, 0.4])
        values = np.array([100.0, 1.0, -50.0, 2.0])
        got = weighted_softmin(alpha, values, active_only=True)
        assert got == softmin(np.array([0.6, 0.8]))

    def test_active_only_rejects_all_zero(self):
        with pytest.raises(ValueError):
            weighted_softmin(np.zeros(3), np.ones(3), active_only=True)


class TestCompositeContext:
    def mk(self, m=2, **over):
        kw = dict(
            barriers=tuple(
                EllipsoidBarrier(center=(i, 0.0), semi_axes=(0.5, 0.5)) for i in range(m)
            ),
            alpha=np.full(m, 1.0 / m),
            alpha_dot=np.zeros(m),
            gamma=1.0,
        )
        kw.update(over)
        return CompositeContext(**kw)

    def test_valid_construction(self):
        ctx = self.mk()
        assert len(ctx.barriers) == 2
        assert ctx.gamma == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            self.mk(barriers=())
        with pytest.raises(ValueError):
            self.mk(alpha=np.zeros(3))
        with pytest.raises(ValueError):
            self.mk(alpha_dot=np.zeros(1))
        with pytest.raises(ValueError):
            self.mk(alpha=np.array([1.2, 0.0]))
        with pytest.raises(ValueError):
            self.mk(alpha=np.array([-0.1, 0.5]))
        with pytest.raises(ValueError):
            self.mk(alpha=np.array([np.nan, 0.5]))
        with pytest.raises(ValueError):
            self.mk(gamma=0.0)
        with pytest.raises(ValueError):
            self.mk(gamma=-2.0)


def goal_pair():
    # the two-goal layout used throughout the harness tests
    return (
        EllipsoidBarrier(center=(0.0, 0.35), semi_axes=(0.3, 0.3)),
        EllipsoidBarrier(center=(0.0, -0.35), semi_axes=(0.3, 0.3)),
    )


class TestCompositeRow:
    def test_single_barrier_reduces_to_tanh_forced_row(self):
        gamma = 1.3
        rng = np.random.default_rng(51)
        for _ in range(100):
            state = rng.uniform(-2.0, 2.0, size=2)
            ctx = CompositeContext(
                barriers=(UNIT_CIRCLE,), alpha=np.array([1.0]), alpha_dot=np.array([0.0]),
                gamma=gamma,
            )
            got = composite_row(ctx, SI, state)
            ref = zcbf_row(UNIT_CIRCLE, SI, state, lambda h: gamma * math.tanh(h))
            assert np.max(np.abs(got.a - ref.a)) <= 1e-12
            assert abs(got.b - ref.b) <= 1e-12

    def test_zero_weights_pin_rhs_to_tanh_log_m(self):
        # all alpha_i = 0 leaves a = 0 and b = gamma tanh(ln m) = gamma (m^2-1)/(m^2+1)
        gamma = 2.0
        for m in range(2, 6):
            barriers = tuple(
                EllipsoidBarrier(center=(i, 0.0), semi_axes=(0.4, 0.4)) for i in range(m)
            )
            ctx = CompositeContext(
                barriers=barriers, alpha=np.zeros(m), alpha_dot=np.zeros(m), gamma=gamma
            )
            row = composite_row(ctx, SI, np.array([5.0, 5.0]))
            np.testing.assert_array_equal(row.a, np.zeros(2))
            assert row.b == pytest.approx(gamma * (m * m - 1.0) / (m * m + 1.0), abs=1e-12)

    def test_exchange_credit_matches_weight_derivative(self):
        # b(alpha_dot) - b(0) must equal d/ds sum_i (alpha + s alpha_dot)_i h_i at s = 0,
        # evaluated by exact central difference on the raw barrier values
        barriers = goal_pair()
        rng = np.random.default_rng(61)
        for _ in range(100):
            state = rng.uniform(-1.0, 1.0, size=2)
            alpha = rng.uniform(0.1, 0.9, size=2)
            alpha_dot = rng.uniform(-2.0, 2.0, size=2)
            ctx = CompositeContext(barriers, alpha, alpha_dot, 1.0)
            ctx0 = CompositeContext(barriers, alpha, np.zeros(2), 1.0)
            got = composite_row(ctx, SI, state).b - composite_row(ctx0, SI, state).b
            h = np.array([b.evaluate(state).value for b in barriers])
            eps = 1e-3
            blended = lambda s: float((alpha + s * alpha_dot) @ h)
            ref = (blended(eps) - blended(-eps)) / (2.0 * eps)
            assert got == pytest.approx(ref, abs=1e-9)

    def test_handoff_rates_shift_rhs_by_barrier_gap(self):
        # rates (-1, +1) at fixed weights change b by exactly h_2 - h_1
        barriers = goal_pair()
        state = np.array([-0.4, 0.1])
        alpha = np.array([0.5, 0.5])
        with_rates = CompositeContext(barriers, alpha, np.array([-1.0, 1.0]), 1.0)
        frozen = CompositeContext(barriers, alpha, np.zeros(2), 1.0)
        h = [b.evaluate(state).value for b in barriers]
        diff = composite_row(with_rates, SI, state).b - composite_row(frozen, SI, state).b
        assert diff == pytest.approx(h[1] - h[0], abs=1e-12)

    def test_ramping_in_a_farther_barrier_relaxes_the_row(self):
        # near the outgoing goal the incoming barrier is more negative, so the
        # exchange credit h_2 - h_1 < 0 lowers b: the handoff demands nothing
        barriers = goal_pair()
        state = np.array([-0.4, 0.5])
        alpha = np.array([0.5, 0.5])
        ctx = CompositeContext(barriers, alpha, np.array([-1.0, 1.0]), 1.0)
        ctx0 = CompositeContext(barriers, alpha, np.zeros(2), 1.0)
        h = [b.evaluate(state).value for b in barriers]
        assert h[1] < h[0] < 0.0
        relaxed = composite_row(ctx, SI, state).b
        frozen = composite_row(ctx0, SI, state).b
        assert relaxed == pytest.approx(frozen + h[1] - h[0], abs=1e-12)
        assert relaxed < frozen

    def test_forcing_magnitude_bounded_by_gamma(self):
        # stripping the drift and exchange terms must leave exactly the tanh
        # forcing, whose magnitude never exceeds gamma
        barriers = goal_pair()
        rng = np.random.default_rng(71)
        system = drifting_planar(0.3, -0.2)
        for _ in range(300):
            state = rng.uniform(-1.5, 1.5, size=2)
            alpha = rng.uniform(0.0, 1.0, size=2)
            alpha_dot = rng.uniform(-2.0, 2.0, size=2)
            gamma = float(rng.uniform(0.3, 3.0))
            ctx = CompositeContext(barriers, alpha, alpha_dot, gamma)
            row = composite_row(ctx, system, state)
            evals = [b.evaluate(state) for b in barriers]
            h = np.array([e.value for e in evals])
            lf = np.array([float(e.gradient @ system.drift(state)) for e in evals])
            forcing = row.b + float(alpha @ lf) - float(alpha_dot @ h)
            sm = softmin(alpha * h)
            assert forcing == pytest.approx(-gamma * math.tanh(sm), abs=1e-12)
            # |tanh| < 1 so the bound is strict in exact arithmetic; the
            # reconstruction above can sit a few ulps over when tanh saturates
            assert abs(forcing) <= gamma + 1e-12

    def test_single_active_weight_gradient_matches_plain_row(self):
        barriers = goal_pair() + (UNIT_CIRCLE,)
        state = np.array([0.3, -0.2])
        alpha = np.array([0.0, 1.0, 0.0])
        ctx = CompositeContext(barriers, alpha, np.zeros(3), 1.0)
        row = composite_row(ctx, SI, state)
        plain = zcbf_row(barriers[1], SI, state, lambda h: math.tanh(h))
        np.testing.assert_allclose(row.a, plain.a, atol=1e-15)

    def test_active_only_softmin_drops_the_padding_bias(self):
        barriers = goal_pair() + (UNIT_CIRCLE,)
        state = np.array([0.3, -0.2])
        alpha = np.array([0.0, 1.0, 0.0])
        ctx = CompositeContext(barriers, alpha, np.zeros(3), 1.0)
        literal = composite_row(ctx, SI, state)
        active = composite_row(ctx, SI, state, active_only=True)
        h1 = barriers[1].evaluate(state).value
        # active-only sees softmin([h1]) = h1; literal sees softmin([0, h1, 0])
        padded = softmin(np.array([0.0, h1, 0.0]))
        expect = -math.tanh(padded) + math.tanh(h1)
        assert literal.b - active.b == pytest.approx(expect, abs=1e-12)
        # and the active-only row equals the single-barrier composite
        solo = CompositeContext((barriers[1],), np.array([1.0]), np.array([0.0]), 1.0)
        assert active.b == pytest.approx(composite_row(solo, SI, state).b, abs=1e-12)

    def test_row_label_default_and_override(self):
        ctx = CompositeContext(goal_pair(), np.array([1.0, 0.0]), np.zeros(2), 1.0)
        assert composite_row(ctx, SI, np.zeros(2)).label == "reach"
        assert composite_row(ctx, SI, np.zeros(2), label="blend").label == "blend"
