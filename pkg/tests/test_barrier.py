"""Restricted potential function and weighted norms."""
import math

import numpy as np
import pytest

from simlab.barrier import BarrierFunction, weighted_norm
from simlab.errors import DomainExceeded, NonPDWeight, ValidationError


class TestWeightedNorm:
    def test_zero_vector(self):
        assert weighted_norm(np.zeros(3), np.eye(3)) == 0.0

    def test_diagonal_hand_value(self):
        assert weighted_norm([1.0, -2.0], np.diag([1.0, 0.5])) == pytest.approx(math.sqrt(3.0))

    def test_identity_is_euclidean(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            y = rng.normal(size=4)
            assert weighted_norm(y, np.eye(4)) == pytest.approx(float(np.linalg.norm(y)))

    def test_non_pd_weight_rejected(self):
        with pytest.raises(NonPDWeight):
            weighted_norm([1.0, 0.0], -np.eye(2))


class TestPotential:
    def test_at_origin(self):
        bar = BarrierFunction(mu=300.0)
        assert bar.potential(0.0) == 0.0
        assert bar.potential_derivative(0.0) == pytest.approx(1.1111111111111112e-05)

    def test_at_half_mu(self):
        bar = BarrierFunction(mu=300.0)
        assert bar.potential(150.0) == pytest.approx(1.0 / 3.0)
        assert bar.potential_derivative(150.0) == pytest.approx(1.9753086419753087e-05)

    def test_domain_exceeded_at_boundary(self):
        bar = BarrierFunction(mu=300.0)
        with pytest.raises(DomainExceeded):
            bar.potential(300.0)
        with pytest.raises(DomainExceeded):
            bar.potential_derivative(301.0)

    def test_negative_argument_rejected(self):
        bar = BarrierFunction(mu=1.0)
        with pytest.raises(ValueError):
            bar.potential(-0.1)

    def test_invalid_mu(self):
        with pytest.raises(ValidationError, match="mu_positive"):
            BarrierFunction(mu=0.0)

    def test_unknown_form(self):
        with pytest.raises(ValidationError, match="known_form"):
            BarrierFunction(mu=1.0, form="sinh")


class TestPotentialProperties:
    @pytest.mark.parametrize("mu", [1.0, 17.5, 300.0])
    def test_chain_rule_by_finite_differences(self, mu):
        # oracle: central difference of Upsilon must equal 2 z Upsilon_d(z)
        bar = BarrierFunction(mu=mu)
        h = 1e-7 * mu
        for z in np.linspace(h, 0.99 * mu, 100):
            deriv_fd = (bar.potential(z + h) - bar.potential(z - h)) / (2 * h)
            chain = 2.0 * z * bar.potential_derivative(z)
            assert abs(deriv_fd - chain) < 1e-6 * (1.0 + abs(deriv_fd))

    @pytest.mark.parametrize("mu", [0.5, 300.0])
    def test_monotone_on_domain(self, mu):
        bar = BarrierFunction(mu=mu)
        grid = np.linspace(0.0, 0.999 * mu, 500)
        pots = [bar.potential(z) for z in grid]
        derivs = [bar.potential_derivative(z) for z in grid]
        assert all(b >= a for a, b in zip(pots, pots[1:]))
        assert all(b >= a for a, b in zip(derivs, derivs[1:]))
        assert all(d > 0 for d in derivs)

    @pytest.mark.parametrize("mu", [0.1, 2.0, 300.0])
    def test_blow_up_near_bound(self, mu):
        bar = BarrierFunction(mu=mu)
        assert bar.potential_derivative(0.999 * mu) / bar.potential_derivative(0.0) > 1e4
