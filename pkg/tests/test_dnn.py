"""Network forward pass, switching schedule, and both adaptation laws."""
import math

import numpy as np
import pytest

from simlab.barrier import BarrierFunction
from simlab.dnn import (
    AdaptationConfig,
    AgentNetwork,
    BoundEstimates,
    DeepNetworkArch,
    VBoundReport,
    active_layer,
    check_v_bound,
    forward,
    init_network,
    inner_update,
    outer_update,
    psi_constant,
    switch_signal,
)
from simlab.errors import BoundViolated, ValidationError

# mu chosen so that Upsilon_d(1) = 1 exactly: mu^2 = (mu^2 - 1)^2 at mu^2 = (3+sqrt(5))/2
GOLDEN_MU = math.sqrt((3 + math.sqrt(5)) / 2)
# mu with Upsilon_d(2) = 1: mu^2 = (9 + sqrt(17)) / 2
UNIT_AT_TWO_MU = math.sqrt((9 + math.sqrt(17)) / 2)


def small_adapt(k_w=None, k_v=None, v_lower=0.0, v_upper=10.0, **kw) -> AdaptationConfig:
    return AdaptationConfig(
        k_w=np.eye(2) if k_w is None else k_w,
        k_v=(np.ones((3, 2)),) if k_v is None else k_v,
        v_lower=v_lower,
        v_upper=v_upper,
        **kw,
    )


class TestForward:
    def test_zero_weights_give_zero(self):
        arch = DeepNetworkArch(input_dim=3, layer_widths=(4, 5), output_width=2)
        net = AgentNetwork(
            w_hat=np.zeros(2), v_hat=[np.zeros(s) for s in arch.weight_shapes]
        )
        rng = np.random.default_rng(0)
        for _ in range(10):
            f, rho = forward(net, arch, rng.normal(size=3))
            assert f == 0.0
            np.testing.assert_array_equal(rho, np.zeros(2))

    def test_scalar_composition(self):
        arch = DeepNetworkArch(input_dim=1, layer_widths=(), output_width=1)
        net = AgentNetwork(w_hat=np.array([3.0]), v_hat=[np.array([[2.0]])])
        f, rho = forward(net, arch, [0.5])
        assert rho[0] == pytest.approx(math.tanh(1.0))
        assert f == pytest.approx(3.0 * math.tanh(1.0))
        assert f == pytest.approx(2.28478, abs=1e-5)

    def test_feature_norm_bounded_by_sqrt_p(self):
        arch = DeepNetworkArch(input_dim=2, layer_widths=(4,), output_width=6)
        rng = np.random.default_rng(12)
        for _ in range(1000):
            net = init_network(arch, rng, -5.0, 5.0)
            _, rho = forward(net, arch, rng.uniform(-10, 10, size=2))
            assert np.linalg.norm(rho) <= math.sqrt(6) + 1e-12

    def test_deep_composition_matches_manual(self):
        arch = DeepNetworkArch(input_dim=2, layer_widths=(3,), output_width=2)
        rng = np.random.default_rng(4)
        net = init_network(arch, rng, -1.0, 1.0)
        x = np.array([0.3, -0.7])
        a = net.v_hat[0].T @ x
        a = net.v_hat[1].T @ np.tanh(a)
        rho_manual = np.tanh(a)
        f, rho = forward(net, arch, x)
        np.testing.assert_allclose(rho, rho_manual, atol=1e-15)
        assert f == pytest.approx(float(net.w_hat @ rho_manual))


class TestArchitecture:
    def test_reference_shapes(self):
        arch = DeepNetworkArch(input_dim=3, layer_widths=(10, 12, 14, 15, 18), output_width=20)
        assert arch.inner_layers == 5
        assert arch.weight_shapes == ((3, 10), (10, 12), (12, 14), (14, 15), (15, 18), (18, 20))

    def test_invalid_width(self):
        with pytest.raises(ValidationError):
            DeepNetworkArch(input_dim=3, layer_widths=(0,), output_width=2)

    def test_unknown_activation(self):
        with pytest.raises(ValidationError):
            DeepNetworkArch(input_dim=1, layer_widths=(), output_width=1, inner_activation="relu")


class TestSwitchSignal:
    def cfg(self, n_layers=6, period=2.0, cyclic=True):
        return AdaptationConfig(
            k_w=np.eye(2),
            k_v=tuple(np.ones((2, 2)) for _ in range(n_layers)),
            v_lower=0.0,
            v_upper=10.0,
            switch_period=period,
            cyclic=cyclic,
        )

    def test_window_ownership(self):
        cfg = self.cfg()
        assert switch_signal(3.0, 1, cfg) == 1
        assert all(switch_signal(3.0, j, cfg) == 0 for j in range(6) if j != 1)

    def test_half_open_boundary(self):
        cfg = self.cfg()
        assert switch_signal(4.0, 2, cfg) == 1
        assert switch_signal(4.0, 1, cfg) == 0

    def test_cyclic_wraparound(self):
        cfg = self.cfg()
        assert switch_signal(13.0, 0, cfg) == 1

    def test_exactly_one_active(self):
        cfg = self.cfg()
        rng = np.random.default_rng(3)
        for t in rng.uniform(0, 60, size=200):
            assert sum(switch_signal(float(t), j, cfg) for j in range(6)) == 1

    def test_one_shot_freezes_after_sweep(self):
        cfg = self.cfg(cyclic=False)
        assert active_layer(3.0, cfg) == 1
        assert active_layer(12.0, cfg) is None
        assert all(switch_signal(12.5, j, cfg) == 0 for j in range(6))


class TestOuterUpdate:
    def test_zero_sliding_error(self):
        bar = BarrierFunction(mu=2.0)
        cfg = small_adapt()
        out = outer_update(np.array([0.5, -0.5]), 0.0, 1.0, 1.0, bar, cfg)
        np.testing.assert_array_equal(out, np.zeros(2))

    def test_scalar_hand_value(self):
        # Upsilon_d(|sqrt(1)*2|) = 1 for this mu, so the update is -K rho r p (d+b) = -1
        bar = BarrierFunction(mu=UNIT_AT_TWO_MU)
        cfg = AdaptationConfig(k_w=np.eye(1), k_v=(np.ones((1, 1)),), v_lower=0.0, v_upper=10.0)
        out = outer_update(np.array([0.5]), 2.0, 1.0, 1.0, bar, cfg)
        assert out[0] == pytest.approx(-1.0, abs=1e-12)

    def test_linear_in_gain(self):
        bar = BarrierFunction(mu=5.0)
        rho = np.array([0.4, -0.2])
        one = outer_update(rho, 1.2, 0.5, 2.0, bar, small_adapt())
        two = outer_update(rho, 1.2, 0.5, 2.0, bar, small_adapt(k_w=2 * np.eye(2)))
        np.testing.assert_allclose(two, 2.0 * one, atol=1e-15)

    def test_linear_in_r_at_fixed_barrier_argument(self):
        bar = BarrierFunction(mu=5.0)
        rho = np.array([0.4, -0.2])
        cfg = small_adapt()
        one = outer_update(rho, 1.0, 0.5, 2.0, bar, cfg, barrier_arg=2.0)
        two = outer_update(rho, 2.0, 0.5, 2.0, bar, cfg, barrier_arg=2.0)
        np.testing.assert_allclose(two, 2.0 * one, atol=1e-15)

    def test_block_aggregation_with_global_argument(self):
        # stacking the per-agent laws with the shared ||r||_P argument is the
        # intended block-diagonal form of the global law
        bar = BarrierFunction(mu=50.0)
        cfg = small_adapt()
        r = np.array([1.0, -2.0, 0.5])
        p = np.array([1.0, 0.5, 0.25])
        dpb = np.array([1.0, 2.0, 1.0])
        z = math.sqrt(float(r @ (p * r)))
        rhos = [np.array([0.1, 0.2]), np.array([-0.3, 0.4]), np.array([0.5, 0.6])]
        stacked = np.concatenate(
            [outer_update(rhos[i], r[i], p[i], dpb[i], bar, cfg, barrier_arg=z) for i in range(3)]
        )
        ups = bar.potential_derivative(z)
        expected = np.concatenate(
            [-(cfg.k_w @ rhos[i]) * (ups * r[i] * p[i] * dpb[i]) for i in range(3)]
        )
        np.testing.assert_allclose(stacked, expected, atol=1e-15)


class TestInnerUpdate:
    def net(self, scale=1.0):
        return AgentNetwork(w_hat=np.zeros(2), v_hat=[scale * np.ones((3, 2))])

    def test_switch_off_gives_exact_zero(self):
        bar = BarrierFunction(mu=5.0)
        cfg = small_adapt(switch_period=2.0)
        # with one layer the cycle is 2: layer 0 owns everything, so use a
        # two-layer config and ask for the inactive one
        cfg2 = AdaptationConfig(
            k_w=np.eye(2), k_v=(np.ones((3, 2)), np.ones((2, 2))), v_lower=0.0, v_upper=10.0
        )
        net = AgentNetwork(w_hat=np.zeros(2), v_hat=[np.ones((3, 2)), np.ones((2, 2))])
        out = inner_update(net, 1, 1.0, 1.0, 1.0, 0.5, bar, cfg2)
        assert np.array_equal(out, np.zeros((2, 2)))

    def test_indicator_off_above_band(self):
        bar = BarrierFunction(mu=5.0)
        cfg = small_adapt(v_upper=1.0)  # ||ones(3,2)||_F = sqrt(6) > 1
        out = inner_update(self.net(), 0, 1.0, 1.0, 1.0, 0.0, bar, cfg)
        assert np.array_equal(out, np.zeros((3, 2)))

    def test_indicator_off_below_band(self):
        bar = BarrierFunction(mu=5.0)
        cfg = small_adapt(v_lower=0.5, v_upper=10.0)
        out = inner_update(self.net(scale=1e-9), 0, 1.0, 1.0, 1.0, 0.0, bar, cfg)
        assert np.array_equal(out, np.zeros((3, 2)))

    def test_scalar_hand_value(self):
        # Upsilon_d(1) = 1 at the golden-ratio bound, so dV = -exp(-1/2)
        bar = BarrierFunction(mu=GOLDEN_MU)
        cfg = AdaptationConfig(k_w=np.eye(1), k_v=(np.ones((1, 1)),), v_lower=0.0, v_upper=10.0)
        net = AgentNetwork(w_hat=np.zeros(1), v_hat=[np.ones((1, 1))])
        out = inner_update(net, 0, 1.0, 1.0, 1.0, 0.0, bar, cfg)
        assert out[0, 0] == pytest.approx(-math.exp(-0.5), abs=1e-12)
        assert out[0, 0] == pytest.approx(-0.60653, abs=1e-5)


class TestVBound:
    def test_default_satisfied_with_gaussian_margin(self):
        bar = BarrierFunction(mu=10.0)
        cfg = small_adapt()
        report = check_v_bound(cfg, bar)
        assert isinstance(report, VBoundReport)
        assert report.tightest_margin <= 1.0
        assert report.psi == pytest.approx(math.sqrt(6))

    def test_zero_r_skipped(self):
        bar = BarrierFunction(mu=10.0)
        report = check_v_bound(small_adapt(), bar, r_values=[0.0])
        assert report.tightest_margin == 0.0

    def test_scaled_update_violates(self):
        bar = BarrierFunction(mu=10.0)
        with pytest.raises(BoundViolated) as err:
            check_v_bound(small_adapt(), bar, v_scale=2.0, psi=math.sqrt(6))
        assert abs(err.value.r) < 1.0  # violation happens near the origin

    def test_psi_constant(self):
        cfg = small_adapt(k_v=(np.ones((3, 2)), 2 * np.ones((2, 2))))
        assert psi_constant(cfg) == pytest.approx(4.0)


class TestInitAndValidation:
    def test_seeded_init_deterministic(self):
        arch = DeepNetworkArch(input_dim=2, layer_widths=(3,), output_width=2)
        a = init_network(arch, np.random.default_rng(5), -1.0, 1.0)
        b = init_network(arch, np.random.default_rng(5), -1.0, 1.0)
        np.testing.assert_array_equal(a.w_hat, b.w_hat)
        for va, vb in zip(a.v_hat, b.v_hat):
            np.testing.assert_array_equal(va, vb)
        assert np.all(np.abs(a.w_hat) <= 1.0)

    def test_band_order_enforced(self):
        with pytest.raises(ValidationError, match="band_order"):
            small_adapt(v_lower=2.0, v_upper=1.0)

    def test_rank_one_ones_gain_accepted(self):
        # constant ones-matrix outer gains are rank-one PSD and must load
        cfg = AdaptationConfig(
            k_w=10 * np.ones((4, 4)), k_v=(np.ones((2, 4)),), v_lower=0.0, v_upper=1.0
        )
        assert cfg.k_w.shape == (4, 4)

    def test_indefinite_gain_rejected(self):
        with pytest.raises(ValidationError, match="kw_psd"):
            AdaptationConfig(
                k_w=np.diag([1.0, -1.0]), k_v=(np.ones((2, 2)),), v_lower=0.0, v_upper=1.0
            )

    def test_bound_estimates_validation(self):
        with pytest.raises(ValidationError):
            BoundEstimates(w_m=1, v_m=1, rho_m=1, rho_hat_m=1, eps_m=-0.1, omega_m=0, f_m=1)
        bounds = BoundEstimates(w_m=1, v_m=1, rho_m=1, rho_hat_m=1, eps_m=0.0, omega_m=0, f_m=1)
        assert bounds.eps_m == 0.0
