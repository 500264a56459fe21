import math

import pytest

from cowsec.analytic import StrategyPoint, expected_statistics
from cowsec.optimizer import (
    Baseline,
    MixedStrategy,
    _grid_candidates,
    _solve_mixture_lp,
    component_point,
    mixture_combine,
    optimal_alice_intensity,
    optimize_attack,
)
from cowsec.photonics import ProtocolParams
from cowsec.simulator import AttackParams
from cowsec.strategies import (
    StatisticsMode,
    bob_reference_click_rate,
    bs_point,
    key_rate,
    strategy_click_rate,
)

PROTOCOL = ProtocolParams(0.5, 0.1, 0.1, 0.25, 150.0)


class TestMixedStrategy:
    def test_weight_sum_enforced(self):
        with pytest.raises(ValueError):
            MixedStrategy(components=((0.5, Baseline.BS),))

    def test_component_cap(self):
        comp = (0.25, Baseline.BS)
        with pytest.raises(ValueError):
            MixedStrategy(components=(comp, comp, comp, comp))

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            MixedStrategy(components=((-0.5, Baseline.BS), (1.5, Baseline.BLOCK)))


class TestMixtureCombine:
    def test_single_component_identity(self):
        point = bs_point(PROTOCOL)
        combined = mixture_combine([(1.0, point)], PROTOCOL)
        for field in ("emit_fraction", "control_fraction",
                      "eve_info_per_emitted_bit"):
            assert getattr(combined, field) == pytest.approx(
                getattr(point, field), rel=1e-12
            )
        assert strategy_click_rate(combined, PROTOCOL) == pytest.approx(
            strategy_click_rate(point, PROTOCOL), rel=1e-12
        )

    def test_two_identical_points(self):
        point = expected_statistics(PROTOCOL, AttackParams(1, 4, 0.2, 0.4, 0.4))
        combined = mixture_combine([(0.3, point), (0.7, point)], PROTOCOL)
        for field in ("emit_fraction", "control_fraction",
                      "eve_info_per_emitted_bit"):
            assert getattr(combined, field) == pytest.approx(
                getattr(point, field), rel=1e-12
            )

    def test_blocking_halves_click_rate(self):
        zero = StrategyPoint(0.0, 0.0, 0.0, 0.0)
        combined = mixture_combine(
            [(0.5, bs_point(PROTOCOL)), (0.5, zero)], PROTOCOL
        )
        assert strategy_click_rate(combined, PROTOCOL) == pytest.approx(
            0.5 * bob_reference_click_rate(PROTOCOL), rel=1e-12
        )

    def test_click_rate_is_weighted_sum(self):
        a = expected_statistics(PROTOCOL, AttackParams(0, 4, 0.3, 0.3, 0.3))
        b = expected_statistics(PROTOCOL, AttackParams(1, 2, 0.1, 0.5, 0.9))
        combined = mixture_combine([(0.4, a), (0.6, b)], PROTOCOL)
        want = 0.4 * strategy_click_rate(a, PROTOCOL) + 0.6 * strategy_click_rate(
            b, PROTOCOL
        )
        assert strategy_click_rate(combined, PROTOCOL) == pytest.approx(
            want, rel=1e-12
        )

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mixture_combine([], PROTOCOL)

    def test_bad_weights_rejected(self):
        with pytest.raises(ValueError):
            mixture_combine([(0.7, bs_point(PROTOCOL))], PROTOCOL)


class TestOptimizeAttack:
    def test_free_mode_pins_stage_one_trials(self):
        result = optimize_attack(PROTOCOL, StatisticsMode.FREE, 600, seed=2)
        for _, comp in result.best.components:
            if isinstance(comp, AttackParams):
                assert comp.t_sf1 == 0

    def test_beats_or_matches_bs(self):
        result = optimize_attack(PROTOCOL, StatisticsMode.STRICT, 800, seed=2)
        chi = bs_point(PROTOCOL).eve_info_per_emitted_bit
        assert result.eve_info >= chi - 1e-9
        assert result.key_rate_bound <= key_rate(PROTOCOL, bs_point(PROTOCOL)) + 1e-15

    def test_strictly_beats_bs_at_150km(self):
        result = optimize_attack(PROTOCOL, StatisticsMode.STRICT, 2000, seed=3)
        chi = bs_point(PROTOCOL).eve_info_per_emitted_bit
        assert result.feasible
        assert result.eve_info > chi
        assert abs(result.residuals.click_residual) <= 1e-4
        assert abs(result.residuals.control_residual) <= 1e-4

    def test_reproducible(self):
        a = optimize_attack(PROTOCOL, StatisticsMode.STRICT, 700, seed=9)
        b = optimize_attack(PROTOCOL, StatisticsMode.STRICT, 700, seed=9)
        assert a == b

    def test_monotone_across_budget_tiers(self):
        infos = [
            optimize_attack(PROTOCOL, StatisticsMode.STRICT, b, seed=5).eve_info
            for b in (64, 256, 1024, 4096)
        ]
        assert all(x <= y + 1e-12 for x, y in zip(infos, infos[1:]))

    def test_budget_one_returns_single_grid_point(self):
        result = optimize_attack(PROTOCOL, StatisticsMode.STRICT, 1, seed=5)
        assert result.evaluations == 1

    def test_relaxing_control_constraint_never_hurts_on_shared_candidates(self):
        # Dropping the control-fraction equality can only enlarge the
        # mixture LP's feasible set over a fixed candidate cloud.
        ref = bob_reference_click_rate(PROTOCOL)
        cands = _grid_candidates(PROTOCOL, StatisticsMode.FREE, "sf")[:150]
        points = [expected_statistics(PROTOCOL, a) for a in cands]
        points.append(component_point(PROTOCOL, Baseline.BS))
        import numpy as np

        def value(mode):
            w = _solve_mixture_lp(points, PROTOCOL, mode, ref)
            assert w is not None
            click = np.array(
                [strategy_click_rate(p, PROTOCOL) for p in points]
            )
            info = np.array([p.eve_info_per_emitted_bit for p in points])
            return float(w @ (click * info))

        assert value(StatisticsMode.FREE) >= value(StatisticsMode.STRICT) - 1e-12

    def test_usd_shape_components(self):
        result = optimize_attack(
            PROTOCOL, StatisticsMode.STRICT, 500, seed=4, shape="usd"
        )
        for _, comp in result.best.components:
            if isinstance(comp, AttackParams):
                assert comp.t_sf2 == 1
                assert math.isinf(comp.mu_e1) and math.isinf(comp.mu_e2)
            else:
                assert comp is Baseline.BLOCK

    def test_usd_infeasible_at_short_length(self):
        short = ProtocolParams(0.5, 0.1, 0.1, 0.25, 10.0)
        result = optimize_attack(
            short, StatisticsMode.STRICT, 400, seed=4, shape="usd"
        )
        assert not result.feasible
        assert result.eve_info == 0.0
        assert result.residuals.click_residual < 0  # best effort undershoots

    def test_bad_args(self):
        with pytest.raises(ValueError):
            optimize_attack(PROTOCOL, StatisticsMode.STRICT, 0, seed=1)
        with pytest.raises(ValueError):
            optimize_attack(PROTOCOL, StatisticsMode.STRICT, 10, seed=1,
                            shape="bs")


class TestOptimalAliceIntensity:
    def test_lossless_channel_bs_only_hits_upper_bracket(self):
        mu, rate = optimal_alice_intensity(
            (0.1, 0.25, 0.0), 0.1, StatisticsMode.STRICT, 10, attack="bs"
        )
        assert mu == 1.0
        assert rate == pytest.approx(0.9 * (1 - math.exp(-0.1)), rel=1e-12)

    def test_bracket_respected(self):
        mu, _ = optimal_alice_intensity(
            (0.1, 0.25, 100.0), 0.1, StatisticsMode.STRICT, 10, attack="bs"
        )
        assert 0.0 < mu <= 1.0
