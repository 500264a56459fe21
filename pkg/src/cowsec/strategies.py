"""Baseline attacks, Bob's no-attack reference, key-rate evaluation and
statistics-preservation residuals.

Key-rate convention (documented because the absolute scale of any key-rate
curve depends on it): the attack introduces no errors, so there is no
error-correction term and

    R = emit_fraction * (1 - control_fraction)
        * click_probability(eta, mu_delivered) * (1 - eve_info_per_emitted_bit)

i.e. the delivered-bit click rate times Eve's ignorance. Under exact
control-statistics preservation this equals (1-f) * click rate * (1 - info).
Comparisons between attacks are insensitive to the common prefactor.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import NamedTuple, Optional

import numpy as np

from .analytic import StrategyPoint, expected_statistics
from .photonics import (
    ProtocolParams,
    click_probability,
    holevo_binary,
    transmittance,
)
from .simulator import AttackParams


class StatisticsMode(Enum):
    """Which of Bob's checked statistics Eve must preserve."""

    STRICT = "strict"  # click rate and control fraction
    FREE = "free"  # click rate only


class ConstraintResiduals(NamedTuple):
    click_residual: float
    control_residual: float


def bob_reference_click_rate(protocol: ProtocolParams) -> float:
    """Bob's expected data-line click probability per signal absent Eve."""
    return click_probability(
        protocol.eta, protocol.transmittance * protocol.mu_a
    )


def strategy_click_rate(point: StrategyPoint, protocol: ProtocolParams) -> float:
    """Bob's click probability per signal under the attack: delivered signals
    arrive on a lossless line with intensity mu_delivered."""
    return point.emit_fraction * click_probability(
        protocol.eta, point.mu_delivered
    )


def constraint_residuals(
    point: StrategyPoint, protocol: ProtocolParams, mode: StatisticsMode
) -> ConstraintResiduals:
    click = strategy_click_rate(point, protocol) - bob_reference_click_rate(
        protocol
    )
    if mode is StatisticsMode.STRICT:
        control = point.control_fraction - protocol.f
    else:
        control = 0.0
    return ConstraintResiduals(click_residual=click, control_residual=control)


def bs_point(protocol: ProtocolParams) -> StrategyPoint:
    """Beam-splitting attack: Eve taps the loss fraction (1-t) and forwards
    the rest losslessly; her information is the Holevo value of the tapped
    states. Satisfies both constraints exactly."""
    t = protocol.transmittance
    return StrategyPoint(
        emit_fraction=1.0,
        control_fraction=protocol.f,
        eve_info_per_emitted_bit=holevo_binary((1.0 - t) * protocol.mu_a),
        mu_delivered=t * protocol.mu_a,
    )


def passthrough_point(protocol: ProtocolParams) -> StrategyPoint:
    """Eve abstains: Bob sees the plain lossy channel."""
    return StrategyPoint(
        emit_fraction=1.0,
        control_fraction=protocol.f,
        eve_info_per_emitted_bit=0.0,
        mu_delivered=protocol.transmittance * protocol.mu_a,
    )


def usd_like_point(
    protocol: ProtocolParams, attack: AttackParams
) -> StrategyPoint:
    """Expectations of the unambiguous-discrimination-like attack shape
    (both Eve record intensities infinite, a single stage-two success).
    Delivered bit signals then carry exactly one bit each."""
    if not (
        math.isinf(attack.mu_e1)
        and math.isinf(attack.mu_e2)
        and attack.t_sf2 == 1
    ):
        raise ValueError(
            "USD-like shape requires mu_e1 = mu_e2 = inf and t_sf2 = 1"
        )
    return expected_statistics(protocol, attack)


def key_rate(protocol: ProtocolParams, point: StrategyPoint) -> float:
    """Secret bits per signal under the documented zero-error convention."""
    rate = (
        point.emit_fraction
        * (1.0 - point.control_fraction)
        * click_probability(protocol.eta, point.mu_delivered)
        * (1.0 - point.eve_info_per_emitted_bit)
    )
    return max(rate, 0.0)


def usd_feasibility_threshold(
    eta: float,
    delta_db_per_km: float,
    length_km: float,
    f: float = 0.1,
    mode: StatisticsMode = StatisticsMode.FREE,
    mu_a_max: float = 1.0,
    grid_points: int = 48,
    bisect_iters: int = 40,
) -> Optional[float]:
    """Largest Alice intensity in (0, mu_a_max] at which some USD-like attack
    can reach Bob's reference click rate (click_residual >= 0), or None if no
    intensity in the bracket is feasible.

    The inner search runs over mu_b in (0, mu_a] and, under STRICT mode, over
    the stage-one trial count; under FREE mode zero stage-one trials maximize
    the deliverable click rate, so only mu_b is searched.
    """
    t1_values = (0,) if mode is StatisticsMode.FREE else (0, 1, 2, 3, 4)

    def feasible(mu_a: float) -> bool:
        protocol = ProtocolParams(mu_a, f, eta, delta_db_per_km, length_km)
        ref = bob_reference_click_rate(protocol)
        for t1 in t1_values:
            for mu_b in np.geomspace(mu_a * 1e-3, mu_a, 24):
                attack = AttackParams(t1, 1, float(mu_b), math.inf, math.inf)
                point = usd_like_point(protocol, attack)
                if strategy_click_rate(point, protocol) >= ref:
                    return True
        return False

    grid = np.geomspace(mu_a_max * 1e-3, mu_a_max, grid_points)
    flags = [feasible(float(x)) for x in grid]
    if not any(flags):
        return None
    hi = max(i for i, ok in enumerate(flags) if ok)
    if hi == len(grid) - 1:
        return float(mu_a_max)
    lo_mu, hi_mu = float(grid[hi]), float(grid[hi + 1])
    for _ in range(bisect_iters):
        mid = math.sqrt(lo_mu * hi_mu)
        if feasible(mid):
            lo_mu = mid
        else:
            hi_mu = mid
    return lo_mu
