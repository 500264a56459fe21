"""Exact expectation model of the attack as a renewal process.

Long-run attack statistics are ratios of per-cycle expectations (one cycle =
one vacuum search plus one tuple attempt). expected_statistics computes them
with geometric sums and a forward pass over the stage-two success count;
enumerate_small recomputes them by exhaustive weighted enumeration of every
outcome path of a single cycle and serves as the independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .photonics import (
    MeanPhotonNumber,
    ProtocolParams,
    holevo_binary,
    vacuum_search_success,
)

# AttackParams lives in simulator; import lazily to avoid a module cycle.
from typing import TYPE_CHECKING

if TYPE_CHECKING:  # pragma: no cover
    from .simulator import AttackParams


@dataclass(frozen=True)
class StrategyPoint:
    """Aggregate attack outcome per consumed signal.

    emit_fraction: delivered pulse-carrying signals per consumed signal.
    control_fraction: control share among delivered signals.
    eve_info_per_emitted_bit: Eve's expected information per delivered bit
    signal, in bits.
    mu_delivered: intensity of delivered signals.
    """

    emit_fraction: float
    control_fraction: float
    eve_info_per_emitted_bit: float
    mu_delivered: MeanPhotonNumber


class TruncationError(RuntimeError):
    """enumerate_small's cycle-length cap left too much probability mass."""

    def __init__(self, residual: float):
        super().__init__(
            f"cycle-length cap too small: residual path probability {residual:.3e}"
        )
        self.residual = residual


def _stage_quantities(protocol: ProtocolParams, attack: "AttackParams"):
    from .soft_filter import sf1_probs, sf2_probs

    attack.require_feasible(protocol)
    f = protocol.f
    z = vacuum_search_success(protocol.mu_a)
    p1, q1 = sf1_probs(protocol.mu_a, attack.mu_b, attack.mu_e1)
    p2, q2 = sf2_probs(protocol.mu_a, attack.mu_b, attack.mu_e2)
    v = vacuum_search_success(attack.mu_b + attack.mu_e2)
    chi1 = holevo_binary(attack.mu_e1)
    chi2 = holevo_binary(attack.mu_e2)
    return f, z, p1, q1, p2, q2, v, chi1, chi2


def expected_statistics(
    protocol: ProtocolParams, attack: "AttackParams"
) -> StrategyPoint:
    """Renewal-reward expectations of the Monte Carlo run.

    Per cycle: the search consumes 1/((1-f)Z) signals; the SF1 phase survives
    with probability P1^t_sf1 (P1 the kind-averaged success); the SF2 success
    count k is truncated-geometric in the kind-averaged P2; the closing walk
    over the k successes closes at the rightmost success whose signal is a bit
    and passes the vacuum draw. Delivered-signal composition uses the
    conditional control shares f*q/P per stage.
    """
    f, z, p1, q1, p2, q2, v, chi1, chi2 = _stage_quantities(protocol, attack)
    t1, t2 = attack.t_sf1, attack.t_sf2

    s = (1.0 - f) * z
    big_p1 = (1.0 - f) * p1 + f * q1
    c1 = f * q1 / big_p1
    big_p2 = (1.0 - f) * p2 + f * q2
    c2 = f * q2 / big_p2
    w = (1.0 - c2) * v  # per-success closing probability
    g = 1.0 - w

    e_search = 1.0 / s

    survive1 = big_p1**t1
    if big_p1 < 1.0:
        e_cons_sf1 = (1.0 - big_p1**t1) / (1.0 - big_p1)
    else:
        e_cons_sf1 = float(t1)

    j = np.arange(t2 + 1)
    pk = np.where(j < t2, (1.0 - big_p2) * big_p2 ** j, big_p2 ** j)
    cons_sf2 = np.where(j < t2, j + 1, j).astype(float)

    # S0[j] = sum_{m<j} g^m, S1[j] = sum_{m<j} m g^m
    gp = g ** np.arange(t2)
    s0 = np.concatenate(([0.0], np.cumsum(gp)))
    s1 = np.concatenate(([0.0], np.cumsum(np.arange(t2) * gp)))
    complete_j = 1.0 - g**j
    em_sf2_j = w * ((j - 1) * s0 - s1)

    p_complete = survive1 * float(np.dot(pk, complete_j))
    e_em_sf2 = survive1 * float(np.dot(pk, em_sf2_j))
    e_cons_sf2 = float(np.dot(pk, cons_sf2))

    e_consumed = e_search + e_cons_sf1 + survive1 * e_cons_sf2
    e_emitted = p_complete * (1.0 + t1) + e_em_sf2
    e_controls = p_complete * t1 * c1 + e_em_sf2 * c2
    e_bits = e_emitted - e_controls
    e_info = (
        p_complete * (0.5 + t1 * (1.0 - c1) * chi1)
        + e_em_sf2 * (1.0 - c2) * chi2
    )

    return StrategyPoint(
        emit_fraction=e_emitted / e_consumed,
        control_fraction=e_controls / e_emitted if e_emitted > 0 else 0.0,
        eve_info_per_emitted_bit=e_info / e_bits if e_bits > 0 else 0.0,
        mu_delivered=attack.mu_b,
    )


class _PathSums:
    """Probability-weighted accumulators over enumerated cycle paths."""

    __slots__ = ("mass", "consumed", "emitted", "controls", "bits", "info")

    def __init__(self) -> None:
        self.mass = 0.0
        self.consumed = 0.0
        self.emitted = 0.0
        self.controls = 0.0
        self.bits = 0.0
        self.info = 0.0

    def add(
        self,
        prob: float,
        consumed: int,
        emitted: int = 0,
        controls: int = 0,
        info: float = 0.0,
    ) -> None:
        self.mass += prob
        self.consumed += prob * consumed
        self.emitted += prob * emitted
        self.controls += prob * controls
        self.bits += prob * (emitted - controls)
        self.info += prob * info


def _enumerate_tuple(
    f: float,
    p1: float,
    q1: float,
    p2: float,
    q2: float,
    v: float,
    chi1: float,
    chi2: float,
    t1: int,
    t2: int,
) -> _PathSums:
    """Exhaustive enumeration of one tuple attempt (opening already found;
    its consumption is accounted by the search phase)."""
    sums = _PathSums()

    def finish(prob: float, consumed: int, sf1_controls: int, succ: list[bool],
               close_at: int) -> None:
        # close_at: index into succ of the closing success, or -1 for abort.
        if close_at < 0:
            sums.add(prob, consumed)
            return
        em_sf2 = close_at  # successes left of the closing one stay delivered
        sf2_controls = sum(succ[:close_at])
        emitted = 1 + t1 + em_sf2
        controls = sf1_controls + sf2_controls
        base_info = (t1 - sf1_controls) * chi1 + (em_sf2 - sf2_controls) * chi2
        # Boundary coin: full information or nothing, half weight each.
        sums.add(prob / 2.0, consumed, emitted, controls, base_info + 1.0)
        sums.add(prob / 2.0, consumed, emitted, controls, base_info)

    def walk(prob: float, consumed: int, sf1_controls: int, succ: list[bool],
             pos: int) -> None:
        if pos < 0:
            finish(prob, consumed, sf1_controls, succ, -1)
            return
        if succ[pos]:  # control: closing always fails, no draw
            walk(prob, consumed, sf1_controls, succ, pos - 1)
            return
        finish(prob * v, consumed, sf1_controls, succ, pos)
        walk(prob * (1.0 - v), consumed, sf1_controls, succ, pos - 1)

    def sf2(prob: float, consumed: int, sf1_controls: int, succ: list[bool]
            ) -> None:
        if len(succ) == t2:
            walk(prob, consumed, sf1_controls, succ, len(succ) - 1)
            return
        fail = f * (1.0 - q2) + (1.0 - f) * (1.0 - p2)
        if fail > 0.0:
            walk(prob * fail, consumed + 1, sf1_controls, succ, len(succ) - 1)
        if f * q2 > 0.0:
            sf2(prob * f * q2, consumed + 1, sf1_controls, succ + [True])
        if (1.0 - f) * p2 > 0.0:
            sf2(prob * (1.0 - f) * p2, consumed + 1, sf1_controls,
                succ + [False])

    def sf1(prob: float, consumed: int, trial: int, sf1_controls: int) -> None:
        if trial == t1:
            sf2(prob, consumed, sf1_controls, [])
            return
        fail = f * (1.0 - q1) + (1.0 - f) * (1.0 - p1)
        if fail > 0.0:
            sums.add(prob * fail, consumed + 1)  # tuple aborts
        if f * q1 > 0.0:
            sf1(prob * f * q1, consumed + 1, trial + 1, sf1_controls + 1)
        if (1.0 - f) * p1 > 0.0:
            sf1(prob * (1.0 - f) * p1, consumed + 1, trial + 1, sf1_controls)

    sf1(1.0, 0, 0, 0)
    if abs(sums.mass - 1.0) > 1e-9:
        raise AssertionError(
            f"tuple enumeration mass {sums.mass} != 1; enumeration bug"
        )
    return sums


def enumerate_small(
    protocol: ProtocolParams, attack: "AttackParams", max_cycle_len: int
) -> StrategyPoint:
    """Brute-force oracle for expected_statistics.

    Enumerates every outcome path of one renewal cycle whose total consumption
    fits in max_cycle_len and forms the renewal-reward ratios from the
    enumerated mass. The un-enumerated search tail is the only truncation;
    raises TruncationError if its mass reaches 1e-9.
    """
    f, z, p1, q1, p2, q2, v, chi1, chi2 = _stage_quantities(protocol, attack)
    t1, t2 = attack.t_sf1, attack.t_sf2
    if t1 > 6 or t2 > 12:
        raise ValueError(
            "the enumeration oracle is for small configurations "
            "(t_sf1 <= 6, t_sf2 <= 12)"
        )
    max_tuple = 1 + t1 + t2 + 1  # opening + SF1 trials + SF2 successes + fail
    max_fails = max_cycle_len - max_tuple
    if max_fails < 0:
        raise TruncationError(1.0)

    search_fail = f + (1.0 - f) * (1.0 - z)
    search_hit = (1.0 - f) * z
    # Past the point where the tail is < 1e-12 extra search lengths change
    # nothing; capping keeps huge caps cheap.
    if search_fail > 0.0:
        needed = int(math.log(1e-12) / math.log(search_fail)) + 2
        max_fails = min(max_fails, max(needed, 1))
    m = np.arange(max_fails + 1)
    prob_m = search_fail**m * search_hit
    mass = float(prob_m.sum())
    residual = 1.0 - mass
    if residual >= 1e-9:
        raise TruncationError(residual)

    tup = _enumerate_tuple(f, p1, q1, p2, q2, v, chi1, chi2, t1, t2)

    e_consumed = float(np.dot(prob_m, m + 1)) + mass * tup.consumed
    e_emitted = mass * tup.emitted
    e_controls = mass * tup.controls
    e_bits = mass * tup.bits
    e_info = mass * tup.info

    return StrategyPoint(
        emit_fraction=e_emitted / e_consumed,
        control_fraction=e_controls / e_emitted if e_emitted > 0 else 0.0,
        eve_info_per_emitted_bit=e_info / e_bits if e_bits > 0 else 0.0,
        mu_delivered=attack.mu_b,
    )
