"""Success probabilities of the two soft-filtering stages.

A soft-filtering operation probabilistically maps a pair of non-orthogonal
states onto a more distinguishable pair; scalar-product conservation under the
dilation fixes the success probabilities. Stage one (SF1) keeps Eve's record of
a control state inside the span of the two bit records, which boosts the
control-state success probability q1 above the bit probability p1 for small
output intensities. Stage two (SF2) writes a product record, which gives the
closed forms p2 = (1-e^(-mu_a))/(1-e^(-(mu_b+mu_e2))) and
q2 = p2*e^(mu_a-mu_b-mu_e2).
"""

from __future__ import annotations

import math
from typing import Literal, NamedTuple

from .photonics import MeanPhotonNumber, _check_intensity

Stage = Literal["sf1", "sf2"]


class InfeasibilityError(ValueError):
    """Requested operation has no physical (unitary) realization."""


class SFOutcomeProbs(NamedTuple):
    """Success probabilities of one filtering stage: p_info on bit signals,
    q_control on control signals."""

    p_info: float
    q_control: float


class StageAggregates(NamedTuple):
    """Kind-averaged stage success and the control fraction conditioned on
    success."""

    p_stage: float
    control_fraction_after: float


def generic_success_probability(overlap_in: float, overlap_out: float) -> float:
    """Success probability (1 - overlap_in)/(1 - overlap_out) of filtering a
    state pair with overlap overlap_in onto a pair with overlap overlap_out.

    overlap_out == overlap_in is the do-nothing case (probability 1);
    overlap_out == 0 is unambiguous discrimination (probability
    1 - overlap_in).
    """
    if not 0.0 <= overlap_in < 1.0 or not 0.0 <= overlap_out < 1.0:
        raise ValueError("overlaps must lie in [0, 1)")
    if overlap_out > overlap_in:
        raise InfeasibilityError(
            f"filtering must not decrease distinguishability "
            f"(overlap_out={overlap_out} > overlap_in={overlap_in})"
        )
    return (1.0 - overlap_in) / (1.0 - overlap_out)


def _sf1_kappa(mu_e1: MeanPhotonNumber) -> float:
    # Overlap between Eve's bit record and her control record; exp(-inf) == 0
    # makes the infinite-intensity limit sqrt(1/2) exact.
    return math.sqrt((1.0 + math.exp(-mu_e1)) / 2.0)


def _check_sf_intensities(
    mu_a: MeanPhotonNumber, mu_b: MeanPhotonNumber, mu_e: MeanPhotonNumber
) -> None:
    _check_intensity(mu_a, "mu_a")
    _check_intensity(mu_b, "mu_b")
    _check_intensity(mu_e, "mu_e")
    if not mu_a < math.inf:
        raise ValueError("mu_a must be finite")
    if not mu_b < math.inf:
        raise ValueError("mu_b must be finite")
    if mu_a <= 0:
        raise ValueError("mu_a must be > 0")
    if mu_b + mu_e < mu_a:
        raise InfeasibilityError(
            f"mu_b + mu_e = {mu_b + mu_e} < mu_a = {mu_a}: success probability "
            f"would exceed 1"
        )


def sf1_probs(
    mu_a: MeanPhotonNumber, mu_b: MeanPhotonNumber, mu_e1: MeanPhotonNumber
) -> SFOutcomeProbs:
    """Stage-one success probabilities.

    p1 follows from conservation of the bit-bit scalar product. q1 solves the
    bit-control conservation constraint

        e^(-mu_a/2) = sqrt(p1*q1) * e^(-mu_b/2) * kappa
                      + sqrt((1-p1)*(1-q1)),

    kappa = sqrt((1 + e^(-mu_e1))/2). Writing sqrt(q1) = cos(theta) turns the
    constraint into R*cos(theta - phi) = e^(-mu_a/2), which has up to two roots
    in [0, pi/2]; the root with the smaller residual is returned, ties broken
    toward the larger q1 (more control states preserved).
    """
    _check_sf_intensities(mu_a, mu_b, mu_e1)
    p1 = generic_success_probability(
        math.exp(-mu_a), math.exp(-(mu_b + mu_e1))
    )
    kappa = _sf1_kappa(mu_e1)

    a = math.sqrt(p1) * math.exp(-mu_b / 2.0) * kappa
    b = math.sqrt(max(1.0 - p1, 0.0))
    r = math.hypot(a, b)
    c = math.exp(-mu_a / 2.0)
    if c > r * (1.0 + 1e-12):
        raise InfeasibilityError(
            f"no unitary solution for q1 (target {c} exceeds reachable {r})"
        )
    phi = math.acos(min(a / r, 1.0))
    delta = math.acos(min(c / r, 1.0))

    candidates = [
        (q, _sf1_residual(mu_a, mu_b, mu_e1, p1, q))
        for q in (math.cos(phi - delta) ** 2, math.cos(phi + delta) ** 2)
    ]
    best = min(candidates, key=lambda cq: cq[1])
    # Residuals within solver noise count as a tie; keep the larger q1.
    tied = [q for q, res in candidates if res <= best[1] + 1e-12]
    q1 = max(tied)
    return SFOutcomeProbs(p_info=min(p1, 1.0), q_control=q1)


def sf2_probs(
    mu_a: MeanPhotonNumber, mu_b: MeanPhotonNumber, mu_e2: MeanPhotonNumber
) -> SFOutcomeProbs:
    """Stage-two success probabilities (closed form).

    For mu_e2 = inf this is exactly p2 = 1 - e^(-mu_a), q2 = 0 (the
    unambiguous-discrimination limit).
    """
    _check_sf_intensities(mu_a, mu_b, mu_e2)
    p2 = generic_success_probability(
        math.exp(-mu_a), math.exp(-(mu_b + mu_e2))
    )
    q2 = p2 * math.exp(mu_a - mu_b - mu_e2)
    return SFOutcomeProbs(p_info=min(p2, 1.0), q_control=min(q2, 1.0))


def _sf1_residual(
    mu_a: float, mu_b: float, mu_e1: float, p: float, q: float
) -> float:
    kappa = _sf1_kappa(mu_e1)
    lhs = math.exp(-mu_a / 2.0)
    rhs = math.sqrt(max(p * q, 0.0)) * math.exp(-mu_b / 2.0) * kappa + math.sqrt(
        max((1.0 - p) * (1.0 - q), 0.0)
    )
    return abs(lhs - rhs)


def _sf2_residual(
    mu_a: float, mu_b: float, mu_e2: float, p: float, q: float
) -> float:
    lhs = math.exp(-mu_a / 2.0)
    rhs = math.sqrt(max(p * q, 0.0)) * math.exp(-(mu_b + mu_e2) / 2.0) + math.sqrt(
        max((1.0 - p) * (1.0 - q), 0.0)
    )
    return abs(lhs - rhs)


def unitarity_residual(
    stage: Stage,
    mu_a: MeanPhotonNumber,
    mu_b: MeanPhotonNumber,
    mu_e: MeanPhotonNumber,
    probs: SFOutcomeProbs,
) -> float:
    """Absolute residual of the bit-control scalar-product conservation
    equation for the given stage and candidate probabilities."""
    p, q = probs
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    if stage == "sf1":
        return _sf1_residual(mu_a, mu_b, mu_e, p, q)
    if stage == "sf2":
        return _sf2_residual(mu_a, mu_b, mu_e, p, q)
    raise ValueError(f"unknown stage {stage!r}")


def stage_aggregates(f: float, probs: SFOutcomeProbs) -> StageAggregates:
    """Kind-averaged success probability (1-f)*p + f*q and the control share
    f*q / p_stage among successes."""
    if not 0.0 <= f < 1.0:
        raise ValueError(f"f must be in [0, 1), got {f}")
    p, q = probs
    p_stage = (1.0 - f) * p + f * q
    if p_stage == 0.0:
        raise ValueError("degenerate stage: success probability is 0")
    return StageAggregates(p_stage=p_stage, control_fraction_after=f * q / p_stage)
