"""Coherent-state and channel primitives shared by every other module.

All quantities reduce to scalar exponential/entropy formulas. Mean photon
numbers are plain floats; ``math.inf`` is a first-class intensity with exact
limit semantics (``exp(-inf) == 0.0`` in IEEE arithmetic, so e.g. the Holevo
value of orthogonal states is exactly 1.0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MeanPhotonNumber = float

INFINITE = math.inf


def _check_intensity(mu: MeanPhotonNumber, name: str = "mu") -> None:
    if math.isnan(mu) or mu < 0:
        raise ValueError(f"{name} must be >= 0 (or inf), got {mu}")


@dataclass(frozen=True)
class ProtocolParams:
    """Alice/Bob/channel configuration.

    mu_a: Alice's signal-pulse intensity (finite, > 0).
    f: probability of emitting a control state (each bit value has
       probability (1-f)/2).
    eta: data-line detector efficiency.
    delta_db_per_km: fiber attenuation coefficient.
    length_km: channel length.
    """

    mu_a: MeanPhotonNumber
    f: float
    eta: float
    delta_db_per_km: float
    length_km: float

    def __post_init__(self) -> None:
        if not (0 < self.mu_a < INFINITE):
            raise ValueError(f"mu_a must be finite and > 0, got {self.mu_a}")
        if not 0 <= self.f < 1:
            raise ValueError(f"f must be in [0, 1), got {self.f}")
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if self.delta_db_per_km < 0:
            raise ValueError("delta_db_per_km must be >= 0")
        if self.length_km < 0:
            raise ValueError("length_km must be >= 0")

    @property
    def transmittance(self) -> float:
        return transmittance(self.delta_db_per_km, self.length_km)


def transmittance(delta_db_per_km: float, length_km: float) -> float:
    """Channel power transmittance 10^(-delta*L/10) for delta in dB/km."""
    if delta_db_per_km < 0 or length_km < 0:
        raise ValueError("attenuation and length must be >= 0")
    return 10.0 ** (-delta_db_per_km * length_km / 10.0)


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy h2(x) in bits, with 0*log2(0) == 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary_entropy argument must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def holevo_binary(mu_e: MeanPhotonNumber) -> float:
    """Holevo information of two equiprobable coherent records of intensity mu_e.

    For records with overlap exp(-mu_e) this is h2[(1 - exp(-mu_e))/2]; it is
    exactly 1.0 for mu_e = inf (orthogonal records).
    """
    _check_intensity(mu_e, "mu_e")
    return binary_entropy((1.0 - math.exp(-mu_e)) / 2.0)


def click_probability(eta: float, mu: MeanPhotonNumber) -> float:
    """Threshold-detector click probability 1 - exp(-eta*mu)."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must be in [0, 1], got {eta}")
    _check_intensity(mu)
    if eta == 0.0:
        return 0.0
    return -math.expm1(-eta * mu)


def vacuum_search_success(mu: MeanPhotonNumber) -> float:
    """Success probability 1 - exp(-mu) of locating the vacuum slot of a bit
    signal whose pulse has intensity mu (conclusive discrimination of the two
    bit orientations, whose overlap is exp(-mu))."""
    _check_intensity(mu)
    return -math.expm1(-mu)
