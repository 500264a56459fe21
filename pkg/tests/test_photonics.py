import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cowsec.photonics import (
    ProtocolParams,
    binary_entropy,
    click_probability,
    holevo_binary,
    transmittance,
    vacuum_search_success,
)


def entropy_oracle(x: float) -> float:
    """Independent high-precision evaluation via mpmath."""
    import mpmath

    with mpmath.workdps(50):
        if x in (0, 1):
            return 0.0
        mx = mpmath.mpf(x)
        h = -(mx * mpmath.log(mx, 2) + (1 - mx) * mpmath.log(1 - mx, 2))
        return float(h)


class TestTransmittance:
    def test_zero_length(self):
        assert transmittance(0.25, 0.0) == 1.0

    def test_forty_km_is_one_tenth(self):
        assert transmittance(0.25, 40.0) == pytest.approx(0.1, rel=1e-14)

    def test_hundred_km(self):
        assert transmittance(0.25, 100.0) == pytest.approx(
            10.0**-2.5, rel=1e-14
        )

    @pytest.mark.parametrize("delta,length", [(-0.1, 1.0), (0.25, -1.0)])
    def test_negative_inputs_rejected(self, delta, length):
        with pytest.raises(ValueError):
            transmittance(delta, length)

    @given(
        st.floats(0.01, 1.0),
        st.floats(0.0, 200.0),
        st.floats(0.0, 200.0),
    )
    def test_multiplicative_in_length(self, delta, l1, l2):
        combined = transmittance(delta, l1 + l2)
        split = transmittance(delta, l1) * transmittance(delta, l2)
        assert combined == pytest.approx(split, abs=1e-12)


class TestBinaryEntropy:
    def test_degenerate(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_maximal(self):
        assert binary_entropy(0.5) == 1.0

    def test_known_value(self):
        # Frozen from the mpmath oracle; direct evaluation of the formula.
        assert entropy_oracle(0.11) == pytest.approx(
            0.4999159581645282, abs=1e-15
        )
        assert binary_entropy(0.11) == pytest.approx(
            0.4999159581645282, abs=1e-12
        )

    @pytest.mark.parametrize("x", [-0.1, 1.1, 2.0])
    def test_domain(self, x):
        with pytest.raises(ValueError):
            binary_entropy(x)

    def test_symmetry_on_grid(self):
        xs = np.linspace(0.0, 1.0, 10_000)
        for x in xs:
            assert abs(binary_entropy(x) - binary_entropy(1.0 - x)) <= 1e-12


class TestHolevoBinary:
    def test_vacuum_records(self):
        assert holevo_binary(0.0) == 0.0

    def test_orthogonal_records_exact(self):
        assert holevo_binary(math.inf) == 1.0

    def test_known_value(self):
        x = (1.0 - math.exp(-0.2)) / 2.0
        assert holevo_binary(0.2) == pytest.approx(entropy_oracle(x), abs=1e-12)

    def test_monotone(self):
        grid = np.concatenate([np.linspace(0.0, 5.0, 300), [math.inf]])
        values = [holevo_binary(m) for m in grid]
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            holevo_binary(-0.1)


class TestClickProbability:
    def test_vacuum_never_clicks(self):
        assert click_probability(0.1, 0.0) == 0.0

    def test_infinite_intensity(self):
        assert click_probability(1.0, math.inf) == 1.0

    def test_known_value(self):
        assert click_probability(0.1, 0.5) == pytest.approx(
            1.0 - math.exp(-0.05), rel=1e-14
        )

    @given(st.floats(0.01, 1.0), st.floats(0.0, 50.0))
    def test_matches_vacuum_search_of_scaled_intensity(self, eta, mu):
        assert click_probability(eta, mu) == vacuum_search_success(eta * mu)


class TestVacuumSearchSuccess:
    def test_examples(self):
        assert vacuum_search_success(0.0) == 0.0
        assert vacuum_search_success(math.inf) == 1.0
        assert vacuum_search_success(0.5) == pytest.approx(
            0.3934693402873666, rel=1e-14
        )

    def test_monotone(self):
        grid = np.linspace(0.0, 10.0, 500)
        values = [vacuum_search_success(m) for m in grid]
        assert all(a <= b for a, b in zip(values, values[1:]))


class TestProtocolParams:
    def test_valid(self):
        p = ProtocolParams(0.5, 0.1, 0.1, 0.25, 100.0)
        assert p.transmittance == pytest.approx(10.0**-2.5, rel=1e-14)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(mu_a=0.0),
            dict(mu_a=math.inf),
            dict(f=1.0),
            dict(f=-0.1),
            dict(eta=0.0),
            dict(eta=1.5),
            dict(delta_db_per_km=-1.0),
            dict(length_km=-5.0),
        ],
    )
    def test_invalid_rejected(self, kwargs):
        base = dict(mu_a=0.5, f=0.1, eta=0.1, delta_db_per_km=0.25, length_km=100.0)
        base.update(kwargs)
        with pytest.raises(ValueError):
            ProtocolParams(**base)
