"""Shared fixtures and independent numerical oracles for the test suite."""

import numpy as np
import pytest

from bellsim import scenario
from bellsim.biphoton import AmplitudePair


@pytest.fixture(scope="session")
def default_config():
    """The packaged default scenario (session-scoped; treat as read-only)."""
    return scenario.load_config(scenario.default_config_path())


def time_domain_rate(pair: AmplitudePair) -> float:
    """Coincidence rate evaluated in the time domain.

    Transforms both amplitudes to (t_s, t_i) with a 2-D DFT and integrates
    |a(t) + e^{i dphi} b(t)|^2 numerically, normalized the same way as the
    frequency-domain rate.  Independent of the engine's overlap algebra.
    """
    fa = np.fft.ifft2(pair.amp_a.values)
    fb = np.fft.ifft2(pair.amp_b.values)
    combined = np.abs(fa + np.exp(1j * pair.relative_phase_rad) * fb) ** 2
    numerator = float(np.sum(combined))
    denominator = float(np.sum(np.abs(fa) ** 2) + np.sum(np.abs(fb) ** 2))
    return numerator / denominator
