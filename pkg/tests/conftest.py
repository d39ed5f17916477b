import math

import pytest

from pdcfield.config import (
    ExperimentConfig,
    PumpConfig,
    SeedConfig,
    CrystalConfig,
    DetectorConfig,
)

C = 299792458.0
OMEGA_PUMP_800 = 4.0 * math.pi * C / 0.8e-6  # pump for 0.8 um degenerate light


@pytest.fixture(scope="session")
def combined_cfg():
    """Combined-field setup: 3 mm crystal, 0.8 um degenerate light, f = 100 mm,
    equal 0.2 mm pump/seed waists, four seed photons, unit gain."""
    return ExperimentConfig(
        pump=PumpConfig(omega=OMEGA_PUMP_800, bandwidth=5e11, waist=0.2e-3),
        seed=SeedConfig(amplitude=2.0, waist=0.2e-3, bandwidth=5e11, g_factor=1.0),
        crystal=CrystalConfig(
            length=3e-3, cross_section=1e-22, pdc_angle=10e-3, squeezing=1.0
        ),
        detector=DetectorConfig(focal_length=0.1, aperture=2e-3, bandwidth=1e9),
    )


@pytest.fixture(scope="session")
def orders_cfg():
    """Order-scan setup: 1 mm pump waist, 0.6 mm seed waist, 0.3 mm output
    shift, equal bandwidths, gain 1.7."""
    k_deg = OMEGA_PUMP_800 / 2.0 / C
    return ExperimentConfig(
        pump=PumpConfig(omega=OMEGA_PUMP_800, bandwidth=5e11, waist=1e-3),
        seed=SeedConfig(
            amplitude=2.0,
            waist=0.6e-3,
            bandwidth=5e11,
            shift=(k_deg * 0.3e-3 / 0.1, 0.0),
        ),
        crystal=CrystalConfig(length=3e-3, cross_section=1e-22, squeezing=1.7),
        detector=DetectorConfig(focal_length=0.1, aperture=2e-3, bandwidth=1e9),
    )


def background_cfg(pdc_angle: float) -> ExperimentConfig:
    """Background-scan setup: 3 mm crystal, 0.2 mm pump waist, f = 100 mm."""
    return ExperimentConfig(
        pump=PumpConfig(omega=OMEGA_PUMP_800, bandwidth=5e11, waist=0.2e-3),
        seed=SeedConfig(amplitude=0.0, waist=0.2e-3, bandwidth=5e11),
        crystal=CrystalConfig(
            length=3e-3, cross_section=1e-22, pdc_angle=pdc_angle, squeezing=1.0
        ),
        detector=DetectorConfig(focal_length=0.1, aperture=2e-3, bandwidth=1e9),
    )


@pytest.fixture(scope="session")
def ring_cfg():
    return background_cfg(8e-3)


@pytest.fixture(scope="session")
def collinear_cfg():
    return background_cfg(0.0)
