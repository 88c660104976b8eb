import numpy as np
import pytest

from spdclab import biphoton, dispersion, phasematch

# Bulk-model degeneracy temperature for the 405 nm -> 810 nm degenerate
# pair, frozen from an independent root solve on the published Sellmeier
# equation.
THETA_DEG_MODEL_C = 108.49753270245685

# Reported (measured) degeneracy temperature the calibration offset maps to.
THETA_DEG_MEASURED_C = 59.4

LAMBDA_P_NM = 405.0


@pytest.fixture(scope="session")
def material():
    return dispersion.load_material()


@pytest.fixture(scope="session")
def calibration_offset(material):
    base = phasematch.CrystalConfig(material, 20.0, 2.72, THETA_DEG_MEASURED_C, 0.0)
    return phasematch.fit_calibration_offset(base, LAMBDA_P_NM, THETA_DEG_MEASURED_C)


@pytest.fixture(scope="session")
def crystal(material, calibration_offset):
    """The 20 mm / 2.72 um crystal at its measured degeneracy temperature,
    with the bulk-vs-waveguide calibration offset applied."""
    return phasematch.CrystalConfig(material, 20.0, 2.72,
                                    THETA_DEG_MEASURED_C, calibration_offset)


@pytest.fixture(scope="session")
def pump():
    return biphoton.PumpEnvelope.from_wavelength(LAMBDA_P_NM)


@pytest.fixture(scope="session")
def jsa_1024(crystal, pump):
    grid = biphoton.GridSpec(n=1024, center_lambda_nm=810.0, half_span_nm=60.0)
    return biphoton.build_jsa(crystal, pump, grid)


@pytest.fixture(scope="session")
def jta_free_1024(jsa_1024):
    return biphoton.to_temporal(jsa_1024)


@pytest.fixture(scope="session")
def jta_fiber_1024(jsa_1024, pump):
    fd = biphoton.FiberDispersion(beta_fs2=3.3e4, reference_omega=pump.omega_p / 2.0)
    return biphoton.to_temporal(biphoton.apply_fiber_phase(jsa_1024, fd))


def assert_close(value, expected, rel, label=""):
    __tracebackhide__ = True
    err = abs(value - expected) / abs(expected)
    assert err <= rel, f"{label}: {value} vs {expected} (rel err {err:.3e} > {rel})"
