import json

import numpy as np
import pytest

from spdclab import biphoton
from spdclab.biphoton import (
    FiberDispersion,
    GridSpec,
    JointSpectrum,
    PumpEnvelope,
    apply_fiber_phase,
    build_jsa,
    entanglement_time_from_jti,
    entanglement_time_gvm,
    export_matrix_csv,
    import_jsi_csv,
    jti_difference_profile,
    phase_matching_function,
    pump_envelope,
    to_spectral,
    to_temporal,
)
from spdclab.constants import FS, wavelength_nm_to_omega
from spdclab.errors import CoverageError, DomainError

from conftest import LAMBDA_P_NM, assert_close

# Entanglement times for the 20 mm / 2.72 um crystal at the fitted
# degeneracy point, N = 1024, 60 nm half-span.  Frozen from an independent
# FFT pipeline written before this package existed.
GOLDEN_TE_FREE_FS = 133.3
GOLDEN_TE_FIBER_FS = 2572.6
# GVM entanglement time for a 790 nm signal (finite-difference oracle).
GOLDEN_TE_GVM_790_FS = 427.0076


# ---------------------------------------------------------------------------
# pump envelope and phase matching

def test_pump_envelope_trivials(pump):
    w = pump.omega_p / 2.0
    assert pump_envelope(pump, w, pump.omega_p - w) == pytest.approx(1.0)
    off = pump.omega_p / 2 + 3 * pump.sigma_p
    assert pump_envelope(pump, off, pump.omega_p / 2) == pytest.approx(np.exp(-4.5))
    # symmetric under signal/idler exchange
    a, b = pump.omega_p / 2 + 1e11, pump.omega_p / 2 - 3e11
    assert pump_envelope(pump, a, b) == pump_envelope(pump, b, a)


def test_pump_from_wavelength():
    env = PumpEnvelope.from_wavelength(405.0, fwhm_nm=0.01)
    assert env.omega_p == pytest.approx(wavelength_nm_to_omega(405.0), rel=1e-14)
    assert env.sigma_p > 0
    with pytest.raises(DomainError):
        PumpEnvelope(env.omega_p, 0.0)


def test_phase_matching_peak_at_degeneracy(crystal):
    w = wavelength_nm_to_omega(2 * LAMBDA_P_NM)
    assert phase_matching_function(crystal, w, w) == pytest.approx(1.0, abs=1e-4)


def test_phase_matching_sinc_shape(crystal):
    """Scanning the signal frequency at fixed pump traces sinc(dk L / 2):
    the deepest negative value must match the first sinc sidelobe, -0.2172
    (brute-scan oracle of sin(x)/x)."""
    w_p = wavelength_nm_to_omega(LAMBDA_P_NM)
    w_s = np.linspace(wavelength_nm_to_omega(830.0), wavelength_nm_to_omega(790.0), 4001)
    phi = phase_matching_function(crystal, w_s, w_p - w_s)
    assert phi.max() == pytest.approx(1.0, abs=1e-3)
    assert phi.min() == pytest.approx(-0.21723, abs=2e-3)


# ---------------------------------------------------------------------------
# JSA construction

def test_build_jsa_normalized_and_symmetric(jsa_1024):
    assert jsa_1024.normalized
    assert jsa_1024.total_mass() == pytest.approx(1.0, rel=1e-9)
    assert np.allclose(jsa_1024.amplitude, jsa_1024.amplitude.T, atol=1e-12)


def test_build_jsa_coverage_error(crystal, pump):
    with pytest.raises(CoverageError) as exc:
        build_jsa(crystal, pump, GridSpec(n=64, center_lambda_nm=810.0, half_span_nm=0.05))
    assert exc.value.truncated_fraction > biphoton.COVERAGE_TOLERANCE


def test_joint_spectrum_invariants():
    with pytest.raises(DomainError):
        JointSpectrum(np.zeros((2, 2)), np.array([1.0, 0.5]), np.array([0.0, 1.0]),
                      domain="spectral")
    with pytest.raises(DomainError):
        JointSpectrum(np.zeros((2, 2)), np.array([0.0, 1.0]), np.array([0.0, 1.0]),
                      domain="nonsense")


# ---------------------------------------------------------------------------
# FFT pipeline

def test_parseval(jsa_1024, jta_free_1024):
    assert abs(jta_free_1024.total_mass() - jsa_1024.total_mass()) < 1e-9


def test_roundtrip(jsa_1024, jta_free_1024):
    back = to_spectral(jta_free_1024)
    assert np.max(np.abs(back.amplitude - jsa_1024.amplitude)) < 1e-10
    assert np.max(np.abs(back.axis_s - jsa_1024.axis_s)) < 1e-10 * np.max(np.abs(jsa_1024.axis_s))


def test_fiber_phase_preserves_modulus(jsa_1024, pump):
    fd = FiberDispersion(3.3e4, pump.omega_p / 2)
    out = apply_fiber_phase(jsa_1024, fd)
    assert np.allclose(np.abs(out.amplitude), np.abs(jsa_1024.amplitude), atol=1e-14)
    # beta = 0 is the identity
    assert apply_fiber_phase(jsa_1024, FiberDispersion(0.0, pump.omega_p / 2)) is jsa_1024


def test_fiber_phase_requires_spectral_domain(jta_free_1024, pump):
    with pytest.raises(DomainError):
        apply_fiber_phase(jta_free_1024, FiberDispersion(1.0, pump.omega_p / 2))


def test_gaussian_pair_analytic_fwhm():
    """Separable Gaussian JSA: the JTI difference profile is Gaussian with
    FWHM 2 sqrt(ln 2) / sigma_omega, an analytic oracle."""
    n = 2048
    sigma = 2.0e12  # rad/s
    center = wavelength_nm_to_omega(810.0)
    # wide span: the temporal step must resolve the Gaussian FWHM well for
    # the linear-interpolated crossing to be accurate
    axis = center + np.linspace(-32 * sigma, 32 * sigma, n)
    d = axis - center
    amp = np.exp(-d[:, None] ** 2 / (4 * sigma ** 2)) * np.exp(-d[None, :] ** 2 / (4 * sigma ** 2))
    js = JointSpectrum(amp.astype(complex), axis, axis, domain="spectral")
    te = entanglement_time_from_jti(to_temporal(js))
    expected = 2.0 * np.sqrt(np.log(2.0)) / sigma / FS
    assert_close(te, expected, 5e-3, "Gaussian FWHM")


# ---------------------------------------------------------------------------
# entanglement time

def test_entanglement_time_free_golden(jta_free_1024):
    assert_close(entanglement_time_from_jti(jta_free_1024), GOLDEN_TE_FREE_FS,
                 0.02, "T_e (beta = 0)")


def test_entanglement_time_fiber_golden(jta_fiber_1024):
    assert_close(entanglement_time_from_jti(jta_fiber_1024), GOLDEN_TE_FIBER_FS,
                 0.02, "T_e (beta = 3.3e4 fs^2)")


def test_fiber_dispersion_broadens(jta_free_1024, jta_fiber_1024):
    assert (entanglement_time_from_jti(jta_fiber_1024)
            > 5 * entanglement_time_from_jti(jta_free_1024))


def test_grid_refinement_stable(crystal, pump, jta_free_1024):
    te_1024 = entanglement_time_from_jti(jta_free_1024)
    jsa = build_jsa(crystal, pump, GridSpec(n=512, center_lambda_nm=810.0, half_span_nm=60.0))
    te_512 = entanglement_time_from_jti(to_temporal(jsa))
    assert abs(te_512 - te_1024) / te_1024 < 0.02


def test_difference_profile_even_sampling(jta_free_1024):
    tau, prof = jti_difference_profile(jta_free_1024)
    assert len(tau) == len(prof)
    assert np.all(np.diff(tau) > 0)
    assert prof.max() > 0


def test_entanglement_time_needs_halfmax_drop():
    n = 64
    axis_t = np.linspace(-1e-12, 1e-12, n)
    flat = JointSpectrum(np.ones((n, n), dtype=complex), axis_t, axis_t,
                         domain="temporal", spectral_centers=(0.0, 0.0))
    with pytest.raises(CoverageError):
        entanglement_time_from_jti(flat)


def test_gvm_entanglement_time(crystal):
    assert entanglement_time_gvm(crystal, 810.0, 810.0) == 0.0
    lam_i = 1.0 / (1.0 / LAMBDA_P_NM - 1.0 / 790.0)
    assert_close(entanglement_time_gvm(crystal, 790.0, lam_i),
                 GOLDEN_TE_GVM_790_FS, 1e-4, "GVM T_e at 790 nm")


# ---------------------------------------------------------------------------
# export / import

def test_export_import_roundtrip(tmp_path, crystal, pump):
    jsa = build_jsa(crystal, pump, GridSpec(n=128, center_lambda_nm=810.0, half_span_nm=60.0))
    csv_path = tmp_path / "jsi.csv"
    export_matrix_csv(jsa, csv_path, tmp_path / "jsi.json")
    with open(tmp_path / "jsi.json") as fh:
        sidecar = json.load(fh)
    assert sidecar["domain"] == "spectral"
    assert sidecar["axis_units"] == "rad/s"

    back = import_jsi_csv(csv_path, axis_units="rad/s")
    assert back.measured
    assert np.allclose(back.intensity(), jsa.intensity(), rtol=1e-6, atol=1e-12)
    assert np.allclose(back.axis_s, jsa.axis_s, rtol=1e-9)


def test_import_jsi_nm_axes(tmp_path):
    lam = np.linspace(800.0, 820.0, 32)
    intensity = np.exp(-((lam[:, None] - 810.0) ** 2 + (lam[None, :] - 810.0) ** 2) / 8.0)
    path = tmp_path / "measured.csv"
    with open(path, "w") as fh:
        fh.write("# axis_s: " + " ".join(f"{v:.8e}" for v in lam) + "\n")
        fh.write("# axis_i: " + " ".join(f"{v:.8e}" for v in lam) + "\n")
        np.savetxt(fh, intensity, delimiter=",")
    js = import_jsi_csv(path, axis_units="nm")
    assert js.domain == "spectral"
    assert js.axes_uniform()
    assert np.all(np.diff(js.axis_s) > 0)
    # wavelength-descending axes become frequency-ascending; peak survives
    peak = np.unravel_index(np.argmax(js.intensity()), js.intensity().shape)
    mid = len(js.axis_s) // 2
    assert abs(peak[0] - mid) <= 2 and abs(peak[1] - mid) <= 2


def test_import_rejects_negative_intensity(tmp_path):
    path = tmp_path / "bad.csv"
    with open(path, "w") as fh:
        fh.write("# axis_s: 1.0 2.0\n# axis_i: 1.0 2.0\n")
        fh.write("1.0,-1.0\n0.5,0.5\n")
    with pytest.raises(DomainError):
        import_jsi_csv(path, axis_units="rad/s")
