"""Joint spectral amplitude of the photon pair, quadratic fiber-dispersion
phase, centered 2D Fourier transform to the joint temporal domain, and
entanglement-time extraction.

Conventions
-----------
* Frequency axes are angular (rad/s), strictly increasing and uniform.
* The spectral -> temporal transform uses the unitary kernel
  exp(-i omega t) / sqrt(2 pi) per axis, so Parseval holds:
  sum |JSA|^2 dw dw = sum |JTA|^2 dt dt.
* "Entanglement time" is the FWHM of the joint temporal intensity along
  the arrival-time-difference coordinate t_s - t_i through the JTI peak,
  with linear interpolation between grid samples and no smoothing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import json
import numpy as np

from .constants import C0, TWO_PI, NM, MM, FS, wavelength_nm_to_omega, omega_to_wavelength_nm
from .dispersion import group_index
from .errors import CoverageError, DomainError
from .phasematch import CrystalConfig

# Boundary-ring intensity mass above this fraction of the total means the
# grid truncates the JSA.
COVERAGE_TOLERANCE = 1e-3


@dataclass(frozen=True)
class PumpEnvelope:
    """Gaussian spectral envelope of the pump: center angular frequency and
    spectral standard deviation, both rad/s."""

    omega_p: float
    sigma_p: float

    def __post_init__(self):
        if not self.sigma_p > 0:
            raise DomainError(f"pump spectral width must be positive, got {self.sigma_p}")

    @classmethod
    def from_wavelength(cls, lambda_p_nm: float, fwhm_nm: float = 0.01) -> "PumpEnvelope":
        """CW pump at lambda_p_nm with a Gaussian linewidth given as FWHM in
        nm (default 0.01 nm, narrow enough that the joint spectrum is
        pump-limited along the sum coordinate)."""
        omega_p = wavelength_nm_to_omega(lambda_p_nm)
        sigma_lambda = fwhm_nm / (2.0 * np.sqrt(2.0 * np.log(2.0)))
        sigma_p = TWO_PI * C0 / (lambda_p_nm * NM) ** 2 * (sigma_lambda * NM)
        return cls(omega_p=omega_p, sigma_p=sigma_p)


@dataclass(frozen=True)
class FiberDispersion:
    """Quadratic spectral phase accumulated outside the crystal.

    beta_fs2 is the group delay dispersion in fs^2 applied to each photon;
    the phase is exp(i beta/2 (omega - reference_omega)^2) per arm.
    beta = 0 models the free-space case.
    """

    beta_fs2: float
    reference_omega: float

    def __post_init__(self):
        if not np.isfinite(self.beta_fs2):
            raise DomainError("fiber dispersion must be finite")


@dataclass(frozen=True)
class GridSpec:
    """Square sampling grid for the joint spectrum, specified in wavelength
    around the degenerate point.  Defaults resolve the 20 mm sinc structure
    while keeping the FFT cheap."""

    n: int = 1024
    center_lambda_nm: float = 810.0
    half_span_nm: float = 60.0

    def omega_axis(self) -> np.ndarray:
        center = wavelength_nm_to_omega(self.center_lambda_nm)
        half = center - wavelength_nm_to_omega(self.center_lambda_nm + self.half_span_nm)
        return np.linspace(center - half, center + half, self.n)


@dataclass(frozen=True)
class JointSpectrum:
    """Complex amplitude sampled on a 2D (signal, idler) grid.

    In the spectral domain the axes are angular frequencies in rad/s; in
    the temporal domain they are times in seconds.  ``spectral_centers``
    keeps the absolute frequency origin across the FFT so the transform is
    invertible.
    """

    amplitude: np.ndarray
    axis_s: np.ndarray
    axis_i: np.ndarray
    domain: str  # "spectral" | "temporal"
    normalized: bool = False
    measured: bool = False
    spectral_centers: tuple | None = None

    def __post_init__(self):
        if self.domain not in ("spectral", "temporal"):
            raise DomainError(f"unknown domain tag {self.domain!r}")
        for ax in (self.axis_s, self.axis_i):
            if np.any(np.diff(ax) <= 0):
                raise DomainError("axes must be strictly increasing")

    def step(self, which: str) -> float:
        ax = self.axis_s if which == "s" else self.axis_i
        return float(ax[1] - ax[0])

    def axes_uniform(self, rtol: float = 1e-9) -> bool:
        for ax in (self.axis_s, self.axis_i):
            d = np.diff(ax)
            if np.max(np.abs(d - d[0])) > rtol * abs(d[0]):
                return False
        return True

    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def total_mass(self) -> float:
        return float(np.sum(self.intensity()) * self.step("s") * self.step("i"))


def pump_envelope(env: PumpEnvelope, omega_s, omega_i):
    """Gaussian pump amplitude exp(-(w_s + w_i - w_p)^2 / (2 sigma_p^2)).

    Real valued, peak 1 on the anti-diagonal w_s + w_i = w_p, symmetric
    under signal/idler exchange.
    """
    detuning = np.asarray(omega_s, dtype=float) + np.asarray(omega_i, dtype=float) - env.omega_p
    out = np.exp(-detuning ** 2 / (2.0 * env.sigma_p ** 2))
    return out if np.ndim(out) else float(out)


def phase_matching_function(cfg: CrystalConfig, omega_s, omega_i):
    """sinc(dk L / 2) evaluated per grid point; sinc(0) = 1."""
    w_s = np.asarray(omega_s, dtype=float)
    w_i = np.asarray(omega_i, dtype=float)
    omega_p = w_s + w_i
    lambda_p_nm = omega_to_wavelength_nm(omega_p)
    lambda_s_nm = omega_to_wavelength_nm(w_s)
    dk = delta_k_grid(cfg, lambda_p_nm, lambda_s_nm)
    x = dk * (cfg.length_mm * MM) / 2.0
    out = np.sinc(x / np.pi)
    return out if np.ndim(out) else float(out)


def delta_k_grid(cfg: CrystalConfig, lambda_p_nm, lambda_s_nm):
    """Vectorized dk for per-point pump wavelengths (build_jsa does not
    assume a monochromatic pump)."""
    from .dispersion import wavevector

    theta = cfg.effective_temperature_C
    w_p = wavelength_nm_to_omega(np.asarray(lambda_p_nm, dtype=float))
    w_s = wavelength_nm_to_omega(np.asarray(lambda_s_nm, dtype=float))
    w_i = w_p - w_s
    if np.any(w_i <= 0):
        raise DomainError("derived idler frequency is unphysical")
    return (wavevector(cfg.model, w_p, theta)
            - wavevector(cfg.model, w_s, theta)
            - wavevector(cfg.model, w_i, theta)
            - cfg.poling_wavenumber)


def build_jsa(cfg: CrystalConfig, env: PumpEnvelope, grid: GridSpec | None = None) -> JointSpectrum:
    """Normalized joint spectral amplitude alpha * phi on a square grid.

    Raises CoverageError when a non-negligible fraction of the squared mass
    sits in the outermost grid ring, i.e. the grid truncates the spectrum.
    """
    grid = grid if grid is not None else GridSpec()
    axis = grid.omega_axis()
    w_s, w_i = np.meshgrid(axis, axis, indexing="ij")
    alpha = pump_envelope(env, w_s, w_i)
    # Only evaluate the dispersion model where the pump envelope is
    # non-negligible: far off the energy-conservation diagonal the
    # amplitude is zero anyway and the implied pump wavelength can leave
    # the Sellmeier validity window.
    mask = alpha > 1e-16
    if not np.any(mask):
        raise CoverageError("grid does not overlap the pump envelope",
                            truncated_fraction=1.0)
    amp = np.zeros_like(alpha)
    amp[mask] = alpha[mask] * phase_matching_function(cfg, w_s[mask], w_i[mask])

    intensity = amp ** 2
    total = float(np.sum(intensity))
    if total == 0.0:
        raise CoverageError("grid does not overlap the joint spectrum", truncated_fraction=1.0)
    ring = (np.sum(intensity[0, :]) + np.sum(intensity[-1, :])
            + np.sum(intensity[:, 0]) + np.sum(intensity[:, -1]))
    fraction = float(ring / total)
    if fraction > COVERAGE_TOLERANCE:
        raise CoverageError(
            f"grid too narrow: boundary ring holds {fraction:.3e} of the squared mass",
            truncated_fraction=fraction,
        )

    dw = axis[1] - axis[0]
    norm = np.sqrt(total * dw * dw)
    return JointSpectrum(
        amplitude=(amp / norm).astype(complex),
        axis_s=axis.copy(),
        axis_i=axis.copy(),
        domain="spectral",
        normalized=True,
    )


def apply_fiber_phase(js: JointSpectrum, fd: FiberDispersion) -> JointSpectrum:
    """Multiply by the quadratic per-arm dispersion phase.

    Pure phase: |output| == |input| pointwise, marginals unchanged.
    """
    if js.domain != "spectral":
        raise DomainError("fiber phase applies in the spectral domain only")
    if fd.beta_fs2 == 0.0:
        return js
    beta = fd.beta_fs2 * FS ** 2
    phase_s = np.exp(1j * beta / 2.0 * (js.axis_s - fd.reference_omega) ** 2)
    phase_i = np.exp(1j * beta / 2.0 * (js.axis_i - fd.reference_omega) ** 2)
    amp = js.amplitude * phase_s[:, None] * phase_i[None, :]
    return replace(js, amplitude=amp)


def _centered_fft2(a: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(a)))


def _centered_ifft2(a: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(a)))


def to_temporal(js: JointSpectrum) -> JointSpectrum:
    """Centered 2D DFT of the JSA; returns the joint temporal amplitude.

    Time axes are derived from the frequency spacing; the absolute
    frequency origin is kept in ``spectral_centers`` for invertibility.
    """
    if js.domain != "spectral":
        raise DomainError("to_temporal expects a spectral-domain spectrum")
    if not js.axes_uniform():
        raise DomainError("FFT requires uniformly spaced axes")
    n_s, n_i = js.amplitude.shape
    dw_s, dw_i = js.step("s"), js.step("i")
    scale = dw_s * dw_i / TWO_PI  # unitary continuum normalization
    jta = _centered_fft2(js.amplitude) * scale
    t_s = np.fft.fftshift(np.fft.fftfreq(n_s, d=dw_s / TWO_PI))
    t_i = np.fft.fftshift(np.fft.fftfreq(n_i, d=dw_i / TWO_PI))
    # the centered DFT's phase origin is the sample that ifftshift moves to
    # index 0, i.e. index n//2 on each axis
    centers = (float(js.axis_s[n_s // 2]), float(js.axis_i[n_i // 2]))
    return JointSpectrum(
        amplitude=jta,
        axis_s=t_s,
        axis_i=t_i,
        domain="temporal",
        normalized=js.normalized,
        measured=js.measured,
        spectral_centers=centers,
    )


def to_spectral(js: JointSpectrum) -> JointSpectrum:
    """Inverse of :func:`to_temporal`."""
    if js.domain != "temporal":
        raise DomainError("to_spectral expects a temporal-domain spectrum")
    if js.spectral_centers is None:
        raise DomainError("temporal spectrum lost its spectral axis origin")
    n_s, n_i = js.amplitude.shape
    dt_s, dt_i = js.step("s"), js.step("i")
    dw_s = TWO_PI / (n_s * dt_s)
    dw_i = TWO_PI / (n_i * dt_i)
    scale = dw_s * dw_i / TWO_PI
    amp = _centered_ifft2(js.amplitude / scale)
    c_s, c_i = js.spectral_centers
    axis_s = c_s + np.fft.fftshift(np.fft.fftfreq(n_s, d=dt_s / TWO_PI))
    axis_i = c_i + np.fft.fftshift(np.fft.fftfreq(n_i, d=dt_i / TWO_PI))
    return JointSpectrum(
        amplitude=amp,
        axis_s=axis_s,
        axis_i=axis_i,
        domain="spectral",
        normalized=js.normalized,
        measured=js.measured,
    )


def jti_difference_profile(js: JointSpectrum):
    """Profile of the joint temporal intensity along the t_s - t_i
    difference direction through the JTI maximum.

    Returns (tau, profile) with tau the difference-time offset from the
    peak.  The walk is contiguous from the peak so periodic DFT images do
    not contaminate the profile.  The peak is located on the anti-diagonal
    through the grid center: for a near-CW pump the JTI is degenerate along
    the sum coordinate and DFT periodization ripple would otherwise put the
    global argmax on a grid corner, truncating the profile.
    """
    if js.domain != "temporal":
        raise DomainError("entanglement time is extracted in the temporal domain")
    jti = js.intensity()
    n_s, n_i = jti.shape
    s0 = n_s // 2 + n_i // 2
    ii = np.arange(max(0, s0 - (n_i - 1)), min(n_s - 1, s0) + 1)
    jj = s0 - ii
    k = int(np.argmax(jti[ii, jj]))
    i0, j0 = int(ii[k]), int(jj[k])
    dt = js.step("s")

    offsets = np.arange(-min(i0, n_i - 1 - j0), min(n_s - 1 - i0, j0) + 1)
    prof = jti[i0 + offsets, j0 - offsets]
    tau = 2.0 * dt * offsets
    return tau, prof


def _interp_crossing(x0, y0, x1, y1, level):
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def entanglement_time_from_jti(js: JointSpectrum) -> float:
    """FWHM (fs) of the JTI along the difference coordinate through its
    peak, with linear interpolation between samples."""
    tau, prof = jti_difference_profile(js)
    peak_idx = int(np.argmax(prof))
    half = prof[peak_idx] / 2.0

    right = peak_idx
    while right + 1 < len(prof) and prof[right + 1] >= half:
        right += 1
    left = peak_idx
    while left - 1 >= 0 and prof[left - 1] >= half:
        left -= 1
    if right + 1 >= len(prof) or left - 1 < 0:
        raise CoverageError("JTI profile does not drop below half maximum inside the grid")
    hi = _interp_crossing(tau[right], prof[right], tau[right + 1], prof[right + 1], half)
    lo = _interp_crossing(tau[left], prof[left], tau[left - 1], prof[left - 1], half)
    return float((hi - lo) / FS)


def entanglement_time_gvm(cfg: CrystalConfig, lambda_s_nm: float, lambda_i_nm: float) -> float:
    """Group-velocity-mismatch entanglement time L/2 * |1/v_s - 1/v_i| in fs.

    Exactly zero for a degenerate pair (identical group velocities).
    """
    theta = cfg.effective_temperature_C
    ng_s = group_index(cfg.model, lambda_s_nm, theta)
    ng_i = group_index(cfg.model, lambda_i_nm, theta)
    length = cfg.length_mm * MM
    return float(length / 2.0 * abs(ng_s - ng_i) / C0 / FS)


# ---------------------------------------------------------------------------
# matrix export / measured-JSI import


def export_matrix_csv(js: JointSpectrum, csv_path, sidecar_path) -> None:
    """Write the intensity matrix as CSV with axis header rows plus a JSON
    sidecar carrying units and the domain tag."""
    units = "rad/s" if js.domain == "spectral" else "s"
    with open(csv_path, "w") as fh:
        fh.write("# axis_s: " + " ".join(f"{v:.12e}" for v in js.axis_s) + "\n")
        fh.write("# axis_i: " + " ".join(f"{v:.12e}" for v in js.axis_i) + "\n")
        np.savetxt(fh, js.intensity(), delimiter=",", fmt="%.12e")
    sidecar = {
        "domain": js.domain,
        "axis_units": units,
        "normalized": js.normalized,
        "measured": js.measured,
    }
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def import_jsi_csv(csv_path, axis_units: str = "nm") -> JointSpectrum:
    """Read a measured joint spectral intensity matrix.

    Wavelength axes (nm) are accepted and converted; the intensity is
    resampled onto a uniform angular-frequency grid and the square root is
    taken so the result is amplitude-valued (phases can then be restored
    with :func:`apply_fiber_phase`).
    """
    from scipy.interpolate import RegularGridInterpolator

    axes = []
    with open(csv_path) as fh:
        for _ in range(2):
            line = fh.readline()
            if not line.startswith("#"):
                raise DomainError("matrix CSV must start with two axis header rows")
            axes.append(np.array([float(v) for v in line.split(":", 1)[1].split()]))
        intensity = np.loadtxt(fh, delimiter=",")
    axis_s, axis_i = axes
    if intensity.shape != (len(axis_s), len(axis_i)):
        raise DomainError("matrix shape does not match axis headers")
    if np.any(intensity < 0):
        raise DomainError("measured intensity must be nonnegative")

    if axis_units == "nm":
        axis_s = wavelength_nm_to_omega(axis_s)
        axis_i = wavelength_nm_to_omega(axis_i)
    elif axis_units != "rad/s":
        raise DomainError(f"unsupported axis units {axis_units!r}")

    # ensure increasing axes for interpolation
    if axis_s[0] > axis_s[-1]:
        axis_s = axis_s[::-1]
        intensity = intensity[::-1, :]
    if axis_i[0] > axis_i[-1]:
        axis_i = axis_i[::-1]
        intensity = intensity[:, ::-1]

    n = len(axis_s)
    uni_s = np.linspace(axis_s[0], axis_s[-1], n)
    uni_i = np.linspace(axis_i[0], axis_i[-1], len(axis_i))
    interp = RegularGridInterpolator((axis_s, axis_i), intensity,
                                     bounds_error=False, fill_value=0.0)
    w_s, w_i = np.meshgrid(uni_s, uni_i, indexing="ij")
    resampled = np.clip(interp(np.stack([w_s, w_i], axis=-1)), 0.0, None)
    return JointSpectrum(
        amplitude=np.sqrt(resampled).astype(complex),
        axis_s=uni_s,
        axis_i=uni_i,
        domain="spectral",
        normalized=False,
        measured=True,
    )
