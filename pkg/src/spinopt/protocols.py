"""Per-sensor sensitivities of Ramsey, spin-echo, and CW-ODMR magnetometry.

A spatially varying control field Omega(x) turns into a pi/2-pulse area error
eps(x) = pi*(Omega - Omega0)/(2*Omega0).  The closed-form sensitivities below
give the minimum detectable field per root bandwidth of a single sensor as a
function of that error; ``sensitivity_map`` applies them pixel by pixel.

CW-ODMR is handled through the steady state of the two-level optical Bloch
equations with saturation-dependent pumping, which yields an exactly
Lorentzian resonance; contrast and linewidth follow analytically.
"""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ExcludedSensorError, SpinoptError
from .fields import ScalarField2D

GAMMA_E = 2 * np.pi * 28.024e9  # electron gyromagnetic ratio, rad s^-1 T^-1

CW_PREFACTOR = 8 * np.pi / (3 * np.sqrt(3))

# echo denominator counts as dead when below this fraction of its eps=0 value
DEAD_POINT_RTOL = 1e-12
# cos^2(eps) below this counts as a +-pi/2 pulse error (|eps -+ pi/2| < 1e-12)
COS2_DEAD_TOL = 1e-24


@dataclass(frozen=True)
class PulseError:
    """Pulse-area error of the pi/2 pulse, radians."""

    epsilon: float

    def __post_init__(self):
        if not np.isfinite(self.epsilon):
            raise ValueError("pulse error must be finite")


def _eps(value):
    """Unwrap a PulseError; plain floats and arrays pass through."""
    return value.epsilon if isinstance(value, PulseError) else value


def pulse_error(omega_local: float, omega0: float) -> PulseError:
    """eps = pi*(Omega - Omega0)/(2*Omega0)."""
    if omega0 <= 0:
        raise SpinoptError("central Rabi frequency must be positive")
    return PulseError(np.pi * (omega_local - omega0) / (2 * omega0))


@dataclass(frozen=True)
class RamseyParams:
    """Ramsey (DC) protocol constants.

    n_avg is the mean detected photon number per interrogation; the contrast
    is C = (a - b)/(a + b) of the spin-dependent fluorescence.
    """

    gamma_e: float = GAMMA_E
    t2_star: float = 1e-6
    p: float = 1.0
    tau: float = 0.5e-6  # defaults to t2_star/2, the p=1 optimum
    contrast: float = 0.02
    n_avg: float = 1e5

    def __post_init__(self):
        if min(self.gamma_e, self.t2_star, self.tau, self.contrast, self.n_avg) <= 0:
            raise ValueError("all Ramsey parameters must be positive")
        if self.p < 1:
            raise ValueError("lineshape exponent p must be >= 1")
        if self.contrast > 1:
            raise ValueError("contrast cannot exceed 1")

    @property
    def bright_count(self):
        """Mean photons from the |0> projection, a = n_avg*(1 + C)."""
        return self.n_avg * (1 + self.contrast)

    @property
    def dark_count(self):
        """Mean photons from the |1> projection, b = n_avg*(1 - C)."""
        return self.n_avg * (1 - self.contrast)


@dataclass(frozen=True)
class EchoParams(RamseyParams):
    """Spin-echo (AC) protocol constants; adds the homogeneous T2."""

    t2: float = 10e-6
    tau: float = 5e-6  # defaults to t2/2

    def __post_init__(self):
        super().__post_init__()
        if self.t2 < self.t2_star:
            raise ValueError("T2 must be >= T2*")


def default_ramsey_params(**overrides) -> RamseyParams:
    return replace(RamseyParams(), **overrides) if overrides else RamseyParams()


def default_echo_params(**overrides) -> EchoParams:
    return replace(EchoParams(), **overrides) if overrides else EchoParams()


# --- pulsed sensitivities -----------------------------------------------------

def _ramsey_eta_array(eps, par: RamseyParams):
    """Vectorized Ramsey sensitivity; dead pixels become +inf."""
    eps = np.asarray(eps, dtype=float)
    cos2 = np.cos(eps) ** 2
    prefac = (
        np.exp((par.tau / par.t2_star) ** par.p)
        / (par.gamma_e * np.sqrt(par.tau) * par.contrast * np.sqrt(par.n_avg))
    )
    with np.errstate(divide="ignore"):
        out = prefac / cos2
    return np.where(cos2 > COS2_DEAD_TOL, out, np.inf)


def ramsey_sensitivity(eps, params: RamseyParams) -> float:
    """Photon-shot-noise-limited Ramsey sensitivity, T/sqrt(Hz)."""
    e = _eps(eps)
    if np.cos(e) ** 2 <= COS2_DEAD_TOL:
        raise ExcludedSensorError("pi/2-pulse error of +-pi/2: no projection contrast")
    return float(_ramsey_eta_array(e, params))


def _echo_denominator(eps, par: EchoParams):
    eps = np.asarray(eps, dtype=float)
    return np.abs(
        0.5 * np.exp(-par.tau / (2 * par.t2_star)) * np.sin(2 * eps) ** 2
        - 2 * np.exp(-par.tau / par.t2) * np.cos(eps) ** 4
    )


def _echo_eta_array(eps, par: EchoParams):
    den = _echo_denominator(eps, par)
    den0 = 2 * np.exp(-par.tau / par.t2)
    prefac = np.pi / (par.gamma_e * np.sqrt(par.tau) * par.contrast * np.sqrt(par.n_avg))
    with np.errstate(divide="ignore"):
        out = prefac / den
    return np.where(den > DEAD_POINT_RTOL * den0, out, np.inf)


def echo_sensitivity(eps, params: EchoParams) -> float:
    """Spin-echo sensitivity with the pi-pulse error retained.

    The refocusing pulse carries twice the pi/2 error, leaving a residual
    T2* term; the two terms can cancel at a dead point where the sensor is
    excluded.
    """
    e = _eps(eps)
    den = float(_echo_denominator(e, params))
    den0 = 2 * np.exp(-params.tau / params.t2)
    if den <= DEAD_POINT_RTOL * den0:
        raise ExcludedSensorError(f"echo dead point at eps={e:.6g}")
    return float(_echo_eta_array(e, params))


def echo_sensitivity_perfect_pi(eps, params: EchoParams) -> float:
    """Spin-echo sensitivity when the pi-pulse error is removed."""
    e = _eps(eps)
    if np.cos(e) ** 2 <= COS2_DEAD_TOL:
        raise ExcludedSensorError("pi/2-pulse error of +-pi/2: no projection contrast")
    return float(
        np.pi
        * np.exp(params.tau / params.t2)
        / (2 * params.gamma_e * np.sqrt(params.tau)
           * params.contrast * np.sqrt(params.n_avg) * np.cos(e) ** 2)
    )


# --- metrology signals (mean photon numbers per interrogation) ----------------

def ramsey_signal(eps, phase: float, delta_b: float, params: RamseyParams):
    """Mean photon number of one Ramsey interrogation.

    S = (a+b)/2 + (a-b)/2 sin^2(eps)
        - (a-b)/2 exp(-(tau/T2*)^p) cos^2(eps) sin(gamma_e dB tau + phase)
    """
    e = _eps(eps)
    a, b = params.bright_count, params.dark_count
    decay = np.exp(-((params.tau / params.t2_star) ** params.p))
    return (
        (a + b) / 2
        + (a - b) / 2 * np.sin(e) ** 2
        - (a - b) / 2 * decay * np.cos(e) ** 2
        * np.sin(params.gamma_e * delta_b * params.tau + phase)
    )


def echo_signal(eps, delta_b: float, params: EchoParams):
    """Mean photon number of one spin-echo interrogation (phi0 = gamma dB tau / pi)."""
    e = _eps(eps)
    a, b = params.bright_count, params.dark_count
    phi0 = params.gamma_e * delta_b * params.tau / np.pi
    d_star = np.exp(-params.tau / (2 * params.t2_star))
    d_2 = np.exp(-params.tau / params.t2)
    return (
        (a + b) / 2
        - (a - b) / 2 * np.sin(e) ** 2 * np.cos(2 * e)
        + (a - b) / 4 * d_star * np.sin(2 * e) ** 2 * (np.sin(phi0) - np.cos(phi0))
        - (a - b) / 2 * d_2 * np.cos(e) ** 4 * np.sin(2 * phi0)
    )


# --- CW-ODMR -------------------------------------------------------------------

@dataclass(frozen=True)
class CWParams:
    """Rates of the CW optical Bloch model, s^-1.

    Gamma_p and Gamma_c scale with laser saturation as s/(1+s) up to the
    given maxima; Gamma2 = Gamma2* + Gamma_c.  ``omega0`` is the central
    Rabi frequency the antenna delivers (rad/s); its default sits below the
    power-broadening optimum, as usual for CW operation.
    """

    gamma1: float = 1e3
    gamma2_star: float = 2 * np.pi * 1e6
    gamma_p_max: float = 0.4 * 27.384e6
    gamma_c_max: float = 27.384e6
    r_max: float = 1e5
    a_over_b: float = 1.3
    gamma_e: float = GAMMA_E
    omega0: float = 2 * np.pi * 2e5

    def __post_init__(self):
        if min(self.gamma1, self.gamma2_star, self.gamma_p_max,
               self.gamma_c_max, self.r_max) <= 0:
            raise ValueError("all CW rates must be positive")
        if self.a_over_b <= 1:
            raise ValueError("fluorescence ratio a/b must exceed 1")


def default_cw_params(**overrides) -> CWParams:
    return replace(CWParams(), **overrides) if overrides else CWParams()


@dataclass(frozen=True)
class CWSteadyState:
    sigma00: float
    sigma11: float
    coherence: complex
    contrast: float
    linewidth_hz: float
    photon_rate: float


def _cw_rates(s, par: CWParams):
    s = np.asarray(s, dtype=float)
    sat = s / (1.0 + s)
    gamma_p = par.gamma_p_max * sat
    gamma_c = par.gamma_c_max * sat
    gamma_2 = par.gamma2_star + gamma_c
    return gamma_p, gamma_2


def _cw_contrast_linewidth(omega, s, par: CWParams):
    """On-resonance contrast and FWHM (Hz) of the Lorentzian ODMR dip."""
    omega = np.asarray(omega, dtype=float)
    gamma_p, gamma_2 = _cw_rates(s, par)
    w_on = omega**2 / (2 * gamma_2)  # resonant MW transition rate
    s11_off = par.gamma1 / (2 * par.gamma1 + gamma_p)
    s11_on = (w_on + par.gamma1) / (2 * (w_on + par.gamma1) + gamma_p)
    ab = par.a_over_b
    contrast = (s11_on - s11_off) * (ab - 1) / (ab * (1 - s11_off) + s11_off)
    fwhm_hz = (gamma_2 / np.pi) * np.sqrt(
        1.0 + omega**2 / (gamma_2 * (2 * par.gamma1 + gamma_p))
    )
    return contrast, fwhm_hz


def cw_steady_state(omega: float, detuning: float, s: float, params: CWParams) -> CWSteadyState:
    """Stationary solution of the CW optical Bloch equations.

    The populations solve the two coupled equations with sigma00+sigma11=1;
    the reported contrast and linewidth come from the analytic Lorentzian
    form of sigma11(detuning).
    """
    if s < 0:
        raise ValueError("saturation parameter must be non-negative")
    gamma_p, gamma_2 = _cw_rates(s, params)
    if gamma_2 <= 0 or (2 * params.gamma1 + gamma_p) <= 0:
        raise SpinoptError("stationary system is singular: all rates vanish")
    w = omega**2 * gamma_2 / (2 * (gamma_2**2 + detuning**2))
    s11 = (w + params.gamma1) / (2 * (w + params.gamma1) + gamma_p)
    # sigma01 from the stationary coherence equation
    pop_diff = 2 * s11 - 1
    coherence = (omega / 2) * pop_diff * (detuning - 1j * gamma_2) / (gamma_2**2 + detuning**2)
    contrast, fwhm = _cw_contrast_linewidth(omega, s, params)
    return CWSteadyState(
        sigma00=1 - s11,
        sigma11=s11,
        coherence=complex(coherence),
        contrast=float(contrast),
        linewidth_hz=float(fwhm),
        photon_rate=params.r_max * s / (1 + s),
    )


def _cw_eta_array(omega, s, par: CWParams):
    """Vectorized CW sensitivity; non-positive contrast or rate gives +inf."""
    contrast, fwhm = _cw_contrast_linewidth(omega, s, par)
    rate = par.r_max * np.asarray(s, dtype=float) / (1.0 + np.asarray(s, dtype=float))
    good = (contrast > 0) & (rate > 0)
    safe_c = np.where(good, contrast, 1.0)
    safe_r = np.where(good, rate, 1.0)
    eta = CW_PREFACTOR / par.gamma_e * fwhm / (safe_c * np.sqrt(safe_r))
    return np.where(good, eta, np.inf)


def cw_sensitivity(omega: float, s: float, params: CWParams) -> float:
    """eta_CW = (8 pi / 3 sqrt(3)) * linewidth / (gamma_e * contrast * sqrt(rate))."""
    eta = _cw_eta_array(omega, s, params)
    if not np.isfinite(eta):
        raise ExcludedSensorError("CW contrast or photon rate vanishes (Omega or s is 0)")
    return float(eta)


_GOLDEN = (np.sqrt(5) - 1) / 2


def optimal_saturation(
    omega,
    params: CWParams,
    s_min: float = 1e-3,
    s_max: float = 1e3,
    rel_tol: float = 1e-3,
    warn_boundary: bool = True,
):
    """Saturation parameter minimizing cw_sensitivity, by golden section in log s.

    Accepts a scalar or an array of Rabi frequencies.  If the minimum sits at
    a bracket boundary a warning is emitted and the boundary value returned.
    """
    omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    lo = np.full(omega_arr.shape, np.log10(s_min))
    hi = np.full(omega_arr.shape, np.log10(s_max))
    # stop when the bracket is below rel_tol in relative s terms
    tol = rel_tol / np.log(10)
    while float(np.max(hi - lo)) > tol:
        c = hi - _GOLDEN * (hi - lo)
        d = lo + _GOLDEN * (hi - lo)
        fc = _cw_eta_array(omega_arr, 10**c, params)
        fd = _cw_eta_array(omega_arr, 10**d, params)
        keep_left = fc < fd
        hi = np.where(keep_left, d, hi)
        lo = np.where(keep_left, lo, c)
    s_star = 10 ** (0.5 * (lo + hi))
    at_boundary = (s_star <= s_min * (1 + 10 * rel_tol)) | (
        s_star >= s_max * (1 - 10 * rel_tol)
    )
    if warn_boundary and bool(np.any(at_boundary)):
        warnings.warn(
            "optimal saturation hit the search bracket boundary", stacklevel=2
        )
    if np.isscalar(omega) or np.asarray(omega).ndim == 0:
        return float(s_star[0])
    return s_star.reshape(np.shape(omega))


# --- sensitivity maps ----------------------------------------------------------

def sensitivity_map(
    field: ScalarField2D,
    protocol: str,
    params,
    omega0: float | None = None,
) -> ScalarField2D:
    """Apply a protocol's sensitivity pixel by pixel to a Rabi map.

    Omega0 defaults to the field value at the grid center.  Pixels at dead
    points are marked with eta = +inf rather than failing the whole map.
    For CW the map is rescaled so the center pixel drives at params.omega0,
    and every pixel uses its own optimal saturation.
    """
    omega = field.values
    if omega0 is None:
        omega0 = field.center_value
    if omega0 <= 0:
        raise SpinoptError("central Rabi frequency must be positive")
    if protocol == "ramsey":
        eps = np.pi * (omega - omega0) / (2 * omega0)
        eta = _ramsey_eta_array(eps, params)
    elif protocol == "echo":
        eps = np.pi * (omega - omega0) / (2 * omega0)
        eta = _echo_eta_array(eps, params)
    elif protocol == "cw":
        omega_abs = omega * (params.omega0 / omega0)
        s_star = optimal_saturation(omega_abs, params, warn_boundary=False)
        eta = _cw_eta_array(omega_abs, s_star, params)
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    return ScalarField2D(field.grid, eta, unit="T_per_sqrtHz", allow_inf=True)
