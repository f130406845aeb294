"""Phase-only hologram synthesis for structured illumination.

The SLM plane and the image plane are related by a unitary centered 2-D
Fourier transform.  Gerchberg-Saxton iterations alternate between the two
amplitude constraints; the mixed-region variant (MRAF) requests the target
amplitude only inside a signal region and leaves the field outside a small
guard ring free, dumping the incompatible power there and buying uniformity
inside the signal region.  A simulated camera-feedback loop corrects
aberrations by reweighting the target from measured intensities.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import ndimage

from .errors import SpinoptError

GUARD_RING_PIXELS = 3  # dilation radius separating signal and noise regions


def fft_forward(values):
    """Unitary centered DFT, SLM plane to image plane."""
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(values), norm="ortho"))


def fft_inverse(values):
    """Unitary centered inverse DFT, image plane to SLM plane."""
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(values), norm="ortho"))


def propagate(values, direction: str = "forward"):
    if direction == "forward":
        return fft_forward(values)
    if direction == "inverse":
        return fft_inverse(values)
    raise ValueError(f"unknown direction {direction!r}")


def gaussian_beam(n: int, waist_px: float):
    """Input beam amplitude with 1/e^2 intensity radius ``waist_px``."""
    x = np.arange(n) - n // 2
    X, Y = np.meshgrid(x, x)
    return np.exp(-(X**2 + Y**2) / waist_px**2)


def disk_mask(n: int, radius_px: float):
    x = np.arange(n) - n // 2
    X, Y = np.meshgrid(x, x)
    return X**2 + Y**2 <= radius_px**2


def noise_region(signal_mask):
    """Complement of the signal region dilated by the guard ring."""
    dilated = ndimage.binary_dilation(signal_mask, iterations=GUARD_RING_PIXELS)
    return ~dilated


def target_bounding_radius(target) -> float:
    """Radius (px) of the smallest centered circle enclosing the target."""
    target = np.asarray(target)
    nz = np.nonzero(target)
    if nz[0].size == 0:
        raise SpinoptError("target pattern is empty")
    n = target.shape[0]
    dy = nz[0] - n // 2
    dx = nz[1] - target.shape[1] // 2
    return float(np.sqrt((dx**2 + dy**2).max()))


def initial_phase(target, beam_waist_px: float):
    """Defocus phase spreading the beam over the target's bounding circle.

    For a Gaussian beam with quadratic phase c*r^2 the far-field 1/e^2
    intensity radius is (N/pi)*sqrt(1/w^2 + c^2 w^2); solving for c maps the
    beam onto the target radius.  Targets at or below the diffraction-limited
    spot need no defocus.
    """
    target = np.asarray(target, dtype=float)
    n = target.shape[0]
    r_target = target_bounding_radius(target)
    if r_target <= 0:
        return np.zeros(target.shape)
    w = beam_waist_px
    c_sq = (np.pi * r_target / n) ** 2 - 1.0 / w**2
    c = np.sqrt(c_sq) / w if c_sq > 0 else 0.0
    x = np.arange(n) - n // 2
    X, Y = np.meshgrid(x, x)
    return np.mod(c * (X**2 + Y**2), 2 * np.pi)


def nonuniformity(intensity, mask) -> float:
    """Normalized standard deviation of the intensity over the mask."""
    vals = np.asarray(intensity, dtype=float)[np.asarray(mask, dtype=bool)]
    if vals.size == 0:
        raise SpinoptError("non-uniformity of an empty region is undefined")
    mean = vals.mean()
    if mean == 0:
        raise SpinoptError("non-uniformity undefined for zero mean intensity")
    return float(vals.std() / mean)


def power_efficiency(intensity, mask) -> float:
    """Fraction of the total power landing inside the mask."""
    intensity = np.asarray(intensity, dtype=float)
    total = intensity.sum()
    if total <= 0:
        raise SpinoptError("total power must be positive")
    return float(intensity[np.asarray(mask, dtype=bool)].sum() / total)


@dataclass(frozen=True)
class HologramPlan:
    """SLM phase with its masks and synthesis parameters."""

    phase: np.ndarray  # rad, in [0, 2pi)
    beam_waist_px: float
    signal_mask: np.ndarray
    noise_mask: np.ndarray
    mixing: float
    target_amplitude: np.ndarray

    def __post_init__(self):
        if not 0 < self.mixing <= 1:
            raise ValueError("mixing parameter must be in (0, 1]")
        if (np.asarray(self.signal_mask) & np.asarray(self.noise_mask)).any():
            raise ValueError("signal and noise regions must be disjoint")

    @property
    def beam(self):
        return gaussian_beam(self.phase.shape[0], self.beam_waist_px)

    def image_intensity(self, extra_phase=None):
        phase = self.phase if extra_phase is None else self.phase + extra_phase
        return np.abs(fft_forward(self.beam * np.exp(1j * phase))) ** 2


@dataclass
class IterationLog:
    nonuniformity: list = dc_field(default_factory=list)
    efficiency: list = dc_field(default_factory=list)

    def append(self, nu, eff):
        self.nonuniformity.append(float(nu))
        self.efficiency.append(float(eff))

    def __len__(self):
        return len(self.nonuniformity)


def mraf_step(phase, beam, target_amp, signal_mask, noise_mask, mixing):
    """One mixed-region iteration; returns (new_phase, nonuniformity, efficiency).

    Image-plane constraint: the signal region requests m * target (target
    normalized once to the beam power), the noise region keeps the computed
    amplitude, the guard ring between them is forced dark.  Phases are kept
    everywhere, and the SLM constraint restores the beam amplitude.  With the
    signal mask covering the whole grid this is exactly a Gerchberg-Saxton
    step (the scale m cancels in the phase).
    """
    target_amp = np.asarray(target_amp, dtype=float)
    if not (target_amp > 0).any():
        raise SpinoptError("target amplitude is identically zero")
    signal_mask = np.asarray(signal_mask, dtype=bool)
    noise_mask = np.asarray(noise_mask, dtype=bool)
    ring = ~(signal_mask | noise_mask)
    beam_power = np.sum(beam**2)
    target_scale = np.sqrt(beam_power / np.sum(target_amp**2))

    image = fft_forward(beam * np.exp(1j * phase))
    intensity = np.abs(image) ** 2
    nu = nonuniformity(intensity, signal_mask)
    eff = power_efficiency(intensity, signal_mask)

    amp = np.abs(image)
    mixed = np.empty_like(amp)
    mixed[signal_mask] = mixing * target_scale * target_amp[signal_mask]
    mixed[noise_mask] = amp[noise_mask]
    mixed[ring] = 0.0
    slm = fft_inverse(mixed * np.exp(1j * np.angle(image)))
    new_phase = np.mod(np.angle(slm), 2 * np.pi)
    return new_phase, nu, eff


@dataclass(frozen=True)
class HologramConfig:
    grid_size: int = 512
    beam_waist_px: float = 120.0
    mixing: float = 0.55
    iterations: int = 300
    feedback_iterations: int = 19
    feedback_gain: float = 0.5
    feedback_refine_steps: int = 20


def synthesize(
    target_amp,
    config: HologramConfig = HologramConfig(),
    signal_mask=None,
    phase0=None,
):
    """Run the iterative transform algorithm against a target amplitude.

    The signal mask defaults to the target support.  mixing=1 with a
    full-grid signal mask reproduces plain Gerchberg-Saxton.  Returns
    (HologramPlan, IterationLog); the log holds the achieved non-uniformity
    and power efficiency at each iteration.
    """
    target_amp = np.asarray(target_amp, dtype=float)
    if signal_mask is None:
        signal_mask = target_amp > 0
    signal_mask = np.asarray(signal_mask, dtype=bool)
    noise_mask = noise_region(signal_mask) if not signal_mask.all() else np.zeros_like(signal_mask)
    beam = gaussian_beam(target_amp.shape[0], config.beam_waist_px)
    phase = initial_phase(target_amp, config.beam_waist_px) if phase0 is None else np.asarray(phase0, dtype=float)
    log = IterationLog()
    for _ in range(config.iterations):
        phase, nu, eff = mraf_step(
            phase, beam, target_amp, signal_mask, noise_mask, config.mixing
        )
        log.append(nu, eff)
    plan = HologramPlan(
        phase=phase,
        beam_waist_px=config.beam_waist_px,
        signal_mask=signal_mask,
        noise_mask=noise_mask,
        mixing=config.mixing,
        target_amplitude=target_amp,
    )
    return plan, log


def gerchberg_saxton(target_amp, config: HologramConfig = HologramConfig(), phase0=None):
    """Plain GS baseline: mixing 1, signal mask covering the whole grid."""
    target_amp = np.asarray(target_amp, dtype=float)
    full = np.ones(target_amp.shape, dtype=bool)
    cfg = HologramConfig(
        grid_size=config.grid_size,
        beam_waist_px=config.beam_waist_px,
        mixing=1.0,
        iterations=config.iterations,
    )
    return synthesize(target_amp, cfg, signal_mask=full, phase0=phase0)


def polynomial_phase_screen(n: int, seed: int, amplitude_rad: float = 2 * np.pi):
    """Smooth low-order polynomial aberration with seeded coefficients."""
    rng = np.random.default_rng(seed)
    x = (np.arange(n) - n // 2) / (n / 2)
    X, Y = np.meshgrid(x, x)
    basis = [X**2, Y**2, X * Y, X**3, Y**3, X * Y**2, X**2 * Y]
    coefs = rng.normal(0.0, 1.0, len(basis))
    screen = sum(c * b for c, b in zip(coefs, basis))
    span = np.ptp(screen)
    if span > 0:
        screen = screen * (amplitude_rad / span)
    return screen


def camera_feedback(
    plan: HologramPlan,
    aberration,
    config: HologramConfig = HologramConfig(),
):
    """Refine a hologram against a simulated aberrated camera image.

    The camera sees |FT(beam * exp(i(phase + aberration)))|^2.  Each feedback
    iteration rescales the target amplitude by the measured-to-target
    intensity ratio raised to the loop gain (per-step factor clamped to
    [0.5, 2]) and re-runs a short MRAF refinement.  Returns the refined plan
    and a log with one non-uniformity entry per feedback iteration.
    """
    aberration = np.asarray(aberration, dtype=float)
    if aberration.shape != plan.phase.shape:
        raise ValueError("aberration screen must match the SLM grid")
    signal = plan.signal_mask
    target = plan.target_amplitude.astype(float).copy()
    phase = plan.phase.copy()
    log = IterationLog()
    refine = HologramConfig(
        grid_size=config.grid_size,
        beam_waist_px=plan.beam_waist_px,
        mixing=plan.mixing,
        iterations=config.feedback_refine_steps,
    )
    for _ in range(config.feedback_iterations):
        measured = np.abs(
            fft_forward(plan.beam * np.exp(1j * (phase + aberration)))
        ) ** 2
        nu = nonuniformity(measured, signal)
        eff = power_efficiency(measured, signal)
        log.append(nu, eff)
        level = measured[signal].mean()
        ratio = np.ones_like(measured)
        # zero-measured pixels are clamped via the ratio cap
        ratio[signal] = level / np.maximum(measured[signal], 1e-12 * level)
        factor = np.clip(ratio**config.feedback_gain, 0.5, 2.0)
        target = target * factor
        new_plan, _ = synthesize(target, refine, signal_mask=signal, phase0=phase)
        phase = new_plan.phase
    refined = HologramPlan(
        phase=phase,
        beam_waist_px=plan.beam_waist_px,
        signal_mask=signal,
        noise_mask=plan.noise_mask,
        mixing=plan.mixing,
        target_amplitude=target,
    )
    return refined, log


def resample_mask(mask, n: int):
    """Nearest-neighbor resample of a boolean mask onto an n x n grid."""
    mask = np.asarray(mask)
    iy = np.clip((np.arange(n) + 0.5) * mask.shape[0] / n, 0, mask.shape[0] - 1).astype(int)
    ix = np.clip((np.arange(n) + 0.5) * mask.shape[1] / n, 0, mask.shape[1] - 1).astype(int)
    return mask[np.ix_(iy, ix)]


def hologram_for_subset(subset_mask, config: HologramConfig = HologramConfig()):
    """Hologram producing uniform illumination on an optimal-subset mask."""
    mask = resample_mask(np.asarray(subset_mask, dtype=bool), config.grid_size)
    if not mask.any():
        raise SpinoptError("subset mask is empty")
    target = np.zeros(mask.shape)
    target[mask] = 1.0
    return synthesize(target, config)
