"""
Band-limited single-target radar channel.

A snapshot is N complex samples y(n), n = -N/2 .. N/2-1, of a sinc pulse
delayed by x0 (in units of 1/B) with Swerling-0 amplitude rho and a uniform
random phase, plus complex white Gaussian noise. Noise power is fixed at
N0 = 1, so the configured ``snr`` is rho**2 directly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np


class PreconditionError(ValueError):
    """An argument is outside the domain an operation is defined on."""


@dataclass(frozen=True)
class SystemConfig:
    """Every knob of a joint detection/estimation experiment.

    Parameters
    ----------
    n_samples : int
        Time-bandwidth product N = TB. Also the length of the delay interval.
    snr : float
        Linear SNR rho**2 = alpha**2 / N0 with N0 = 1.
    prior_present : float
        Prior probability that the target exists.
    oversample : int
        Delay grid points per unit delay.
    seed : int
        Master seed (unsigned 64-bit).
    edge_margin : float
        True delays stay this far from the window edges.
    noiseless : bool
        Force the noise to zero. Only meant for deterministic checks.
    """

    n_samples: int = 128
    snr: float = 4.0
    prior_present: float = 0.5
    oversample: int = 16
    seed: int = 2022
    edge_margin: float = 8.0
    noiseless: bool = False

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 2 or self.n_samples % 2:
            raise PreconditionError(f"n_samples must be an even integer >= 2, got {self.n_samples}")
        if not (np.isfinite(self.snr) and self.snr >= 0):
            raise PreconditionError(f"snr must be a finite nonnegative number, got {self.snr}")
        if not 0.0 <= self.prior_present <= 1.0:
            raise PreconditionError(f"prior_present must lie in [0, 1], got {self.prior_present}")
        if int(self.oversample) != self.oversample or self.oversample < 4:
            raise PreconditionError(f"oversample must be an integer >= 4, got {self.oversample}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise PreconditionError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not 0 <= self.edge_margin < self.n_samples / 2:
            raise PreconditionError(f"edge_margin must lie in [0, N/2), got {self.edge_margin}")

    @property
    def amplitude(self) -> float:
        return float(np.sqrt(self.snr))

    @property
    def half_width(self) -> float:
        return self.n_samples / 2

    @property
    def sample_index(self) -> np.ndarray:
        """n = -N/2, ..., N/2 - 1."""
        return np.arange(-self.n_samples // 2, self.n_samples // 2, dtype=float)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class JointTargetParameter:
    """gamma = (v, x): existence bit and normalized delay x = B*tau."""

    present: int
    delay: float

    def __post_init__(self):
        if self.present not in (0, 1):
            raise PreconditionError(f"present must be 0 or 1, got {self.present}")


@dataclass(frozen=True)
class Snapshot:
    truth: JointTargetParameter
    phase: float
    samples: np.ndarray = field(repr=False)


def sinc(x):
    """Normalized sinc, sin(pi x) / (pi x), equal to 1 at x = 0."""
    return np.sinc(x)


def generate_noise(config: SystemConfig, stream: np.random.Generator) -> np.ndarray:
    """N i.i.d. complex Gaussian samples, variance 1/2 per real component."""
    re_im = stream.normal(0.0, np.sqrt(0.5), size=(2, config.n_samples))
    return re_im[0] + 1j * re_im[1]


def draw_truth(config: SystemConfig, stream: np.random.Generator) -> JointTargetParameter:
    """Sample gamma from the prior, with the delay kept inside the edge margin."""
    present = int(stream.random() < config.prior_present)
    lo = -config.half_width + config.edge_margin
    delay = float(stream.uniform(lo, -lo))
    return JointTargetParameter(present, delay)


def synthesize_snapshot(
    config: SystemConfig,
    truth: JointTargetParameter,
    stream: np.random.Generator,
    phase: float | None = None,
) -> Snapshot:
    """Received samples v0 * rho * exp(j phi0) * sinc(n - x0) + w(n).

    The phase is drawn uniformly on [0, 2 pi) unless given. The stream is
    advanced identically in noiseless mode so that draws further down the
    stream do not depend on the flag.
    """
    limit = config.half_width - config.edge_margin
    if not -limit <= truth.delay <= limit:
        raise PreconditionError(
            f"delay {truth.delay} outside [{-limit}, {limit}] (edge_margin={config.edge_margin})"
        )
    drawn_phase = float(stream.uniform(0.0, 2 * np.pi))
    noise = generate_noise(config, stream)
    if phase is None:
        phase = drawn_phase
    if config.noiseless:
        noise = np.zeros_like(noise)
    samples = noise
    if truth.present and config.snr > 0:
        pulse = sinc(config.sample_index - truth.delay)
        samples = noise + config.amplitude * np.exp(1j * phase) * pulse
    return Snapshot(truth=truth, phase=phase, samples=samples)


def sinc_matrix(config: SystemConfig, delays: np.ndarray) -> np.ndarray:
    """Rows are the sampled waveforms u(x) = sinc(n - x) for each delay x."""
    delays = np.asarray(delays, dtype=float)
    return sinc(config.sample_index[None, :] - delays[:, None])


def _check_delay(config: SystemConfig, x) -> None:
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > config.half_width):
        raise PreconditionError(f"delay outside [-{config.half_width}, {config.half_width}]")


def matched_filter(snapshot: Snapshot, x, config: SystemConfig | None = None):
    """u(x)^H y = sum_n sinc(n - x) y(n).

    Accepts a scalar delay or an array of delays (vectorized over the grid).
    """
    n_samples = snapshot.samples.shape[-1]
    if config is None:
        config = SystemConfig(n_samples=n_samples)
    _check_delay(config, x)
    u = sinc_matrix(config, np.atleast_1d(x))
    out = u @ snapshot.samples
    return out[0] if np.ndim(x) == 0 else out


def autocorrelation(x: float, x0: float, n_samples: int) -> float:
    """Truncated sum_n sinc(n - x) sinc(n - x0) over the observation window.

    Approaches sinc(x - x0) for delays well inside the window; the error
    grows towards the edges where the tails of the pulses fall outside.
    """
    half = n_samples / 2
    if abs(x) > half or abs(x0) > half:
        raise PreconditionError("both delays must lie in the observation interval")
    n = np.arange(-n_samples // 2, n_samples // 2, dtype=float)
    return float(np.dot(sinc(n - x), sinc(n - x0)))
