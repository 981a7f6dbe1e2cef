"""Quasi-static fading wiretap-channel waveform synthesis.

Builds sampled voltage traces for a legitimate receiver ("bob") and an
eavesdropper ("eve") listening to the same on-off-keyed transmission.
Each receiver sees ``gain * on_amplitude * bit + dc_offset + AWGN`` where
the gain is constant within a coherence slot and drawn log-normally
across slots (block fading).  The transmitted bit stream is a repeated
maximal-length pseudorandom sequence, started at a random circular
offset so that downstream frame synchronization is non-trivial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import PrbsError

__all__ = [
    "PrbsSpec",
    "ChannelParams",
    "SimConfig",
    "WaveformRecord",
    "GroundTruth",
    "gen_prbs15",
    "sample_gains",
    "synthesize_waveform",
    "wiretap_run",
]


def _exact_ratio(numer: float, denom: float, what: str) -> int:
    """Integer ratio numer/denom, raising if it is not integral."""
    ratio = numer / denom
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, abs(ratio)):
        raise ValueError(f"{what} must be an integer, got {ratio!r}")
    return n


@dataclass(frozen=True)
class PrbsSpec:
    """Linear-feedback shift register defining the transmitted bit pattern.

    ``taps`` are 1-indexed register positions XORed into the feedback bit;
    the default (15, 14) realizes the maximal-length polynomial
    x^15 + x^14 + 1 with period 2^15 - 1.
    """

    register_bits: int = 15
    taps: tuple[int, ...] = (15, 14)
    initial_state: int = 0x7FFF

    def __post_init__(self):
        if self.register_bits < 2:
            raise PrbsError("register_bits must be >= 2")
        if not self.taps:
            raise PrbsError("taps must be nonempty")
        if any(t < 1 or t > self.register_bits for t in self.taps):
            raise PrbsError(
                f"taps must lie in 1..{self.register_bits}, got {self.taps}"
            )
        if len(set(self.taps)) != len(self.taps):
            raise PrbsError(f"duplicate taps in {self.taps}")
        if not 0 < self.initial_state < (1 << self.register_bits):
            raise PrbsError(
                f"initial_state must be a nonzero {self.register_bits}-bit value, "
                f"got {self.initial_state}"
            )

    @property
    def period(self) -> int:
        return (1 << self.register_bits) - 1


@lru_cache(maxsize=16)
def _lfsr_full_period(register_bits: int, taps: tuple[int, ...], initial_state: int) -> bytes:
    """One full period of LFSR output, verifying maximal length."""
    mask = (1 << register_bits) - 1
    period = mask
    shifts = tuple(t - 1 for t in taps)
    state = initial_state
    out = bytearray(period)
    for i in range(period):
        fb = 0
        for s in shifts:
            fb ^= state >> s
        fb &= 1
        out[i] = fb
        state = ((state << 1) | fb) & mask
        if state == initial_state and i < period - 1:
            raise PrbsError(
                f"taps {taps} are not maximal length: state repeats after {i + 1} "
                f"of {period} steps"
            )
    if state != initial_state:
        raise PrbsError(f"taps {taps} do not return to the initial state after one period")
    return bytes(out)


def gen_prbs15(spec: PrbsSpec) -> np.ndarray:
    """Generate one full period (2^register_bits - 1 bits) of the sequence.

    Deterministic for a fixed spec.  Raises :class:`PrbsError` for a zero
    initial state or a tap set that does not produce a maximal-length
    sequence (detected by checking the state-cycle period).
    """
    bits = _lfsr_full_period(spec.register_bits, spec.taps, spec.initial_state)
    return np.frombuffer(bits, dtype=np.uint8).astype(np.int8)


@dataclass(frozen=True)
class ChannelParams:
    """Per-receiver channel statistics.

    mean_gain
        Expected gain (volts out per unit modulation input).
    scint_index
        Normalized intensity variance E[G^2]/E[G]^2 - 1 of the slot gains.
    noise_sigma
        RMS of the additive Gaussian noise, volts.
    dc_offset
        Detector DC level added to every sample, volts.
    """

    mean_gain: float
    scint_index: float
    noise_sigma: float
    dc_offset: float = 0.0

    def __post_init__(self):
        if self.mean_gain < 0:
            raise ValueError(f"mean_gain must be >= 0, got {self.mean_gain}")
        if self.scint_index < 0:
            raise ValueError(f"scint_index must be >= 0, got {self.scint_index}")
        if not self.noise_sigma > 0:
            raise ValueError(f"noise_sigma must be > 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class SimConfig:
    """Full wiretap-link simulation setup.

    The sample rate must be an integer multiple of the symbol rate, and
    the total duration an integer number of coherence slots.
    """

    prbs: PrbsSpec = field(default_factory=PrbsSpec)
    rep_rate_hz: float = 10e6
    sample_rate_hz: float = 50e6
    duration_s: float = 0.2
    coherence_s: float = 4e-3
    on_amplitude: float = 1.0
    bob: ChannelParams = field(
        default_factory=lambda: ChannelParams(1.0, 0.1, 0.08, dc_offset=0.1)
    )
    eve: ChannelParams = field(
        default_factory=lambda: ChannelParams(0.6, 0.1, 0.25, dc_offset=0.05)
    )
    gain_correlation: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        _exact_ratio(self.sample_rate_hz, self.rep_rate_hz, "sample_rate_hz / rep_rate_hz")
        _exact_ratio(self.duration_s, self.coherence_s, "duration_s / coherence_s")
        _exact_ratio(self.coherence_s * self.rep_rate_hz, 1.0, "symbols per coherence slot")
        if not -1.0 <= self.gain_correlation <= 1.0:
            raise ValueError(f"gain_correlation must be in [-1, 1], got {self.gain_correlation}")

    @property
    def samples_per_symbol(self) -> int:
        return _exact_ratio(self.sample_rate_hz, self.rep_rate_hz, "samples per symbol")

    @property
    def symbols_per_slot(self) -> int:
        return _exact_ratio(self.coherence_s * self.rep_rate_hz, 1.0, "symbols per slot")

    @property
    def samples_per_slot(self) -> int:
        return self.symbols_per_slot * self.samples_per_symbol

    @property
    def n_slots(self) -> int:
        return _exact_ratio(self.duration_s, self.coherence_s, "slot count")

    @property
    def n_symbols(self) -> int:
        return self.n_slots * self.symbols_per_slot

    @property
    def n_samples(self) -> int:
        return self.n_slots * self.samples_per_slot


@dataclass
class WaveformRecord:
    """Uniformly sampled voltage trace plus acquisition metadata.

    ``dc_offset`` may be None when the detector DC level is unknown; the
    recovery stage then estimates it from the data.
    """

    samples: np.ndarray
    sample_rate_hz: float
    dc_offset: float | None = 0.0
    label: str = ""

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.size == 0:
            raise ValueError("waveform must contain at least one sample")
        if not np.isfinite(self.samples).all():
            raise ValueError("waveform contains non-finite samples")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be > 0")

    @property
    def n_samples(self) -> int:
        return self.samples.size


@dataclass
class GroundTruth:
    """Simulator-side record of everything the receivers must recover."""

    transmitted_bits: np.ndarray
    slot_gains_bob: np.ndarray
    slot_gains_eve: np.ndarray
    frame_offset_samples: int


def _gains_from_normals(params: ChannelParams, z: np.ndarray) -> np.ndarray:
    """Map standard normals to log-normal gains with the configured moments.

    The log-variance is ln(1 + scint_index) and the log-mean is chosen so
    the expectation equals mean_gain; a zero scintillation index collapses
    to a constant gain, a zero mean gain to all-zero gains.
    """
    sigma_ln = math.sqrt(math.log1p(params.scint_index))
    return params.mean_gain * np.exp(sigma_ln * z - 0.5 * sigma_ln**2)


def sample_gains(params: ChannelParams, n_slots: int, rng: np.random.Generator) -> np.ndarray:
    """Draw i.i.d. per-slot gains.

    Parameters
    ----------
    params : ChannelParams
        Gain statistics (mean and scintillation index).
    n_slots : int
        Number of coherence slots, >= 1.
    rng : numpy.random.Generator
        Source of randomness; results are deterministic per seed.

    Returns
    -------
    ndarray, shape (n_slots,)
        One gain per slot with E[G] = mean_gain and
        E[G^2]/E[G]^2 - 1 = scint_index.
    """
    if n_slots < 1:
        raise ValueError(f"n_slots must be >= 1, got {n_slots}")
    return _gains_from_normals(params, rng.standard_normal(n_slots))


def synthesize_waveform(
    bits: np.ndarray,
    gains: np.ndarray,
    params: ChannelParams,
    cfg: SimConfig,
    rng: np.random.Generator,
    label: str = "",
) -> WaveformRecord:
    """Render a sampled OOK waveform for one receiver.

    Every sample is ``gain(slot) * on_amplitude * bit(symbol) + dc_offset
    + N(0, noise_sigma^2)`` with symbol boundaries at exact multiples of
    sample_rate / rep_rate.  The bit sequence and the gain sequence must
    span the same duration.
    """
    bits = np.asarray(bits)
    gains = np.asarray(gains, dtype=np.float64)
    spp = cfg.samples_per_symbol
    n_samples = bits.size * spp
    if gains.size * cfg.samples_per_slot != n_samples:
        raise ValueError(
            f"{bits.size} bits span {n_samples} samples but {gains.size} slot gains "
            f"span {gains.size * cfg.samples_per_slot}"
        )
    signal = np.repeat(bits.astype(np.float64) * cfg.on_amplitude, spp)
    signal *= np.repeat(gains, cfg.samples_per_slot)
    signal += params.dc_offset
    signal += rng.standard_normal(n_samples) * params.noise_sigma
    return WaveformRecord(signal, cfg.sample_rate_hz, dc_offset=params.dc_offset, label=label)


def wiretap_run(cfg: SimConfig) -> tuple[WaveformRecord, WaveformRecord, GroundTruth]:
    """Simulate one transmission seen by both receivers.

    The PRBS is cyclically repeated from a random circular start offset
    (recorded in the ground truth as a sample count).  Both waveforms are
    driven by the same bit sequence; the two gain processes are coupled
    through a Gaussian copula with correlation ``cfg.gain_correlation``
    on the underlying normals.  Bit-for-bit reproducible for a fixed
    ``cfg.rng_seed``.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    prbs = gen_prbs15(cfg.prbs)
    period = prbs.size

    offset = int(rng.integers(period))
    bits = np.resize(np.roll(prbs, -offset), cfg.n_symbols)

    rho = cfg.gain_correlation
    z_shared = rng.standard_normal(cfg.n_slots)
    z_indep = rng.standard_normal(cfg.n_slots)
    gains_bob = _gains_from_normals(cfg.bob, z_shared)
    gains_eve = _gains_from_normals(
        cfg.eve, rho * z_shared + math.sqrt(1.0 - rho * rho) * z_indep
    )

    bob = synthesize_waveform(bits, gains_bob, cfg.bob, cfg, rng, label="bob")
    eve = synthesize_waveform(bits, gains_eve, cfg.eve, cfg, rng, label="eve")
    truth = GroundTruth(
        transmitted_bits=bits,
        slot_gains_bob=gains_bob,
        slot_gains_eve=gains_eve,
        frame_offset_samples=offset * cfg.samples_per_symbol,
    )
    return bob, eve, truth
