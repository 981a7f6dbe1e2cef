"""Off-line symbol recovery: filtering, timing, and frame synchronization.

The receive chain mirrors a PC-based post-processing flow: an optional
linear-phase low-pass filter, symbol-rate downsampling with an exhaustive
timing-phase search (valid because the sample rate is an exact integer
multiple of the symbol rate), and circular cross-correlation against the
known transmitted pseudorandom sequence to locate the frame start.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, firwin

from .errors import SyncError
from .fading import WaveformRecord

__all__ = [
    "SymbolFrame",
    "SyncResult",
    "low_pass",
    "symbol_timing",
    "frame_sync",
    "build_frame",
    "recover_frame",
]

LPF_TAPS = 127


@dataclass
class SyncResult:
    """Outcome of the cross-correlation frame search."""

    offset_symbols: int
    peak_correlation: float
    second_peak: float


@dataclass
class SymbolFrame:
    """Aligned (input bit, soft output voltage) pairs sliced into slots.

    ``x[k]`` is the transmitted bit for soft value ``v[k]`` and
    ``slot_index[k]`` the coherence slot the symbol falls in.  Slot
    indices are nondecreasing and all slots except possibly the last
    contain the same number of symbols.
    """

    x: np.ndarray
    v: np.ndarray
    slot_index: np.ndarray
    rep_rate_hz: float
    coherence_s: float
    dc_removed: bool = True

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.int8)
        self.v = np.asarray(self.v, dtype=np.float64)
        self.slot_index = np.asarray(self.slot_index, dtype=np.int64)
        if not (self.x.size == self.v.size == self.slot_index.size):
            raise ValueError("x, v and slot_index must have equal length")
        if self.x.size == 0:
            raise ValueError("frame must contain at least one symbol")

    @property
    def n_symbols(self) -> int:
        return self.x.size

    @property
    def n_slots(self) -> int:
        return int(self.slot_index[-1]) + 1

    @property
    def symbols_per_slot(self) -> int:
        return int(round(self.coherence_s * self.rep_rate_hz))

    def slot_pairs(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(x, v) arrays of slot ``i``."""
        lo = int(np.searchsorted(self.slot_index, i, side="left"))
        hi = int(np.searchsorted(self.slot_index, i, side="right"))
        if lo == hi:
            raise IndexError(f"slot {i} is empty")
        return self.x[lo:hi], self.v[lo:hi]

    def iter_slots(self):
        """Yield (slot index, x, v) for every slot in order."""
        for i in range(self.n_slots):
            x, v = self.slot_pairs(i)
            yield i, x, v


def low_pass(w: WaveformRecord, cutoff_hz: float, numtaps: int = LPF_TAPS) -> WaveformRecord:
    """Linear-phase FIR low-pass, group delay compensated.

    A Hamming-windowed sinc design with unit DC gain.  The output has the
    same length and time alignment as the input; edges are handled by
    symmetric extension.  ``cutoff_hz`` must lie strictly between 0 and
    the Nyquist frequency.
    """
    nyquist = w.sample_rate_hz / 2.0
    if not 0.0 < cutoff_hz < nyquist:
        raise ValueError(f"cutoff_hz must be in (0, {nyquist:g}), got {cutoff_hz!r}")
    taps = firwin(numtaps, cutoff_hz, fs=w.sample_rate_hz)
    pad = (numtaps - 1) // 2
    ext = np.pad(w.samples, pad, mode="symmetric")
    out = fftconvolve(ext, taps, mode="valid")
    return WaveformRecord(out, w.sample_rate_hz, dc_offset=w.dc_offset, label=w.label)


def _estimate_dc(samples: np.ndarray) -> float:
    """DC level proxy: mean of the lowest-decile samples (off-level plateau)."""
    k = max(1, samples.size // 10)
    return float(np.partition(samples, k - 1)[:k].mean())


def symbol_timing(
    w: WaveformRecord,
    rep_rate_hz: float,
    return_phase: bool = False,
) -> np.ndarray | tuple[np.ndarray, int]:
    """Downsample to one soft value per symbol at the best timing phase.

    All integer sample phases are tried and the one maximizing the mean
    absolute deviation of the resulting symbol values (widest eye) wins.
    The record's DC offset is subtracted (estimated from the lowest
    decile when unknown).  Output length is ``floor(n_samples / spp)``
    regardless of the chosen phase.
    """
    ratio = w.sample_rate_hz / rep_rate_hz
    spp = int(round(ratio))
    if abs(ratio - spp) > 1e-9 * max(1.0, ratio) or spp < 1:
        raise ValueError(f"sample rate must be an integer multiple of rep rate, ratio {ratio!r}")
    n_sym = w.n_samples // spp
    if n_sym == 0:
        raise ValueError(f"waveform shorter than one symbol ({w.n_samples} < {spp} samples)")

    grid = w.samples[: n_sym * spp].reshape(n_sym, spp)
    spread = np.mean(np.abs(grid - grid.mean(axis=0)), axis=0)
    phase = int(np.argmax(spread))

    dc = w.dc_offset if w.dc_offset is not None else _estimate_dc(w.samples)
    soft = grid[:, phase] - dc
    if return_phase:
        return soft, phase
    return soft


def frame_sync(soft: np.ndarray, prbs: np.ndarray) -> SyncResult:
    """Locate the circular PRBS offset by normalized cross-correlation.

    The mean-removed soft sequence is folded over whole PRBS periods and
    circularly correlated with the bipolar (+-1) reference.  Returns the
    argmax lag (smallest on ties), its normalized peak, and the runner-up
    peak so callers can gate on the peak ratio.  ``soft[k]`` is declared
    to carry bit ``prbs[(k + offset) % period]``.
    """
    soft = np.asarray(soft, dtype=np.float64)
    prbs = np.asarray(prbs)
    period = prbs.size
    if soft.size < period:
        raise ValueError(f"need at least one PRBS period ({period}) of symbols, got {soft.size}")

    n_periods = soft.size // period
    seg = soft[: n_periods * period]
    seg = seg - seg.mean()
    folded = seg.reshape(n_periods, period).sum(axis=0)

    ref = 2.0 * prbs.astype(np.float64) - 1.0
    norm = np.linalg.norm(folded) * np.linalg.norm(ref)
    if norm == 0.0 or not np.isfinite(norm):
        raise SyncError("soft sequence has zero variance; cannot synchronize")

    corr = np.fft.irfft(np.conj(np.fft.rfft(folded)) * np.fft.rfft(ref), n=period) / norm
    offset = int(np.argmax(corr))
    peak = float(corr[offset])
    second = float(np.partition(corr, period - 2)[period - 2])
    return SyncResult(offset_symbols=offset, peak_correlation=peak, second_peak=second)


def build_frame(
    soft: np.ndarray,
    sync: SyncResult,
    prbs: np.ndarray,
    coherence_s: float,
    rep_rate_hz: float,
) -> SymbolFrame:
    """Pair every soft value with its transmitted bit and coherence slot.

    The PRBS is cyclically extended from the synchronized offset; offsets
    differing by a whole period produce identical frames.  The slot index
    is ``floor(symbol_time / coherence_s)``.
    """
    soft = np.asarray(soft, dtype=np.float64)
    symbols_per_slot = int(round(coherence_s * rep_rate_hz))
    if symbols_per_slot < 1:
        raise ValueError(
            f"coherence interval {coherence_s!r} s is shorter than one symbol "
            f"at {rep_rate_hz!r} Hz"
        )
    prbs = np.asarray(prbs)
    idx = (np.arange(soft.size) + sync.offset_symbols) % prbs.size
    return SymbolFrame(
        x=prbs[idx],
        v=soft,
        slot_index=np.arange(soft.size) // symbols_per_slot,
        rep_rate_hz=rep_rate_hz,
        coherence_s=coherence_s,
    )


def recover_frame(
    w: WaveformRecord,
    prbs: np.ndarray,
    rep_rate_hz: float,
    coherence_s: float,
    lpf_cutoff_hz: float | None = None,
    min_peak_ratio: float = 3.0,
) -> tuple[SymbolFrame, SyncResult]:
    """Full recovery chain: optional LPF, timing, sync, frame assembly.

    Rejects the synchronization when the correlation peak is below
    ``min_peak_ratio`` times the runner-up peak.
    """
    if lpf_cutoff_hz is not None:
        w = low_pass(w, lpf_cutoff_hz)
    soft = symbol_timing(w, rep_rate_hz)
    sync = frame_sync(soft, prbs)
    if sync.second_peak > 0 and sync.peak_correlation < min_peak_ratio * sync.second_peak:
        raise SyncError(
            f"correlation peak {sync.peak_correlation:.4f} is below {min_peak_ratio:g}x "
            f"the runner-up {sync.second_peak:.4f}; refusing to trust offset "
            f"{sync.offset_symbols}"
        )
    return build_frame(soft, sync, prbs, coherence_s, rep_rate_hz), sync
