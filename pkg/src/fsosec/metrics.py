"""Transition-probability estimation, mutual information, and secrecy rates.

The legitimate receiver is scored with hard-decision decoding: received
voltages are thresholded and the threshold is numerically optimized to
maximize the empirical mutual information.  The eavesdropper is scored
with soft-decision decoding over a uniform-width voltage binning, which
upper-bounds what thresholding can extract.  Per-slot rate differences,
their average, the pooled (long-span) rate, and the outage curve are
derived from those two estimates.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .errors import EstimationError
from .recovery import SymbolFrame

__all__ = [
    "InputDist",
    "TransitionTable",
    "SlotMetrics",
    "SecrecyReport",
    "BinWidthChoice",
    "hard_transition",
    "mutual_info_hard",
    "optimize_threshold",
    "soft_transition",
    "mutual_info_soft",
    "bin_width_sweep",
    "select_bin_width",
    "slot_metrics",
    "long_span_rate",
    "ergodic_rate",
    "outage_curve",
]

_ROW_SUM_TOL = 1e-9


@dataclass(frozen=True)
class InputDist:
    """Input bit distribution (p0, p1)."""

    p0: float = 0.5
    p1: float = 0.5

    def __post_init__(self):
        if self.p0 < 0 or self.p1 < 0 or abs(self.p0 + self.p1 - 1.0) > 1e-12:
            raise ValueError(f"probabilities must be nonnegative and sum to 1, got {self}")

    @classmethod
    def uniform(cls) -> "InputDist":
        return cls(0.5, 0.5)

    @property
    def as_array(self) -> np.ndarray:
        return np.array([self.p0, self.p1])


@dataclass
class TransitionTable:
    """Estimated conditional output distribution P(bin | x) for x in {0, 1}.

    ``rows`` has shape (2, K) and each row sums to one.  Hard tables carry
    the decision threshold; soft tables carry the binning geometry.
    ``counts`` holds the raw event counts behind the probabilities.
    """

    kind: str
    rows: np.ndarray
    counts: np.ndarray
    bin_width: float | None = None
    bin_origin: float | None = None
    threshold: float | None = None

    def __post_init__(self):
        if self.kind not in ("hard", "soft"):
            raise ValueError(f"kind must be 'hard' or 'soft', got {self.kind!r}")
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        self.counts = np.atleast_2d(np.asarray(self.counts))
        if self.rows.shape[0] != 2 or self.rows.shape != self.counts.shape:
            raise ValueError(f"rows/counts must both be 2 x K, got {self.rows.shape}")
        if (self.rows < 0).any():
            raise ValueError("transition probabilities must be nonnegative")
        sums = self.rows.sum(axis=1)
        if np.abs(sums - 1.0).max() > _ROW_SUM_TOL:
            raise ValueError(f"rows must sum to 1 within {_ROW_SUM_TOL}, got {sums}")

    @property
    def bin_count(self) -> int:
        return self.rows.shape[1]


@dataclass
class SlotMetrics:
    """Per-slot information rates; ``rs_i`` clamps the MI gap at zero."""

    slot_index: int
    mi_bob: float
    mi_eve: float
    rs_i: float
    rs_i_bps: float
    mean_voltage_bob: float
    valid: bool = True


@dataclass
class SecrecyReport:
    """Aggregated per-run secrecy figures."""

    slots: list[SlotMetrics]
    rs_long_span: float
    rs_ergodic: float
    outage: list[tuple[float, float]] = field(default_factory=list)


def _split_by_bit(x: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x)
    v = np.asarray(v, dtype=np.float64)
    if x.size != v.size or x.size == 0:
        raise EstimationError("need equal-length, nonempty bit and voltage arrays")
    v0 = v[x == 0]
    v1 = v[x == 1]
    if v0.size == 0 or v1.size == 0:
        raise EstimationError(
            f"both input symbols must occur in the slot (N0={v0.size}, N1={v1.size})"
        )
    return v0, v1


def _mutual_information(rows: np.ndarray, px: InputDist) -> float:
    """Mutual information in bits of a 2 x K transition matrix."""
    p = px.as_array[:, None]
    joint = p * rows
    marginal = joint.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, rows / np.where(marginal > 0, marginal, 1.0), 1.0)
        terms = xlogy(joint, ratio)
    return float(terms.sum() / np.log(2.0))


def hard_transition(x: np.ndarray, v: np.ndarray, y_th: float) -> TransitionTable:
    """Two-bin transition table from thresholding at ``y_th``.

    Output 1 is declared for ``v >= y_th`` (boundary values count as 1 so
    the rows stay normalized); output 0 otherwise.
    """
    v0, v1 = _split_by_bit(x, v)
    n1_given_0 = int(np.count_nonzero(v0 >= y_th))
    n1_given_1 = int(np.count_nonzero(v1 >= y_th))
    counts = np.array(
        [
            [v0.size - n1_given_0, n1_given_0],
            [v1.size - n1_given_1, n1_given_1],
        ]
    )
    rows = counts / counts.sum(axis=1, keepdims=True)
    return TransitionTable(kind="hard", rows=rows, counts=counts, threshold=float(y_th))


def mutual_info_hard(t: TransitionTable, px: InputDist) -> float:
    """Mutual information in bits/letter of a hard-decision table."""
    if t.kind != "hard":
        raise ValueError(f"expected a hard table, got kind={t.kind!r}")
    return _mutual_information(t.rows, px)


def _binary_mi_from_crossings(p1_0: np.ndarray, p1_1: np.ndarray, px: InputDist) -> np.ndarray:
    """Vectorized binary-output MI given P(1|0) and P(1|1) arrays."""

    def h2(p):
        return -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)) / np.log(2.0)

    q1 = px.p0 * p1_0 + px.p1 * p1_1
    return h2(q1) - px.p0 * h2(p1_0) - px.p1 * h2(p1_1)


def optimize_threshold(x: np.ndarray, v: np.ndarray, px: InputDist) -> tuple[float, float]:
    """Exhaustive MI-maximizing threshold search.

    Candidates are the midpoints between consecutive distinct voltages,
    which is exhaustive because the empirical MI is constant between data
    points.  Ties resolve to the smallest threshold.  If every voltage is
    identical the channel is useless and (that voltage, 0.0) is returned.
    """
    v0, v1 = _split_by_bit(x, v)
    levels = np.unique(np.concatenate([v0, v1]))
    if levels.size == 1:
        return float(levels[0]), 0.0
    cands = 0.5 * (levels[:-1] + levels[1:])

    v0s = np.sort(v0)
    v1s = np.sort(v1)
    p1_0 = (v0.size - np.searchsorted(v0s, cands, side="left")) / v0.size
    p1_1 = (v1.size - np.searchsorted(v1s, cands, side="left")) / v1.size
    mi = _binary_mi_from_crossings(p1_0, p1_1, px)
    best = int(np.argmax(mi))
    return float(cands[best]), float(mi[best])


def soft_transition(x: np.ndarray, v: np.ndarray, delta: float) -> TransitionTable:
    """Uniform-width binned transition table.

    Bins start at the minimum voltage with width ``delta``; the bin index
    is ``floor((v - origin) / delta)``, so the maximum voltage falls in
    the last bin and K = floor(range / delta) + 1.
    """
    if not delta > 0:
        raise ValueError(f"bin width must be > 0, got {delta!r}")
    v0, v1 = _split_by_bit(x, v)
    v_all = np.asarray(v, dtype=np.float64)
    origin = float(v_all.min())
    k = int((v_all.max() - origin) / delta) + 1
    counts = np.vstack(
        [
            np.bincount(((v0 - origin) / delta).astype(np.int64), minlength=k),
            np.bincount(((v1 - origin) / delta).astype(np.int64), minlength=k),
        ]
    )
    rows = counts / counts.sum(axis=1, keepdims=True)
    return TransitionTable(
        kind="soft", rows=rows, counts=counts, bin_width=float(delta), bin_origin=origin
    )


def mutual_info_soft(t: TransitionTable, px: InputDist) -> float:
    """Mutual information in bits/letter over the K soft bins."""
    if t.kind != "soft":
        raise ValueError(f"expected a soft table, got kind={t.kind!r}")
    return _mutual_information(t.rows, px)


def bin_width_sweep(
    x: np.ndarray,
    v: np.ndarray,
    deltas,
    px: InputDist = InputDist.uniform(),
) -> list[tuple[float, float]]:
    """Soft-decision MI for each candidate bin width.

    No monotonicity is imposed: the rise of the estimate at small widths
    is finite-sample inflation, which is exactly what the sweep exposes.
    """
    out = []
    for delta in deltas:
        mi = mutual_info_soft(soft_transition(x, v, delta), px)
        out.append((float(delta), mi))
    return out


@dataclass(frozen=True)
class BinWidthChoice:
    """Result of the plateau search over a bin-width sweep."""

    delta: float
    plateau: bool


def select_bin_width(sweep: list[tuple[float, float]], epsilon: float = 0.02) -> BinWidthChoice:
    """Pick the smallest bin width still on the MI plateau.

    The sweep must be sorted by decreasing width and contain at least 5
    points.  A width qualifies when its MI exceeds the next-larger
    width's MI by at most ``epsilon`` (relative); the smallest qualifying
    width is returned.  If no width qualifies the sweep is treated as
    plateau-free and the median width is returned with ``plateau=False``.
    """
    if len(sweep) < 5:
        raise ValueError(f"need at least 5 sweep points, got {len(sweep)}")
    deltas = np.array([d for d, _ in sweep])
    mis = np.array([m for _, m in sweep])
    if not (np.diff(deltas) < 0).all():
        raise ValueError("sweep must be sorted by strictly decreasing bin width")

    flat = mis[1:] <= (1.0 + epsilon) * mis[:-1]
    if not flat.any():
        warnings.warn("no MI plateau found in bin-width sweep; falling back to the median width")
        return BinWidthChoice(delta=float(deltas[len(deltas) // 2]), plateau=False)
    last_flat = int(np.nonzero(flat)[0].max()) + 1
    return BinWidthChoice(delta=float(deltas[last_flat]), plateau=True)


def _one_slot(
    slot: int,
    x: np.ndarray,
    v_bob: np.ndarray,
    v_eve: np.ndarray,
    px: InputDist,
    delta_eve: float,
    rep_rate_hz: float,
) -> SlotMetrics:
    _, mi_bob = optimize_threshold(x, v_bob, px)
    mi_eve = mutual_info_soft(soft_transition(x, v_eve, delta_eve), px)
    rs = max(0.0, mi_bob - mi_eve)
    return SlotMetrics(
        slot_index=slot,
        mi_bob=mi_bob,
        mi_eve=mi_eve,
        rs_i=rs,
        rs_i_bps=rs * rep_rate_hz,
        mean_voltage_bob=float(v_bob.mean()),
    )


def _check_aligned(bob: SymbolFrame, eve: SymbolFrame) -> None:
    if bob.n_symbols != eve.n_symbols:
        raise ValueError(
            f"frames disagree on symbol count ({bob.n_symbols} vs {eve.n_symbols})"
        )
    if not np.array_equal(bob.x, eve.x):
        raise ValueError("frames disagree on the transmitted bit sequence; check sync")
    if not np.array_equal(bob.slot_index, eve.slot_index):
        raise ValueError("frames disagree on slot structure")


def slot_metrics(
    bob: SymbolFrame,
    eve: SymbolFrame,
    px: InputDist,
    delta_eve: float,
    workers: int = 1,
    on_error: str = "raise",
) -> list[SlotMetrics]:
    """Per-slot hard/soft MIs and instantaneous secrecy rates.

    The legitimate channel is scored with a re-optimized threshold per
    slot, the eavesdropper with soft bins of width ``delta_eve``.  With
    ``on_error="mark"`` a slot whose estimate fails (e.g. only one input
    symbol present) is returned as invalid instead of aborting the run.
    Slot computations are independent; ``workers > 1`` fans them out to a
    thread pool with an order-preserving merge.
    """
    if on_error not in ("raise", "mark"):
        raise ValueError(f"on_error must be 'raise' or 'mark', got {on_error!r}")
    _check_aligned(bob, eve)

    def compute(i: int) -> SlotMetrics:
        x, vb = bob.slot_pairs(i)
        _, ve = eve.slot_pairs(i)
        try:
            return _one_slot(i, x, vb, ve, px, delta_eve, bob.rep_rate_hz)
        except EstimationError:
            if on_error == "raise":
                raise
            return SlotMetrics(
                slot_index=i,
                mi_bob=float("nan"),
                mi_eve=float("nan"),
                rs_i=float("nan"),
                rs_i_bps=float("nan"),
                mean_voltage_bob=float(vb.mean()) if vb.size else float("nan"),
                valid=False,
            )

    indices = range(bob.n_slots)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(compute, indices))
    return [compute(i) for i in indices]


def long_span_rate(
    bob: SymbolFrame,
    eve: SymbolFrame,
    px: InputDist,
    delta_eve: float,
) -> float:
    """Secrecy rate of the pooled (all-slots) transition statistics.

    All symbols are merged into a single hard table for the legitimate
    channel (threshold re-optimized on the pooled data) and a single soft
    table for the eavesdropper.  The difference is reported signed; only
    the per-slot rate is clamped at zero.
    """
    _check_aligned(bob, eve)
    _, mi_bob = optimize_threshold(bob.x, bob.v, px)
    mi_eve = mutual_info_soft(soft_transition(eve.x, eve.v, delta_eve), px)
    return mi_bob - mi_eve


def ergodic_rate(slots: list[SlotMetrics]) -> float:
    """Arithmetic mean of the per-slot instantaneous secrecy rates."""
    valid = [s.rs_i for s in slots if s.valid]
    if not valid:
        raise ValueError("no valid slots to average")
    return float(np.mean(valid))


def outage_curve(slots: list[SlotMetrics], r_th_grid) -> list[tuple[float, float]]:
    """Fraction of slots whose rate (bits/s) falls strictly below each target."""
    rates = np.array([s.rs_i_bps for s in slots if s.valid])
    if rates.size == 0:
        raise ValueError("no valid slots for the outage curve")
    return [(float(r), float(np.mean(rates < r))) for r in r_th_grid]
