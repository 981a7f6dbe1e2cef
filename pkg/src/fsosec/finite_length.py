"""Finite-length secrecy analysis: exponents, leakage bounds, code sizing.

For a wiretap code of length ``n`` whose dummy-randomness rate exceeds
the eavesdropper's mutual information, the leaked information decays as
``exp(-n * H)`` where the exponent ``H`` is a Gallager-style maximization
over a tilting parameter.  This module evaluates that exponent on
empirical transition tables and converts it into leakage bounds,
required code lengths, and design curves over rate splits or symbol
repetition rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleRateError
from .metrics import InputDist, TransitionTable

__all__ = [
    "CodeParams",
    "ExponentCurve",
    "gallager_cumulant",
    "secrecy_exponent",
    "exponent_curve",
    "leakage_bound",
    "required_length",
    "rate_split_curve",
    "repetition_curve",
]

LN2 = math.log(2.0)

# Grid maxima this close to zero are floating-point residue of the exact
# zero at rho = 0 and are reported as 0.
_ZERO_SNAP = 1e-12


@dataclass(frozen=True)
class CodeParams:
    """Wiretap code dimensions: n letters carrying m message + l dummy bits."""

    n: int
    message_bits: int
    random_bits: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"code length must be >= 1, got {self.n}")
        if self.message_bits < 0 or self.random_bits < 0:
            raise ValueError("bit counts must be nonnegative")
        if self.message_bits + self.random_bits > self.n:
            raise ValueError(
                f"m + l = {self.message_bits + self.random_bits} exceeds code length {self.n}"
            )

    @property
    def message_rate(self) -> float:
        """Message bits per letter."""
        return self.message_bits / self.n

    @property
    def randomness_rate(self) -> float:
        """Dummy-randomness bits per letter."""
        return self.random_bits / self.n


def _cumulant_at(t: TransitionTable, px: InputDist, rho: np.ndarray) -> np.ndarray:
    """Cumulant for an array of rho values, computed in log space.

    The inner sum ``sum_x px(x) * P(i|x)^(1/(1-rho))`` is shifted by the
    per-bin maximum before exponentiation so that small probabilities do
    not underflow as rho approaches 1.  Bins with no supported mass are
    skipped.
    """
    with np.errstate(divide="ignore"):
        logp = np.log(t.rows)  # -inf at empty bins
    weights = px.as_array
    masked = np.where(weights[:, None] > 0, logp, -np.inf)
    peak = masked.max(axis=0)
    alive = peak > -np.inf
    lp = masked[:, alive] - peak[alive]
    a = (1.0 / (1.0 - rho))[:, None]
    with np.errstate(divide="ignore"):
        inner = weights[0] * np.exp(a * lp[0]) + weights[1] * np.exp(a * lp[1])
        terms = np.exp(peak[alive] + np.log(inner) / a)
    return -np.log(terms.sum(axis=1))


def gallager_cumulant(rho: float, t: TransitionTable, px: InputDist) -> float:
    """Tilted channel cumulant, in nats.

    Evaluates ``-ln sum_i (sum_x px(x) * P(i|x)^(1/(1-rho)))^(1-rho)`` for
    ``0 <= rho < 1``.  Empty bins contribute nothing.  Exactly zero at
    ``rho = 0`` for any normalized table.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho!r}")
    if rho == 0.0:
        return 0.0
    return float(_cumulant_at(t, px, np.array([rho]))[0])


def _cumulant_grid(t: TransitionTable, px: InputDist, rho_steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Cumulant values over the uniform rho grid {0, 1/steps, ...}."""
    rho = np.arange(rho_steps) / rho_steps
    vals = np.empty(rho_steps)
    vals[0] = 0.0
    for lo in range(1, rho_steps, 256):
        hi = min(lo + 256, rho_steps)
        vals[lo:hi] = _cumulant_at(t, px, rho[lo:hi])
    return rho, vals


def _exponent_from_grid(rho: np.ndarray, cumulant: np.ndarray, r_e: float) -> float:
    best = float(np.max(cumulant + rho * r_e * LN2))
    return best if best > _ZERO_SNAP else 0.0


def secrecy_exponent(
    r_e: float,
    t: TransitionTable,
    px: InputDist,
    rho_steps: int = 1000,
) -> float:
    """Leakage decay exponent in nats/letter for randomness rate ``r_e``.

    Maximizes ``cumulant(rho) + rho * r_e * ln 2`` over the uniform grid
    rho in {0, 1/rho_steps, ..., (rho_steps-1)/rho_steps}; the result is
    0 exactly when the grid maximum is nonpositive, which happens for
    every ``r_e`` at or below the table's mutual information.
    """
    if r_e < 0:
        raise ValueError(f"randomness rate must be >= 0, got {r_e!r}")
    if rho_steps < 100:
        raise ValueError(f"rho_steps must be >= 100, got {rho_steps}")
    rho, vals = _cumulant_grid(t, px, rho_steps)
    return _exponent_from_grid(rho, vals, r_e)


@dataclass
class ExponentCurve:
    """Secrecy exponent sampled over a set of randomness rates."""

    table: TransitionTable
    px: InputDist
    points: list[tuple[float, float]]
    rho_steps: int


def exponent_curve(
    t: TransitionTable,
    px: InputDist,
    r_e_grid,
    rho_steps: int = 1000,
) -> ExponentCurve:
    """Evaluate the exponent over many rates, sharing one cumulant grid."""
    rho, vals = _cumulant_grid(t, px, rho_steps)
    points = [(float(r), _exponent_from_grid(rho, vals, float(r))) for r in r_e_grid]
    return ExponentCurve(table=t, px=px, points=points, rho_steps=rho_steps)


def leakage_bound(
    n: int,
    r_e: float,
    t: TransitionTable,
    px: InputDist,
    rho_steps: int = 1000,
) -> float:
    """Upper bound ``exp(-n * exponent)`` on the leaked-information measure."""
    if n < 0:
        raise ValueError(f"code length must be >= 0, got {n}")
    return math.exp(-n * secrecy_exponent(r_e, t, px, rho_steps))


def required_length(
    delta_target: float,
    r_e: float,
    t: TransitionTable,
    px: InputDist,
    rho_steps: int = 1000,
) -> int:
    """Smallest code length whose leakage bound meets ``delta_target``.

    Raises :class:`InfeasibleRateError` when the exponent is zero (the
    randomness rate does not exceed the eavesdropper's MI, so no code
    length helps).
    """
    if not 0.0 < delta_target < 1.0:
        raise ValueError(f"delta_target must lie in (0, 1), got {delta_target!r}")
    h = secrecy_exponent(r_e, t, px, rho_steps)
    if h == 0.0:
        raise InfeasibleRateError(
            f"randomness rate {r_e!r} bits/letter gives a zero secrecy exponent; "
            "the leakage target is unreachable at any length"
        )
    return math.ceil(-math.log(delta_target) / h)


def rate_split_curve(
    total_rate: float,
    t: TransitionTable,
    px: InputDist,
    r_b_grid,
    n_grid,
    rho_steps: int = 1000,
) -> np.ndarray:
    """Leakage bounds over a (message rate, code length) grid.

    The rate budget is fixed: each message rate R_B in the grid leaves
    ``total_rate - R_B`` bits/letter of dummy randomness.  Returns a
    matrix of bounds with shape (len(r_b_grid), len(n_grid)).
    """
    if not total_rate > 0:
        raise ValueError(f"total_rate must be > 0, got {total_rate!r}")
    r_b = np.asarray(list(r_b_grid), dtype=np.float64)
    n = np.asarray(list(n_grid), dtype=np.float64)
    if r_b.size == 0 or n.size == 0:
        raise ValueError("rate and length grids must be nonempty")
    if (r_b > total_rate).any():
        bad = float(r_b[r_b > total_rate][0])
        raise ValueError(f"message rate {bad!r} exceeds the total rate budget {total_rate!r}")
    rho, vals = _cumulant_grid(t, px, rho_steps)
    h = np.array([_exponent_from_grid(rho, vals, total_rate - r) for r in r_b])
    return np.exp(-np.outer(h, n))


def repetition_curve(
    t_o: float,
    r_b: float,
    t: TransitionTable,
    px: InputDist,
    rep_grid,
    total_rate: float,
    rho_steps: int = 1000,
) -> list[tuple[float, int, float]]:
    """Leakage bounds as the symbol repetition rate varies.

    For a fixed observation time the code length is ``round(rep * t_o)``.
    The randomness rate follows the same fixed-budget convention as
    :func:`rate_split_curve`.  Returns (rep rate, n, bound) triples.
    """
    if not t_o > 0:
        raise ValueError(f"observation time must be > 0, got {t_o!r}")
    r_e = total_rate - r_b
    if r_e < 0:
        raise ValueError(f"message rate {r_b!r} exceeds the total rate budget {total_rate!r}")
    h = secrecy_exponent(r_e, t, px, rho_steps)
    out = []
    for rep in rep_grid:
        n = int(round(rep * t_o))
        out.append((float(rep), n, math.exp(-n * h)))
    return out
