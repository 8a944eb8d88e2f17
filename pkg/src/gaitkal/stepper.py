"""Four-threshold step detection and Scarlet step length.

FSM transition table (signal = walking-direction acceleration minus its mean)::

    state    condition                  next     action
    -------  -------------------------  -------  --------------------------------
    IDLE     x > pos_low                RISE     start = sample nearest the
                                                 preceding upward zero crossing
                                                 (bounded by the previous
                                                 step's recovery)
    RISE     x > pos_high               PEAK
    RISE     x <= 0                     IDLE     rise aborted
    PEAK     x < neg_low                FALL
    FALL     x < neg_high               VALLEY
    VALLEY   x > neg_low                IDLE     step candidate (start, recovery)
    any      held > max_period          IDLE     aborted

Transitions cascade within one sample. A candidate's window runs to the
sample before the next candidate's start (so consecutive steps tile the
gait cycle), or to its own recovery sample when it is the last one or the
next start is more than ``max_period`` away. Windows whose period falls
outside ``[min_period, max_period]`` are discarded.

Centering by the mean removes a constant accelerometer bias and keeps the
detector threshold-relative: scaling the signal and all four thresholds by
one positive constant leaves every decision unchanged.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import CalibrationError, DataError

log = logging.getLogger(__name__)

MIN_PERIOD = 0.2
MAX_PERIOD = 2.0

IDLE, RISE, PEAK, FALL, VALLEY = range(5)


@dataclass(frozen=True)
class FsmThresholds:
    pos_low: float = 0.3
    pos_high: float = 1.0
    neg_low: float = -0.3
    neg_high: float = -1.0

    def __post_init__(self) -> None:
        if not 0 < self.pos_low < self.pos_high:
            raise ValueError(f"need 0 < pos_low < pos_high, got {self.pos_low}, {self.pos_high}")
        if not self.neg_high < self.neg_low <= 0:
            raise ValueError(f"need neg_high < neg_low <= 0, got {self.neg_high}, {self.neg_low}")

    def scaled(self, c: float) -> "FsmThresholds":
        return FsmThresholds(self.pos_low * c, self.pos_high * c, self.neg_low * c, self.neg_high * c)

    def as_dict(self) -> dict:
        return dict(pos_low=self.pos_low, pos_high=self.pos_high, neg_low=self.neg_low, neg_high=self.neg_high)


@dataclass(frozen=True)
class StepEvent:
    start_idx: int
    end_idx: int
    period_T: float
    a_avg: float
    a_max: float
    a_min: float

    @property
    def n_samples(self) -> int:
        return self.end_idx - self.start_idx + 1


def _next_true(mask: np.ndarray) -> np.ndarray:
    """``out[i]`` = smallest ``j >= i`` with ``mask[j]``, else ``len(mask)``."""
    n = mask.shape[0]
    pos = np.where(mask, np.arange(n), n)
    return np.minimum.accumulate(pos[::-1])[::-1]


def _prev_true(mask: np.ndarray) -> np.ndarray:
    """``out[i]`` = largest ``j <= i`` with ``mask[j]``, else ``-1``."""
    pos = np.where(mask, np.arange(mask.shape[0]), -1)
    return np.maximum.accumulate(pos)


def _candidates(x: np.ndarray, thr: FsmThresholds, max_len: int) -> list[tuple[int, int]]:
    n = x.shape[0]
    above_low = _next_true(x > thr.pos_low)
    above_high = _next_true(x > thr.pos_high)
    nonpos = _next_true(x <= 0)
    below_nlow = _next_true(x < thr.neg_low)
    below_nhigh = _next_true(x < thr.neg_high)
    recover = _next_true(x > thr.neg_low)
    # settled: at or below zero, allowing rounding-level residue of the centring
    last_nonpos = _prev_true(x <= 1e-6 * thr.pos_low)

    out: list[tuple[int, int]] = []
    floor = 0
    i = 0
    while i < n:
        j = int(above_low[i])
        if j >= n:
            break
        z = int(last_nonpos[j])
        # sample nearest the upward zero crossing, unless it is a flat rest
        start = z + 1
        if z >= 1 and x[z - 1] < x[z] and abs(x[z]) < abs(x[z + 1]):
            start = z
        start = max(start, floor)
        deadline = start + max_len

        # RISE: first of (x > pos_high) or (x <= 0) from j on
        k_hi, k_abort = int(above_high[j]), int(nonpos[j])
        if k_abort < k_hi:
            i = k_abort
            continue
        if k_hi >= n:
            break
        if k_hi > deadline:
            i = floor = deadline
            continue
        k = int(below_nlow[k_hi])       # PEAK -> FALL
        if k < n:
            k = int(below_nhigh[k])     # FALL -> VALLEY
        if k < n:
            k = int(recover[k])         # VALLEY -> IDLE
        if k >= n:
            break                       # incomplete trailing step
        if k > deadline:
            i = floor = deadline
            continue
        out.append((start, k))
        floor = k
        i = k
    return out


def detect_steps(
    acc_walk,
    t,
    thr: FsmThresholds,
    min_period: float = MIN_PERIOD,
    max_period: float = MAX_PERIOD,
) -> list[StepEvent]:
    """Steps in the walking-direction acceleration, in time order."""
    a = np.asarray(acc_walk, dtype=float)
    t = np.asarray(t, dtype=float)
    if not isinstance(thr, FsmThresholds):
        raise TypeError("thr must be FsmThresholds")
    if a.ndim != 1 or a.shape != t.shape:
        raise ValueError("acc_walk and t must be 1-D of equal length")
    if a.shape[0] < 2:
        raise ValueError("need at least 2 samples")
    if not np.all(np.isfinite(a)):
        raise DataError("non-finite acceleration sample")

    x = a - a.mean()
    dt = float(np.median(np.diff(t)))
    max_len = int(np.ceil(max_period / dt))
    cands = [
        (s, r) for s, r in _candidates(x, thr, max_len) if t[r] - t[s] >= min_period
    ]

    spans = []
    for k, (s, r) in enumerate(cands):
        e = r
        if k + 1 < len(cands):
            nxt = cands[k + 1][0]
            if t[nxt] - t[s] <= max_period:
                e = nxt - 1
        if min_period <= t[e] - t[s] <= max_period:
            spans.append((s, e))
    if not spans:
        return []
    # inclusive window statistics in one pass; windows are disjoint and ordered
    bounds = (np.array(spans) + (0, 1)).ravel()
    padded = np.append(a, 0.0)
    sums = np.add.reduceat(padded, bounds)[::2]
    maxs = np.maximum.reduceat(padded, bounds)[::2]
    mins = np.minimum.reduceat(padded, bounds)[::2]
    return [
        StepEvent(s, e, float(t[e] - t[s]), float(sums[k] / (e - s + 1)), float(maxs[k]), float(mins[k]))
        for k, (s, e) in enumerate(spans)
    ]


def scarlet_step_length(step: StepEvent, K: float) -> float:
    """``K * (a_avg - a_min) / (a_max - a_min)``."""
    span = step.a_max - step.a_min
    if not span > 0:
        raise DataError(f"degenerate step window [{step.start_idx}, {step.end_idx}]: a_max == a_min")
    return K * (step.a_avg - step.a_min) / span


def scarlet_ratio(step: StepEvent) -> float:
    return scarlet_step_length(step, 1.0)


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

MATCH_TOLERANCE = 0.15  # s between detected start and true step start


def match_steps(steps, true_starts, t, tol: float = MATCH_TOLERANCE) -> tuple[int, int]:
    """Greedy one-to-one matching of detected to true step starts.

    Returns ``(true_positives, false_positives)``.
    """
    t = np.asarray(t, dtype=float)
    truth_t = np.sort(t[np.asarray(true_starts, dtype=int)])
    used = np.zeros(truth_t.shape[0], dtype=bool)
    tp = 0
    for st in steps:
        ts = t[st.start_idx]
        j = int(np.searchsorted(truth_t, ts))
        best = None
        for c in (j - 1, j):
            if 0 <= c < truth_t.shape[0] and not used[c] and abs(truth_t[c] - ts) <= tol:
                if best is None or abs(truth_t[c] - ts) < abs(truth_t[best] - ts):
                    best = c
        if best is not None:
            used[best] = True
            tp += 1
    return tp, len(steps) - tp


_COARSE_LOW = np.array([0.1, 0.2, 0.35, 0.5, 0.75])
_COARSE_HIGH = np.array([0.75, 1.0, 1.5, 2.0, 2.75])


def _grid_search(a, t, true_starts, axes) -> tuple[np.ndarray, int]:
    """All grid points with the best (TP - FP) score, plus that score."""
    best, winners = None, []
    for pl in axes[0]:
        for ph in axes[1]:
            if not 0 < pl < ph:
                continue
            for nl in axes[2]:
                for nh in axes[3]:
                    if not nh < nl < 0:
                        continue
                    thr = FsmThresholds(pl, ph, nl, nh)
                    tp, fp = match_steps(detect_steps(a, t, thr), true_starts, t)
                    score = tp - fp
                    if best is None or score > best:
                        best, winners = score, [(pl, ph, nl, nh)]
                    elif score == best:
                        winners.append((pl, ph, nl, nh))
    return np.array(winners), best


def _pick(winners: np.ndarray) -> np.ndarray:
    # pos_low leans low (it gates step start); the rest take the median
    pick = np.median(winners, axis=0)
    pick[0] = np.quantile(winners[:, 0], 0.25)
    return pick


def calibrate_walk_thresholds(a, t, true_starts) -> FsmThresholds:
    """Coarse-to-fine grid search on one walk."""
    a = np.asarray(a, dtype=float)
    s = float(np.std(a))
    if not s > 0:
        raise CalibrationError("flat acceleration signal")
    coarse = [s * _COARSE_LOW, s * _COARSE_HIGH, -s * _COARSE_LOW, -s * _COARSE_HIGH]
    winners, _ = _grid_search(a, t, true_starts, coarse)
    centre = _pick(winners)
    steps = [0.1 * s, 0.25 * s, 0.1 * s, 0.25 * s]
    fine = [c + d * np.array([-1.0, -0.5, 0.0, 0.5, 1.0]) for c, d in zip(centre, steps)]
    fine[0] = fine[0][fine[0] > 0]
    fine[2] = fine[2][fine[2] < 0]
    winners, score = _grid_search(a, t, true_starts, fine)
    pl, ph, nl, nh = _pick(winners)
    # medians of a winner set can break ordering only in degenerate sets
    if not (0 < pl < ph and nh < nl < 0):
        pl, ph, nl, nh = winners[0]
    log.debug("walk thresholds %s score %s", (pl, ph, nl, nh), score)
    return FsmThresholds(float(pl), float(ph), float(nl), float(nh))


def calibrate_thresholds(walks) -> FsmThresholds:
    """Per-walk best thresholds, averaged across walks."""
    from .orientation import transform_stream

    walks = list(walks)
    if not walks:
        raise ValueError("empty calibration set")
    per_walk = []
    for rec in walks:
        if rec.truth is None or rec.truth.n_steps == 0:
            raise ValueError(f"walk {rec.label!r} lacks ground-truth steps")
        nav = transform_stream(rec.stream)
        thr = calibrate_walk_thresholds(nav.forward, nav.t, rec.truth.true_step_boundaries)
        per_walk.append([thr.pos_low, thr.pos_high, thr.neg_low, thr.neg_high])
    m = np.mean(per_walk, axis=0)
    return FsmThresholds(*map(float, m))


def calibrate_scarlet_k(walks, thr: FsmThresholds) -> float:
    """Average of per-walk ``declared_distance / sum(step ratios)``."""
    from .orientation import transform_stream

    ks = []
    for rec in walks:
        if rec.declared_distance is None:
            raise ValueError(f"walk {rec.label!r} has no declared distance")
        nav = transform_stream(rec.stream)
        steps = detect_steps(nav.forward, nav.t, thr)
        total = sum(scarlet_ratio(s) for s in steps)
        if not steps or total <= 0:
            log.warning("walk %s: no usable steps, excluded from Scarlet K", rec.label)
            continue
        ks.append(rec.declared_distance / total)
    if not ks:
        raise CalibrationError("all calibration walks were excluded")
    return float(np.mean(ks))
