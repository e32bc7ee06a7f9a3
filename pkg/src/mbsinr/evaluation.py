"""The SINR model as a binary classifier of packet reception.

A trial is predicted successful when its SINR reaches ``beta``. It is
observed successful when its PRR is at least ``t_high`` and failed when the
PRR is at most ``t_low``; trials in between are excluded from the rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .core import Environment, Link, dbm_to_mw, mw_to_dbm, sinr
from .gains import GainMatrix

__all__ = [
    "Outcome",
    "Trial",
    "RocPoint",
    "DEFAULT_T_HIGH",
    "DEFAULT_T_LOW",
    "default_beta_grid",
    "trial_sinr",
    "classify_trial",
    "classify",
    "roc_sweep",
    "best_beta",
    "predicted_combined_rss",
    "combine_dbm",
]

DEFAULT_T_HIGH = 0.8
DEFAULT_T_LOW = 0.2


class Outcome(str, Enum):
    TP = "TP"
    FP = "FP"
    TN = "TN"
    FN = "FN"
    EXCLUDED = "EXCLUDED"


@dataclass(frozen=True)
class Trial:
    link: Link
    interferers: tuple[Link, ...]
    prr: float
    channel: int = 0

    def __post_init__(self):
        object.__setattr__(self, "interferers", tuple(self.interferers))
        if not 0.0 <= self.prr <= 1.0:
            raise ValueError(f"prr must be in [0, 1], got {self.prr}")
        if any(l.id == self.link.id for l in self.interferers):
            raise ValueError("the measured link cannot be one of its interferers")


@dataclass(frozen=True)
class RocPoint:
    beta: float
    tpr: float
    fpr: float
    tp: int
    fp: int
    tn: int
    fn: int
    excluded: int


def default_beta_grid() -> np.ndarray:
    return np.logspace(-2, 4, 200)


def _pick(gains: GainMatrix | Sequence[GainMatrix], channel: int) -> GainMatrix:
    if isinstance(gains, GainMatrix):
        return gains
    return gains[channel]


def trial_sinr(trial: Trial, gains, env: Environment) -> float:
    g = _pick(gains, trial.channel)
    return sinr([trial.link, *trial.interferers], trial.link, g, env)


def classify(value: float, prr: float, beta: float, t_high: float, t_low: float) -> Outcome:
    """Quadrant for an already computed SINR."""
    if not t_low <= t_high:
        raise ValueError("t_low must not exceed t_high")
    if prr >= t_high:
        observed = True
    elif prr <= t_low:
        observed = False
    else:
        return Outcome.EXCLUDED
    predicted = value >= beta
    if predicted:
        return Outcome.TP if observed else Outcome.FP
    return Outcome.FN if observed else Outcome.TN


def classify_trial(
    trial: Trial,
    gains,
    env: Environment,
    beta: float,
    t_high: float = DEFAULT_T_HIGH,
    t_low: float = DEFAULT_T_LOW,
) -> Outcome:
    return classify(trial_sinr(trial, gains, env), trial.prr, beta, t_high, t_low)


def _rate(num: int, den: int) -> float:
    return num / den if den else math.nan


def roc_sweep(
    trials: Sequence[Trial],
    gains,
    env: Environment,
    beta_grid: Iterable[float] | None = None,
    t_high: float = DEFAULT_T_HIGH,
    t_low: float = DEFAULT_T_LOW,
) -> list[RocPoint]:
    """One ROC point per threshold. Rates with an empty denominator are NaN."""
    if not trials:
        raise ValueError("no trials")
    grid = default_beta_grid() if beta_grid is None else np.asarray(list(beta_grid), dtype=float)
    if grid.size == 0:
        raise ValueError("empty beta grid")
    if not t_low <= t_high:
        raise ValueError("t_low must not exceed t_high")
    values = np.array([trial_sinr(t, gains, env) for t in trials])
    prr = np.array([t.prr for t in trials])
    pos = prr >= t_high
    neg = ~pos & (prr <= t_low)
    excluded = int(np.sum(~pos & ~neg))
    points = []
    for beta in grid:
        predicted = values >= beta
        tp = int(np.sum(predicted & pos))
        fp = int(np.sum(predicted & neg))
        fn = int(np.sum(~predicted & pos))
        tn = int(np.sum(~predicted & neg))
        points.append(
            RocPoint(float(beta), _rate(tp, tp + fn), _rate(fp, fp + tn), tp, fp, tn, fn, excluded)
        )
    return points


def best_beta(points: Sequence[RocPoint]) -> float:
    """Threshold maximising ``tpr - fpr`` (Youden's J); ties go to the smaller beta."""
    best = None
    for p in sorted(points, key=lambda p: p.beta):
        if math.isnan(p.tpr) or math.isnan(p.fpr):
            continue
        j = p.tpr - p.fpr
        if best is None or j > best[0]:
            best = (j, p.beta)
    if best is None:
        raise ValueError("no ROC point has defined rates")
    return best[1]


def predicted_combined_rss(
    senders: Iterable[Link], receiver: int, gains: GainMatrix, env: Environment | None = None
) -> float:
    """Received power in dBm when all ``senders`` transmit at once.

    Powers add in milliwatts. Returns NaN when no sender reaches the receiver.
    """
    total = 0.0
    heard = False
    for l in senders:
        g = gains.gain(l.sender, receiver)
        if g is None:
            continue
        heard = True
        total += l.power_mw * g
    if not heard:
        return math.nan
    return mw_to_dbm(total)


def combine_dbm(values_dbm: Iterable[float]) -> float:
    """Sum of received powers given in dBm, returned in dBm."""
    return mw_to_dbm(sum(dbm_to_mw(v) for v in values_dbm))
