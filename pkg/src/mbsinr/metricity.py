"""Metricity of a gain matrix.

For a reachable pair ``(x, y)`` the metricity is the smallest exponent ``z``
such that ``f(x,y)**(1/z) <= f(x,w)**(1/z) + f(w,y)**(1/z)`` for every witness
node ``w``, where ``f = 1/g`` is the decay. With ``f = d**alpha`` over a metric
``d`` the answer never exceeds ``alpha``; for any matrix it never exceeds
``log2(f_max / f_min)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gains import GainMatrix

__all__ = [
    "DEFAULT_FLOOR",
    "MetricityReport",
    "UndefinedPairError",
    "zeta_triple",
    "zeta_pair",
    "zeta_matrix",
    "zeta_report",
    "zeta_subset",
    "zeta_cdf",
]

DEFAULT_FLOOR = 1.0
REL_TOL = 1e-9
MAX_ITER = 200
_LN2 = math.log(2.0)


class UndefinedPairError(ValueError):
    pass


def _solve(a: np.ndarray, b: np.ndarray, floor: float) -> np.ndarray:
    """Smallest ``z >= floor`` with ``exp(a/z) + exp(b/z) >= 1``.

    ``a = ln(f_xw / f_xy)`` and ``b = ln(f_wy / f_xy)``; NaN marks a vacuous
    constraint. Only entries with both logs negative can bind: there
    ``h(z) = exp(a/z) + exp(b/z) - 1`` is strictly increasing, so bisection on
    ``[floor, hi]`` with ``hi = max(2*floor, -min(a, b)/ln 2)`` (where
    ``h(hi) >= 0``) brackets the unique root. The upper end of the final
    bracket is returned, so the inequality holds at the returned value.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.full(np.broadcast(a, b).shape, float(floor))
    with np.errstate(invalid="ignore"):
        bind = (a < 0) & (b < 0)
    if not np.any(bind):
        return out
    a, b = np.broadcast_to(a, out.shape)[bind], np.broadcast_to(b, out.shape)[bind]

    def h(z):
        return np.exp(a / z) + np.exp(b / z) - 1.0

    lo = np.full(a.shape, float(floor))
    hi = np.maximum(2.0 * floor, -np.minimum(a, b) / _LN2)
    settled = h(lo) >= 0
    hi = np.where(settled, lo, hi)
    for _ in range(MAX_ITER):
        active = (hi - lo) > REL_TOL * hi
        if not np.any(active):
            break
        mid = 0.5 * (lo + hi)
        up = h(mid) >= 0
        hi = np.where(active & up, mid, hi)
        lo = np.where(active & ~up, mid, lo)
    out[bind] = hi
    return out


def _log_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # ln(f_num / f_den) = ln(g_den / g_num); NaN when either side is unreachable
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.log(den / num)


def zeta_triple(x: int, y: int, z: int, gains: GainMatrix, floor: float = DEFAULT_FLOOR) -> float:
    """Minimal exponent satisfying the relaxed triangle inequality for one witness."""
    if not gains.is_reachable(x, y) or x == y:
        raise UndefinedPairError(f"pair ({x}, {y}) is unreachable")
    if z in (x, y):
        raise ValueError("witness must differ from both endpoints")
    g = gains.g
    a = _log_ratio(g[x, z], g[x, y])
    b = _log_ratio(g[z, y], g[x, y])
    return float(_solve(a, b, floor))


def zeta_matrix(gains: GainMatrix, floor: float = DEFAULT_FLOOR) -> np.ndarray:
    """Per-pair metricity for the whole matrix; NaN where the pair is undefined."""
    g = gains.g
    n = gains.n
    out = np.full((n, n), np.nan)
    if n == 0:
        return out
    idx = np.arange(n)
    for x in range(n):
        # a[y, w] = ln(f(x,w)/f(x,y)), b[y, w] = ln(f(w,y)/f(x,y))
        gxy = g[x, :, None]
        a = _log_ratio(np.broadcast_to(g[x, None, :], (n, n)), gxy)
        b = _log_ratio(g.T, gxy)
        # witnesses must differ from x and y
        a[:, x] = np.nan
        a[idx, idx] = np.nan
        z = _solve(a, b, floor).max(axis=1)
        row = np.where(np.isnan(g[x]), np.nan, z)
        row[x] = np.nan
        out[x] = row
    return out


def zeta_pair(x: int, y: int, gains: GainMatrix, floor: float = DEFAULT_FLOOR) -> float:
    """Metricity of ``(x, y)``: the max over all witnesses (floor when there are none)."""
    if x == y or not gains.is_reachable(x, y):
        raise UndefinedPairError(f"pair ({x}, {y}) is unreachable")
    witnesses = [w for w in range(gains.n) if w not in (x, y)]
    if not witnesses:
        return float(floor)
    g = gains.g
    a = _log_ratio(g[x, witnesses], g[x, y])
    b = _log_ratio(g[witnesses, y], g[x, y])
    return float(_solve(a, b, floor).max())


@dataclass(frozen=True)
class MetricityReport:
    zeta_pairs: dict[tuple[int, int], float]
    zeta_max: float
    zeta_p95: float
    zeta_p99: float
    zeta0: float
    floor: float
    skipped_pairs: tuple[tuple[int, int], ...] = ()
    percentiles: dict[float, float] = field(default_factory=dict)

    @property
    def n_pairs(self) -> int:
        return len(self.zeta_pairs)

    def values(self) -> np.ndarray:
        return np.array(list(self.zeta_pairs.values()))

    def summary(self) -> dict:
        return {
            "zeta_max": self.zeta_max,
            "zeta_p95": self.zeta_p95,
            "zeta_p99": self.zeta_p99,
            "zeta0": self.zeta0,
            "floor": self.floor,
            "n_pairs": self.n_pairs,
            "n_skipped": len(self.skipped_pairs),
        }


def zeta_report(
    gains: GainMatrix,
    floor: float = DEFAULT_FLOOR,
    percentiles: Sequence[float] = (95.0, 99.0),
) -> MetricityReport:
    """Metricity of every reachable directed pair plus aggregates.

    Percentiles use linear interpolation between order statistics.
    """
    if not floor > 0:
        raise ValueError("floor must be > 0")
    zm = zeta_matrix(gains, floor)
    off = ~np.eye(gains.n, dtype=bool)
    reach = gains.reachable & off
    if not np.any(reach):
        raise UndefinedPairError("gain matrix has no reachable pairs")
    pairs = {(int(i), int(j)): float(zm[i, j]) for i, j in zip(*np.nonzero(reach))}
    skipped = tuple((int(i), int(j)) for i, j in zip(*np.nonzero(~gains.reachable & off)))
    vals = np.array(list(pairs.values()))
    f = gains.decay_matrix()[reach]
    zeta0 = math.log2(float(f.max() / f.min()))
    pct = {float(q): float(np.percentile(vals, q, method="linear")) for q in (95.0, 99.0, *percentiles)}
    return MetricityReport(
        zeta_pairs=pairs,
        zeta_max=float(vals.max()),
        zeta_p95=pct[95.0],
        zeta_p99=pct[99.0],
        zeta0=zeta0,
        floor=float(floor),
        skipped_pairs=skipped,
        percentiles=pct,
    )


def zeta_subset(
    gains: GainMatrix,
    node_subset: Sequence[int],
    floor: float = DEFAULT_FLOOR,
    percentiles: Sequence[float] = (95.0, 99.0),
) -> MetricityReport:
    """Report over the induced submatrix; pair keys stay in original node indices."""
    nodes = list(dict.fromkeys(int(i) for i in node_subset))
    if len(nodes) < 2:
        raise ValueError("subset needs at least 2 nodes")
    sub = zeta_report(gains.submatrix(nodes), floor, percentiles)
    remap = lambda p: (nodes[p[0]], nodes[p[1]])  # noqa: E731
    return MetricityReport(
        zeta_pairs={remap(p): v for p, v in sub.zeta_pairs.items()},
        zeta_max=sub.zeta_max,
        zeta_p95=sub.zeta_p95,
        zeta_p99=sub.zeta_p99,
        zeta0=sub.zeta0,
        floor=sub.floor,
        skipped_pairs=tuple(remap(p) for p in sub.skipped_pairs),
        percentiles=sub.percentiles,
    )


def zeta_cdf(report: MetricityReport) -> list[tuple[float, float]]:
    """Empirical CDF points ``(zeta, cumulative_fraction)`` over distinct values."""
    vals = np.sort(report.values())
    n = vals.size
    uniq, counts = np.unique(vals, return_counts=True)
    cum = np.cumsum(counts) / n
    return [(float(u), float(c)) for u, c in zip(uniq, cum)]
