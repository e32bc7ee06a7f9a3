"""Gain matrices: construction from RSS measurements and synthetic path-loss models.

A gain matrix holds linear power ratios ``g[i, j]`` for a signal sent by node
``i`` and received at node ``j``. Pairs that were never heard (below the noise
floor) are *unreachable*; they are stored as NaN in the backing array and
surfaced as ``None`` by the scalar accessor, never as a zero or -inf gain.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np
from scipy import stats

__all__ = [
    "UNREACHABLE",
    "GainMatrix",
    "NodeLayout",
    "PathLossFit",
    "GainFormatError",
    "InsufficientDataError",
    "gain_from_rss_dbm",
    "rss_dbm_from_gain",
    "load_rss_matrix",
    "write_rss_matrix",
    "load_layout",
    "write_layout",
    "geometric_gain",
    "lognormal_gain",
    "median_rss_matrix",
    "fit_path_loss",
]

UNREACHABLE = None


class GainFormatError(ValueError):
    """Malformed gain/layout file; the message names the offending location."""


class InsufficientDataError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GainMatrix:
    """Directed linear gains between ``n`` nodes.

    ``g[i, j]`` is the fraction of the power sent by node ``i`` that arrives at
    node ``j``. NaN entries are unreachable. The decay function is
    ``f(i, j) = 1 / g[i, j]`` (infinite for unreachable pairs).
    """

    g: np.ndarray
    channel_id: str | None = None
    node_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError(f"gain matrix must be square, got shape {g.shape}")
        reach = ~np.isnan(g)
        if np.any(g[reach] <= 0) or np.any(np.isinf(g[reach])):
            raise ValueError("reachable gains must be finite and > 0")
        object.__setattr__(self, "g", _frozen(g))
        ids = self.node_ids
        if ids is None:
            ids = tuple(str(i) for i in range(g.shape[0]))
        elif len(ids) != g.shape[0]:
            raise ValueError("node_ids length does not match matrix size")
        object.__setattr__(self, "node_ids", tuple(str(i) for i in ids))

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def reachable(self) -> np.ndarray:
        return ~np.isnan(self.g)

    def gain(self, i: int, j: int) -> float | None:
        """Scalar gain, or ``UNREACHABLE`` (None)."""
        v = self.g[i, j]
        return UNREACHABLE if math.isnan(v) else float(v)

    def is_reachable(self, i: int, j: int) -> bool:
        return not math.isnan(self.g[i, j])

    def decay(self, i: int, j: int) -> float:
        v = self.g[i, j]
        return math.inf if math.isnan(v) else 1.0 / float(v)

    def decay_matrix(self) -> np.ndarray:
        """``f = 1/g`` with ``inf`` for unreachable pairs."""
        with np.errstate(divide="ignore"):
            f = 1.0 / self.g
        f[np.isnan(f)] = np.inf
        return f

    def gains_or_zero(self) -> np.ndarray:
        """Gains with unreachable pairs contributing no power (interference use)."""
        return np.nan_to_num(self.g, nan=0.0)

    def index_of(self, node_id) -> int:
        try:
            return self.node_ids.index(str(node_id))
        except ValueError:
            raise KeyError(f"unknown node id {node_id!r}") from None

    def transpose(self) -> "GainMatrix":
        return GainMatrix(self.g.T, channel_id=self.channel_id, node_ids=self.node_ids)

    def submatrix(self, nodes: Sequence[int]) -> "GainMatrix":
        idx = np.asarray(nodes, dtype=int)
        return GainMatrix(
            self.g[np.ix_(idx, idx)],
            channel_id=self.channel_id,
            node_ids=tuple(self.node_ids[i] for i in idx),
        )

    def scaled(self, c: float) -> "GainMatrix":
        return GainMatrix(self.g * c, channel_id=self.channel_id, node_ids=self.node_ids)

    def equals(self, other: "GainMatrix") -> bool:
        return (
            self.g.shape == other.g.shape
            and np.array_equal(self.g, other.g, equal_nan=True)
            and self.node_ids == other.node_ids
        )


@dataclass(frozen=True, eq=False)
class NodeLayout:
    """Node coordinates in meters, one row per node (2D or 3D)."""

    positions: np.ndarray
    node_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        p = np.asarray(self.positions, dtype=float)
        if p.ndim != 2 or p.shape[1] not in (2, 3):
            raise ValueError("positions must be an (n, 2) or (n, 3) array")
        object.__setattr__(self, "positions", _frozen(p))
        ids = self.node_ids
        if ids is None:
            ids = tuple(str(i) for i in range(p.shape[0]))
        object.__setattr__(self, "node_ids", tuple(str(i) for i in ids))

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt(np.sum(diff**2, axis=-1))


@dataclass(frozen=True)
class PathLossFit:
    alpha: float
    stderr: float
    n_points: int
    intercept_db: float = field(default=0.0)


def gain_from_rss_dbm(rss_dbm: float, tx_power_dbm: float) -> float:
    return 10.0 ** ((rss_dbm - tx_power_dbm) / 10.0)


def rss_dbm_from_gain(gain: float, tx_power_dbm: float) -> float:
    return 10.0 * math.log10(gain) + tx_power_dbm


# --- file formats -----------------------------------------------------------

_NAN_TOKENS = {"", "nan", "NaN", "NAN"}


def load_rss_matrix(
    source: TextIO | str, tx_power_dbm: float | None = None, channel_id: str | None = None
) -> GainMatrix:
    """Read an RSS matrix CSV (dBm cells) into linear gains.

    An optional first line ``# tx_power_dbm=<float>`` supplies the transmit
    power; an explicit ``tx_power_dbm`` argument overrides it. Without either,
    0 dBm is assumed.
    """
    text = source if isinstance(source, str) else source.read()
    lines = text.splitlines()
    header_tx = None
    start = 0
    while start < len(lines) and lines[start].lstrip().startswith("#"):
        comment = lines[start].lstrip()[1:].strip()
        if comment.startswith("tx_power_dbm="):
            try:
                header_tx = float(comment.split("=", 1)[1])
            except ValueError:
                raise GainFormatError(f"line {start + 1}: bad tx_power_dbm value") from None
        start += 1
    tx = tx_power_dbm if tx_power_dbm is not None else (header_tx if header_tx is not None else 0.0)

    rows = [r for r in csv.reader(lines[start:]) if r]
    if not rows:
        raise GainFormatError("empty RSS matrix")
    header = [c.strip() for c in rows[0]]
    if header[0] != "node":
        raise GainFormatError(f"line {start + 1}: header must start with 'node'")
    ids = header[1:]
    n = len(ids)
    body = rows[1:]
    if len(body) != n:
        raise GainFormatError(f"dimension mismatch: {n} columns but {len(body)} rows")
    g = np.full((n, n), np.nan)
    for i, row in enumerate(body):
        lineno = start + 2 + i
        if len(row) != n + 1:
            raise GainFormatError(
                f"dimension mismatch at line {lineno}: expected {n + 1} cells, got {len(row)}"
            )
        if row[0].strip() != ids[i]:
            raise GainFormatError(
                f"line {lineno}: row id {row[0].strip()!r} does not match header id {ids[i]!r}"
            )
        for j, cell in enumerate(row[1:]):
            cell = cell.strip()
            if cell in _NAN_TOKENS:
                continue
            try:
                rss = float(cell)
            except ValueError:
                raise GainFormatError(
                    f"line {lineno}, column {j + 2}: cannot parse {cell!r} as dBm"
                ) from None
            if not math.isfinite(rss):
                raise GainFormatError(f"line {lineno}, column {j + 2}: non-finite RSS {cell!r}")
            g[i, j] = gain_from_rss_dbm(rss, tx)
    return GainMatrix(g, channel_id=channel_id, node_ids=tuple(ids))


def write_rss_matrix(gains: GainMatrix, out: TextIO, tx_power_dbm: float = 0.0) -> None:
    out.write(f"# tx_power_dbm={tx_power_dbm!r}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["node", *gains.node_ids])
    for i, nid in enumerate(gains.node_ids):
        cells = []
        for j in range(gains.n):
            v = gains.g[i, j]
            cells.append("nan" if math.isnan(v) else repr(rss_dbm_from_gain(float(v), tx_power_dbm)))
        w.writerow([nid, *cells])


def load_layout(source: TextIO | str) -> NodeLayout:
    """Layout CSV: ``id,x,y[,z]`` in meters."""
    text = source if isinstance(source, str) else source.read()
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise GainFormatError("empty layout")
    header = [c.strip() for c in rows[0]]
    if header[:3] != ["id", "x", "y"] or len(header) not in (3, 4):
        raise GainFormatError("layout header must be id,x,y[,z]")
    dim = len(header) - 1
    ids, pts = [], []
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != dim + 1:
            raise GainFormatError(f"layout line {k}: expected {dim + 1} cells")
        try:
            pts.append([float(c) for c in row[1:]])
        except ValueError:
            raise GainFormatError(f"layout line {k}: bad coordinate") from None
        ids.append(row[0].strip())
    return NodeLayout(np.array(pts), node_ids=tuple(ids))


def write_layout(layout: NodeLayout, out: TextIO) -> None:
    w = csv.writer(out, lineterminator="\n")
    dim = layout.positions.shape[1]
    w.writerow(["id", "x", "y", "z"][: dim + 1])
    for nid, p in zip(layout.node_ids, layout.positions):
        w.writerow([nid, *(repr(float(c)) for c in p)])


# --- synthetic generators ---------------------------------------------------


def _checked_distances(layout: NodeLayout) -> np.ndarray:
    d = layout.distances()
    off = ~np.eye(layout.n, dtype=bool)
    if np.any(d[off] <= 0):
        i, j = np.argwhere((d <= 0) & off)[0]
        raise ValueError(f"nodes {i} and {j} coincide (zero distance)")
    return d


def geometric_gain(layout: NodeLayout, alpha: float) -> GainMatrix:
    """``g[i, j] = d(i, j) ** -alpha``; diagonal unreachable."""
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    d = _checked_distances(layout)
    np.fill_diagonal(d, np.nan)
    return GainMatrix(d ** (-alpha), node_ids=layout.node_ids)


def lognormal_gain(layout: NodeLayout, alpha: float, sigma: float, seed) -> GainMatrix:
    """Geometric gains with independent log-normal shadowing per directed pair.

    Decay is ``d**alpha * exp(X)`` with ``X ~ Normal(0, sigma**2)``, so the gain
    is ``d**-alpha * exp(-X)``. ``sigma=0`` reproduces :func:`geometric_gain`
    bit for bit.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    base = geometric_gain(layout, alpha).g
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(base.shape)
    return GainMatrix(base * np.exp(-sigma * x), node_ids=layout.node_ids)


def median_rss_matrix(matrices: Sequence[GainMatrix]) -> GainMatrix:
    """Per-pair median over channels, taken in dB.

    A pair is unreachable in the result iff it is unreachable on more than half
    of the channels. An even number of reachable values is resolved by the mean
    of the two middle dB values.
    """
    if not matrices:
        raise ValueError("need at least one matrix")
    n = matrices[0].n
    for m in matrices:
        if m.n != n:
            raise ValueError(f"dimension mismatch: {m.n} vs {n}")
    if len(matrices) == 1:
        return GainMatrix(matrices[0].g, node_ids=matrices[0].node_ids, channel_id="median")
    db = np.stack([10.0 * np.log10(m.g) for m in matrices])
    n_unreach = np.sum(np.isnan(db), axis=0)
    keep = n_unreach * 2 <= len(matrices)
    med = np.full((n, n), np.nan)
    # np.median over a sorted, NaN-free column; NaNs sort last so slice them off
    db_sorted = np.sort(db, axis=0)
    for i, j in zip(*np.nonzero(keep)):
        col = db_sorted[: len(matrices) - n_unreach[i, j], i, j]
        med[i, j] = np.median(col)
    return GainMatrix(10.0 ** (med / 10.0), node_ids=matrices[0].node_ids, channel_id="median")


def fit_path_loss(layout: NodeLayout, gains: GainMatrix) -> PathLossFit:
    """Least-squares path-loss exponent from reachable off-diagonal pairs.

    Regresses ``10*log10(g)`` on ``-10*log10(d)``; the slope is alpha.
    """
    if layout.n != gains.n:
        raise ValueError("layout and gain matrix sizes differ")
    d = layout.distances()
    mask = gains.reachable & (d > 0)
    x = -10.0 * np.log10(d[mask])
    y = 10.0 * np.log10(gains.g[mask])
    if x.size < 2:
        raise InsufficientDataError(f"need >= 2 usable pairs, got {x.size}")
    if np.ptp(x) <= 1e-9 * max(1.0, float(np.max(np.abs(x)))):
        raise InsufficientDataError("all pair distances are equal; slope undefined")
    res = stats.linregress(x, y)
    return PathLossFit(
        alpha=float(res.slope),
        stderr=float(res.stderr),
        n_points=int(x.size),
        intercept_db=float(res.intercept),
    )
