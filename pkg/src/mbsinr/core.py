"""SINR reception, affectance and the feasibility notions built on it.

Powers are linear milliwatts, gains are linear ratios (see :mod:`mbsinr.gains`).
Interference from a sender whose gain to a receiver is unreachable counts as
zero. Links are identified by ``id``; set membership is by id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .gains import GainMatrix

__all__ = [
    "Environment",
    "Link",
    "PowerAssignment",
    "NoiseInfeasibleError",
    "sinr",
    "is_feasible_sinr",
    "noise_factor",
    "affectance",
    "affectance_on",
    "affectance_of",
    "affectance_matrix",
    "is_k_feasible",
    "is_k_anti_feasible",
    "is_k_bi_feasible",
    "link_order",
    "w_plus",
    "w_plus_set",
    "is_monotone_power",
    "dual_links",
    "dbm_to_mw",
    "mw_to_dbm",
]


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    if mw <= 0:
        return -math.inf
    return 10.0 * math.log10(mw)


class NoiseInfeasibleError(ValueError):
    """A link whose received signal cannot beat ``beta * noise`` even alone."""

    def __init__(self, link: "Link", signal_mw: float, floor_mw: float):
        self.link = link
        super().__init__(
            f"link {link.id} ({link.sender}->{link.receiver}) is noise-infeasible: "
            f"received {signal_mw:.6g} mW <= beta*N = {floor_mw:.6g} mW"
        )


@dataclass(frozen=True)
class Environment:
    """Constants of the reception rule: noise ``N`` (mW), threshold ``beta``."""

    noise_mw: float
    beta: float
    tx_power_dbm: float = 0.0

    def __post_init__(self):
        if not self.noise_mw >= 0:
            raise ValueError("noise_mw must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")

    @classmethod
    def from_dbm(cls, noise_dbm: float, beta: float, tx_power_dbm: float = 0.0) -> "Environment":
        noise = 0.0 if noise_dbm == -math.inf else dbm_to_mw(noise_dbm)
        return cls(noise_mw=noise, beta=beta, tx_power_dbm=tx_power_dbm)

    @property
    def noise_dbm(self) -> float:
        return mw_to_dbm(self.noise_mw)

    @property
    def tx_power_mw(self) -> float:
        return dbm_to_mw(self.tx_power_dbm)


@dataclass(frozen=True)
class Link:
    id: int
    sender: int
    receiver: int
    power_mw: float = 1.0

    def __post_init__(self):
        if self.sender == self.receiver:
            raise ValueError(f"link {self.id}: sender equals receiver")
        if not self.power_mw > 0:
            raise ValueError(f"link {self.id}: power must be > 0")


@dataclass(frozen=True)
class PowerAssignment:
    """How transmit powers are chosen.

    ``uniform``: every link sends at ``level`` mW.
    ``linear``: ``P_v = level * f_v``, i.e. every link is received at ``level`` mW.
    ``explicit``: ``values`` maps link id to mW.
    """

    kind: str
    level: float = 1.0
    values: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "linear", "explicit"):
            raise ValueError(f"unknown power kind {self.kind!r}")
        if self.kind != "explicit" and not self.level > 0:
            raise ValueError("power level must be > 0")

    def apply(self, links: Iterable[Link], gains: GainMatrix) -> list[Link]:
        out = []
        table = dict(self.values)
        for l in links:
            if self.kind == "uniform":
                p = self.level
            elif self.kind == "linear":
                p = self.level * gains.decay(l.sender, l.receiver)
            else:
                p = table[l.id]
            out.append(replace(l, power_mw=p))
        return out


def _own_gain(link: Link, gains: GainMatrix) -> float:
    g = gains.gain(link.sender, link.receiver)
    if g is None:
        raise ValueError(f"link {link.id} ({link.sender}->{link.receiver}) is unreachable")
    return g


def _cross_gain(sender: int, receiver: int, gains: GainMatrix) -> float:
    g = gains.gain(sender, receiver)
    return 0.0 if g is None else g


def sinr(links: Sequence[Link], target: Link, gains: GainMatrix, env: Environment) -> float:
    """SINR of ``target`` while every link in ``links`` transmits.

    Returns ``math.inf`` when there is neither noise nor interference.
    """
    if not any(l.id == target.id for l in links):
        raise ValueError(f"target link {target.id} is not in the transmitting set")
    signal = target.power_mw * _own_gain(target, gains)
    interference = sum(
        l.power_mw * _cross_gain(l.sender, target.receiver, gains)
        for l in links
        if l.id != target.id
    )
    denom = env.noise_mw + interference
    if denom == 0:
        return math.inf
    return signal / denom


def is_feasible_sinr(links: Sequence[Link], gains: GainMatrix, env: Environment) -> bool:
    return all(sinr(links, v, gains, env) >= env.beta for v in links)


def noise_factor(v: Link, gains: GainMatrix, env: Environment) -> float:
    """``c_v = beta / (1 - beta*N / (P_v G_vv))``; raises if the link has no headroom."""
    signal = v.power_mw * _own_gain(v, gains)
    floor = env.beta * env.noise_mw
    if signal <= floor:
        raise NoiseInfeasibleError(v, signal, floor)
    return env.beta / (1.0 - floor / signal)


def affectance(w: Link, v: Link, gains: GainMatrix, env: Environment) -> float:
    """Interference of ``w`` on ``v`` relative to ``v``'s signal, clamped to 1."""
    c = noise_factor(v, gains, env)
    if w.id == v.id:
        return 0.0
    gw = gains.gain(w.sender, v.receiver)
    if gw is None:
        return 0.0
    return min(1.0, c * (w.power_mw * gw) / (v.power_mw * _own_gain(v, gains)))


def affectance_on(links: Iterable[Link], v: Link, gains: GainMatrix, env: Environment) -> float:
    """In-affectance ``a_S(v)``."""
    return sum(affectance(w, v, gains, env) for w in links if w.id != v.id)


def affectance_of(v: Link, links: Iterable[Link], gains: GainMatrix, env: Environment) -> float:
    """Out-affectance ``a_v(S)``."""
    return sum(affectance(v, w, gains, env) for w in links if w.id != v.id)


def affectance_matrix(
    links: Sequence[Link], gains: GainMatrix, env: Environment, clamp: bool = True
) -> np.ndarray:
    """``A[i, j] = a_{links[i]}(links[j])`` with a zero diagonal.

    Vectorised twin of :func:`affectance`; column sums are in-affectances, row
    sums out-affectances.
    """
    n = len(links)
    if n == 0:
        return np.zeros((0, 0))
    s = np.array([l.sender for l in links])
    r = np.array([l.receiver for l in links])
    p = np.array([l.power_mw for l in links], dtype=float)
    g = gains.gains_or_zero()
    own = gains.g[s, r]
    for l, gv in zip(links, own):
        if math.isnan(gv):
            raise ValueError(f"link {l.id} ({l.sender}->{l.receiver}) is unreachable")
    signal = p * own
    floor = env.beta * env.noise_mw
    for l, sig in zip(links, signal):
        if sig <= floor:
            raise NoiseInfeasibleError(l, float(sig), floor)
    c = env.beta / (1.0 - floor / signal)
    a = c[None, :] * (p[:, None] * g[np.ix_(s, r)]) / signal[None, :]
    np.fill_diagonal(a, 0.0)
    if clamp:
        np.minimum(a, 1.0, out=a)
    return a


def _check_k(k: float) -> None:
    if not k >= 1:
        raise ValueError("K must be >= 1")


def is_k_feasible(links: Sequence[Link], k: float, gains: GainMatrix, env: Environment) -> bool:
    """Every link has in-affectance at most ``1/K``."""
    _check_k(k)
    return all(affectance_on(links, v, gains, env) <= 1.0 / k for v in links)


def is_k_anti_feasible(links: Sequence[Link], k: float, gains: GainMatrix, env: Environment) -> bool:
    """Every link has out-affectance at most ``2/K``."""
    _check_k(k)
    return all(affectance_of(v, links, gains, env) <= 2.0 / k for v in links)


def is_k_bi_feasible(links: Sequence[Link], k: float, gains: GainMatrix, env: Environment) -> bool:
    return is_k_feasible(links, k, gains, env) and is_k_anti_feasible(links, k, gains, env)


def link_order(links: Iterable[Link], gains: GainMatrix) -> list[int]:
    """Link ids by increasing own decay ``f_v``, ties by id."""
    return [
        l.id
        for l in sorted(links, key=lambda l: (gains.decay(l.sender, l.receiver), l.id))
    ]


def _rank(order: Sequence[int]) -> dict[int, int]:
    return {lid: k for k, lid in enumerate(order)}


def w_plus(v: Link, w: Link, order: Sequence[int], gains: GainMatrix, env: Environment) -> float:
    """``a_v(w) + a_w(v)`` when ``v`` precedes ``w`` in ``order``, else 0."""
    rank = _rank(order)
    if v.id not in rank or w.id not in rank:
        raise ValueError("order does not cover both links")
    if rank[v.id] >= rank[w.id]:
        return 0.0
    return affectance(v, w, gains, env) + affectance(w, v, gains, env)


def w_plus_set(
    xs: Iterable[Link], v: Link, order: Sequence[int], gains: GainMatrix, env: Environment
) -> float:
    """``W+(X, v)``: sum of ``W+(w, v)`` over ``w`` in ``X``; only links before ``v`` count."""
    return sum(w_plus(w, v, order, gains, env) for w in xs)


def is_monotone_power(links: Sequence[Link], gains: GainMatrix, rel_tol: float = 1e-12) -> bool:
    """Decay monotone (power non-decreasing along the order) and reception
    monotone (received power ``P/f`` non-increasing along the order)."""
    by_id = {l.id: l for l in links}
    seq = [by_id[i] for i in link_order(links, gains)]
    for a, b in zip(seq, seq[1:]):
        if a.power_mw > b.power_mw * (1 + rel_tol):
            return False
        ra = a.power_mw / gains.decay(a.sender, a.receiver)
        rb = b.power_mw / gains.decay(b.sender, b.receiver)
        if rb > ra * (1 + rel_tol):
            return False
    return True


def dual_links(
    links: Sequence[Link], gains: GainMatrix, transport_power: bool = False
) -> tuple[list[Link], GainMatrix]:
    """Swap every link's endpoints and transpose the gain matrix.

    The dual keeps each link's own decay, and the decay from dual sender
    ``u*`` to dual receiver ``v*`` equals the original decay from ``v``'s
    sender to ``u``'s receiver.

    With ``transport_power`` each dual link sends at a power inversely
    proportional to the original link's received power ``P_v G_vv``, scaled
    so that the weakest original link gets 1 mW.
    Under zero noise this maps every out-affectance ``a_v(w)`` on the
    original onto the in-affectance ``a_{w*}(v*)`` on the dual, term by term.
    """
    dual_gains = gains.transpose()
    if not transport_power:
        return [replace(l, sender=l.receiver, receiver=l.sender) for l in links], dual_gains
    received = {l.id: l.power_mw * _own_gain(l, gains) for l in links}
    scale = min(received.values()) if received else 1.0
    return [
        Link(l.id, l.receiver, l.sender, scale / received[l.id]) for l in links
    ], dual_gains
