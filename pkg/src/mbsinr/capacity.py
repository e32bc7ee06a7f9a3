"""Multi-channel link capacity: the greedy approximation, an exhaustive oracle,
signal strengthening, and a harness that compares the two on random instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    Environment,
    Link,
    PowerAssignment,
    affectance_matrix,
    is_feasible_sinr,
    is_monotone_power,
    link_order,
)
from .gains import GainMatrix, NodeLayout, geometric_gain, lognormal_gain
from .metricity import zeta_report

__all__ = [
    "ACCEPT_THRESHOLD",
    "FILTER_THRESHOLD",
    "STRENGTHEN_BINS_PER_K",
    "Instance",
    "Schedule",
    "NonMonotonePowerError",
    "InstanceTooLargeError",
    "greedy_multichannel",
    "brute_force_opt",
    "strengthen",
    "random_instance",
    "HarnessResult",
    "approximation_ratio_harness",
]

# Algorithm constants; fixed so the approximation guarantee keeps its shape.
ACCEPT_THRESHOLD = 0.5
FILTER_THRESHOLD = 1.0
STRENGTHEN_BINS_PER_K = 4


class NonMonotonePowerError(ValueError):
    pass


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    """Links with fixed powers, ``k`` channels and per-channel eligibility.

    ``gains`` holds either one shared matrix or one matrix per channel.
    ``eligibility[i]`` is the set of link ids allowed on channel ``i``.
    """

    links: tuple[Link, ...]
    k: int
    eligibility: tuple[frozenset[int], ...]
    gains: tuple[GainMatrix, ...]
    env: Environment

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "eligibility", tuple(frozenset(e) for e in self.eligibility))
        object.__setattr__(self, "gains", tuple(self.gains))
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(self.eligibility) != self.k:
            raise ValueError(f"need {self.k} eligibility sets, got {len(self.eligibility)}")
        if len(self.gains) not in (1, self.k):
            raise ValueError("gains must be one shared matrix or one per channel")
        ids = [l.id for l in self.links]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate link ids")
        known = set(ids)
        for i, e in enumerate(self.eligibility):
            if not e <= known:
                raise ValueError(f"channel {i}: unknown link ids {sorted(e - known)}")
            g = self.channel_gains(i)
            for l in self.links:
                if l.id in e and not g.is_reachable(l.sender, l.receiver):
                    raise ValueError(f"link {l.id} eligible on channel {i} but unreachable there")

    @property
    def n(self) -> int:
        return len(self.links)

    @property
    def primary_gains(self) -> GainMatrix:
        return self.gains[0]

    def channel_gains(self, i: int) -> GainMatrix:
        return self.gains[0] if len(self.gains) == 1 else self.gains[i]

    def usable(self, i: int) -> list[Link]:
        """Links eligible on channel ``i`` that clear the noise floor there alone."""
        g = self.channel_gains(i)
        floor = self.env.beta * self.env.noise_mw
        return [
            l
            for l in self.links
            if l.id in self.eligibility[i] and l.power_mw * g.gain(l.sender, l.receiver) > floor
        ]


@dataclass(frozen=True)
class Schedule:
    """``assignment[i]`` are the link ids sent on channel ``i``."""

    assignment: tuple[tuple[int, ...], ...]
    unscheduled: tuple[int, ...]
    candidates: tuple[tuple[int, ...], ...] = ()

    @property
    def size(self) -> int:
        return sum(len(s) for s in self.assignment)

    def channel_of(self) -> dict[int, int]:
        return {lid: i for i, s in enumerate(self.assignment) for lid in s}

    def markov_ok(self) -> bool:
        return all(2 * len(s) >= len(x) for s, x in zip(self.assignment, self.candidates))


def greedy_multichannel(instance: Instance) -> Schedule:
    """Greedy multi-channel link capacity.

    Links are taken by increasing decay on the primary matrix. Each goes to the
    first channel (by index) where it is usable and its ``W+`` weight against
    the links already placed there is at most 1/2. Afterwards each channel keeps
    only the links whose in-affectance from that channel's candidates is at
    most 1.

    Affectances on channel ``i`` use channel ``i``'s gains; the precedence
    inside ``W+`` is the global processing order, so every pair of candidates
    on a channel is charged exactly once.
    """
    links = instance.links
    if not links:
        return Schedule(tuple(() for _ in range(instance.k)), (), tuple(() for _ in range(instance.k)))
    primary = instance.primary_gains
    if not is_monotone_power(list(links), primary):
        raise NonMonotonePowerError("greedy requires a monotone power assignment")

    by_id = {l.id: l for l in links}
    order = link_order(links, primary)

    tables = []
    for i in range(instance.k):
        usable = instance.usable(i)
        pos = {l.id: j for j, l in enumerate(usable)}
        a = affectance_matrix(usable, instance.channel_gains(i), instance.env)
        tables.append((pos, a))

    xs: list[list[int]] = [[] for _ in range(instance.k)]
    for lid in order:
        for i, (pos, a) in enumerate(tables):
            if lid not in pos:
                continue
            v = pos[lid]
            placed = [pos[w] for w in xs[i]]
            weight = float(np.sum(a[placed, v]) + np.sum(a[v, placed])) if placed else 0.0
            if weight <= ACCEPT_THRESHOLD:
                xs[i].append(lid)
                break

    assignment = []
    for i, (pos, a) in enumerate(tables):
        idx = [pos[w] for w in xs[i]]
        sub = a[np.ix_(idx, idx)]
        incoming = sub.sum(axis=0)
        keep = tuple(w for w, s in zip(xs[i], incoming) if s <= FILTER_THRESHOLD)
        assert is_feasible_sinr(
            [by_id[w] for w in keep], instance.channel_gains(i), instance.env
        ), f"channel {i}: filtered set is not SINR-feasible"
        assignment.append(keep)

    chosen = {w for s in assignment for w in s}
    return Schedule(
        assignment=tuple(assignment),
        unscheduled=tuple(l.id for l in links if l.id not in chosen),
        candidates=tuple(tuple(x) for x in xs),
    )


def brute_force_opt(instance: Instance, size_cap: int = 12, k_cap: int = 4) -> int:
    """Exact optimum by depth-first search over channel-or-none per link.

    Works directly on received powers (no affectance): a partial assignment is
    pruned as soon as some channel's set violates the SINR threshold, which is
    safe because adding links only adds interference.
    """
    n, k = instance.n, instance.k
    if n > size_cap or k > k_cap:
        raise InstanceTooLargeError(f"n={n}, k={k} exceeds caps n<={size_cap}, k<={k_cap}")
    if n == 0:
        return 0
    env = instance.env
    links = instance.links
    p = np.array([l.power_mw for l in links])
    s = np.array([l.sender for l in links])
    r = np.array([l.receiver for l in links])
    # per channel: interference[u, v] at v's receiver from u's sender, and v's budget
    inter, budget, allowed = [], [], []
    for i in range(k):
        g = instance.channel_gains(i).gains_or_zero()
        m = p[:, None] * g[np.ix_(s, r)]
        np.fill_diagonal(m, 0.0)
        inter.append(m)
        signal = p * g[s, r]
        budget.append(signal / env.beta - env.noise_mw)
        allowed.append([l.id in instance.eligibility[i] and budget[i][j] >= 0 for j, l in enumerate(links)])

    members: list[list[int]] = [[] for _ in range(k)]
    load = [np.zeros(n) for _ in range(k)]
    best = 0

    def fits(i: int, v: int) -> bool:
        if load[i][v] > budget[i][v]:
            return False
        return all(load[i][u] + inter[i][v, u] <= budget[i][u] for u in members[i])

    def dfs(j: int, placed: int) -> None:
        nonlocal best
        if placed + (n - j) <= best:
            return
        if j == n:
            best = placed
            return
        for i in range(k):
            if allowed[i][j] and fits(i, j):
                members[i].append(j)
                load[i] += inter[i][j]
                dfs(j + 1, placed + 1)
                load[i] -= inter[i][j]
                members[i].pop()
        dfs(j + 1, placed)

    dfs(0, 0)
    return best


def strengthen(
    links: Sequence[Link],
    k: float,
    gains: GainMatrix,
    env: Environment,
    bins_per_k: int = STRENGTHEN_BINS_PER_K,
) -> list[Link]:
    """K-bi-feasible subset of a feasible set by first-fit binning.

    Links are visited by increasing decay and put in the first of
    ``ceil(bins_per_k * K)`` bins where every member's in-affectance stays
    within ``1/K`` and out-affectance within ``2/K``. Links that fit nowhere
    are dropped. The largest bin is returned (lowest index on ties).
    """
    if k < 1:
        raise ValueError("K must be >= 1")
    links = list(links)
    if not links:
        return []
    if not is_feasible_sinr(links, gains, env):
        raise ValueError("strengthen requires a feasible input set")
    a = affectance_matrix(links, gains, env)
    pos = {l.id: j for j, l in enumerate(links)}
    in_cap, out_cap = 1.0 / k, 2.0 / k
    n_bins = math.ceil(bins_per_k * k)
    bins: list[list[int]] = [[] for _ in range(n_bins)]
    in_sum = np.zeros(len(links))
    out_sum = np.zeros(len(links))
    for lid in link_order(links, gains):
        v = pos[lid]
        for b in bins:
            if b:
                new_in = a[b, v].sum()
                new_out = a[v, b].sum()
                if new_in > in_cap or new_out > out_cap:
                    continue
                if np.any(in_sum[b] + a[v, b] > in_cap) or np.any(out_sum[b] + a[b, v] > out_cap):
                    continue
                in_sum[b] += a[v, b]
                out_sum[b] += a[b, v]
                in_sum[v], out_sum[v] = new_in, new_out
            b.append(v)
            break
    best = max(bins, key=len)
    return [links[j] for j in best]


# --- random instances and the ratio harness ----------------------------------


def random_instance(
    rng: np.random.Generator,
    n: int,
    k: int,
    alpha: float = 3.0,
    sigma: float = 0.0,
    side: float = 20.0,
    length_range: tuple[float, float] = (1.0, 4.0),
    eligibility_p: float = 0.7,
    power: str = "uniform",
    env: Environment | None = None,
    per_channel_gains: bool = False,
) -> Instance:
    """Random links in a square: senders uniform, receivers at a uniform
    length and angle from their sender. Each link is eligible on each channel
    with probability ``eligibility_p`` and on at least one channel.

    With ``per_channel_gains`` every channel gets its own log-normal matrix
    (shadowing ``sigma``) over the same layout; otherwise all channels share one.
    """
    if env is None:
        env = Environment(noise_mw=1e-6, beta=1.5)
    senders = rng.uniform(0, side, size=(n, 2))
    length = rng.uniform(*length_range, size=n)
    angle = rng.uniform(0, 2 * np.pi, size=n)
    receivers = senders + np.column_stack([length * np.cos(angle), length * np.sin(angle)])
    layout = NodeLayout(np.vstack([senders, receivers]))
    if per_channel_gains:
        gains = tuple(
            lognormal_gain(layout, alpha, sigma, int(rng.integers(2**32))) for _ in range(k)
        )
    elif sigma > 0:
        gains = (lognormal_gain(layout, alpha, sigma, int(rng.integers(2**32))),)
    else:
        gains = (geometric_gain(layout, alpha),)
    links = [Link(j, j, n + j) for j in range(n)]
    if power == "linear":
        f = [gains[0].decay(l.sender, l.receiver) for l in links]
        links = PowerAssignment("linear", level=1.0 / max(f)).apply(links, gains[0])
    elif power != "uniform":
        raise ValueError(f"unsupported power {power!r}")
    elig = rng.random((k, n)) < eligibility_p
    none = ~elig.any(axis=0)
    elig[rng.integers(k, size=n)[none], np.nonzero(none)[0]] = True
    eligibility = tuple(frozenset(int(j) for j in np.nonzero(elig[i])[0]) for i in range(k))
    return Instance(tuple(links), k, eligibility, gains, env)


@dataclass
class HarnessResult:
    rows: list[dict] = field(default_factory=list)
    degenerate: int = 0

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r["ratio"] for r in self.rows])

    def stats(self) -> dict:
        r = self.ratios
        if r.size == 0:
            return {"trials": 0, "degenerate": self.degenerate}
        return {
            "trials": int(r.size),
            "degenerate": self.degenerate,
            "ratio_min": float(r.min()),
            "ratio_median": float(np.median(r)),
            "ratio_max": float(r.max()),
        }


def approximation_ratio_harness(
    trials: int,
    seed: int,
    n_max: int = 10,
    k_max: int = 2,
    alpha: float = 3.0,
    sigma: float = 0.0,
    power: str = "uniform",
    **instance_kwargs,
) -> HarnessResult:
    """Compare greedy against the exhaustive optimum on seeded random instances.

    Trial ``t`` uses its own generator seeded with ``(seed, t)``. Trials whose
    optimum is 0 are counted as degenerate and left out of the ratios.
    """
    res = HarnessResult()
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        n = int(rng.integers(2, n_max + 1))
        k = int(rng.integers(1, k_max + 1))
        inst = random_instance(rng, n, k, alpha=alpha, sigma=sigma, power=power, **instance_kwargs)
        opt = brute_force_opt(inst)
        if opt == 0:
            res.degenerate += 1
            continue
        alg = greedy_multichannel(inst).size
        zmax = max(zeta_report(g).zeta_max for g in inst.gains)
        res.rows.append(
            {"trial": t, "n": n, "k": k, "zeta_max": zmax, "opt": opt, "greedy": alg, "ratio": opt / alg}
        )
    return res
