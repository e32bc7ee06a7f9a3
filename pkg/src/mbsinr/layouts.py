"""Built-in node layouts for synthetic studies."""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from .gains import NodeLayout

__all__ = ["grid_layout", "arc_layout", "random_layout", "named_layout"]


def grid_layout(rows: int, cols: int, spacing: float = 1.0) -> NodeLayout:
    ys, xs = np.divmod(np.arange(rows * cols), cols)
    return NodeLayout(np.column_stack([xs * spacing, ys * spacing]).astype(float))


def arc_layout(n: int = 60, length: float = 40.0, chord: float = 21.8) -> NodeLayout:
    """``n`` nodes evenly spaced along a circular arc of the given length whose
    endpoints are ``chord`` meters apart (a curved corridor)."""
    if not 0 < chord < length:
        raise ValueError("need 0 < chord < length")
    # chord/length = sin(t)/t with t the half-angle; solve for t in (0, pi)
    t = brentq(lambda t: math.sin(t) / t - chord / length, 1e-9, math.pi - 1e-12)
    radius = length / (2 * t)
    theta = np.linspace(-t, t, n)
    return NodeLayout(np.column_stack([radius * np.sin(theta), radius * np.cos(theta)]))


def random_layout(n: int, side: float, seed) -> NodeLayout:
    rng = np.random.default_rng(seed)
    return NodeLayout(rng.uniform(0.0, side, size=(n, 2)))


def named_layout(name: str, spacing: float = 1.0, side: float = 10.0, seed=None) -> NodeLayout:
    """``grid4x5``, ``arc60``, ``gridRxC`` or ``random<N>`` (needs a seed)."""
    if name == "arc60":
        return arc_layout(60)
    if name.startswith("grid"):
        try:
            r, c = (int(v) for v in name[4:].split("x"))
        except ValueError:
            raise ValueError(f"bad grid layout name {name!r}") from None
        return grid_layout(r, c, spacing)
    if name.startswith("random"):
        if seed is None:
            raise ValueError("random layouts need a seed")
        return random_layout(int(name[6:]), side, seed)
    raise ValueError(f"unknown layout {name!r}")
