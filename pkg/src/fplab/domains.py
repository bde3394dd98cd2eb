"""Bounded open domains used by the solver and the game."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["Ball", "Annulus", "Box", "NotchedBall", "domain_from_config"]

# integer codes shared with the compiled game kernel
BALL, ANNULUS, BOX, NOTCHED = 0, 1, 2, 3


class Ball:
    kind = BALL

    def __init__(self, center, radius: float = 1.0):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.dim = self.center.size

    def contains(self, pts):
        d = np.asarray(pts, dtype=float) - self.center
        return np.einsum("...i,...i->...", d, d) < self.radius ** 2

    @property
    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    @property
    def diameter(self):
        return 2.0 * self.radius

    def codes(self):
        return np.concatenate([self.center, [self.radius]])

    def to_dict(self):
        return {"name": "ball", "center": self.center.tolist(), "radius": self.radius}


class Annulus:
    kind = ANNULUS

    def __init__(self, center, r_in: float, r_out: float):
        if not (0 <= r_in < r_out):
            raise ValueError("annulus radii must satisfy 0 <= r_in < r_out")
        self.center = np.asarray(center, dtype=float)
        self.r_in = float(r_in)
        self.r_out = float(r_out)
        self.dim = self.center.size

    def contains(self, pts):
        d = np.asarray(pts, dtype=float) - self.center
        rr = np.einsum("...i,...i->...", d, d)
        return (rr > self.r_in ** 2) & (rr < self.r_out ** 2)

    @property
    def bbox(self):
        return self.center - self.r_out, self.center + self.r_out

    @property
    def diameter(self):
        return 2.0 * self.r_out

    def codes(self):
        return np.concatenate([self.center, [self.r_in, self.r_out]])

    def to_dict(self):
        return {"name": "annulus", "center": self.center.tolist(), "r_in": self.r_in,
                "r_out": self.r_out}


class Box:
    kind = BOX

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.dim = self.lo.size

    def contains(self, pts):
        p = np.asarray(pts, dtype=float)
        return np.all((p > self.lo) & (p < self.hi), axis=-1)

    @property
    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    @property
    def diameter(self):
        return float(np.linalg.norm(self.hi - self.lo))

    def codes(self):
        return np.concatenate([self.lo, self.hi])

    def to_dict(self):
        return {"name": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class NotchedBall:
    """Ball with an open cone removed whose apex sits inside the ball.

    The removed cone has apex ``center + (radius - depth) * axis``, axis
    ``axis`` (pointing outwards) and half-angle ``half_angle``.  The apex is a
    boundary point whose exterior contains that cone.
    """

    kind = NOTCHED

    def __init__(self, center, radius: float, axis, depth: float, half_angle: float):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        ax = np.asarray(axis, dtype=float)
        self.axis = ax / np.linalg.norm(ax)
        self.depth = float(depth)
        self.half_angle = float(half_angle)
        self.dim = self.center.size
        self.apex = self.center + (self.radius - self.depth) * self.axis

    def contains(self, pts):
        p = np.asarray(pts, dtype=float)
        d = p - self.center
        inball = np.einsum("...i,...i->...", d, d) < self.radius ** 2
        w = p - self.apex
        nw = np.linalg.norm(w, axis=-1)
        in_notch = (w @ self.axis) >= math.cos(self.half_angle) * nw
        return inball & ~in_notch

    @property
    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    @property
    def diameter(self):
        return 2.0 * self.radius

    @property
    def cone_ratio(self) -> float:
        """d with B_r(xbar) in the exterior and |apex - xbar| = r d (d = 1/sin(beta))."""
        return 1.0 / math.sin(self.half_angle)

    def codes(self):
        return np.concatenate([self.center, [self.radius], self.axis, [self.depth, self.half_angle]])

    def to_dict(self):
        return {"name": "notched_ball", "center": self.center.tolist(), "radius": self.radius,
                "axis": self.axis.tolist(), "depth": self.depth, "half_angle": self.half_angle}


def domain_from_config(cfg: dict, dim: int):
    name = cfg.get("name", "ball")
    c = cfg.get("center", [0.0] * dim)
    if name == "ball":
        return Ball(c, cfg.get("radius", 1.0))
    if name == "annulus":
        return Annulus(c, cfg["r_in"], cfg["r_out"])
    if name == "box":
        return Box(cfg["lo"], cfg["hi"])
    if name == "notched_ball":
        return NotchedBall(c, cfg.get("radius", 1.0), cfg.get("axis", [1.0] + [0.0] * (dim - 1)),
                           cfg.get("depth", 0.3), cfg.get("half_angle", 0.5))
    raise ValueError(f"unknown domain {name!r}")
