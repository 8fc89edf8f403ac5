"""Weights W(x) = prod_j |x - p_j|^(2 a_j) * h(x) with integer zero orders.

``PoleConfig`` holds the zero set (distinct complex positions, positive
integer orders); ``WeightSpec`` adds the smooth positive factor h and its
certified bounds.  Everything downstream (exact families, solver, Pohozaev
terms) consumes these two types.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PROBE_GRID = 64


class ConfigValidationError(ValueError):
    """Raised when a pole or weight configuration violates its contract."""


def _as_complex(p):
    if isinstance(p, complex):
        return p
    if isinstance(p, (tuple, list)) and len(p) == 2:
        return complex(p[0], p[1])
    return complex(p)


@dataclass(frozen=True)
class PoleConfig:
    """Zero set of the weight: positions ``poles`` with orders ``alphas``.

    Positions must be pairwise distinct (orders at a shared position belong in
    a single entry with the summed order).  ``alphas`` are integers >= 1.
    An empty config describes the regular weight W = h.
    """

    poles: tuple
    alphas: tuple

    def __init__(self, poles=(), alphas=()):
        poles = tuple(_as_complex(p) for p in poles)
        alphas = tuple(int(a) for a in alphas)
        if len(poles) != len(alphas):
            raise ConfigValidationError(
                f"{len(poles)} pole positions but {len(alphas)} orders")
        for a in alphas:
            if a < 1:
                raise ConfigValidationError(
                    f"zero orders must be integers >= 1, got {a}")
        scale = max([abs(p) for p in poles], default=0.0) or 1.0
        for i in range(len(poles)):
            for j in range(i + 1, len(poles)):
                if abs(poles[i] - poles[j]) <= 1e-12 * scale:
                    raise ConfigValidationError(
                        f"poles must be pairwise distinct: #{i} and #{j} coincide "
                        f"at {poles[i]} (merge them into one entry with the summed order)")
        object.__setattr__(self, "poles", poles)
        object.__setattr__(self, "alphas", alphas)

    @property
    def count(self):
        return len(self.poles)

    @property
    def total_order(self):
        """Sum of the zero orders (the alpha of the merged limit weight)."""
        return sum(self.alphas)

    @property
    def map_degree(self):
        """Degree 1 + sum(alphas) of the associated developing map."""
        return 1 + self.total_order

    def moduli(self):
        return np.array([abs(p) for p in self.poles])

    def sorted_by_modulus(self):
        order = np.argsort([abs(p) for p in self.poles], kind="stable")
        return PoleConfig(tuple(self.poles[i] for i in order),
                          tuple(self.alphas[i] for i in order))

    def log_weight(self, x, y):
        """log prod |x - p_j|^(2 a_j); -inf at the poles themselves."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape)
        for p, a in zip(self.poles, self.alphas):
            d2 = (x - p.real) ** 2 + (y - p.imag) ** 2
            with np.errstate(divide="ignore"):
                out = out + a * np.log(d2)
        return out

    def polynomial_part(self, x, y):
        """prod |x - p_j|^(2 a_j) evaluated directly (no h factor)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.ones(np.broadcast(x, y).shape)
        for p, a in zip(self.poles, self.alphas):
            out = out * ((x - p.real) ** 2 + (y - p.imag) ** 2) ** a
        return out

    def to_dict(self):
        return {"poles": [[p.real, p.imag] for p in self.poles],
                "alphas": list(self.alphas)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(complex(a, b) for a, b in d["poles"]),
                   tuple(d["alphas"]))


class WeightSpec:
    """Full weight W = (polynomial zero part) * h with a certified h.

    ``h`` must be positive and bounded: 0 < lower <= h <= upper, checked on a
    64x64 probe grid over the disk of radius ``probe_radius``.  ``h(0) = 1``
    is the normalization used by the identities; pass ``normalized=False`` to
    skip that check.  ``grad_log_h`` (optional) returns (d/dx, d/dy) of log h
    and feeds the Pohozaev h-term; omitting it declares h constant.
    """

    def __init__(self, poles=None, h=None, bounds=(0.5, 2.0), probe_radius=1.0,
                 grad_log_h=None, normalized=True):
        self.poles = poles if poles is not None else PoleConfig()
        self.h = h
        self.grad_log_h = grad_log_h
        self.normalized = bool(normalized)
        self.bounds = (float(bounds[0]), float(bounds[1]))
        lo, up = self.bounds
        if not (0.0 < lo <= up):
            raise ConfigValidationError(f"need 0 < lower <= upper bounds for h, got {self.bounds}")
        if h is not None:
            ax = np.linspace(-probe_radius, probe_radius, _PROBE_GRID)
            X, Y = np.meshgrid(ax, ax, indexing="ij")
            mask = X * X + Y * Y <= probe_radius * probe_radius
            vals = np.asarray(h(X[mask], Y[mask]), dtype=float)
            if not np.all(np.isfinite(vals)):
                raise ConfigValidationError("h produced non-finite values on the probe grid")
            if np.min(vals) < lo or np.max(vals) > up:
                raise ConfigValidationError(
                    f"h leaves its certified bounds [{lo}, {up}] on the probe grid: "
                    f"observed range [{np.min(vals):.6g}, {np.max(vals):.6g}]")
            if normalized:
                h0 = float(np.asarray(h(np.array([0.0]), np.array([0.0])))[0])
                if abs(h0 - 1.0) > 1e-12:
                    raise ConfigValidationError(f"h(0) must be 1, got {h0}")

    def h_values(self, x, y):
        if self.h is None:
            return np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return np.asarray(self.h(np.asarray(x, float), np.asarray(y, float)), dtype=float)

    def __call__(self, x, y):
        """W(x, y), vectorized."""
        return self.poles.polynomial_part(x, y) * self.h_values(x, y)

    def log_values(self, x, y):
        return self.poles.log_weight(x, y) + np.log(self.h_values(x, y))

    def at_origin(self):
        """W(0); zero when a pole sits at the origin."""
        return float(np.asarray(self(np.array([0.0]), np.array([0.0])))[0])

    def pohozaev_density(self, x, y):
        """2(1 + sum_j a_j x.(x-p_j)/|x-p_j|^2) + x . grad log h  -- the
        divergence factor (2 W + x . grad W)/W that multiplies W e^f in the
        annulus term of the Pohozaev balance."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        s = np.ones(np.broadcast(x, y).shape)
        for p, a in zip(self.poles.poles, self.poles.alphas):
            dx = x - p.real
            dy = y - p.imag
            d2 = dx * dx + dy * dy
            s = s + a * (x * dx + y * dy) / d2
        out = 2.0 * s
        if self.grad_log_h is not None:
            gx, gy = self.grad_log_h(x, y)
            out = out + x * gx + y * gy
        return out
