"""Resistance functionals.

The weighted resistance of a profile u on [-1, 1] is

    F_f(u) = integral of f(x) / (1 + u'(x)^2) dx

with an even, non-negative weight f that is non-decreasing on [0, 1].
f = 1/2 gives the plain 1-D resistance; f(x) = (d/2)|x|^(d-1) gives the
resistance of the radial body U(x) = u(|x|) in the unit ball of R^d.
Piecewise-linear shapes and constant-weight parabolic arcs have closed forms;
everything else goes through adaptive quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .shapes import LinearPiece, ParabolaPiece, PLShape, RadialShape, Shape

QUAD_ABS = 1e-12
QUAD_REL = 1e-10
QUAD_LIMIT = 2**20


def quad(fn: Callable[[float], float], a: float, b: float) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod with the package-wide tolerances."""
    if b <= a:
        return 0.0, 0.0
    val, err = integrate.quad(fn, a, b, epsabs=QUAD_ABS, epsrel=QUAD_REL, limit=QUAD_LIMIT)
    return float(val), float(err)


@dataclass(frozen=True)
class Weight:
    """Even weight f on [-1, 1].

    ``kind`` is "constant" (f = 1/2), "radial" (f = (d/2)|x|^(d-1)) or
    "custom" (any callable; checked on a grid at construction).
    """

    kind: str = "constant"
    d: int = 1
    fn: Callable[[float], float] | None = None

    def __post_init__(self):
        if self.kind == "radial":
            if int(self.d) != self.d or self.d < 1:
                raise ValueError(f"radial weight needs an integer d >= 1, got {self.d!r}")
        elif self.kind == "custom":
            if self.fn is None:
                raise ValueError("custom weight needs a callable")
            xs = np.linspace(0.0, 1.0, 1001)
            ys = np.array([self.fn(x) for x in xs])
            ym = np.array([self.fn(-x) for x in xs])
            if np.any(~np.isfinite(ys)) or np.any(ys < 0):
                raise ValueError("weight must be finite and non-negative")
            if np.any(np.abs(ys - ym) > 1e-12 * np.maximum(1.0, np.abs(ys))):
                raise ValueError("weight must be even")
            if np.any(np.diff(ys) < -1e-12 * np.maximum(1.0, np.abs(ys[1:]))):
                raise ValueError("weight must be non-decreasing on [0, 1]")
        elif self.kind != "constant":
            raise ValueError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def constant(cls) -> "Weight":
        return cls("constant")

    @classmethod
    def radial(cls, d: int) -> "Weight":
        return cls("radial", d=d)

    @classmethod
    def custom(cls, fn: Callable[[float], float]) -> "Weight":
        return cls("custom", fn=fn)

    @classmethod
    def parse(cls, text: str) -> "Weight":
        """'constant', 'radial:d'."""
        if text == "constant":
            return cls.constant()
        if text.startswith("radial:"):
            try:
                d = int(text.split(":", 1)[1])
            except ValueError:
                raise ValueError(f"bad weight {text!r}; expected radial:<int>") from None
            return cls.radial(d)
        raise ValueError(f"bad weight {text!r}; expected 'constant' or 'radial:<d>'")

    def __str__(self):
        return f"radial:{self.d}" if self.kind == "radial" else self.kind

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, 0.5)
        if self.kind == "radial":
            if self.d == 1:
                return np.full_like(x, 0.5)
            return 0.5 * self.d * np.abs(x) ** (self.d - 1)
        return np.vectorize(self.fn, otypes=[float])(x)

    def integral(self, a: float, b: float) -> float:
        """Integral of f over [a, b]."""
        if self.kind == "constant" or (self.kind == "radial" and self.d == 1):
            return 0.5 * (b - a)
        if self.kind == "radial":
            d = self.d
            return 0.5 * (math.copysign(abs(b) ** d, b) - math.copysign(abs(a) ** d, a))
        return quad(lambda t: float(self.fn(t)), a, b)[0]

    @property
    def exact(self) -> bool:
        return self.kind != "custom"


@dataclass(frozen=True)
class ResistanceValue:
    value: float
    method: str
    abs_error_bound: float

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "error_bound": self.abs_error_bound}


def _pl_terms(shape: PLShape, weight: Weight) -> list:
    x, k = shape.breakpoints, shape.slopes
    return [weight.integral(x[i], x[i + 1]) / (1.0 + k[i] * k[i]) for i in range(k.size)]


def _parabola_const(pc: ParabolaPiece) -> float:
    p = pc.p
    return 0.5 * p * (math.atan((pc.b - pc.x0) / p) - math.atan((pc.a - pc.x0) / p))


def resistance_weighted(shape: Shape, weight: Weight | None = None) -> ResistanceValue:
    weight = weight or Weight.constant()
    if isinstance(shape, PLShape):
        terms = _pl_terms(shape, weight)
        method = "closed_form" if weight.exact else "quadrature"
        return ResistanceValue(math.fsum(terms), method, 0.0 if weight.exact else QUAD_ABS * len(terms))
    const = weight.kind == "constant" or (weight.kind == "radial" and weight.d == 1)
    terms, err = [], 0.0
    for pc in shape.pieces:
        if isinstance(pc, LinearPiece):
            terms.append(weight.integral(pc.a, pc.b) / (1.0 + pc.slope**2))
            if not weight.exact:
                err += QUAD_ABS
        elif const:
            terms.append(_parabola_const(pc))
        else:
            val, e = quad(lambda t, pc=pc: float(weight(t)) / (1.0 + float(pc.derivative(t)) ** 2), pc.a, pc.b)
            terms.append(val)
            err += e
    method = "closed_form" if err == 0.0 and all(
        const or isinstance(pc, LinearPiece) for pc in shape.pieces
    ) else "quadrature"
    return ResistanceValue(math.fsum(terms), method, err)


def resistance_F(shape: Shape) -> ResistanceValue:
    """Plain resistance 1/2 * integral of 1 / (1 + u'^2)."""
    return resistance_weighted(shape, Weight.constant())


def resistance_F_quadrature(shape: Shape) -> ResistanceValue:
    """Plain resistance by adaptive quadrature, piece by piece (cross-check path)."""
    if isinstance(shape, PLShape):
        x = shape.breakpoints
        parts = [quad(lambda t, k=k: 0.5 / (1.0 + k * k), x[i], x[i + 1]) for i, k in enumerate(shape.slopes)]
    else:
        parts = [quad(lambda t, pc=pc: 0.5 / (1.0 + float(pc.derivative(t)) ** 2), pc.a, pc.b) for pc in shape.pieces]
    return ResistanceValue(math.fsum(v for v, _ in parts), "quadrature", math.fsum(e for _, e in parts))


def resistance_radial(rshape: RadialShape) -> ResistanceValue:
    """F_d of U(x) = phi(|x|): integral over [0, 1] of d r^(d-1) / (1 + phi'(r)^2)."""
    d = rshape.dimension
    prof = rshape.profile
    if isinstance(prof, PLShape):
        x, k = prof.breakpoints, prof.slopes
        terms = []
        for i in range(k.size):
            a, b = max(x[i], 0.0), x[i + 1]
            if b > a:
                terms.append((b**d - a**d) / (1.0 + k[i] * k[i]))
        return ResistanceValue(math.fsum(terms), "closed_form", 0.0)
    terms, err = [], 0.0
    for pc in prof.pieces:
        a, b = max(pc.a, 0.0), pc.b
        if b <= a:
            continue
        val, e = quad(lambda r, pc=pc: d * r ** (d - 1) / (1.0 + float(pc.derivative(r)) ** 2), a, b)
        terms.append(val)
        err += e
    return ResistanceValue(math.fsum(terms), "quadrature", err)


def horizontal_component_F0(shape: Shape) -> float:
    """1/2 * integral of u' / (1 + u'^2): zero for every even shape."""
    if isinstance(shape, PLShape):
        k = shape.slopes
        return 0.5 * math.fsum(shape.widths * k / (1.0 + k * k))
    terms = []
    for pc in shape.pieces:
        if isinstance(pc, LinearPiece):
            terms.append((pc.b - pc.a) * pc.slope / (1.0 + pc.slope**2))
        else:
            p = pc.p
            ta, tb = pc.a - pc.x0, pc.b - pc.x0
            terms.append(0.5 * p * (math.log1p((tb / p) ** 2) - math.log1p((ta / p) ** 2)))
    return 0.5 * math.fsum(terms)


def lower_bound_check(shape: Shape, tol: float = 1e-12) -> bool:
    """True when 1/2 < F(u) <= 1, the range every admissible profile lands in."""
    val = resistance_F(shape).value
    return 0.5 < val <= 1.0 + tol


def integrand_samples(shape: Shape, weight: Weight, n: int = 1001) -> np.ndarray:
    """Rows (x, f(x), 1/(1 + u'(x)^2)) on a uniform grid; breakpoints use the right slope."""
    xs = np.linspace(-1.0, 1.0, n)
    k = shape.derivatives(xs)
    return np.column_stack([xs, weight(xs), 1.0 / (1.0 + k * k)])
