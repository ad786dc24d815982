"""Hollow profiles on [-1, 1].

Two concrete representations are used throughout the package:

* :class:`PLShape` -- the generalized graph of a piecewise-linear function
  with jump discontinuities.  Each breakpoint stores a left and a right
  ordinate, so vertical walls are part of the graph.
* :class:`ParabolicShape` -- a composite of linear pieces and focal parabola
  arcs ``((x - x0)**2 - p**2) / (2 p)``.  The optimal profile ``u0`` lives here.

Both are immutable.  Boundary ordinates at x = -1 and x = 1 are part of the
generalized graph: for a :class:`PLShape` they are ``left[0]`` and
``right[-1]``; for a :class:`ParabolicShape` they are always 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

EPS_GEOM = 1e-9
MIN_SPACING = 1e-12
REL_TOL = 1e-12


class ShapeFormatError(ValueError):
    """Raised for malformed shape data (bad JSON document or inconsistent arrays)."""


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ShapeFormatError(f"{name}: expected a flat list of numbers")
    if not np.all(np.isfinite(arr)):
        raise ShapeFormatError(f"{name}: all values must be finite")
    arr.setflags(write=False)
    return arr


def _check_side(side):
    if side not in (None, "left", "right"):
        raise ValueError(f"side must be 'left', 'right' or None, got {side!r}")


# ---------------------------------------------------------------------------
# Piecewise-linear shapes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PLShape:
    """Generalized graph of a piecewise-linear function on [-1, 1].

    ``left[i]`` and ``right[i]`` are the ordinates at ``breakpoints[i]``
    approached from the left and from the right.  At x = -1, ``left[0]`` is the
    boundary ordinate and ``right[0]`` the limit u(-1+); at x = 1, ``left[-1]``
    is u(1-) and ``right[-1]`` the boundary ordinate.  Slopes are derived from
    the ordinates, so the linear-consistency invariant holds by construction.
    """

    breakpoints: np.ndarray
    left: np.ndarray
    right: np.ndarray
    slopes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = _frozen(self.breakpoints, "breakpoints")
        left = _frozen(self.left, "left")
        right = _frozen(self.right, "right")
        if x.size < 2:
            raise ShapeFormatError("breakpoints: need at least two points")
        if left.size != x.size or right.size != x.size:
            raise ShapeFormatError(
                f"left/right: expected {x.size} values each, got {left.size} and {right.size}"
            )
        if x[0] != -1.0 or x[-1] != 1.0:
            raise ShapeFormatError("breakpoints: must start at -1 and end at 1")
        dx = np.diff(x)
        if np.any(dx < MIN_SPACING):
            i = int(np.argmin(dx))
            raise ShapeFormatError(
                f"breakpoints: interval {i + 1} has length {dx[i]!r} < {MIN_SPACING}"
            )
        slopes = (left[1:] - right[:-1]) / dx
        slopes.setflags(write=False)
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        object.__setattr__(self, "slopes", slopes)

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_points(cls, xs: Sequence[float], ys: Sequence[float]) -> "PLShape":
        """Continuous broken line through the given vertices."""
        return cls(xs, ys, ys)

    @classmethod
    def from_slopes(
        cls,
        breakpoints: Sequence[float],
        slopes: Sequence[float],
        start: float = 0.0,
        jumps: Sequence[float] | None = None,
    ) -> "PLShape":
        """Integrate slopes from x = -1.

        ``jumps[i]`` is the vertical step at breakpoint i (right minus left);
        ``start`` is the boundary ordinate at -1.
        """
        x = np.asarray(breakpoints, dtype=float)
        k = np.asarray(slopes, dtype=float)
        if k.size != x.size - 1:
            raise ShapeFormatError(f"slopes: expected {x.size - 1} values, got {k.size}")
        w = np.zeros(x.size) if jumps is None else np.asarray(jumps, dtype=float)
        left = np.empty(x.size)
        right = np.empty(x.size)
        left[0] = start
        right[0] = start + w[0]
        for i in range(1, x.size):
            left[i] = right[i - 1] + k[i - 1] * (x[i] - x[i - 1])
            right[i] = left[i] + w[i]
        return cls(x, left, right)

    @classmethod
    def flat(cls, depth: float) -> "PLShape":
        """The flat hollow u = depth < 0 with vertical walls at the rim."""
        return cls([-1.0, 1.0], [0.0, depth], [depth, 0.0])

    @classmethod
    def v_shape(cls, slope: float) -> "PLShape":
        """Even V through (+-1, 0) with slopes -slope, +slope."""
        return cls.from_points([-1.0, 0.0, 1.0], [0.0, -abs(slope), 0.0])

    @classmethod
    def even_from_half(
        cls,
        half_breakpoints: Sequence[float],
        half_left: Sequence[float],
        half_right: Sequence[float],
    ) -> "PLShape":
        """Even shape from its restriction to [-1, 0].

        ``half_breakpoints`` runs from -1 to 0.  The value at 0 is taken from the
        left side; the mirror copy supplies the right side.
        """
        xb = np.asarray(half_breakpoints, dtype=float)
        lb = np.asarray(half_left, dtype=float)
        rb = np.asarray(half_right, dtype=float)
        if xb[0] != -1.0 or xb[-1] != 0.0:
            raise ShapeFormatError("half_breakpoints: must run from -1 to 0")
        x = np.concatenate([xb, -xb[-2::-1]])
        left = np.concatenate([lb[:-1], [lb[-1]], rb[-2::-1]])
        right = np.concatenate([rb[:-1], [lb[-1]], lb[-2::-1]])
        return cls(x, left, right)

    # -- basic queries ----------------------------------------------------

    @property
    def n_edges(self) -> int:
        return self.slopes.size

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def jumps(self) -> np.ndarray:
        return self.right - self.left

    def is_continuous(self, tol: float = REL_TOL) -> bool:
        """True when no interior jump exceeds ``tol`` (rim walls excluded)."""
        return bool(np.all(np.abs(self.jumps[1:-1]) <= tol))

    def is_even(self, tol: float = REL_TOL) -> bool:
        x = self.breakpoints
        return bool(
            np.allclose(x, -x[::-1], rtol=0, atol=tol)
            and np.allclose(self.left, self.right[::-1], rtol=0, atol=tol)
        )

    def mirrored(self) -> "PLShape":
        """The shape x -> -x."""
        return PLShape(-self.breakpoints[::-1], self.right[::-1], self.left[::-1])

    def scaled(self, factor: float) -> "PLShape":
        return PLShape(self.breakpoints, factor * self.left, factor * self.right)

    def __eq__(self, other):
        if not isinstance(other, PLShape):
            return NotImplemented
        return (
            np.array_equal(self.breakpoints, other.breakpoints)
            and np.array_equal(self.left, other.left)
            and np.array_equal(self.right, other.right)
        )

    __hash__ = None

    def __repr__(self):
        return f"PLShape(n_edges={self.n_edges}, min={float(np.min(self.right[:-1])):.6g})"

    # -- evaluation -------------------------------------------------------

    def value(self, x: float, side: str | None = None) -> float:
        _check_side(side)
        x = float(x)
        xb = self.breakpoints
        if x < -1.0 or x > 1.0:
            raise ValueError(f"x = {x} outside [-1, 1]")
        i = int(np.searchsorted(xb, x))
        if i < xb.size and xb[i] == x:
            if side == "left":
                return float(self.left[i])
            if side == "right":
                return float(self.right[i])
            if self.left[i] != self.right[i]:
                raise ValueError(f"x = {x} is a jump point; pass side='left' or 'right'")
            return float(self.left[i])
        return float(self.right[i - 1] + self.slopes[i - 1] * (x - xb[i - 1]))

    def derivative(self, x: float, side: str | None = None) -> float:
        _check_side(side)
        xb = self.breakpoints
        if x < -1.0 or x > 1.0:
            raise ValueError(f"x = {x} outside [-1, 1]")
        i = int(np.searchsorted(xb, x))
        if i < xb.size and xb[i] == x:
            if side == "left" and i > 0:
                return float(self.slopes[i - 1])
            if side == "right" and i < self.n_edges:
                return float(self.slopes[i])
            raise ValueError(f"x = {x} is a breakpoint; derivative needs a valid side")
        return float(self.slopes[i - 1])

    def values(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized ordinate at points that are not breakpoints."""
        xs = np.asarray(xs, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, xs, side="right") - 1, 0, self.n_edges - 1)
        return self.right[idx] + self.slopes[idx] * (xs - self.breakpoints[idx])

    def derivatives(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        idx = np.clip(np.searchsorted(self.breakpoints, xs, side="right") - 1, 0, self.n_edges - 1)
        return self.slopes[idx]


# ---------------------------------------------------------------------------
# Parabolic composites
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearPiece:
    a: float
    b: float
    slope: float
    offset: float

    def value(self, x):
        return self.offset + self.slope * np.asarray(x, dtype=float)

    def derivative(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.slope)


@dataclass(frozen=True)
class ParabolaPiece:
    """Arc of ((x - x0)^2 - p^2) / (2p): focus at (x0, 0), vertical axis."""

    a: float
    b: float
    x0: float
    p: float

    def __post_init__(self):
        if not self.p > 0:
            raise ShapeFormatError(f"parabola piece on [{self.a}, {self.b}]: p must be > 0")

    def value(self, x):
        t = np.asarray(x, dtype=float) - self.x0
        return (t * t - self.p * self.p) / (2.0 * self.p)

    def derivative(self, x):
        return (np.asarray(x, dtype=float) - self.x0) / self.p


Piece = Union[LinearPiece, ParabolaPiece]


@dataclass(frozen=True)
class ParabolicShape:
    pieces: tuple

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise ShapeFormatError("pieces: need at least one piece")
        if pieces[0].a != -1.0 or pieces[-1].b != 1.0:
            raise ShapeFormatError("pieces: intervals must cover [-1, 1]")
        for i, pc in enumerate(pieces):
            if pc.b - pc.a < MIN_SPACING:
                raise ShapeFormatError(f"pieces[{i}]: interval too short")
            if i and pc.a != pieces[i - 1].b:
                raise ShapeFormatError(f"pieces[{i}]: does not start where pieces[{i - 1}] ends")
        object.__setattr__(self, "pieces", pieces)

    @property
    def junctions(self) -> np.ndarray:
        return np.array([pc.a for pc in self.pieces] + [1.0])

    @property
    def continuity(self) -> tuple:
        """Per interior junction: True when the one-sided limits agree."""
        flags = []
        for lo, hi in zip(self.pieces[:-1], self.pieces[1:]):
            ya, yb = float(lo.value(lo.b)), float(hi.value(hi.a))
            flags.append(abs(ya - yb) <= REL_TOL * max(1.0, abs(ya)))
        return tuple(flags)

    def is_continuous(self) -> bool:
        return all(self.continuity)

    def _piece_index(self, x: float) -> int:
        for i, pc in enumerate(self.pieces):
            if x < pc.b:
                return i
        return len(self.pieces) - 1

    def value(self, x: float, side: str | None = None) -> float:
        _check_side(side)
        x = float(x)
        if x < -1.0 or x > 1.0:
            raise ValueError(f"x = {x} outside [-1, 1]")
        if x == -1.0 and side == "left":
            return 0.0
        if x == 1.0 and side == "right":
            return 0.0
        for i, pc in enumerate(self.pieces):
            if x == pc.b and i + 1 < len(self.pieces):
                ya, yb = float(pc.value(x)), float(self.pieces[i + 1].value(x))
                if side == "left":
                    return ya
                if side == "right":
                    return yb
                if abs(ya - yb) > REL_TOL * max(1.0, abs(ya)):
                    raise ValueError(f"x = {x} is a jump point; pass side='left' or 'right'")
                return ya
        return float(self.pieces[self._piece_index(x)].value(x))

    def derivative(self, x: float, side: str | None = None) -> float:
        _check_side(side)
        if side == "left":
            for pc in self.pieces:
                if pc.a < x <= pc.b:
                    return float(pc.derivative(x))
        return float(self.pieces[self._piece_index(x)].derivative(x))

    def values(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.empty_like(xs)
        idx = np.clip(np.searchsorted(self.junctions, xs, side="right") - 1, 0, len(self.pieces) - 1)
        for i, pc in enumerate(self.pieces):
            m = idx == i
            out[m] = pc.value(xs[m])
        return out

    def derivatives(self, xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.empty_like(xs)
        idx = np.clip(np.searchsorted(self.junctions, xs, side="right") - 1, 0, len(self.pieces) - 1)
        for i, pc in enumerate(self.pieces):
            m = idx == i
            out[m] = pc.derivative(xs[m])
        return out

    def is_even(self, tol: float = REL_TOL) -> bool:
        xs = np.linspace(0.0, 1.0, 257)[1:-1] * 0.999 + 1e-4
        return bool(np.allclose(self.values(xs), self.values(-xs), rtol=0, atol=tol))

    def mirrored(self) -> "ParabolicShape":
        out = []
        for pc in reversed(self.pieces):
            if isinstance(pc, LinearPiece):
                out.append(LinearPiece(-pc.b, -pc.a, -pc.slope, pc.offset))
            else:
                out.append(ParabolaPiece(-pc.b, -pc.a, -pc.x0, pc.p))
        return ParabolicShape(tuple(out))


Shape = Union[PLShape, ParabolicShape]


def make_u0() -> ParabolicShape:
    """The minimizer ((|x| + 1)^2 - 4) / 4 as two focal arcs.

    The left arc has its focus at (1, 0), the right arc at (-1, 0).
    """
    return ParabolicShape(
        (ParabolaPiece(-1.0, 0.0, 1.0, 2.0), ParabolaPiece(0.0, 1.0, -1.0, 2.0))
    )


def u0(x):
    """Closed form of the minimizer, vectorized."""
    ax = np.abs(np.asarray(x, dtype=float))
    return ((ax + 1.0) ** 2 - 4.0) / 4.0


def evaluate(shape: Shape, x: float, side: str | None = None) -> float:
    """Ordinate of the generalized graph at ``x``.

    At a jump the caller must say which one-sided value is wanted.
    """
    return shape.value(x, side)


# ---------------------------------------------------------------------------
# Radial lift
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialShape:
    """U(x) = profile(|x|) on the unit ball of R^d."""

    dimension: int
    profile: Shape

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError(f"dimension must be an integer >= 1, got {self.dimension}")
        if not self.profile.is_even():
            raise ValueError("radial profile must be even")


# ---------------------------------------------------------------------------
# Edge sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EdgeSequence:
    """Broken line w0, v1, w1, ..., vn, wn starting at (-1, 0).

    ``jumps`` holds the signed lengths of the vertical vectors w_i and
    ``edges`` the rightward vectors v_i as rows (dx, dy) with dx > 0.
    """

    jumps: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        w = np.array(self.jumps, dtype=float)
        v = np.array(self.edges, dtype=float).reshape(-1, 2)
        if w.size != v.shape[0] + 1:
            raise ShapeFormatError(
                f"edge sequence: {v.shape[0]} edges need {v.shape[0] + 1} jumps, got {w.size}"
            )
        if np.any(v[:, 0] <= 0):
            raise ShapeFormatError("edge sequence: every edge needs a positive horizontal component")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "jumps", w)
        object.__setattr__(self, "edges", v)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def slopes(self) -> np.ndarray:
        return self.edges[:, 1] / self.edges[:, 0]

    def total(self) -> tuple:
        """Exactly rounded sum of all vectors."""
        return (
            math.fsum(self.edges[:, 0]),
            math.fsum(list(self.jumps) + list(self.edges[:, 1])),
        )

    def __eq__(self, other):
        if not isinstance(other, EdgeSequence):
            return NotImplemented
        return np.array_equal(self.jumps, other.jumps) and np.array_equal(self.edges, other.edges)

    __hash__ = None


def to_edge_sequence(shape: PLShape) -> EdgeSequence:
    if shape.left[0] != 0.0:
        raise ShapeFormatError("edge sequences start at (-1, 0); shape has a nonzero boundary value at -1")
    dx = np.diff(shape.breakpoints)
    dy = shape.left[1:] - shape.right[:-1]
    return EdgeSequence(shape.right - shape.left, np.column_stack([dx, dy]))


def from_edge_sequence(seq: EdgeSequence) -> PLShape:
    """Rebuild the generalized graph; partial sums are exactly rounded."""
    n = seq.n_edges
    xs = [-1.0]
    left = [0.0]
    right = [seq.jumps[0]]
    x_terms = [-1.0]
    y_terms = [seq.jumps[0]]
    for i in range(n):
        x_terms.append(seq.edges[i, 0])
        y_terms.append(seq.edges[i, 1])
        xs.append(math.fsum(x_terms))
        left.append(math.fsum(y_terms))
        y_terms.append(seq.jumps[i + 1])
        right.append(math.fsum(y_terms))
    return PLShape(xs, left, right)


def split_middle_if_odd(seq: EdgeSequence, tol: float = REL_TOL) -> EdgeSequence:
    """Split the middle edge of an odd-length even sequence into equal halves."""
    n = seq.n_edges
    if n % 2 == 0:
        return seq
    m = n // 2
    dx, dy = seq.edges[m]
    if abs(dy) > tol:
        raise ValueError(f"middle edge of an odd sequence must be horizontal, has dy = {dy!r}")
    edges = np.vstack([seq.edges[:m], [[dx / 2, 0.0], [dx / 2, 0.0]], seq.edges[m + 1 :]])
    jumps = np.concatenate([seq.jumps[: m + 1], [0.0], seq.jumps[m + 1 :]])
    return EdgeSequence(jumps, edges)


def symmetrize(shape: PLShape) -> PLShape:
    """Even shape made of two half-size copies: x -> u(2|x| - 1) / 2.

    Slopes are unchanged and abscissas halved, so the plain resistance is
    preserved.  The zero-width spike at x = 0 (the image of the rim point -1)
    is not represented; every reflected ray clears it whenever the input
    satisfies SIC.
    """
    xr = (shape.breakpoints + 1.0) / 2.0
    lr = shape.left / 2.0
    rr = shape.right / 2.0
    mid = rr[0]
    x = np.concatenate([-xr[:0:-1], [0.0], xr[1:]])
    left = np.concatenate([rr[:0:-1], [mid], lr[1:]])
    right = np.concatenate([lr[:0:-1], [mid], rr[1:]])
    return PLShape(x, left, right)


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------


def _num_list(doc: dict, key: str, expected: int | None = None) -> list:
    if key not in doc:
        raise ShapeFormatError(f"field '{key}': missing")
    val = doc[key]
    if not isinstance(val, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in val
    ):
        raise ShapeFormatError(f"field '{key}': expected a list of numbers")
    if expected is not None and len(val) != expected:
        raise ShapeFormatError(f"field '{key}': expected {expected} values, got {len(val)}")
    return val


def _num(doc: dict, key: str, where: str) -> float:
    val = doc.get(key)
    if not isinstance(val, (int, float)) or isinstance(val, bool):
        raise ShapeFormatError(f"{where}: field '{key}' must be a number")
    return float(val)


def shape_to_dict(shape: Shape) -> dict:
    if isinstance(shape, PLShape):
        return {
            "kind": "pl",
            "breakpoints": shape.breakpoints.tolist(),
            "left": shape.left.tolist(),
            "right": shape.right.tolist(),
            "slopes": shape.slopes.tolist(),
        }
    pieces = []
    for pc in shape.pieces:
        if isinstance(pc, ParabolaPiece):
            pieces.append({"a": pc.a, "b": pc.b, "type": "parabola", "x0": pc.x0, "p": pc.p})
        else:
            pieces.append({"a": pc.a, "b": pc.b, "type": "linear", "slope": pc.slope, "offset": pc.offset})
    return {"kind": "parabolic", "pieces": pieces}


def shape_from_dict(doc: dict) -> Shape:
    if not isinstance(doc, dict):
        raise ShapeFormatError("shape document must be a JSON object")
    kind = doc.get("kind")
    if kind == "pl":
        xs = _num_list(doc, "breakpoints")
        left = _num_list(doc, "left", len(xs))
        right = _num_list(doc, "right", len(xs))
        shape = PLShape(xs, left, right)
        if "slopes" in doc:
            slopes = np.asarray(_num_list(doc, "slopes", len(xs) - 1), dtype=float)
            scale = np.maximum(1.0, np.abs(shape.slopes))
            bad = np.nonzero(np.abs(slopes - shape.slopes) > 1e-9 * scale)[0]
            if bad.size:
                i = int(bad[0])
                raise ShapeFormatError(
                    f"field 'slopes': entry {i} ({slopes[i]!r}) inconsistent with ordinates "
                    f"({shape.slopes[i]!r})"
                )
        return shape
    if kind == "parabolic":
        raw = doc.get("pieces")
        if not isinstance(raw, list):
            raise ShapeFormatError("field 'pieces': expected a list")
        pieces = []
        for i, pd in enumerate(raw):
            where = f"pieces[{i}]"
            if not isinstance(pd, dict):
                raise ShapeFormatError(f"{where}: expected an object")
            a, b = _num(pd, "a", where), _num(pd, "b", where)
            typ = pd.get("type")
            if typ == "parabola":
                pieces.append(ParabolaPiece(a, b, _num(pd, "x0", where), _num(pd, "p", where)))
            elif typ == "linear":
                pieces.append(LinearPiece(a, b, _num(pd, "slope", where), _num(pd, "offset", where)))
            else:
                raise ShapeFormatError(f"{where}: field 'type' must be 'parabola' or 'linear'")
        return ParabolicShape(tuple(pieces))
    raise ShapeFormatError(f"field 'kind': expected 'pl' or 'parabolic', got {kind!r}")


def loads_shape(text: str) -> Shape:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ShapeFormatError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return shape_from_dict(doc)


def load_shape(path: str | Path) -> Shape:
    return loads_shape(Path(path).read_text())


def dumps_shape(shape: Shape) -> str:
    return json.dumps(shape_to_dict(shape), indent=2)


def save_shape(shape: Shape, path: str | Path) -> None:
    Path(path).write_text(dumps_shape(shape) + "\n")


def half_grid(n_segments: int) -> np.ndarray:
    """Uniform breakpoints on [-1, 1] with n_segments intervals (n even)."""
    if n_segments < 2 or n_segments % 2:
        raise ValueError(f"n_segments must be even and >= 2, got {n_segments}")
    m = n_segments // 2
    right = np.arange(m + 1) / m
    return np.concatenate([-right[:0:-1], right])
