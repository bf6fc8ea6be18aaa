"""Triangular iterated function systems on the unit square.

A system is a family of maps S_i(x, y) = (f_i(x), g_i(x, y)) whose three
hypotheses (self-map into the square, uniform contraction, horizontal
domination of the vertical derivative) are certified from interval enclosures
at validation time, together with a strong-separation check on depth-k
cylinder enclosures.

Symbol sequences are plain integer arrays; the prefix i|n is `seq[:n]` and the
shift drops leading entries.  Validated systems are immutable and all
operations are pure; sampling is deterministic given its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import (
    UNIT,
    EvalDomainError,
    Expression,
    Interval,
    eval_with_partials,
    evaluate,
    parse,
    partial_range,
    range_bound,
)

__all__ = [
    "BoxEnclosure",
    "TriangularMap",
    "TriangularSystem",
    "ValidationError",
    "NotSelfMapError",
    "NotContractionError",
    "DominationViolationError",
    "SscUndecidedError",
    "validate",
    "apply_word",
    "coding_depth",
    "coding_map",
    "cylinder_enclosure",
    "sample_attractor",
    "sample_coded",
]

# Image enclosures are outward-inflated, so maps that touch the boundary of the
# square (e.g. x/2 + 1/2 at x = 1) need a matching acceptance slack.
_SELF_MAP_SLACK = 1e-9


@dataclass(frozen=True)
class BoxEnclosure:
    """Axis-aligned rectangle enclosing a cylinder image."""

    x: Interval
    y: Interval

    def contains(self, p, slack: float = 0.0) -> bool:
        return (self.x.lo - slack <= p[0] <= self.x.hi + slack
                and self.y.lo - slack <= p[1] <= self.y.hi + slack)

    def contains_box(self, other: "BoxEnclosure", slack: float = 0.0) -> bool:
        return (self.x.contains_interval(other.x, slack)
                and self.y.contains_interval(other.y, slack))

    def distance(self, other: "BoxEnclosure") -> float:
        return math.hypot(self.x.distance(other.x), self.y.distance(other.y))


UNIT_BOX = BoxEnclosure(UNIT, UNIT)


@dataclass(frozen=True)
class TriangularMap:
    """One map (f(x), g(x, y)) with cached derivative enclosures over the square."""

    f: Expression
    g: Expression
    fx_range: Interval
    gx_range: Interval
    gy_range: Interval
    image: BoxEnclosure


class ValidationError(Exception):
    """A system failed one of the certified hypotheses."""


class NotSelfMapError(ValidationError):
    pass


class NotContractionError(ValidationError):
    pass


class DominationViolationError(ValidationError):
    pass


class SscUndecidedError(ValidationError):
    """Cylinder enclosures of distinct first symbols touch or overlap at the
    checked depth; separation is neither certified nor refuted."""


@dataclass(frozen=True)
class TriangularSystem:
    """A validated system with its certified constants.

    d: lower bound on inf |g_y| over all maps (domination margin).
    delta: certified gap between first-symbol cylinder unions.
    contraction_sup: certified upper bound < 1 on the largest singular value.
    """

    maps: tuple[TriangularMap, ...]
    d: float
    delta: float
    contraction_sup: float
    range_depth: int
    ssc_depth: int

    @property
    def n_maps(self) -> int:
        return len(self.maps)


def _sigma_max(a: float, b: float, c: float) -> float:
    """Largest singular value of [[a, 0], [b, c]] for non-negative entries."""
    t = a * a + b * b + c * c
    det = a * c
    disc = max(t * t - 4.0 * det * det, 0.0)
    return math.sqrt(0.5 * (t + math.sqrt(disc)))


def _as_expression(e) -> Expression:
    return e if isinstance(e, Expression) else parse(str(e))


def validate(map_defs, range_depth: int = 6, ssc_depth: int = 3) -> TriangularSystem:
    """Certify the hypotheses of a triangular system and return it.

    `map_defs` is a sequence of (f, g) pairs, each an Expression or source
    text.  Checks run in a fixed order so the reported failure is
    deterministic: self-map, contraction, domination, then separation.
    """
    defs = [( _as_expression(f), _as_expression(g)) for f, g in map_defs]
    if len(defs) < 2:
        raise ValueError("a system needs at least 2 maps")
    for k, (f, g) in enumerate(defs):
        if f.uses_y:
            raise ValueError(f"map {k}: f must depend on x only (got {f.source!r})")

    maps = []
    for f, g in defs:
        try:
            fx = partial_range(f, "x", (UNIT, UNIT), range_depth)
            gx = partial_range(g, "x", (UNIT, UNIT), range_depth)
            gy = partial_range(g, "y", (UNIT, UNIT), range_depth)
            image = BoxEnclosure(range_bound(f, (UNIT, UNIT), range_depth),
                                 range_bound(g, (UNIT, UNIT), range_depth))
        except EvalDomainError as err:
            raise ValidationError(f"map ({f.source!r}, {g.source!r}) touches a singular domain: {err}") from err
        maps.append(TriangularMap(f=f, g=g, fx_range=fx, gx_range=gx, gy_range=gy, image=image))

    for k, tri in enumerate(maps):
        if not UNIT_BOX.contains_box(tri.image, _SELF_MAP_SLACK):
            raise NotSelfMapError(
                f"map {k}: image enclosure x={tri.image.x} y={tri.image.y} leaves the unit square")

    contraction_sup = 0.0
    for k, tri in enumerate(maps):
        bound = _sigma_max(tri.fx_range.abs_bounds()[1],
                           tri.gx_range.abs_bounds()[1],
                           tri.gy_range.abs_bounds()[1])
        if bound >= 1.0:
            raise NotContractionError(f"map {k}: singular-value bound {bound:.6g} >= 1")
        contraction_sup = max(contraction_sup, bound)

    d = math.inf
    for k, tri in enumerate(maps):
        inf_fx = tri.fx_range.abs_bounds()[0]
        inf_gy, sup_gy = tri.gy_range.abs_bounds()
        if not inf_fx > sup_gy:
            raise DominationViolationError(
                f"map {k}: inf|f_x| = {inf_fx:.6g} does not dominate sup|g_y| = {sup_gy:.6g} "
                f"(f_x in {tri.fx_range}, g_y in {tri.gy_range})")
        if inf_gy <= 0.0:
            raise DominationViolationError(f"map {k}: inf|g_y| = {inf_gy:.6g} is not bounded away from 0")
        d = min(d, inf_gy)

    system = TriangularSystem(maps=tuple(maps), d=d, delta=math.nan,
                              contraction_sup=contraction_sup,
                              range_depth=range_depth, ssc_depth=ssc_depth)
    delta = _separation_gap(system, ssc_depth)
    if delta <= 0.0:
        raise SscUndecidedError(
            f"cylinder enclosures of distinct first symbols touch at depth {ssc_depth}; "
            f"raise the depth or separate the maps")
    return TriangularSystem(maps=tuple(maps), d=d, delta=delta,
                            contraction_sup=contraction_sup,
                            range_depth=range_depth, ssc_depth=ssc_depth)


def _separation_gap(system: TriangularSystem, depth: int) -> float:
    """Min distance between depth-k cylinder enclosures grouped by first symbol."""
    n = system.n_maps
    words = np.indices((n,) * depth).reshape(depth, -1).T
    boxes = [cylinder_enclosure(system, w) for w in words]
    first = words[:, 0]
    gap = math.inf
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if first[i] == first[j]:
                continue
            gap = min(gap, boxes[i].distance(boxes[j]))
    return gap


# ---------------------------------------------------------------------------
# Word composition and the coding map
# ---------------------------------------------------------------------------


def apply_word(system: TriangularSystem, word, p) -> tuple[float, float]:
    """S_{w_1} o ... o S_{w_n} applied to p (rightmost symbol acts first)."""
    x, y = float(p[0]), float(p[1])
    for s in reversed(np.asarray(word, dtype=int)):
        tri = system.maps[s]
        x, y = float(evaluate(tri.f, x, y)), float(evaluate(tri.g, x, y))
    return x, y


def apply_words_batch(system: TriangularSystem, words: np.ndarray,
                      x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply each row of `words` to the matching entry of (x, y), vectorized."""
    x = np.array(x, dtype=float)
    y = np.array(y, dtype=float)
    for k in range(words.shape[1] - 1, -1, -1):
        x, y = _apply_maps_masked(system, words[:, k], x, y)
    return x, y


def _apply_maps_masked(system: TriangularSystem, symbols: np.ndarray,
                       x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xn = np.empty_like(x)
    yn = np.empty_like(y)
    for s, tri in enumerate(system.maps):
        msk = symbols == s
        if not msk.any():
            continue
        xs, ys = x[msk], y[msk]
        xn[msk] = evaluate(tri.f, xs, ys)
        yn[msk] = evaluate(tri.g, xs, ys)
    return xn, yn


def coding_depth(contraction_sup: float, tol: float) -> int:
    """Smallest n with contraction_sup**n * sqrt(2) <= tol."""
    if tol <= 0.0:
        raise ValueError("tol must be > 0")
    n = math.ceil(math.log(math.sqrt(2.0) / tol) / -math.log(contraction_sup))
    return max(1, n)


_CENTER = (0.5, 0.5)


def coding_map(system: TriangularSystem, seq, tol: float) -> tuple[float, float]:
    """Point of the attractor coded by `seq`, within tol of the true limit.

    Applies the prefix of length coding_depth(...) to the domain center, so the
    result is deterministic in (seq, tol).
    """
    seq = np.asarray(seq, dtype=int)
    n = coding_depth(system.contraction_sup, tol)
    if seq.size < n:
        raise ValueError(f"need at least {n} symbols for tol={tol:g}, got {seq.size}")
    return apply_word(system, seq[:n], _CENTER)


def cylinder_enclosure(system: TriangularSystem, word) -> BoxEnclosure:
    """Interval image of the unit square under S_w, clipped to the square.

    Clipping is sound because validated systems map the square into itself, and
    it keeps nested enclosures inside [0,1]^2 despite outward inflation.
    """
    word = np.asarray(word, dtype=int)
    if word.size == 0:
        raise ValueError("word must be non-empty")
    box = UNIT_BOX
    for s in word[::-1]:
        tri = system.maps[s]
        bx = range_bound(tri.f, (box.x, box.y), 0)
        by = range_bound(tri.g, (box.x, box.y), 0)
        box = BoxEnclosure(bx.intersect(UNIT), by.intersect(UNIT))
    return box


# ---------------------------------------------------------------------------
# Sampling the pushforward measure
# ---------------------------------------------------------------------------


def sample_coded(system: TriangularSystem, m, count: int, seed: int,
                 tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """Draw `count` words from `m` and their coded attractor points.

    Returns (words, points) with words of the coding length for `tol` and
    points of shape (count, 2).  Deterministic given the seed.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    n = coding_depth(system.contraction_sup, tol)
    rng = np.random.default_rng(seed)
    words = m.sample_words(n, count, rng)
    x = np.full(count, _CENTER[0])
    y = np.full(count, _CENTER[1])
    x, y = apply_words_batch(system, words, x, y)
    return words, np.column_stack([x, y])


def sample_attractor(system: TriangularSystem, m, count: int, seed: int) -> np.ndarray:
    """Equal-weight point cloud of count independent draws of the pushforward measure."""
    _, points = sample_coded(system, m, count, seed)
    return points
