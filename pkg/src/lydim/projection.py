"""The projected system on the horizontal axis and its dimension.

The horizontal components {f_i} form a conformal system on [0,1] that may
overlap even when the planar system is separated.  Under certified separation
the projected dimension has the classical entropy-over-exponent form; otherwise
it is estimated by interval-counting Monte Carlo, and the report says which
method produced the number.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .expr import Const, differentiate
from .ifs import TriangularSystem, cylinder_enclosure, sample_coded
from .measure import SymbolicMeasure

__all__ = [
    "SeparationReport",
    "ProjectedDimension",
    "check_projected_separation",
    "projected_dimension_exact",
    "estimate_projected_dimension_mc",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SeparationReport:
    """Outcome of the horizontal separation check.

    status is 'separated' (certified gap > 0), 'overlapping' (two depth-1
    exact affine images share an interval of positive length), or 'undecided'
    (enclosures touch; typical for exactly tiling branches).
    """

    status: str
    gap: float
    depth: int


def _affine_image(tri) -> tuple[float, float] | None:
    """Exact image of [0,1] under f when f is affine in x, else None."""
    d = differentiate(tri.f, "x")
    if not isinstance(d.root, Const):
        return None
    from .expr import evaluate

    a = float(evaluate(tri.f, 0.0, 0.0))
    b = float(evaluate(tri.f, 1.0, 0.0))
    return (a, b) if a <= b else (b, a)


def check_projected_separation(system: TriangularSystem, depth: int = 3) -> SeparationReport:
    """Classify the horizontal system from depth-k interval images."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    n = system.n_maps
    words = np.indices((n,) * depth).reshape(depth, -1).T
    xs = [cylinder_enclosure(system, w).x for w in words]
    first = words[:, 0]
    gap = np.inf
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            if first[i] == first[j]:
                continue
            gap = min(gap, xs[i].distance(xs[j]))
    if gap > 0.0:
        return SeparationReport(status="separated", gap=float(gap), depth=depth)

    images = [_affine_image(tri) for tri in system.maps]
    if all(img is not None for img in images):
        for i in range(n):
            for j in range(i + 1, n):
                overlap = min(images[i][1], images[j][1]) - max(images[i][0], images[j][0])
                if overlap > 1e-12:
                    return SeparationReport(status="overlapping", gap=0.0, depth=1)
    return SeparationReport(status="undecided", gap=0.0, depth=depth)


@dataclass(frozen=True)
class ProjectedDimension:
    """Dimension of the projected measure with the method that produced it."""

    t: float
    method: str  # 'exact_separated' or 'monte_carlo'
    stderr: float
    r_squared: float = 1.0


def projected_dimension_exact(system: TriangularSystem, m: SymbolicMeasure,
                              chi1: float) -> ProjectedDimension:
    """Entropy over the horizontal exponent, valid only under certified separation.

    chi1 must be the (negative) first Lyapunov exponent; comparability of the
    top singular value with the horizontal derivative makes it the exponent of
    the projected system as well.
    """
    sep = check_projected_separation(system, depth=system.ssc_depth)
    if sep.status != "separated":
        raise ValueError(f"projected system is {sep.status}, not certified separated")
    if not chi1 < 0.0:
        raise ValueError(f"chi1 must be negative, got {chi1}")
    t = m.entropy() / chi1
    if t > 1.0 + 1e-9:
        raise AssertionError(f"separated projection produced t = {t} > 1")
    return ProjectedDimension(t=min(max(t, 0.0), 1.0), method="exact_separated", stderr=0.0)


def _slope(logr: np.ndarray, logm: np.ndarray) -> tuple[float, float]:
    """Unweighted least-squares slope and R^2 of logm against logr."""
    A = np.vstack([logr, np.ones_like(logr)]).T
    coef, *_ = np.linalg.lstsq(A, logm, rcond=None)
    fit = A @ coef
    ss_res = float(np.sum((logm - fit) ** 2))
    ss_tot = float(np.sum((logm - logm.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


# counts below this are Poisson-dominated and excluded from the fit
_MIN_MEAN_COUNT = 30.0


def estimate_projected_dimension_mc(system: TriangularSystem, m: SymbolicMeasure,
                                    samples: int, radii, seed: int,
                                    probes: int = 256) -> ProjectedDimension:
    """Scaling exponent of interval masses of the projected measure.

    Draws `samples` horizontal coordinates, estimates the measure of the
    interval of width r around each probe point by the neighbour fraction
    (self excluded, counted by binary search on the sorted coordinates), and
    fits the least-squares slope of mean log-mass against log r.
    """
    radii = np.asarray(radii, dtype=float)
    if samples < 10 ** 3:
        raise ValueError("need samples >= 1e3")
    if radii.size < 3 or np.any(np.diff(radii) >= 0):
        raise ValueError("radii must be >= 3 strictly decreasing values")
    _, points = sample_coded(system, m, samples, seed)
    xs = np.sort(points[:, 0])
    rng = np.random.default_rng(seed + 1)
    probes = min(probes, samples)
    probe_x = points[rng.choice(samples, size=probes, replace=False), 0]

    counts = np.empty((radii.size, probes))
    for i, r in enumerate(radii):
        hi = np.searchsorted(xs, probe_x + 0.5 * r, side="right")
        lo = np.searchsorted(xs, probe_x - 0.5 * r, side="left")
        counts[i] = hi - lo - 1  # the probe itself always falls inside

    keep = counts.mean(axis=1) >= _MIN_MEAN_COUNT
    keep &= counts.min(axis=1) >= 1.0
    if keep.sum() < 2:
        raise ValueError("all radii dropped: too few samples for the radius grid")
    if not keep.all():
        log.warning("dropped %d of %d radii with degenerate counts", (~keep).sum(), radii.size)

    logr = np.log(radii[keep])
    logm = np.log(counts[keep] / (samples - 1))
    t_mean, r2 = _slope(logr, logm.mean(axis=1))
    per_probe = np.array([_slope(logr, logm[:, j])[0] for j in range(probes)])
    stderr = float(per_probe.std(ddof=1) / np.sqrt(probes))
    return ProjectedDimension(t=min(max(t_mean, 0.0), 1.0), method="monte_carlo",
                              stderr=stderr, r_squared=r2)
