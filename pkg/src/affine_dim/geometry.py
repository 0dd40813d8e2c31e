"""Planar affine IFS: bounding disk, natural projection, point clouds, SSC check and box counting.

Words are oldest-first, ``(i_-n, ..., i_-1)``; the point of a word is
``f_{i_-1} o ... o f_{i_-n}`` applied to a seed, so the *last* symbol names the
first-level piece ``f_i(Lambda)`` the point belongs to.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .matrix_core import Mat2, Word, batch_singular_values, index_to_word, stack
from .pressure import DEFAULT_WORD_BUDGET, BudgetExceededError, NonContractingError

SUPPORT_DIRECTIONS = 64
COINCIDENCE_TOL = 1e-9


class InsufficientResolutionError(ValueError):
    pass


@dataclass(frozen=True)
class AffineIFS:
    matrices: tuple[Mat2, ...]
    translations: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "matrices", tuple(self.matrices))
        object.__setattr__(self, "translations", tuple((float(x), float(y)) for x, y in self.translations))
        if len(self.matrices) != len(self.translations):
            raise ValueError("matrices and translations must have the same length")
        if not self.matrices:
            raise ValueError("empty IFS")
        for i, A in enumerate(self.matrices):
            if A.det == 0.0:
                raise NonContractingError(f"matrix {i} is singular")
            if A.norm >= 1.0:
                raise NonContractingError(f"matrix {i} has norm {A.norm:.6g} >= 1")

    @property
    def N(self) -> int:
        return len(self.matrices)

    @property
    def rho(self) -> float:
        return max(A.norm for A in self.matrices)

    def apply(self, i: int, p: Sequence[float]) -> np.ndarray:
        return self.matrices[i].as_array() @ np.asarray(p, dtype=float) + np.asarray(self.translations[i])

    def fixed_point(self, i: int) -> np.ndarray:
        return np.linalg.solve(np.eye(2) - self.matrices[i].as_array(), np.asarray(self.translations[i]))

    def _radius(self, c: np.ndarray) -> float:
        worst = max(
            float(np.linalg.norm(np.asarray(t) - (np.eye(2) - A.as_array()) @ c))
            for A, t in zip(self.matrices, self.translations)
        )
        return worst / (1.0 - self.rho)

    def bounding_disk(self) -> tuple[np.ndarray, float]:
        """Disk ``B(c, R)`` with ``f_i(B)`` inside ``B`` for every ``i``.

        ``R = max ||t_i - (I - A_i) c|| / (1 - max ||A_i||)``, minimised over ``c``
        by Nelder-Mead from the mean of the fixed points.
        """
        c0 = np.mean([self.fixed_point(i) for i in range(self.N)], axis=0)
        res = minimize(lambda c: self._radius(c), c0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14})
        c = res.x if self._radius(res.x) <= self._radius(c0) else c0
        return np.asarray(c, dtype=float), self._radius(c)


def natural_projection_2d(ifs: AffineIFS, word: Word, n: int | None = None) -> tuple[np.ndarray, float]:
    """``f_{i_-1} o ... o f_{i_-n}(c)`` and the error radius ``alpha1(A_{i_-1} ... A_{i_-n}) R``."""
    word = tuple(int(i) for i in word)
    n = len(word) if n is None else n
    c, R = ifs.bounding_disk()
    x = c.copy()
    P = Mat2(1.0, 0.0, 0.0, 1.0)
    for i in word[len(word) - n :]:
        x = ifs.apply(i, x)
        P = ifs.matrices[i] @ P
    return x, P.norm * R


@dataclass
class PointCloud:
    depth: int
    N: int
    points: np.ndarray
    radii: np.ndarray
    indices: np.ndarray
    center: np.ndarray
    radius: float
    rho: float = 0.5

    def word(self, k: int) -> Word:
        return index_to_word(int(self.indices[k]), self.depth, self.N)

    @property
    def last_symbols(self) -> np.ndarray:
        return self.indices % self.N

    def __len__(self) -> int:
        return len(self.points)


def _images(ifs: AffineIFS, n: int, seed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Points ``f_w(seed)`` and products ``A_{i_-1} ... A_{i_-n}`` for every depth-``n`` word."""
    mats = stack(ifs.matrices)
    trans = np.asarray(ifs.translations)
    pts = seed[None, :]
    prods = np.eye(2)[None]
    for _ in range(n):
        # newer symbol j is applied last: index u*N + j
        pts = (np.einsum("jab,ub->uja", mats, pts) + trans[None, :, :]).reshape(-1, 2)
        prods = np.einsum("jab,ubc->ujac", mats, prods).reshape(-1, 2, 2)
    return pts, prods


def point_cloud(
    ifs: AffineIFS,
    n: int,
    budget: int = DEFAULT_WORD_BUDGET,
    seed_point: Sequence[float] | None = None,
) -> PointCloud:
    """One point per depth-``n`` word, seeded at the disk centre unless ``seed_point`` is given."""
    if ifs.N**n > budget:
        raise BudgetExceededError(f"depth {n} needs {ifs.N**n} points, budget is {budget}")
    c, R = ifs.bounding_disk()
    seed = c if seed_point is None else np.asarray(seed_point, dtype=float)
    pts, prods = _images(ifs, n, seed)
    a1, _ = batch_singular_values(prods)
    return PointCloud(n, ifs.N, pts, a1 * R, np.arange(ifs.N**n), c, R, ifs.rho)


@dataclass
class SSCResult:
    status: str
    pair: tuple[int, int] | None = None
    depth: int = 0
    details: dict = field(default_factory=dict)


def _support(centers: np.ndarray, prods: np.ndarray, R: float, dirs: np.ndarray) -> np.ndarray:
    """Support values of the ellipses ``f_w(B)`` in each direction, shape ``(words, dirs)``."""
    lin = centers @ dirs.T
    # ||A_w^T u|| for each word and direction
    At_u = np.einsum("wba,da->wdb", prods, dirs)
    return lin + R * np.hypot(At_u[..., 0], At_u[..., 1])


def check_ssc(ifs: AffineIFS, n: int = 6, budget: int = 2**16) -> SSCResult:
    """Strong separation at cover depth ``<= n``.

    * ``verified``: for some depth the ellipse covers ``f_w(B)`` of two first-level
      pieces are separated, either as convex hulls or ellipse by ellipse, by
      one of 64 support directions;
    * ``violated``: two attractor points (seeded at a fixed point, hence exactly in
      the attractor) with different first-level symbols coincide;
    * ``undetermined``: neither, e.g. touching pieces.
    """
    N = ifs.N
    if N < 2:
        return SSCResult("verified", None, 0, {"reason": "single map"})
    c, R = ifs.bounding_disk()
    theta = 2 * np.pi * np.arange(SUPPORT_DIRECTIONS) / SUPPORT_DIRECTIONS
    dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    opposite = (np.arange(SUPPORT_DIRECTIONS) + SUPPORT_DIRECTIONS // 2) % SUPPORT_DIRECTIONS
    # a separating gap must beat rounding in the support values
    tol = 1e-12 * (R + float(np.abs(c).max()) + max(float(np.abs(t).max()) for t in ifs.translations))
    max_depth = n
    while max_depth > 1 and N**max_depth > budget:
        max_depth -= 1
    for d in range(1, max_depth + 1):
        centers, prods = _images(ifs, d, c)
        sup = _support(centers, prods, R, dirs)
        groups = [np.flatnonzero(np.arange(N**d) % N == i) for i in range(N)]
        hull = [sup[g].max(axis=0) for g in groups]
        separated = True
        for i in range(N):
            for j in range(i + 1, N):
                if np.any(hull[i] + hull[j][opposite] < -tol):
                    continue
                # ellipse by ellipse: every pair needs its own separating direction
                si, sj = sup[groups[i]], sup[groups[j]][:, opposite]
                gap = si[:, None, :] + sj[None, :, :]
                if not np.all(np.any(gap < -tol, axis=2)):
                    separated = False
                    break
            if not separated:
                break
        if separated:
            return SSCResult("verified", None, d)
    depth = max_depth
    seed = ifs.fixed_point(0)
    pts, _ = _images(ifs, depth, seed)
    last = np.arange(N**depth) % N
    scale = max(R, 1e-300)
    for i in range(N):
        tree = cKDTree(pts[last == i])
        for j in range(i + 1, N):
            dist, _ = tree.query(pts[last == j], k=1)
            if dist.min() <= COINCIDENCE_TOL * scale:
                return SSCResult("violated", (i, j), depth, {"distance": float(dist.min())})
    return SSCResult("undetermined", None, depth)


@dataclass
class BoxDimensionResult:
    slope: float
    intercept: float
    scales: list[float]
    counts: list[int]
    residuals: list[float]


def box_counts(points: np.ndarray, scale: float, corner: np.ndarray) -> int:
    cells = np.floor((points - corner) / scale).astype(np.int64)
    return len(np.unique(cells, axis=0))


def default_scales(cloud: PointCloud) -> list[float]:
    """Dyadic scales from ``R/4`` down to just above the cloud's error radius.

    Boxes coarser than an eighth of the disk diameter mostly measure edge effects.
    """
    scales = []
    s = cloud.radius / 4.0
    floor = max(float(cloud.radii.max()), 1e-12 * cloud.radius)
    while s > floor and len(scales) < 40:
        scales.append(s)
        s /= 2.0
    return scales


def box_dimension_estimate(cloud: PointCloud, scales: Sequence[float] | None = None) -> BoxDimensionResult:
    """Least-squares slope of ``log count`` against ``log(1/scale)``.

    Scales at which the count exceeds a quarter of the points are dropped since
    the sample no longer resolves the set there.
    """
    scales = sorted(default_scales(cloud) if scales is None else [float(s) for s in scales], reverse=True)
    if not scales:
        raise ValueError("no scales")
    err = float(cloud.radii.max())
    if err > scales[-1]:
        # the error radius shrinks by at least max||A_i|| per symbol
        need = math.ceil(math.log(scales[-1] / cloud.radius) / math.log(cloud.rho))
        raise InsufficientResolutionError(
            f"cloud error radius {err:.3g} exceeds smallest scale {scales[-1]:.3g}; need depth >= {need}"
        )
    corner = cloud.center - cloud.radius
    limit = max(1.0, len(cloud) / 4)
    used, counts = [], []
    for s in scales:
        k = box_counts(cloud.points, s, corner)
        if k > limit:
            continue
        used.append(s)
        counts.append(k)
    if len(used) < 2:
        raise InsufficientResolutionError("fewer than two usable scales; increase cloud depth")
    x = np.log(1.0 / np.array(used))
    y = np.log(np.array(counts, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return BoxDimensionResult(float(slope), float(intercept), used, counts, [float(r) for r in resid])


def _word_label(cloud: PointCloud, k: int) -> str:
    sep = "" if cloud.N <= 10 else "-"
    return sep.join(str(i) for i in cloud.word(k))


def export_csv(cloud: PointCloud, path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        fh.write("x,y,word\n")
        for k, (x, y) in enumerate(cloud.points):
            fh.write(f"{x:.17g},{y:.17g},{_word_label(cloud, k)}\n")
    return path


def export_svg(cloud: PointCloud, path: str | Path, size: int = 1000) -> Path:
    """Scatter plot; the bounding disk's square maps onto a ``size x size`` viewBox, y pointing up."""
    path = Path(path)
    lo = cloud.center - cloud.radius
    span = 2.0 * cloud.radius
    u = (cloud.points - lo) / span * size
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size} {size}" width="{size}" height="{size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        '<g fill="black">',
    ]
    for x, y in u:
        lines.append(f'<circle cx="{x:.3f}" cy="{size - y:.3f}" r="1"/>')
    lines += ["</g>", "</svg>", ""]
    path.write_text("\n".join(lines))
    return path
