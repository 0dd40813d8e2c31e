"""Dominated splitting: backward-invariant cones, direction fields and the domination rate.

Cones are closed arcs of the projective line, stored as a start angle and a
counter-clockwise width. Word conventions (symbols 0-based):

* the strong-stable direction of a one-sided future ``(i0, i1, ...)`` is
  ``A[i0]^-1 ... A[i_{n-1}]^-1`` applied to a line of the cone ``M``;
* the stable direction of a past stored oldest-first ``(i_-n, ..., i_-1)`` is
  ``A[i_-1] ... A[i_-n]`` applied to a line of the complement of ``M``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .matrix_core import Mat2, ProjPoint, Word, all_word_log_dets, all_word_products, angle
from .pressure import DEFAULT_WORD_BUDGET, check_budget, word_log_singular_values

log = logging.getLogger(__name__)

PI = math.pi
SAMPLE_POINTS = 4096
REFINEMENT_ROUNDS = 64


class InvalidCertificateError(ValueError):
    pass


@dataclass(frozen=True)
class Cone:
    """Closed projective arc ``[start, start + width]`` (angles mod pi)."""

    start: float
    width: float

    def __post_init__(self):
        if not 0.0 < self.width < PI:
            raise ValueError(f"cone width must lie in (0, pi), got {self.width}")
        object.__setattr__(self, "start", self.start % PI)

    @property
    def end(self) -> float:
        return (self.start + self.width) % PI

    @property
    def boundary(self) -> tuple[ProjPoint, ProjPoint]:
        return ProjPoint(self.start), ProjPoint(self.end)

    @property
    def bisector(self) -> ProjPoint:
        return ProjPoint(self.start + 0.5 * self.width)

    def complement(self) -> "Cone":
        return Cone(self.start + self.width, PI - self.width)

    def offset(self, theta: float) -> float:
        return (theta - self.start) % PI

    def contains(self, theta: float, strict: bool = False) -> bool:
        t = self.offset(theta)
        if strict:
            return 0.0 < t < self.width
        return t <= self.width

    def depth(self, theta: float) -> float:
        """Distance from ``theta`` to the boundary; negative outside."""
        t = self.offset(theta)
        if t <= self.width:
            return min(t, self.width - t)
        return -min(t - self.width, PI - t)

    def sample(self, m: int) -> np.ndarray:
        return self.start + self.width * np.linspace(0.0, 1.0, m)

    def image(self, B: Mat2) -> "Cone":
        """Image arc ``B(self)``; endpoints go to endpoints, swapped when ``det < 0``."""
        v1 = (math.cos(self.start), math.sin(self.start))
        v2 = (math.cos(self.start + self.width), math.sin(self.start + self.width))
        Bv1, Bv2 = B.apply(v1), B.apply(v2)
        det = B.det
        w = math.atan2(abs(det) * math.sin(self.width), Bv1[0] * Bv2[0] + Bv1[1] * Bv2[1])
        first = Bv1 if det > 0 else Bv2
        return Cone(math.atan2(first[1], first[0]), w)

    def inner_margin(self, other: "Cone") -> float:
        """Margin by which ``other`` sits inside the interior of ``self`` (<= 0 if not)."""
        t = self.offset(other.start)
        if t >= self.width:
            return -1.0
        return min(t, self.width - t - other.width)


@dataclass
class SplittingCertificate:
    cone: Cone
    margin: float
    beta: float
    C_gap: float
    C_est: float
    method: str
    per_depth: list[float] = field(default_factory=list)
    n_matrices: int = 0

    ok = True

    @property
    def multicone(self) -> list[Cone]:
        return [self.cone]

    @property
    def angle_lower_bound(self) -> float:
        """Lower bound for the angle between stable and strong-stable directions."""
        return self.margin

    def error_bound(self, n: int) -> float:
        return self.C_gap * math.exp(-self.beta * n)


@dataclass
class SplittingFailure:
    status: str
    reason: str
    diagnostics: dict = field(default_factory=dict)

    ok = False


def _hull(arcs: Sequence[Cone]) -> Cone | None:
    """Smallest arc containing every arc, i.e. the circle minus the largest gap."""
    best_gap, best_start = 0.0, None
    for a in arcs:
        e = a.start + a.width
        if any(b is not a and b.offset(e) < b.width for b in arcs):
            continue
        gap = min((b.start - e) % PI for b in arcs)
        if gap > best_gap:
            best_gap, best_start = gap, e + gap
    if best_start is None or best_gap <= 1e-12:
        return None
    width = PI - best_gap
    if width <= 0.0:
        return Cone(best_start, 1e-12)
    return Cone(best_start, width)


def _check_cone(system: Sequence[Mat2], cone: Cone) -> float:
    """Exact arc-arithmetic margin of ``A^-1(cone)`` inside ``cone``."""
    return min(cone.inner_margin(cone.image(A.inverse())) for A in system)


def sampled_invariance(system: Sequence[Mat2], cone: Cone, m: int = SAMPLE_POINTS) -> bool:
    """Every sampled line of ``cone`` maps strictly inside it under each inverse."""
    thetas = cone.sample(m)
    vecs = np.stack([np.cos(thetas), np.sin(thetas)])
    for A in system:
        img = A.inverse().as_array() @ vecs
        off = (np.arctan2(img[1], img[0]) - cone.start) % PI
        if not np.all((off > 0.0) & (off < cone.width)):
            return False
    return True


def _repelling_axis(A: Mat2) -> float:
    vals, vecs = np.linalg.eig(A.as_array())
    if np.all(np.isreal(vals)) and abs(abs(vals[0]) - abs(vals[1])) > 1e-12:
        v = np.real(vecs[:, int(np.argmax(np.abs(vals)))])
    else:
        # complex or equal-modulus eigenvalues: fall back to the top right-singular direction
        v = np.linalg.svd(A.as_array())[2][0]
    return math.atan2(v[1], v[0])


def _quadrant_cone() -> Cone:
    # {xy <= 0}: lines with angle in [pi/2, pi]
    return Cone(PI / 2, PI / 2)


def default_domination_depth(N: int) -> int:
    if N < 2:
        return 10
    return max(2, min(10, int(16 * math.log(2) / math.log(N))))


def estimate_domination(
    system: Sequence[Mat2], n_max: int | None = None, budget: int = DEFAULT_WORD_BUDGET
) -> tuple[float, float, list[float]]:
    """Fit ``m_n = min_w log(alpha1/alpha2)(A_w) ~ log C + beta n`` over the upper half of depths.

    Returns ``(beta, C_est, [m_1, ..., m_nmax])``. A non-positive slope is
    logged as "no domination".
    """
    if n_max is None:
        n_max = default_domination_depth(len(system))
    check_budget(len(system), n_max, budget)
    per_depth = []
    for n in range(1, n_max + 1):
        la1, la2 = word_log_singular_values(system, n, budget)
        per_depth.append(float(np.min(la1 - la2)))
    if any(b < a - 1e-12 for a, b in zip(per_depth, per_depth[1:])):
        log.warning("minimal singular-value gap decreased with depth")
    lo = max(1, n_max // 2)
    ns = np.arange(lo, n_max + 1, dtype=float)
    ms = np.array(per_depth[lo - 1 :])
    if len(ns) >= 2:
        beta, intercept = np.polyfit(ns, ms, 1)
    else:
        beta, intercept = ms[0], 0.0
    beta = float(beta)
    if beta <= 1e-8:
        log.warning("no domination: fitted gap rate %.3g", beta)
    return beta, float(math.exp(intercept)), per_depth


def _arc_widths(cone: Cone, mats: np.ndarray, log_dets: np.ndarray) -> np.ndarray:
    """Widths of ``B(cone)`` for a batch of matrices with known ``log|det B|``."""
    v1 = np.array([math.cos(cone.start), math.sin(cone.start)])
    v2 = np.array([math.cos(cone.start + cone.width), math.sin(cone.start + cone.width)])
    Bv1 = mats @ v1
    Bv2 = mats @ v2
    dot = np.einsum("wi,wi->w", Bv1, Bv2)
    return np.arctan2(np.exp(log_dets) * math.sin(cone.width), dot)


def _adjugates(prods: np.ndarray) -> np.ndarray:
    adj = np.empty_like(prods)
    adj[:, 0, 0] = prods[:, 1, 1]
    adj[:, 1, 1] = prods[:, 0, 0]
    adj[:, 0, 1] = -prods[:, 0, 1]
    adj[:, 1, 0] = -prods[:, 1, 0]
    return adj


def calibrate_gap_constant(
    system: Sequence[Mat2], cone: Cone, beta: float, n_cal: int | None = None
) -> float:
    """Smallest ``C`` with ``width <= C e^{-beta n}`` for every cone image up to ``n_cal``.

    The image arcs ``A_w^{-1}(M)`` and ``A_w(closure of M^c)`` contain the exact
    directions and every seed's image, so their widths bound the truncation error.
    """
    N = len(system)
    if n_cal is None:
        n_cal = max(1, min(8, int(14 * math.log(2) / math.log(N)))) if N > 1 else 8
    comp = cone.complement()
    C = 0.0
    for n in range(1, n_cal + 1):
        ld = all_word_log_dets(system, n)
        fwd = all_word_products(system, n, "forward")
        # adj(P) is det(P) P^-1, the same projective map as P^-1
        w_ss = _arc_widths(cone, _adjugates(fwd), ld)
        rev = all_word_products(system, n, "reversed")
        w_s = _arc_widths(comp, rev, ld)
        width = float(max(w_ss.max(), w_s.max()))
        C = max(C, width * math.exp(beta * n))
    return C


def _refine(system: Sequence[Mat2], K: Cone) -> tuple[Cone | None, str, dict]:
    for rnd in range(REFINEMENT_ROUNDS):
        images = [K.image(A.inverse()) for A in system]
        if min(K.inner_margin(im) for im in images) > 0.0:
            return K, f"iterated({rnd})", {}
        hull = _hull(images)
        if hull is None:
            return None, "", {"round": rnd, "why": "inverse images cover the projective line"}
        # a slightly fattened hull gives the next candidate positive room
        pad = min(1e-3, 0.25 * (PI - hull.width))
        K = Cone(hull.start - pad, min(PI - 1e-9, hull.width + 2 * pad))
    return None, "", {"round": REFINEMENT_ROUNDS, "why": "no invariant cone after refinement"}


def find_backward_invariant_multicone(
    system: Sequence[Mat2], n_max: int | None = None
) -> SplittingCertificate | SplittingFailure:
    """Search for a single cone ``M`` with ``A_i^-1(M)`` inside the interior of ``M`` for all ``i``."""
    if not system:
        return SplittingFailure("undetermined", "empty system")
    for A in system:
        if A.det == 0.0:
            return SplittingFailure("undetermined", "singular matrix")
    cone, method = None, ""
    if all(A.is_sign_definite() for A in system):
        cand = _quadrant_cone()
        if _check_cone(system, cand) > 0.0:
            cone, method = cand, "quadrant"
    diagnostics: dict = {}
    if cone is None:
        axis = _repelling_axis(system[0])
        # thick neighbourhoods first: they give larger margins when they work
        for eps in (PI / 4, PI / 8, PI / 16, 1e-2, 1e-3):
            cone, method, diagnostics = _refine(system, Cone(axis + eps, PI - 2 * eps))
            if cone is not None:
                break
    if cone is None:
        return SplittingFailure(
            "undetermined",
            "no backward-invariant single cone found; domination not excluded",
            diagnostics,
        )
    margin = _check_cone(system, cone)
    if margin <= 0.0 or not sampled_invariance(system, cone):
        return SplittingFailure("undetermined", "candidate cone failed verification", {"margin": margin})
    beta, C_est, per_depth = estimate_domination(system, n_max)
    if beta <= 0.0:
        return SplittingFailure("undetermined", "no domination", {"beta": beta})
    C_gap = calibrate_gap_constant(system, cone, beta)
    return SplittingCertificate(cone, margin, beta, C_gap, C_est, method, per_depth, len(system))


def _require(cert, system) -> SplittingCertificate:
    if not isinstance(cert, SplittingCertificate) or cert.margin <= 0.0 or cert.beta <= 0.0:
        raise InvalidCertificateError("invalid splitting certificate")
    if cert.n_matrices and cert.n_matrices != len(system):
        raise InvalidCertificateError("certificate belongs to a different system")
    return cert


def push_pair(
    mats: Sequence[Mat2], v: Sequence[float], w: Sequence[float]
) -> tuple[np.ndarray, np.ndarray, float]:
    """Apply ``mats[-1] ... mats[0]`` (``mats[0]`` first) to ``v`` and ``w``.

    Returns the unit images and the angle between them. The sine of that
    angle is carried as ``prod|det| * |v x w| / (|Bv||Bw|)`` in log form, so
    angles far below machine epsilon are still resolved.
    """
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    log_sin = math.log(abs(v[0] * w[1] - v[1] * w[0])) - math.log(np.hypot(*v)) - math.log(np.hypot(*w))
    v = v / np.hypot(*v)
    w = w / np.hypot(*w)
    for A in mats:
        M = A.as_array()
        v, w = M @ v, M @ w
        nv, nw = np.hypot(*v), np.hypot(*w)
        log_sin += math.log(abs(A.det)) - math.log(nv) - math.log(nw)
        v, w = v / nv, w / nw
    cos = abs(float(v @ w))
    return v, w, math.atan2(math.exp(log_sin), cos)


def _ss_mats(system: Sequence[Mat2], word: Word, n: int) -> list[Mat2]:
    # A[i0]^-1 ... A[i_{n-1}]^-1: the innermost inverse acts first
    return [system[i].inverse() for i in reversed(word[:n])]


def _s_mats(system: Sequence[Mat2], word: Word, n: int) -> list[Mat2]:
    # oldest-first past: A[i_-n] acts first
    return [system[i] for i in word[len(word) - n :]]


def _check_depth(word: Word, n: int) -> tuple[int, ...]:
    word = tuple(int(i) for i in word)
    if not 0 <= n <= len(word):
        raise ValueError(f"depth {n} exceeds word length {len(word)}")
    return word


def strong_stable_direction(
    system: Sequence[Mat2], word: Word, n: int, cert: SplittingCertificate, seed: ProjPoint | None = None
) -> tuple[ProjPoint, float]:
    """Approximate ``e^ss`` of a future starting with ``word``; error bound ``C_gap e^{-beta n}``."""
    cert = _require(cert, system)
    word = _check_depth(word, n)
    v = np.array((seed or cert.cone.bisector).vector)
    for B in _ss_mats(system, word, n):
        v = B.as_array() @ v
        v /= np.hypot(*v)
    return ProjPoint.from_vector(v), cert.error_bound(n)


def stable_direction(
    system: Sequence[Mat2], word: Word, n: int, cert: SplittingCertificate, seed: ProjPoint | None = None
) -> tuple[ProjPoint, float]:
    """Approximate ``e^s`` of a past whose last ``n`` symbols are ``word[-n:]`` (oldest first)."""
    cert = _require(cert, system)
    word = _check_depth(word, n)
    v = np.array((seed or cert.cone.complement().bisector).vector)
    for A in _s_mats(system, word, n):
        v = A.as_array() @ v
        v /= np.hypot(*v)
    return ProjPoint.from_vector(v), cert.error_bound(n)


def seed_disagreement(
    system: Sequence[Mat2], word: Word, n: int, cert: SplittingCertificate, kind: str = "ss"
) -> float:
    """Angle between the images of the two boundary lines of the seed cone."""
    cert = _require(cert, system)
    word = _check_depth(word, n)
    if kind == "ss":
        cone, mats = cert.cone, _ss_mats(system, word, n)
    elif kind == "s":
        cone, mats = cert.cone.complement(), _s_mats(system, word, n)
    else:
        raise ValueError(f"unknown direction kind {kind!r}")
    b0, b1 = cone.boundary
    return push_pair(mats, b0.vector, b1.vector)[2]


def strong_stable_angle(
    system: Sequence[Mat2], word_i: Word, word_j: Word, n: int, cert: SplittingCertificate
) -> float:
    """Angle between the depth-``n`` strong-stable approximations of two futures.

    The common prefix is applied to both tails jointly so the result keeps
    relative accuracy even when it is far below machine epsilon.
    """
    cert = _require(cert, system)
    word_i = _check_depth(word_i, n)
    word_j = _check_depth(word_j, n)
    k = 0
    while k < n and word_i[k] == word_j[k]:
        k += 1
    if k == n:
        return 0.0
    x = strong_stable_direction(system, word_i[k:n], n - k, cert)[0]
    y = strong_stable_direction(system, word_j[k:n], n - k, cert)[0]
    if angle(x, y) == 0.0:
        return 0.0
    return push_pair(_ss_mats(system, word_i, k), x.vector, y.vector)[2]


@dataclass
class HolderReport:
    depth: int
    max_angles: list[float]
    C_fit: float
    slope: float | None
    beta: float
    passed: bool


def holder_direction_check(
    system: Sequence[Mat2], cert: SplittingCertificate, n: int, m: int, rng: np.random.Generator | None = None
) -> HolderReport:
    """Sample ``m`` pairs of futures agreeing on exactly ``k`` symbols (``k = 0..n-1``).

    Checks that the worst strong-stable angle per ``k`` decays at least like
    ``e^{-beta k / 2}`` and fits ``C_fit = max_k angle_k e^{beta k}``.
    """
    cert = _require(cert, system)
    rng = rng or np.random.default_rng(0)
    N = len(system)
    max_angles = [0.0] * n
    for t in range(m):
        k = t % n
        i = rng.integers(0, N, size=n)
        j = rng.integers(0, N, size=n)
        j[:k] = i[:k]
        if j[k] == i[k]:
            j[k] = (i[k] + 1 + rng.integers(0, N - 1)) % N if N > 1 else i[k]
        a = strong_stable_angle(system, tuple(i), tuple(j), n, cert)
        max_angles[k] = max(max_angles[k], a)
    C_fit = max(a * math.exp(cert.beta * k) for k, a in enumerate(max_angles))
    pts = [(k, math.log(a)) for k, a in enumerate(max_angles) if a > 0.0]
    slope = None
    passed = True
    if len(pts) >= 2:
        ks, la = zip(*pts)
        slope = float(np.polyfit(ks, la, 1)[0])
        passed = slope <= -cert.beta / 2
    return HolderReport(n, max_angles, C_fit, slope, cert.beta, passed)
