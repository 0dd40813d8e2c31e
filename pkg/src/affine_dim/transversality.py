"""Induced interval maps of sign-definite matrices and the translation-family transversality argument.

In the coordinate ``x -> line (x - 1, x)`` of the quadrant cone ``{xy <= 0}``,
a sign-definite matrix ``A`` acts by ``A^-1`` as the Möbius map ``S(., A)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .matrix_core import Mat2, ProjPoint, Word, angle, singular_values
from .splitting import SplittingCertificate, strong_stable_direction

M_RATIO = 0.5
N_TOL = 1e-12


class SignIndefiniteError(ValueError):
    pass


class NonContractingMapError(ValueError):
    pass


class PerturbationWarning(UserWarning):
    pass


def _require_sign_definite(A: Mat2) -> None:
    if not A.is_sign_definite():
        raise SignIndefiniteError("matrix must be entrywise positive or entrywise negative")


def s_map(A: Mat2, x):
    """``(|a| x + |c| (1-x)) / ((|a|+|b|) x + (|c|+|d|) (1-x))``; accepts scalars or arrays."""
    _require_sign_definite(A)
    a, b, c, d = (abs(v) for v in A.flat())
    return (a * x + c * (1 - x)) / ((a + b) * x + (c + d) * (1 - x))


def s_map_derivative(A: Mat2, x):
    _require_sign_definite(A)
    a, b, c, d = (abs(v) for v in A.flat())
    den = (a + b) * x + (c + d) * (1 - x)
    return (a * d - b * c) / den**2


def derivative_bounds(A: Mat2) -> tuple[float, float]:
    """``(inf |S'|, sup |S'|) = (|det|/||A||_inf^2, |det|/|||A|||^2)``, attained at the endpoints."""
    _require_sign_definite(A)
    det = abs(A.det)
    return det / A.inf_norm**2, det / A.min_row_norm**2


@dataclass
class IntervalMapSystem:
    matrices: tuple[Mat2, ...]
    derivative_ranges: tuple[tuple[float, float], ...]

    @classmethod
    def from_system(cls, system: Sequence[Mat2]) -> "IntervalMapSystem":
        return cls(tuple(system), tuple(derivative_bounds(A) for A in system))

    @property
    def contraction(self) -> float:
        return max(hi for _, hi in self.derivative_ranges)

    def __len__(self) -> int:
        return len(self.matrices)

    def __call__(self, i: int, x):
        return s_map(self.matrices[i], x)


def _as_interval_system(system) -> IntervalMapSystem:
    if isinstance(system, IntervalMapSystem):
        return system
    return IntervalMapSystem.from_system(system)


def in_class_M(A: Mat2) -> bool:
    if not A.is_sign_definite():
        return False
    ratio = abs(A.det) / A.min_row_norm**2
    return 0.0 < ratio < M_RATIO and A.norm < 1.0


def n_quantity(A: Mat2) -> float:
    """``||A^-1|| ||A||^2 = alpha1^2 / alpha2``."""
    a1, a2 = singular_values(A)
    return a1 * a1 / a2


@dataclass
class ClassMembership:
    M: bool
    N: bool
    O: bool | None
    O_relaxed: bool | None
    measured: dict[str, float] = field(default_factory=dict)


def class_membership(system, s0: float | None = None) -> ClassMembership:
    """Flags for ``M`` (every matrix), the ``N`` inequality (every matrix) and the ``O_N`` bounds on ``s0``.

    ``N`` reports the inequality ``||A^-1|| ||A||^2 <= 1`` only; membership of
    the class itself also needs ``M``.
    """
    if isinstance(system, Mat2):
        system = [system]
    ratios = [abs(A.det) / A.min_row_norm**2 if A.min_row_norm > 0 else math.inf for A in system]
    nq = [n_quantity(A) for A in system]
    measured = {
        "max_det_ratio": max(ratios),
        "max_norm": max(A.norm for A in system),
        "max_n_quantity": max(nq),
    }
    O = O_rel = None
    if s0 is not None:
        measured["s0"] = s0
        O, O_rel = s0 > 5.0 / 3.0, s0 > 1.5
    return ClassMembership(
        M=all(in_class_M(A) for A in system),
        N=all(q <= 1.0 + N_TOL for q in nq),
        O=O,
        O_relaxed=O_rel,
        measured=measured,
    )


def perturbation_matrix(A: Mat2) -> Mat2:
    """``B = [[a+b, -(a+b)], [c+d, -(c+d)]]``, so that ``S(x, A + tB) = S(x, A) + t``."""
    p, q = A.a + A.b, A.c + A.d
    return Mat2(p, -p, q, -q)


def perturbation_family(system: Sequence[Mat2], t: Sequence[float]) -> list[Mat2]:
    if len(t) != len(system):
        raise ValueError("one parameter per matrix required")
    for A in system:
        _require_sign_definite(A)
    out = [A + perturbation_matrix(A).scale(float(ti)) for A, ti in zip(system, t)]
    if not all(in_class_M(A) for A in out):
        warnings.warn("perturbed system leaves the class M", PerturbationWarning, stacklevel=2)
    return out


def natural_projection_1d(system, word: Word, n: int | None = None, seed: float = 0.5) -> tuple[float, float]:
    """``S_{w0} o ... o S_{w_{n-1}}(seed)`` and the bound ``prod sup|S'|`` on its distance to ``Pi``."""
    ims = _as_interval_system(system)
    word = tuple(int(i) for i in word)
    n = len(word) if n is None else n
    if n > len(word):
        raise ValueError("depth exceeds word length")
    if ims.contraction >= 1.0:
        raise NonContractingMapError(f"sup|S'| = {ims.contraction:.6g} >= 1")
    x = seed
    err = 1.0
    for i in reversed(word[:n]):
        x = ims(i, x)
        err *= ims.derivative_ranges[i][1]
    return float(x), err


def projection_direction(x: float) -> ProjPoint:
    """The line spanned by ``(x - 1, x)``."""
    return ProjPoint.from_vector((x - 1.0, x))


def fixed_point(A: Mat2) -> float:
    """Fixed point of ``S(., A)`` in ``[0, 1]`` from the quadratic ``x D(x) = N(x)``."""
    _require_sign_definite(A)
    a, b, c, d = (abs(v) for v in A.flat())
    # ((a+b) - (c+d)) x^2 + ((c+d) - a + c) x - c = 0
    qa, qb, qc = (a + b) - (c + d), (c + d) - a + c, -c
    if abs(qa) < 1e-15:
        return -qc / qb
    disc = math.sqrt(qb * qb - 4 * qa * qc)
    roots = [(-qb + disc) / (2 * qa), (-qb - disc) / (2 * qa)]
    inside = [r for r in roots if -1e-12 <= r <= 1 + 1e-12]
    return min(max(inside[0], 0.0), 1.0)


@dataclass
class CrosscheckReport:
    depth: int
    max_angle: float
    bound: float
    angles: list[float]
    passed: bool


def ess_vs_pi_crosscheck(
    system: Sequence[Mat2],
    cert: SplittingCertificate,
    n: int,
    m: int,
    rng: np.random.Generator | None = None,
    seed_x: float = 0.0,
) -> CrosscheckReport:
    """Angle between the cone-based ``e^ss`` and the line of ``Pi`` over ``m`` random depth-``n`` words.

    ``Pi`` is seeded at ``seed_x`` (default 0, the line ``e1``), not at the cone
    bisector, so the two routes start from different lines. The bound is
    ``C_gap e^{-beta n} + 2 err_Pi`` plus a rounding floor; the factor 2 is the
    Lipschitz constant of ``x -> line (x-1, x)``.
    """
    rng = rng or np.random.default_rng(0)
    ims = IntervalMapSystem.from_system(system)
    N = len(system)
    angles = []
    bound = 0.0
    for _ in range(m):
        w = tuple(int(i) for i in rng.integers(0, N, size=n))
        ess, err_ss = strong_stable_direction(system, w, n, cert)
        x, err_pi = natural_projection_1d(ims, w, n, seed_x)
        angles.append(angle(ess, projection_direction(x)))
        bound = max(bound, err_ss + 2.0 * err_pi + 1e-14)
    max_angle = max(angles)
    return CrosscheckReport(n, max_angle, bound, angles, max_angle <= bound)


@dataclass
class TransversalityCertificate:
    certified: bool
    delta: float
    contraction: float
    derivative_bound: float
    fd_min: float | None
    pairs_checked: int
    reason: str = ""

    def __iter__(self):
        return iter((self.certified, self.delta))


def _pi_perturbed(system, t, word, depth) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PerturbationWarning)
        fam = perturbation_family(system, t)
    return natural_projection_1d(fam, word, depth)[0]


def _delta_radius(system: Sequence[Mat2], steps: int = 20) -> float:
    """Largest ``delta`` in ``[0, 1]`` (bisection) with ``A_i + t B_i`` in ``M`` for ``|t| <= delta``.

    Entries are affine in ``t`` and the norm is convex, so checking ``t = +-delta`` suffices.
    """

    def ok(delta: float) -> bool:
        for A in system:
            B = perturbation_matrix(A)
            if not (in_class_M(A + B.scale(delta)) and in_class_M(A + B.scale(-delta))):
                return False
        return True

    if not ok(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    if ok(hi):
        return hi
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def certify_translation_transversality(
    system: Sequence[Mat2],
    pairs: int = 100,
    depth: int = 40,
    rng: np.random.Generator | None = None,
    h: float = 1e-6,
) -> TransversalityCertificate:
    """Certify transversality of ``t -> {A_i + t_i B_i}`` through the half-contraction criterion.

    With ``c = max sup|S'| < 1/2`` the derivative of ``Pi^t(i) - Pi^t(j)`` along
    ``(e_{i0} - e_{j0})/2`` is at least ``1 - c/(1-c) > 0`` whenever
    ``i0 != j0``; this is checked by central differences on random pairs.
    """
    if not all(A.is_sign_definite() for A in system):
        return TransversalityCertificate(False, 0.0, math.nan, math.nan, None, 0, "sign-indefinite matrix")
    if len(system) < 2:
        return TransversalityCertificate(False, 0.0, math.nan, math.nan, None, 0, "need at least two maps")
    ims = IntervalMapSystem.from_system(system)
    c = ims.contraction
    lower = 1.0 - c / (1.0 - c) if c < 1.0 else -math.inf
    if not c < M_RATIO:
        return TransversalityCertificate(False, 0.0, c, lower, None, 0, f"contraction {c:.6g} >= 1/2")
    if not all(in_class_M(A) for A in system):
        return TransversalityCertificate(False, 0.0, c, lower, None, 0, "system not in class M")
    rng = rng or np.random.default_rng(0)
    N = len(system)
    fd_min = math.inf
    for _ in range(pairs):
        i = rng.integers(0, N, size=depth)
        j = rng.integers(0, N, size=depth)
        if j[0] == i[0]:
            j[0] = (i[0] + 1 + rng.integers(0, N - 1)) % N
        u = np.zeros(N)
        u[i[0]] += 0.5
        u[j[0]] -= 0.5
        wi, wj = tuple(int(x) for x in i), tuple(int(x) for x in j)
        plus = _pi_perturbed(system, h * u, wi, depth) - _pi_perturbed(system, h * u, wj, depth)
        minus = _pi_perturbed(system, -h * u, wi, depth) - _pi_perturbed(system, -h * u, wj, depth)
        fd_min = min(fd_min, (plus - minus) / (2 * h))
    delta = _delta_radius(system)
    # finite differences carry O(h^2 + eps/h) error
    certified = fd_min >= lower - 1e-6 and lower > 0.0
    reason = "" if certified else "finite-difference derivative below the analytic bound"
    return TransversalityCertificate(certified, delta, c, lower, fd_min, pairs, reason)
