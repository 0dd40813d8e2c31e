"""2x2 linear algebra and projective-line primitives.

Everything here is closed form. Matrices are immutable ``Mat2`` values; batch
helpers work on ``(..., 2, 2)`` numpy arrays for the word-enumeration code in
the other modules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Word = tuple[int, ...]


class SingularMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class Mat2:
    """Real 2x2 matrix ``[[a, b], [c, d]]``."""

    a: float
    b: float
    c: float
    d: float

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Mat2":
        (a, b), (c, d) = rows
        return cls(float(a), float(b), float(c), float(d))

    @classmethod
    def from_flat(cls, entries: Sequence[float]) -> "Mat2":
        a, b, c, d = entries
        return cls(float(a), float(b), float(c), float(d))

    @classmethod
    def from_array(cls, arr) -> "Mat2":
        arr = np.asarray(arr, dtype=float)
        return cls(float(arr[0, 0]), float(arr[0, 1]), float(arr[1, 0]), float(arr[1, 1]))

    @classmethod
    def diag(cls, p: float, q: float) -> "Mat2":
        return cls(float(p), 0.0, 0.0, float(q))

    @classmethod
    def rotation(cls, theta: float, scale: float = 1.0) -> "Mat2":
        co, si = math.cos(theta), math.sin(theta)
        return cls(scale * co, -scale * si, scale * si, scale * co)

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def flat(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def inverse(self) -> "Mat2":
        det = self.det
        if det == 0.0:
            raise SingularMatrixError("singular matrix")
        return Mat2(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def transpose(self) -> "Mat2":
        return Mat2(self.a, self.c, self.b, self.d)

    def __matmul__(self, other: "Mat2") -> "Mat2":
        if not isinstance(other, Mat2):
            return NotImplemented
        return Mat2(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __add__(self, other: "Mat2") -> "Mat2":
        return Mat2(self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d)

    def scale(self, t: float) -> "Mat2":
        return Mat2(t * self.a, t * self.b, t * self.c, t * self.d)

    def apply(self, v: Sequence[float]) -> tuple[float, float]:
        x, y = v
        return (self.a * x + self.b * y, self.c * x + self.d * y)

    def singular_values(self) -> tuple[float, float]:
        return singular_values(self)

    @property
    def norm(self) -> float:
        """Operator 2-norm, i.e. the larger singular value (defined for singular matrices too)."""
        return 0.5 * (math.hypot(self.a + self.d, self.b - self.c) + math.hypot(self.a - self.d, self.b + self.c))

    @property
    def inf_norm(self) -> float:
        """Max absolute row sum."""
        return max(abs(self.a) + abs(self.b), abs(self.c) + abs(self.d))

    @property
    def min_row_norm(self) -> float:
        """Min absolute row sum (the ``|||A|||`` quantity of the matrix classes)."""
        return min(abs(self.a) + abs(self.b), abs(self.c) + abs(self.d))

    def is_positive(self) -> bool:
        return min(self.flat()) > 0.0

    def is_negative(self) -> bool:
        return max(self.flat()) < 0.0

    def is_sign_definite(self) -> bool:
        return self.is_positive() or self.is_negative()


def singular_values(A: Mat2) -> tuple[float, float]:
    """Closed-form singular values ``(alpha_1, alpha_2)`` with ``alpha_1 >= alpha_2``.

    ``alpha_1`` comes from the half-sum of the norms of the conformal and
    anticonformal parts of ``A``; ``alpha_2`` is recovered as ``|det| / alpha_1``
    so that the product identity holds to rounding and small values keep full
    relative accuracy.
    """
    det = A.det
    if det == 0.0:
        raise SingularMatrixError("singular matrix")
    p = math.hypot(A.a + A.d, A.b - A.c)
    q = math.hypot(A.a - A.d, A.b + A.c)
    s1 = 0.5 * (p + q)
    return s1, abs(det) / s1


def batch_singular_values(arr: np.ndarray, abs_det: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`singular_values` over an array of shape ``(..., 2, 2)``.

    Long products of positive matrices are nearly rank one, so ``ad - bc`` of
    the product loses all its digits; pass the exact ``|det|`` (product of factor
    determinants) when available.
    """
    a, b = arr[..., 0, 0], arr[..., 0, 1]
    c, d = arr[..., 1, 0], arr[..., 1, 1]
    s1 = 0.5 * (np.hypot(a + d, b - c) + np.hypot(a - d, b + c))
    if abs_det is None:
        abs_det = np.abs(a * d - b * c)
    return s1, abs_det / s1


def batch_log_singular_values(arr: np.ndarray, log_abs_det: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    if log_abs_det is None:
        s1, s2 = batch_singular_values(arr)
        return np.log(s1), np.log(s2)
    a, b = arr[..., 0, 0], arr[..., 0, 1]
    c, d = arr[..., 1, 0], arr[..., 1, 1]
    l1 = np.log(0.5 * (np.hypot(a + d, b - c) + np.hypot(a - d, b + c)))
    return l1, log_abs_det - l1


@dataclass(frozen=True)
class ProjPoint:
    """A line through the origin, stored by its angle in ``[0, pi)``."""

    theta: float

    def __post_init__(self):
        if not (0.0 <= self.theta < math.pi):
            object.__setattr__(self, "theta", _canonical_angle(self.theta))

    @classmethod
    def from_vector(cls, v: Sequence[float]) -> "ProjPoint":
        x, y = float(v[0]), float(v[1])
        if x == 0.0 and y == 0.0:
            raise ValueError("zero vector does not span a line")
        if y < 0.0 or (y == 0.0 and x < 0.0):
            x, y = -x, -y
        theta = math.atan2(y, x)
        if theta >= math.pi:
            theta = 0.0
        return cls(theta)

    @property
    def vector(self) -> tuple[float, float]:
        return (math.cos(self.theta), math.sin(self.theta))

    def image(self, A: Mat2) -> "ProjPoint":
        return ProjPoint.from_vector(A.apply(self.vector))


E1 = ProjPoint(0.0)
E2 = ProjPoint(math.pi / 2)


def _canonical_angle(theta: float) -> float:
    t = math.fmod(theta, math.pi)
    if t < 0.0:
        t += math.pi
    if t >= math.pi:
        t = 0.0
    return t


def angle(x: ProjPoint, y: ProjPoint) -> float:
    """Angle between two lines, in ``[0, pi/2]``.

    Computed from the sine and cosine of the angular difference, so there is no
    wrap-around branch at ``theta = 0 ~ pi``.
    """
    delta = x.theta - y.theta
    return math.atan2(abs(math.sin(delta)), abs(math.cos(delta)))


def vector_angle(v: Sequence[float], w: Sequence[float]) -> float:
    """Angle between the lines spanned by two nonzero vectors."""
    cross = v[0] * w[1] - v[1] * w[0]
    dot = v[0] * w[0] + v[1] * w[1]
    return math.atan2(abs(cross), abs(dot))


def image_angle(B: Mat2, v: Sequence[float], w: Sequence[float], det_B: float | None = None) -> float:
    """Angle between the lines ``B v`` and ``B w``.

    The cross product is taken as ``det(B) * cross(v, w)`` rather than from the
    image coordinates, which keeps full relative accuracy when the images are
    nearly parallel. Pass ``det_B`` when it is known more accurately than the
    product's own entries give it (e.g. as a product of factor determinants).
    """
    if det_B is None:
        det_B = B.det
    Bv, Bw = B.apply(v), B.apply(w)
    cross = det_B * (v[0] * w[1] - v[1] * w[0])
    dot = Bv[0] * Bw[0] + Bv[1] * Bw[1]
    return math.atan2(abs(cross), abs(dot))


def area(v: Sequence[float], w: Sequence[float]) -> float:
    """Area of the parallelogram spanned by ``v`` and ``w``."""
    return abs(v[0] * w[1] - v[1] * w[0])


def restricted_norm(A: Mat2, theta: ProjPoint) -> float:
    """Norm of ``A`` restricted to the line ``theta``."""
    if A.det == 0.0:
        raise SingularMatrixError("singular matrix")
    x, y = A.apply(theta.vector)
    return math.hypot(x, y)


def _check_word(word: Iterable[int], n: int) -> Word:
    word = tuple(int(i) for i in word)
    for i in word:
        if not 0 <= i < n:
            raise IndexError(f"symbol {i} out of range for {n} matrices")
    return word


def word_product(word: Iterable[int], matrices: Sequence[Mat2], order: str = "forward") -> Mat2:
    """Product of the matrices indexed by ``word`` (symbols are 0-based).

    ``forward`` gives ``A[w0] A[w1] ... A[w_{n-1}]``; ``reversed`` gives
    ``A[w_{n-1}] ... A[w0]``. The empty word gives the identity.
    """
    word = _check_word(word, len(matrices))
    if order == "reversed":
        word = word[::-1]
    elif order != "forward":
        raise ValueError(f"unknown order {order!r}")
    out = Mat2(1.0, 0.0, 0.0, 1.0)
    for i in word:
        out = out @ matrices[i]
    return out


def word_det(word: Iterable[int], matrices: Sequence[Mat2]) -> float:
    """Determinant of a word product, as a product of factor determinants."""
    out = 1.0
    for i in _check_word(word, len(matrices)):
        out *= matrices[i].det
    return out


def stack(system: Sequence[Mat2]) -> np.ndarray:
    """Matrices as an array of shape ``(N, 2, 2)``."""
    return np.array([m.as_array() for m in system])


def all_word_products(system: Sequence[Mat2], n: int, order: str = "forward") -> np.ndarray:
    """Products for every word of length ``n``, shape ``(N**n, 2, 2)``.

    Words are enumerated lexicographically with the first symbol most
    significant, so index ``k`` corresponds to the base-``N`` digits of ``k``.
    """
    mats = stack(system)
    N = len(system)
    prods = np.broadcast_to(np.eye(2), (1, 2, 2)).copy()
    for _ in range(n):
        if order == "forward":
            # extend on the right: P_{w j} = P_w A_j
            prods = np.einsum("wik,jkl->wjil", prods, mats).reshape(-1, 2, 2)
        elif order == "reversed":
            # P_{w j} = A_j P_w
            prods = np.einsum("jik,wkl->wjil", mats, prods).reshape(-1, 2, 2)
        else:
            raise ValueError(f"unknown order {order!r}")
    assert prods.shape[0] == N**n
    return prods


def all_word_log_dets(system: Sequence[Mat2], n: int) -> np.ndarray:
    """``log|det|`` of every depth-``n`` word product, lexicographic order."""
    ld = np.log(np.abs([m.det for m in system]))
    out = np.zeros(1)
    for _ in range(n):
        out = (out[:, None] + ld[None, :]).ravel()
    return out


def index_to_word(index: int, n: int, N: int) -> Word:
    digits = []
    for _ in range(n):
        index, r = divmod(index, N)
        digits.append(r)
    return tuple(reversed(digits))


def word_to_index(word: Sequence[int], N: int) -> int:
    k = 0
    for i in word:
        k = k * N + int(i)
    return k
