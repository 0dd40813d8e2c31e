"""Locally constant potentials, transfer-operator Gibbs measures and their invariants.

Cylinder words are stored oldest-first, ``(i_-k, ..., i_-1)``, and indexed in
base ``N`` with the oldest symbol most significant. A depth-``k`` potential is
a table over these words; the true Hölder potential is made locally constant
by extending every word into the past with the constant tail ``0, 0, ...``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse

from .matrix_core import Mat2, Word, all_word_log_dets, all_word_products, batch_log_singular_values, word_to_index
from .pressure import BudgetExceededError
from .splitting import InvalidCertificateError, SplittingCertificate, find_backward_invariant_multicone, stable_direction

STATE_BUDGET = 4096
POWER_TOL = 1e-12
POWER_MAX_ITER = 100_000
TAIL_DEPTH = 200


class ConvergenceError(RuntimeError):
    pass


def default_cylinder_depth(N: int, budget: int = STATE_BUDGET) -> int:
    if N < 2:
        return 6
    return max(1, min(6, int(math.floor(math.log(budget) / math.log(N) + 1e-12))))


@dataclass(frozen=True)
class Potential:
    """``kind`` is one of ``kaenmaki``, ``bernoulli``, ``constant`` or ``custom``."""

    kind: str
    s: float | None = None
    weights: tuple[float, ...] | None = None
    value: float | None = None
    func: Callable[[Word], float] | None = None

    def __post_init__(self):
        if self.kind == "kaenmaki":
            if self.s is None or not 0.0 <= self.s <= 2.0:
                raise ValueError("kaenmaki potential needs 0 <= s <= 2")
        elif self.kind == "bernoulli":
            if not self.weights or min(self.weights) <= 0.0:
                raise ValueError("bernoulli weights must be strictly positive")
        elif self.kind == "constant":
            if self.value is None:
                raise ValueError("constant potential needs a value")
        elif self.kind == "custom":
            if self.func is None:
                raise ValueError("custom potential needs an evaluator")
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def kaenmaki(cls, s: float) -> "Potential":
        return cls("kaenmaki", s=float(s))

    @classmethod
    def bernoulli(cls, weights: Sequence[float]) -> "Potential":
        return cls("bernoulli", weights=tuple(float(w) for w in weights))

    @classmethod
    def constant(cls, c: float) -> "Potential":
        return cls("constant", value=float(c))

    @classmethod
    def custom(cls, func: Callable[[Word], float]) -> "Potential":
        return cls("custom", func=func)

    def describe(self) -> dict:
        if self.kind == "kaenmaki":
            return {"kind": "kaenmaki", "s": self.s}
        if self.kind == "bernoulli":
            return {"kind": "bernoulli", "weights": list(self.weights)}
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        return {"kind": "custom"}

    def table(self, system: Sequence[Mat2], k: int, cert: SplittingCertificate | None = None) -> np.ndarray:
        """Values on all depth-``k`` words, oldest-first lexicographic order."""
        N = len(system)
        if self.kind == "bernoulli":
            if len(self.weights) != N:
                raise ValueError("one weight per map required")
            return np.tile(np.log(np.asarray(self.weights)), N ** (k - 1))
        if self.kind == "constant":
            return np.full(N**k, self.value)
        if self.kind == "custom":
            return np.array([self.func(w) for w in all_words(N, k)], dtype=float)
        log_rn = log_restricted_norms(system, k, cert)
        log_det = np.tile(np.log(np.abs([A.det for A in system])), N ** (k - 1))
        s = self.s
        if s <= 1.0:
            return s * log_rn
        return (s - 1.0) * log_det + (2.0 - s) * log_rn


def all_words(N: int, k: int) -> list[Word]:
    return [tuple(int(x) for x in w) for w in np.ndindex(*(N,) * k)]


def _certificate(system, cert):
    if cert is None:
        cert = find_backward_invariant_multicone(system)
    if not isinstance(cert, SplittingCertificate):
        raise InvalidCertificateError("no dominated splitting certificate for this system")
    return cert


def tail_stable_direction(system: Sequence[Mat2], cert: SplittingCertificate | None = None) -> np.ndarray:
    """Unit vector along ``e^s`` of the constant past ``..., 0, 0``."""
    cert = _certificate(system, cert)
    theta, _ = stable_direction(system, (0,) * TAIL_DEPTH, TAIL_DEPTH, cert)
    return np.array(theta.vector)


def log_restricted_norms(
    system: Sequence[Mat2], k: int, cert: SplittingCertificate | None = None
) -> np.ndarray:
    """``log ||A_{w_-1} | e^s(past)||`` for each depth-``k`` word, past = ``0, 0, ..., w_-k, ..., w_-2``."""
    N = len(system)
    mats = np.array([A.as_array() for A in system])
    V = tail_stable_direction(system, cert)[None, :]
    for _ in range(k - 1):
        # extend the prefix by one newer symbol j: index u*N + j
        V = np.einsum("jab,ub->uja", mats, V).reshape(-1, 2)
        V /= np.hypot(V[:, 0], V[:, 1])[:, None]
    img = np.einsum("jab,ub->uja", mats, V).reshape(-1, 2)
    return np.log(np.hypot(img[:, 0], img[:, 1]))


def _shift_targets(N: int, k: int) -> np.ndarray:
    """``targets[w, j]`` = index of ``w[1:] + (j,)``."""
    idx = np.arange(N**k)
    return (idx % N ** (k - 1))[:, None] * N + np.arange(N)[None, :]


def build_transfer_operator(
    system: Sequence[Mat2],
    potential: Potential,
    k: int,
    cert: SplittingCertificate | None = None,
    budget: int = STATE_BUDGET,
) -> tuple[sparse.csr_matrix, dict]:
    """Sparse ``N^k x N^k`` operator with ``T[w, w'] = exp(phi(w'))`` when ``w'`` is ``w`` shifted by one symbol."""
    N = len(system)
    if k < 1:
        raise ValueError("cylinder depth must be >= 1")
    if N**k > budget:
        raise BudgetExceededError(f"depth {k} needs {N**k} states for {N} maps, budget is {budget}")
    phi = potential.table(system, k, cert)
    targets = _shift_targets(N, k)
    rows = np.repeat(np.arange(N**k), N)
    cols = targets.ravel()
    T = sparse.csr_matrix((np.exp(phi[cols]), (rows, cols)), shape=(N**k, N**k))
    info = {"states": N**k, "nnz": int(T.nnz), "symbols": N, "depth": k, "order": "oldest-first", "phi": phi}
    return T, info


def _power_iteration(T, tol: float, max_iter: int) -> tuple[float, np.ndarray]:
    n = T.shape[0]
    v = np.full(n, 1.0 / n)
    lam = 0.0
    for _ in range(max_iter):
        w = T @ v
        lam_new = float(w.sum())
        w /= lam_new
        if abs(lam_new - lam) <= tol * lam_new and np.max(np.abs(w - v)) <= tol * np.max(w):
            return lam_new, w
        v, lam = w, lam_new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


@dataclass
class CylinderMeasure:
    depth: int
    N: int
    masses: np.ndarray
    side: str
    P: float
    order: str = "oldest-first"
    # Markov data for cylinders longer than ``depth``
    phi: np.ndarray | None = field(default=None, repr=False)
    right: np.ndarray | None = field(default=None, repr=False)
    lam: float = 1.0

    def __post_init__(self):
        if self.side not in ("minus", "plus", "two-sided"):
            raise ValueError(f"unknown side {self.side!r}")

    def transition(self) -> np.ndarray:
        """``Q[w, j]``: probability that window ``w`` is followed by symbol ``j``."""
        targets = _shift_targets(self.N, self.depth)
        return np.exp(self.phi[targets]) * self.right[targets] / (self.lam * self.right[:, None])

    def marginal(self, m: int) -> np.ndarray:
        """Masses of all length-``m`` words (``m <= depth``)."""
        if not 0 <= m <= self.depth:
            raise ValueError("marginal depth out of range")
        t = self.masses.reshape((self.N,) * self.depth)
        return t.sum(axis=tuple(range(self.depth - m))).ravel() if m < self.depth else self.masses.copy()

    def word_masses(self, m: int) -> np.ndarray:
        """Masses of all length-``m`` words, any ``m >= 0``."""
        if m <= self.depth:
            return self.marginal(m)
        Q = self.transition()
        states = self.N**self.depth
        out = self.masses
        for _ in range(m - self.depth):
            # the newest depth-k window of word w is w mod N^k
            out = (out[:, None] * Q[np.arange(out.size) % states]).ravel()
        return out

    def mass(self, word: Word) -> float:
        word = tuple(int(i) for i in word)
        m, k = len(word), self.depth
        if m <= k:
            return float(self.marginal(m)[word_to_index(word, self.N)]) if m else 1.0
        Q = self.transition()
        out = float(self.masses[word_to_index(word[:k], self.N)])
        for t in range(k, m):
            out *= Q[word_to_index(word[t - k : t], self.N), word[t]]
        return out


def gibbs_measure(
    system: Sequence[Mat2],
    potential: Potential,
    k: int | None = None,
    tol: float = POWER_TOL,
    cert: SplittingCertificate | None = None,
    max_iter: int = POWER_MAX_ITER,
) -> tuple[CylinderMeasure, float]:
    """Depth-``k`` Markov approximation of the Gibbs measure and its pressure ``P = log lambda``."""
    N = len(system)
    if k is None:
        k = default_cylinder_depth(N)
    T, info = build_transfer_operator(system, potential, k, cert)
    lam, right = _power_iteration(T, tol, max_iter)
    lam_l, left = _power_iteration(T.T.tocsr(), tol, max_iter)
    masses = left * right
    masses /= masses.sum()
    P = math.log(lam)
    mu = CylinderMeasure(k, N, masses, "minus", P, phi=info["phi"], right=right, lam=lam)
    return mu, P


def _birkhoff_windows(N: int, k: int, phi: np.ndarray, word: Word, past: Word) -> float:
    """Sum of ``phi`` over the windows ending at each symbol of ``word`` with ``past`` before it."""
    full = tuple(past) + tuple(word)
    start = len(past)
    return float(sum(phi[word_to_index(full[t - k + 1 : t + 1], N)] for t in range(start, len(full))))


def gibbs_ratio(measure: CylinderMeasure, word: Word, past: Word | None = None) -> float:
    """``mu[word] / exp(-n P + Birkhoff sum)`` with ``past`` (default constant 0) before the word."""
    k = measure.depth
    if past is None:
        past = (0,) * (k - 1)
    past = tuple(past)[len(past) - (k - 1) :] if k > 1 else ()
    n = len(word)
    S = _birkhoff_windows(measure.N, k, measure.phi, word, past)
    return measure.mass(word) / math.exp(-n * measure.P + S)


def gibbs_constant_check(
    measure: CylinderMeasure,
    n_test: int,
    samples: int = 200,
    rng: np.random.Generator | None = None,
) -> float:
    """Largest ``max(R, 1/R)`` of the Gibbs ratio over random test words of length ``n_test``."""
    if n_test < measure.depth:
        raise ValueError("n_test must be at least the cylinder depth")
    rng = rng or np.random.default_rng(0)
    worst = 1.0
    for _ in range(samples):
        w = tuple(int(x) for x in rng.integers(0, measure.N, size=n_test))
        r = gibbs_ratio(measure, w)
        worst = max(worst, r, 1.0 / r)
    return worst


def _window_sums(N: int, k: int, phi: np.ndarray, length: int, first: int) -> np.ndarray:
    """For every word of ``length``, the sum of ``phi`` over windows ending at positions ``>= first``."""
    idx = np.arange(N**length)
    total = np.zeros(N**length)
    for p in range(first, length):
        total += phi[(idx // N ** (length - 1 - p)) % N**k]
    return total


def gibbs_constant_exact(measure: CylinderMeasure) -> float:
    """Supremum of the Gibbs ratio over all words and all pasts.

    For words of length ``n >= k`` the ratio of a depth-``k`` Markov measure
    factorises into a term for the first block (and the past) and the right
    eigenvector at the last window, so the supremum is a product of two finite
    maxima. Shorter words are enumerated.
    """
    N, k, phi = measure.N, measure.depth, measure.phi
    lam, v = measure.lam, measure.right
    # words x.a with a past x of length k-1 and a first block a of length k
    L = 2 * k - 1
    S = _window_sums(N, k, phi, L, k - 1)
    a = np.arange(N**L) % N**k
    f = measure.masses[a] * lam**k * np.exp(-S) / v[a]
    worst = max(f.max() * v.max(), 1.0 / (f.min() * v.min()))
    for n in range(1, k):
        L = k - 1 + n
        S = _window_sums(N, k, phi, L, k - 1)
        mu = measure.marginal(n)[np.arange(N**L) % N**n]
        r = mu * lam**n * np.exp(-S)
        worst = max(worst, r.max(), (1.0 / r).max())
    return float(worst)


def plus_side_measure(measure: CylinderMeasure) -> CylinderMeasure:
    """Same word-mass table, read as cylinders of the future."""
    if measure.side != "minus":
        raise ValueError("expected a minus-side measure")
    return CylinderMeasure(
        measure.depth, measure.N, measure.masses.copy(), "plus", measure.P,
        measure.order, measure.phi, measure.right, measure.lam,
    )


def quasi_bernoulli_constant(measure: CylinderMeasure, length: int | None = None) -> float:
    """``max(r, 1/r)`` of ``mu[uv] / (mu[u] mu[v])`` over every split of every word of ``length``."""
    L = 2 * measure.depth if length is None else length
    N = measure.N
    tables = [measure.word_masses(m) for m in range(L + 1)]
    full = tables[L]
    worst = 1.0
    for m in range(1, L):
        mu_u = tables[m]
        mu_v = tables[L - m]
        prod = np.outer(mu_u, mu_v).ravel()
        r = full / prod
        worst = max(worst, float(r.max()), float((1.0 / r).max()))
    return worst


def two_sided_ratio(measure: CylinderMeasure, past: Word, future: Word) -> float:
    """``mu([past | future]) / (mu_-[past] mu_+[future])`` via the concatenated word."""
    return measure.mass(tuple(past) + tuple(future)) / (measure.mass(past) * measure.mass(future))


@dataclass
class LyapunovExponents:
    chi_s: float
    chi_ss: float
    word_check: float

    def __iter__(self):
        return iter((self.chi_s, self.chi_ss))


def lyapunov_exponents(
    system: Sequence[Mat2], measure: CylinderMeasure, cert: SplittingCertificate | None = None, k: int | None = None
) -> LyapunovExponents:
    """``chi^s`` from restricted norms on ``e^s``, ``chi^ss`` from the determinant identity.

    ``word_check`` is ``-(1/k) sum mu[w] log alpha1(A_w)`` over depth-``k`` words
    with the product taken newest-first.
    """
    cert = _certificate(system, cert)
    k = measure.depth if k is None else k
    if k != measure.depth:
        raise ValueError("exponents are computed at the measure's depth")
    N = len(system)
    log_rn = log_restricted_norms(system, k, cert)
    chi_s = -float(measure.masses @ log_rn)
    last = measure.marginal(1)
    chi_sum = -float(last @ np.log(np.abs([A.det for A in system])))
    prods = all_word_products(system, k, "reversed")
    la1, _ = batch_log_singular_values(prods, all_word_log_dets(system, k))
    word_check = -float(measure.masses @ la1) / k
    return LyapunovExponents(chi_s, chi_sum - chi_s, word_check)


def entropy(measure: CylinderMeasure, potential_table: np.ndarray | None = None) -> float:
    """``h = P - int phi dmu``."""
    phi = measure.phi if potential_table is None else potential_table
    return measure.P - float(measure.masses @ phi)


def block_entropy(measure: CylinderMeasure, m: int) -> float:
    """``-(1/m) sum mu[w] log mu[w]`` over length-``m`` words."""
    p = measure.word_masses(m)
    p = p[p > 0]
    return -float(p @ np.log(p)) / m


def conditional_entropy(measure: CylinderMeasure) -> float:
    """``H_{k+1} - H_k``, the exact entropy of a depth-``k`` Markov measure."""
    k = measure.depth
    return (k + 1) * block_entropy(measure, k + 1) - k * block_entropy(measure, k)


@dataclass
class ThermoReport:
    P: float
    h: float
    chi_s: float
    chi_ss: float
    gibbs_C: float
    qb_C: float
    depth: int
    potential: dict
    lyapunov_word_check: float
    block_entropy_gap: float
    gibbs_C_sampled: float | None = None


def thermo_report(
    system: Sequence[Mat2],
    potential: Potential,
    k: int | None = None,
    cert: SplittingCertificate | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[ThermoReport, CylinderMeasure]:
    cert = _certificate(system, cert)
    mu, P = gibbs_measure(system, potential, k, cert=cert)
    lyap = lyapunov_exponents(system, mu, cert)
    h = entropy(mu)
    plus = plus_side_measure(mu)
    report = ThermoReport(
        P=P,
        h=h,
        chi_s=lyap.chi_s,
        chi_ss=lyap.chi_ss,
        gibbs_C=gibbs_constant_exact(mu),
        qb_C=quasi_bernoulli_constant(plus),
        depth=mu.depth,
        potential=potential.describe(),
        lyapunov_word_check=lyap.word_check,
        block_entropy_gap=abs(block_entropy(mu, mu.depth) - h),
        gibbs_C_sampled=gibbs_constant_check(mu, 2 * mu.depth, rng=rng),
    )
    return report, mu
