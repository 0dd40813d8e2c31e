"""Dimension formulas for Gibbs measures and the hypothesis checklists that gate them.

All functions take scalars (entropy, exponents, ``s0``); nothing here recomputes
thermodynamic quantities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .matrix_core import Mat2
from .transversality import class_membership

O_BOUND = 5.0 / 3.0
O_BOUND_RELAXED = 1.5
LDIM_INTERPRETATION = "Lyapunov dimension of mu_-"


class NoDominationGapError(ValueError):
    pass


def _check_exponents(chi_s: float, chi_ss: float) -> None:
    if not (chi_s > 0.0 and chi_ss > 0.0):
        raise ValueError("Lyapunov exponents must be positive")
    if chi_s > chi_ss * (1 + 1e-12):
        raise ValueError("expected chi_s <= chi_ss")


def lyapunov_dimension(h: float, chi_s: float, chi_ss: float) -> float:
    """``min{h/chi_s, 1 + (h - chi_s)/chi_ss}``, capped at the ambient dimension 2."""
    _check_exponents(chi_s, chi_ss)
    if h < 0.0:
        raise ValueError("entropy must be non-negative")
    return min(h / chi_s, 1.0 + (h - chi_s) / chi_ss, 2.0)


@dataclass(frozen=True)
class EssDimension:
    value: float
    upper_bound_only: bool

    def __float__(self) -> float:
        return self.value


def ess_dimension(h: float, chi_s: float, chi_ss: float, transversal: bool = False) -> EssDimension:
    """Dimension of the push-forward of ``mu_+`` by the strong-stable direction map.

    ``min{1, h/(chi_ss - chi_s)}`` is always an upper bound; it is the value
    only for transversal families, hence the flag.
    """
    _check_exponents(chi_s, chi_ss)
    gap = chi_ss - chi_s
    if gap <= 1e-12 * chi_ss:
        raise NoDominationGapError("no domination gap")
    if h < 0.0:
        raise ValueError("entropy must be non-negative")
    return EssDimension(min(1.0, h / gap), not transversal)


def ledrappier_young(h: float, chi_s: float, chi_ss: float, dim_T: float) -> float:
    """``h/chi_ss + (1 - chi_s/chi_ss) dim_T``.

    The transversal part contributes ``dim_T`` along ``e^s`` and the remaining
    entropy ``h - chi_s dim_T`` is spent at rate ``chi_ss``. For
    ``dim_T = min{1, h/chi_s}`` this reproduces :func:`lyapunov_dimension`.
    """
    _check_exponents(chi_s, chi_ss)
    if not 0.0 <= dim_T <= 1.0:
        raise ValueError("dim_T must lie in [0, 1]")
    return h / chi_ss + (1.0 - chi_s / chi_ss) * dim_T


def chain_value(s0: float, ratio: float) -> float:
    """``-3 + (2 + 1/(1 - r)) s0 + 2 r`` with ``r = chi_s/chi_ss``."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError("ratio chi_s/chi_ss must lie in [0, 1)")
    return -3.0 + (2.0 + 1.0 / (1.0 - ratio)) * s0 + 2.0 * ratio


def transversal_condition(h: float, chi_s: float, chi_ss: float) -> bool:
    """``h/(chi_ss - chi_s) >= min{1, h/chi_s}`` or ``h/(chi_ss - chi_s) + 2h/chi_ss > 2``."""
    _check_exponents(chi_s, chi_ss)
    gap = chi_ss - chi_s
    if gap <= 0.0:
        return False
    q = h / gap
    return q >= min(1.0, h / chi_s) or q + 2.0 * h / chi_ss > 2.0


@dataclass
class DimensionReport:
    s0: float
    lyapunov_dim: float
    ly_dim: float
    ess_pushforward_dim: float
    ess_upper_bound_only: bool
    condition_flags: dict[str, bool]
    measured: dict[str, float] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


def check_theorem_conditions(
    s0: float,
    h: float,
    chi_s: float,
    chi_ss: float,
    system: Sequence[Mat2] | None = None,
    relaxed: bool = False,
    ssc: bool | None = None,
    dominated: bool | None = None,
) -> tuple[dict[str, bool], dict[str, float]]:
    """Named booleans for each hypothesis, plus the measured quantities behind them.

    ``N`` and ``O_N`` report the defining inequality alone; ``N_class`` and
    ``O_N_class`` additionally require every matrix to lie in ``M``.
    """
    _check_exponents(chi_s, chi_ss)
    r = chi_s / chi_ss
    flags: dict[str, bool] = {}
    measured: dict[str, float] = {"chi_ratio": r}
    if r < 1.0:
        c = chain_value(s0, r)
        measured["chain_value"] = c
        flags["chain"] = c > 2.0
    else:
        flags["chain"] = False
    flags["entropy_gap_condition"] = transversal_condition(h, chi_s, chi_ss)
    flags["O_N"] = s0 > O_BOUND
    if relaxed:
        flags["O_N_relaxed"] = s0 > O_BOUND_RELAXED
    if system is not None:
        cm = class_membership(system, s0=s0)
        flags["M"] = cm.M
        flags["N"] = cm.N
        flags["N_class"] = cm.M and cm.N
        flags["O_N_class"] = cm.M and flags["O_N"]
        if relaxed:
            flags["O_N_relaxed_class"] = cm.M and flags["O_N_relaxed"]
        measured.update(cm.measured)
    if ssc is not None:
        flags["ssc"] = ssc
    if dominated is not None:
        flags["dominated_splitting"] = dominated
    return flags, measured


def dimension_report(
    s0: float,
    h: float,
    chi_s: float,
    chi_ss: float,
    system: Sequence[Mat2] | None = None,
    dim_T: float | None = None,
    transversal: bool = False,
    relaxed: bool = False,
    ssc: bool | None = None,
    dominated: bool | None = None,
) -> DimensionReport:
    """Every formula at once. ``dim_T`` defaults to ``min{1, h/chi_s}``."""
    ldim = lyapunov_dimension(h, chi_s, chi_ss)
    if dim_T is None:
        dim_T = min(1.0, h / chi_s)
    ly = ledrappier_young(h, chi_s, chi_ss, dim_T)
    try:
        ess = ess_dimension(h, chi_s, chi_ss, transversal)
        ess_val, ess_flag = ess.value, ess.upper_bound_only
    except NoDominationGapError:
        ess_val, ess_flag = math.nan, True
    flags, measured = check_theorem_conditions(s0, h, chi_s, chi_ss, system, relaxed, ssc, dominated)
    notes = [f"entropy_gap_condition reads ldim as the {LDIM_INTERPRETATION}"]
    if ess_flag:
        notes.append("ess_pushforward_dim is an upper bound only")
    return DimensionReport(s0, ldim, ly, ess_val, ess_flag, flags, measured, notes)
