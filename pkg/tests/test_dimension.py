import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affine_dim.dimension import (
    NoDominationGapError,
    chain_value,
    check_theorem_conditions,
    dimension_report,
    ess_dimension,
    ledrappier_young,
    lyapunov_dimension,
    transversal_condition,
)
from affine_dim.matrix_core import Mat2

L2, L3, L4, L8 = (math.log(x) for x in (2, 3, 4, 8))


def test_lyapunov_dimension_examples():
    assert lyapunov_dimension(L2, L2, L4) == pytest.approx(1.0, abs=1e-15)
    assert lyapunov_dimension(L3, L2, L4) == pytest.approx(1 + math.log(1.5) / L4, abs=1e-15)
    assert lyapunov_dimension(L3, L2, L4) == pytest.approx(1.292481, abs=1e-6)
    assert lyapunov_dimension(L2 / 2, L2, L4) == pytest.approx(0.5, abs=1e-15)


def test_lyapunov_dimension_branches_and_cap():
    # h <= chi_s picks h/chi_s, otherwise the second branch
    assert lyapunov_dimension(0.3, 0.5, 0.9) == pytest.approx(0.6)
    assert lyapunov_dimension(0.7, 0.5, 0.9) == pytest.approx(1 + 0.2 / 0.9)
    assert lyapunov_dimension(10.0, 0.5, 0.9) == 2.0
    with pytest.raises(ValueError):
        lyapunov_dimension(0.1, 0.0, 1.0)
    with pytest.raises(ValueError):
        lyapunov_dimension(0.1, 2.0, 1.0)
    with pytest.raises(ValueError):
        lyapunov_dimension(-0.1, 1.0, 2.0)


def test_lyapunov_dimension_continuous_at_kink():
    for chi_s, chi_ss in [(0.3, 0.5), (1.0, 3.0)]:
        lo = lyapunov_dimension(chi_s - 1e-12, chi_s, chi_ss)
        hi = lyapunov_dimension(chi_s + 1e-12, chi_s, chi_ss)
        assert abs(hi - lo) < 1e-10


exps = st.tuples(st.floats(0.01, 5), st.floats(0.01, 5)).map(sorted)


@given(exps, st.floats(0, 10), st.floats(0, 10))
@settings(max_examples=300, deadline=None)
def test_lyapunov_dimension_monotone_in_h(chis, h1, h2):
    chi_s, chi_ss = chis
    lo, hi = sorted((h1, h2))
    assert lyapunov_dimension(lo, chi_s, chi_ss) <= lyapunov_dimension(hi, chi_s, chi_ss)
    assert 0 <= lyapunov_dimension(hi, chi_s, chi_ss) <= 2


def test_ess_dimension_examples():
    assert ess_dimension(L2, L2, L4).value == pytest.approx(1.0)
    assert ess_dimension(0.0, L2, L4).value == 0.0
    assert ess_dimension(L2 / 2, L2, L8).value == pytest.approx(0.25)
    assert ess_dimension(L2, L2, L4).upper_bound_only
    assert not ess_dimension(L2, L2, L4, transversal=True).upper_bound_only
    assert float(ess_dimension(L2 / 2, L2, L8)) == pytest.approx(0.25)
    with pytest.raises(NoDominationGapError, match="no domination gap"):
        ess_dimension(0.5, 1.0, 1.0)


def test_ledrappier_young_examples():
    # at dim_T = min(1, h/chi_s) the formula reproduces the Lyapunov dimension
    assert ledrappier_young(L3, L2, L4, 1.0) == pytest.approx(lyapunov_dimension(L3, L2, L4), abs=1e-14)
    assert ledrappier_young(L2 / 2, L2, L4, 0.5) == pytest.approx(0.5, abs=1e-14)
    # conformal limit: the transversal term vanishes
    for d in (0.0, 0.4, 1.0):
        assert ledrappier_young(0.7, 1.1, 1.1, d) == pytest.approx(0.7 / 1.1)
    assert ledrappier_young(L3, L2, L4, 0.0) == pytest.approx(L3 / L4)
    with pytest.raises(ValueError):
        ledrappier_young(L3, L2, L4, 1.5)


def test_ledrappier_young_identity_grid():
    """1000 admissible triples where the case analysis gives equality with the Lyapunov dimension."""
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 1000:
        chi_s = rng.uniform(0.05, 3.0)
        chi_ss = chi_s * rng.uniform(1.0, 5.0)
        h = rng.uniform(0.0, chi_s + chi_ss)
        dim_T = min(1.0, h / chi_s)
        ly = ledrappier_young(h, chi_s, chi_ss, dim_T)
        assert ly == pytest.approx(lyapunov_dimension(h, chi_s, chi_ss), abs=1e-12)
        if transversal_condition(h, chi_s, chi_ss) and h / (chi_ss - chi_s) <= 1.0:
            # strong-stable transversality: dim_T is the push-forward dimension
            ess = ess_dimension(h, chi_s, chi_ss).value
            if ess >= dim_T:
                assert ledrappier_young(h, chi_s, chi_ss, min(ess, dim_T)) == pytest.approx(ly, abs=1e-12)
        checked += 1


def test_chain_value_example():
    assert chain_value(1.7, 0.4) == pytest.approx(-3 + (2 + 1 / 0.6) * 1.7 + 0.8, abs=1e-14)
    assert chain_value(1.7, 0.4) == pytest.approx(4.0333333, abs=1e-6)
    with pytest.raises(ValueError):
        chain_value(1.7, 1.0)


def test_transversal_condition_cases():
    # first alternative: q = 1/0.5 = 2 >= min(1, 1)
    assert transversal_condition(1.0, 1.0, 1.5)
    # neither: q = 0.2 < min(1, 2/3) and 0.2 + 0.4/1.3 < 2
    assert not transversal_condition(0.2, 0.3, 1.3)
    # second only: q = 7/9 < 1, but 7/9 + 14/10 > 2
    assert transversal_condition(7.0, 1.0, 10.0)
    assert 7.0 / 9.0 < min(1.0, 7.0)
    # no gap
    assert not transversal_condition(0.5, 1.0, 1.0)


def test_condition_flags_examples():
    flags, measured = check_theorem_conditions(1.7, 1.0, 0.4, 1.0, system=[Mat2.diag(0.5, 0.25)])
    assert flags["chain"] and measured["chain_value"] == pytest.approx(4.0333333, abs=1e-6)
    assert flags["N"]  # 4 * 0.25 = 1 sits on the boundary
    assert measured["max_n_quantity"] == pytest.approx(1.0)
    assert flags["O_N"]
    assert not flags["M"]  # zero entries: not sign-definite
    assert not flags["N_class"] and not flags["O_N_class"]
    flags, measured = check_theorem_conditions(1.2, 1.0, 0.4, 1.0, system=[Mat2.diag(0.5, 0.2)])
    assert not flags["N"] and measured["max_n_quantity"] == pytest.approx(1.25)
    assert not flags["O_N"]


def test_condition_flags_relaxed_and_class():
    A = Mat2(0.5, 0.4, 0.1, 0.1)
    flags, _ = check_theorem_conditions(1.7, 1.0, 0.4, 1.0, system=[A], relaxed=True, ssc=True, dominated=True)
    assert flags["M"] and flags["O_N"] and flags["O_N_relaxed"] and flags["O_N_class"]
    assert flags["ssc"] and flags["dominated_splitting"]
    flags, _ = check_theorem_conditions(1.6, 1.0, 0.4, 1.0, relaxed=True)
    assert not flags["O_N"] and flags["O_N_relaxed"]
    assert "ssc" not in flags and "M" not in flags


def test_dimension_report():
    rep = dimension_report(1.292481, L3, L2, L4)
    assert rep.lyapunov_dim == pytest.approx(1.292481, abs=1e-6)
    assert rep.ly_dim == pytest.approx(rep.lyapunov_dim, abs=1e-12)
    assert 0 <= rep.ess_pushforward_dim <= 1 and rep.ess_upper_bound_only
    assert any("Lyapunov dimension" in n for n in rep.notes)
    flat = dimension_report(1.0, 0.7, 1.1, 1.1)
    assert math.isnan(flat.ess_pushforward_dim)
