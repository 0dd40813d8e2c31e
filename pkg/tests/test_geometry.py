import math

import numpy as np
import pytest

from affine_dim.geometry import (
    AffineIFS,
    InsufficientResolutionError,
    box_counts,
    box_dimension_estimate,
    check_ssc,
    default_scales,
    export_csv,
    export_svg,
    natural_projection_2d,
    point_cloud,
)
from affine_dim.matrix_core import Mat2, word_to_index
from affine_dim.pressure import BudgetExceededError, NonContractingError

RUNNING = AffineIFS([Mat2.diag(0.5, 0.25)] * 2, [(0, 0), (0.5, 0.75)])
CANTOR = AffineIFS([Mat2.diag(1 / 3, 1 / 3)] * 2, [(0, 0), (2 / 3, 0)])
SQUARE = AffineIFS([Mat2.diag(0.5, 0.5)] * 4, [(0, 0), (0.5, 0), (0, 0.5), (0.5, 0.5)])


def test_ifs_validation():
    with pytest.raises(ValueError):
        AffineIFS([Mat2.diag(0.5, 0.5)], [(0, 0), (1, 1)])
    with pytest.raises(NonContractingError):
        AffineIFS([Mat2.diag(1.0, 0.5)], [(0, 0)])
    assert RUNNING.N == 2 and RUNNING.rho == 0.5


def test_bounding_disk_is_invariant(rng):
    for ifs in (RUNNING, CANTOR, SQUARE, AffineIFS([Mat2(0.45, 0.3, 0.2, 0.35), Mat2(0.1, 0.1, 0.4, 0.5)], [(0, 0), (0.5, 0.5)])):
        c, R = ifs.bounding_disk()
        theta = rng.uniform(0, 2 * math.pi, 500)
        r = R * np.sqrt(rng.uniform(0, 1, 500))
        pts = c + np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)
        for i in range(ifs.N):
            img = np.array([ifs.apply(i, p) for p in pts])
            assert np.all(np.linalg.norm(img - c, axis=1) <= R * (1 + 1e-12))


def test_fixed_point_words():
    p, err = natural_projection_2d(RUNNING, (0,) * 40)
    assert np.allclose(p, (0, 0), atol=err + 1e-15)
    p, err = natural_projection_2d(RUNNING, (1,) * 40)
    assert np.allclose(p, (1, 1), atol=err + 1e-15)
    assert RUNNING.fixed_point(1) == pytest.approx([1, 1])


def test_error_radius_shrinks():
    errs = [natural_projection_2d(RUNNING, (0, 1, 1, 0, 1, 0), n)[1] for n in range(7)]
    for a, b in zip(errs, errs[1:]):
        assert b <= a * RUNNING.rho * (1 + 1e-12)


def test_projection_matches_cloud():
    cloud = point_cloud(RUNNING, 6)
    for k in (0, 13, 63):
        w = cloud.word(k)
        assert word_to_index(w, 2) == k
        p, err = natural_projection_2d(RUNNING, w)
        assert cloud.points[k] == pytest.approx(p, abs=1e-14)
        assert cloud.radii[k] == pytest.approx(err)
        # the last symbol names the first-level piece
        assert cloud.last_symbols[k] == w[-1]


@pytest.mark.parametrize("ifs", [RUNNING, SQUARE], ids=["running", "square"])
def test_refinement_within_error_radius(ifs):
    n = 5
    coarse = point_cloud(ifs, n)
    fine = point_cloud(ifs, n + 4)
    N = ifs.N
    # fine word = four older symbols followed by the coarse word
    for k in range(len(coarse)):
        for prefix in range(0, N**4, 7):
            j = prefix * N**n + k
            assert np.linalg.norm(fine.points[j] - coarse.points[k]) <= coarse.radii[k] * (1 + 1e-12)


def test_cloud_inside_disk():
    cloud = point_cloud(RUNNING, 10)
    assert len(cloud) == 1024
    assert np.all(np.linalg.norm(cloud.points - cloud.center, axis=1) <= cloud.radius * (1 + 1e-12))
    with pytest.raises(BudgetExceededError):
        point_cloud(RUNNING, 20, budget=2**10)


def test_ssc_verified_running_example():
    res = check_ssc(RUNNING)
    assert res.status == "verified"
    assert res.depth <= 2


def test_ssc_identical_maps_violated():
    res = check_ssc(AffineIFS([Mat2.diag(0.5, 0.25)] * 2, [(0.1, 0.2)] * 2))
    assert res.status == "violated" and res.pair == (0, 1)


def test_ssc_touching_undetermined():
    res = check_ssc(AffineIFS([Mat2.diag(0.5, 0.5)] * 2, [(0, 0), (0.5, 0)]))
    assert res.status == "undetermined"


def test_ssc_cantor_and_single_map():
    assert check_ssc(CANTOR).status == "verified"
    assert check_ssc(AffineIFS([Mat2.diag(0.5, 0.5)], [(0, 0)])).status == "verified"


def test_box_dimension_cantor():
    res = box_dimension_estimate(point_cloud(CANTOR, 14))
    assert res.slope == pytest.approx(math.log(2) / math.log(3), abs=0.05)


def test_box_dimension_square():
    res = box_dimension_estimate(point_cloud(SQUARE, 8))
    assert res.slope == pytest.approx(2.0, abs=0.05)


def test_box_dimension_single_point():
    cloud = point_cloud(AffineIFS([Mat2.diag(0.5, 0.5)], [(1, 1)]), 40)
    assert len(cloud) == 1
    # the disk degenerates to the point itself, so scales are given explicitly
    assert cloud.radius == 0.0
    assert box_dimension_estimate(cloud, scales=[2.0**-k for k in range(8)]).slope == pytest.approx(0.0, abs=1e-12)


def test_counts_monotone_and_bounded():
    cloud = point_cloud(RUNNING, 12)
    scales = default_scales(cloud)
    corner = cloud.center - cloud.radius
    counts = [box_counts(cloud.points, s, corner) for s in scales]
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    assert all(c <= len(cloud) for c in counts)
    res = box_dimension_estimate(cloud)
    assert res.counts == sorted(res.counts)
    assert len(res.residuals) == len(res.scales)


def test_insufficient_resolution_names_depth():
    cloud = point_cloud(CANTOR, 4)
    with pytest.raises(InsufficientResolutionError, match=r"need depth >= \d+"):
        box_dimension_estimate(cloud, scales=[0.1, 0.001])
    with pytest.raises(ValueError):
        box_dimension_estimate(cloud, scales=[])


def test_exports(tmp_path):
    cloud = point_cloud(RUNNING, 4)
    csv = export_csv(cloud, tmp_path / "c.csv").read_text().splitlines()
    assert csv[0] == "x,y,word" and len(csv) == 17
    x, y, w = csv[5].split(",")
    assert (float(x), float(y)) == tuple(cloud.points[4]) and w == "0100"
    svg = export_svg(cloud, tmp_path / "c.svg").read_text()
    assert 'viewBox="0 0 1000 1000"' in svg
    assert svg.count("<circle") == 16


def test_ssc_duplicate_map_in_larger_system():
    ifs = AffineIFS([Mat2.diag(0.4, 0.3)] * 3, [(0, 0), (0.6, 0.1), (0, 0)])
    res = check_ssc(ifs)
    assert res.status == "violated" and res.pair == (0, 2)
    assert res.details["distance"] <= 1e-9
