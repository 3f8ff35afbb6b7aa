import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from landflash.fields import generate_field, island_fixture
from landflash.lattice import LandUseGrid, PrioritySet, SuitabilityField, total_energy
from landflash.nucleation import (NoOnsiteIncentive, RegionMask, boundary_and_area, boundary_cost,
                                  flip_threshold, lattice_flip_priority, nucleation_estimate,
                                  optimal_flip_region, predict_flashpoint_priority, read_mask_csv,
                                  write_mask_csv, write_prediction_csv)

from oracles import boundary_pairs_bruteforce, exposed_edges_bruteforce


def rect(shape, top, left, h, w):
    return RegionMask.rectangle(shape, top, left, h, w)


@pytest.mark.parametrize("h, w, expected", [(1, 1, (4, 1)), (4, 4, (16, 16)), (2, 8, (20, 16))])
def test_boundary_and_area_examples(h, w, expected):
    m = rect((12, 12), 2, 2, h, w)
    assert boundary_and_area(m) == expected
    assert exposed_edges_bruteforce(m.members) == expected[0]


def test_map_edge_counts_as_exposed():
    m = rect((4, 4), 0, 0, 2, 2)
    assert boundary_and_area(m) == (8, 4)
    assert boundary_and_area(m, "exact")[0] == boundary_pairs_bruteforce(m.members) == 9


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 9), st.integers(3, 9), st.integers(0, 2**32 - 1))
def test_boundary_counts_match_oracles(n, m, seed):
    members = np.random.default_rng(seed).random((n, m)) < 0.4
    if not members.any():
        members[0, 0] = True
    mask = RegionMask(members)
    assert mask.edge_length() == exposed_edges_bruteforce(members)
    assert mask.moore_pairs() == boundary_pairs_bruteforce(members)
    assert mask.edge_length() >= 4


def test_empty_mask_rejected():
    with pytest.raises(ValueError):
        boundary_and_area(RegionMask(np.zeros((3, 3), bool)))


def test_flip_threshold_examples():
    assert flip_threshold(rect((5, 5), 2, 2, 1, 1), 1.0) == 4.0
    assert flip_threshold(rect((9, 9), 2, 2, 4, 4), 1.0) == 1.0
    for ell in range(1, 8):
        assert flip_threshold(rect((12, 12), 2, 2, ell, ell), 2.5) == pytest.approx(4 * 2.5 / ell)
    with pytest.raises(ValueError):
        flip_threshold(rect((5, 5), 2, 2, 1, 1), -1.0)


def test_threshold_strictly_decreasing_for_squares():
    vals = [flip_threshold(rect((14, 14), 1, 1, k, k), 1.0, mode) for mode in ("edge", "exact")
            for k in range(1, 12)]
    edge, exact = vals[:11], vals[11:]
    assert all(b < a for a, b in zip(edge, edge[1:]))
    assert all(b < a for a, b in zip(exact, exact[1:]))


def test_estimate_sign_convention():
    m = rect((8, 8), 2, 2, 4, 4)
    e = nucleation_estimate(m, 1.0, 1.5)
    assert e.delta_f == pytest.approx(16 - 24) and e.flips
    assert not nucleation_estimate(m, 1.0, 1.0).flips


def _island_field(shape, top, left, h, w, margin, bg=1.0):
    scores = np.zeros(shape + (3,))
    scores[..., 0] = bg
    scores[top:top + h, left:left + w, 1] = bg + margin
    return SuitabilityField(scores)


def _exact_crossing(field, mask, pc):
    """P_S where H(flipped) = H(unflipped), from two direct energy evaluations."""
    base = LandUseGrid.uniform(*mask.shape, 0)
    flip = base.copy()
    flip.cells[mask.members] = 1
    d = [total_energy(flip, field, PrioritySet(pc, ps, 1.0)).total
         - total_energy(base, field, PrioritySet(pc, ps, 1.0)).total for ps in (0.0, 1.0)]
    return -d[0] / (d[1] - d[0]), d


def test_island_fixture_prediction_matches_direct_energy():
    spec, (top, left, h, w) = island_fixture()
    field = generate_field(spec)
    mask = rect((30, 30), top, left, h, w)
    pred = predict_flashpoint_priority(mask, field, 0, 1, PrioritySet(1.0, 0.0, 1.0))
    assert (pred.boundary, pred.area, pred.margin) == (68, 36, 1.0)
    assert pred.p_s_star == pytest.approx(2 * 68 / 36, abs=1e-12)
    crossing, _ = _exact_crossing(field, mask, 1.0)
    assert crossing == pytest.approx(pred.p_s_star, abs=1e-12)
    # and on a P_S grid the sign of dH changes exactly across P_S*
    base = LandUseGrid.uniform(30, 30, 0)
    flip = base.copy()
    flip.cells[mask.members] = 1
    for ps in np.arange(3.70, 3.86, 0.005):
        p = PrioritySet(1.0, ps, 1.0)
        dh = total_energy(flip, field, p).total - total_energy(base, field, p).total
        assert (dh < 0) == (ps > pred.p_s_star)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 8), st.integers(1, 10), st.integers(1, 10),
       st.floats(0.1, 5.0), st.floats(0.1, 3.0), st.floats(0.0, 10.0))
def test_delta_f_equals_direct_energy_difference(h, w, top, left, margin, pc, ps):
    shape = (20, 20)
    field = _island_field(shape, top, left, h, w, margin)
    mask = rect(shape, top, left, h, w)
    length, area = boundary_and_area(mask, "exact")
    est = nucleation_estimate(mask, boundary_cost(PrioritySet(pc, 0.0, 1.0)), ps * margin, "exact")
    _, (d0, d1) = _exact_crossing(field, mask, pc)
    direct = d0 + ps * (d1 - d0)
    assert est.delta_f == pytest.approx(direct, abs=1e-9)
    if abs(direct) > 1e-9:
        assert est.flips == (direct < 0)


def test_prediction_scaling():
    shape = (16, 16)
    mask = rect(shape, 5, 5, 4, 4)
    p1 = predict_flashpoint_priority(mask, _island_field(shape, 5, 5, 4, 4, 1.0), 0, 1, PrioritySet(1.0))
    p2 = predict_flashpoint_priority(mask, _island_field(shape, 5, 5, 4, 4, 1.0), 0, 1, PrioritySet(2.0))
    p3 = predict_flashpoint_priority(mask, _island_field(shape, 5, 5, 4, 4, 3.0), 0, 1, PrioritySet(1.0))
    p4 = predict_flashpoint_priority(mask, _island_field(shape, 5, 5, 4, 4, 1e9), 0, 1, PrioritySet(1.0))
    assert p2.p_s_star == pytest.approx(2 * p1.p_s_star)
    assert p3.p_s_star == pytest.approx(p1.p_s_star / 3)
    assert p4.p_s_star < 1e-7


def test_edge_mode_uses_three_pairs_per_edge():
    shape = (16, 16)
    mask = rect(shape, 5, 5, 4, 4)
    p = predict_flashpoint_priority(mask, _island_field(shape, 5, 5, 4, 4, 1.0), 0, 1,
                                    PrioritySet(1.0), mode="edge")
    assert (p.boundary, p.delta_e_m) == (16, 6.0)
    assert p.p_s_star == pytest.approx(6.0)


def test_no_onsite_incentive_is_distinct():
    shape = (10, 10)
    mask = rect(shape, 3, 3, 3, 3)
    with pytest.raises(NoOnsiteIncentive):
        predict_flashpoint_priority(mask, _island_field(shape, 3, 3, 3, 3, -1.0), 0, 1, PrioritySet())
    with pytest.raises(NoOnsiteIncentive):
        predict_flashpoint_priority(mask, SuitabilityField.zeros(10, 10), 0, 1, PrioritySet())


def test_zero_temperature_optimum_cuts_corners():
    spec, (top, left, h, w) = island_fixture()
    field = generate_field(spec)
    mask = rect((30, 30), top, left, h, w)
    ps, region = lattice_flip_priority(mask, field, 0, 1, PrioritySet(1.0))
    # the corner-cut octagon (32 parcels, 60 boundary pairs) beats the full square
    assert region.area == 32 and region.moore_pairs() == 60
    assert ps == pytest.approx(3.75, abs=1e-9)
    below = optimal_flip_region(mask, field, 0, 1, PrioritySet(1.0, 3.74, 1.0))
    above = optimal_flip_region(mask, field, 0, 1, PrioritySet(1.0, 3.76, 1.0))
    assert below.area == 0 and above.area >= 32
    assert optimal_flip_region(mask, field, 0, 1, PrioritySet(1.0, 4.5, 1.0)).area == 36


def test_mask_and_prediction_csv(tmp_path):
    m = rect((4, 5), 1, 1, 2, 3)
    write_mask_csv(m, tmp_path / "m.csv")
    assert np.array_equal(read_mask_csv(tmp_path / "m.csv").members, m.members)
    p = predict_flashpoint_priority(m, _island_field((4, 5), 1, 1, 2, 3, 1.0), 0, 1, PrioritySet())
    write_prediction_csv([p], tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "L,A,mode,deltaEM,m,P_S_star" and lines[1].startswith(f"{p.boundary},6,exact,2.0,1.0,")
