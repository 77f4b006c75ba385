import gzip
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from oracles import RefMRG32k3a, p2_subset_sum
from tauleap_rqmc.points import (
    DigitalNetB2,
    DirectionNumberError,
    LatticeRule,
    MRG32k3a,
    PointSet,
    WeightsSpec,
    baker,
    korobov,
    lattice_coordinate,
    lattice_search,
    lms_scramble,
    load_direction_numbers,
    new_randomization,
    p_alpha_discrepancy,
    random_lms,
    randomize,
    rank_gf2,
    rng_stream,
)
from tauleap_rqmc.points import rng as rngmod


# -- generator ---------------------------------------------------------------
def test_mrg_first_outputs_match_recurrence():
    ref = RefMRG32k3a()
    want = [ref.next() for _ in range(1000)]
    got = MRG32k3a().random(1000)
    assert np.array_equal(got, want)
    assert got[0] == pytest.approx(0.127011122046577, abs=1e-14)


def test_mrg_determinism_and_streams():
    a = rng_stream(12345, 3).random(100)
    b = rng_stream(12345, 3).random(100)
    assert np.array_equal(a, b)
    c = rng_stream(12345, 4).random(100)
    assert not np.array_equal(a, c)


def test_mrg_jump_matrices_agree_with_stepping():
    e = 1000
    A1 = rngmod._matpow(rngmod._A1, e, rngmod.M1)
    A2 = rngmod._matpow(rngmod._A2, e, rngmod.M2)
    seed = (12345,) * 6
    ref = RefMRG32k3a(seed)
    for _ in range(e):
        ref.next()
    assert list(rngmod._matvec(A1, seed[:3], rngmod.M1)) == ref.s[:3]
    assert list(rngmod._matvec(A2, seed[3:], rngmod.M2)) == ref.s[3:]
    # 2^76 via squaring equals the binary power
    assert rngmod._matpow2(rngmod._A1, 76, rngmod.M1) == rngmod._matpow(rngmod._A1, 2**76, rngmod.M1)


def test_mrg_substream_spawn_consistent():
    g = MRG32k3a(7, stream=2)
    assert np.array_equal(g.spawn(3).random(10), MRG32k3a(7, stream=2, substream=3).random(10))


def test_mrg_uniformity_ks():
    u = MRG32k3a(2024).random(10**5)
    assert stats.kstest(u, "uniform").pvalue > 0.001
    assert u.min() > 0 and u.max() < 1


# -- lattices ----------------------------------------------------------------
def test_lattice_coordinate_examples():
    rule = LatticeRule(4, (1, 3))
    assert lattice_coordinate(rule, 3, 1) == 0.25
    assert all(lattice_coordinate(rule, 0, j) == 0.0 for j in range(2))
    rule = LatticeRule(8, (1, 5))
    assert rule.points()[:, 0].tolist() == [i / 8 for i in range(8)]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10), st.integers(1, 6), st.data())
def test_lattice_projection_law(k, dim, data):
    n = 2**k
    a = [1] + [data.draw(st.integers(0, n // 2 - 1)) * 2 + 1 if n > 1 else 1 for _ in range(dim - 1)]
    P = LatticeRule(n, tuple(a)).points()
    for j in range(dim):
        assert np.array_equal(np.sort(P[:, j]), np.arange(n) / n)


def test_discrepancy_examples():
    assert p_alpha_discrepancy(LatticeRule(1, (1,)), WeightsSpec(0.6)) == pytest.approx(0.6 * 2 * math.pi**2 / 6)
    assert p_alpha_discrepancy(LatticeRule(2, (1,)), WeightsSpec(1.0)) == pytest.approx(math.pi**2 / 12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 6), st.integers(1, 4), st.floats(0.05, 0.95), st.data())
def test_discrepancy_product_identity_vs_subsets(k, dim, rho, data):
    n = 2**k
    a = tuple([1] + [data.draw(st.integers(0, max(n // 2 - 1, 0))) * 2 + 1 if n > 1 else 1 for _ in range(dim - 1)])
    rule = LatticeRule(n, a)
    got = p_alpha_discrepancy(rule, WeightsSpec(rho))
    want = p2_subset_sum(n, a, rho)
    assert got == pytest.approx(want, rel=1e-12, abs=1e-14)


def test_lattice_search_exhaustive_small():
    rule = lattice_search(8, 2)
    vals = {a: p_alpha_discrepancy(LatticeRule(8, (1, a))) for a in (1, 3, 5, 7)}
    assert rule.a[0] == 1 and rule.a[1] in vals
    assert vals[rule.a[1]] == min(vals.values())
    assert rule.a[1] == min(a for a, v in vals.items() if v == min(vals.values()))


def test_lattice_search_single_dimension():
    assert lattice_search(64, 1).a == (1,)


@pytest.mark.parametrize("n,dim", [(64, 3), (256, 4), (1024, 6)])
def test_lattice_search_beats_korobov(n, dim):
    assert p_alpha_discrepancy(lattice_search(n, dim)) <= p_alpha_discrepancy(korobov(n, dim))


def test_lattice_search_decreasing_in_n():
    d = [p_alpha_discrepancy(lattice_search(2**k, 4)) for k in range(4, 11)]
    assert all(x > y for x, y in zip(d, d[1:]))


def test_lattice_cache_matches_search():
    from tauleap_rqmc.points import lattice_rule

    for n in (16, 256, 2048):
        assert lattice_rule(n, 6).a == lattice_search(n, 6).a


# -- randomizations ----------------------------------------------------------
def test_shift_and_baker_examples():
    rule = LatticeRule(10, (1,))
    r = new_randomization(rule, "shift", MRG32k3a(1))
    object.__setattr__(r, "shift", np.array([0.2]))
    assert randomize(rule, r, 9, 0) == pytest.approx(0.1)
    assert baker(0.75) == pytest.approx(0.5)
    assert baker(0.25) == pytest.approx(0.5)


def test_baker_range_and_slope():
    u = np.linspace(0, 1, 2001)
    v = baker(u)
    assert v.min() >= 0 and v.max() <= 1
    slopes = np.diff(v) / np.diff(u)
    assert np.allclose(np.abs(slopes), 2.0)


def test_digital_shift_of_origin():
    net = DigitalNetB2.sobol(3, 2)
    r = new_randomization(net, "digital-shift", MRG32k3a(5))
    word = int(r.shift[1])
    assert randomize(net, r, 0, 1) == pytest.approx((word + 0.5) / 2**31)


def test_incompatible_randomization():
    with pytest.raises(TypeError):
        new_randomization(LatticeRule(8, (1,)), "lms-shift", MRG32k3a())
    with pytest.raises(TypeError):
        new_randomization(DigitalNetB2.sobol(3, 2), "shift", MRG32k3a())


@pytest.mark.parametrize("family", ["lat", "lat-baker", "net"])
def test_marginal_uniformity(family):
    ps = PointSet(family, 64, 4)
    base = MRG32k3a(11)
    vals = {(i, j): [] for i in (0, 5, 63) for j in (0, 3)}
    for r in range(200):
        U = ps.sample(base.spawn(r))
        for (i, j), lst in vals.items():
            lst.append(U[i, j])
    for lst in vals.values():
        assert stats.kstest(lst, "uniform").pvalue > 0.001


def test_single_value_agrees_with_array():
    for fam in ("lat", "lat-baker", "net"):
        ps = PointSet(fam, 32, 5)
        r = ps.new_randomization(MRG32k3a(3))
        U = randomize(ps.construction, r)
        assert randomize(ps.construction, r, 7, 4) == pytest.approx(U[7, 4], abs=0)
        assert np.array_equal(ps.block(r, 2, 5), U[:, 2:5])


# -- digital nets ------------------------------------------------------------
def test_net_first_dimension_identity():
    net = DigitalNetB2.sobol(3, 4)
    assert net.coordinate(5, 0) == 5 / 8
    assert net.points()[:, 0].tolist() == [i / 8 for i in range(8)]


def test_net_matches_scipy_sobol_sets():
    from scipy.stats import qmc

    k, dim = 8, 6
    ours = DigitalNetB2.sobol(k, dim).points()[:, 1:]
    ref = qmc.Sobol(dim, scramble=False).random(2**k)[:, 1:dim]
    a = {tuple(r) for r in np.round(ours * 2**k).astype(int)}
    b = {tuple(r) for r in np.round(ref * 2**k).astype(int)}
    assert a == b


def test_net_column_two_upper_triangular_invertible():
    net = DigitalNetB2.sobol(3, 2)
    cols = net.C[1]
    # k x k top block: column c has its lowest set digit at row c (upper triangular, unit diagonal)
    block = [[(int(cols[c]) >> (31 - 1 - r)) & 1 for c in range(3)] for r in range(3)]
    assert all(block[r][r] == 1 for r in range(3))
    assert all(block[r][c] == 0 for r in range(3) for c in range(r))
    assert rank_gf2(cols) == 3


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 12), st.integers(1, 8), st.integers(0, 2**31))
def test_lms_preserves_rank(k, dim, seed):
    net = DigitalNetB2.sobol(k, dim)
    L = random_lms(MRG32k3a(seed % (2**31 - 1) + 1), dim)
    for j in range(dim):
        row = [int(L[j, r]) for r in range(31)]
        assert all((row[r] >> (30 - r)) & 1 for r in range(31))  # unit diagonal
        assert all((row[r] & ((1 << (30 - r)) - 1)) == 0 for r in range(31))  # lower triangular
    C2 = lms_scramble(net.C, L)
    assert all(rank_gf2(C2[j]) == k for j in range(dim))


def test_net_projection_law_after_scramble():
    net = DigitalNetB2.sobol(6, 3)
    r = new_randomization(net, "lms-shift", MRG32k3a(4))
    U = randomize(net, r)
    for j in range(3):
        cells = np.floor(U[:, j] * 64).astype(int)
        assert sorted(cells) == list(range(64))


def test_direction_number_file_errors(tmp_path):
    dn = load_direction_numbers()
    assert dn.max_dim == 21201
    with pytest.raises(DirectionNumberError):
        dn.matrices(4, 25000)
    bad = tmp_path / "bad.txt"
    bad.write_text("d s a m_i\n2 1 0 1\n3 2 1 1\n")
    with pytest.raises(DirectionNumberError):
        load_direction_numbers(bad)
    good = tmp_path / "good.txt.gz"
    with gzip.open(good, "wt") as fh:
        fh.write("d s a m_i\n2 1 0 1\n3 2 1 1 3\n")
    small = load_direction_numbers(good)
    assert small.max_dim == 3
    assert np.array_equal(small.matrices(5, 3), dn.matrices(5, 3))


def test_direction_env_override(tmp_path, monkeypatch):
    f = tmp_path / "dn.txt"
    f.write_text("2 1 0 1\n")
    monkeypatch.setenv("TAULEAP_RQMC_DIRECTION_NUMBERS", str(f))
    assert load_direction_numbers().max_dim == 2
