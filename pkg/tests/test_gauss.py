import random

import pytest

from strbc.cyclotomic import CycNum, cyc_root
from strbc.finite_field import AddChar, get_field, quadratic_residue_char
from strbc.gauss import (
    DegenerateForm,
    EnumerationTooLarge,
    QuadSpace,
    TrivialAdditiveCharacter,
    gauss_sum_brute,
    gauss_sum_brute_slow,
    gauss_sum_closed,
    normalized_sign,
    one_dim_gauss_value,
)


def std_psi(field):
    return AddChar(field, 1)


def random_symmetric(field, n, rng):
    elems = list(field.elements())
    m = [[field.zero()] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            m[i][j] = m[j][i] = rng.choice(elems)
    return m


def test_empty_space():
    f3 = get_field(3)
    sp = QuadSpace(f3, [])
    assert gauss_sum_brute(sp, std_psi(f3)) == 1
    assert gauss_sum_closed(sp, std_psi(f3)) == 1
    assert normalized_sign(sp, std_psi(f3)).fourth_root == "+1"


def test_f3_one_dim():
    f3 = get_field(3)
    sp = QuadSpace.from_ints(f3, [[1]])
    expect = 1 + 2 * cyc_root(3, 1)
    assert gauss_sum_brute(sp, std_psi(f3)) == expect
    assert gauss_sum_closed(sp, std_psi(f3)) == expect


def test_f3_identity_two_dim():
    f3 = get_field(3)
    sp = QuadSpace.from_ints(f3, [[1, 0], [0, 1]])
    v = 1 + 2 * cyc_root(3, 1)
    assert gauss_sum_brute(sp, std_psi(f3)) == v * v
    assert gauss_sum_brute(sp, std_psi(f3)) == -3
    assert normalized_sign(sp, std_psi(f3)).value == -1


def test_f3_diag_1_2():
    f3 = get_field(3)
    sp = QuadSpace.from_ints(f3, [[1, 0], [0, 2]])
    assert gauss_sum_closed(sp, std_psi(f3)) == 3
    assert gauss_sum_brute(sp, std_psi(f3)) == 3
    assert normalized_sign(sp, std_psi(f3)).value == 1


def test_f5_one_dim():
    f5 = get_field(5)
    sp = QuadSpace.from_ints(f5, [[1]])
    expect = 1 + 2 * cyc_root(5, 1) + 2 * cyc_root(5, 4)
    assert gauss_sum_brute(sp, std_psi(f5)) == expect
    assert gauss_sum_closed(sp, std_psi(f5)) == expect


def test_g_squared_identity():
    for p, f in [(3, 1), (3, 2), (5, 1), (5, 2), (7, 1), (11, 1), (13, 1)]:
        fld = get_field(p, f)
        chi = quadratic_residue_char(fld)
        g = one_dim_gauss_value(fld, std_psi(fld))
        assert g * g == chi(-fld.one()).as_int() * fld.q


def test_brute_matches_closed_random_grid():
    rng = random.Random(7)
    for p, f in [(3, 1), (5, 1), (3, 2)]:
        fld = get_field(p, f)
        for n in range(1, 5):
            for _ in range(8):
                sp = QuadSpace(fld, random_symmetric(fld, n, rng))
                if not sp.is_nondegenerate():
                    continue
                assert gauss_sum_brute(sp, std_psi(fld)) == gauss_sum_closed(
                    sp, std_psi(fld)
                )


def test_vectorized_matches_slow_enumeration():
    rng = random.Random(11)
    for p, f in [(3, 1), (5, 1), (3, 2)]:
        fld = get_field(p, f)
        for n in (1, 2, 3):
            sp = QuadSpace(fld, random_symmetric(fld, n, rng))
            psi = AddChar(fld, rng.choice([u for u in fld.units()]))
            assert gauss_sum_brute(sp, psi) == gauss_sum_brute_slow(sp, psi)


def test_orthogonal_sum_multiplicativity():
    rng = random.Random(3)
    f5 = get_field(5)
    for _ in range(6):
        a = random_symmetric(f5, 2, rng)
        b = random_symmetric(f5, 1, rng)
        joint = [
            [a[0][0], a[0][1], f5.zero()],
            [a[1][0], a[1][1], f5.zero()],
            [f5.zero(), f5.zero(), b[0][0]],
        ]
        psi = std_psi(f5)
        assert gauss_sum_brute(QuadSpace(f5, joint), psi) == gauss_sum_brute(
            QuadSpace(f5, a), psi
        ) * gauss_sum_brute(QuadSpace(f5, b), psi)


def test_degenerate_radical_scaling():
    f3 = get_field(3)
    psi = std_psi(f3)
    # diag(1, 2, 0): radical of dimension 1.
    sp = QuadSpace.from_ints(f3, [[1, 0, 0], [0, 2, 0], [0, 0, 0]])
    quot = QuadSpace.from_ints(f3, [[1, 0], [0, 2]])
    assert gauss_sum_brute(sp, psi) == 3 * gauss_sum_brute(quot, psi)
    with pytest.raises(DegenerateForm):
        gauss_sum_closed(sp, psi)


def test_threaded_sum_matches_serial():
    f3 = get_field(3)
    sp = QuadSpace.from_ints(
        f3, [[1, 1, 0, 0], [1, 2, 0, 1], [0, 0, 1, 0], [0, 1, 0, 2]]
    )
    psi = std_psi(f3)
    assert gauss_sum_brute(sp, psi, threads=4) == gauss_sum_brute(sp, psi)


def test_errors():
    f3 = get_field(3)
    sp = QuadSpace.from_ints(f3, [[1]])
    with pytest.raises(TrivialAdditiveCharacter):
        gauss_sum_brute(sp, AddChar(f3, 0))
    with pytest.raises(EnumerationTooLarge):
        gauss_sum_brute(sp, std_psi(f3), bound=2)


def test_normalized_sign_odd_dimension_is_fourth_root():
    f3 = get_field(3)
    sp = QuadSpace.from_ints(f3, [[1]])
    res = normalized_sign(sp, std_psi(f3))
    assert res.value is None
    assert "imag" in res.fourth_root  # chi(-1) = -1 over F_3


def test_psi_twist_scales_by_quadratic_character():
    f5 = get_field(5)
    chi = quadratic_residue_char(f5)
    sp = QuadSpace.from_ints(f5, [[1]])
    base = gauss_sum_brute(sp, std_psi(f5))
    for a in f5.units():
        assert gauss_sum_brute(sp, AddChar(f5, a)) == chi(a).as_int() * base
