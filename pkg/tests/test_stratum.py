import random

import numpy as np
import pytest

from strbc import _modp
from strbc.cyclotomic import CycNum
from strbc.finite_field import AddChar, MultChar, quadratic_residue_char
from strbc.gauss import NonUnitQuotient, normalized_sign
from strbc.local_model import (
    MatF,
    NotInSubfield,
    EvenExponent,
    TowerConfig,
    build_tower,
    build_Wz,
    inverse_one_plus_nil,
)
from strbc.stratum import (
    BUILTIN_CASE_NAMES,
    R1_CASE_NAMES,
    DegenerateX,
    LinearizationInvalid,
    NonNegativeValuation,
    NotInDomain,
    NotMinimal,
    NotSkew,
    SimpleCharSpec,
    StratumSpec,
    ZeroY,
    _alpha_fixed_basis,
    build_Dj_forms,
    builtin_case,
    by_oracle,
    bz_aux_independence,
    bz_oracle,
    default_chars,
    epsilon_z,
    epsilon_z_invariance,
    eval_simple_char,
    minimality_check,
    quotient_form,
    solve_Y_from_X,
)

CLOSED_MAGNITUDE = {"u1": 2, "e3f1": 6, "e1f2": 24, "e3f2": 1944, "e5f1": 18}


def std_psi(tower):
    return AddChar(tower.k, 1)


# -- minimality --------------------------------------------------------------


def test_minimality_examples():
    t = build_tower(TowerConfig(q=3, e=3, f=1, N=8))
    assert minimality_check(t, t.e_monomial(-1, t.zeta))
    assert minimality_check(t, t.e_monomial(-1))
    # Elements of F are central: never minimal.
    assert not minimality_check(t, t.varpi_F().inverse())
    # Valuation divisible by e with a residue coefficient that generates
    # nothing new.
    assert not minimality_check(t, t.e_monomial(-3, t.zeta))


def test_minimality_needs_negative_valuation():
    t = build_tower(TowerConfig(q=3, e=3, f=1, N=8))
    with pytest.raises(NonNegativeValuation):
        minimality_check(t, t.e_monomial(0))


def test_minimality_unramified_direction():
    t = build_tower(TowerConfig(q=3, e=1, f=2, N=6))
    assert minimality_check(t, t.e_monomial(-1, t.zeta))
    assert not minimality_check(t, t.e_monomial(-1))  # lies in F


# -- stratum validation ------------------------------------------------------


def test_builtin_cases_construct():
    for name in BUILTIN_CASE_NAMES:
        s = builtin_case(name)
        assert s.r_list[0] % 2 == 1


def test_stratum_rejects_even_exponent():
    t = build_tower(TowerConfig(q=3, e=3, f=1, N=8))
    with pytest.raises(EvenExponent):
        StratumSpec(t, [t.e_monomial(-2)])


def test_stratum_rejects_non_skew():
    t = build_tower(TowerConfig(q=3, e=3, f=2, N=8))
    c = t.e_monomial(-1, t.zeta) + t.e_monomial(0, t.kE.one())
    with pytest.raises(ValueError):
        StratumSpec(t, [c])  # not a monomial


def test_stratum_rejects_nonnegative_valuation():
    t = build_tower(TowerConfig(q=3, e=3, f=1, N=8))
    with pytest.raises(NonNegativeValuation):
        StratumSpec(t, [t.e_monomial(1)])


def test_stratum_rejects_increasing_exponents():
    t = build_tower(
        TowerConfig(q=3, e=3, f=2, d=1, N=8, levels=((3, 2), (3, 1), (1, 1)))
    )
    with pytest.raises(ValueError):
        StratumSpec(t, [t.e_monomial(-1), t.e_monomial(-3, t.zeta)])


def test_stratum_rejects_deep_element_off_its_level():
    t = build_tower(
        TowerConfig(q=3, e=3, f=2, d=1, N=8, levels=((3, 2), (3, 1), (1, 1)))
    )
    # c_1 with a residue outside the level-1 subfield (f_1 = 1).
    with pytest.raises(NotInSubfield):
        StratumSpec(t, [t.e_monomial(-3, t.zeta), t.e_monomial(-1, t.zeta)])


def test_stratum_rejects_low_precision():
    t = build_tower(TowerConfig(q=3, e=5, f=1, N=4))
    with pytest.raises(Exception):
        StratumSpec(t, [t.e_monomial(-5, t.zeta)])


def test_stratum_rejects_non_minimal():
    t = build_tower(TowerConfig(q=3, e=3, f=1, N=8))
    with pytest.raises(NotMinimal):
        StratumSpec(t, [t.e_monomial(-3, t.zeta)])


# -- the quadratic forms -----------------------------------------------------


def test_Dj_forms_u1_empty():
    s = builtin_case("u1")
    assert build_Dj_forms(s, s.tower.kE.one()) == []


def test_Dj_forms_e3f1_nondegenerate_two_dim():
    s = builtin_case("e3f1")
    forms = build_Dj_forms(s, s.tower.kE.one())
    assert len(forms) == 1
    assert forms[0].dim == 2
    assert forms[0].is_nondegenerate()


def test_Dj_forms_zero_y():
    s = builtin_case("e3f1")
    with pytest.raises(ZeroY):
        build_Dj_forms(s, s.tower.kE.zero())


def test_quotient_form_degenerate_for_non_minimal():
    t = build_tower(TowerConfig(q=3, e=3, f=2, N=8))
    c = t.e_monomial(-3, t.zeta)  # not minimal, not central
    assert not minimality_check(t, c)
    form = quotient_form(t, c, t.kE.one())
    assert not form.is_nondegenerate()


def test_minimality_nondegeneracy_grid():
    # Minimality and nondegeneracy of the complement form co-occur.
    tested = 0
    for q, e, f, N in [(3, 3, 1, 8), (3, 1, 2, 6), (3, 5, 1, 12), (3, 3, 2, 8)]:
        t = build_tower(TowerConfig(q=q, e=e, f=f, N=N))
        coeffs = [t.kE.one(), t.zeta] if f > 1 else [t.kE.one()]
        for r in (1, 3, 5):
            if r + 2 > t.N:
                continue
            for cval in coeffs:
                c = t.e_monomial(-r, cval)
                if c.is_zero() or not c.is_skew():
                    continue
                from strbc.local_model import _is_in_F

                if _is_in_F(t, c):
                    # Central elements commute with everything; no form.
                    assert not minimality_check(t, c)
                    continue
                form = quotient_form(t, c, t.kE.one())
                assert minimality_check(t, c) == form.is_nondegenerate()
                tested += 1
    assert tested >= 8


# -- the sign ----------------------------------------------------------------


def test_epsilon_u1_is_plus_one():
    s = builtin_case("u1")
    assert epsilon_z(s, std_psi(s.tower)).value == 1


def test_epsilon_all_r1_cases():
    for name in R1_CASE_NAMES:
        s = builtin_case(name)
        res = epsilon_z(s, std_psi(s.tower))
        assert res.value == 1  # frozen by enumeration
        assert res.value**2 == 1


def test_epsilon_d1_not_a_unit_quotient():
    s = builtin_case("d1-tower")
    with pytest.raises(NonUnitQuotient):
        epsilon_z(s, std_psi(s.tower))


def test_epsilon_invariance_suite():
    for name in ("u1", "e3f1", "e1f2", "e5f1"):
        s = builtin_case(name)
        report = epsilon_z_invariance(s)
        assert report["ok"]
        assert len(report["psi_twists"]) == s.tower.k.q - 1
        assert len(report["uniformizer"]) == s.tower.kE.q - 1


def test_epsilon_invariance_multiplier_flips_for_f2():
    s = builtin_case("e1f2")
    report = epsilon_z_invariance(s)
    chi = quadratic_residue_char(s.tower.kE)
    flips = [r for r in report["uniformizer"]
             if r["sign"] != report["base"].value]
    # Non-square units flip the sign when f is even.
    assert len(flips) == (s.tower.kE.q - 1) // 2
    for r in flips:
        assert chi.sign(s.tower.kE.element(r["unit"])) == -1


# -- simple characters -------------------------------------------------------


def random_h1_element(s, rng, depth=3):
    t = s.tower
    A = MatF.zero(t)
    for m in range(1, depth + 1):
        vec = np.array([rng.randrange(t.p) for _ in range(t.n * t.f)])
        A = A + t.mat_from_layer(m, vec)
    return MatF.identity(t) + A


def random_unitary_element(s, rng, depth=3):
    # Cayley transform of a random alpha-fixed positive-depth element.
    t = s.tower
    A = MatF.zero(t)
    for m in range(1, depth + 1):
        fix = _alpha_fixed_basis(t, m)
        if fix.shape[0] == 0:
            continue
        combo = np.array([rng.randrange(t.p) for _ in range(fix.shape[0])])
        vec = combo @ fix % t.p
        if vec.any():
            A = A + t.mat_from_layer(m, vec)
    ident = MatF.identity(t, A.fprec)
    return (ident + A) @ inverse_one_plus_nil(ident - A)


def test_eval_identity_is_one():
    for name in R1_CASE_NAMES:
        s = builtin_case(name)
        big, root = default_chars(s)
        one = CycNum.one(s.tower.p)
        assert eval_simple_char(big, MatF.identity(s.tower)) == one
        assert eval_simple_char(root, MatF.identity(s.tower)) == one


def test_eval_multiplicative_on_random_pairs():
    rng = random.Random(5)
    for name in R1_CASE_NAMES:
        s = builtin_case(name)
        big, _ = default_chars(s)
        for _ in range(25):
            g = random_h1_element(s, rng)
            h = random_h1_element(s, rng)
            assert eval_simple_char(big, g @ h) == eval_simple_char(
                big, g
            ) * eval_simple_char(big, h)


def test_square_root_on_sigma_fixed():
    rng = random.Random(9)
    for name in R1_CASE_NAMES:
        s = builtin_case(name)
        big, root = default_chars(s)
        for _ in range(10):
            g = random_unitary_element(s, rng)
            v = eval_simple_char(root, g)
            assert v * v == eval_simple_char(big, g)


def test_eval_rejects_unit_level_offset():
    s = builtin_case("e3f1")
    big, _ = default_chars(s)
    t = s.tower
    g = MatF.identity(t) + t.mat_from_layer(0, np.eye(t.n * t.f)[0])
    with pytest.raises(NotInDomain):
        eval_simple_char(big, g)


def test_eval_u_side_rejects_non_unitary():
    rng = random.Random(13)
    s = builtin_case("e3f1")
    _, root = default_chars(s)
    g = random_h1_element(s, rng)
    with pytest.raises(NotInDomain):
        # A generic one-unit does not respect the Hermitian form.
        eval_simple_char(root, g)


def test_eval_off_window_raises():
    s = builtin_case("d1-tower")
    psi = std_psi(s.tower)
    xi = [s.tower.e_zero()] * 2 + [
        s.tower.e_monomial(-s.tower.e, s.tower.u)
    ]
    chi = SimpleCharSpec(s, psi, xi, side="gl")
    with pytest.raises(LinearizationInvalid):
        eval_simple_char(chi, MatF.identity(s.tower))


def test_char_spec_validation():
    s = builtin_case("e3f1")
    psi = std_psi(s.tower)
    xi = [s.tower.e_zero(), s.tower.e_monomial(-s.tower.e, s.tower.u)]
    with pytest.raises(ValueError):
        SimpleCharSpec(s, psi, xi, side="nope")
    with pytest.raises(ValueError):
        SimpleCharSpec(s, psi, xi[:1], side="gl")
    with pytest.raises(ValueError):
        SimpleCharSpec(s, AddChar(s.tower.k, 0), xi, side="gl")


# -- the coset solver --------------------------------------------------------


def test_solve_zero_X_gives_zero():
    for name in BUILTIN_CASE_NAMES:
        s = builtin_case(name)
        t = s.tower
        wz = build_Wz(t, s)
        zeros = [np.zeros(t.n * t.f, dtype=np.int64) for _ in wz.blocks]
        yp, P, Q = solve_Y_from_X(s, zeros, t.kE.one())
        assert yp.is_zero()


def test_solve_random_X_verifies_relation():
    # solve_Y_from_X asserts X alpha(X) = Y - alpha(Y) internally.
    rng = random.Random(3)
    for name in ("e3f1", "e1f2", "e5f1", "d1-tower"):
        s = builtin_case(name)
        t = s.tower
        wz = build_Wz(t, s)
        for y in t.kE.units():
            coords = []
            for b in wz.blocks:
                combo = np.array(
                    [rng.randrange(t.p) for _ in range(b.basis.shape[0])]
                )
                coords.append(combo @ b.basis % t.p)
            yp, P, Q = solve_Y_from_X(s, coords, y)
            assert set(P) == set(Q) == set(range(s.d + 2))


def test_solve_rejects_wrong_shape():
    s = builtin_case("e3f1")
    with pytest.raises(DegenerateX):
        solve_Y_from_X(s, [], s.tower.kE.one())


def test_solve_aux_component_supported():
    s = builtin_case("e3f1")
    t = s.tower
    wz = build_Wz(t, s)
    coords = [b.basis[0] for b in wz.blocks]
    yp0, _, _ = solve_Y_from_X(s, coords, t.kE.one())
    yp1, _, _ = solve_Y_from_X(
        s, coords, t.kE.one(), aux=t.e_monomial(0, t.kE.one())
    )
    assert not (yp0 - yp1).is_zero()


def test_bz_term_independent_of_aux():
    for name in ("u1", "e3f1", "e1f2"):
        s = builtin_case(name)
        t = s.tower
        chars = default_chars(s)
        wz = build_Wz(t, s)
        dim = wz.dim_k
        xv = tuple([1] * dim)
        aux_list = [t.e_monomial(0, t.kE.one())]
        if t.f > 1:
            aux_list.append(t.e_monomial(0, t.zeta))
        assert bz_aux_independence(s, chars, t.kE.one(), xv, aux_list)


# -- the oracles -------------------------------------------------------------


def test_by_oracle_closed_form():
    for name in R1_CASE_NAMES:
        s = builtin_case(name)
        chars = default_chars(s)
        sample = 120 if name == "e3f2" else None
        val = by_oracle(s, chars, (1, 1), sample=sample)
        assert val == CycNum.integer(CLOSED_MAGNITUDE[name], s.tower.p)


def test_by_oracle_sign_linearity():
    s = builtin_case("e3f1")
    chars = default_chars(s)
    assert by_oracle(s, chars, (1, -1)) == CycNum.integer(-6, 3)
    assert by_oracle(s, chars, (-1, -1)) == CycNum.integer(6, 3)


def test_by_oracle_off_window():
    s = builtin_case("d1-tower")
    psi = std_psi(s.tower)
    xi = [s.tower.e_zero()] * 2 + [
        s.tower.e_monomial(-s.tower.e, s.tower.u)
    ]
    chars = (
        SimpleCharSpec(s, psi, xi, side="gl"),
        SimpleCharSpec(s, psi, xi, side="u"),
    )
    with pytest.raises(LinearizationInvalid):
        by_oracle(s, chars, (1, 1))


def test_bz_oracle_vanishing_and_nonvanishing():
    for name in R1_CASE_NAMES:
        s = builtin_case(name)
        kE = s.tower.kE
        f = s.tower.f
        chars = default_chars(s)
        half = (kE.q - 1) // 2
        sample = 120 if name == "e3f2" else None
        v_f = bz_oracle(s, chars, MultChar(kE, half * f), sample=sample)
        v_f1 = bz_oracle(s, chars, MultChar(kE, half * (f - 1)), sample=sample)
        assert v_f == CycNum.zero(s.tower.p)
        # rho(-2) = +1 for the built-in residue data, eps = +1.
        assert v_f1 == CycNum.integer(CLOSED_MAGNITUDE[name], s.tower.p)


def test_bz_oracle_rejects_higher_order_restriction():
    s = builtin_case("e1f2")
    chars = default_chars(s)
    with pytest.raises(ValueError):
        bz_oracle(s, chars, MultChar(s.tower.kE, 1))
