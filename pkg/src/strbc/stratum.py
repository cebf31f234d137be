"""Skew strata on the ramified tower, their quadratic forms and sign, simple
characters in the exact linearization window, and the brute-force coefficient
oracles.

A stratum is a list of monomial elements c_0, ..., c_d of strictly decreasing
odd negative valuation, each skew and living in its level subfield, each
minimal at its level.  On top of a stratum sit:

* the block quadratic forms D_j on the graded coset space W_z and the
  normalized Gauss-sum sign attached to them (``epsilon_z``), together with
  its character-twist and uniformizer-rechoice covariance suite;
* simple characters (``SimpleCharSpec``/``eval_simple_char``), evaluated
  exactly on their linearization window r_0 = 1 as the product of a
  determinant part and an additive trace part;
* the coset-representative solver ``solve_Y_from_X`` (gradewise linear
  algebra for the relation X alpha(X) = Y - alpha(Y));
* the two enumeration oracles ``by_oracle`` and ``bz_oracle`` that recompute
  the quadratic-relation coefficients from first principles and cross-check
  every identity they rely on term by term.

All values are exact cyclotomic integers; enumerations refuse to approximate.
"""

from __future__ import annotations

import itertools
import math
import random

import numpy as np

from . import _modp
from .cyclotomic import CycNum, cyc_root
from .finite_field import (
    AddChar,
    FqElem,
    MultChar,
    pow_fq,
    quadratic_residue_char,
)
from .gauss import (
    NonUnitQuotient,
    QuadSpace,
    SignResult,
    _phase_histogram,
    normalized_sign,
)
from .local_model import (
    EElem,
    EvenExponent,
    MatF,
    NotInSubfield,
    PrecisionTooLow,
    TowerConfig,
    TowerSpec,
    ZeroElement,
    _is_in_F,
    build_tower,
    build_Wz,
    h1_lattice,
    intersect_row_spaces,
    inverse_one_plus_nil,
    inverse_unit,
    iwahori_indices,
    j0_lattice,
    level_gens,
    valuation,
)


class NonNegativeValuation(ValueError):
    pass


class NotSkew(ValueError):
    pass


class NotMinimal(ValueError):
    pass


class ZeroY(ValueError):
    pass


class NotInDomain(ValueError):
    pass


class LinearizationInvalid(ValueError):
    pass


class NoSolution(ArithmeticError):
    pass


class DegenerateX(ValueError):
    pass


class ConstancyViolated(AssertionError):
    pass


class PathMismatch(AssertionError):
    pass


# ---------------------------------------------------------------------------
# Small graded linear-algebra helpers.


def _tower_cache(tower: TowerSpec) -> dict:
    cache = getattr(tower, "_stratum_cache", None)
    if cache is None:
        cache = {}
        tower._stratum_cache = cache
    return cache


def _alpha_matrix(tower: TowerSpec, m: int) -> np.ndarray:
    """Matrix of alpha on degree-m layer coordinates (columns are images)."""
    cache = _tower_cache(tower)
    key = ("alpha", m)
    hit = cache.get(key)
    if hit is not None:
        return hit
    dim = tower.n * tower.f
    amat = np.zeros((dim, dim), dtype=np.int64)
    for col in range(dim):
        vec = np.zeros(dim, dtype=np.int64)
        vec[col] = 1
        amat[:, col] = tower.layer_coords(
            tower.alpha(tower.mat_from_layer(m, vec)), m
        )
    cache[key] = amat
    return amat


def _alpha_fixed_basis(tower: TowerSpec, m: int) -> np.ndarray:
    cache = _tower_cache(tower)
    key = ("alpha-fixed", m)
    hit = cache.get(key)
    if hit is not None:
        return hit
    dim = tower.n * tower.f
    amat = _alpha_matrix(tower, m)
    fixed = _modp.nullspace(
        (amat - np.eye(dim, dtype=np.int64)) % tower.p, tower.p
    )
    cache[key] = fixed
    return fixed


def _complete_basis(lower: np.ndarray, upper: np.ndarray, p: int) -> np.ndarray:
    """Rows of `upper` completing a basis of `lower` to one of `upper`."""
    want = _modp.rank(upper, p) - _modp.rank(lower, p)
    cols = upper.shape[1]
    span = [row % p for row in lower]
    out: list[np.ndarray] = []
    for v in upper:
        if len(out) == want:
            break
        if span:
            if _modp.in_row_space(v, np.array(span), p):
                continue
        elif not np.any(v % p):
            continue
        out.append(v % p)
        span.append(v % p)
    if len(out) != want:
        raise AssertionError("could not complete the basis")
    return np.array(out, dtype=np.int64).reshape(want, cols)


def _in_level(tower: TowerSpec, x: EElem, level: int) -> bool:
    """Whether x lies in the level-th subfield of the chain."""
    e_l, f_l = tower.levels[level]
    step = tower.e // e_l
    for i, c in x.coeffs.items():
        if i % step:
            return False
        if pow_fq(c, tower.p**f_l) != c:
            return False
    return True


# ---------------------------------------------------------------------------
# Strata.


class StratumSpec:
    """A skew stratum: monomials c_0, ..., c_d over a fixed tower.

    Validates odd strictly-decreasing exponents, skewness, membership of each
    c_j in its level subfield, sufficient precision, and minimality of each
    c_j relative to the next level's centralizer.
    """

    def __init__(self, tower: TowerSpec, c_elems, check_minimality: bool = True):
        self.tower = tower
        c_elems = tuple(c_elems)
        if not c_elems:
            raise ValueError("a stratum needs at least one element")
        self.c_elems = c_elems
        self.d = len(c_elems) - 1
        if self.d + 2 > len(tower.levels):
            raise NotInSubfield(
                f"{self.d + 1} stratum elements need a subfield chain of "
                f"length {self.d + 2}, tower has {len(tower.levels)}"
            )
        r_list = []
        for j, c in enumerate(c_elems):
            if c.is_zero():
                raise ZeroElement("stratum element is zero")
            if len(c.coeffs) != 1:
                raise ValueError("stratum elements must be monomials")
            v = c.val()
            if v >= 0:
                raise NonNegativeValuation(f"v(c_{j}) = {v} must be negative")
            r = -v
            if r % 2 == 0:
                raise EvenExponent(f"exponent r_{j} = {r} must be odd")
            if not c.is_skew():
                raise NotSkew(f"c_{j} is not skew under the conjugation")
            if not _in_level(tower, c, j):
                raise NotInSubfield(f"c_{j} does not lie in level {j}")
            r_list.append(r)
        if any(a <= b for a, b in zip(r_list, r_list[1:])):
            raise ValueError(f"exponents must strictly decrease, got {r_list}")
        self.r_list = tuple(r_list)
        self.s_list = tuple((r - 1) // 2 for r in r_list)
        if tower.N < r_list[0] + 2:
            raise PrecisionTooLow(
                f"precision N = {tower.N} too low for r_0 = {r_list[0]}"
            )
        if check_minimality:
            for j in range(self.d + 1):
                if not self._level_minimal(j):
                    raise NotMinimal(f"c_{j} is not minimal at level {j}")

    def gamma(self, j: int) -> EElem:
        acc = self.tower.e_zero()
        for c in self.c_elems[j:]:
            acc = acc + c
        return acc

    def _level_minimal(self, j: int) -> bool:
        # c_j must cut the declared level-(j+1) centralizer down to the
        # declared level-j one; a c_j generating less (e.g. a central
        # element) leaves a larger kernel.
        tower = self.tower
        upper = tower.cent_layer(_declared_gens(tower, j + 1), 0)
        lower = tower.cent_layer(_declared_gens(tower, j), 0)
        kern = _ad_kernel(tower, self.c_elems[j], upper)
        return _modp.rank(kern, tower.p) == _modp.rank(lower, tower.p)

    def __repr__(self):
        return f"StratumSpec(r={list(self.r_list)}, d={self.d}, {self.tower!r})"


def _declared_gens(tower: TowerSpec, j: int) -> tuple[EElem, ...]:
    """Field generators of the level-j subfield named in the tower chain."""
    e_j, f_j = tower.levels[j]
    gens = [tower.e_monomial(tower.e // e_j)]
    if f_j > 1:
        q_sub = tower.p**f_j
        gens.append(
            tower.e_monomial(0, tower.kE.exp((tower.kE.q - 1) // (q_sub - 1)))
        )
    return tuple(gens)


def _ad_kernel(tower: TowerSpec, c: EElem, space: np.ndarray) -> np.ndarray:
    """Basis of {X in span(space), degree 0 : [X, c] = 0 mod higher degree}."""
    v = c.val()
    cm = tower.m_of(c)
    rows = []
    for row in space:
        X = tower.mat_from_layer(0, row)
        rows.append(tower.layer_coords((X @ cm) - (cm @ X), v))
    if not rows:
        return space
    amap = np.array(rows, dtype=np.int64)
    combos = _modp.nullspace(amap.T, tower.p)
    if combos.size == 0:
        return np.zeros((0, space.shape[1]), dtype=np.int64)
    return _modp.row_space_basis(combos @ space % tower.p, tower.p)


def minimality_check(t: TowerSpec, c: EElem) -> bool:
    """Whether the single-element stratum generated by c is minimal.

    Graded criterion: the kernel of ad_c from the degree-0 layer to the
    degree-v(c) layer must be exactly one copy of the residue field of E,
    i.e. commuting with c to leading order already forces membership in the
    E-line modulo depth.
    """
    if c.is_zero():
        raise ZeroElement("zero element")
    if c.val() >= 0:
        raise NonNegativeValuation(f"v(c) = {c.val()} must be negative")
    full = np.eye(t.n * t.f, dtype=np.int64)
    kern = _ad_kernel(t, c, full)
    return _modp.rank(kern, t.p) == t.f


# ---------------------------------------------------------------------------
# Quadratic forms on the coset space.


def _block_gram_raw(tower: TowerSpec, c: EElem, basis: np.ndarray, grade: int,
                    scalar: EElem, c_first: bool) -> np.ndarray:
    """Raw (unsymmetrized) Gram of X -> Tr(scalar * [c, X] * alpha(X)) at the
    residue level, on the given degree-`grade` coordinate basis."""
    p = tower.p
    cm = tower.m_of(c)
    wmat = tower.m_of(scalar)
    mats = [tower.mat_from_layer(grade, row) for row in basis]
    amats = [tower.alpha(M) for M in mats]
    nb = len(mats)
    raw = np.zeros((nb, nb), dtype=np.int64)
    for a in range(nb):
        if c_first:
            br = (cm @ mats[a]) - (mats[a] @ cm)
        else:
            br = (mats[a] @ cm) - (cm @ mats[a])
        left = wmat @ br
        for b in range(nb):
            raw[a, b] = (left @ amats[b]).trace().coeff(0) % p
    return raw


def _symmetrized_space(tower: TowerSpec, raw: np.ndarray) -> QuadSpace:
    inv2 = (tower.p + 1) // 2
    sym = (raw + raw.T) * inv2 % tower.p
    return QuadSpace.from_ints(tower.k, sym.tolist())


def quotient_form(t: TowerSpec, c: EElem, y: FqElem) -> QuadSpace:
    """The form X -> Tr(y^-1 w_E (X c - c X) alpha(X)) on a complement of
    the centralizer of c inside the degree-s layer, s = (r - 1) / 2.

    Well defined on the complement for any c (the centralizer is in the
    radical); nondegenerate exactly when c is minimal.
    """
    if c.is_zero():
        raise ZeroElement("zero element")
    if not y:
        raise ZeroY("y must be a unit")
    v = c.val()
    if v >= 0:
        raise NonNegativeValuation(f"v(c) = {v} must be negative")
    if v % 2 == 0:
        raise EvenExponent(f"exponent {-v} must be odd")
    grade = (-v - 1) // 2
    # Complete from the full E-line: the form descends to the complement
    # for any c, and its radical there detects non-minimality.
    lower = t.cent_layer(_declared_gens(t, 0), grade)
    comp = _complete_basis(lower, np.eye(t.n * t.f, dtype=np.int64), t.p)
    raw = _block_gram_raw(
        t, c, comp, grade, t.e_monomial(1, y.inverse()), c_first=False
    )
    return _symmetrized_space(t, raw)


def build_Dj_forms(s: StratumSpec, y: FqElem) -> list[QuadSpace]:
    """The block forms D_j(X, X) = Tr(y^-1 w_E (X c_j - c_j X) alpha(X)) on
    the graded coset space, one QuadSpace per level."""
    if not y:
        raise ZeroY("y must be a unit")
    tower = s.tower
    wz = build_Wz(tower, s)
    scalar = tower.e_monomial(1, y.inverse())
    out = []
    for block in wz.blocks:
        if block.basis.shape[0] == 0:
            continue
        raw = _block_gram_raw(
            tower, s.c_elems[block.j], block.basis, block.grade, scalar,
            c_first=False,
        )
        out.append(_symmetrized_space(tower, raw))
    return out


def _gauss_gram(s: StratumSpec, wz, scalar: EElem) -> np.ndarray:
    """Block-diagonal raw Gram of the Gauss-sum phase on full W_z coords."""
    tower = s.tower
    blocks = [
        _block_gram_raw(
            tower, s.c_elems[b.j], b.basis, b.grade, scalar, c_first=True
        )
        for b in wz.blocks
    ]
    dim = sum(b.shape[0] for b in blocks)
    gram = np.zeros((dim, dim), dtype=np.int64)
    at = 0
    for b in blocks:
        k = b.shape[0]
        gram[at : at + k, at : at + k] = b
        at += k
    return gram


def epsilon_z(s: StratumSpec, psi: AddChar, threads: int = 1,
              scale_unit: FqElem | None = None) -> SignResult:
    """The sign of the normalized quadratic Gauss sum attached to the stratum.

    Evaluates sum over X in W_z of psi(Tr(w_E (c_j X - X c_j) alpha(X)))
    brute force, cross-checks against the closed diagonalized form, divides
    by the square root of #W_z, and asserts the quotient is +-1.  Passing
    ``scale_unit`` u computes the sign for the rechosen uniformizer u w_E.
    """
    tower = s.tower
    unit = tower.kE.one() if scale_unit is None else scale_unit
    if not unit:
        raise ZeroY("uniformizer rescale unit must be nonzero")
    wz = build_Wz(tower, s)
    gram = _gauss_gram(s, wz, tower.e_monomial(1, unit))
    space = _symmetrized_space(tower, gram)
    if not space.is_nondegenerate():
        # The phase form can degenerate (a wild sub-extension kills the
        # trace residue on a whole block); the raw sum is then a higher
        # power of p and there is no sign to extract.
        twist = psi.twist.coeffs[0]
        counts = _phase_histogram(gram * twist % tower.p, tower.p, wz.dim_k,
                                  threads=threads)
        total = CycNum.zero(tower.p)
        for t in range(tower.p):
            if counts[t]:
                total = total + int(counts[t]) * cyc_root(tower.p, t)
        root = CycNum.integer(math.isqrt(wz.size), tower.p)
        if total == root:
            return SignResult(1, "+1", total, wz.size, root)
        if total == -root:
            return SignResult(-1, "-1", total, wz.size, root)
        raise NonUnitQuotient(
            "degenerate phase form: the normalized sum is not a unit"
        )
    res = normalized_sign(space, psi, threads=threads)
    if res.value is None:
        raise AssertionError("Gauss-sum quotient is not a rational sign")
    # Cross-check against the D-form assembly at y = 1 (opposite bracket
    # order: complex conjugate sum, identical rational sign).
    if scale_unit is None:
        d_forms = build_Dj_forms(s, tower.kE.one())
        d_sign = 1
        for f in d_forms:
            d_sign *= normalized_sign(f, psi, threads=threads).value
        if d_sign != res.value:
            raise AssertionError("D-form sign disagrees with the Gauss sign")
    return res


def epsilon_z_invariance(s: StratumSpec, psi: AddChar | None = None,
                         threads: int = 1) -> dict:
    """Exhaustive invariance suite for the sign.

    (a) psi-twists by every residue of F-bullet-cross leave the sign alone;
    (b) rechoosing the uniformizer as u w_E multiplies the sign by
        chi_quad(u-bar)^(f-1) over the residue field of E.
    Returns a report with every checked pair and an overall flag.
    """
    tower = s.tower
    if psi is None:
        psi = AddChar(tower.k, 1)
    base = epsilon_z(s, psi, threads=threads)
    chi = quadratic_residue_char(tower.kE)
    psi_rows = []
    for a in tower.k.units():
        sign_a = epsilon_z(s, AddChar(tower.k, a), threads=threads).value
        psi_rows.append({"twist": a.coeffs[0], "sign": sign_a,
                         "matches": sign_a == base.value})
    unit_rows = []
    for u in tower.kE.units():
        sign_u = epsilon_z(s, psi, threads=threads, scale_unit=u).value
        predicted = base.value * chi.sign(u) ** (tower.f - 1)
        unit_rows.append({"unit": u.coeffs, "sign": sign_u,
                          "predicted": predicted,
                          "matches": sign_u == predicted})
    ok = all(r["matches"] for r in psi_rows + unit_rows)
    return {"base": base, "psi_twists": psi_rows, "uniformizer": unit_rows,
            "ok": ok}


# ---------------------------------------------------------------------------
# Simple characters.


class SimpleCharSpec:
    """A simple character over a stratum.

    ``xi_elems`` lists b_0, ..., b_{d+1} in F; only the residue of the last
    one enters the evaluation window (the deeper xi's are pinned by the
    gluing conditions and cancel in every oracle product).  ``side`` is
    "gl" for the big character theta-tilde and "u" for its square root
    theta, realized by halving both twist elements.
    """

    def __init__(self, stratum: StratumSpec, psi: AddChar, xi_elems,
                 side: str = "gl"):
        if side not in ("gl", "u"):
            raise ValueError(f"side must be 'gl' or 'u', got {side!r}")
        tower = stratum.tower
        if psi.field != tower.k:
            raise ValueError("psi must live on the residue field of F")
        if psi.is_trivial():
            raise ValueError("psi must be nontrivial")
        xi_elems = tuple(xi_elems)
        if len(xi_elems) != stratum.d + 2:
            raise ValueError(
                f"need {stratum.d + 2} xi elements, got {len(xi_elems)}"
            )
        for b in xi_elems:
            if not _is_in_F(tower, b):
                raise NotInSubfield("xi elements must lie in F")
            if not b.is_zero() and b.val() < -tower.e:
                raise ValueError("xi elements must have depth at most one")
        self.stratum = stratum
        self.psi = psi
        self.xi_elems = xi_elems
        self.side = side
        # Residue of the det-part twist: b_{d+1} = bhat / w_F.
        scaled = xi_elems[-1] * tower.varpi_F()
        bh = scaled.coeff(0)
        if any(bh.coeffs[1:]):
            raise NotInSubfield("det-part twist residue must be in k")
        bhat = bh.coeffs[0]
        half = pow((tower.p + 1) // 2, 1, tower.p)
        kE = tower.kE
        inv2 = kE.from_int(2).inverse()
        if side == "u":
            self.bhat = bhat * half % tower.p
            self.c_eff = tuple(c.scale(inv2) for c in stratum.c_elems)
        else:
            self.bhat = bhat
            self.c_eff = stratum.c_elems


def default_chars(s: StratumSpec, psi: AddChar | None = None,
                  bhat: int = 1) -> tuple[SimpleCharSpec, SimpleCharSpec]:
    """A matched (big, square-root) character pair with det twist bhat."""
    tower = s.tower
    if psi is None:
        psi = AddChar(tower.k, 1)
    xi = [tower.e_zero()] * (s.d + 1)
    xi.append(tower.e_monomial(-tower.e, tower.u * tower.kE.from_int(bhat)))
    return (
        SimpleCharSpec(s, psi, xi, side="gl"),
        SimpleCharSpec(s, psi, xi, side="u"),
    )


def _fseries_inv_unit(series, p):
    from .local_model import FSeries

    a0 = series.coeff(0)
    if a0 % p == 0:
        raise ZeroDivisionError("series is not a unit")
    b0 = _modp.inv_mod(a0, p)
    out = {0: b0}
    for k in range(1, series.prec):
        acc = 0
        for i in range(1, k + 1):
            acc += series.coeff(i) * out[k - i]
        out[k] = (-b0 * acc) % p
    return FSeries(p, out, series.prec)


def det_unit(X: MatF):
    """Determinant of a unit matrix by elimination with unit pivots; falls
    back to exact Laplace expansion when a pivot is missing."""
    from .local_model import FSeries, det_series

    tower = X.tower
    p, n = tower.p, tower.n
    if X.g != 0 or X.fprec < 1:
        return det_series(X)
    m = [[X.entry(i, j) for j in range(n)] for i in range(n)]
    det = FSeries(p, {0: 1}, X.fprec)
    for i in range(n):
        piv = next((r for r in range(i, n) if m[r][i].coeff(0) % p), None)
        if piv is None:
            return det_series(X)
        if piv != i:
            m[i], m[piv] = m[piv], m[i]
            det = -det
        det = det * m[i][i]
        inv = _fseries_inv_unit(m[i][i], p)
        for r in range(i + 1, n):
            f = m[r][i] * inv
            if not f.is_zero():
                m[r] = [a - f * b for a, b in zip(m[r], m[i])]
    return det


def _domain_check(chi: SimpleCharSpec, g: MatF) -> MatF:
    """Validate membership of g in the character's domain; returns g - 1."""
    s = chi.stratum
    tower = s.tower
    if g.fprec < 2:
        raise PrecisionTooLow("need at least two coefficient layers")
    W = g - MatF.identity(tower, g.fprec)
    if not W.is_zero():
        if valuation(tower, W) < 1:
            raise NotInDomain("g - 1 must have positive valuation")
        h1 = h1_lattice(tower, s)
        for m in range(1, s.s_list[0] + 1):
            layer = h1.layer(m)
            if layer.shape[0] == tower.n * tower.f:
                continue
            coords = tower.layer_coords(W, m)
            if not _modp.in_row_space(coords, layer, tower.p):
                raise NotInDomain(f"degree-{m} component escapes the lattice")
    if chi.side == "u":
        prod = tower.adjoint(g) @ g
        if prod != MatF.identity(tower, prod.fprec):
            raise NotInDomain("g is not compatible with the Hermitian form")
    return W


def eval_simple_char(chi: SimpleCharSpec, g: MatF) -> CycNum:
    """Exact value of the simple character at g.

    Valid on the linearization window d = 0, r_0 = 1, where the character
    is the product of a det-residue part and one additive trace part, both
    exactly multiplicative.  Off-window input raises LinearizationInvalid.
    """
    s = chi.stratum
    tower = s.tower
    W = _domain_check(chi, g)
    if s.d != 0 or s.r_list[0] != 1:
        raise LinearizationInvalid(
            "full evaluation requires the d = 0, r_0 = 1 window"
        )
    p = tower.p
    phase = 0
    if not W.is_zero():
        phase = (tower.m_of(chi.c_eff[0]) @ W).trace().coeff(0)
    if chi.bhat:
        det = det_unit(g)
        if det.coeff(0) != 1:
            raise NotInDomain("determinant is not a one-unit")
        phase += chi.bhat * det.coeff(1)
    return cyc_root(p, chi.psi.residue_phase(tower.k.from_int(phase)))


# ---------------------------------------------------------------------------
# Coset representative solvers.


def _solve_one_minus_alpha(tower: TowerSpec, m: int, sub_basis: np.ndarray,
                           rhs: np.ndarray) -> np.ndarray:
    """Coordinates (at degree m) of some Z in span(sub_basis) with
    Z - alpha(Z) = rhs; raises NoSolution when inconsistent."""
    p = tower.p
    if not rhs.any():
        return np.zeros(tower.n * tower.f, dtype=np.int64)
    if sub_basis.shape[0] == 0:
        raise NoSolution("empty solution space for a nonzero right side")
    amat = _alpha_matrix(tower, m)
    cols = [(row - amat @ row) % p for row in sub_basis]
    A = np.array(cols, dtype=np.int64).T
    x = _modp.solve(A, rhs % p, p)
    if x is None:
        raise NoSolution("(1 - alpha) does not reach the right side")
    return x @ sub_basis % p


def solve_Y_from_X(s: StratumSpec, x_coords, y: FqElem,
                   aux: EElem | None = None):
    """Solve the coset relation for Y given a W_z representative X.

    ``x_coords`` lists one coordinate vector per graded block of W_z; ``aux``
    is the auxiliary degree-0 component X_0 in o_E (default 0).  Returns
    (Y', P, Q) with Y' = sum(P_j + Q_j) satisfying, for the assembled X,
    X alpha(X) = Y - alpha(Y) with Y = y w_E^-1 (1 + Y'); the identity is
    verified exactly before returning.
    """
    tower = s.tower
    if not y:
        raise ZeroY("y must be a unit")
    wz = build_Wz(tower, s)
    x_coords = [np.asarray(v, dtype=np.int64) % tower.p for v in x_coords]
    if len(x_coords) != len(wz.blocks):
        raise DegenerateX(
            f"need {len(wz.blocks)} block components, got {len(x_coords)}"
        )
    comps: list[MatF] = []
    grades: list[int] = []
    # Component index t: t = 0 is the auxiliary o_E piece (degree 0), and
    # t = j + 1 is the block-j piece at degree s_j.
    if aux is None or aux.is_zero():
        comps.append(MatF.zero(tower))
        grades.append(0)
    else:
        if not _is_in_F(tower, aux) and not _in_level(tower, aux, 0):
            raise DegenerateX("auxiliary part must lie in o_E")
        if aux.val() < 0:
            raise DegenerateX("auxiliary part must be integral")
        comps.append(tower.m_of(aux))
        grades.append(0)
    for block, vec in zip(wz.blocks, x_coords):
        if vec.shape != (tower.n * tower.f,):
            raise DegenerateX("component has the wrong coordinate length")
        if vec.any() and not _modp.in_row_space(vec, block.basis, tower.p):
            raise DegenerateX(
                f"component at level {block.j} escapes its block"
            )
        comps.append(tower.mat_from_layer(block.grade, vec))
        grades.append(block.grade)
    alphas = [tower.alpha(C) for C in comps]
    winv = tower.m_of(tower.e_monomial(1, y.inverse()))
    P: dict[int, MatF] = {}
    Q: dict[int, MatF] = {}
    for t in range(len(comps)):
        # Q_t: the diagonal square term, a single homogeneous degree.
        gq = 2 * grades[t]
        rhs_mat = comps[t] @ alphas[t]
        rhs = _coords_or_zero(tower, rhs_mat, gq)
        zq = _solve_one_minus_alpha(
            tower, gq, tower.cent_layer(level_gens(s, t), gq), rhs
        )
        Q[t] = winv @ tower.mat_from_layer(gq, zq)
        # P_t: cross terms with max index t, grouped by degree.
        by_grade: dict[int, MatF] = {}
        for k in range(t + 1):
            for l in range(t + 1):
                if k != l and max(k, l) == t:
                    gkl = grades[k] + grades[l]
                    term = comps[k] @ alphas[l]
                    prev = by_grade.get(gkl)
                    by_grade[gkl] = term if prev is None else prev + term
        pt = MatF.zero(tower)
        for gkl, mat in by_grade.items():
            rhs = _coords_or_zero(tower, mat, gkl)
            zp = _solve_one_minus_alpha(
                tower, gkl, tower.cent_layer(level_gens(s, t), gkl), rhs
            )
            pt = pt + (winv @ tower.mat_from_layer(gkl, zp))
        P[t] = pt
    yp = MatF.zero(tower)
    for t in P:
        yp = yp + P[t] + Q[t]
    wmat = tower.m_of(tower.e_monomial(-1, y))
    Y = wmat @ (MatF.identity(tower, yp.fprec) + yp)
    xtot = comps[0]
    for C in comps[1:]:
        xtot = xtot + C
    lhs = xtot @ tower.alpha(xtot)
    rhs_full = Y - tower.alpha(Y)
    if lhs != rhs_full:
        raise NoSolution("assembled Y fails the defining relation")
    return yp, P, Q


def _coords_or_zero(tower: TowerSpec, mat: MatF, m: int) -> np.ndarray:
    if mat.is_zero():
        return np.zeros(tower.n * tower.f, dtype=np.int64)
    return tower.layer_coords(mat, m)


# ---------------------------------------------------------------------------
# The coefficient oracles.


def _check_window(s: StratumSpec, what: str):
    if s.d != 0 or s.r_list[0] != 1:
        raise LinearizationInvalid(
            f"{what} evaluates simple characters and needs the "
            "d = 0, r_0 = 1 window"
        )


def _check_char_pair(s: StratumSpec, chars) -> tuple[SimpleCharSpec, SimpleCharSpec]:
    big, root = chars
    if big.side != "gl" or root.side != "u":
        raise ValueError("chars must be a (big, square-root) pair")
    if big.stratum is not s or root.stratum is not s:
        raise ValueError("character pair must sit on the given stratum")
    if big.xi_elems != root.xi_elems:
        raise ValueError("character pair must share xi data")
    return big, root


def _y_side_zbases(s: StratumSpec) -> list[tuple[int, np.ndarray]]:
    """Per-degree bases of the free part of the Y coordinate: the alpha-fixed
    layers of the big lattice modulo those of its w_E-shifted counterpart."""
    tower = s.tower
    p = tower.p
    h1 = h1_lattice(tower, s)
    jw = j0_lattice(tower, s).shifted(1)
    out = []
    for m in range(1, s.s_list[0] + 2):
        fix = _alpha_fixed_basis(tower, m)
        fh = intersect_row_spaces(h1.layer(m), fix, p)
        fj = intersect_row_spaces(jw.layer(m), fix, p)
        comp = _complete_basis(fj, fh, p)
        if comp.shape[0]:
            out.append((m, comp))
    # The two profiles must agree immediately past the window.
    m_edge = s.s_list[0] + 2
    fh = intersect_row_spaces(h1.layer(m_edge), _alpha_fixed_basis(tower, m_edge), p)
    fj = intersect_row_spaces(jw.layer(m_edge), _alpha_fixed_basis(tower, m_edge), p)
    if _modp.rank(fh, p) != _modp.rank(fj, p):
        raise AssertionError("Y-coordinate window is too narrow")
    return out


def by_oracle(s: StratumSpec, chars, rho_signs: tuple[int, int],
              sample: int | None = None, seed: int = 0) -> CycNum:
    """Enumerates the first-generator coset representatives, checks that the
    normalized integrand is one and the same value at every representative,
    and returns the full sum.

    ``rho_signs`` carries the two residue-character constants (the value of
    the big character at -2 and of its square root at -1).  With ``sample``
    set, constancy is verified on that many deterministically chosen
    representatives and the sum is count * constant.
    """
    _check_window(s, "by_oracle")
    big, root = _check_char_pair(s, chars)
    rho1, rho2 = rho_signs
    if rho1 * rho1 != 1 or rho2 * rho2 != 1:
        raise ValueError("rho constants must be signs")
    tower = s.tower
    p, kE = tower.p, tower.kE
    zbases = _y_side_zbases(s)
    zdim = sum(b.shape[0] for _, b in zbases)
    c_y, _ = iwahori_indices(tower, s)
    if p**zdim != math.isqrt(c_y // kE.q):
        raise AssertionError(
            "representative count disagrees with the lattice index"
        )
    count = (kE.q - 1) * p**zdim
    inv2 = kE.from_int(2).inverse()
    ident = MatF.identity(tower)
    units = list(kE.units())
    zvecs = list(itertools.product(range(p), repeat=zdim))
    reps = [(t, zv) for t in units for zv in zvecs]
    if sample is not None and sample < len(reps):
        rng = random.Random(seed)
        reps = [reps[0]] + rng.sample(reps[1:], sample - 1)
    const = None
    for t, zv in reps:
        zmat = MatF.zero(tower)
        at = 0
        for m, basis in zbases:
            k = basis.shape[0]
            coeffs = np.array(zv[at : at + k], dtype=np.int64)
            at += k
            if coeffs.any():
                zmat = zmat + tower.mat_from_layer(m, coeffs @ basis % p)
        y0 = -(t * t) * inv2
        Y = tower.m_of(tower.e_monomial(0, y0)) + zmat
        yp = tower.m_of(tower.e_monomial(0, y0.inverse())) @ zmat
        xm = tower.m_of(tower.e_monomial(0, t))
        g = ident - (tower.alpha(xm) @ inverse_unit(Y) @ xm)
        val = eval_simple_char(big, ident + yp) * eval_simple_char(root, -g)
        if const is None:
            const = val
        elif val != const:
            raise ConstancyViolated(
                "integrand is not constant across representatives"
            )
    return (rho1 * rho2 * count) * const


def bz_oracle(s: StratumSpec, chars, rho_tilde,
              sample: int | None = None, seed: int = 0,
              threads: int = 1) -> CycNum:
    """The second-generator coefficient, by two independent routes.

    Path A evaluates, for each (y, X), the simple characters at the solved
    (Y', 1 - alpha(X) Y^-1 X) pair; path B sums the quadratic Gauss-sum
    phases blockwise.  Every evaluated term is compared against its path-B
    phase, the determinant exchange identity is asserted on it, and the two
    totals must agree exactly.  With ``sample`` set, path A is verified on
    that many deterministically chosen terms and the path-B total is
    returned (the per-term identity is what makes the totals equal).
    """
    _check_window(s, "bz_oracle")
    big, root = _check_char_pair(s, chars)
    tower = s.tower
    p, kE = tower.p, tower.kE
    mu = getattr(rho_tilde, "mu_part", rho_tilde)
    if not isinstance(mu, MultChar) or mu.field != kE:
        raise ValueError("need a multiplicative character on the residue "
                         "field of E")
    if mu.exponent not in (0, (kE.q - 1) // 2):
        raise ValueError("the restriction to the Teichmueller units must be "
                         "at most quadratic")
    psi = big.psi
    twist = psi.twist.coeffs[0]
    wz = build_Wz(tower, s)
    dim = wz.dim_k
    inv2 = kE.from_int(2).inverse()
    units = list(kE.units())
    # Path B: blockwise Gauss sums, one per y.
    total_b = CycNum.zero(p)
    grams: dict[tuple, np.ndarray] = {}
    for y in units:
        gram = _gauss_gram(s, wz, tower.e_monomial(1, y.inverse() * inv2))
        grams[y.coeffs] = gram
        if dim:
            counts = _phase_histogram(gram * twist % p, p, dim,
                                      threads=threads)
            gy = CycNum.zero(p)
            for tt in range(p):
                if counts[tt]:
                    gy = gy + int(counts[tt]) * cyc_root(p, tt)
        else:
            gy = CycNum.one(p)
        total_b = total_b + mu(-y).as_int() * gy
    # Path A: direct evaluation through the solved representatives.
    blocks = wz.blocks
    sizes = [b.basis.shape[0] for b in blocks]
    xvecs = list(itertools.product(range(p), repeat=dim))
    terms = [(y, xv) for y in units for xv in xvecs]
    sampled = sample is not None and sample < len(terms)
    if sampled:
        rng = random.Random(seed)
        chosen = [terms[0]] + rng.sample(terms[1:], sample - 1)
    else:
        chosen = terms
    total_a = CycNum.zero(p)
    for y, xv in chosen:
        val = _bz_term(s, big, root, wz, y, xv, sizes)
        phase = int(np.array(xv) @ grams[y.coeffs] @ np.array(xv)) % p
        expect = cyc_root(p, twist * phase % p)
        if val != expect:
            raise PathMismatch(
                "direct term value disagrees with its Gauss-sum phase"
            )
        total_a = total_a + mu(-y).as_int() * val
    if not sampled and total_a != total_b:
        raise PathMismatch("the two evaluation routes disagree")
    return total_b


def _bz_term(s: StratumSpec, big: SimpleCharSpec, root: SimpleCharSpec,
             wz, y: FqElem, xv, sizes, aux: EElem | None = None) -> CycNum:
    """One path-A term: the product of the two simple-character values at
    the representative determined by (y, X), with the exchange identity on
    determinants asserted along the way."""
    tower = s.tower
    p = tower.p
    ident = MatF.identity(tower)
    x_coords = []
    at = 0
    for k in sizes:
        coeffs = np.array(xv[at : at + k], dtype=np.int64)
        at += k
        block = wz.blocks[len(x_coords)]
        x_coords.append(coeffs @ block.basis % p if k else
                        np.zeros(tower.n * tower.f, dtype=np.int64))
    yp, _, _ = solve_Y_from_X(s, x_coords, y, aux=aux)
    xtot = MatF.zero(tower) if aux is None else tower.m_of(aux)
    for block, vec in zip(wz.blocks, x_coords):
        if vec.any():
            xtot = xtot + tower.mat_from_layer(block.grade, vec)
    one_plus = ident + yp
    if xtot.is_zero():
        g = ident
    else:
        yinv = inverse_one_plus_nil(one_plus) @ tower.m_of(
            tower.e_monomial(1, y.inverse())
        )
        w = tower.alpha(xtot) @ yinv
        g = ident - (w @ xtot)
        # Exchange identity behind the multiplicative-part cancellation.
        if det_unit(g) != det_unit(ident - (xtot @ w)):
            raise PathMismatch("determinant exchange identity fails")
    return eval_simple_char(big, one_plus) * eval_simple_char(root, g)


def bz_aux_independence(s: StratumSpec, chars, y: FqElem, xv,
                        aux_list) -> bool:
    """Whether the path-A term value is unchanged for every listed auxiliary
    degree-0 component choice."""
    big, root = _check_char_pair(s, chars)
    wz = build_Wz(s.tower, s)
    sizes = [b.basis.shape[0] for b in wz.blocks]
    base = _bz_term(s, big, root, wz, y, xv, sizes, aux=None)
    return all(
        _bz_term(s, big, root, wz, y, xv, sizes, aux=a) == base
        for a in aux_list
    )


# ---------------------------------------------------------------------------
# Built-in desk instances.


_CASE_DATA = {
    "u1": dict(config=TowerConfig(q=3, e=1, f=1), c=[(0, -1)]),
    "e3f1": dict(config=TowerConfig(q=3, e=3, f=1, N=8), c=[(0, -1)]),
    "e1f2": dict(config=TowerConfig(q=3, e=1, f=2, N=6), c=[(1, -1)]),
    "e3f2": dict(config=TowerConfig(q=3, e=3, f=2, N=8), c=[(1, -1)]),
    "e5f1": dict(config=TowerConfig(q=3, e=5, f=1, N=12), c=[(0, -1)]),
    "d1-tower": dict(
        config=TowerConfig(
            q=3, e=3, f=2, d=1, N=8, levels=((3, 2), (3, 1), (1, 1))
        ),
        c=[(1, -3), (0, -1)],
    ),
}

BUILTIN_CASE_NAMES = tuple(_CASE_DATA)
R1_CASE_NAMES = ("u1", "e3f1", "e1f2", "e3f2", "e5f1")


def builtin_case(name: str) -> StratumSpec:
    """One of the six desk instances, by name."""
    try:
        data = _CASE_DATA[name]
    except KeyError:
        raise KeyError(
            f"unknown case {name!r}; choose from {BUILTIN_CASE_NAMES}"
        ) from None
    tower = build_tower(data["config"])
    c_elems = [
        tower.e_monomial(expo, pow_fq(tower.zeta, zp))
        for zp, expo in data["c"]
    ]
    return StratumSpec(tower, c_elems)
