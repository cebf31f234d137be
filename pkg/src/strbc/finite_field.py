"""Arithmetic in small finite fields F_q (q = p^f, p odd) and their characters.

Fields are constructed deterministically: the modulus is the lexicographically
least monic irreducible polynomial of degree f over F_p (counting order on the
little-endian coefficient tuple), and the generator is the least element of
multiplicative order q-1 in the same counting order.  Multiplicative character
values are roots of unity of order dividing q-1, additive character values
have order dividing p; both are returned as exact CycNum values embedded in
Z[zeta_lcm(p, q-1)].
"""

from __future__ import annotations

from functools import lru_cache
from math import gcd

from .cyclotomic import CycNum, cyc_embed, cyc_root


class DivisionByZero(ZeroDivisionError):
    pass


class MixedFields(ValueError):
    pass


class EvalAtZero(ValueError):
    pass


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def _is_prime(n: int) -> bool:
    return n >= 2 and all(n % d for d in range(2, int(n**0.5) + 1))


class FqField:
    """The field with p^f elements, with a fixed modulus and generator."""

    def __init__(self, p: int, f: int = 1):
        if not _is_prime(p) or p == 2:
            raise ValueError(f"p must be an odd prime, got {p}")
        if f < 1:
            raise ValueError("extension degree must be positive")
        self.p = p
        self.f = f
        self.q = p**f
        self.modulus = self._least_irreducible()
        self._build_log_tables()

    def _least_irreducible(self) -> tuple[int, ...]:
        # Little-endian coefficients of the non-leading part; poly is monic.
        p, f = self.p, self.f
        if f == 1:
            return (0, 1)
        for k in range(p**f):
            cs = tuple((k // p**i) % p for i in range(f))
            if self._irreducible(cs):
                return cs + (1,)
        raise AssertionError("no irreducible polynomial found")

    def _irreducible(self, low: tuple[int, ...]) -> bool:
        # Trial division by every monic polynomial of degree <= f/2.
        p, f = self.p, self.f
        poly = list(low) + [1]
        for deg in range(1, f // 2 + 1):
            for k in range(p**deg):
                div = [(k // p**i) % p for i in range(deg)] + [1]
                rem = list(poly)
                for i in range(len(rem) - 1, deg - 1, -1):
                    c = rem[i]
                    if c:
                        for j, dj in enumerate(div):
                            rem[i - deg + j] = (rem[i - deg + j] - c * dj) % p
                if not any(rem[:deg]):
                    return False
        return True

    def _build_log_tables(self):
        # Find the least generator, then tabulate discrete logs.
        for k in range(1, self.q):
            g = self.element(tuple((k // self.p**i) % self.p for i in range(self.f)))
            if self._order_is_full(g):
                self.generator = g
                break
        logs: dict[tuple[int, ...], int] = {}
        exps: list[FqElem] = []
        x = self.one()
        for a in range(self.q - 1):
            logs[x.coeffs] = a
            exps.append(x)
            x = x * self.generator
        self._logs = logs
        self._exps = exps

    def _order_is_full(self, g: "FqElem") -> bool:
        n = self.q - 1
        if pow_fq(g, n) != self.one():
            return False
        return all(pow_fq(g, n // ell) != self.one() for ell in _prime_factors(n))

    # -- element constructors ------------------------------------------------

    def element(self, coeffs) -> "FqElem":
        if isinstance(coeffs, int):
            coeffs = (coeffs,)
        cs = tuple(c % self.p for c in coeffs)
        if len(cs) < self.f:
            cs = cs + (0,) * (self.f - len(cs))
        elif len(cs) > self.f:
            raise ValueError("too many coefficients")
        return FqElem(self, cs)

    def zero(self) -> "FqElem":
        return self.element(())

    def one(self) -> "FqElem":
        return self.element((1,))

    def from_int(self, n: int) -> "FqElem":
        return self.element((n,))

    def exp(self, a: int) -> "FqElem":
        """g^a for the fixed generator g."""
        return self._exps[a % (self.q - 1)]

    def elements(self):
        for k in range(self.q):
            yield self.element(tuple((k // self.p**i) % self.p for i in range(self.f)))

    def units(self):
        for x in self.elements():
            if x:
                yield x

    def trace(self, x: "FqElem") -> int:
        """Absolute trace Tr_{F_q/F_p}(x) as an integer in [0, p)."""
        acc, y = self.zero(), x
        for _ in range(self.f):
            acc = acc + y
            y = pow_fq(y, self.p)
        assert not any(acc.coeffs[1:]), "trace must land in the prime field"
        return acc.coeffs[0]

    def __eq__(self, other):
        return (
            isinstance(other, FqField)
            and (self.p, self.f, self.modulus) == (other.p, other.f, other.modulus)
        )

    def __hash__(self):
        return hash((self.p, self.f, self.modulus))

    def __repr__(self):
        return f"FqField(p={self.p}, f={self.f})"


@lru_cache(maxsize=None)
def get_field(p: int, f: int = 1) -> FqField:
    return FqField(p, f)


class FqElem:
    __slots__ = ("field", "coeffs")

    def __init__(self, field: FqField, coeffs: tuple[int, ...]):
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("FqElem is immutable")

    def _check(self, other: "FqElem"):
        if self.field != other.field:
            raise MixedFields(f"{self.field} vs {other.field}")

    def __add__(self, other):
        self._check(other)
        p = self.field.p
        return FqElem(
            self.field, tuple((a + b) % p for a, b in zip(self.coeffs, other.coeffs))
        )

    def __sub__(self, other):
        self._check(other)
        p = self.field.p
        return FqElem(
            self.field, tuple((a - b) % p for a, b in zip(self.coeffs, other.coeffs))
        )

    def __neg__(self):
        p = self.field.p
        return FqElem(self.field, tuple((-a) % p for a in self.coeffs))

    def __mul__(self, other):
        if isinstance(other, int):
            p = self.field.p
            return FqElem(self.field, tuple((a * other) % p for a in self.coeffs))
        self._check(other)
        p, f = self.field.p, self.field.f
        raw = [0] * (2 * f - 1)
        for i, a in enumerate(self.coeffs):
            if a:
                for j, b in enumerate(other.coeffs):
                    raw[i + j] += a * b
        mod = self.field.modulus
        for i in range(2 * f - 2, f - 1, -1):
            c = raw[i] % p
            if c:
                for j in range(f + 1):
                    raw[i - f + j] -= c * mod[j]
            raw[i] = 0
        return FqElem(self.field, tuple(c % p for c in raw[:f]))

    __rmul__ = __mul__

    def inverse(self) -> "FqElem":
        if not self:
            raise DivisionByZero("inverse of zero")
        return self.field.exp(-self.discrete_log())

    def discrete_log(self) -> int:
        if not self:
            raise DivisionByZero("discrete log of zero")
        return self.field._logs[self.coeffs]

    def __bool__(self):
        return any(self.coeffs)

    def __eq__(self, other):
        return (
            isinstance(other, FqElem)
            and self.field == other.field
            and self.coeffs == other.coeffs
        )

    def __hash__(self):
        return hash((self.field.p, self.field.f, self.coeffs))

    def __repr__(self):
        return f"FqElem({self.coeffs} over F_{self.field.q})"


def pow_fq(x: FqElem, k: int) -> FqElem:
    if k < 0:
        return pow_fq(x.inverse(), -k)
    out, base = x.field.one(), x
    while k:
        if k & 1:
            out = out * base
        base = base * base
        k >>= 1
    return out


class MultChar:
    """Multiplicative character g^a -> zeta_{q-1}^{k a}."""

    def __init__(self, field: FqField, exponent: int):
        self.field = field
        self.exponent = exponent % (field.q - 1)

    def __call__(self, x: FqElem, modulus: int | None = None) -> CycNum:
        if not x:
            raise EvalAtZero("multiplicative character at zero")
        m = self.field.q - 1
        val = cyc_root(m, self.exponent * x.discrete_log())
        target = modulus if modulus is not None else _common_modulus(self.field)
        return cyc_embed(val, target)

    def sign(self, x: FqElem) -> int:
        """Value as +-1; only valid for characters of order dividing 2."""
        v = self(x).as_int()
        assert v in (1, -1)
        return v

    def is_trivial(self) -> bool:
        return self.exponent == 0

    def __eq__(self, other):
        return (
            isinstance(other, MultChar)
            and self.field == other.field
            and self.exponent == other.exponent
        )

    def __hash__(self):
        return hash((self.field, self.exponent))

    def __repr__(self):
        return f"MultChar(k={self.exponent} over F_{self.field.q})"


class AddChar:
    """Additive character x -> zeta_p^{Tr(a x)}."""

    def __init__(self, field: FqField, twist: FqElem | int = 1):
        self.field = field
        self.twist = field.from_int(twist) if isinstance(twist, int) else twist

    def __call__(self, x: FqElem, modulus: int | None = None) -> CycNum:
        t = self.field.trace(self.twist * x)
        val = cyc_root(self.field.p, t)
        target = modulus if modulus is not None else _common_modulus(self.field)
        return cyc_embed(val, target)

    def residue_phase(self, x: FqElem) -> int:
        """Tr(a x) in [0, p); the exponent of zeta_p in the value."""
        return self.field.trace(self.twist * x)

    def is_trivial(self) -> bool:
        return not self.twist

    def __repr__(self):
        return f"AddChar(a={self.twist.coeffs} over F_{self.field.q})"


def _common_modulus(field: FqField) -> int:
    m = field.q - 1
    return field.p * m // gcd(field.p, m)


def quadratic_residue_char(field: FqField) -> MultChar:
    """The quadratic character: +1 on nonzero squares, -1 otherwise."""
    if field.q % 2 == 0:
        raise ValueError("q must be odd")
    return MultChar(field, (field.q - 1) // 2)
