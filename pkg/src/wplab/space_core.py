"""Diagonal complete Nevanlinna-Pick spaces and polynomial arithmetic.

A diagonal space on the ball of C^d has reproducing kernel
``k(z, w) = sum_n a_n <z, w>^n``.  Monomials are orthogonal and

    ||z^alpha||^2 = alpha! / (a_|alpha| * |alpha|!)

so every inner product between polynomials is a weighted coefficient sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

MultiIndex = tuple[int, ...]

CNP_TOLERANCE = 1e-12


class ConfigurationError(ValueError):
    """Raised for an ill-formed space (bad coefficients, missing data)."""


class DimensionMismatch(ValueError):
    pass


class Family(str, Enum):
    HARDY = "hardy"
    DRURY_ARVESON = "da"
    DIRICHLET = "dirichlet"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SpaceSpec:
    """A diagonal kernel space: ``d`` variables and Taylor coefficients ``a_n``.

    Named families compute ``a_n`` on demand.  A custom space stores a finite
    list; asking for a coefficient past its end is a configuration error.
    Custom coefficients may be zero (a truncated kernel), which is only useful
    for the CNP coefficient test: monomials of a degree with ``a_n = 0`` have
    no finite norm.
    """

    family: Family
    d: int = 1
    custom_coeffs: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not isinstance(self.d, int) or self.d < 1:
            raise ConfigurationError(f"d must be a positive integer, got {self.d!r}")
        if self.family in (Family.HARDY, Family.DIRICHLET) and self.d != 1:
            raise ConfigurationError(f"{self.family.value} space requires d = 1")
        if self.family is Family.CUSTOM:
            coeffs = self.custom_coeffs
            if not coeffs:
                raise ConfigurationError("custom space needs at least one coefficient")
            if coeffs[0] != 1:
                raise ConfigurationError("kernel must be normalized: a_0 = 1")
            if any(not math.isfinite(c) or c < 0 for c in coeffs):
                raise ConfigurationError("kernel coefficients must be finite and >= 0")
        elif self.custom_coeffs:
            raise ConfigurationError("coefficients are fixed for named families")

    @classmethod
    def hardy(cls) -> SpaceSpec:
        return cls(Family.HARDY, 1)

    @classmethod
    def drury_arveson(cls, d: int) -> SpaceSpec:
        return cls(Family.DRURY_ARVESON, d)

    @classmethod
    def dirichlet(cls) -> SpaceSpec:
        return cls(Family.DIRICHLET, 1)

    @classmethod
    def custom(cls, coeffs: Iterable[float], d: int = 1) -> SpaceSpec:
        return cls(Family.CUSTOM, d, tuple(float(c) for c in coeffs))

    def coeff(self, n: int) -> float:
        if n < 0:
            raise ConfigurationError(f"negative degree {n}")
        if self.family in (Family.HARDY, Family.DRURY_ARVESON):
            return 1.0
        if self.family is Family.DIRICHLET:
            return 1.0 / (n + 1)
        if n >= len(self.custom_coeffs):
            raise ConfigurationError(
                f"custom space has {len(self.custom_coeffs)} coefficients; a_{n} unavailable"
            )
        return self.custom_coeffs[n]

    def coeffs(self, N: int) -> list[float]:
        return [self.coeff(n) for n in range(N + 1)]

    @property
    def label(self) -> str:
        if self.family is Family.DRURY_ARVESON:
            return f"da{self.d}"
        return self.family.value

    def to_json(self) -> dict:
        out: dict = {"family": self.family.value, "d": self.d}
        if self.family is Family.CUSTOM:
            out["coeffs"] = list(self.custom_coeffs)
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> SpaceSpec:
        try:
            family = Family(data["family"])
        except (KeyError, ValueError) as exc:
            raise ConfigurationError(f"bad space family in {data!r}") from exc
        d = int(data.get("d", 1))
        if family is Family.CUSTOM:
            return cls.custom(data.get("coeffs", ()), d)
        return cls(family, d)


# ---------------------------------------------------------------------------
# multi-indices


def _homogeneous(d: int, degree: int) -> Iterator[MultiIndex]:
    # descending first exponent: (1,0) precedes (0,1)
    if d == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in _homogeneous(d - 1, degree - first):
            yield (first, *rest)


@lru_cache(maxsize=256)
def _enumerate(d: int, N: int) -> tuple[MultiIndex, ...]:
    out: list[MultiIndex] = []
    for degree in range(N + 1):
        out.extend(_homogeneous(d, degree))
    return tuple(out)


def enumerate_multi_indices(d: int, N: int) -> list[MultiIndex]:
    """All multi-indices of length ``d`` and degree <= ``N`` in graded lex order."""
    if d < 1 or N < 0:
        raise ValueError(f"need d >= 1 and N >= 0, got d={d}, N={N}")
    return list(_enumerate(d, N))


def multinomial(alpha: Sequence[int]) -> int:
    """|alpha|! / alpha!"""
    out, total = 1, 0
    for a in alpha:
        total += a
        out *= math.comb(total, a)
    return out


def add_indices(alpha: MultiIndex, beta: MultiIndex) -> MultiIndex:
    return tuple(a + b for a, b in zip(alpha, beta))


def monomial_norm_sq(space: SpaceSpec, alpha: Sequence[int]) -> float:
    if len(alpha) != space.d:
        raise DimensionMismatch(f"multi-index {tuple(alpha)} has length != d={space.d}")
    a = space.coeff(sum(alpha))
    if a == 0:
        raise ConfigurationError(f"a_{sum(alpha)} = 0: monomials of this degree are not in the space")
    return 1.0 / (a * multinomial(alpha))


@dataclass(frozen=True, eq=False)
class GradedBasis:
    """Monomials of degree <= N, with their norms ``||z^alpha||``."""

    d: int
    N: int
    indices: tuple[MultiIndex, ...]
    norms: np.ndarray = field(repr=False)
    position: Mapping[MultiIndex, int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.indices)


@lru_cache(maxsize=512)
def graded_basis(space: SpaceSpec, N: int) -> GradedBasis:
    indices = _enumerate(space.d, N)
    norms = np.sqrt([monomial_norm_sq(space, a) for a in indices])
    norms.setflags(write=False)
    return GradedBasis(
        d=space.d,
        N=N,
        indices=indices,
        norms=norms,
        position={a: i for i, a in enumerate(indices)},
    )


# ---------------------------------------------------------------------------
# polynomials


class Poly:
    """Finitely supported coefficient map ``MultiIndex -> complex``."""

    __slots__ = ("d", "_terms")

    def __init__(self, d: int, terms: Mapping[Sequence[int], complex] | None = None):
        if d < 1:
            raise ValueError("d must be positive")
        self.d = d
        clean: dict[MultiIndex, complex] = {}
        for key, c in (terms or {}).items():
            key = tuple(int(e) for e in key)
            if len(key) != d or any(e < 0 for e in key):
                raise DimensionMismatch(f"bad exponent {key} for d={d}")
            c = complex(c)
            if c != 0:
                clean[key] = clean.get(key, 0) + c
        self._terms = {k: v for k, v in clean.items() if v != 0}

    @property
    def terms(self) -> Mapping[MultiIndex, complex]:
        return self._terms

    @classmethod
    def zero(cls, d: int) -> Poly:
        return cls(d)

    @classmethod
    def constant(cls, d: int, c: complex = 1.0) -> Poly:
        return cls(d, {(0,) * d: c})

    @classmethod
    def monomial(cls, exponents: Sequence[int], c: complex = 1.0) -> Poly:
        return cls(len(exponents), {tuple(exponents): c})

    @classmethod
    def variable(cls, d: int, i: int) -> Poly:
        """The coordinate function z_{i+1} (``i`` is zero-based)."""
        e = [0] * d
        e[i] = 1
        return cls(d, {tuple(e): 1.0})

    @classmethod
    def from_vector(cls, basis: GradedBasis, coeffs: Sequence[complex]) -> Poly:
        return cls(basis.d, dict(zip(basis.indices, coeffs)))

    def vector(self, basis: GradedBasis) -> np.ndarray:
        """Monomial coefficients laid out along ``basis``; raises if terms fall outside."""
        self._check(basis.d)
        out = np.zeros(len(basis), dtype=complex)
        for key, c in self._terms.items():
            try:
                out[basis.position[key]] = c
            except KeyError:
                raise ValueError(f"term {key} exceeds basis degree {basis.N}") from None
        return out

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial is given degree 0."""
        return max((sum(k) for k in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, alpha: Sequence[int]) -> complex:
        return self._terms.get(tuple(alpha), 0j)

    def _check(self, d: int) -> None:
        if d != self.d:
            raise DimensionMismatch(f"dimension mismatch: {self.d} vs {d}")

    def __add__(self, other):
        if isinstance(other, Poly):
            self._check(other.d)
            out = dict(self._terms)
            for k, c in other._terms.items():
                out[k] = out.get(k, 0) + c
            return Poly(self.d, out)
        return self + Poly.constant(self.d, other)

    __radd__ = __add__

    def __neg__(self) -> Poly:
        return Poly(self.d, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Poly):
            self._check(other.d)
            out: dict[MultiIndex, complex] = {}
            for k1, c1 in self._terms.items():
                for k2, c2 in other._terms.items():
                    k = add_indices(k1, k2)
                    out[k] = out.get(k, 0) + c1 * c2
            return Poly(self.d, out)
        c = complex(other)
        return Poly(self.d, {k: v * c for k, v in self._terms.items()})

    __rmul__ = __mul__

    def __truediv__(self, c) -> Poly:
        return self * (1 / complex(c))

    def __pow__(self, k: int) -> Poly:
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        out = Poly.constant(self.d)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.d == other.d and self._terms == other._terms

    __hash__ = None  # mutable-looking value semantics; not hashable

    def conj_coeffs(self) -> Poly:
        return Poly(self.d, {k: c.conjugate() for k, c in self._terms.items()})

    def evaluate(self, z: Sequence[complex]) -> complex:
        return evaluate(self, z)

    def __call__(self, *z) -> complex:
        if len(z) == 1 and not np.isscalar(z[0]):
            z = tuple(z[0])
        return evaluate(self, z)

    def to_json(self) -> list[dict]:
        return [
            {"e": list(k), "re": c.real, "im": c.imag}
            for k, c in sorted(self._terms.items(), key=lambda kc: (sum(kc[0]), [-e for e in kc[0]]))
        ]

    @classmethod
    def from_json(cls, data: Sequence[Mapping], d: int | None = None) -> Poly:
        if d is None:
            if not data:
                raise ValueError("cannot infer d from an empty term list")
            d = len(data[0]["e"])
        return cls(d, {tuple(t["e"]): complex(t.get("re", 0.0), t.get("im", 0.0)) for t in data})

    def __repr__(self) -> str:
        return f"Poly({self.d}, {self.to_str()})"

    def to_str(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for t in self.to_json():
            c = complex(t["re"], t["im"])
            mono = "*".join(
                (f"z{i + 1}" if self.d > 1 else "z") + (f"^{e}" if e > 1 else "")
                for i, e in enumerate(t["e"])
                if e
            )
            if c.imag == 0:
                cs = f"{c.real:g}"
            elif c.real == 0:
                cs = f"{c.imag:g}i"
            else:
                cs = f"({c.real:g}{c.imag:+g}i)"
            if not mono:
                parts.append(cs)
            elif cs == "1":
                parts.append(mono)
            elif cs == "-1":
                parts.append("-" + mono)
            else:
                parts.append(f"{cs}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")


def evaluate(f: Poly, z: Sequence[complex]) -> complex:
    z = tuple(complex(x) for x in z)
    if len(z) != f.d:
        raise DimensionMismatch(f"point has {len(z)} coordinates, polynomial has d={f.d}")
    total = 0j
    for key, c in f.terms.items():
        term = c
        for x, e in zip(z, key):
            if e:
                term *= x**e
        total += term
    return total


def inner_product(space: SpaceSpec, f: Poly, g: Poly) -> complex:
    """``<f, g>`` in the space; linear in ``f``, conjugate-linear in ``g``."""
    if f.d != space.d or g.d != space.d:
        raise DimensionMismatch(f"space d={space.d}, polynomials d={f.d}, {g.d}")
    total = 0j
    small, large = (f.terms, g.terms) if len(f.terms) <= len(g.terms) else (g.terms, f.terms)
    for key in small:
        if key in large:
            total += f.terms[key] * g.terms[key].conjugate() * monomial_norm_sq(space, key)
    return total


def norm(space: SpaceSpec, f: Poly) -> float:
    return math.sqrt(max(inner_product(space, f, f).real, 0.0))


def kernel_polynomial(space: SpaceSpec, w: Sequence[complex], N: int) -> Poly:
    """Degree-``N`` truncation of the kernel function ``k_w``."""
    w = tuple(complex(x) for x in w)
    if len(w) != space.d:
        raise DimensionMismatch(f"point has {len(w)} coordinates, space has d={space.d}")
    wbar = [x.conjugate() for x in w]
    terms = {}
    for alpha in _enumerate(space.d, N):
        c = space.coeff(sum(alpha)) * multinomial(alpha)
        for x, e in zip(wbar, alpha):
            if e:
                c *= x**e
        terms[alpha] = c
    return Poly(space.d, terms)


@dataclass(frozen=True)
class CNPCheck:
    coefficients: tuple[float, ...]  # b_1 .. b_N
    passed: bool
    first_failure: int | None = None  # degree of the first negative coefficient


def cnp_coefficient_check(space: SpaceSpec, N: int, tol: float = CNP_TOLERANCE) -> CNPCheck:
    """Taylor coefficients of ``1 - 1/k(s)`` up to degree ``N``; pass iff all >= -tol."""
    if N < 1:
        raise ValueError("N must be >= 1")
    a = space.coeffs(N)
    # c = 1/k by series inversion, a_0 = 1
    c = [1.0] + [0.0] * N
    for n in range(1, N + 1):
        c[n] = -sum(a[j] * c[n - j] for j in range(1, n + 1))
    b = tuple(-x for x in c[1:])
    failure = next((n for n, x in enumerate(b, start=1) if x < -tol), None)
    return CNPCheck(coefficients=b, passed=failure is None, first_failure=failure)


def random_poly(rng: np.random.Generator, d: int, max_degree: int, density: float = 0.6) -> Poly:
    """Random polynomial with small rational complex coefficients (p/q, |p| <= 5, q <= 4).

    Always contains at least one term of degree ``max_degree``.
    """
    indices = _enumerate(d, max_degree)
    terms = {}
    for alpha in indices:
        if rng.random() < density:
            terms[alpha] = _rational(rng) + 1j * _rational(rng)
    top = [a for a in indices if sum(a) == max_degree]
    key = top[int(rng.integers(len(top)))]
    if terms.get(key, 0) == 0:
        terms[key] = 1 + _rational(rng) * 1j
    return Poly(d, terms)


def _rational(rng: np.random.Generator) -> float:
    return int(rng.integers(-5, 6)) / int(rng.integers(1, 5))
