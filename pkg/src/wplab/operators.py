"""Matrices of multiplication and Hankel operators on graded truncations.

Coordinates are always taken in the orthonormal monomial basis
``e_alpha = z^alpha / ||z^alpha||`` of the degree <= N truncation.  Hankel
operators land in the conjugate space; their codomain coordinates refer to
the conjugated basis ``conj(e_beta)`` and the matrix carries a flag saying so.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from .space_core import (
    GradedBasis,
    Poly,
    SpaceSpec,
    add_indices,
    graded_basis,
    kernel_polynomial,
    monomial_norm_sq,
)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 100_000


@dataclass(frozen=True, eq=False)
class OpMatrix:
    entries: np.ndarray
    domain_basis: GradedBasis
    codomain_basis: GradedBasis
    conjugate_codomain: bool = False
    domain_blocks: int = 1
    codomain_blocks: int = 1

    def __post_init__(self) -> None:
        expected = (
            self.codomain_blocks * len(self.codomain_basis),
            self.domain_blocks * len(self.domain_basis),
        )
        if self.entries.shape != expected:
            raise ValueError(f"matrix shape {self.entries.shape} != {expected}")
        if self.domain_basis.d != self.codomain_basis.d:
            raise ValueError("domain and codomain bases have different d")
        self.entries.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def to_json(self) -> dict:
        rows, cols = self.entries.shape
        return {
            "rows": rows,
            "cols": cols,
            "domain_degree": self.domain_basis.N,
            "codomain_degree": self.codomain_basis.N,
            "conj_codomain": self.conjugate_codomain,
            "entries": [[float(z.real), float(z.imag)] for z in self.entries.ravel()],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())


class NormKind(str, Enum):
    EXACT_ON_TRUNCATION = "exact_on_truncation"
    LOWER_BOUND_OF_FULL_NORM = "lower_bound_of_full_norm"


@dataclass(frozen=True)
class NormEstimate:
    value: float
    kind: NormKind
    truncation: int | None
    residual: float
    iterations: int = 0


class NormConvergenceError(RuntimeError):
    """Power iteration ran out of iterations; ``best`` holds the last iterate."""

    def __init__(self, message: str, best: NormEstimate):
        super().__init__(message)
        self.best = best


# ---------------------------------------------------------------------------
# multiplication operators


def _mult_entries(space: SpaceSpec, phi: Poly, dom: GradedBasis, cod: GradedBasis) -> np.ndarray:
    M = np.zeros((len(cod), len(dom)), dtype=complex)
    for j, alpha in enumerate(dom.indices):
        for gamma, c in phi.terms.items():
            i = cod.position[add_indices(gamma, alpha)]
            M[i, j] += c * cod.norms[i] / dom.norms[j]
    return M


def mult_matrix(space: SpaceSpec, phi: Poly, N: int) -> OpMatrix:
    """Matrix of ``f -> phi f`` from degree <= N into degree <= N + deg phi.

    The whole image of the truncation is captured, so the top singular value
    is a lower bound for the multiplier norm that never decreases with N.
    """
    _check_d(space, phi)
    dom = graded_basis(space, N)
    cod = graded_basis(space, N + phi.degree)
    return OpMatrix(_mult_entries(space, phi, dom, cod), dom, cod)


def block_mult_matrix(space: SpaceSpec, blocks: Sequence[Sequence[Poly]], N: int) -> OpMatrix:
    """Block operator ``[T_{phi_ij}]`` from ``H^cols`` (degree <= N) to ``H^rows``."""
    rows = len(blocks)
    if rows == 0 or len(blocks[0]) == 0:
        raise ValueError("empty block matrix")
    cols = len(blocks[0])
    if any(len(r) != cols for r in blocks):
        raise ValueError("ragged block matrix")
    for r in blocks:
        for p in r:
            _check_d(space, p)
    top = max(p.degree for r in blocks for p in r)
    dom = graded_basis(space, N)
    cod = graded_basis(space, N + top)
    nd, nc = len(dom), len(cod)
    M = np.zeros((rows * nc, cols * nd), dtype=complex)
    for i, r in enumerate(blocks):
        for j, p in enumerate(r):
            if not p.is_zero():
                M[i * nc:(i + 1) * nc, j * nd:(j + 1) * nd] = _mult_entries(space, p, dom, cod)
    return OpMatrix(M, dom, cod, domain_blocks=cols, codomain_blocks=rows)


class TupleShape(str, Enum):
    COLUMN = "column"
    ROW = "row"


def tuple_mult_matrix(space: SpaceSpec, phis: Sequence[Poly], shape: TupleShape | str, N: int) -> OpMatrix:
    if not phis:
        raise ValueError("empty multiplier tuple")
    shape = TupleShape(shape)
    if shape is TupleShape.COLUMN:
        return block_mult_matrix(space, [[p] for p in phis], N)
    return block_mult_matrix(space, [list(phis)], N)


# ---------------------------------------------------------------------------
# norms


def operator_norm(
    M: OpMatrix | np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    kind: NormKind = NormKind.EXACT_ON_TRUNCATION,
) -> NormEstimate:
    """Largest singular value by power iteration on the Gram matrix.

    Starts from the normalized all-ones vector, so results are reproducible.
    The residual is the change in the Rayleigh quotient of the Gram matrix
    between the last two sweeps; iteration stops once both it and the
    geometric extrapolation of the remaining increments are below ``tol``.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    if isinstance(M, OpMatrix):
        A = M.entries
        truncation = M.domain_basis.N
    else:
        A = np.asarray(M, dtype=complex)
        truncation = None
    if A.size == 0 or not np.any(A):
        return NormEstimate(0.0, kind, truncation, 0.0, 0)
    # smaller side of the Gram pair
    G = A.conj().T @ A if A.shape[1] <= A.shape[0] else A @ A.conj().T
    x = np.ones(G.shape[0], dtype=complex) / np.sqrt(G.shape[0])
    lam = prev = np.nan
    residual = last = np.inf
    for it in range(1, max_iter + 1):
        y = G @ x
        lam = float(np.real(np.vdot(x, y)))
        if it > 1:
            residual = abs(lam - prev)
            # geometric tail of the remaining Rayleigh-quotient increments
            rate = min(residual / last, 0.999) if last > 0 and np.isfinite(last) else 0.999
            # below a few ulps of lam the quotient only jitters
            floor = 8 * np.finfo(float).eps * abs(lam)
            limit = max(tol, floor)
            if residual <= floor or (residual <= limit and residual * rate / (1 - rate) <= limit):
                return NormEstimate(float(np.sqrt(max(lam, 0.0))), kind, truncation, residual, it)
            last = residual
        prev = lam
        ny = np.linalg.norm(y)
        if ny == 0:
            # start vector in the kernel of G
            return NormEstimate(0.0, kind, truncation, 0.0, it)
        x = y / ny
    best = NormEstimate(float(np.sqrt(max(lam, 0.0))), kind, truncation, residual, max_iter)
    raise NormConvergenceError(f"power iteration did not converge in {max_iter} steps", best)


def spectral_norm(A: np.ndarray) -> float:
    """LAPACK 2-norm, used for residuals and certified denominators."""
    A = np.asarray(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


# ---------------------------------------------------------------------------
# Hankel operators


@lru_cache(maxsize=256)
def _hankel_layout(space: SpaceSpec, N_dom: int, N_cod: int):
    """Sparse layout of a Hankel matrix: (rows, cols, symbol index, weight)."""
    dom = graded_basis(space, N_dom)
    cod = graded_basis(space, N_cod)
    sym = graded_basis(space, N_dom + N_cod)
    rows, cols, gidx, weight = [], [], [], []
    for j, alpha in enumerate(dom.indices):
        for i, beta in enumerate(cod.indices):
            g = sym.position[add_indices(alpha, beta)]
            rows.append(i)
            cols.append(j)
            gidx.append(g)
            weight.append(sym.norms[g] ** 2 / (dom.norms[j] * cod.norms[i]))
    arrays = tuple(np.asarray(a) for a in (rows, cols, gidx, weight))
    for a in arrays:
        a.setflags(write=False)
    return dom, cod, sym, arrays


def hankel_from_vector(space: SpaceSpec, symbol: np.ndarray, N_dom: int, N_cod: int) -> np.ndarray:
    """Hankel matrix for a symbol given by monomial coefficients on the degree
    ``N_dom + N_cod`` basis (coefficients beyond that degree never appear)."""
    dom, cod, sym, (rows, cols, gidx, weight) = _hankel_layout(space, N_dom, N_cod)
    H = np.zeros((len(cod), len(dom)), dtype=complex)
    H[rows, cols] = np.conj(np.asarray(symbol)[gidx]) * weight
    return H


def hankel_matrix(space: SpaceSpec, b: Poly, N_dom: int, N_cod: int) -> OpMatrix:
    """Matrix of ``H_b`` with ``<H_b f, conj(g)> = <f g, b>``.

    Entry ``(beta, alpha)`` is ``conj(b_{alpha+beta}) ||z^{alpha+beta}||^2 /
    (||z^alpha|| ||z^beta||)``.  Once ``N_dom + N_cod >= deg b`` every nonzero
    entry of the full operator is present and the norm is exact.
    """
    _check_d(space, b)
    dom, cod, sym, _ = _hankel_layout(space, N_dom, N_cod)
    vec = np.zeros(len(sym), dtype=complex)
    for key, c in b.terms.items():
        if key in sym.position:
            vec[sym.position[key]] = c
    return OpMatrix(hankel_from_vector(space, vec, N_dom, N_cod), dom, cod, conjugate_codomain=True)


def mult_adjoint_symbol(space: SpaceSpec, psi: Poly, b: Poly) -> Poly:
    """The polynomial ``T_psi^* b``.

    Its ``z^beta`` coefficient is ``sum_gamma conj(psi_gamma) b_{gamma+beta}
    ||z^{gamma+beta}||^2 / ||z^beta||^2``.
    """
    _check_d(space, psi)
    _check_d(space, b)
    out: dict = {}
    for beta in graded_basis(space, b.degree).indices:
        total = 0j
        for gamma, c in psi.terms.items():
            key = add_indices(gamma, beta)
            if key in b.terms:
                ratio = monomial_norm_sq(space, key) / monomial_norm_sq(space, beta)
                total += c.conjugate() * b.terms[key] * ratio
        out[beta] = total
    return Poly(space.d, out)


def intertwining_residual(space: SpaceSpec, b: Poly, psi: Poly, N: int) -> float:
    """Spectral-norm defect in ``H_b T_psi = T_{conj psi}^* H_b = H_{T_psi^* b}``.

    All three operators are evaluated on degree <= N with the Hankel blocks
    sized so nothing is cut off; the result is the larger of the two gaps.
    """
    p, q = psi.degree, b.degree
    # H_b T_psi: T_psi maps degree N -> N+p, H_b read on that whole range
    lhs = hankel_matrix(space, b, N + p, q).entries @ mult_matrix(space, psi, N).entries
    # T_{conj psi}^* in conjugate coordinates is the plain transpose of T_psi
    T_small = mult_matrix(space, psi, q).entries  # degree q -> q+p
    mid = T_small.T @ hankel_matrix(space, b, N, q + p).entries
    rhs = hankel_matrix(space, mult_adjoint_symbol(space, psi, b), N, q).entries
    return max(spectral_norm(lhs - mid), spectral_norm(lhs - rhs))


@dataclass(frozen=True)
class KernelRankCheck:
    second_singular_value: float
    factor_residual: float
    multiplier_residual: float | None = None


def kernel_hankel_rank_check(
    space: SpaceSpec, w: Sequence[complex], N: int, theta: Poly | None = None
) -> KernelRankCheck:
    """Checks that ``H_{k_w} f = f(w) conj(k_w)`` on degree <= N.

    ``H_{k_w}`` is built from the degree-2N truncation of ``k_w``, which fills
    every entry of the N x N block.  With ``theta`` also checks
    ``H_{k_w} T_theta = theta(w) H_{k_w}`` (the multiplier adjoint acts on
    kernel Hankels by a scalar).
    """
    w = tuple(complex(x) for x in w)
    H = hankel_matrix(space, kernel_polynomial(space, w, 2 * N), N, N).entries
    basis = graded_basis(space, N)
    ev = np.array([_monomial_value(alpha, w) for alpha in basis.indices]) / basis.norms
    # v is conj(k_w) in conjugate coordinates: v_beta = e_beta(w)
    factor_residual = float(np.max(np.linalg.norm(H - np.outer(ev, ev), axis=0)))
    s = np.linalg.svd(H, compute_uv=False)
    second = float(s[1]) if len(s) > 1 else 0.0
    mult_res = None
    if theta is not None:
        p = theta.degree
        Hbig = hankel_matrix(space, kernel_polynomial(space, w, 2 * N + p), N + p, N).entries
        lhs = Hbig @ mult_matrix(space, theta, N).entries
        mult_res = spectral_norm(lhs - theta.evaluate(w) * H)
    return KernelRankCheck(second, factor_residual, mult_res)


def _monomial_value(alpha, z) -> complex:
    v = 1 + 0j
    for x, e in zip(z, alpha):
        if e:
            v *= x**e
    return v


def _check_d(space: SpaceSpec, p: Poly) -> None:
    if p.d != space.d:
        raise ValueError(f"polynomial in {p.d} variables, space has d={space.d}")
