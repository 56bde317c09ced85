"""Row and column norms of multiplier tuples and the transpose gap in H^2_d.

The binomial family ``psi_k = sqrt(C(n, k)) z_1^k z_2^(n-k)``, k = 0..n, has
row norm 1 and column norm ``sqrt(n+1)`` in the Drury-Arveson space.  Note
the count: parameter ``n`` gives ``n + 1`` functions, and every expected
ratio here is ``sqrt(n + 1)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .operators import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    NormEstimate,
    NormKind,
    TupleShape,
    block_mult_matrix,
    mult_matrix,
    operator_norm,
    tuple_mult_matrix,
)
from .polymatrix import PolyMatrix, psi_T_phi
from .space_core import Family, Poly, SpaceSpec
from .weak_product import FactorizationCertificate, certify_mult_factorization

__all__ = [
    "GapReport",
    "PolyMatrix",
    "TransposeGap",
    "TransposeChain",
    "binomial_family",
    "column_row_gap",
    "multiplier_norm_scan",
    "psi_T_phi",
    "transpose_gap_experiment",
    "transpose_norm_chain",
]

_LOWER = NormKind.LOWER_BOUND_OF_FULL_NORM


def binomial_family(n: int) -> list[Poly]:
    if n < 0:
        raise ValueError("n must be >= 0")
    return [Poly.monomial((k, n - k), math.sqrt(math.comb(n, k))) for k in range(n + 1)]


@dataclass(frozen=True)
class GapReport:
    n: int
    N: int
    row_norm: NormEstimate
    col_norm: NormEstimate
    ratio: float
    expected_ratio: float


def _ratio(col: NormEstimate, row: NormEstimate) -> float:
    return col.value / row.value if row.value > 0 else math.inf


def column_row_gap(
    space: SpaceSpec, phis: Sequence[Poly], N: int, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> GapReport:
    """Truncated row and column norms of a multiplier tuple.

    ``n`` in the report is ``len(phis) - 1`` so that the binomial family of
    parameter ``n`` reports ``expected_ratio = sqrt(n + 1)``.
    """
    if not phis:
        raise ValueError("empty multiplier tuple")
    row = operator_norm(tuple_mult_matrix(space, phis, TupleShape.ROW, N), tol, max_iter, _LOWER)
    col = operator_norm(tuple_mult_matrix(space, phis, TupleShape.COLUMN, N), tol, max_iter, _LOWER)
    return GapReport(len(phis) - 1, N, row, col, _ratio(col, row), math.sqrt(len(phis)))


@dataclass(frozen=True)
class TransposeGap:
    report: GapReport  # row_norm: ||Psi||, col_norm: ||Psi^T Phi|| in M_{n+1}(Mult)
    theta: PolyMatrix
    certificate: FactorizationCertificate

    @property
    def certificate_ok(self) -> bool:
        return self.certificate.ok


def transpose_gap_experiment(
    space: SpaceSpec, n: int, N: int, tol: float = DEFAULT_TOL, cert_tol: float = 1e-9
) -> TransposeGap:
    """Matrix multiplier whose weak-product norm is at most 1 but whose
    multiplier norm is ``sqrt(n + 1)``.

    ``Psi`` is the binomial family laid out as a single row (a contraction
    from ``H^(n+1)`` to ``H``), ``Phi = [1, 0, ..., 0]``, and
    ``Theta = Psi^T Phi`` has the family as its first column.
    """
    if space.family is not Family.DRURY_ARVESON or space.d < 2:
        raise ValueError("transpose gap needs the Drury-Arveson space with d >= 2")
    if n < 0:
        raise ValueError("n must be >= 0")
    fam = [_lift(p, space.d) for p in binomial_family(n)]
    zero, one = Poly.zero(space.d), Poly.constant(space.d)
    psi = PolyMatrix.row(fam)
    phi = PolyMatrix.row([one] + [zero] * n)
    theta = psi_T_phi(psi, phi)
    row = operator_norm(block_mult_matrix(space, psi.entries, N), tol, kind=_LOWER)
    theta_norm = operator_norm(block_mult_matrix(space, theta.entries, N), tol, kind=_LOWER)
    cert = certify_mult_factorization(space, theta, phi, psi, N, cert_tol)
    report = GapReport(n, N, row, theta_norm, _ratio(theta_norm, row), math.sqrt(n + 1))
    return TransposeGap(report, theta, cert)


def _lift(p: Poly, d: int) -> Poly:
    # embed a two-variable polynomial in d >= 2 variables
    if p.d == d:
        return p
    return Poly(d, {k + (0,) * (d - p.d): c for k, c in p.terms.items()})


@dataclass(frozen=True)
class TransposeChain:
    """Quantities in ``||Psi^T||^2 = ||sum R_i^* R_i|| <= n max ||R_i||^2 <= n kappa^2 ||Psi||^2``."""

    transpose_norm: float
    gram_sum_norm: float
    row_norms: tuple[float, ...]
    column_norms: tuple[float, ...]
    psi_norm: float
    kappa: float
    n: int


def transpose_norm_chain(space: SpaceSpec, psi: PolyMatrix, N: int, tol: float = 1e-12) -> TransposeChain:
    """Truncated norms behind the bound ``||Psi^T|| <= sqrt(n) kappa ||Psi||``.

    ``R_i`` is the i-th column of ``Psi`` read as a row operator; ``kappa`` is
    the largest observed ratio of row norm to column norm over those columns.
    """
    n = psi.cols
    transpose = block_mult_matrix(space, psi.transpose().entries, N).entries
    rows = [block_mult_matrix(space, [list(psi.transpose().entries[i])], N).entries for i in range(n)]
    gram = sum(R.conj().T @ R for R in rows)
    row_norms = tuple(operator_norm(R, tol).value for R in rows)
    col_norms = tuple(
        operator_norm(block_mult_matrix(space, [[psi[k, i]] for k in range(psi.rows)], N), tol).value
        for i in range(n)
    )
    kappa = max((r / c for r, c in zip(row_norms, col_norms) if c > 0), default=0.0)
    return TransposeChain(
        transpose_norm=operator_norm(transpose, tol).value,
        gram_sum_norm=operator_norm(gram, tol).value,
        row_norms=row_norms,
        column_norms=col_norms,
        psi_norm=operator_norm(block_mult_matrix(space, psi.entries, N), tol).value,
        kappa=kappa,
        n=n,
    )


def multiplier_norm_scan(
    space: SpaceSpec, phi: Poly, Ns: Sequence[int], tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER
) -> list[NormEstimate]:
    """Truncated norms of ``T_phi`` for each N; non-decreasing in N."""
    return [operator_norm(mult_matrix(space, phi, N), tol, max_iter, _LOWER) for N in Ns]
