"""Two-sided estimates of weak product norms and multiplier factorization checks.

``||h||`` in the weak product is the infimum of ``sum ||f_i|| ||g_i||`` over
representations ``h = sum f_i g_i``.  Any explicit representation gives an
upper bound; any Hankel symbol ``b`` gives the lower bound
``|<h, b>| / ||H_b||``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Sequence

import numpy as np

from .operators import (
    NormEstimate,
    NormKind,
    block_mult_matrix,
    hankel_from_vector,
    hankel_matrix,
    operator_norm,
    spectral_norm,
)
from .polymatrix import PolyMatrix, psi_T_phi
from .space_core import (
    DimensionMismatch,
    Family,
    Poly,
    SpaceSpec,
    graded_basis,
    inner_product,
    norm,
)

DEFAULT_SEED = 0x5EED
EQUALITY_TOL = 1e-9
BRACKET_TOL = 1e-8


class InfeasibleFactorization(ValueError):
    """No representation with the requested rank and degree cap was found."""


class BracketInversionError(RuntimeError):
    """Lower bound above upper bound: an implementation bug, never data."""


class QuadratureConvergenceError(RuntimeError):
    pass


def pairing(space: SpaceSpec, h: Poly, b: Poly) -> complex:
    """``[h, H_b]``; for polynomial ``h`` this is ``<h, b>``."""
    return inner_product(space, h, b)


# ---------------------------------------------------------------------------
# lower bound by Hankel duality


@dataclass
class SearchOptions:
    seed: int = DEFAULT_SEED
    restarts: int = 4
    max_evals: int = 3000  # per start
    initial_step: float = 0.25
    min_step: float = 1e-7
    degree: int | None = None  # symbol degree used by wp_bracket; None -> max(D, deg h)


@dataclass(frozen=True)
class LowerBound:
    value: float
    witness: Poly | None
    pairing: complex = 0j
    hankel_norm: float = 0.0
    evaluations: int = 0


def wp_lower_bound(space: SpaceSpec, h: Poly, D: int, options: SearchOptions | None = None) -> LowerBound:
    """Best ``|<h, b>| / ||H_b||`` over symbols of degree <= D found by compass search.

    Starts from ``b = h``, from each monomial of ``h`` and from seeded random
    symbols.  The reported value is recomputed for the winning symbol with a
    Hankel block large enough to be exact, so it is a certified lower bound.
    """
    opts = options or SearchOptions()
    if D < 0:
        raise ValueError("D must be >= 0")
    if h.d != space.d:
        raise DimensionMismatch("h and space differ in dimension")
    if h.is_zero():
        return LowerBound(0.0, None)

    basis = graded_basis(space, D)
    sym = graded_basis(space, 2 * D)
    m = len(basis)
    # <h, b> = sum_gamma h_gamma conj(b_gamma) ||z^gamma||^2
    weights = np.array([h.coefficient(a) for a in basis.indices]) * basis.norms**2

    evals = 0

    def objective(x: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        b = x[:m] + 1j * x[m:]
        num = abs(np.vdot(b, weights))
        if num == 0:
            return 0.0
        padded = np.zeros(len(sym), dtype=complex)
        padded[:m] = b
        den = spectral_norm(hankel_from_vector(space, padded, D, D))
        return num / den if den > 0 else 0.0

    starts: list[np.ndarray] = []
    hv = np.array([h.coefficient(a) for a in basis.indices])
    if np.any(hv):
        starts.append(hv)
    for key, c in sorted(h.terms.items()):
        if sum(key) <= D:
            e = np.zeros(m, dtype=complex)
            e[basis.position[key]] = 1.0
            starts.append(e)
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.restarts):
        starts.append(rng.standard_normal(m) + 1j * rng.standard_normal(m))

    best_x, best_f = None, -1.0
    for s in starts:
        x = np.concatenate([s.real, s.imag]).astype(float)
        x, f = _compass_ascent(objective, x, opts)
        if f > best_f + 1e-15:
            best_x, best_f = x, f

    if best_f <= 0:
        return LowerBound(0.0, None, evaluations=evals)
    b = Poly.from_vector(basis, best_x[:m] + 1j * best_x[m:])
    H = hankel_matrix(space, b, D, D)
    den = max(operator_norm(H).value, spectral_norm(H.entries))
    p = pairing(space, h, b)
    return LowerBound(abs(p) / den, b, p, den, evals)


def _compass_ascent(objective, x: np.ndarray, opts: SearchOptions) -> tuple[np.ndarray, float]:
    nx = np.linalg.norm(x)
    if nx == 0:
        return x, 0.0
    x = x / nx
    f = objective(x)
    step = opts.initial_step
    used = 1
    while step > opts.min_step and used < opts.max_evals:
        improved = False
        for k in range(len(x)):
            for s in (step, -step):
                y = x.copy()
                y[k] += s
                fy = objective(y)
                used += 1
                if fy > f * (1 + 1e-14):
                    x, f = y / np.linalg.norm(y), fy
                    improved = True
                    break
            if used >= opts.max_evals:
                break
        if not improved:
            step /= 2
    return x, f


# ---------------------------------------------------------------------------
# upper bound by alternating minimum-norm factorization


@dataclass
class ALSOptions:
    tol: float = 1e-10  # relative improvement that stops the iteration
    max_iter: int = 500
    seed: int = DEFAULT_SEED
    restarts: int = 3  # random starts
    equality_tol: float = EQUALITY_TOL
    seed_pairs: Sequence[tuple[Poly, Poly]] | None = None
    max_root_splits: int = 20000


@dataclass(frozen=True)
class Factorization:
    pairs: tuple[tuple[Poly, Poly], ...]
    target: Poly
    defect: float
    cost: float

    def to_json(self) -> list[dict]:
        return [{"f": f.to_json(), "g": g.to_json()} for f, g in self.pairs]


@dataclass(frozen=True)
class UpperBound:
    value: float
    factorization: Factorization
    iterations: int
    converged: bool
    history: tuple[float, ...] = field(default=(), repr=False)


@lru_cache(maxsize=64)
def _product_layout(space: SpaceSpec, D: int):
    """Index arrays for products of two degree-D factors in orthonormal coordinates.

    The ``z^gamma`` coefficient of ``f g`` is ``sum u_alpha v_beta / (n_alpha n_beta)``
    over ``alpha + beta = gamma``, where ``u, v`` are orthonormal coordinates.
    """
    basis = graded_basis(space, D)
    target = graded_basis(space, 2 * D)
    a_idx, b_idx, g_idx, w = [], [], [], []
    for i, alpha in enumerate(basis.indices):
        for j, beta in enumerate(basis.indices):
            g = target.position[tuple(x + y for x, y in zip(alpha, beta))]
            a_idx.append(i)
            b_idx.append(j)
            g_idx.append(g)
            # constraint rows are scaled by n_gamma (orthonormal coordinates of h)
            w.append(target.norms[g] / (basis.norms[i] * basis.norms[j]))
    arrays = tuple(np.asarray(a) for a in (a_idx, b_idx, g_idx, w))
    return basis, target, arrays


class _ProductSystem:
    def __init__(self, space: SpaceSpec, D: int, h: Poly):
        self.basis, self.target, (self.a, self.b, self.g, self.w) = _product_layout(space, D)
        self.m = len(self.basis)
        self.rhs = h.vector(self.target) * self.target.norms

    def matrix(self, V: np.ndarray) -> np.ndarray:
        """Linear map ``U -> product`` for fixed second factors ``V`` (r x m)."""
        r = V.shape[0]
        A = np.zeros((len(self.target), r, self.m), dtype=complex)
        np.add.at(
            A,
            (self.g[:, None], np.arange(r)[None, :], self.a[:, None]),
            self.w[:, None] * V[:, self.b].T,
        )
        return A.reshape(len(self.target), r * self.m)

    def solve(self, V: np.ndarray) -> tuple[np.ndarray, float]:
        A = self.matrix(V)
        u, *_ = np.linalg.lstsq(A, self.rhs, rcond=None)
        return u.reshape(V.shape), float(np.linalg.norm(A @ u - self.rhs))

    def residual(self, U: np.ndarray, V: np.ndarray) -> float:
        return float(np.linalg.norm(self.matrix(V) @ U.ravel() - self.rhs))


def _balance(U: np.ndarray, V: np.ndarray, keep_spare: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Rescale each pair to ``||f_i|| = ||g_i||``; the product is unchanged."""
    nu = np.linalg.norm(U, axis=1)
    nv = np.linalg.norm(V, axis=1)
    U, V = U.copy(), V.copy()
    for i in range(U.shape[0]):
        if nu[i] == 0 or nv[i] == 0:
            if not keep_spare:
                U[i] = 0
                V[i] = 0
        else:
            t = math.sqrt(nv[i] / nu[i])
            U[i] *= t
            V[i] /= t
    return U, V


def _cost(U: np.ndarray, V: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(U, axis=1) * np.linalg.norm(V, axis=1)))


def _objective(U: np.ndarray, V: np.ndarray) -> float:
    return 0.5 * float(np.sum(np.abs(U) ** 2) + np.sum(np.abs(V) ** 2))


def _als(system: _ProductSystem, U: np.ndarray, V: np.ndarray, opts: ALSOptions):
    """Alternate minimum-norm solves; returns the last iterate and the cost after each sweep."""
    U, V = _balance(U, V, keep_spare=True)
    J = _objective(U, V)
    history: list[float] = []
    scale = max(np.linalg.norm(system.rhs), 1.0)
    for it in range(1, opts.max_iter + 1):
        U1, res1 = system.solve(V)
        V1, res2 = system.solve(U1)
        if max(res1, res2) > opts.equality_tol * scale:
            return U, V, history, it - 1, True
        U1, V1 = _balance(U1, V1)
        J1 = _objective(U1, V1)
        if J1 > J:
            # rounding in the solve; keep the last iterate so the cost never rises
            return U, V, history, it - 1, True
        U, V = U1, V1
        history.append(J1)
        if J - J1 <= opts.tol * J:
            return U, V, history, it, True
        J = J1
    return U, V, history, opts.max_iter, False


def _coords(p: Poly, basis) -> np.ndarray:
    return p.vector(basis) * basis.norms


def _root_splits(space: SpaceSpec, h: Poly, D: int, limit: int):
    """Single-variable factorizations ``h = f g`` obtained by splitting roots."""
    c = np.array([h.coefficient((k,)) for k in range(h.degree + 1)])
    roots = np.roots(c[::-1])
    lead = c[-1]
    m = len(roots)
    count = 0
    for size in range(max(0, m - D), min(m, D) + 1):
        for subset in itertools.combinations(range(m), size):
            rest = [k for k in range(m) if k not in subset]
            f = np.poly(roots[list(subset)]) if subset else np.array([1.0])
            g = np.poly(roots[rest]) * lead if rest else np.array([lead])
            yield Poly(1, {(k,): x for k, x in enumerate(f[::-1])}), Poly(1, {(k,): x for k, x in enumerate(g[::-1])})
            count += 1
            if count >= limit:
                return


def _monomial_split(h: Poly, D: int):
    """One pair per term: ``c z^gamma = (c z^first) (z^rest)`` with |first| = ceil(|gamma|/2)."""
    split = _monomial_parts(h, D)
    if split is None:
        return None
    return [(Poly.monomial(a, c), Poly.monomial(b)) for a, b, c in split]


def _grouped_split(h: Poly, D: int):
    """Monomial split with terms sharing a factor merged into one pair.

    Tries merging on the right factor and on the left factor and keeps the
    shorter list, so e.g. ``1 + z_2/2 + z_1 z_2`` needs only two pairs.
    """
    split = _monomial_parts(h, D)
    if split is None:
        return None
    d = h.d
    options = []
    for side in (0, 1):
        groups: dict = {}
        for a, b, c in split:
            key, other = (b, a) if side == 0 else (a, b)
            groups.setdefault(key, {})[other] = groups.get(key, {}).get(other, 0) + c
        pairs = []
        for key, terms in sorted(groups.items()):
            merged, fixed = Poly(d, terms), Poly.monomial(key)
            pairs.append((merged, fixed) if side == 0 else (fixed, merged))
        options.append(pairs)
    return min(options, key=len)


def _monomial_parts(h: Poly, D: int):
    pairs = []
    for key, c in sorted(h.terms.items()):
        left = (sum(key) + 1) // 2
        first = []
        for e in key:
            t = min(e, left)
            first.append(t)
            left -= t
        rest = [e - t for e, t in zip(key, first)]
        if sum(first) > D or sum(rest) > D:
            return None
        pairs.append((tuple(first), tuple(rest), c))
    return pairs


def wp_upper_bound(
    space: SpaceSpec, h: Poly, r: int, D: int, options: ALSOptions | None = None
) -> UpperBound:
    """Smallest ``sum ||f_i|| ||g_i||`` found over ``r`` pairs of degree <= D.

    Each start is a feasible factorization; alternating minimum-norm solves
    then lower ``1/2 sum (||f_i||^2 + ||g_i||^2)`` while keeping the identity,
    and pairs are rebalanced after every sweep.  Seed pairs of higher degree
    raise ``D`` to fit them.
    """
    opts = options or ALSOptions()
    if r < 1:
        raise ValueError("rank must be >= 1")
    if h.d != space.d:
        raise DimensionMismatch("h and space differ in dimension")
    if h.is_zero():
        return UpperBound(0.0, Factorization((), h, 0.0, 0.0), 0, True, (0.0,))
    seeds = list(opts.seed_pairs or [])
    if seeds:
        D = max(D, max(max(f.degree, g.degree) for f, g in seeds))
        r = max(r, len(seeds))
    if h.degree > 2 * D:
        raise InfeasibleFactorization(f"deg h = {h.degree} exceeds 2D = {2 * D}")

    system = _ProductSystem(space, D, h)
    basis = system.basis
    m = system.m
    rng = np.random.default_rng(opts.seed)
    starts: list[tuple[np.ndarray, np.ndarray]] = []

    def add_pairs(pairs):
        if len(pairs) > r:
            return
        U = np.zeros((r, m), dtype=complex)
        V = np.zeros((r, m), dtype=complex)
        for i, (f, g) in enumerate(pairs):
            U[i] = _coords(f, basis)
            V[i] = _coords(g, basis)
        # spare pairs start at f = 0 with a small random g so the solver can use them
        for i in range(len(pairs), r):
            V[i] = 1e-2 * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
        starts.append((U, V))

    if seeds:
        add_pairs(seeds)
    if space.d == 1:
        splits = [
            (norm(space, f) * norm(space, g), f, g)
            for f, g in _root_splits(space, h, D, opts.max_root_splits)
        ]
        if splits:
            _, f, g = min(splits, key=lambda t: t[0])
            add_pairs([(f, g)])
    if h.degree <= D:
        add_pairs([(h, Poly.constant(space.d))])
    mono = _monomial_split(h, D)
    if mono is not None:
        add_pairs(mono)
        add_pairs(_grouped_split(h, D))
    for _ in range(opts.restarts):
        V = rng.standard_normal((r, m)) + 1j * rng.standard_normal((r, m))
        U, res = system.solve(V)
        if res <= opts.equality_tol * max(np.linalg.norm(system.rhs), 1.0):
            starts.append((U, V))

    best = None
    scale = max(np.linalg.norm(system.rhs), 1.0)
    for U, V in starts:
        if system.residual(U, V) > opts.equality_tol * scale:
            continue
        U, V, history, iters, converged = _als(system, U, V, opts)
        cost = _cost(U, V)
        if best is None or cost < best[0] - 1e-15:
            best = (cost, U, V, history, iters, converged)
    if best is None:
        raise InfeasibleFactorization(
            f"no feasible start with r={r}, D={D} for a degree-{h.degree} target"
        )
    cost, U, V, history, iters, converged = best
    pairs = []
    for i in range(r):
        if np.linalg.norm(U[i]) * np.linalg.norm(V[i]) > 0:
            pairs.append(
                (Poly.from_vector(basis, U[i] / basis.norms), Poly.from_vector(basis, V[i] / basis.norms))
            )
    fact = _make_factorization(space, h, pairs)
    return UpperBound(fact.cost, fact, iters, converged, tuple(history))


def _make_factorization(space: SpaceSpec, h: Poly, pairs) -> Factorization:
    total = Poly.zero(space.d)
    for f, g in pairs:
        total = total + f * g
    diff = h - total
    defect = math.sqrt(sum(abs(c) ** 2 for c in diff.terms.values()))
    cost = sum(norm(space, f) * norm(space, g) for f, g in pairs)
    return Factorization(tuple(pairs), h, defect, cost)


def factorization_of(space: SpaceSpec, h: Poly, pairs: Sequence[tuple[Poly, Poly]]) -> Factorization:
    """Package a user-supplied representation with its defect and cost."""
    return _make_factorization(space, h, list(pairs))


# ---------------------------------------------------------------------------
# bracket


@dataclass(frozen=True)
class NormBracket:
    lower: float
    lower_witness: Poly | None
    upper: float
    upper_witness: Factorization
    rank: int
    degree: int
    symbol_degree: int
    iterations: int
    h1_oracle: float | None = None


def wp_bracket(
    space: SpaceSpec,
    h: Poly,
    r: int,
    D: int,
    als: ALSOptions | None = None,
    search: SearchOptions | None = None,
) -> NormBracket:
    search = search or SearchOptions()
    sym_degree = search.degree if search.degree is not None else max(D, h.degree)
    lo = wp_lower_bound(space, h, sym_degree, search)
    up = wp_upper_bound(space, h, r, D, als)
    if lo.value > up.value + BRACKET_TOL:
        raise BracketInversionError(f"lower bound {lo.value!r} exceeds upper bound {up.value!r}")
    oracle = None
    if space.family is Family.HARDY:
        oracle = hardy_h1_quadrature(h)
    return NormBracket(
        lower=lo.value,
        lower_witness=lo.witness,
        upper=up.value,
        upper_witness=up.factorization,
        rank=r,
        degree=D,
        symbol_degree=sym_degree,
        iterations=up.iterations,
        h1_oracle=oracle,
    )


# ---------------------------------------------------------------------------
# Hardy space oracle


def hardy_h1_quadrature(h: Poly, Q: int | None = None, tol: float = 1e-9, max_nodes: int = 1 << 22) -> float:
    """Mean of ``|h|`` on the unit circle by the trapezoidal rule, doubling ``Q``
    until two successive values agree to ``tol``."""
    if h.d != 1:
        raise DimensionMismatch("H^1 quadrature needs a single-variable polynomial")
    n = h.degree
    if Q is None:
        Q = 8 * (n + 1)
    elif Q < 8 * (n + 1):
        raise ValueError(f"need at least {8 * (n + 1)} nodes, got {Q}")
    coeffs = np.array([h.coefficient((k,)) for k in range(n + 1)])

    def trapezoid(q: int) -> float:
        z = np.exp(2j * np.pi * np.arange(q) / q)
        return float(np.mean(np.abs(np.polynomial.polynomial.polyval(z, coeffs))))

    prev = trapezoid(Q)
    while Q < max_nodes:
        Q *= 2
        cur = trapezoid(Q)
        if abs(cur - prev) < tol:
            return cur
        prev = cur
    raise QuadratureConvergenceError(f"no agreement to {tol} with {Q} nodes")


# ---------------------------------------------------------------------------
# factorization certificates


class Verdict(str, Enum):
    CONSISTENT = "CONSISTENT"
    REFUTED = "REFUTED"
    IDENTITY_FAILED = "IDENTITY-FAILED"


@dataclass(frozen=True)
class FactorizationCertificate:
    theta: PolyMatrix
    phis: PolyMatrix
    psis: PolyMatrix
    truncation: int
    column_norm_phi: NormEstimate
    column_norm_psi: NormEstimate
    identity_defect: float
    tol: float
    verdict: Verdict

    @property
    def ok(self) -> bool:
        return self.verdict is Verdict.CONSISTENT


def certify_mult_factorization(
    space: SpaceSpec,
    theta: Poly | PolyMatrix,
    phis: Sequence[Poly] | PolyMatrix,
    psis: Sequence[Poly] | PolyMatrix,
    N: int,
    tol: float = EQUALITY_TOL,
) -> FactorizationCertificate:
    """Check ``theta = Psi^T Phi`` and the truncated norms of ``Phi`` and ``Psi``.

    Scalar inputs are read as columns: ``theta = sum_n phi_n psi_n``.  Truncated
    norms only bound the true norms from below, so passing both checks makes
    the data consistent with ``||theta|| <= 1`` in the weak product multiplier
    algebra; a truncated norm above ``1 + tol`` refutes it.
    """
    if isinstance(theta, Poly):
        if isinstance(phis, PolyMatrix) or isinstance(psis, PolyMatrix):
            raise TypeError("scalar theta takes lists of polynomials")
        if len(phis) != len(psis):
            raise ValueError(f"list length mismatch: {len(phis)} phis, {len(psis)} psis")
        theta_m = PolyMatrix.of([[theta]])
        phi_m, psi_m = PolyMatrix.column(phis), PolyMatrix.column(psis)
    else:
        theta_m = theta
        phi_m = phis if isinstance(phis, PolyMatrix) else PolyMatrix.column(phis)
        psi_m = psis if isinstance(psis, PolyMatrix) else PolyMatrix.column(psis)
        if phi_m.rows != psi_m.rows:
            raise ValueError(f"row count mismatch: Phi {phi_m.rows}, Psi {psi_m.rows}")
    product = psi_T_phi(psi_m, phi_m)
    if (product.rows, product.cols) != (theta_m.rows, theta_m.cols):
        raise ValueError(
            f"Psi^T Phi is {product.rows}x{product.cols}, theta is {theta_m.rows}x{theta_m.cols}"
        )
    defect_sq = 0.0
    for i in range(theta_m.rows):
        for j in range(theta_m.cols):
            diff = theta_m[i, j] - product[i, j]
            defect_sq += sum(abs(c) ** 2 for c in diff.terms.values())
    defect = math.sqrt(defect_sq)
    kind = NormKind.LOWER_BOUND_OF_FULL_NORM
    phi_norm = operator_norm(block_mult_matrix(space, phi_m.entries, N), kind=kind)
    psi_norm = operator_norm(block_mult_matrix(space, psi_m.entries, N), kind=kind)
    if defect > tol:
        verdict = Verdict.IDENTITY_FAILED
    elif phi_norm.value > 1 + tol or psi_norm.value > 1 + tol:
        verdict = Verdict.REFUTED
    else:
        verdict = Verdict.CONSISTENT
    return FactorizationCertificate(theta_m, phi_m, psi_m, N, phi_norm, psi_norm, defect, tol, verdict)
