"""Dense multivariate polynomials on a graded-lexicographic monomial basis.

Coefficient vectors are aligned to the basis ordering: total degree first,
then lexicographic with x1 > x2 > ... > xn, so the constant monomial comes
first and the degree-1 monomials follow in coordinate order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# basis_dim results must stay usable as array sizes / int64 indices
_DIM_LIMIT = 2**62


def _grlex_exponents(n: int, D: int) -> list[tuple[int, ...]]:
    def parts(total, slots):
        if slots == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in parts(total - first, slots - 1):
                yield (first,) + rest

    out = []
    for total in range(D + 1):
        out.extend(parts(total, n))
    return out


class MonomialBasis:
    """All monomials of degree <= D in n variables, graded-lex ordered."""

    def __init__(self, n: int, D: int):
        if n < 1:
            raise ValueError(f"need n >= 1, got {n}")
        if D < 0:
            raise ValueError(f"need D >= 0, got {D}")
        self.n = n
        self.D = D
        self.monomials = _grlex_exponents(n, D)
        self.exponents = np.array(self.monomials, dtype=np.int64)
        assert len(self.monomials) == basis_dim(n, D)

    def __len__(self) -> int:
        return len(self.monomials)

    def __eq__(self, other) -> bool:
        return isinstance(other, MonomialBasis) and (self.n, self.D) == (other.n, other.D)

    def __hash__(self) -> int:
        return hash((self.n, self.D))

    def __repr__(self) -> str:
        return f"MonomialBasis(n={self.n}, D={self.D}, dim={len(self)})"


def basis_dim(n: int, D: int) -> int:
    """Dimension of the space of polynomials of degree <= D on R^n: C(n+D, n)."""
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if D < 0:
        raise ValueError(f"need D >= 0, got {D}")
    val = math.comb(n + D, n)
    if val > _DIM_LIMIT:
        raise OverflowError(f"basis dimension C({n + D},{n}) = {val} exceeds {_DIM_LIMIT}")
    return val


def degree_schedule(n: int, s: int) -> list[int]:
    """Smallest degrees D_1..D_s with basis_dim(n, D_j) > 2^(j-1).

    The schedule is nondecreasing and the total sum grows like 2^(s/n).
    """
    if s < 1:
        raise ValueError(f"need s >= 1, got {s}")
    out = []
    D = 1
    for j in range(1, s + 1):
        need = 2 ** (j - 1)
        while basis_dim(n, D) <= need:
            D += 1
        out.append(D)
    return out


@dataclass
class Polynomial:
    """Coefficient vector over a MonomialBasis."""

    basis: MonomialBasis
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (len(self.basis),):
            raise ValueError(
                f"coefficient length {self.coeffs.shape} does not match basis dim {len(self.basis)}"
            )

    @property
    def n(self) -> int:
        return self.basis.n

    def degree(self) -> int:
        """Largest total degree carrying a nonzero coefficient (0 for the zero polynomial)."""
        nz = np.nonzero(self.coeffs)[0]
        if len(nz) == 0:
            return 0
        return int(self.basis.exponents[nz].sum(axis=1).max())

    def coeff_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))


def from_terms(n: int, terms: dict[tuple[int, ...], float], D: int | None = None) -> Polynomial:
    """Build a Polynomial from {exponent tuple: coefficient}."""
    if D is None:
        D = max((sum(e) for e in terms), default=0)
    basis = MonomialBasis(n, D)
    coeffs = np.zeros(len(basis))
    index = {m: i for i, m in enumerate(basis.monomials)}
    for expo, c in terms.items():
        if len(expo) != n:
            raise ValueError(f"exponent {expo} has {len(expo)} entries, expected {n}")
        coeffs[index[tuple(expo)]] += c
    return Polynomial(basis, coeffs)


def _power_table(x: np.ndarray, D: int) -> np.ndarray:
    # (n, D+1) with pt[i, e] = x_i**e
    pt = np.empty((x.shape[0], D + 1))
    pt[:, 0] = 1.0
    for e in range(1, D + 1):
        pt[:, e] = pt[:, e - 1] * x
    return pt


def eval_poly(p: Polynomial, x) -> float:
    """Evaluate p at a point of R^n by direct monomial summation."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.n,):
        raise ValueError(f"point has shape {x.shape}, expected ({p.n},)")
    pt = _power_table(x, p.basis.D)
    mono = np.prod(pt[np.arange(p.n), p.basis.exponents], axis=1)
    return float(mono @ p.coeffs)


def eval_poly_many(p: Polynomial, X: np.ndarray) -> np.ndarray:
    """Evaluate p at each row of X, shape (m, n) -> (m,)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != p.n:
        raise ValueError(f"points have shape {X.shape}, expected (m, {p.n})")
    if X.shape[0] == 0:
        return np.zeros(0)
    pt = X[:, :, None] ** np.arange(p.basis.D + 1)[None, None, :]
    cols = np.broadcast_to(np.arange(p.n), p.basis.exponents.shape)
    mono = np.prod(pt[:, cols, p.basis.exponents], axis=2)
    return mono @ p.coeffs


def grad(p: Polynomial, x) -> np.ndarray:
    """Gradient of p at x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.n,):
        raise ValueError(f"point has shape {x.shape}, expected ({p.n},)")
    pt = _power_table(x, p.basis.D)
    exps = p.basis.exponents
    out = np.zeros(p.n)
    idx = np.arange(p.n)
    for i in range(p.n):
        ei = exps[:, i]
        shifted = exps.copy()
        shifted[:, i] = np.maximum(ei - 1, 0)
        mono = np.prod(pt[idx, shifted], axis=1)
        out[i] = np.sum(np.where(ei > 0, p.coeffs * ei * mono, 0.0))
    return out


def grad_bound(basis: MonomialBasis, R: float) -> float:
    """Upper bound on |grad Q(x)| over unit-coefficient Q on `basis` and |x| <= R.

    Crude triangle-inequality bound sqrt(dim)*n*D*max(1,R)^(D-1); correctness
    matters here, tightness only slows downstream threshold schedules.
    """
    if R < 0:
        raise ValueError(f"need R >= 0, got {R}")
    if basis.D == 0:
        return 0.0
    return math.sqrt(len(basis)) * basis.n * basis.D * max(1.0, R) ** (basis.D - 1)


def restrict_to_line(p: Polynomial, point, direction) -> np.ndarray:
    """Coefficients (ascending) of the univariate t -> p(point + t*direction)."""
    a = np.asarray(point, dtype=np.float64)
    u = np.asarray(direction, dtype=np.float64)
    if a.shape != (p.n,) or u.shape != (p.n,):
        raise ValueError("line point/direction dimension mismatch")
    out = np.zeros(p.basis.D + 1)
    for expo, c in zip(p.basis.monomials, p.coeffs):
        if c == 0.0:
            continue
        conv = np.array([c])
        for i, e in enumerate(expo):
            if e == 0:
                continue
            # coefficients of (a_i + u_i t)^e, ascending
            r = np.arange(e + 1)
            binom = np.array([math.comb(e, int(k)) for k in r], dtype=np.float64)
            fac = binom * a[i] ** (e - r) * u[i] ** r
            conv = np.convolve(conv, fac)
        out[: len(conv)] += conv
    return out


def restrict_to_line_batch(p: Polynomial, A: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Batched restrict_to_line: rows of A, U give m lines -> (m, D+1) coefficients."""
    A = np.asarray(A, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    m = A.shape[0]
    out = np.zeros((m, p.basis.D + 1))
    for expo, c in zip(p.basis.monomials, p.coeffs):
        if c == 0.0:
            continue
        conv = np.full((m, 1), c)
        for i, e in enumerate(expo):
            if e == 0:
                continue
            r = np.arange(e + 1)
            binom = np.array([math.comb(e, int(k)) for k in r], dtype=np.float64)
            fac = binom[None, :] * A[:, i : i + 1] ** (e - r)[None, :] * U[:, i : i + 1] ** r[None, :]
            new = np.zeros((m, conv.shape[1] + e))
            for k in range(conv.shape[1]):
                new[:, k : k + e + 1] += conv[:, k : k + 1] * fac
            conv = new
        out[:, : conv.shape[1]] += conv
    return out
