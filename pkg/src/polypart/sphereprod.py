"""The search space: a product of spheres S^(2^(j-1)) for j = 1..s.

Block j is a unit vector of length 2^(j-1)+1 that embeds as the coefficient
vector of a polynomial over the first 2^(j-1)+1 graded-lex monomials of the
degree-schedule basis, so the whole point is a tuple of s polynomials.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polyalg import MonomialBasis, Polynomial, degree_schedule

_NORM_TOL = 1e-12


def block_size(j: int) -> int:
    return 2 ** (j - 1) + 1


def xs_dim(s: int) -> int:
    return 2**s - 1


@dataclass
class XsPoint:
    """s unit blocks, block j of length 2^(j-1)+1."""

    blocks: tuple

    def __post_init__(self):
        blocks = []
        for j, b in enumerate(self.blocks, start=1):
            b = np.asarray(b, dtype=np.float64)
            if b.shape != (block_size(j),):
                raise ValueError(f"block {j} must have length {block_size(j)}, got {b.shape}")
            if abs(np.linalg.norm(b) - 1.0) > _NORM_TOL:
                raise ValueError(f"block {j} must be unit norm, |b| = {np.linalg.norm(b)}")
            blocks.append(b)
        self.blocks = tuple(blocks)

    @property
    def s(self) -> int:
        return len(self.blocks)

    def copy(self) -> "XsPoint":
        return XsPoint(tuple(b.copy() for b in self.blocks))


def flip(x: XsPoint, j: int) -> XsPoint:
    """Negate block j (1-based); an involution, and flips commute."""
    if not 1 <= j <= x.s:
        raise IndexError(f"block index {j} out of range 1..{x.s}")
    blocks = list(x.blocks)
    blocks[j - 1] = -blocks[j - 1]
    return XsPoint(tuple(blocks))


def random_point(s: int, seed) -> XsPoint:
    """Uniform per block (normalized Gaussian)."""
    rng = np.random.default_rng(seed)
    blocks = []
    for j in range(1, s + 1):
        g = rng.normal(size=block_size(j))
        blocks.append(g / np.linalg.norm(g))
    return XsPoint(tuple(blocks))


def retract(raw_blocks) -> XsPoint:
    """Normalize each raw block back onto its sphere."""
    blocks = []
    for j, b in enumerate(raw_blocks, start=1):
        b = np.asarray(b, dtype=np.float64)
        norm = np.linalg.norm(b)
        if norm == 0.0:
            raise ValueError(f"cannot retract zero block {j}")
        blocks.append(b / norm)
    return XsPoint(tuple(blocks))


def tangent_step(x: XsPoint, direction, h: float) -> XsPoint:
    """Project the direction onto each tangent space, step by h, renormalize."""
    if h == 0.0:
        return x
    raw = []
    for b, d in zip(x.blocks, direction):
        d = np.asarray(d, dtype=np.float64)
        tangent = d - (d @ b) * b
        raw.append(b + h * tangent)
    return retract(raw)


def to_polys(x: XsPoint, n: int, subspaces=None) -> list[Polynomial]:
    """Embed the point as s polynomials of the schedule degrees.

    By default block j fills the first 2^(j-1)+1 graded-lex coefficients of
    the degree D_j basis; the remaining coefficients are zero, so each
    polynomial keeps unit coefficient norm and the product degree is at most
    sum(D_j). Passing `subspaces` (one monomial-index array per block)
    selects different coefficient subspaces of the same dimensions.
    """
    schedule = degree_schedule(n, x.s)
    polys = []
    for j, (b, Dj) in enumerate(zip(x.blocks, schedule), start=1):
        basis = MonomialBasis(n, Dj)
        if len(basis) < block_size(j):
            raise ValueError(
                f"basis dim {len(basis)} cannot host block of size {block_size(j)}"
            )
        if subspaces is None:
            idx = np.arange(block_size(j))
        else:
            idx = np.asarray(subspaces[j - 1], dtype=np.int64)
            if (
                idx.shape != (block_size(j),)
                or len(np.unique(idx)) != block_size(j)
                or idx.min() < 0
                or idx.max() >= len(basis)
            ):
                raise ValueError(
                    f"subspace for block {j} must be {block_size(j)} distinct "
                    f"indices below {len(basis)}"
                )
        coeffs = np.zeros(len(basis))
        coeffs[idx] = b
        polys.append(Polynomial(basis, coeffs))
    return polys
