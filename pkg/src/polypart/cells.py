"""Sign-condition cells of a polynomial tuple and per-variety cell entry.

A sign vector w assigns bit w_j = 0 where P_j > 0 and w_j = 1 where P_j < 0;
points with any |P_j| at or below tolerance sit on the boundary and belong to
no cell. Cell entry is decided by sampling for general varieties and exactly
for lines via Sturm-sequence root isolation of the univariate restrictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .polyalg import Polynomial, eval_poly_many, restrict_to_line_batch
from .varieties import LineSampler, UnsupportedVarietyError, VarietySpec, sample_in_ball

DEFAULT_SIGN_TOL_SCALE = 1e-9
_DEGENERATE_TOL = 1e-12
_ISOLATION_MAX_SPLITS = 200
_REFINE_MAX_ITERS = 260


class RootIsolationError(RuntimeError):
    """Raised when univariate root isolation cannot certify a result."""


def w_index(w) -> int:
    """Sign vector (w_1, ..., w_s) -> table index with w_1 as the low bit."""
    idx = 0
    for j, bit in enumerate(w):
        if bit not in (0, 1):
            raise ValueError(f"sign vector bits must be 0/1, got {w}")
        idx |= bit << j
    return idx


def index_w(idx: int, s: int) -> tuple[int, ...]:
    return tuple((idx >> j) & 1 for j in range(s))


@dataclass
class CellCounts:
    """Nonnegative table over all 2^s sign vectors."""

    s: int
    table: np.ndarray

    def __post_init__(self):
        self.table = np.asarray(self.table)
        if self.table.shape != (2**self.s,):
            raise ValueError(f"table must have 2^{self.s} entries, got {self.table.shape}")

    @classmethod
    def zeros(cls, s: int) -> "CellCounts":
        return cls(s, np.zeros(2**s, dtype=np.int64))

    @classmethod
    def from_dict(cls, s: int, entries: dict) -> "CellCounts":
        table = np.zeros(2**s, dtype=np.int64)
        for w, v in entries.items():
            table[w_index(w)] = v
        return cls(s, table)

    def as_dict(self) -> dict[tuple[int, ...], int]:
        return {index_w(i, self.s): self.table[i].item() for i in range(2**self.s)}

    def __getitem__(self, w):
        return self.table[w_index(w)].item()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CellCounts)
            and self.s == other.s
            and np.array_equal(self.table, other.table)
        )


@dataclass
class SamplingConfig:
    """Ball radius, per-variety sample count (None = density default), seed."""

    R: float
    count: int | None = None
    seed: int | object = 0


def _auto_count(spec: VarietySpec, R: float, product_degree: int) -> int:
    base = math.ceil(64 * (R * product_degree + 1))
    if spec.k > 1:
        base = min(base * 16 ** (spec.k - 1), 100_000)
    return base


def _sign_tols(pvec, tau):
    if tau is not None:
        return np.full(len(pvec), float(tau))
    return np.array([DEFAULT_SIGN_TOL_SCALE * p.coeff_norm() for p in pvec])


def sign_vector(pvec: list[Polynomial], x, tau: float | None = None):
    """Sign vector of x, or None when x lies on the boundary of some Z(P_j)."""
    x = np.asarray(x, dtype=np.float64)
    idx, boundary = sign_vector_many(pvec, x[None, :], tau)
    if boundary[0]:
        return None
    return index_w(int(idx[0]), len(pvec))


def sign_vector_many(pvec, X, tau=None):
    """Batch sign vectors as table indices plus a boundary mask."""
    X = np.asarray(X, dtype=np.float64)
    tols = _sign_tols(pvec, tau)
    idx = np.zeros(len(X), dtype=np.int64)
    boundary = np.zeros(len(X), dtype=bool)
    for j, p in enumerate(pvec):
        vals = eval_poly_many(p, X)
        boundary |= np.abs(vals) <= tols[j]
        idx |= (vals < 0).astype(np.int64) << j
    return idx, boundary


def entered_cells_sampled(spec: VarietySpec, pvec, sampling: SamplingConfig) -> set:
    """Sign vectors realized by samples of the variety inside B_R (one-sided)."""
    D = sum(p.degree() for p in pvec)
    count = sampling.count or _auto_count(spec, sampling.R, D)
    pts = sample_in_ball(spec, sampling.R, count, sampling.seed)
    if len(pts) == 0:
        return set()
    idx, boundary = sign_vector_many(pvec, pts)
    return {index_w(int(i), len(pvec)) for i in np.unique(idx[~boundary])}


def indicator(spec: VarietySpec, pvec, w, sampling: SamplingConfig) -> int:
    """1 iff some sample of the variety in B_R realizes sign vector w."""
    return int(tuple(w) in entered_cells_sampled(spec, pvec, sampling))


def counts(
    Gamma: list[VarietySpec],
    pvec: list[Polynomial],
    sampling: SamplingConfig,
    exact_lines: bool = False,
) -> CellCounts:
    """Per-cell counts of varieties entering each sign cell.

    With exact_lines=True, line varieties are counted by exact root isolation
    over the whole line instead of sampling; other kinds always sample.
    """
    s = len(pvec)
    if s > 20:
        raise ValueError(f"cell tables support at most 20 polynomials, got {s}")
    table = np.zeros(2**s, dtype=np.int64)
    line_ids = [
        i for i, g in enumerate(Gamma) if exact_lines and isinstance(g.sampler, LineSampler)
    ]
    if line_ids:
        sets = line_cell_sets([Gamma[i] for i in line_ids], pvec)
        for ws in sets:
            for w in ws:
                table[w_index(w)] += 1
    for i, spec in enumerate(Gamma):
        if i in line_ids:
            continue
        cfg = SamplingConfig(sampling.R, sampling.count, (sampling.seed, i))
        for w in entered_cells_sampled(spec, pvec, cfg):
            table[w_index(w)] += 1
    return CellCounts(s, table)


def point_counts(points, pvec, tau: float | None = None) -> CellCounts:
    """Counts of points per sign cell; boundary points count nowhere."""
    s = len(pvec)
    points = np.asarray(points, dtype=np.float64)
    table = np.zeros(2**s, dtype=np.int64)
    if len(points):
        idx, boundary = sign_vector_many(pvec, points, tau)
        table += np.bincount(idx[~boundary], minlength=2**s).astype(np.int64)
    return CellCounts(s, table)


# ---------------------------------------------------------------------------
# Exact cell enumeration along lines via Sturm-sequence root isolation.
# Chains are stored descending (np.polyval order), normalized to max |coef| 1.


def _trim_desc(c, rel_tol=1e-14):
    scale = np.abs(c).max()
    if scale == 0.0:
        return np.zeros(1)
    keep = np.abs(c) > rel_tol * scale
    first = int(np.argmax(keep))
    return c[first:]


def _rem_desc(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Remainder of f modulo g, descending coefficients, lead(g) != 0."""
    r = f.copy()
    dg = len(g) - 1
    while len(r) - 1 >= dg:
        q = r[0] / g[0]
        r[: dg + 1] -= q * g
        r = r[1:]  # the leading term cancels by construction
    return r


def _sturm_chain(c_desc: np.ndarray) -> list[np.ndarray]:
    p = _trim_desc(c_desc)
    p = p / np.abs(p).max()
    chain = [p]
    if len(p) > 1:
        dp = p[:-1] * np.arange(len(p) - 1, 0, -1)
        chain.append(dp / np.abs(dp).max())
    while len(chain[-1]) > 1:
        r = _trim_desc(-_rem_desc(chain[-2], chain[-1]))
        scale = np.abs(r).max()
        if scale <= _DEGENERATE_TOL:
            break  # nontrivial gcd; the chain still counts distinct roots
        chain.append(r / scale)
    return chain


def _pad_chains(chains: list[list[np.ndarray]]):
    m = len(chains)
    L = max(len(ch) for ch in chains)
    width = max(len(el) for ch in chains for el in ch)
    pad = np.zeros((m, L, width))
    for i, ch in enumerate(chains):
        for l, el in enumerate(ch):
            pad[i, l, width - len(el) :] = el
    return pad


def _variations(pad, rows, ts):
    """Sign variation count of each chain at each t; also p0(t)==0 flags."""
    c = pad[rows]
    vals = c[:, :, 0]
    for p in range(1, pad.shape[2]):
        vals = vals * ts[:, None] + c[:, :, p]
    count = np.zeros(len(rows), dtype=np.int64)
    last = np.zeros(len(rows))
    for col in range(pad.shape[1]):
        s = np.sign(vals[:, col])
        count += (s != 0) & (last != 0) & (s != last)
        last = np.where(s != 0, s, last)
    return count, vals[:, 0] == 0.0


def _variations_safe(pad, rows, ts, widths):
    """Variations with evaluation points nudged off exact roots of p0."""
    v, zero = _variations(pad, rows, ts)
    tries = 0
    while np.any(zero):
        tries += 1
        if tries > 8:
            raise RootIsolationError("could not evaluate Sturm chain off a root")
        ts = np.where(zero, ts + widths * (1e-3 * tries), ts)
        v, zero = _variations(pad, rows, ts)
    return v, ts


def isolate_real_roots_many(coeff_rows: list[np.ndarray]) -> list[np.ndarray]:
    """All distinct real roots per ascending-coefficient univariate polynomial.

    Sturm-count bisection, batched level-synchronously across rows; raises
    RootIsolationError instead of returning uncertain output.
    """
    m = len(coeff_rows)
    roots: list[list[float]] = [[] for _ in range(m)]
    chains = []
    bounds = []
    live = []
    for i, asc in enumerate(coeff_rows):
        desc = _trim_desc(np.asarray(asc, dtype=np.float64)[::-1])
        if len(desc) <= 1:
            continue  # constants have no roots; all-zero rows are the caller's job
        chains.append(_sturm_chain(desc))
        bounds.append(1.0 + np.abs(desc[1:]).max() / abs(desc[0]))
        live.append(i)
    if not chains:
        return [np.array(r) for r in roots]
    pad = _pad_chains(chains)
    M = np.array(bounds)
    rows = np.arange(len(live))
    lo, hi = -M, M
    vlo, _ = _variations(pad, rows, lo)
    vhi, _ = _variations(pad, rows, hi)

    # phase 1: split until every interval holds exactly one distinct root
    work = (rows, lo, hi, vlo, vhi)
    iso_rows, iso_lo, iso_hi = [], [], []
    for _ in range(_ISOLATION_MAX_SPLITS):
        r, a, b, va, vb = work
        nroots = va - vb
        one = nroots == 1
        iso_rows.append(r[one])
        iso_lo.append(a[one])
        iso_hi.append(b[one])
        multi = nroots > 1
        if not np.any(multi):
            break
        r, a, b, va, vb = r[multi], a[multi], b[multi], va[multi], vb[multi]
        mid = 0.5 * (a + b)
        vmid, mid = _variations_safe(pad, r, mid, b - a)
        work = (
            np.concatenate([r, r]),
            np.concatenate([a, mid]),
            np.concatenate([mid, b]),
            np.concatenate([va, vmid]),
            np.concatenate([vmid, vb]),
        )
    else:
        raise RootIsolationError("root isolation failed to separate roots")

    r = np.concatenate(iso_rows)
    a = np.concatenate(iso_lo)
    b = np.concatenate(iso_hi)
    va, _ = _variations(pad, r, a)

    # phase 2: shrink each isolated interval by count-preserving bisection
    tol = 1e-12 * np.maximum(1.0, M[r])
    for _ in range(_REFINE_MAX_ITERS):
        active = (b - a) > tol
        if not np.any(active):
            break
        mid = 0.5 * (a + b)
        vmid, mid = _variations_safe(pad, r[active], mid[active], (b - a)[active])
        go_left = (va[active] - vmid) >= 1
        b[active] = np.where(go_left, mid, b[active])
        new_a = np.where(go_left, a[active], mid)
        va[active] = np.where(go_left, va[active], vmid)
        a[active] = new_a
    else:
        raise RootIsolationError("root refinement did not converge")

    centers = 0.5 * (a + b)
    for row, t in zip(r, centers):
        roots[live[row]].append(float(t))
    return [np.array(sorted(rs)) for rs in roots]


def _restriction_scale(p: Polynomial, A: np.ndarray) -> np.ndarray:
    reach = 1.0 + np.abs(A).max(axis=1)
    return max(1.0, p.coeff_norm()) * np.maximum(1.0, reach) ** p.basis.D


def line_restriction_roots(lines: list[VarietySpec], p: Polynomial):
    """Roots of p restricted to each line, plus a line-in-Z(p) degeneracy mask."""
    A = np.stack([g.sampler.point for g in lines])
    U = np.stack([g.sampler.direction for g in lines])
    C = restrict_to_line_batch(p, A, U)
    degenerate = np.abs(C).max(axis=1) < _DEGENERATE_TOL * _restriction_scale(p, A)
    rows = [C[i] if not degenerate[i] else np.zeros(1) for i in range(len(lines))]
    all_roots = isolate_real_roots_many(rows)
    return all_roots, degenerate


_MERGE_TOL = 1e-9
_GAP_FRACTIONS = (0.5, 0.25, 0.75, 0.4, 0.6)


def _flatten_roots(m, roots_per_j):
    owners = []
    vals = []
    for roots in roots_per_j:
        lens = [len(r) for r in roots]
        if sum(lens) == 0:
            continue
        owners.append(np.repeat(np.arange(m), lens))
        vals.append(np.concatenate(roots))
    if not owners:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    return np.concatenate(owners), np.concatenate(vals)


def _gap_midpoints(m, roots_per_j, skip_mask):
    """One evaluation gap per realized sign interval, across all lines.

    Returns (owner line ids, gap los, gap his); the midpoint of each gap is
    the primary sign-reading point. Lines in skip_mask contribute nothing.
    """
    owner_raw, val_raw = _flatten_roots(m, roots_per_j)
    order = np.lexsort((val_raw, owner_raw))
    o, v = owner_raw[order], val_raw[order]
    if len(o):
        keep = np.ones(len(o), dtype=bool)
        tol = _MERGE_TOL * np.maximum(1.0, np.abs(v))
        same = o[1:] == o[:-1]
        keep[1:] = ~same | (np.diff(v) > tol[1:])
        # clusters collapse onto their first member
        o, v = o[keep], v[keep]
    rooted = np.zeros(m, dtype=bool)
    rooted[o] = True

    owners_out = []
    lo_out = []
    hi_out = []
    if len(o):
        first = np.r_[True, o[1:] != o[:-1]]
        firsts = np.flatnonzero(first)
        lasts = np.r_[firsts[1:] - 1, len(o) - 1]
        line_of = o[firsts]
        span = np.maximum(1.0, v[lasts] - v[firsts])
        # interior gaps between consecutive roots of the same line
        inner = o[1:] == o[:-1]
        owners_out.append(o[1:][inner])
        lo_out.append(v[:-1][inner])
        hi_out.append(v[1:][inner])
        # unbounded ends, one gap beyond each extreme root
        owners_out.append(line_of)
        lo_out.append(v[firsts] - 2.0 * span)
        hi_out.append(v[firsts])
        owners_out.append(line_of)
        lo_out.append(v[lasts])
        hi_out.append(v[lasts] + 2.0 * span)
    # lines whose restrictions never vanish read their sign anywhere
    free = np.flatnonzero(~rooted & ~skip_mask)
    owners_out.append(free)
    lo_out.append(np.full(len(free), -1.0))
    hi_out.append(np.full(len(free), 1.0))

    owners = np.concatenate(owners_out).astype(np.int64)
    lo = np.concatenate(lo_out)
    hi = np.concatenate(hi_out)
    ok = ~skip_mask[owners]
    return owners[ok], lo[ok], hi[ok]


def _midpoint_indices(lines, pvec, owners, lo, hi):
    """Sign-vector table index per gap; falls back pointwise when ambiguous."""
    tols = _sign_tols(pvec, None) * 1e-2
    A = np.stack([g.sampler.point for g in lines])
    U = np.stack([g.sampler.direction for g in lines])
    ts = 0.5 * (lo + hi)
    pts = A[owners] + ts[:, None] * U[owners]
    vals = np.stack([eval_poly_many(p, pts) for p in pvec], axis=1)
    ambiguous = np.any(np.abs(vals) <= tols[None, :], axis=1)
    idx = np.zeros(len(owners), dtype=np.int64)
    for j in range(len(pvec)):
        idx |= (vals[:, j] < 0).astype(np.int64) << j
    for k in np.flatnonzero(ambiguous):
        i = owners[k]
        for frac in _GAP_FRACTIONS[1:]:
            t = lo[k] + frac * (hi[k] - lo[k])
            x = A[i] + t * U[i]
            v = np.array([eval_poly_many(p, x[None, :])[0] for p in pvec])
            if np.all(np.abs(v) > tols):
                idx[k] = w_index(tuple((v < 0).astype(int)))
                break
        else:
            raise RootIsolationError(
                f"ambiguous sign reading on line {i} in gap ({lo[k]}, {hi[k]})"
            )
    return idx


def _skip_mask(m, degenerate_per_j):
    skip = np.zeros(m, dtype=bool)
    for deg in degenerate_per_j:
        skip |= np.asarray(deg, dtype=bool)
    return skip


def cell_sets_from_roots(lines, pvec, roots_per_j, degenerate_per_j) -> list[set]:
    """Sign vectors realized along each line, reading signs between roots.

    Lines inside some Z(P_j) are boundary everywhere and get the empty set.
    """
    s = len(pvec)
    out: list[set] = [set() for _ in lines]
    skip = _skip_mask(len(lines), degenerate_per_j)
    owners, lo, hi = _gap_midpoints(len(lines), roots_per_j, skip)
    if len(owners) == 0:
        return out
    idx = _midpoint_indices(lines, pvec, owners, lo, hi)
    for i, w in zip(owners, idx):
        out[i].add(index_w(int(w), s))
    return out


def cell_table_from_roots(lines, pvec, roots_per_j, degenerate_per_j) -> np.ndarray:
    """Count of lines entering each cell, straight to the 2^s table."""
    s = len(pvec)
    table = np.zeros(2**s, dtype=np.int64)
    skip = _skip_mask(len(lines), degenerate_per_j)
    owners, lo, hi = _gap_midpoints(len(lines), roots_per_j, skip)
    if len(owners) == 0:
        return table
    idx = _midpoint_indices(lines, pvec, owners, lo, hi)
    keys = np.unique(owners * (2**s) + idx)
    return np.bincount(keys % (2**s), minlength=2**s).astype(np.int64)


def line_cell_sets(lines: list[VarietySpec], pvec) -> list[set]:
    """Exact sets of sign vectors each line enters (batched over lines)."""
    for g in lines:
        if not isinstance(g.sampler, LineSampler):
            raise UnsupportedVarietyError("exact cell enumeration needs a line sampler")
    roots_per_j = []
    degenerate_per_j = []
    for p in pvec:
        roots, degen = line_restriction_roots(lines, p)
        roots_per_j.append(roots)
        degenerate_per_j.append(degen)
    return cell_sets_from_roots(lines, pvec, roots_per_j, degenerate_per_j)


def cells_entered_line(line: VarietySpec, pvec) -> set:
    """Exact sign vectors realized along one line; empty means degenerate
    (the line lies inside some Z(P_j) and is boundary everywhere)."""
    return line_cell_sets([line], pvec)[0]
