"""Continuous approximation of cell-entry indicators via tube integrals.

The ramp eta is 0 below its threshold and 1 above twice the threshold. The
mollified indicator applies the ramp to a Monte Carlo estimate of the tube
integral of eta(min |P_i|), restricted to one sign cell inside B_R and scaled
by delta^(-n). The thresholds follow a certified schedule: the gradient bound
B at radius R(delta)+1 always satisfies B * delta < eps(delta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cells import w_index
from .polyalg import MonomialBasis, Polynomial, eval_poly_many, grad_bound
from .spectrum import wht_table
from .varieties import VarietySpec, WeightedCloud, tube_sample

# eps(delta) = EPS_FACTOR * B * delta keeps the certificate strict for all
# delta in (0, 1) while still letting eps decay to 0 with delta
EPS_FACTOR = 1.1
DEFAULT_MC_COUNT = 4096


class ScheduleError(RuntimeError):
    """Raised when a threshold schedule cannot certify its gradient condition."""


@dataclass
class MollConfig:
    delta: float
    eps: float
    radius: float
    mc_count: int = DEFAULT_MC_COUNT
    seed: int | object = 0


def eta(eps: float, t):
    """Continuous ramp: 0 for t <= eps, 1 for t >= 2 eps, linear between."""
    if eps <= 0:
        raise ValueError(f"need eps > 0, got {eps}")
    return np.clip((np.asarray(t, dtype=np.float64) - eps) / eps, 0.0, 1.0)


def schedule(
    delta: float,
    bases: list[MonomialBasis],
    mc_count: int = DEFAULT_MC_COUNT,
    seed=0,
) -> MollConfig:
    """Certified thresholds for one smoothing level delta.

    R(delta) = 1 + log2(1/delta) grows slowly; eps(delta) = 1.1 * B * delta
    where B bounds |grad Q| over unit-coefficient Q on the given bases inside
    B_(R+1). The certificate B * delta < eps is asserted and failure raises.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"need 0 < delta < 1, got {delta}")
    if not bases:
        raise ValueError("need at least one basis")
    R = 1.0 + math.log2(1.0 / delta)
    B = max(grad_bound(b, R + 1.0) for b in bases)
    eps = EPS_FACTOR * max(B, 1e-12) * delta
    if not B * delta < eps:
        raise ScheduleError(
            f"certificate violated: B*delta = {B * delta} not below eps = {eps}"
        )
    return MollConfig(delta=delta, eps=eps, radius=R, mc_count=mc_count, seed=seed)


def tube_cloud(spec: VarietySpec, cfg: MollConfig) -> WeightedCloud:
    return tube_sample(spec, cfg.delta, cfg.radius, cfg.mc_count, cfg.seed)


def mollified_row(
    spec: VarietySpec,
    pvec: list[Polynomial],
    cfg: MollConfig,
    cloud: WeightedCloud | None = None,
) -> np.ndarray:
    """Mollified indicator of one variety against all 2^s sign cells."""
    s = len(pvec)
    n = pvec[0].basis.n
    if cloud is None:
        cloud = tube_cloud(spec, cfg)
    if len(cloud.points) == 0:
        return np.zeros(2**s)
    vals = np.stack([eval_poly_many(p, cloud.points) for p in pvec], axis=1)
    idx = np.zeros(len(cloud.points), dtype=np.int64)
    interior = np.ones(len(cloud.points), dtype=bool)
    for j in range(s):
        idx |= (vals[:, j] < 0).astype(np.int64) << j
        interior &= vals[:, j] != 0.0
    inner = eta(cfg.eps, np.abs(vals).min(axis=1)) * cloud.weight
    totals = np.bincount(idx[interior], weights=inner[interior], minlength=2**s)
    return eta(cfg.eps, totals * cfg.delta ** (-n))


def i_delta(spec: VarietySpec, pvec, w, cfg: MollConfig, cloud=None) -> float:
    """Mollified cell-entry indicator in [0, 1] for one cell."""
    return float(mollified_row(spec, pvec, cfg, cloud)[w_index(w)])


def mollified_table(
    Gamma: list[VarietySpec],
    pvec,
    cfg: MollConfig,
    clouds: list[WeightedCloud] | None = None,
) -> np.ndarray:
    """Sum of mollified rows over the family; clouds may be precomputed.

    Without explicit clouds each variety gets its own seed substream so the
    estimate is deterministic in (Gamma order, cfg.seed).
    """
    s = len(pvec)
    total = np.zeros(2**s)
    for i, spec in enumerate(Gamma):
        if clouds is not None:
            cloud = clouds[i]
        else:
            sub = MollConfig(cfg.delta, cfg.eps, cfg.radius, cfg.mc_count, (cfg.seed, i))
            cloud = tube_cloud(spec, sub)
        total += mollified_row(spec, pvec, cfg, cloud)
    return total


def f_delta_v(Gamma, pvec, v, cfg: MollConfig, clouds=None) -> float:
    """Smoothed balance functional at nonzero frequency v.

    Equals the Walsh-Hadamard transform of the mollified count table at v.
    """
    vi = w_index(v)
    if vi == 0:
        raise ValueError("v must be a nonzero frequency")
    table = mollified_table(Gamma, pvec, cfg, clouds)
    return float(wht_table(table)[vi])
