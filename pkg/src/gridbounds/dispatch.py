"""Per-node 15-minute DER dispatch against hourly supply bounds.

Each step solves a small LP: hinge penalties on the (accumulated) deviation of
net injection from the hour's supply bounds, absolute-value penalties pulling
each DER toward its tariff-driven state target, and a tiny throughput term to
break ties deterministically. Hard constraints are the DER power limits, the
state envelopes and the EV window equalities.

Deviation accumulators are signed sums of (bound - net) within the hour
(reset at hour boundaries), which makes the hinge thresholds p_u + eps_u and
p_l + eps_l penalize exactly the hourly average leaving the bounds: slack
banked early in the hour can be spent later, violations become debt that must
be compensated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import der
from .simplex import solve_lp
from .tariff import TOUTariff

STEPS_PER_DAY = 96
PRE_PEAK_STEPS = 48  # 12 hours


class InfeasibleDispatch(Exception):
    pass


@dataclass
class LCWeights:
    bounds: float = 10.0      # lambda_b
    target: float = 1.0       # lambda_ik (same for all DERs)
    throughput: float = 1e-4  # deterministic tie-break, << target


@dataclass
class LCState:
    p_u: float                     # current hour supply bounds (p.u.)
    p_l: float
    eps_u: float = 0.0             # sum of past (p_u - net) within the hour
    eps_l: float = 0.0             # sum of past (p_l - net) within the hour
    weights: LCWeights = field(default_factory=LCWeights)


@dataclass
class DispatchResult:
    c: np.ndarray                  # per-unit charge (p.u.)
    d: np.ndarray
    net_p: float                   # node net real injection
    objective: float


def compute_targets(tariff: TOUTariff, unit, t: int):
    """Tariff-driven state target: fill before peak, empty during peak.

    Returns the target state of energy, or None when the tracking term is
    switched off (night).
    """
    ps, pe = tariff.peak_steps()
    t_day = t % STEPS_PER_DAY
    if ps <= t_day < pe:
        return unit.soc_limits(t)[0]
    offset = (ps - t_day) % STEPS_PER_DAY
    if 0 < offset <= PRE_PEAK_STEPS:
        return unit.soc_limits(t)[1]
    return None


def dispatch_step(state: LCState, fleet: list, p_unc: float, t: int,
                  delta: float, tariff: TOUTariff | None = None,
                  targets: list | None = None) -> DispatchResult:
    """Dispatch one step; mutates the fleet states and the eps accumulators.

    Targets may be passed explicitly; otherwise they come from the tariff
    rule (tariff=None disables target tracking entirely).
    """
    k = len(fleet)
    for u in fleet:
        if hasattr(u, "begin_step"):
            u.begin_step(t)
    if targets is None:
        targets = [compute_targets(tariff, u, t) if tariff else None for u in fleet]

    c_idx = list(range(k))
    d_idx = {}
    nv = k
    for i, u in enumerate(fleet):
        if u.power_limits(t)[1] > 0.0:
            d_idx[i] = nv
            nv += 1
    has_u = np.isfinite(state.p_u)
    has_l = np.isfinite(state.p_l)
    e_u_idx = nv if has_u else None
    nv += int(has_u)
    e_l_idx = nv if has_l else None
    nv += int(has_l)
    z_idx = {}
    for i, tgt in enumerate(targets):
        if tgt is not None:
            z_idx[i] = nv
            nv += 1

    cost = np.zeros(nv)
    w = state.weights
    for i in range(k):
        cost[c_idx[i]] += w.throughput
        if i in d_idx:
            cost[d_idx[i]] += w.throughput
    if has_u:
        cost[e_u_idx] = w.bounds
    if has_l:
        cost[e_l_idx] = w.bounds
    for i, zi in z_idx.items():
        cost[zi] = w.target

    A_ub, b_ub, A_eq, b_eq = [], [], [], []

    def row(pairs, rhs, eq=False):
        r = np.zeros(nv)
        for j, v in pairs:
            r[j] += v
        (A_eq if eq else A_ub).append(r)
        (b_eq if eq else b_ub).append(rhs)

    for i, u in enumerate(fleet):
        c_cap, d_cap = u.power_limits(t)
        row([(c_idx[i], 1.0)], c_cap)
        if i in d_idx:
            row([(d_idx[i], 1.0)], d_cap)
        q_min, q_max = u.soc_limits(t)
        gain_c = u.eff_c * delta
        gain_d = u.eff_d * delta
        pairs = [(c_idx[i], gain_c)] + ([(d_idx[i], -gain_d)] if i in d_idx else [])
        row(pairs, q_max - u.q)
        row([(j, -v) for j, v in pairs], u.q - q_min)
        req = u.required_final(t)
        if req is not None:
            row([(c_idx[i], gain_c)], req - u.q, eq=True)
        tgt = targets[i]
        if tgt is not None:
            row(pairs + [(z_idx[i], -1.0)], tgt - u.q)
            row([(j, -v) for j, v in pairs] + [(z_idx[i], -1.0)], u.q - tgt)

    net_pairs = [(c_idx[i], 1.0) for i in range(k)] + \
                [(d_idx[i], -1.0) for i in d_idx]
    if has_u:
        row(net_pairs + [(e_u_idx, -1.0)], state.p_u + state.eps_u - p_unc)
    if has_l:
        row([(j, -v) for j, v in net_pairs] + [(e_l_idx, -1.0)],
            p_unc - state.p_l - state.eps_l)

    res = solve_lp(cost, A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                   A_eq=np.array(A_eq) if A_eq else None,
                   b_eq=np.array(b_eq) if b_eq else None)
    if res.status == "infeasible":
        raise InfeasibleDispatch(
            f"step {t}: dispatch LP infeasible (EV window equality unsatisfiable)")
    if not res.ok:
        raise RuntimeError(f"dispatch LP {res.status} at step {t}")

    c = np.zeros(k)
    d = np.zeros(k)
    for i, u in enumerate(fleet):
        c_cap, d_cap = u.power_limits(t)
        c[i] = min(max(res.x[c_idx[i]], 0.0), c_cap)
        if i in d_idx:
            d[i] = min(max(res.x[d_idx[i]], 0.0), d_cap)
        req = u.required_final(t)
        if req is not None:
            c[i] = (req - u.q) / (u.eff_c * delta)  # snap the window equality
        der.step_dynamics(u, c[i], d[i], delta, t=t)

    net = p_unc + float(c.sum() - d.sum())
    if has_u:
        state.eps_u += state.p_u - net
    if has_l:
        state.eps_l += state.p_l - net
    return DispatchResult(c, d, net, float(res.fun))


def hourly_average_respected(nets, p_l: float, p_u: float,
                             tol: float = 1e-9) -> bool:
    """True iff the hour's mean net injection lies within the supply bounds."""
    nets = np.asarray(nets, dtype=float)
    if nets.size != 4:
        raise ValueError("expected a full hour of 4 quarter-hour steps")
    mean = float(nets.mean())
    return p_l - tol <= mean <= p_u + tol
