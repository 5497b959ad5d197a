"""Benchmark controllers that bracket the bounds scheme.

Local heuristic: each node greedily reserves DER operation to the cheapest
tariff periods (charge storage/EV and run deferrable thermal off-peak,
discharge storage on peak), with an EV deadline guard. No grid awareness.

Centralized: perfect-foresight LP over a 2-day horizon with full control of
every DER, minimizing TOU energy cost plus hinge penalties on linear-model
voltage/transformer violations (reliability weights dominate) plus a small
storage-throughput cost. Transformer apparent power is handled with a
12-direction polygonal outer approximation of the channel 2-norm so the
problem stays linear. Solved with scipy's HiGHS backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import der
from .linmodel import LinearPFModel
from .network import Network
from .tariff import TOUTariff, PEAK, OFF

STEPS_PER_DAY = 96
THERMAL_TAN = math.tan(math.acos(0.92))  # fixed thermal power factor

N_POLY = 12  # polygon directions for the channel 2-norm


class InfeasibleHorizon(Exception):
    pass


@dataclass
class CentralWeights:
    voltage: float = 1e4
    transformer: float = 1e4
    cost: float = 1.0
    storage_op: float = 0.01


# ---------------------------------------------------------------------------
# local cost-greedy heuristic

def _cheapest_steps(tariff: TOUTariff, steps: np.ndarray, n_need: int) -> set:
    rates = np.array([tariff.rate_of_step(int(s)) for s in steps])
    order = np.lexsort((steps, rates))
    return set(int(steps[i]) for i in order[:n_need])


def local_heuristic_dispatch(fleet: list, tariff: TOUTariff, t: int,
                             delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Greedy per-step decision for one node's fleet; applies the dynamics."""
    k = len(fleet)
    c = np.zeros(k)
    d = np.zeros(k)
    period = tariff.period_of_step(t)
    for i, u in enumerate(fleet):
        if hasattr(u, "begin_step"):
            u.begin_step(t)
        if u.kind == "storage":
            if period == OFF and u.q < u.capacity:
                c[i] = min(u.c_max, (u.capacity - u.q) / (u.eff_c * delta))
            elif period == PEAK and u.q > 0.0:
                d[i] = min(u.d_max, u.q / (u.eff_d * delta))
        elif u.kind == "ev":
            w = u.window_at(t)
            if w is not None:
                start, end, energy = w
                remaining = max(0.0, energy - u.q)
                per_step = u.eff_c * u.c_max * delta
                if remaining > 1e-12 and per_step > 0:
                    n_need = math.ceil(remaining / per_step - 1e-9)
                    steps = np.arange(t, end + 1)
                    if t in _cheapest_steps(tariff, steps, n_need):
                        c[i] = min(u.c_max, remaining / (u.eff_c * delta))
        elif u.kind == "thermal":
            q_min, q_max = u.soc_limits(t)
            day_end = (t // STEPS_PER_DAY + 1) * STEPS_PER_DAY
            cum = u.day_cum(t)
            remaining = max(0.0, cum[-1] - u.q)
            per_step = u.u_max * delta
            forced = max(0.0, (q_min - u.q) / delta)
            if remaining > 1e-12 and per_step > 0:
                n_need = math.ceil(remaining / per_step - 1e-9)
                steps = np.arange(t, day_end)
                if t in _cheapest_steps(tariff, steps, n_need):
                    c[i] = min(u.u_max, (q_max - u.q) / delta, remaining / delta)
            c[i] = max(c[i], forced)
        der.step_dynamics(u, c[i], d[i], delta, t=t)
    return c, d


# ---------------------------------------------------------------------------
# centralized perfect-foresight controller

@dataclass
class CentralizedPlan:
    c: np.ndarray              # (kept_steps, n_units)
    d: np.ndarray
    objective: float
    breakdown: dict = field(default_factory=dict)
    units: list = field(default_factory=list)  # (node_id, unit) in schedule order


def _unit_step_maps(net: Network, units: list[tuple[int, object]]):
    """Maps from one step's unit powers to the stacked consumer s vector."""
    n_c = net.n_consumers
    pos = net.consumer_index
    n_u = len(units)
    n_d = sum(1 for _, u in units if u.kind == "storage")
    m_c = np.zeros((2 * n_c, n_u))
    m_d = np.zeros((2 * n_c, n_d))
    di = 0
    d_of_unit = {}
    for j, (nid, u) in enumerate(units):
        row = pos[nid]
        m_c[row, j] = 1.0
        if u.kind == "thermal":
            m_c[n_c + row, j] = THERMAL_TAN
        if u.kind == "storage":
            m_d[row, di] = -1.0
            d_of_unit[j] = di
            di += 1
    return np.hstack([m_c, m_d]), d_of_unit


def _pure_bounds(u, gt: int) -> tuple[float, float, float, float]:
    """(c_max, d_max, q_min, q_max) at a global step without touching state."""
    if u.kind == "storage":
        return u.c_max, u.d_max, 0.0, u.capacity
    if u.kind == "ev":
        w = u.window_at(gt)
        if w is None:
            cap = max((e for _, _, e in u.windows), default=0.0)
            return 0.0, 0.0, 0.0, cap
        start, end, energy = w
        q_min = max(0.0, energy - u.eff_c * u.c_max * u.delta * (end - gt))
        q_max = min(energy, u.eff_c * u.c_max * u.delta * (gt - start + 1))
        return u.c_max, 0.0, q_min, q_max
    # thermal
    day = gt // STEPS_PER_DAY
    sl = u.u_base[day * STEPS_PER_DAY:(day + 1) * STEPS_PER_DAY]
    cum = np.concatenate([[0.0], np.cumsum(sl) * u.delta])
    k = gt % STEPS_PER_DAY + 1
    q_min, q_max = der.thermal_envelope_from_cum(cum, k, u.phi, u.u_max, u.delta)
    return u.u_max, 0.0, q_min, q_max


def centralized_dispatch(net: Network, model: LinearPFModel,
                         fleets: dict[int, list], p_unc: np.ndarray,
                         q_unc: np.ndarray, tariff: TOUTariff, t0: int,
                         horizon: int, keep: int,
                         weights: CentralWeights | None = None) -> CentralizedPlan:
    """Solve the horizon LP and return the first ``keep`` steps of dispatch.

    p_unc/q_unc: (horizon, n_consumers) uncontrollable injections, p.u.,
    aligned with net.consumer_ids, starting at global step t0.
    """
    weights = weights or CentralWeights()
    delta = net.timestep_hours
    units = [(nid, u) for nid in net.consumer_ids for u in fleets.get(nid, [])]
    n_u = len(units)
    h = horizon
    n_c = net.n_consumers
    n_n = net.n_nodes
    n_t = len(net.transformers)

    step_map, d_of_unit = _unit_step_maps(net, units)
    n_d = len(d_of_unit)
    n_su = n_u + n_d  # step-block unit variables

    # variable layout:
    #   [step-major unit powers: (c_all, d_storage) x h] then Q (unit-major x h)
    #   then hv_hi (n_n*h), hv_lo (n_n*h), mT (n_t*h), hT (n_t*h)
    off_q = n_su * h
    off_hv_hi = off_q + n_u * h
    off_hv_lo = off_hv_hi + n_n * h
    off_mt = off_hv_lo + n_n * h
    off_ht = off_mt + n_t * h
    n_vars = off_ht + n_t * h

    def c_var(j, t):
        return t * n_su + j

    def d_var(j, t):
        return t * n_su + n_u + d_of_unit[j]

    def q_var(j, t):
        return off_q + j * h + t

    # bounds and carry masks
    lb = np.zeros(n_vars)
    ub = np.full(n_vars, np.inf)
    carry = np.ones((n_u, h))
    q_init = np.zeros(n_u)
    for j, (nid, u) in enumerate(units):
        q_init[j] = u.q
        for t in range(h):
            gt = t0 + t
            c_cap, d_cap, q_lo, q_hi = _pure_bounds(u, gt)
            ub[c_var(j, t)] = c_cap
            if j in d_of_unit:
                ub[d_var(j, t)] = d_cap
            lb[q_var(j, t)] = q_lo
            ub[q_var(j, t)] = q_hi
            if u.kind == "thermal" and gt % STEPS_PER_DAY == 0:
                carry[j, t] = 0.0
            if u.kind == "ev":
                w = u.window_at(gt)
                if w is not None and gt == w[0]:
                    carry[j, t] = 0.0
                if w is not None and gt == w[1]:
                    lb[q_var(j, t)] = ub[q_var(j, t)] = w[2]  # window equality

    # objective
    cost = np.zeros(n_vars)
    for t in range(h):
        rate = tariff.rate_of_step(t0 + t)
        for j, (nid, u) in enumerate(units):
            cost[c_var(j, t)] += weights.cost * rate * delta
            if u.kind == "storage":
                cost[c_var(j, t)] += weights.storage_op * delta
                cost[d_var(j, t)] += weights.storage_op * delta - weights.cost * rate * delta
    cost[off_hv_hi:off_mt] = weights.voltage
    cost[off_ht:] = weights.transformer

    # equality rows: Q dynamics
    rows, cols, data, b_eq = [], [], [], []
    r = 0
    for j, (nid, u) in enumerate(units):
        gain_c = u.eff_c * delta
        gain_d = u.eff_d * delta
        for t in range(h):
            rows += [r, r]
            cols += [q_var(j, t), c_var(j, t)]
            data += [1.0, -gain_c]
            if j in d_of_unit:
                rows.append(r)
                cols.append(d_var(j, t))
                data.append(gain_d)
            if t == 0:
                b_eq.append(carry[j, 0] * q_init[j])
            else:
                if carry[j, t]:
                    rows.append(r)
                    cols.append(q_var(j, t - 1))
                    data.append(-1.0)
                b_eq.append(0.0)
            r += 1
    A_eq = sparse.coo_matrix((data, (rows, cols)), shape=(r, n_vars)).tocsc()
    b_eq = np.array(b_eq)

    # inequality rows, built per step as dense blocks over the step's unit vars
    s0 = np.hstack([p_unc, q_unc])  # (h, 2C)
    v_rows = model.A @ step_map     # (n_n, n_su)
    v0 = s0 @ model.A.T + model.a   # (h, n_n)
    theta = 2.0 * np.pi * np.arange(N_POLY) / N_POLY
    if n_t:
        f_rows = model.F @ step_map
        g_rows = model.G @ step_map
        cf0 = s0 @ model.F.T + model.f  # (h, n_t)
        cg0 = s0 @ model.G.T + model.g
        poly_rows = (np.cos(theta)[:, None, None] * f_rows[None, :, :]
                     + np.sin(theta)[:, None, None] * g_rows[None, :, :]
                     ).reshape(N_POLY * n_t, n_su)
        poly0 = (np.cos(theta)[None, :, None] * cf0[:, None, :]
                 + np.sin(theta)[None, :, None] * cg0[:, None, :])  # (h, NP, n_t)

    ub_rows, ub_cols, ub_data, b_ub = [], [], [], []
    r = 0

    def add_block(t, block, rhs, slack_idx=None, slack_coef=-1.0):
        """block rows over step-t unit vars; optional one slack var per row."""
        nonlocal r
        m_b, n_b = block.shape
        rr, cc = np.nonzero(block)
        ub_rows.extend((r + rr).tolist())
        ub_cols.extend((t * n_su + cc).tolist())
        ub_data.extend(block[rr, cc].tolist())
        if slack_idx is not None:
            ub_rows.extend(range(r, r + m_b))
            ub_cols.extend(slack_idx)
            ub_data.extend([slack_coef] * m_b)
        b_ub.extend(np.asarray(rhs).tolist())
        r += m_b

    vmax, vmin = net.vmax, net.vmin
    for t in range(h):
        hv_hi_idx = [off_hv_hi + n * h + t for n in range(n_n)]
        hv_lo_idx = [off_hv_lo + n * h + t for n in range(n_n)]
        add_block(t, v_rows, vmax - v0[t], hv_hi_idx)
        add_block(t, -v_rows, v0[t] - vmin, hv_lo_idx)
        if n_t:
            # row order matches poly_rows reshape: direction-major, transformer-minor
            poly_slack = [off_mt + j * h + t for _ in range(N_POLY) for j in range(n_t)]
            add_block(t, poly_rows, -poly0[t].reshape(-1), poly_slack)
    if n_t:
        # hT >= mT - rating
        ratings = np.sqrt(net.tau_max)
        for j in range(n_t):
            for t in range(h):
                ub_rows += [r, r]
                ub_cols += [off_mt + j * h + t, off_ht + j * h + t]
                ub_data += [1.0, -1.0]
                b_ub.append(float(ratings[j]))
                r += 1
    A_ub = sparse.coo_matrix((ub_data, (ub_rows, ub_cols)), shape=(r, n_vars)).tocsc()
    b_ub = np.array(b_ub)

    bounds = list(zip(lb.tolist(), [None if not np.isfinite(x) else x for x in ub]))
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    if res.status == 2:
        raise InfeasibleHorizon(res.message)
    if res.status != 0:
        raise RuntimeError(f"horizon LP failed: {res.message}")

    x = res.x
    c_sched = np.zeros((keep, n_u))
    d_sched = np.zeros((keep, n_u))
    for t in range(keep):
        for j in range(n_u):
            c_sched[t, j] = x[c_var(j, t)]
            if j in d_of_unit:
                d_sched[t, j] = x[d_var(j, t)]
    hv = x[off_hv_hi:off_mt]
    ht = x[off_ht:]
    tou = sum(float(x[c_var(j, t)] - (x[d_var(j, t)] if j in d_of_unit else 0.0))
              * tariff.rate_of_step(t0 + t) * delta
              for t in range(h) for j in range(n_u))
    return CentralizedPlan(
        c=c_sched, d=d_sched, objective=float(res.fun),
        breakdown={
            "voltage_hinge": float(hv.sum()),
            "transformer_hinge": float(ht.sum()),
            "dispatch_tou_cost": tou,
        },
        units=units,
    )
