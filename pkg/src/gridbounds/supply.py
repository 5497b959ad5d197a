"""Global controller: per-hour maximum-volume supply box inside the feasible set.

Maximizes sum(log(1 - du_i - dl_i)) over normalized shrink factors, subject to
the demand box, the hourly reactive maps, and vertex (interval-arithmetic)
versions of the learned voltage and transformer-flow constraints. Solved with
a primal log-barrier method with Newton steps; transformer apparent power is a
second-order-cone constraint on two auxiliary channel-magnitude variables.

Reactive corners use the same positive/negative split as the network maps so
the box remains sound even when a fitted slope is negative; with positive
slopes this reduces to applying the upper map at the upper bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .demand import DemandBox
from .linmodel import SplitModel
from .network import Network
from .reactive import ReactiveBoundModel


class Infeasible(Exception):
    pass


class SolverStall(Exception):
    def __init__(self, iterations: int, message: str = ""):
        self.iterations = iterations
        super().__init__(message or f"Newton stalled after {iterations} iterations")


class HourError(Exception):
    """Wraps a per-hour solver failure with its hour index."""

    def __init__(self, hour: int, cause: Exception):
        self.hour = hour
        self.cause = cause
        super().__init__(f"hour {hour}: {cause}")


@dataclass
class BoxProblem:
    """One hour of the supply-bounds program."""
    split: SplitModel
    p_ud: np.ndarray     # (C,) demand upper bound, p.u.
    p_ld: np.ndarray     # (C,) demand lower bound
    slope_u: np.ndarray  # (C,) hourly reactive maps
    icpt_u: np.ndarray
    slope_l: np.ndarray
    icpt_l: np.ndarray
    vmin: np.ndarray     # (N,)
    vmax: np.ndarray
    tau_max: np.ndarray  # (T,)


@dataclass
class VertexConstraints:
    """Linear rows G x <= h plus per-transformer SOC constraints.

    Variable layout: x = [du(C), dl(C), q_hi(C), q_lo(C), mF(T), mG(T)].
    """
    G: np.ndarray
    h: np.ndarray
    quad_idx: np.ndarray    # (T, 2) indices of (mF_j, mG_j)
    tau_max: np.ndarray
    n_c: int
    n_t: int
    sum_rows: np.ndarray    # (C, nx) selecting du_i + dl_i
    m_hi: np.ndarray        # affine map x -> s_hi
    c_hi: np.ndarray
    m_lo: np.ndarray
    c_lo: np.ndarray
    relax_rows: np.ndarray  # voltage row indices (phase-1 relaxable)
    q_margin: np.ndarray = None  # (C,) slack scale for the q-corner caps

    @property
    def nx(self) -> int:
        return self.G.shape[1]

    def s_box(self, x: np.ndarray):
        return self.m_lo @ x + self.c_lo, self.m_hi @ x + self.c_hi


def build_vertex_constraints(prob: BoxProblem) -> VertexConstraints:
    sp = prob.split
    n_c = prob.p_ud.size
    n_n = prob.vmin.size
    n_t = prob.tau_max.size
    nx = 4 * n_c + 2 * n_t
    i_du, i_dl = 0, n_c
    i_qh, i_ql = 2 * n_c, 3 * n_c
    i_mf, i_mg = 4 * n_c, 4 * n_c + n_t

    w = prob.p_ud - prob.p_ld
    if not np.all(w > 0):
        raise ValueError("demand box degenerate: p_ud must exceed p_ld")

    # p_u = p_ud - w*du, p_l = p_ld + w*dl  (affine in x)
    P_u = np.zeros((n_c, nx))
    P_u[np.arange(n_c), i_du + np.arange(n_c)] = -w
    c_pu = prob.p_ud.copy()
    P_l = np.zeros((n_c, nx))
    P_l[np.arange(n_c), i_dl + np.arange(n_c)] = w
    c_pl = prob.p_ld.copy()

    def interval_form(slope, icpt, upper: bool):
        """Affine map for max (upper) / min of slope*p + icpt over [p_l, p_u]."""
        pos, neg = np.maximum(slope, 0), np.minimum(slope, 0)
        hi, lo = (pos, neg) if upper else (neg, pos)
        return hi[:, None] * P_u + lo[:, None] * P_l, hi * c_pu + lo * c_pl + icpt

    Umax_m, Umax_c = interval_form(prob.slope_u, prob.icpt_u, True)
    Lmax_m, Lmax_c = interval_form(prob.slope_l, prob.icpt_l, True)
    Umin_m, Umin_c = interval_form(prob.slope_u, prob.icpt_u, False)
    Lmin_m, Lmin_c = interval_form(prob.slope_l, prob.icpt_l, False)

    sel_qh = np.zeros((n_c, nx))
    sel_qh[np.arange(n_c), i_qh + np.arange(n_c)] = 1.0
    sel_ql = np.zeros((n_c, nx))
    sel_ql[np.arange(n_c), i_ql + np.arange(n_c)] = 1.0

    # s vectors stack (p, q) corners
    m_hi = np.vstack([P_u, sel_qh])
    c_hi = np.concatenate([c_pu, np.zeros(n_c)])
    m_lo = np.vstack([P_l, sel_ql])
    c_lo = np.concatenate([c_pl, np.zeros(n_c)])

    rows: list[np.ndarray] = []
    rhs: list[np.ndarray] = []

    def add(gm, hv):
        rows.append(gm)
        rhs.append(np.atleast_1d(hv))

    # du, dl >= 0
    neg_eye = np.zeros((2 * n_c, nx))
    neg_eye[np.arange(2 * n_c), np.arange(2 * n_c)] = -1.0
    add(neg_eye, np.zeros(2 * n_c))

    # reactive corners dominate both maps' interval extremes
    add(Umax_m - sel_qh, -Umax_c)
    add(Lmax_m - sel_qh, -Lmax_c)
    add(sel_ql - Umin_m, Umin_c)
    add(sel_ql - Lmin_m, Lmin_c)

    # loose caps keep the q-corner variables bounded when no network row
    # touches them; the margin scales with the reactive range so start points
    # and the analytic center stay on the problem's own scale
    corner_vals = np.stack([
        prob.slope_u * prob.p_ud + prob.icpt_u,
        prob.slope_u * prob.p_ld + prob.icpt_u,
        prob.slope_l * prob.p_ud + prob.icpt_l,
        prob.slope_l * prob.p_ld + prob.icpt_l,
    ])
    q_margin = 0.05 + 0.5 * (corner_vals.max(axis=0) - corner_vals.min(axis=0))
    add(sel_qh, corner_vals.max(axis=0) + q_margin)
    add(-sel_ql, -(corner_vals.min(axis=0) - q_margin))

    # voltage vertices
    a_const = sp.a_pos + sp.a_neg
    Vhi_m = sp.A_pos @ m_hi + sp.A_neg @ m_lo
    Vhi_c = sp.A_pos @ c_hi + sp.A_neg @ c_lo + a_const
    Vlo_m = sp.A_pos @ m_lo + sp.A_neg @ m_hi
    Vlo_c = sp.A_pos @ c_lo + sp.A_neg @ c_hi + a_const
    first_v_row = sum(r.shape[0] for r in rows)
    add(Vhi_m, prob.vmax - Vhi_c)
    add(-Vhi_m, Vhi_c - prob.vmin)
    add(Vlo_m, prob.vmax - Vlo_c)
    add(-Vlo_m, Vlo_c - prob.vmin)
    relax_rows = np.arange(first_v_row, first_v_row + 4 * n_n)

    # channel magnitudes: m >= max |channel| over the box, per channel
    if n_t:
        f_const = sp.f_pos + sp.f_neg
        g_const = sp.g_pos + sp.g_neg
        sel_mf = np.zeros((n_t, nx))
        sel_mf[np.arange(n_t), i_mf + np.arange(n_t)] = 1.0
        sel_mg = np.zeros((n_t, nx))
        sel_mg[np.arange(n_t), i_mg + np.arange(n_t)] = 1.0
        Fhi_m = sp.F_pos @ m_hi + sp.F_neg @ m_lo
        Fhi_c = sp.F_pos @ c_hi + sp.F_neg @ c_lo + f_const
        Flo_m = sp.F_pos @ m_lo + sp.F_neg @ m_hi
        Flo_c = sp.F_pos @ c_lo + sp.F_neg @ c_hi + f_const
        Ghi_m = sp.G_pos @ m_hi + sp.G_neg @ m_lo
        Ghi_c = sp.G_pos @ c_hi + sp.G_neg @ c_lo + g_const
        Glo_m = sp.G_pos @ m_lo + sp.G_neg @ m_hi
        Glo_c = sp.G_pos @ c_lo + sp.G_neg @ c_hi + g_const
        add(Fhi_m - sel_mf, -Fhi_c)
        add(-Flo_m - sel_mf, Flo_c)
        add(Ghi_m - sel_mg, -Ghi_c)
        add(-Glo_m - sel_mg, Glo_c)

    G = np.vstack(rows)
    h = np.concatenate(rhs)
    quad_idx = np.column_stack([i_mf + np.arange(n_t), i_mg + np.arange(n_t)]) \
        if n_t else np.zeros((0, 2), dtype=int)

    sum_rows = np.zeros((n_c, nx))
    sum_rows[np.arange(n_c), i_du + np.arange(n_c)] = 1.0
    sum_rows[np.arange(n_c), i_dl + np.arange(n_c)] = 1.0

    return VertexConstraints(G, h, quad_idx, prob.tau_max.copy(), n_c, n_t,
                             sum_rows, m_hi, c_hi, m_lo, c_lo, relax_rows,
                             q_margin)


# ---------------------------------------------------------------------------
# log-barrier solver

_SIGMA_MARGIN = 1e-9  # du + dl <= 1 - margin

# The volume objective is flat in how a node's shrink splits between du and
# dl; without a tie-break the central path splits evenly, needlessly raising
# the supply lower bound and forcing consumption. A tiny linear preference for
# small dl resolves the degeneracy (objective shift <= DL_TIEBREAK * C).
_DL_TIEBREAK = 1e-4


def _domain_ok(cons: VertexConstraints, x: np.ndarray) -> bool:
    if np.any(cons.sum_rows @ x >= 1.0 - _SIGMA_MARGIN):
        return False
    if np.any(cons.h - cons.G @ x <= 0.0):
        return False
    if cons.n_t:
        mf = x[cons.quad_idx[:, 0]]
        mg = x[cons.quad_idx[:, 1]]
        # same expression the barrier evaluates, so rounding stays consistent
        if np.any(cons.tau_max - mf ** 2 - mg ** 2 <= 0.0):
            return False
    return True


def _value_grad_hess(cons: VertexConstraints, x: np.ndarray, t: float):
    """Value, gradient and Hessian of f0(x) + barrier(x)/t.

    The 1/t scaling keeps magnitudes O(1) on the whole central path; the
    gradient is then exactly the KKT stationarity residual with multipliers
    1/(t * slack).
    """
    u = 1.0 - cons.sum_rows @ x
    r = cons.h - cons.G @ x
    dl = x[cons.n_c:2 * cons.n_c]
    val = -np.log(u).sum() + _DL_TIEBREAK * dl.sum() - np.log(r).sum() / t
    grad = cons.sum_rows.T @ (1.0 / u) + cons.G.T @ (1.0 / r) / t
    grad[cons.n_c:2 * cons.n_c] += _DL_TIEBREAK
    hess = (cons.sum_rows.T * (1.0 / u ** 2)) @ cons.sum_rows \
        + (cons.G.T * (1.0 / (t * r ** 2))) @ cons.G
    if cons.n_t:
        mf = x[cons.quad_idx[:, 0]]
        mg = x[cons.quad_idx[:, 1]]
        s = cons.tau_max - mf ** 2 - mg ** 2
        val -= np.log(s).sum() / t
        gf, gg = 2.0 * mf / (t * s), 2.0 * mg / (t * s)
        np.add.at(grad, cons.quad_idx[:, 0], gf)
        np.add.at(grad, cons.quad_idx[:, 1], gg)
        for j in range(cons.n_t):
            iF, iG = cons.quad_idx[j]
            sj = s[j]
            v = np.array([mf[j], mg[j]])
            block = (2.0 / sj) * np.eye(2) + (4.0 / sj ** 2) * np.outer(v, v)
            hess[np.ix_([iF, iG], [iF, iG])] += block / t
    return val, grad, hess


def _solve_newton_system(hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(hess, -grad)
    except np.linalg.LinAlgError:
        ridge = 1e-10 * max(1.0, float(np.abs(np.diag(hess)).max()))
        try:
            return np.linalg.solve(hess + ridge * np.eye(len(grad)), -grad)
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(hess, -grad, rcond=None)[0]


def _newton(cons: VertexConstraints, x: np.ndarray, t: float,
            ntol: float = 1e-10, max_iter: int = 100):
    """Center at barrier parameter t; returns (x, iterations, final decrement^2/2)."""
    for it in range(max_iter):
        val, grad, hess = _value_grad_hess(cons, x, t)
        d = _solve_newton_system(hess, grad)
        lam2 = float(-grad @ d)
        if lam2 / 2.0 <= ntol:
            return x, it, lam2 / 2.0
        alpha = 1.0
        while alpha > 1e-14:
            xn = x + alpha * d
            if _domain_ok(cons, xn):
                vn, _, _ = _value_grad_hess(cons, xn, t)
                if vn <= val + 0.25 * alpha * float(grad @ d):
                    break
            alpha *= 0.5
        else:
            if lam2 / 2.0 <= 1e-6:  # FP floor near the center; accept
                return x, it, lam2 / 2.0
            raise SolverStall(it, "line search failed")
        x = xn
    if lam2 / 2.0 <= 1e-6:
        return x, max_iter, lam2 / 2.0
    raise SolverStall(max_iter)


def _heuristic_start(cons: VertexConstraints) -> np.ndarray | None:
    n_c, n_t = cons.n_c, cons.n_t
    for alpha in (0.3, 0.45, 0.49, 0.499):
        x = np.zeros(cons.nx)
        x[:2 * n_c] = alpha
        # q corners mid-band between the map extremes and their cap rows
        g = cons.G @ x - cons.h
        bump = g[2 * n_c:6 * n_c].reshape(4, n_c)
        x[2 * n_c:3 * n_c] += np.maximum(bump[0], bump[1]) + cons.q_margin / 2
        x[3 * n_c:4 * n_c] -= np.maximum(bump[2], bump[3]) + cons.q_margin / 2
        if n_t:
            # channel rows live after the voltage rows
            ch_rows = slice(cons.relax_rows[-1] + 1, cons.G.shape[0])
            need = cons.G[ch_rows] @ x - cons.h[ch_rows]
            nf = need[:2 * n_t].reshape(2, n_t)
            ng = need[2 * n_t:].reshape(2, n_t)
            x[cons.quad_idx[:, 0]] += np.maximum(nf[0], nf[1]).clip(0) + 1e-6
            x[cons.quad_idx[:, 1]] += np.maximum(ng[0], ng[1]).clip(0) + 1e-6
        if _domain_ok(cons, x):
            return x
    return None


def _phase1(cons: VertexConstraints, tol: float) -> np.ndarray:
    """Find a strictly feasible point by minimizing a shared violation slack."""
    n_c, n_t = cons.n_c, cons.n_t
    nx = cons.nx
    relax = cons.relax_rows
    hard = np.setdiff1d(np.arange(cons.G.shape[0]), relax)

    x = np.zeros(nx)
    x[:2 * n_c] = 0.25
    g = cons.G @ x - cons.h
    bump = g[2 * n_c:6 * n_c].reshape(4, n_c)
    x[2 * n_c:3 * n_c] += np.maximum(bump[0], bump[1]) + cons.q_margin / 2
    x[3 * n_c:4 * n_c] -= np.maximum(bump[2], bump[3]) + cons.q_margin / 2
    if n_t:
        ch_rows = slice(relax[-1] + 1, cons.G.shape[0])
        need = cons.G[ch_rows] @ x - cons.h[ch_rows]
        nf = need[:2 * n_t].reshape(2, n_t)
        ng = need[2 * n_t:].reshape(2, n_t)
        x[cons.quad_idx[:, 0]] += np.maximum(nf[0], nf[1]).clip(0) + 1e-3
        x[cons.quad_idx[:, 1]] += np.maximum(ng[0], ng[1]).clip(0) + 1e-3

    g = cons.G @ x - cons.h
    s0 = float(g[relax].max(initial=-1.0))
    if n_t:
        mf = x[cons.quad_idx[:, 0]]
        mg = x[cons.quad_idx[:, 1]]
        s0 = max(s0, float((mf ** 2 + mg ** 2 - cons.tau_max).max()))
    s0 += 1.0
    z = np.concatenate([x, [s0]])

    G_hard = np.column_stack([cons.G[hard], np.zeros(hard.size)])
    h_hard = cons.h[hard]
    G_rel = np.column_stack([cons.G[relax], -np.ones(relax.size)])
    h_rel = cons.h[relax]
    sum_rows = np.column_stack([cons.sum_rows, np.zeros(n_c)])
    quad_idx = cons.quad_idx  # same variable positions within z[:-1]

    aux = VertexConstraints(
        G=np.vstack([G_hard, G_rel]),
        h=np.concatenate([h_hard, h_rel]),
        quad_idx=quad_idx, tau_max=cons.tau_max, n_c=n_c, n_t=0,  # quad handled below
        sum_rows=sum_rows, m_hi=np.zeros((0, nx + 1)), c_hi=np.zeros(0),
        m_lo=np.zeros((0, nx + 1)), c_lo=np.zeros(0),
        relax_rows=np.zeros(0, dtype=int),
    )

    # SOC rows relaxed by s: tau_max - mf^2 - mg^2 + s > 0. Fold them in by
    # treating them as extra barrier terms via a wrapper objective.
    def domain(z_):
        if not np.all(aux.h - aux.G @ z_ > 0):
            return False
        if np.any(aux.sum_rows @ z_ >= 1.0 - _SIGMA_MARGIN):
            return False
        if n_t:
            mf = z_[quad_idx[:, 0]]
            mg = z_[quad_idx[:, 1]]
            if np.any(cons.tau_max - mf ** 2 - mg ** 2 + z_[-1] <= 0.0):
                return False
        return True

    def vgh(z_, t):
        # classic t*s + barrier form: the Hessian is pure barrier curvature,
        # so it cannot degenerate as t grows (the objective is linear in s)
        u = 1.0 - aux.sum_rows @ z_
        r = aux.h - aux.G @ z_
        val = t * z_[-1] - np.log(u).sum() - np.log(r).sum()
        grad = aux.sum_rows.T @ (1.0 / u) + aux.G.T @ (1.0 / r)
        grad[-1] += t
        hess = (aux.sum_rows.T * (1.0 / u ** 2)) @ aux.sum_rows \
            + (aux.G.T * (1.0 / r ** 2)) @ aux.G
        if n_t:
            mf = z_[quad_idx[:, 0]]
            mg = z_[quad_idx[:, 1]]
            sq = cons.tau_max - mf ** 2 - mg ** 2 + z_[-1]
            val -= np.log(sq).sum()
            for j in range(n_t):
                iF, iG = quad_idx[j]
                sj = sq[j]
                gv = np.array([2 * mf[j] / sj, 2 * mg[j] / sj, -1.0 / sj])
                idx = [iF, iG, nx]
                for a, ia in enumerate(idx):
                    grad[ia] += gv[a]
                w2 = np.array([2 * mf[j], 2 * mg[j], -1.0]) / sj
                blk = np.outer(w2, w2)
                blk[0, 0] += 2.0 / sj
                blk[1, 1] += 2.0 / sj
                hess[np.ix_(idx, idx)] += blk
        return val, grad, hess

    t = 1.0
    m_terms = aux.G.shape[0] + n_c + n_t
    for _ in range(60):
        for _ in range(100):
            val, grad, hess = vgh(z, t)
            d = _solve_newton_system(hess, grad)
            lam2 = float(-grad @ d)
            if not np.isfinite(lam2) or lam2 / 2.0 <= 1e-10:
                break
            alpha = 1.0
            while alpha > 1e-14 and not (domain(z + alpha * d)
                                         and vgh(z + alpha * d, t)[0] <= val + 0.25 * alpha * float(grad @ d)):
                alpha *= 0.5
            if alpha <= 1e-14:
                break
            z = z + alpha * d
            if z[-1] < -1e-7:
                return z[:-1]
        if z[-1] < -1e-7:
            return z[:-1]
        if m_terms / t < tol:
            break
        t *= 20.0
    if z[-1] < 0:
        return z[:-1]
    raise Infeasible(f"no strictly feasible supply box (best violation {z[-1]:.3e})")


def _primal_violation(cons: VertexConstraints, x: np.ndarray) -> float:
    gvals = cons.G @ x - cons.h
    worst = float(np.maximum(gvals, 0.0).max(initial=0.0))
    if cons.n_t:
        mf = x[cons.quad_idx[:, 0]]
        mg = x[cons.quad_idx[:, 1]]
        worst = max(worst, float(np.maximum(mf ** 2 + mg ** 2 - cons.tau_max, 0.0).max()))
    return worst


@dataclass
class HourSolution:
    delta_u: np.ndarray
    delta_l: np.ndarray
    p_u: np.ndarray
    p_l: np.ndarray
    q_u: np.ndarray
    q_l: np.ndarray
    objective: float
    gap: float
    kkt_residual: float
    newton_iterations: int
    fallback: bool = False


def solve_supply_bounds(prob: BoxProblem, tol: float = 1e-6) -> HourSolution:
    """Solve one hour's box program to duality gap below ``tol``."""
    cons = build_vertex_constraints(prob)
    x = _heuristic_start(cons)
    if x is None:
        x = _phase1(cons, tol)
    m_barrier = cons.G.shape[0] + cons.n_t
    t = 1.0
    total_newton = 0
    while True:
        x, iters, dec = _newton(cons, x, t)
        total_newton += iters
        if m_barrier / t < tol:
            break
        t *= 20.0
    # at an (approximately) centered point the certified suboptimality is
    # m/t + decrement^2; primal violation is zero by interiority
    kkt = m_barrier / t + dec + _primal_violation(cons, x)
    du = np.maximum(x[:cons.n_c], 0.0)
    dl = np.maximum(x[cons.n_c:2 * cons.n_c], 0.0)
    w = prob.p_ud - prob.p_ld
    p_u = prob.p_ud - w * du
    p_l = prob.p_ld + w * dl
    return HourSolution(
        delta_u=du, delta_l=dl, p_u=p_u, p_l=p_l,
        q_u=prob.slope_u * p_u + prob.icpt_u,
        q_l=prob.slope_l * p_l + prob.icpt_l,
        objective=float(np.log(1.0 - du - dl).sum()),
        gap=m_barrier / t, kkt_residual=kkt,
        newton_iterations=total_newton,
    )


@dataclass
class SupplyBox:
    consumer_ids: tuple[int, ...]
    p_u: np.ndarray  # (24, C) p.u.
    p_l: np.ndarray
    q_u: np.ndarray
    q_l: np.ndarray
    delta_u: np.ndarray
    delta_l: np.ndarray
    fallback_hours: tuple[int, ...] = ()
    diagnostics: list = field(default_factory=list)

    def hour(self, h: int):
        return self.p_l[h], self.p_u[h]

    def to_json(self, base_power_kva: float) -> str:
        """GC -> LC wire message, kW, keyed by (node, hour)."""
        doc = {
            "fallback_hours": list(self.fallback_hours),
            "bounds": {
                str(nid): {
                    str(h): {
                        "p_u_kw": self.p_u[h, k] * base_power_kva,
                        "p_l_kw": self.p_l[h, k] * base_power_kva,
                        "q_u_kvar": self.q_u[h, k] * base_power_kva,
                        "q_l_kvar": self.q_l[h, k] * base_power_kva,
                    } for h in range(24)
                } for k, nid in enumerate(self.consumer_ids)
            },
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @staticmethod
    def from_json(text: str, base_power_kva: float) -> "SupplyBox":
        doc = json.loads(text)
        ids = tuple(sorted(int(i) for i in doc["bounds"]))
        c = len(ids)
        arrays = {k: np.zeros((24, c)) for k in ("p_u", "p_l", "q_u", "q_l")}
        for k, nid in enumerate(ids):
            for h in range(24):
                e = doc["bounds"][str(nid)][str(h)]
                arrays["p_u"][h, k] = e["p_u_kw"] / base_power_kva
                arrays["p_l"][h, k] = e["p_l_kw"] / base_power_kva
                arrays["q_u"][h, k] = e["q_u_kvar"] / base_power_kva
                arrays["q_l"][h, k] = e["q_l_kvar"] / base_power_kva
        return SupplyBox(ids, arrays["p_u"], arrays["p_l"], arrays["q_u"],
                         arrays["q_l"], np.zeros((24, c)), np.zeros((24, c)),
                         tuple(doc.get("fallback_hours", [])))


def make_box_problem(net: Network, split: SplitModel, rmodel: ReactiveBoundModel,
                     demand: DemandBox, hour: int) -> BoxProblem:
    su, iu, sl, il = rmodel.hour_maps(hour)
    lo, hi = demand.hour(hour)
    return BoxProblem(split, hi.copy(), lo.copy(), su.copy(), iu.copy(),
                      sl.copy(), il.copy(), net.vmin, net.vmax, net.tau_max)


def compute_day_ahead_bounds(net: Network, split: SplitModel,
                             rmodel: ReactiveBoundModel, demand: DemandBox,
                             tol: float = 1e-6,
                             on_error: str = "raise") -> SupplyBox:
    """Solve all 24 hourly programs; optionally fall back to the demand box."""
    c = net.n_consumers
    arrays = {k: np.zeros((24, c)) for k in
              ("p_u", "p_l", "q_u", "q_l", "delta_u", "delta_l")}
    fallback = []
    diags = []
    for h in range(24):
        prob = make_box_problem(net, split, rmodel, demand, h)
        try:
            sol = solve_supply_bounds(prob, tol=tol)
        except (Infeasible, SolverStall) as exc:
            if on_error == "raise":
                raise HourError(h, exc) from exc
            fallback.append(h)
            sol = HourSolution(
                delta_u=np.zeros(c), delta_l=np.zeros(c),
                p_u=prob.p_ud.copy(), p_l=prob.p_ld.copy(),
                q_u=prob.slope_u * prob.p_ud + prob.icpt_u,
                q_l=prob.slope_l * prob.p_ld + prob.icpt_l,
                objective=0.0, gap=np.nan, kkt_residual=np.nan,
                newton_iterations=0, fallback=True,
            )
        arrays["p_u"][h] = sol.p_u
        arrays["p_l"][h] = sol.p_l
        arrays["q_u"][h] = sol.q_u
        arrays["q_l"][h] = sol.q_l
        arrays["delta_u"][h] = sol.delta_u
        arrays["delta_l"][h] = sol.delta_l
        diags.append(sol)
    return SupplyBox(net.consumer_ids, arrays["p_u"], arrays["p_l"],
                     arrays["q_u"], arrays["q_l"], arrays["delta_u"],
                     arrays["delta_l"], tuple(fallback), diags)


def sample_soundness(prob: BoxProblem, sol: HourSolution, n_samples: int,
                     rng: np.random.Generator, tol: float = 1e-9) -> int:
    """Count linear-model limit violations over injections sampled in the box.

    Real parts uniform in [p_l, p_u]; reactive parts uniform between the two
    hourly maps evaluated at the sampled real parts.
    """
    c = sol.p_u.size
    p = rng.uniform(sol.p_l, sol.p_u, size=(n_samples, c))
    q_a = prob.slope_u * p + prob.icpt_u
    q_b = prob.slope_l * p + prob.icpt_l
    q_lo = np.minimum(q_a, q_b)
    q_hi = np.maximum(q_a, q_b)
    q = rng.uniform(q_lo, q_hi)
    s = np.hstack([p, q])
    sp = prob.split
    A = sp.A_pos + sp.A_neg
    a = sp.a_pos + sp.a_neg
    v = s @ A.T + a
    bad = np.any(v > prob.vmax + tol, axis=1) | np.any(v < prob.vmin - tol, axis=1)
    if prob.tau_max.size:
        F = sp.F_pos + sp.F_neg
        G = sp.G_pos + sp.G_neg
        cf = s @ F.T + (sp.f_pos + sp.f_neg)
        cg = s @ G.T + (sp.g_pos + sp.g_neg)
        tau = cf ** 2 + cg ** 2
        bad |= np.any(tau > prob.tau_max + tol, axis=1)
    return int(bad.sum())
