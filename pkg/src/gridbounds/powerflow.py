"""Nonlinear ground-truth power flow for radial networks.

Backward/forward sweep on the tree: currents aggregated leaf-to-root, voltages
propagated root-to-leaf. Sign convention is consumption-positive everywhere
(PV export shows up as negative real injection).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .network import Network


class NonConvergence(Exception):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"power flow did not converge after {iterations} iterations "
                         f"(worst residual {residual:.3e})")


@dataclass(frozen=True)
class Injection:
    """Net complex power consumption per node, full-length arrays (p.u.)."""
    p: np.ndarray
    q: np.ndarray

    @staticmethod
    def from_consumers(net: Network, p_c, q_c) -> "Injection":
        p = np.zeros(net.n_nodes)
        q = np.zeros(net.n_nodes)
        idx = np.array(net.consumer_ids) - 1
        p[idx] = p_c
        q[idx] = q_c
        return Injection(p, q)


@dataclass(frozen=True)
class PFSolution:
    v: np.ndarray          # voltage magnitudes per node (p.u.)
    tau: np.ndarray        # apparent-power-squared entering each transformer edge
    flow_re: np.ndarray    # real part of complex flow entering each transformer
    flow_im: np.ndarray    # imaginary part
    substation_p: float    # total real power drawn from the transmission system
    substation_q: float
    converged: bool
    iterations: int
    residual: float


@dataclass(frozen=True)
class _SweepPlan:
    order: np.ndarray        # BFS order of node indices (0-based), root first
    parent: np.ndarray       # parent index per node (-1 at root)
    z: np.ndarray            # impedance of the edge to the parent
    xfmr_child: np.ndarray   # child node index of each transformer edge


@lru_cache(maxsize=32)
def _plan(net: Network) -> _SweepPlan:
    n = net.n_nodes
    adj: list[list[tuple[int, complex]]] = [[] for _ in range(n)]
    for l in net.lines:
        a, b = l.from_node - 1, l.to_node - 1
        z = complex(l.resistance, l.reactance)
        adj[a].append((b, z))
        adj[b].append((a, z))
    order = [0]
    parent = np.full(n, -1, dtype=int)
    z_par = np.zeros(n, dtype=complex)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    head = 0
    while head < len(order):
        u = order[head]
        head += 1
        for v, z in adj[u]:
            if not seen[v]:
                seen[v] = True
                parent[v] = u
                z_par[v] = z
                order.append(v)
    if not seen.all():
        raise ValueError("network is not connected")
    xfmr_child = []
    for t in net.transformers:
        a, b = t.from_node - 1, t.to_node - 1
        xfmr_child.append(b if parent[b] == a else a)
    return _SweepPlan(np.array(order), parent, z_par, np.array(xfmr_child, dtype=int))


def solve_pf(net: Network, inj: Injection, tol: float = 1e-8,
             max_iter: int = 100) -> PFSolution:
    """Solve the radial AC power flow by backward/forward sweep.

    Raises NonConvergence if the worst nodal power-balance residual stays
    above ``tol`` after ``max_iter`` sweeps.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    plan = _plan(net)
    n = net.n_nodes
    s = inj.p + 1j * inj.q
    v = np.ones(n, dtype=complex)  # flat start; substation fixed at 1.0

    order = plan.order
    rev = order[::-1]
    parent = plan.parent
    z = plan.z

    residual = np.inf
    i_acc = np.zeros(n, dtype=complex)
    for it in range(1, max_iter + 1):
        # backward: accumulate branch currents leaf-to-root
        i_acc = np.conj(s / v)
        for u in rev:
            p = parent[u]
            if p >= 0:
                i_acc[p] += i_acc[u]
        # forward: propagate voltages root-to-leaf
        for u in order:
            p = parent[u]
            if p >= 0:
                v[u] = v[p] - z[u] * i_acc[u]
        residual = _worst_residual(plan, v, i_acc, s)
        if residual <= tol:
            return _solution(net, plan, v, i_acc, it, residual)
    raise NonConvergence(max_iter, float(residual))


def _worst_residual(plan: _SweepPlan, v, i_acc, s) -> float:
    """Max |power into node - consumption| over non-root nodes (p.u.)."""
    n = len(v)
    s_in = np.zeros(n, dtype=complex)
    for u in plan.order:
        p = plan.parent[u]
        if p >= 0:
            s_in[u] += v[u] * np.conj(i_acc[u])
            s_in[p] -= v[p] * np.conj(i_acc[u])
    mism = s_in - s
    mism[0] = 0.0  # slack bus balances by construction
    return float(np.abs(mism).max())


def _solution(net: Network, plan: _SweepPlan, v, i_acc, it, residual) -> PFSolution:
    flows = v[plan.parent[plan.xfmr_child]] * np.conj(i_acc[plan.xfmr_child]) \
        if len(plan.xfmr_child) else np.zeros(0, dtype=complex)
    s_sub = 0.0 + 0.0j
    for u in plan.order:
        if plan.parent[u] == 0:
            s_sub += v[0] * np.conj(i_acc[u])
    return PFSolution(
        v=np.abs(v),
        tau=np.abs(flows) ** 2,
        flow_re=flows.real.copy(),
        flow_im=flows.imag.copy(),
        substation_p=float(s_sub.real),
        substation_q=float(s_sub.imag),
        converged=True,
        iterations=it,
        residual=float(residual),
    )


def two_bus_voltage(r: float, x: float, p: float, q: float, v1: float = 1.0) -> float:
    """Closed-form receiving-end voltage magnitude for a single line.

    Solves W^2 + W*(2(rp+xq) - v1^2) + (r^2+x^2)(p^2+q^2) = 0 for W = |V2|^2
    and returns the high-voltage root. Independent check for the sweep.
    """
    b = 2.0 * (r * p + x * q) - v1 ** 2
    c = (r ** 2 + x ** 2) * (p ** 2 + q ** 2)
    disc = b * b - 4.0 * c
    if disc < 0:
        raise ValueError("no real power-flow solution (load beyond loadability)")
    w = (-b + np.sqrt(disc)) / 2.0
    return float(np.sqrt(w))
