"""Radial distribution network model and seeded synthetic network generation.

Everything is per-unit on ``base_power_kva``; the substation (node id 1) is the
slack bus pinned at 1.0 p.u. Networks are immutable after construction and safe
to share across workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SUBSTATION = "substation"
JUNCTION = "junction"
CONSUMER = "consumer"
_KINDS = (SUBSTATION, JUNCTION, CONSUMER)


@dataclass(frozen=True)
class Node:
    id: int
    kind: str
    nominal_voltage: float = 1.0
    vmin: float = 0.95
    vmax: float = 1.05
    ref_peak_kw: float | None = None  # consumer baseline peak used for sizing/scaling


@dataclass(frozen=True)
class Line:
    from_node: int
    to_node: int
    resistance: float  # p.u.
    reactance: float   # p.u.


@dataclass(frozen=True)
class Transformer:
    from_node: int
    to_node: int
    rating_sq: float  # max apparent power squared, p.u.


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    lines: tuple[Line, ...]
    transformers: tuple[Transformer, ...]
    timestep_hours: float = 0.25
    base_power_kva: float = 100.0

    @cached_property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @cached_property
    def consumer_ids(self) -> tuple[int, ...]:
        return tuple(n.id for n in self.nodes if n.kind == CONSUMER)

    @cached_property
    def n_consumers(self) -> int:
        return len(self.consumer_ids)

    @cached_property
    def consumer_index(self) -> dict[int, int]:
        """Map node id -> position in the consumer vector."""
        return {nid: k for k, nid in enumerate(self.consumer_ids)}

    @cached_property
    def vmin(self) -> np.ndarray:
        return np.array([n.vmin for n in self.nodes])

    @cached_property
    def vmax(self) -> np.ndarray:
        return np.array([n.vmax for n in self.nodes])

    @cached_property
    def tau_max(self) -> np.ndarray:
        return np.array([t.rating_sq for t in self.transformers])

    def kw_to_pu(self, kw):
        return np.asarray(kw, dtype=float) / self.base_power_kva

    def pu_to_kw(self, pu):
        return np.asarray(pu, dtype=float) * self.base_power_kva

    def to_json(self) -> str:
        doc = {
            "base_power_kva": self.base_power_kva,
            "timestep_hours": self.timestep_hours,
            "nodes": [
                {k: v for k, v in {
                    "id": n.id, "kind": n.kind,
                    "nominal_voltage": n.nominal_voltage,
                    "vmin": n.vmin, "vmax": n.vmax,
                    "ref_peak_kw": n.ref_peak_kw,
                }.items() if v is not None}
                for n in self.nodes
            ],
            "lines": [
                {"from": l.from_node, "to": l.to_node,
                 "resistance": l.resistance, "reactance": l.reactance}
                for l in self.lines
            ],
            "transformers": [
                {"from": t.from_node, "to": t.to_node, "rating_sq": t.rating_sq}
                for t in self.transformers
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "Network":
        doc = json.loads(text)
        nodes = tuple(
            Node(id=d["id"], kind=d["kind"],
                 nominal_voltage=d.get("nominal_voltage", 1.0),
                 vmin=d.get("vmin", 0.95), vmax=d.get("vmax", 1.05),
                 ref_peak_kw=d.get("ref_peak_kw"))
            for d in doc["nodes"]
        )
        lines = tuple(
            Line(d["from"], d["to"], d["resistance"], d["reactance"])
            for d in doc["lines"]
        )
        transformers = tuple(
            Transformer(d["from"], d["to"], d["rating_sq"])
            for d in doc["transformers"]
        )
        return Network(nodes, lines, transformers,
                       timestep_hours=doc.get("timestep_hours", 0.25),
                       base_power_kva=doc.get("base_power_kva", 100.0))


def validate_topology(net: Network) -> list[str]:
    """Check all structural invariants; returns [] iff the network is valid.

    Each violation message names the offending element.
    """
    problems: list[str] = []
    ids = [n.id for n in net.nodes]
    n = len(ids)
    if sorted(ids) != list(range(1, n + 1)):
        problems.append(f"node ids are not a permutation of 1..{n}: {sorted(ids)}")
    subs = [m.id for m in net.nodes if m.kind == SUBSTATION]
    if len(subs) == 0:
        problems.append("no substation node")
    elif len(subs) > 1:
        problems.append(f"multiple substations: nodes {subs}")
    elif subs[0] != 1:
        problems.append(f"substation must be node 1, found node {subs[0]}")
    for m in net.nodes:
        if m.kind not in _KINDS:
            problems.append(f"node {m.id}: unknown kind {m.kind!r}")
        if not m.vmin < m.vmax:
            problems.append(f"node {m.id}: vmin {m.vmin} not below vmax {m.vmax}")

    id_set = set(ids)
    for l in net.lines:
        if l.from_node not in id_set or l.to_node not in id_set:
            problems.append(f"line {l.from_node}-{l.to_node} references unknown node")
        if l.resistance < 0 or l.reactance < 0:
            problems.append(f"line {l.from_node}-{l.to_node}: negative impedance")

    # Tree check via union-find; extra edge inside a component closes a cycle.
    parent = {i: i for i in ids}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for l in net.lines:
        if l.from_node not in id_set or l.to_node not in id_set:
            continue
        ra, rb = find(l.from_node), find(l.to_node)
        if ra == rb:
            problems.append(f"cycle involving nodes {l.from_node} and {l.to_node}")
        else:
            parent[ra] = rb
    if subs and len({find(i) for i in ids}) > 1:
        roots = sorted({find(i) for i in ids})
        problems.append(f"network not connected ({len(roots)} components)")
    if len(net.lines) != n - 1 and not any("cycle" in p or "connected" in p for p in problems):
        problems.append(f"edge count {len(net.lines)} != nodes-1 = {n - 1}")

    line_pairs = {frozenset((l.from_node, l.to_node)) for l in net.lines}
    for t in net.transformers:
        if frozenset((t.from_node, t.to_node)) not in line_pairs:
            problems.append(f"transformer {t.from_node}-{t.to_node} is not on a line")
        if not t.rating_sq > 0:
            problems.append(f"transformer {t.from_node}-{t.to_node}: rating_sq must be > 0")
    return problems


def generate_radial_network(n_consumers: int, seed: int, style: int = 4,
                            base_power_kva: float = 100.0) -> Network:
    """Generate a seeded synthetic radial network.

    Consumers are arranged in feeder chains hanging off the substation, at most
    ``style`` consumers per chain; the head edge of every chain carries a
    transformer sized to ~1.3x the estimated coincident baseline peak flow so
    that added DER/electrification stresses it. Deterministic per seed.
    """
    if n_consumers < 1:
        raise ValueError("n_consumers must be >= 1")
    if style < 1:
        raise ValueError("style (consumers per feeder) must be >= 1")
    rng = np.random.default_rng(seed)

    n_feeders = math.ceil(n_consumers / style)
    chains: list[list[int]] = [[] for _ in range(n_feeders)]
    for k in range(n_consumers):
        chains[k % n_feeders].append(2 + k)

    nodes = [Node(id=1, kind=SUBSTATION)]
    peaks = {}
    for cid in range(2, 2 + n_consumers):
        peak = float(rng.uniform(3.0, 8.0))
        peaks[cid] = peak
        nodes.append(Node(id=cid, kind=CONSUMER, ref_peak_kw=round(peak, 3)))

    lines = []
    transformers = []
    for chain in chains:
        prev = 1
        for depth, cid in enumerate(chain):
            r = float(rng.uniform(0.002, 0.006))
            x = float(rng.uniform(0.002, 0.006))
            lines.append(Line(prev, cid, round(r, 6), round(x, 6)))
            if depth == 0:
                # coincident peak estimate: diversity 0.9, typical pf 0.93
                chain_peak_kw = 0.9 * sum(peaks[c] for c in chain)
                rating_kva = 1.3 * chain_peak_kw / 0.93
                rating_pu = rating_kva / base_power_kva
                transformers.append(Transformer(prev, cid, round(rating_pu ** 2, 9)))
            prev = cid

    net = Network(tuple(nodes), tuple(lines), tuple(transformers),
                  base_power_kva=base_power_kva)
    problems = validate_topology(net)
    if problems:  # generator bug, not user error
        raise AssertionError(f"generated network invalid: {problems}")
    return net
