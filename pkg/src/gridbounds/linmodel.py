"""Data-driven linearized inverse power flow.

Fits v = A s + a for node voltage magnitudes and two linear flow channels per
transformer (real/imaginary parts of the complex flow) whose squares sum to the
apparent-power-squared flow. The regressor vector s stacks real then reactive
consumer injections. Positive/negative matrix splits support interval (vertex)
bounds over injection boxes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .network import Network
from .powerflow import Injection, PFSolution


class RankDeficient(Exception):
    pass


def stack_consumers(net: Network, inj: Injection) -> np.ndarray:
    """Regressor vector: consumer (p..., q...) stacked, length 2*n_consumers."""
    idx = np.array(net.consumer_ids) - 1
    return np.concatenate([inj.p[idx], inj.q[idx]])


@dataclass
class LinearPFModel:
    A: np.ndarray   # (n_nodes, 2C) voltage map
    a: np.ndarray   # (n_nodes,)
    F: np.ndarray   # (n_xfmr, 2C) real flow channel
    f: np.ndarray
    G: np.ndarray   # (n_xfmr, 2C) imaginary flow channel
    g: np.ndarray

    def predict_v(self, s: np.ndarray) -> np.ndarray:
        return s @ self.A.T + self.a

    def predict_channels(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return s @ self.F.T + self.f, s @ self.G.T + self.g

    def predict_tau(self, s: np.ndarray) -> np.ndarray:
        cf, cg = self.predict_channels(s)
        return cf ** 2 + cg ** 2

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k).tolist()
                           for k in ("A", "a", "F", "f", "G", "g")}, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "LinearPFModel":
        d = json.loads(text)
        return LinearPFModel(**{k: np.array(v) for k, v in d.items()})


@dataclass
class SplitModel:
    """Elementwise positive/negative parts; X_pos + X_neg = X with X_pos >= 0 >= X_neg."""
    A_pos: np.ndarray
    A_neg: np.ndarray
    a_pos: np.ndarray
    a_neg: np.ndarray
    F_pos: np.ndarray
    F_neg: np.ndarray
    f_pos: np.ndarray
    f_neg: np.ndarray
    G_pos: np.ndarray
    G_neg: np.ndarray
    g_pos: np.ndarray
    g_neg: np.ndarray

    def voltage_interval(self, s_lo: np.ndarray, s_hi: np.ndarray):
        """Elementwise (min, max) of A s + a over the box [s_lo, s_hi]."""
        a = self.a_pos + self.a_neg
        v_hi = self.A_pos @ s_hi + self.A_neg @ s_lo + a
        v_lo = self.A_pos @ s_lo + self.A_neg @ s_hi + a
        return v_lo, v_hi

    def channel_abs_max(self, s_lo: np.ndarray, s_hi: np.ndarray):
        """Per-transformer max of |F s + f| and |G s + g| over the box."""
        f = self.f_pos + self.f_neg
        g = self.g_pos + self.g_neg
        f_hi = self.F_pos @ s_hi + self.F_neg @ s_lo + f
        f_lo = self.F_pos @ s_lo + self.F_neg @ s_hi + f
        g_hi = self.G_pos @ s_hi + self.G_neg @ s_lo + g
        g_lo = self.G_pos @ s_lo + self.G_neg @ s_hi + g
        return np.maximum(f_hi, -f_lo), np.maximum(g_hi, -g_lo)


def _lstsq(X: np.ndarray, Y: np.ndarray):
    n, k = X.shape
    Xa = np.column_stack([X, np.ones(n)])
    if n < k + 1 or np.linalg.matrix_rank(Xa) < k + 1:
        raise RankDeficient(
            f"regressor matrix rank-deficient ({n} samples, {k + 1} coefficients per row)")
    coef, *_ = np.linalg.lstsq(Xa, Y, rcond=None)
    return coef[:-1].T, coef[-1]


def _stack_samples(net: Network, samples):
    X = np.array([stack_consumers(net, inj) for inj, _ in samples])
    return X


def fit_voltage_model(net: Network, samples: list[tuple[Injection, PFSolution]]):
    """Least-squares fit of node voltage magnitudes on stacked consumer injections."""
    X = _stack_samples(net, samples)
    V = np.array([sol.v for _, sol in samples])
    return _lstsq(X, V)


def fit_flow_model(net: Network, samples: list[tuple[Injection, PFSolution]]):
    """Per-channel least squares on each transformer's complex-flow parts."""
    X = _stack_samples(net, samples)
    Re = np.array([sol.flow_re for _, sol in samples])
    Im = np.array([sol.flow_im for _, sol in samples])
    F, f = _lstsq(X, Re)
    G, g = _lstsq(X, Im)
    return F, f, G, g


def fit_linear_model(net: Network, samples) -> LinearPFModel:
    A, a = fit_voltage_model(net, samples)
    F, f, G, g = fit_flow_model(net, samples)
    return LinearPFModel(A, a, F, f, G, g)


def split_pos_neg(model: LinearPFModel) -> SplitModel:
    def pos(x):
        return np.maximum(x, 0.0)

    def neg(x):
        return np.minimum(x, 0.0)

    return SplitModel(
        A_pos=pos(model.A), A_neg=neg(model.A), a_pos=pos(model.a), a_neg=neg(model.a),
        F_pos=pos(model.F), F_neg=neg(model.F), f_pos=pos(model.f), f_neg=neg(model.f),
        G_pos=pos(model.G), G_neg=neg(model.G), g_pos=pos(model.g), g_neg=neg(model.g),
    )
