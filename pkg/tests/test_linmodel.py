import numpy as np
import pytest

from gridbounds.linmodel import (
    LinearPFModel, RankDeficient, fit_flow_model, fit_linear_model,
    fit_voltage_model, split_pos_neg, stack_consumers,
)
from gridbounds.network import generate_radial_network
from gridbounds.powerflow import Injection, PFSolution, solve_pf


def synthetic_samples(net, A0, a0, F0, f0, G0, g0, n, rng):
    """Samples from an exactly linear system (zero noise)."""
    samples = []
    for _ in range(n):
        p = rng.uniform(-0.3, 0.3, net.n_consumers)
        q = rng.uniform(-0.1, 0.1, net.n_consumers)
        inj = Injection.from_consumers(net, p, q)
        s = stack_consumers(net, inj)
        sol = PFSolution(
            v=A0 @ s + a0, tau=np.zeros(len(f0)),
            flow_re=F0 @ s + f0, flow_im=G0 @ s + g0,
            substation_p=0.0, substation_q=0.0,
            converged=True, iterations=1, residual=0.0,
        )
        samples.append((inj, sol))
    return samples


def oracle_samples(net, n, rng, span=0.2):
    samples = []
    for _ in range(n):
        p = rng.uniform(-span, span, net.n_consumers)
        q = rng.uniform(-span / 4, span / 4, net.n_consumers)
        inj = Injection.from_consumers(net, p, q)
        samples.append((inj, solve_pf(net, inj)))
    return samples


def test_exact_recovery_on_linear_data():
    net = generate_radial_network(4, seed=0)
    rng = np.random.default_rng(1)
    d = 2 * net.n_consumers
    A0 = rng.normal(size=(net.n_nodes, d))
    a0 = rng.normal(size=net.n_nodes)
    F0 = rng.normal(size=(1, d))
    f0 = rng.normal(size=1)
    G0 = rng.normal(size=(1, d))
    g0 = rng.normal(size=1)
    samples = synthetic_samples(net, A0, a0, F0, f0, G0, g0, 40, rng)
    A, a = fit_voltage_model(net, samples)
    assert np.abs(A - A0).max() <= 1e-8
    assert np.abs(a - a0).max() <= 1e-8
    F, f, G, g = fit_flow_model(net, samples)
    assert np.abs(F - F0).max() <= 1e-8
    assert np.abs(g - g0).max() <= 1e-8


def test_rank_deficient_on_repeated_sample():
    net = generate_radial_network(4, seed=0)
    rng = np.random.default_rng(2)
    sample = oracle_samples(net, 1, rng)[0]
    with pytest.raises(RankDeficient):
        fit_voltage_model(net, [sample] * 30)


def test_heldout_voltage_error_small():
    net = generate_radial_network(8, seed=42)
    rng = np.random.default_rng(3)
    train = oracle_samples(net, 400, rng)
    model = fit_linear_model(net, train)
    test = oracle_samples(net, 100, np.random.default_rng(4))
    worst = 0.0
    for inj, sol in test:
        pred = model.predict_v(stack_consumers(net, inj))
        worst = max(worst, float(np.abs(pred - sol.v).max()))
    assert worst < 0.005


def test_heldout_tau_error_small():
    net = generate_radial_network(8, seed=42)
    rng = np.random.default_rng(5)
    model = fit_linear_model(net, oracle_samples(net, 400, rng))
    rel = []
    for inj, sol in oracle_samples(net, 200, np.random.default_rng(6)):
        pred = model.predict_tau(stack_consumers(net, inj))
        denom = np.maximum(sol.tau, 1e-4)
        rel.append(np.abs(pred - sol.tau) / denom)
    rel = np.concatenate(rel)
    assert np.quantile(rel, 0.95) < 0.05


def test_tau_at_zero_injection_is_intercept_square():
    net = generate_radial_network(4, seed=7)
    model = fit_linear_model(net, oracle_samples(net, 200, np.random.default_rng(8)))
    z = np.zeros(2 * net.n_consumers)
    assert model.predict_tau(z) == pytest.approx(model.f ** 2 + model.g ** 2)


def test_split_simple_cases():
    m = LinearPFModel(
        A=np.array([[2.0, -3.0]]), a=np.array([0.5]),
        F=np.array([[1.0, 1.0]]), f=np.array([0.0]),
        G=np.array([[0.0, 0.0]]), g=np.array([0.0]),
    )
    s = split_pos_neg(m)
    assert np.array_equal(s.A_pos, [[2.0, 0.0]])
    assert np.array_equal(s.A_neg, [[0.0, -3.0]])
    assert np.array_equal(s.F_neg, [[0.0, 0.0]])


def test_split_reassembly_identity():
    rng = np.random.default_rng(9)
    for _ in range(20):
        A = rng.normal(size=(5, 6))
        m = LinearPFModel(A=A, a=rng.normal(size=5),
                          F=rng.normal(size=(2, 6)), f=rng.normal(size=2),
                          G=rng.normal(size=(2, 6)), g=rng.normal(size=2))
        s = split_pos_neg(m)
        assert np.array_equal(s.A_pos + s.A_neg, m.A)
        assert np.array_equal(s.a_pos + s.a_neg, m.a)
        assert np.array_equal(s.F_pos + s.F_neg, m.F)
        assert np.array_equal(s.G_pos + s.G_neg, m.G)


def test_vertex_bound_encloses_interior_points():
    rng = np.random.default_rng(10)
    for _ in range(10):
        d = 6
        m = LinearPFModel(A=rng.normal(size=(4, d)), a=rng.normal(size=4),
                          F=rng.normal(size=(2, d)), f=rng.normal(size=2),
                          G=rng.normal(size=(2, d)), g=rng.normal(size=2))
        sp = split_pos_neg(m)
        lo = rng.uniform(-1, 0, d)
        hi = lo + rng.uniform(0, 1, d)
        v_lo, v_hi = sp.voltage_interval(lo, hi)
        for _ in range(50):
            s = rng.uniform(lo, hi)
            v = m.predict_v(s)
            assert np.all(v >= v_lo - 1e-12)
            assert np.all(v <= v_hi + 1e-12)


def test_model_json_round_trip():
    net = generate_radial_network(4, seed=7)
    model = fit_linear_model(net, oracle_samples(net, 120, np.random.default_rng(11)))
    again = LinearPFModel.from_json(model.to_json())
    assert np.array_equal(again.A, model.A)
    assert np.array_equal(again.g, model.g)
