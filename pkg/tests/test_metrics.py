import numpy as np
import pytest

from gridbounds.metrics import (
    ViolationReport, electricity_cost, peak_load, transformer_overloads,
    voltage_violations,
)
from gridbounds.supply import SupplyBox
from gridbounds.tariff import TOUTariff


def tariff():
    return TOUTariff(peak_hours=(17, 21), part_peak_hours=((14, 17), (21, 23)))


def test_constant_nominal_voltage_clean():
    flags, worst = voltage_violations(np.ones((16, 3)))
    assert not flags.any()
    assert np.allclose(worst, 0.0)


def test_constant_low_voltage_flagged():
    flags, worst = voltage_violations(np.full((16, 1), 0.94))
    assert flags[0]
    assert worst[0] == pytest.approx(6.0)


def test_half_window_dip_stays_under_threshold():
    v = np.concatenate([np.full(2, 0.94), np.full(2, 1.0)])[:, None]
    flags, worst = voltage_violations(v)
    assert not flags[0]
    assert worst[0] == pytest.approx(3.0)


def test_constant_full_loading_clean():
    tau = np.full((16, 1), 1.0)  # apparent power == rating
    flags, worst = transformer_overloads(tau, np.array([1.0]))
    assert not flags[0]
    assert worst[0] == pytest.approx(100.0)


def test_constant_130pct_loading_flagged():
    tau = np.full((16, 1), 1.3 ** 2)
    flags, worst = transformer_overloads(tau, np.array([1.0]))
    assert flags[0]
    assert worst[0] == pytest.approx(130.0)


def test_eight_step_121pct_window_flagged():
    tau = np.concatenate([np.full(8, 1.21 ** 2), np.full(8, 1.0)])[:, None]
    flags, worst = transformer_overloads(tau, np.array([1.0]))
    assert flags[0]
    assert worst[0] == pytest.approx(121.0)


def test_flag_monotone_in_trace():
    rng = np.random.default_rng(0)
    for _ in range(20):
        v = 1.0 + rng.normal(0, 0.04, size=(24, 2))
        worse = v - rng.uniform(0, 0.02, size=v.shape)  # pointwise lower
        f1, _ = voltage_violations(np.abs(v))
        f2, _ = voltage_violations(np.abs(worse))
        low1, _ = voltage_violations(v)
        low2, _ = voltage_violations(worse)
        # any under-voltage flag raised by v stays raised for the worse trace
        under1 = (np.min(v, axis=0) < 1.0) & low1
        assert np.all(~under1 | low2)


def test_sliding_not_tumbling_windows():
    # violation spans two tumbling windows but one sliding window catches it
    v = np.concatenate([np.full(2, 1.0), np.full(4, 0.93), np.full(2, 1.0)])[:, None]
    flags, _ = voltage_violations(v)
    assert flags[0]


def test_peak_load():
    assert peak_load(np.full(8, 1.0), 100.0) == pytest.approx(100.0)
    trace = np.full(8, 1.0)
    trace[3] = 1.5
    assert peak_load(trace, 100.0) == pytest.approx(150.0)


def box_for(n, p_u, p_l):
    return SupplyBox(tuple(range(2, 2 + n)),
                     np.full((24, n), p_u), np.full((24, n), p_l),
                     np.zeros((24, n)), np.zeros((24, n)),
                     np.zeros((24, n)), np.zeros((24, n)))


def test_cost_always_in_bounds_is_80pct():
    net_p = np.full((96, 2), 0.02)
    full = electricity_cost(net_p, tariff(), 100.0, 0.25)
    disc = electricity_cost(net_p, tariff(), 100.0, 0.25,
                            supply_box=box_for(2, 0.05, -0.01))
    assert np.allclose(disc, 0.8 * full)


def test_cost_never_in_bounds_is_full():
    net_p = np.full((96, 2), 0.02)
    full = electricity_cost(net_p, tariff(), 100.0, 0.25)
    tight = box_for(2, 0.01, -0.01)  # always above p_u
    disc = electricity_cost(net_p, tariff(), 100.0, 0.25, supply_box=tight)
    assert np.allclose(disc, full)


def test_zero_net_energy_zero_cost():
    net_p = np.zeros((96, 1))
    assert electricity_cost(net_p, tariff(), 100.0, 0.25)[0] == 0.0


def test_cost_bracket_property():
    rng = np.random.default_rng(1)
    for _ in range(10):
        net_p = rng.uniform(0.0, 0.06, size=(96, 3))
        box = box_for(3, rng.uniform(0.02, 0.05), -0.01)
        full = electricity_cost(net_p, tariff(), 100.0, 0.25)
        disc = electricity_cost(net_p, tariff(), 100.0, 0.25, supply_box=box)
        assert np.all(disc >= 0.8 * full - 1e-9)
        assert np.all(disc <= full + 1e-9)


def test_export_credited_at_same_rate():
    net_p = np.zeros((96, 1))
    net_p[:4, 0] = 0.03
    net_p[4:8, 0] = -0.03
    cost = electricity_cost(net_p, tariff(), 100.0, 0.25)
    assert cost[0] == pytest.approx(0.0)  # same off-peak rate both hours


def test_violation_report_percentages():
    rep = ViolationReport(
        voltage_flags=np.array([True, False, False, False]),
        voltage_worst_pct=np.array([6.0, 1.0, 0.5, 0.2]),
        transformer_flags=np.array([True, True]),
        transformer_worst_pct=np.array([130.0, 125.0]),
        peak_kw=123.0,
    )
    assert rep.voltage_violation_pct == pytest.approx(25.0)
    assert rep.transformer_overload_pct == pytest.approx(100.0)


def test_window_shorter_trace_raises():
    with pytest.raises(ValueError):
        voltage_violations(np.ones((2, 1)))