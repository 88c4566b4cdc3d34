"""Dispatch solutions against hand-solved cases, grid search, and dual probes."""
from __future__ import annotations

import numpy as np
import pytest

from hydrorights.dispatch import (
    CaseStructureError,
    DispatchInfeasibleError,
    EssStorage,
    FixedLoad,
    Generator,
    HydroStorage,
    MpedCase,
    ProgramOptions,
    merchandising_surplus,
    solve_mped,
)
from hydrorights.grid import Line, Network
from hydrorights.hydro import PlantParameters
from hydrorights.reservoir import CascadeLink


def two_bus_case():
    return MpedCase(
        name="two_bus", network=Network(2, (Line(0, 1, 0.1, 30.0, 30.0),)),
        periods=2, period_hours=1.0,
        generators=(Generator("g1", 0, 0.0, 10.0, 0.0, 100.0),
                    Generator("g2", 1, 0.0, 12.0, 0.0, 100.0)),
        loads=(FixedLoad("city", 1, np.array([25.0, 80.0])),))


def ess_case():
    return MpedCase(
        name="ess", network=Network(1, ()), periods=2, period_hours=1.0,
        generators=(Generator("cheap", 0, 0.0, 10.0, 0.0, 30.0),
                    Generator("dear", 0, 0.0, 20.0, 0.0, 100.0)),
        loads=(FixedLoad("town", 0, np.array([20.0, 60.0])),),
        ess_units=(EssStorage("battery", 0, 15.0, 15.0, 5.0, 0.0, 10.0),))


def hydro_case():
    plant = PlantParameters.build(1.0, 22.0, 20.0, 0.0, 0.0, 30.0)
    return MpedCase(
        name="hydro", network=Network(1, ()), periods=2, period_hours=1.0,
        generators=(Generator("thermal", 0, 0.05, 10.0, 0.0, 200.0),),
        loads=(FixedLoad("town", 0, np.array([20.0, 60.0])),),
        hydro_units=(HydroStorage("dam", 0, plant, 25.0, 0.0, 25.0),))


def smooth_case(extra_load=None, ess_max=20.0):
    loads = [FixedLoad("city", 1, np.array([40.0, 70.0, 55.0]))]
    if extra_load is not None:
        loads.append(extra_load)
    return MpedCase(
        name="smooth", network=Network(2, (Line(0, 1, 0.1, 25.0, 25.0),)),
        periods=3, period_hours=1.0,
        generators=(Generator("g1", 0, 0.05, 10.0, 0.0, 200.0),
                    Generator("g2", 1, 0.04, 15.0, 0.0, 200.0)),
        loads=tuple(loads),
        ess_units=(EssStorage("battery", 1, 20.0, 20.0, 10.0, 0.0, ess_max),))


def test_two_bus_frozen_numbers():
    sol = solve_mped(two_bus_case())
    assert sol.objective == pytest.approx(1150.0, abs=1e-5)
    np.testing.assert_allclose(sol.lmp_per_mwh(), [[10, 10], [10, 12]], atol=1e-5)
    np.testing.assert_allclose(sol.flows[0], [25.0, 30.0], atol=1e-5)
    np.testing.assert_allclose(sol.flow_duals[:, 0], [0.0, 0.0], atol=1e-5)
    np.testing.assert_allclose(sol.flow_duals[:, 1], [2.0, 0.0], atol=1e-5)
    report = merchandising_surplus(sol)
    assert report.surplus == pytest.approx(60.0, abs=1e-4)
    assert report.congestion_component == pytest.approx(60.0, abs=1e-4)
    assert report.storage_component == pytest.approx(0.0, abs=1e-6)


def test_two_bus_matches_exhaustive_grid():
    sol = solve_mped(two_bus_case())
    total = 0.0
    for demand in (25.0, 80.0):
        best = np.inf
        for g1 in np.arange(0.0, 100.0 + 0.25, 0.5):
            g2 = demand - g1
            if not 0.0 <= g2 <= 100.0:
                continue
            if g1 > 30.0 + 1e-12:   # line carries all of g1 to the load bus
                continue
            best = min(best, 10.0 * g1 + 12.0 * g2)
        total += best
    assert sol.objective == pytest.approx(total, abs=1e-6)


def test_ess_arbitrage_frozen_numbers():
    sol = solve_mped(ess_case())
    assert sol.objective == pytest.approx(950.0, abs=1e-5)
    np.testing.assert_allclose(sol.lmp_per_mwh()[0], [10.0, 20.0], atol=1e-5)
    res = sol.storage_result("battery")
    np.testing.assert_allclose(res.power, [-5.0, 10.0], atol=1e-6)
    np.testing.assert_allclose(res.volume, [10.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(res.eta_hi, [10.0, 0.0], atol=1e-5)
    np.testing.assert_allclose(res.eta_lo, [0.0, 20.0], atol=1e-5)
    np.testing.assert_allclose(res.marginal_value, [10.0, 20.0], atol=1e-5)
    report = merchandising_surplus(sol)
    assert report.surplus == pytest.approx(150.0, abs=1e-4)
    assert report.congestion_component == pytest.approx(0.0, abs=1e-8)
    assert report.route_gap <= 1e-5 * (1 + abs(report.surplus))


def test_hydro_free_dispatch():
    sol = solve_mped(hydro_case())
    assert sol.objective == pytest.approx(345.0, abs=1e-4)
    res = sol.storage_result("dam")
    np.testing.assert_allclose(res.power, [20.0, 30.0], atol=1e-4)
    np.testing.assert_allclose(res.release, [10.0, 15.0], atol=1e-4)
    np.testing.assert_allclose(res.volume, [15.0, 0.0], atol=1e-4)
    np.testing.assert_allclose(res.spill, 0.0, atol=1e-5)
    report = merchandising_surplus(sol)
    assert report.surplus >= -1e-6
    assert report.identity_residual <= 1e-6 * (1 + abs(report.surplus))
    assert report.route_gap <= 1e-5 * (1 + abs(report.surplus))


def test_pinned_storage_power():
    sol = solve_mped(hydro_case(),
                     ProgramOptions(fixed_power={"dam": np.array([20.0, 20.0])}))
    assert sol.objective == pytest.approx(480.0, abs=1e-4)
    np.testing.assert_allclose(sol.storage_result("dam").power, [20.0, 20.0],
                               atol=1e-6)


def test_energy_target():
    sol = solve_mped(hydro_case(), ProgramOptions(energy_target={"dam": 40.0}))
    assert sol.objective == pytest.approx(450.0, abs=1e-4)
    np.testing.assert_allclose(sol.storage_result("dam").power, [10.0, 30.0],
                               atol=1e-4)
    assert "dam" in sol.energy_target_duals


def test_nodal_price_matches_objective_sensitivity():
    # dispatch duals equal two-sided differences of cost in nodal demand
    base = smooth_case()
    sol = solve_mped(base)
    h = 1e-3
    for bus in range(2):
        for t in range(3):
            probes = []
            for sign in (+1.0, -1.0):
                demand = np.zeros(3)
                demand[t] = sign * h
                probe = smooth_case(extra_load=FixedLoad("probe", bus, demand))
                probes.append(solve_mped(probe).objective)
            fd = (probes[0] - probes[1]) / (2 * h)
            lam = sol.lmp[bus, t]
            assert fd == pytest.approx(lam, abs=1e-3 * (1 + abs(lam)))


def test_storage_cap_dual_matches_objective_sensitivity():
    sol = solve_mped(smooth_case())
    eta_hi = sol.storage_result("battery").eta_hi
    assert np.max(eta_hi) > 1e-3   # the cap must actually bind somewhere
    h = 1e-3
    for t in range(3):
        probes = []
        for sign in (+1.0, -1.0):
            cap = np.full(3, 20.0)
            cap[t] += sign * h
            probes.append(solve_mped(smooth_case(ess_max=cap)).objective)
        fd = (probes[0] - probes[1]) / (2 * h)
        assert fd == pytest.approx(-eta_hi[t], abs=2e-3 * (1 + eta_hi[t]))


def test_prices_invariant_to_slack_choice():
    base = smooth_case()
    alt = MpedCase(
        name=base.name,
        network=Network(2, base.network.lines, slack_bus=1),
        periods=base.periods, period_hours=base.period_hours,
        generators=base.generators, loads=base.loads,
        ess_units=base.ess_units)
    a, b = solve_mped(base), solve_mped(alt)
    assert a.objective == pytest.approx(b.objective, abs=1e-5)
    np.testing.assert_allclose(a.lmp_per_mwh(), b.lmp_per_mwh(), atol=1e-4)
    np.testing.assert_allclose(a.flows, b.flows, atol=1e-4)


def test_uncongested_prices_are_uniform():
    case = MpedCase(
        name="wide", network=Network(2, (Line(0, 1, 0.1, 1e3, 1e3),)),
        periods=2, period_hours=1.0,
        generators=(Generator("g1", 0, 0.05, 10.0, 0.0, 200.0),
                    Generator("g2", 1, 0.04, 15.0, 0.0, 200.0)),
        loads=(FixedLoad("city", 1, np.array([40.0, 70.0])),))
    sol = solve_mped(case)
    np.testing.assert_allclose(sol.lmp[0], sol.lmp[1], atol=1e-6)


def _random_case(rng):
    periods = int(rng.integers(2, 4))
    lines = (Line(0, 1, 0.1, 40.0, 40.0), Line(1, 2, 0.12, 40.0, 40.0),
             Line(0, 2, 0.08, 40.0, 40.0))
    net = Network(3, lines)
    gens = (Generator("gA", 0, float(rng.uniform(0.01, 0.1)),
                      float(rng.uniform(5, 15)), 0.0, 120.0),
            Generator("gB", 2, float(rng.uniform(0.01, 0.1)),
                      float(rng.uniform(10, 30)), 0.0, 120.0))
    loads = (FixedLoad("L1", 1, rng.uniform(15, 60, periods)),
             FixedLoad("L2", 2, rng.uniform(5, 25, periods)))
    plant = PlantParameters.build(
        1.0, 20.0 + float(rng.uniform(2, 8)), 20.0,
        float(rng.uniform(0.005, 0.02)), 0.0, float(rng.uniform(10, 35)))
    hydro = HydroStorage(
        "dam", 1, plant, float(rng.uniform(5, 20)), 0.0, 60.0,
        inflow=rng.uniform(0.0, 2.0, periods))
    ess = EssStorage("bat", 0, 12.0, 12.0, float(rng.uniform(2, 10)), 0.0, 14.0)
    return MpedCase(name="rand", network=net, periods=periods, period_hours=1.0,
                    generators=gens, loads=loads, hydro_units=(hydro,),
                    ess_units=(ess,))


def test_randomized_surplus_decomposition():
    rng = np.random.default_rng(101)
    for _ in range(25):
        case = _random_case(rng)
        sol = solve_mped(case)
        scale = max(1.0, abs(sol.objective))
        assert max(sol.residuals) <= 1e-6 * scale

        # physics: balance, flow limits, volume bounds, conversion slack
        total = sol.nonstorage_injection + sol.storage_injection
        np.testing.assert_allclose(total.sum(axis=0), 0.0, atol=1e-6)
        caps = np.array([ln.limit_forward for ln in case.network.lines])
        assert np.all(np.abs(sol.flows) <= caps[:, None] + 1e-5)
        for res in sol.storage:
            unit, _ = case.storage_unit(res.name)
            assert np.all(res.volume >= np.min(unit.min_volume) - 1e-6)
            assert np.all(res.volume <= np.max(unit.max_volume) + 1e-6)
            assert np.all(res.spill >= -1e-6)
            if res.kind == "hydro":
                # positive marginal water value forbids spill
                spilled = res.spill > 1e-5
                assert np.all(res.marginal_value[spilled] <= 1e-4)

        report = merchandising_surplus(sol)
        ms_scale = 1 + abs(report.surplus)
        assert report.identity_residual <= 1e-6 * ms_scale
        assert report.route_gap <= 1e-5 * ms_scale
        assert report.surplus >= -1e-6 * ms_scale


def test_cascade_coupling():
    # two dams in series: upstream releases arrive downstream one period later
    plant = PlantParameters.build(1.0, 22.0, 20.0, 0.0, 0.0, 50.0)
    case = MpedCase(
        name="cascade", network=Network(1, ()), periods=3, period_hours=1.0,
        generators=(Generator("thermal", 0, 0.05, 10.0, 0.0, 500.0),),
        loads=(FixedLoad("town", 0, np.array([30.0, 30.0, 90.0])),),
        hydro_units=(
            HydroStorage("upper", 0, plant, 20.0, 0.0, 20.0),
            HydroStorage("lower", 0, plant, 5.0, 0.0, 40.0)),
        cascade=(CascadeLink("upper", "lower", 1),))
    sol = solve_mped(case)
    up = sol.storage_result("upper")
    low = sol.storage_result("lower")
    # all water ends up used: upper empties, lower passes its own plus arrivals
    arrived = np.concatenate([[0.0], up.release[:-1]])
    expected = 5.0 + np.cumsum(arrived - low.release)
    np.testing.assert_allclose(low.volume, expected, atol=1e-6)
    report = merchandising_surplus(sol)
    assert report.route_gap <= 1e-5 * (1 + abs(report.surplus))


def test_infeasible_case_names_rows():
    case = MpedCase(
        name="starved", network=Network(2, (Line(0, 1, 0.1, 10.0, 10.0),)),
        periods=1, period_hours=1.0,
        generators=(Generator("g1", 0, 0.0, 10.0, 0.0, 100.0),),
        loads=(FixedLoad("city", 1, np.array([50.0])),))
    with pytest.raises(DispatchInfeasibleError) as err:
        solve_mped(case)
    assert err.value.rows
    assert "period 0" in str(err.value)


def test_case_validation():
    net = Network(2, (Line(0, 1, 0.1, 30.0, 30.0),))
    with pytest.raises(CaseStructureError, match="duplicate device names"):
        MpedCase(name="x", network=net, periods=1, period_hours=1.0,
                 generators=(Generator("a", 0, 0.0, 1.0),
                             Generator("a", 1, 0.0, 1.0)))
    with pytest.raises(CaseStructureError, match="outside"):
        MpedCase(name="x", network=net, periods=1, period_hours=1.0,
                 generators=(Generator("a", 5, 0.0, 1.0),))
    with pytest.raises(CaseStructureError, match="not a.*hydro"):
        MpedCase(name="x", network=net, periods=1, period_hours=1.0,
                 cascade=(CascadeLink("p", "q", 1),))
    with pytest.raises(CaseStructureError, match="demand"):
        MpedCase(name="x", network=net, periods=2, period_hours=1.0,
                 loads=(FixedLoad("l", 0, np.array([1.0, 2.0, 3.0])),))
    with pytest.raises(CaseStructureError, match="min_volume exceeds"):
        MpedCase(name="x", network=net, periods=1, period_hours=1.0,
                 ess_units=(EssStorage("b", 0, 1.0, 1.0, 0.5, 2.0, 1.0),))
