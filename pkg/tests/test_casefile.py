"""Case file loading, canonical emission, and field-path validation."""
import numpy as np
import pytest
import yaml

from hydrorights.casefile import (
    CasefileError,
    canonical_digest,
    emit_case,
    list_bundled_cases,
    load_case,
    load_case_file,
    load_portfolio,
    save_case,
)
from hydrorights.dispatch import solve_mped

MINIMAL = """\
schema_version: 1
name: tiny
units: {volume: hm3, power: MW, time: h, price: usd_per_mwh}
periods: 2
period_hours: 1.0
network:
  buses: 1
  lines: []
generators:
- {name: g, bus: 0, cost_quad: 0.0, cost_lin: 5.0, power_max: 50.0}
loads:
- {name: d, bus: 0, demand: [10.0, 20.0]}
"""


def _write(tmp_path, text, name="case.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _mutate(transform):
    doc = yaml.safe_load(MINIMAL)
    transform(doc)
    return yaml.safe_dump(doc, sort_keys=False)


def test_minimal_case_loads(tmp_path):
    case = load_case(_write(tmp_path, MINIMAL))
    assert case.name == "tiny"
    assert case.periods == 2
    assert case.generators[0].power_min == 0.0
    np.testing.assert_allclose(case.loads[0].demand, [10.0, 20.0])


def test_scalar_demand_broadcasts(tmp_path):
    text = _mutate(lambda d: d["loads"][0].__setitem__("demand", 15.0))
    case = load_case(_write(tmp_path, text))
    np.testing.assert_allclose(case.loads[0].demand, [15.0, 15.0])


def test_bundled_cases_all_load_and_solve():
    names = list_bundled_cases()
    assert set(names) == {
        "cascade_two_reservoir", "ess_arbitrage", "hydro_peak_valley",
        "one_bus_fixed_load", "three_bus_triangle", "two_bus_congested"}
    for name in names:
        bundle = load_case_file(name)
        assert bundle.case.name == name
        sol = solve_mped(bundle.case)
        assert np.isfinite(sol.objective)


def test_bundled_portfolios():
    pf = load_portfolio("two_bus_congested")
    assert [r.name for r in pf.transmission] == ["ftr1"]
    pf = load_portfolio("ess_arbitrage")
    assert [r.name for r in pf.storage_power] == ["fsr1"]
    assert [r.name for r in pf.storage_capacity] == ["ecr1"]
    assert load_portfolio("one_bus_fixed_load") is None


def test_round_trip_identity(tmp_path):
    for name in list_bundled_cases():
        bundle = load_case_file(name)
        text = emit_case(bundle.case, bundle.portfolio)
        path = _write(tmp_path, text, f"{name}.yaml")
        again = load_case_file(path)
        assert emit_case(again.case, again.portfolio) == text


def test_digest_tracks_content(tmp_path):
    bundle = load_case_file("two_bus_congested")
    d1 = canonical_digest(bundle.case, bundle.portfolio)
    path = tmp_path / "copy.yaml"
    save_case(path, bundle.case, bundle.portfolio)
    copy = load_case_file(path)
    assert canonical_digest(copy.case, copy.portfolio) == d1
    assert canonical_digest(copy.case, None) != d1


def test_unknown_bundle_name_lists_available():
    with pytest.raises(CasefileError, match="two_bus_congested"):
        load_case("no_such_case")


@pytest.mark.parametrize("transform, message", [
    (lambda d: d.pop("units"), r"case file root: missing required key 'units'"),
    (lambda d: d["units"].__setitem__("volume", "m3"),
     r"units\.volume: expected 'hm3', got 'm3'"),
    (lambda d: d.__setitem__("schema_version", 2),
     r"schema_version: expected 1, got 2"),
    (lambda d: d.__setitem__("periods", "two"),
     r"periods: expected an integer"),
    (lambda d: d["generators"][0].__setitem__("fuel", "coal"),
     r"generators\[0\]: unknown keys \['fuel'\]"),
    (lambda d: d["loads"][0].__setitem__("bus", 7),
     r"references bus 7"),
    (lambda d: d["network"]["lines"].append(
        {"from_bus": 0, "to_bus": 0, "reactance": 0.1,
         "limit_forward": 1.0, "limit_reverse": 1.0}),
     r"network\.lines\[0\]"),
    (lambda d: d.__setitem__("portfolio", {"storage_power": [
        {"name": "s", "storage": "b", "profile": [1.0, 2.0, 3.0]}]}),
     r"portfolio\.storage_power\[0\]\.profile: expected 2 entries, got 3"),
])
def test_validation_error_paths(tmp_path, transform, message):
    text = _mutate(transform)
    with pytest.raises(CasefileError, match=message):
        load_case_file(_write(tmp_path, text))


def test_hydro_plant_errors_carry_path(tmp_path):
    def add_hydro(d):
        d["hydro"] = [{
            "name": "dam", "bus": 0,
            "plant": {"efficiency_factor": 1.0, "forebay": 19.0,
                      "tailrace_intercept": 20.0, "tailrace_slope": 0.0,
                      "penstock_loss": 0.0, "power_cap": 30.0},
            "initial_volume": 10.0, "min_volume": 0.0, "max_volume": 20.0}]
    text = _mutate(add_hydro)
    with pytest.raises(CasefileError, match=r"hydro\[0\]\.plant: forebay_height"):
        load_case_file(_write(tmp_path, text))


def test_path_and_bundle_sources_agree(tmp_path):
    from hydrorights.casefile import CaseFile
    via_name = load_case_file("hydro_peak_valley")
    text = emit_case(via_name.case, via_name.portfolio)
    path = _write(tmp_path, text, "hydro_peak_valley.yaml")
    via_str = load_case_file(str(path))
    via_path = load_case_file(path)
    assert isinstance(via_str, CaseFile)
    for other in (via_str, via_path):
        assert emit_case(other.case, other.portfolio) == text
