import numpy as np
import pytest
import yaml
from numpy.testing import assert_allclose

from core.context import RunContext, RunProfile
from core.errors import ConfigError
from modules.params import validate_params
from modules.scenario import SweepSpec, build_params, load_scenario, shocked_params

from conftest import SCENARIOS

BASE = {
    "countries": ["a", "b", "c"],
    "params": {"theta": 2.12, "sigma": 0.76, "alpha": 0.36, "rho": 0.02, "psi": 1.0,
               "L": [1.0, 1.0, 1.0], "tau_offdiag": 2.0},
}


def _write(tmp_path, data, name="scenario.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def _with(**sections):
    data = {k: (dict(v) if isinstance(v, dict) else v) for k, v in BASE.items()}
    for key, value in sections.items():
        if key == "params":
            data["params"] = {**data["params"], **value}
        else:
            data[key] = value
    return data


@pytest.mark.parametrize("name", ["symmetric4", "two-country", "eu6", "eu6-calibrate"])
def test_bundled_scenarios_load(name):
    scenario, base_dir = load_scenario(SCENARIOS / f"{name}.yaml")
    assert scenario.name == name
    assert base_dir == SCENARIOS


def test_name_defaults_to_file_stem(tmp_path):
    scenario, _ = load_scenario(_write(tmp_path, BASE, "my-run.yaml"))
    assert scenario.name == "my-run"


def test_missing_theta_is_reported_by_field(tmp_path):
    data = _with()
    del data["params"]["theta"]
    with pytest.raises(ConfigError, match=r"params\.theta"):
        load_scenario(_write(tmp_path, data))


def test_exactly_one_tau_source(tmp_path):
    with pytest.raises(ConfigError, match="exactly one of tau"):
        load_scenario(_write(tmp_path, _with(params={"tau": [[1, 2, 2], [2, 1, 2], [2, 2, 1]]})))


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(_write(tmp_path, _with(solvr={"tol_outer": 1e-9})))


def test_length_mismatch(tmp_path):
    with pytest.raises(ConfigError, match="params.L"):
        load_scenario(_write(tmp_path, _with(params={"L": [1.0, 1.0]})))


def test_malformed_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("countries: [a, b\n")
    with pytest.raises(ConfigError, match="malformed"):
        load_scenario(path)


def test_build_params_from_offdiagonal_tau(tmp_path):
    scenario, base_dir = load_scenario(_write(tmp_path, BASE))
    p = build_params(scenario, base_dir)
    assert p.labels == ("a", "b", "c")
    assert_allclose(p.tau, [[1, 2, 2], [2, 1, 2], [2, 2, 1]])
    assert_allclose(p.T, np.ones(3))


def test_psi_required_only_when_asked(tmp_path):
    data = _with()
    del data["params"]["psi"]
    scenario, base_dir = load_scenario(_write(tmp_path, data))
    with pytest.raises(ConfigError, match="psi"):
        build_params(scenario, base_dir)
    assert build_params(scenario, base_dir, require_psi=False).psi == 1.0


def test_theta_override():
    scenario, base_dir = load_scenario(SCENARIOS / "two-country.yaml")
    assert build_params(scenario, base_dir, theta=4.0).theta == 4.0


def test_theta_override_reinverts_flow_costs():
    ctx = RunContext(SCENARIOS / "eu6.yaml", out_dir="unused", theta=4.0)
    p = ctx.params()
    assert p.theta == 4.0
    assert p.tau[0, 1] == pytest.approx(1.8 ** (2.12 / 4.0), rel=1e-9)
    assert p.tau[0, 1] == pytest.approx(1.3655, abs=1e-4)
    shocked = ctx.shocked(p)
    assert shocked.tau[5, 0] == pytest.approx(0.82 * p.tau[5, 0], rel=1e-12)


def test_flows_baseline():
    scenario, base_dir = load_scenario(SCENARIOS / "eu6.yaml")
    p = build_params(scenario, base_dir)
    assert p.tau[0, 1] == pytest.approx(1.8, rel=1e-9)
    assert p.tau[4, 5] == pytest.approx(2.5, rel=1e-9)


def test_scalar_multiplier_keeps_domestic_costs(tmp_path):
    scenario, base_dir = load_scenario(_write(tmp_path, _with(shock={"multipliers": 0.9})))
    new = shocked_params(scenario, build_params(scenario, base_dir), base_dir)
    assert_allclose(np.diag(new.tau), 1.0)
    assert_allclose(new.tau[0, 1], 1.8)


def test_block_shock_is_symmetric():
    scenario, base_dir = load_scenario(SCENARIOS / "eu6.yaml")
    base = build_params(scenario, base_dir)
    new = shocked_params(scenario, base, base_dir)
    ratio = new.tau / base.tau
    assert_allclose(ratio, ratio.T)
    assert ratio[5, 0] == pytest.approx(0.82)
    assert ratio[2, 5] == pytest.approx(0.80)
    assert_allclose(ratio[:5, :5], 1.0)


def test_block_with_unknown_country(tmp_path):
    shock = {"blocks": [{"sources": ["a"], "dests": ["zz"], "multiplier": 0.9}]}
    scenario, base_dir = load_scenario(_write(tmp_path, _with(shock=shock)))
    with pytest.raises(ConfigError, match="unknown"):
        shocked_params(scenario, build_params(scenario, base_dir), base_dir)


def test_flow_shock_needs_flow_baseline(tmp_path):
    scenario, base_dir = load_scenario(_write(tmp_path, _with(shock={"flows": "after.csv"})))
    with pytest.raises(ConfigError, match="params.flows"):
        shocked_params(scenario, build_params(scenario, base_dir), base_dir)


def test_sweep_grid():
    grid = SweepSpec(start=1.0, stop=3.0, step=0.1).grid()
    assert len(grid) == 21
    assert grid[0] == 1.0 and grid[-1] == 3.0
    assert len(SweepSpec(start=1.0, stop=1.0).grid()) == 1


def test_profile_defaults():
    profile = RunProfile()
    assert profile.digits == 12
    assert profile.formats == ["csv"]
    assert profile.solver["tol_outer"] == 1e-10


def test_cli_overrides_scenario_and_profile(tmp_path):
    path = _write(tmp_path, _with(solver={"tol_outer": 1e-8}, output={"formats": ["json"]}))
    ctx = RunContext(path)
    assert ctx.solver.tol_outer == 1e-8
    assert ctx.formats == ["json"]
    assert ctx.out_dir.name == "scenario"

    ctx = RunContext(path, out_dir=str(tmp_path / "o"), tol=1e-6, max_iter=50, seed=3, formats=["csv"])
    assert ctx.solver.tol_outer == 1e-6
    assert ctx.solver.tol_mid == 1e-11
    assert ctx.solver.tol_inner == 1e-12
    assert ctx.solver.max_iter_mid == 50
    assert ctx.solver.seed == 3
    assert ctx.formats == ["csv"]

    tight = RunContext(path, tol=5e-11)
    assert tight.solver.tol_mid == pytest.approx(5e-12)
    assert tight.solver.tol_inner == pytest.approx(5e-13)


def test_low_sigma_warned_once_per_run(tmp_path, capsys):
    path = _write(tmp_path, _with())
    ctx = RunContext(path)
    for _ in range(3):
        validate_params(ctx.params())
    assert capsys.readouterr().err.count("sigma = 0.76 < 1") == 1

    quiet = RunContext(path, quiet=True)
    validate_params(quiet.params())
    assert "sigma" not in capsys.readouterr().err


def test_bad_solver_override(tmp_path):
    with pytest.raises(ConfigError):
        RunContext(_write(tmp_path, _with(solver={"damping_outer": 1.5})))
