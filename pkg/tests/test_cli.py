import json
from pathlib import Path

import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as hs
from pydantic import ValidationError

from gpverify import cli
from gpverify.config import RunConfig, env_overrides, load_config, parse_resolution
from gpverify.mesh import HarmonicProfile, build_grid, save_tabulated


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def run(tmp_path, command, data, *extra):
    cfg = write(tmp_path, f"{command}.yaml", data)
    out = tmp_path / f"out_{command}"
    code = cli.main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out


SPHERE3 = {"family": "StaticSlice", "u": {"kind": "constant", "value": 3.0}}


def test_verify_static_sphere(tmp_path, capsys):
    code, out = run(tmp_path, "verify", {"surface": SPHERE3})
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert abs(rep["gap"]) < 1e-10 and rep["equality_case"]
    text = (out / "summary.txt").read_text()
    assert "defaults: m=1, lambda=1, grid 64x128, seed 0" in text
    assert "defaults" in capsys.readouterr().out


def test_verify_domain_error_exit_1(tmp_path):
    code, out = run(tmp_path, "verify", {"surface": {"family": "StaticSlice", "u": 1.5}})
    assert code == 1
    assert "domain" in (out / "summary.txt").read_text()


def test_verify_sub_photon_sphere_exit_3(tmp_path):
    surface = {"family": "ConvexStatic", "sigma_hat": {"kind": "constant", "value": 2.5},
               "tau": {"kind": "constant", "value": 0.0}}
    code, _ = run(tmp_path, "verify", {"surface": surface})
    assert code == 3


def test_verify_tabulated_profile_relative_path(tmp_path):
    g = build_grid(16, 32)
    save_tabulated(tmp_path / "u.txt", HarmonicProfile(4.0, ((2, 0, 0.05),), True).evaluate(g))
    data = {"surface": {"family": "NullCone", "u": {"kind": "tabulated", "path": "u.txt"}},
            "resolutions": [[16, 32]]}
    code, _ = run(tmp_path, "verify", data)
    assert code == 0
    code, _ = run(tmp_path, "verify", {**data, "resolutions": [[32, 64]]})
    assert code == 1


def test_unknown_keys_rejected(tmp_path, capsys):
    code, _ = run(tmp_path, "verify", {"surface": SPHERE3, "colour": "blue"})
    assert code == 1
    assert "colour" in capsys.readouterr().err
    code, _ = run(tmp_path, "verify", {"surface": {**SPHERE3, "radius": 3}})
    assert code == 1


def test_bad_tolerance_and_usage(tmp_path):
    assert cli.main(["verify"]) == 1
    assert cli.main(["frobnicate"]) == 1
    code, _ = run(tmp_path, "verify", {"surface": SPHERE3}, "--tolerance", "speed=1")
    assert code == 1
    code, _ = run(tmp_path, "verify", {"surface": SPHERE3}, "--tolerance", "inequality")
    assert code == 1


def test_config_command_mismatch(tmp_path):
    cfg = write(tmp_path, "c.yaml", {"command": "family", "surface": SPHERE3})
    assert cli.main(["verify", "--config", str(cfg)]) == 1


def test_family_csv(tmp_path):
    data = {"family": {"family": "StaticSlice", "count": 6}, "resolutions": [[16, 32]]}
    code, out = run(tmp_path, "family", data)
    assert code == 0
    lines = (out / "family.csv").read_text().splitlines()
    assert lines[0].split(",") == cli.FAMILY_COLUMNS
    assert len(lines) == 7
    summary = json.loads((out / "family_summary.json").read_text())
    assert summary["min_gap"] >= -1e-8 and summary["accepted"] == 6


def test_family_amplitude_zero(tmp_path):
    data = {"family": {"family": "UmbilicalSlice", "count": 3, "amplitude": 0.0}, "resolutions": [[16, 32]]}
    code, out = run(tmp_path, "family", data)
    assert code == 0
    assert abs(json.loads((out / "family_summary.json").read_text())["min_gap"]) < 1e-8


def test_family_all_rejected_exit_3(tmp_path):
    data = {"family": {"family": "StaticSlice", "count": 3, "base_radius": 1.5}, "resolutions": [[16, 32]]}
    code, _ = run(tmp_path, "family", data)
    assert code == 3


def test_family_csv_byte_identical_across_runs_and_threads(tmp_path):
    data = {"family": {"family": "ConvexStatic", "count": 4, "base_radius": 5.0}, "resolutions": [[16, 32]]}
    cfg = write(tmp_path, "f.yaml", data)
    outs = []
    for i, threads in enumerate(["1", "1", "2"]):
        out = tmp_path / f"o{i}"
        assert cli.main(["family", "--config", str(cfg), "--out", str(out), "--threads", threads]) == 0
        outs.append((out / "family.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_converge_outputs(tmp_path):
    data = {"surface": {"family": "StaticSlice",
                        "u": {"kind": "harmonics", "base": 4.0, "terms": [[2, 0, 0.3], [3, 1, 0.2]]}}}
    code, out = run(tmp_path, "converge", data, "--resolution", "8,16", "--resolution", "16,32",
                    "--resolution", "32,64")
    assert code == 0
    rows = (out / "convergence.csv").read_text().splitlines()
    assert rows[0].split(",") == cli.CONVERGENCE_COLUMNS and len(rows) == 10
    plot = (out / "plot_penrose_lhs.dat").read_text().splitlines()
    assert plot[0].startswith("#") and len(plot[1].split()) == 2


def test_converge_needs_three_resolutions(tmp_path):
    code, _ = run(tmp_path, "converge", {"surface": SPHERE3})
    assert code == 1


def test_converge_sphere_flags_rounding_floor(tmp_path):
    code, out = run(tmp_path, "converge", {"surface": SPHERE3, "resolutions": [[8, 16], [16, 32], [32, 64]]})
    assert code == 0
    flags = json.loads((out / "convergence.json").read_text())["flags"]
    assert set(flags.values()) == {"rounding-floor"}


def test_identities_defaults_and_fault(tmp_path, capsys):
    code, out = run(tmp_path, "identities", {})
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert any(line.startswith("PASS umbilicity") for line in lines)
    code, _ = run(tmp_path, "identities", {"fault_injection": "christoffel"})
    assert code == 2
    assert any(line.startswith("FAIL umbilicity") for line in capsys.readouterr().out.splitlines())


def test_identities_other_parameters(tmp_path):
    code, _ = run(tmp_path, "identities", {"m": 0.5, "lambdas": [2.0]})
    assert code == 0


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("GPVERIFY_SEED", "9")
    monkeypatch.setenv("GPVERIFY_RESOLUTIONS", "16,32;32,64")
    cfg = load_config(write(tmp_path, "c.yaml", {"surface": SPHERE3}), "verify", {"seed": 4})
    assert cfg.seed == 4 and cfg.resolutions == [(16, 32), (32, 64)]
    assert env_overrides({"GPVERIFY_THREADS": "3"}) == {"threads": 3}


def test_parse_resolution():
    assert parse_resolution("32,64") == (32, 64)
    assert parse_resolution("32x64") == (32, 64)
    with pytest.raises(ValueError):
        parse_resolution("32")


def test_schema_rejects_before_any_computation():
    with pytest.raises(ValidationError):
        RunConfig.model_validate({"command": "family"})
    with pytest.raises(ValidationError):
        RunConfig.model_validate({"command": "identities", "lambdas": [0.0]})


profiles = hs.one_of(
    hs.builds(lambda v: {"kind": "constant", "value": v}, hs.floats(2.5, 10)),
    hs.builds(lambda b, c: {"kind": "harmonics", "base": b, "terms": [[2, 1, c]], "relative": True},
              hs.floats(3, 6), hs.floats(-0.1, 0.1)),
    hs.builds(lambda a: {"kind": "ellipsoid", "axes": [a, 4.0, 5.0]}, hs.floats(3, 6)),
)


@settings(max_examples=40, deadline=None)
@given(u=profiles, m=hs.floats(0, 1), seed=hs.integers(0, 2**31), threads=hs.integers(1, 8),
       lams=hs.lists(hs.floats(0.1, 100), min_size=1, max_size=4))
def test_config_round_trip(u, m, seed, threads, lams):
    cfg = RunConfig.model_validate({
        "command": "verify", "m": m, "seed": seed, "threads": threads, "lambdas": lams,
        "surface": {"family": "StaticSlice", "u": u}, "tolerances": {"identity": 1e-9},
    })
    again = RunConfig.model_validate(yaml.safe_load(cfg.to_yaml()))
    assert again == cfg
    assert again.to_yaml() == cfg.to_yaml()


@pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "configs").glob("*.yaml")),
                         ids=lambda p: p.stem)
def test_shipped_configs_parse_and_round_trip(path):
    cfg = load_config(path)
    assert RunConfig.model_validate(yaml.safe_load(cfg.to_yaml())) == cfg
