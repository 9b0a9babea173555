import csv
import filecmp
import json
import os
import shutil

import numpy as np
import pytest

from moreau_escape.cli import main
from moreau_escape.errors import ConfigError, OracleFailure
from moreau_escape.harness import (ExperimentConfig, envelope_minimizers, grid_certify, load_config,
                                   resolve, run_experiment)
from moreau_escape.problems import Box, get_problem

SMALL = dict(T=300, M=20, seeds=[0, 1], inits=[[0.0, 1e-3], [0.2, -0.1]])


def _cfg(tmp_path, **kw):
    return ExperimentConfig.from_mapping({**SMALL, "outputs": str(tmp_path), **kw})


@pytest.mark.parametrize("bad,field", [
    ({"seeds": []}, "seeds"),
    ({"seeds": [-1]}, "seeds"),
    ({"seeds": {"start": 3}}, "seeds"),
    ({"problem": "nope"}, "problem"),
    ({"model": "newton"}, "model"),
    ({"mu": 1.0}, "mu"),
    ({"mu": -0.1}, "mu"),
    ({"eps1": 0.0}, "eps1"),
    ({"oracle_a": 2.0}, "oracle_a"),
    ({"oracle_mode": "two-sided", "model": "subgradient"}, "oracle_mode"),
    ({"oracle_mode": "sideways"}, "oracle_mode"),
    ({"theta": 0.1}, "oracle"),
    ({"mode": "theory"}, "mode"),
    ({"mode": "fast"}, "mode"),
    ({"inits": [[0.0, 0.0, 0.0]]}, "inits"),
    ({"inits": [[50.0, 0.0]]}, "inits"),
    ({"inits": {"grid": {"n": 1}}}, "inits.grid.n"),
    ({"inits": {"spiral": {}}}, "inits"),
    ({"T": -1}, "T"),
])
def test_config_errors(bad, field):
    with pytest.raises(ConfigError) as info:
        resolve(ExperimentConfig.from_mapping({**SMALL, **bad}))
    assert info.value.field == field


def test_unknown_key_rejected():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_mapping({"stepsize": 0.1})
    assert info.value.field == "stepsize"


def test_init_and_seed_generators():
    res = resolve(ExperimentConfig.from_mapping(
        {"inits": {"grid": {"n": 3, "box": [[-1, -1], [1, 1]]}}, "seeds": {"start": 2, "stop": 5}}))
    assert res.inits.shape == (9, 2) and res.seeds == [2, 3, 4]
    rnd = resolve(ExperimentConfig.from_mapping({"inits": {"random": {"count": 4, "seed": 1}}}))
    again = resolve(ExperimentConfig.from_mapping({"inits": {"random": {"count": 4, "seed": 1}}}))
    assert np.array_equal(rnd.inits, again.inits)


def test_oracle_defaults_follow_model():
    two = resolve(ExperimentConfig())
    assert two.oracle.mode.value == "two-sided" and two.oracle.K > 0
    one = resolve(ExperimentConfig(model="subgradient", oracle_a=0.5, oracle_b=1.0))
    assert one.oracle.mode.value == "one-sided"
    assert resolve(ExperimentConfig(oracle_mode="exact")).oracle is None


def test_load_config_with_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"T": 10, "seeds": [4]}))
    cfg = load_config(str(path), {"T": 20, "eps1": None})
    assert cfg.T == 20 and cfg.seeds == [4] and cfg.eps1 == 0.04
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(path))


def test_outputs_are_byte_identical(tmp_path):
    run_experiment(_cfg(tmp_path / "out"))
    shutil.copytree(tmp_path / "out", tmp_path / "first")
    run_experiment(_cfg(tmp_path / "out"))
    for name in ("summary.csv", "manifest.json"):
        assert filecmp.cmp(tmp_path / "first" / name, tmp_path / "out" / name, shallow=False)
    ta, tb = tmp_path / "first" / "traces", tmp_path / "out" / "traces"
    names = sorted(os.listdir(ta))
    assert names == sorted(os.listdir(tb)) and len(names) == 4
    assert all(filecmp.cmp(ta / n, tb / n, shallow=False) for n in names)


def test_output_layout(tmp_path):
    res = run_experiment(_cfg(tmp_path, record_envelope=True))
    with open(res.summary_path) as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["init"], r["seed"]) for r in rows] == [("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")]
    with open(tmp_path / "traces" / "run_0000_0.csv") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = list(reader)
    assert header == ["t", "x_1", "x_2", "G_norm", "perturbed", "f_mu"]
    assert len(body) == 301
    manifest = json.loads(open(res.manifest_path).read())
    assert manifest["resolved"]["pgd"]["T"] == 300 and manifest["config"]["seeds"] == [0, 1]


ALTERNATES = {
    "problem": "smooth_saddle", "model": "subgradient", "mu": 0.4, "oracle_mode": "exact",
    "K": 7, "theta": 0.6, "oracle_a": 0.01, "oracle_b": 0.2, "eta": 0.3, "r": 0.05, "M": 21,
    "T": 301, "eps1": 0.05, "eps2": 0.03, "delta": 0.2, "Delta_g": 2.0,
    "inits": [[0.1, 0.1]], "seeds": [7], "outputs": "elsewhere", "write_traces": False,
    "record_envelope": True, "minorant_samples": 10,
}


def test_manifest_tracks_every_field():
    base = ExperimentConfig.from_mapping(SMALL)
    fields = set(base.to_mapping())
    assert fields - {"mode"} == set(ALTERNATES)
    ref = resolve(base).manifest()
    for name, value in ALTERNATES.items():
        changed = resolve(ExperimentConfig.from_mapping({**SMALL, name: value})).manifest()
        assert changed != ref, name
        assert changed["config"][name] == value


def test_minimizer_start_with_exact_oracle(tmp_path):
    cfg = _cfg(tmp_path, oracle_mode="exact", inits=[[0.0, 1.0]], seeds=[0], T=120, M=50)
    run = run_experiment(cfg, write=False).runs[0]
    assert run.certified_t == 0
    assert run.certificate is not None and run.certificate.holds
    # the gate is open at t = 0 and reopens every M steps while the gradient stays small
    assert [t for t, _ in run.trace.perturb_events] == [0, 50, 100]


def test_oracle_failure_flushes_summary(tmp_path):
    cfg = _cfg(tmp_path, problem="smooth_saddle", oracle_mode="exact", inits=[[0.0, 4.9]],
               seeds=[0], T=2000)
    with pytest.raises(OracleFailure):
        run_experiment(cfg)
    assert os.path.exists(tmp_path / "summary.csv") and os.path.exists(tmp_path / "manifest.json")


def test_grid_regions_small():
    box = Box(np.full(2, -1.5), np.full(2, 1.5))
    rep = grid_certify("abs_quartic", 0.5, 0.04, 0.04, box, n=61)
    _, count = rep.components()
    assert count == 2
    assert np.all(rep.contains(envelope_minimizers(get_problem("abs_quartic"))))
    assert not rep.contains([[0.0, 0.0]])[0]


def test_grid_without_curvature_test_is_first_order_region():
    box = Box(np.full(2, -1.5), np.full(2, 1.5))
    rep = grid_certify("abs_quartic", 0.5, 0.04, 1e12, box, n=61)
    assert np.array_equal(rep.passed, rep.grad_norm <= 0.04)


def test_grid_tiny_eps1_keeps_minimizers_only():
    box = Box(np.full(2, -1.5), np.full(2, 1.5))
    rep = grid_certify("abs_quartic", 0.5, 1e-3, 0.04, box, n=61)
    pts = rep.points[rep.passed]
    mins = envelope_minimizers(get_problem("abs_quartic"))
    dist = np.min(np.linalg.norm(pts[:, None] - mins[None], axis=2), axis=1)
    assert pts.size and np.all(dist <= 0.05)
    origin = (30, 30)
    assert rep.grad_norm[origin] <= 1e-3 and not rep.passed[origin]


def test_grid_csv(tmp_path):
    rep = grid_certify("abs_quartic", 0.5, 0.04, 0.04, Box(np.full(2, -1.0), np.full(2, 1.0)), n=5)
    path = tmp_path / "grid.csv"
    rep.write_csv(str(path))
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x", "y", "grad_norm", "lambda_min", "passed", "not_smooth"]
    assert len(rows) == 26
    with pytest.raises(ConfigError):
        grid_certify("abs_quartic", 0.5, 0.04, 0.04, n=1)


# -- command line -------------------------------------------------------------

def test_cli_run_and_grid(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--T", "100", "--seed", "0", "--seed", "1", "--init", "0", "0.001",
                 "--out", str(out)]) == 0
    assert (out / "summary.csv").exists()
    assert main(["grid", "--n", "31", "--out", str(tmp_path / "g.csv")]) == 0
    assert "components: 2" in capsys.readouterr().out


def test_cli_params_and_check(capsys):
    assert main(["params", "--problem", "abs_quartic"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["admissible"]["ok"] and report["inequalities"]["probability"]
    assert main(["check", "--point", "0", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"] == 1


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"seeds": []}))
    assert main(["run", "--config", str(cfg)]) == 2
    cfg.write_text(json.dumps({"learning_rate": 1}))
    assert main(["run", "--config", str(cfg)]) == 2
    assert main(["params"]) == 2
    assert main(["check", "--point", "0", "1", "2"]) == 2
    assert main(["run", "--problem", "smooth_saddle", "--oracle-mode", "exact", "--T", "2000",
                 "--init", "0", "4.9", "--seed", "0", "--out", str(tmp_path / "x")]) == 3
    with pytest.raises(SystemExit) as info:
        main(["run", "--model", "newton"])
    assert info.value.code == 2
