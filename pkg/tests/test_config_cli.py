import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from oblique.cache import MatrixCache
from oblique.cli import main, run
from oblique.config import SUBCOMMANDS, ExperimentConfig, Task
from oblique.errors import ConfigInvalid


def _write(tmp_path, d, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(d))
    return str(path)


def _eig_cfg(**params):
    p = {"operator": "ObliqueH", "alpha": -0.5}
    p.update(params)
    return {
        "schema_version": 1,
        "task": "Eig",
        "curve": {"kind": "circle", "radius": 1.0},
        "discretization": {"n_nodes": 128},
        "params": p,
        "output": {"directory": "unused", "cache": False},
    }


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_round_trip_is_lossless():
    cfg = ExperimentConfig.from_dict(_eig_cfg(alpha_grid=[-0.2, -0.1]))
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again == cfg and again.to_dict() == cfg.to_dict()
    assert again.sha256() == cfg.sha256()


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d["params"].update(alpha=0.2),
        lambda d: d["params"].update(alpha_grid=[-0.1, 0.05]),
        lambda d: d.update(schema_version=2),
        lambda d: d.update(bogus=1),
        lambda d: d["params"].update(residual_tol=0.0),
        lambda d: d["discretization"].update(n_nodes=4),
        lambda d: d.update(task="Nope"),
        lambda d: d["params"].update(c_grid=[-1.0]),
    ],
)
def test_invalid_configs_rejected(mutate):
    d = _eig_cfg()
    mutate(d)
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.from_dict(d)


def test_minimal_eig_run(tmp_path):
    out = tmp_path / "out"
    assert main(["eig", "--config", _write(tmp_path, _eig_cfg()), "--out", str(out)]) == 0
    rows = _rows(out / "eig.csv")
    assert rows[0] == ["operator", "n", "coupling", "eigenvalue", "residual", "N", "descriptor"]
    assert len(rows) == 2
    assert float(rows[1][3]) < 0 and float(rows[1][4]) <= 1e-10
    assert (out / "plot_density.csv").exists()


def test_sweep_alpha_reproduces_smooth_constant(tmp_path):
    d = _eig_cfg()
    d.update(task="SweepAlpha", discretization={"n_nodes": 2048})
    d["params"] = {"alpha_grid": [-0.2, -0.1, -0.05, -0.025]}
    out = tmp_path / "out"
    assert main(["sweep-alpha", "--config", _write(tmp_path, d), "--out", str(out)]) == 0
    fit = json.loads((out / "fit_alpha.json").read_text())
    assert fit["C"] == pytest.approx(-4.0, rel=0.05)
    header = _rows(out / "sweep_alpha.csv")[0]
    assert header == ["coupling", "eigenvalue", "scaled_eigenvalue", "N", "L"]


def test_positive_alpha_exit_2_without_output(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["eig", "--config", _write(tmp_path, _eig_cfg(alpha=0.3)), "--out", str(out)])
    assert code == 2
    assert not out.exists()
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "validation"


def test_task_subcommand_mismatch_is_invalid(tmp_path):
    assert main(["sweep-beta", "--config", _write(tmp_path, _eig_cfg()), "--out", str(tmp_path / "o")]) == 2


def test_solver_failure_exit_3_without_output(tmp_path, capsys):
    d = _eig_cfg(operator="DiracB", alpha=-0.1, c=1.0)
    out = tmp_path / "out"
    assert main(["eig", "--config", _write(tmp_path, d), "--out", str(out)]) == 3
    assert not out.exists()
    err = json.loads(capsys.readouterr().err)
    assert err["cause"]["type"] == "GapEmpty"


def test_identical_config_gives_identical_csv(tmp_path):
    path = _write(tmp_path, _eig_cfg(operator="DeltaQ", beta=-3.0, alpha=None))
    for name in ("a", "b"):
        assert main(["eig", "--config", path, "--out", str(tmp_path / name)]) == 0
    for f in ("eig.csv", "plot_density.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_variational_run_is_seeded(tmp_path):
    d = _eig_cfg()
    d.update(task="Variational")
    d["params"] = {"beta": -30.0, "random_draws": 5}
    path = _write(tmp_path, d)
    for name, seed in (("a", "7"), ("b", "7"), ("c", "8")):
        assert main(["variational", "--config", path, "--out", str(tmp_path / name), "--seed", seed]) == 0
    a, b, c = ((tmp_path / n / "variational.csv").read_bytes() for n in "abc")
    assert a == b and a != c
    rows = _rows(tmp_path / "a" / "variational.csv")[1:]
    assert len(rows) == 6 and all(r[-1] == "1" for r in rows)


def test_manifest_lists_every_file(tmp_path):
    cfg = ExperimentConfig.from_dict(_eig_cfg())
    out = run(cfg, tmp_path / "out", use_cache=False, command="eig")
    manifest = json.loads((out / "manifest.json").read_text())
    listed = manifest["files"]
    on_disk = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert set(listed) == on_disk
    for name, meta in listed.items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == meta["sha256"]
    assert manifest["config_sha256"] == cfg.sha256()
    assert {"version", "wall_time_s", "seed", "task"} <= set(manifest)


def test_cache_directory_from_environment(tmp_path, monkeypatch):
    cache_dir = tmp_path / "cache"
    monkeypatch.setenv("OBLIQUE_CACHE_DIR", str(cache_dir))
    d = _eig_cfg()
    d["discretization"] = {"n_nodes": 128, "quadrature": "gauss"}
    d["params"] = {"operator": "DeltaQ", "beta": -2.0}
    d["output"]["cache"] = True
    assert main(["eig", "--config", _write(tmp_path, d), "--out", str(tmp_path / "o")]) == 0
    entries = list(cache_dir.glob("*.slp"))
    assert entries
    assert main(["eig", "--config", _write(tmp_path, d), "--out", str(tmp_path / "p"), "--no-cache"]) == 0
    assert list(cache_dir.glob("*.slp")) == entries
    assert (tmp_path / "o" / "eig.csv").read_bytes() == (tmp_path / "p" / "eig.csv").read_bytes()


def test_cache_gc_subcommand(tmp_path, capsys):
    c = MatrixCache(tmp_path)
    for i in range(3):
        c.put("m", -1.0 - i, np.eye(4))
    size = sum(p.stat().st_size for p in tmp_path.glob("*.slp"))
    assert main(["cache-gc", "--dir", str(tmp_path), "--max-bytes", str(size)]) == 0
    assert json.loads(capsys.readouterr().out) == {"freed_bytes": 0}
    assert main(["cache-gc", "--dir", str(tmp_path), "--max-bytes", "0"]) == 0
    assert json.loads(capsys.readouterr().out) == {"freed_bytes": size}


def test_cache_gc_missing_directory(tmp_path):
    assert main(["cache-gc", "--dir", str(tmp_path / "absent"), "--max-bytes", "0"]) == 2


@pytest.mark.parametrize("path", sorted((Path(__file__).parent.parent / "configs").glob("*.json")))
def test_shipped_configs_validate(path):
    cfg = ExperimentConfig.load(path)
    cfg.validate()
    assert cfg.task in SUBCOMMANDS.values()
