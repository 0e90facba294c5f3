import json
import math

import numpy as np
import pytest

from swarmmoments.cli import main
from swarmmoments.config import ConfigError, load_scenario, scenario_from_dict, scenario_to_dict
from swarmmoments.fileio import read_moments_csv

# --- config ---------------------------------------------------------------


def test_minimal_config_takes_defaults():
    sc = scenario_from_dict({"mode": "estimate_only"})
    assert sc.n_robots == 50 and sc.order == 8 and sc.control.v_max == 0.01


def test_nested_config():
    sc = scenario_from_dict({
        "target": {"shape": "bunny"},
        "control": {"v_max": None, "v_min": 0.0, "dt": 0.5},
        "events": [{"iteration": 5, "action": "add", "count": 2}],
    })
    assert math.isinf(sc.control.v_max) and sc.control.dt == 0.5
    assert sc.events[0].count == 2
    assert scenario_from_dict(json.loads(json.dumps(scenario_to_dict(sc)))) == sc


@pytest.mark.parametrize("doc, field", [
    ({"n_robot": 5}, "n_robot"),
    ({"control": {"vmax": 1}}, "control.vmax"),
    ({"events": [{"iteration": 3, "action": "add", "cnt": 1}]}, "events[0].cnt"),
    ({"n_robots": "many"}, "n_robots"),
    ({"memory": 1}, "memory"),
    ({"drop_rate": True}, "drop_rate"),
    ({"target": {"shape": "bunny", "image": "x.pgm"}}, "target"),
    ({"mode": "coupled"}, "config"),
])
def test_config_errors_name_the_field(doc, field):
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        scenario_from_dict(doc)


@pytest.mark.parametrize("name", [
    "estimation_loss30_memory", "estimation_loss30_nomemory", "coupled_n7_gammaG", "coupled_n7_gamma5G",
    "selfheal_bunny", "two_disk_pzm", "bunny_lm8_coupled", "bunny_lm8_control_only",
])
def test_bundled_configs_load(root, name):
    sc, base = load_scenario(root / "configs" / f"{name}.json")
    assert sc.name == name and base == root / "configs"


# --- commands -------------------------------------------------------------


@pytest.fixture
def bunny_pgm(root):
    return root / "data" / "bunny.pgm"


def test_moments_command(tmp_path, bunny_pgm, capsys):
    out = tmp_path / "m.csv"
    assert main(["moments", str(bunny_pgm), "--basis", "lm", "--order", "8", "--invert", "--out", str(out)]) == 0
    assert "44 complex moments" in capsys.readouterr().out
    assert read_moments_csv(out).values.size == 44


def test_moments_of_uniform_image_first_order_zero(tmp_path):
    path = tmp_path / "u.pgm"
    path.write_bytes(b"P5\n16 16\n255\n" + bytes([200] * 256))
    assert main(["moments", str(path), "--order", "1", "--out", str(tmp_path / "m.csv")]) == 0
    assert np.allclose(read_moments_csv(tmp_path / "m.csv").values, 0, atol=1e-14)


def test_zero_mass_image_is_an_error(tmp_path, capsys):
    path = tmp_path / "white.pgm"
    path.write_bytes(b"P5\n4 4\n255\n" + bytes([255] * 16))
    assert main(["moments", str(path), "--invert", "--out", str(tmp_path / "m.csv")]) == 1
    assert "zero total mass" in capsys.readouterr().err


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["moments"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["run", "x.json", "--snapshot-every", "-2"])
    assert exc.value.code == 1


def test_reconstruct_round_trip(tmp_path, bunny_pgm, capsys):
    m = tmp_path / "m.csv"
    main(["moments", str(bunny_pgm), "--order", "8", "--invert", "--out", str(m)])
    assert main(["reconstruct", str(m), "--resolution", "64", "--reference", str(m),
                 "--out-dir", str(tmp_path)]) == 0
    assert "msre 0" in capsys.readouterr().out
    assert (tmp_path / "reconstruction.pgm").read_bytes().startswith(b"P5\n64 64\n")
    assert np.loadtxt(tmp_path / "reconstruction.csv", delimiter=",").shape == (64, 64)


def test_reconstruct_zero_moments_gives_flat_image(tmp_path):
    m = tmp_path / "z.csv"
    m.write_text("p,q,part,value\n1,0,Re,0\n0,1,Re,0\n")
    assert main(["reconstruct", str(m), "--resolution", "8", "--out-dir", str(tmp_path)]) == 0
    raster = (tmp_path / "reconstruction.pgm").read_bytes()[-64:]
    assert len(set(raster)) == 1


def test_reconstruct_reference_mismatch(tmp_path, bunny_pgm):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["moments", str(bunny_pgm), "--order", "4", "--out", str(a)])
    main(["moments", str(bunny_pgm), "--order", "5", "--out", str(b)])
    assert main(["reconstruct", str(a), "--reference", str(b), "--out-dir", str(tmp_path)]) == 1


def test_run_estimation_config(root, tmp_path, capsys):
    code = main(["run", str(root / "configs" / "estimation_loss30_memory.json"), "--out-dir", str(tmp_path)])
    assert code == 0
    assert "converged at: " in capsys.readouterr().out
    for name in ("metrics.csv", "final_positions.csv", "scenario.json", "gain.csv", "final_moments.csv"):
        assert (tmp_path / name).exists()


def test_run_unstable_config_exits_two(root, tmp_path):
    assert main(["run", str(root / "configs" / "coupled_n7_gamma5G.json"), "--out-dir", str(tmp_path)]) == 2


def test_run_invalid_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"mode": "estimate_only", "droprate": 0.1}))
    assert main(["run", str(bad), "--out-dir", str(tmp_path / "o")]) == 1
    assert "droprate: unknown key" in capsys.readouterr().err


def test_run_flags_and_snapshots(root, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "n_robots": 10, "order": 4, "iterations": 40, "target": {"image": str(root / "data" / "bunny.pgm"),
                                                                 "invert": True},
        "stop_on_convergence": False,
    }))
    args = ["run", str(cfg), "--seed", "3", "--trace-robot", "2", "--snapshot-every", "20"]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 2
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 2
    snaps = sorted(p.name for p in (tmp_path / "a" / "snapshots").iterdir())
    assert snaps == ["positions_0000020.csv", "positions_0000040.csv",
                     "reconstruction_0000020.pgm", "reconstruction_0000040.pgm"]
    for name in ("metrics.csv", "final_positions.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    metrics = (tmp_path / "a" / "metrics.csv").read_text()
    assert ",trace_error,2," in metrics
    assert json.loads((tmp_path / "a" / "scenario.json").read_text())["seed"] == 3


def test_selfheal_config_has_three_phases(root, tmp_path, capsys):
    code = main(["run", str(root / "configs" / "selfheal_bunny.json"), "--out-dir", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    phases = out.split("converged at: ")[1].splitlines()[0].split(", ")
    assert len(phases) == 3
    assert sum(",converged,," in line for line in (tmp_path / "metrics.csv").read_text().splitlines()) == 3
