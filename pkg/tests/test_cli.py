import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from dcpl.cli import CSV_HEADER, main, parse_config
from dcpl.errors import ConfigError


def base_config(**overrides):
    cfg = {
        "version": 1,
        "map": {"name": "exp"},
        "lattice": {"angles": ["60deg", "60deg", "60deg"]},
        "region": {"type": "disc", "center": [0, 0], "radius": 0.8},
        "epsilons": [0.2, 0.1, 0.05],
        "seed": 0,
    }
    cfg.update(overrides)
    return cfg


def run(tmp_path, command, cfg, name="cfg.json", extra=()):
    path = tmp_path / name
    path.write_text(json.dumps(cfg) if not isinstance(cfg, str) else cfg)
    out = tmp_path / f"out_{command}_{name}"
    return main([command, "--config", str(path), "--out", str(out), *extra]), out


def read_obj(path):
    verts = []
    for line in path.read_text().splitlines():
        if line.startswith("v "):
            _, x, y, z = line.split()
            verts.append(complex(float(x), float(y)))
            assert float(z) == 0.0
    return np.array(verts)


class TestConfig:
    def test_degree_strings_and_units(self):
        a = parse_config(base_config(lattice={"angles": ["80deg", "60°", "40 deg"]}))
        b = parse_config(base_config(lattice={"angles": [80, 60, 40], "units": "deg"}))
        assert a.angles == pytest.approx(b.angles, abs=1e-15)
        assert a.angles[0] == pytest.approx(80 * math.pi / 180)

    def test_radians_default(self):
        cfg = parse_config(base_config(lattice={"angles": [math.pi / 3] * 3}))
        assert cfg.angles == pytest.approx((math.pi / 3,) * 3)

    def test_two_angles(self):
        cfg = parse_config(base_config(lattice={"angles": ["80deg", "60deg"]}))
        assert sum(cfg.angles) == pytest.approx(math.pi, abs=1e-12)

    @pytest.mark.parametrize(
        "patch",
        [
            {"version": 2},
            {"epsilons": [0.1, 0.2]},
            {"epsilons": []},
            {"epsilons": [0.1, -0.05]},
            {"map": {"name": "nope"}},
            {"lattice": {"angles": [1, 1, 1]}},
            {"region": {"type": "ellipse"}},
            {"region": {"type": "disc"}},
            {"normalization": {"source": "magic"}},
        ],
    )
    def test_invalid(self, patch):
        with pytest.raises(ConfigError):
            parse_config(base_config(**patch))

    def test_complex_params(self):
        cfg = parse_config(base_config(map={"name": "affine", "params": {"c": "1+2j", "d": [3, 0]}}))
        assert cfg.map_params == {"c": 1 + 2j, "d": 3 + 0j}

    def test_polygon_region(self):
        cfg = parse_config(base_config(region={"type": "polygon", "vertices": [[-1, -1], [1, -1], [1, 1], [-1, 1]]}))
        assert cfg.region.contains_interior(0)


class TestSolve:
    def test_affine(self, tmp_path):
        cfg = base_config(map={"name": "affine", "params": {"c": [1, 2], "d": 3}}, epsilons=[0.1])
        code, out = run(tmp_path, "solve", cfg)
        assert code == 0
        for name in ("report.json", "scalefield.json", "mesh_source.obj", "mesh_image.obj", "overlay.svg"):
            assert (out / name).exists()
        src, img = read_obj(out / "mesh_source.obj"), read_obj(out / "mesh_image.obj")
        assert np.max(np.abs(img - ((1 + 2j) * src + 3))) <= 1e-9
        field = json.loads((out / "scalefield.json").read_text())
        assert all(abs(v["u"] - 0.5 * math.log(5)) <= 1e-10 for v in field["vertices"])
        svg = (out / "overlay.svg").read_text()
        assert "affine" in svg and "eps = 0.1" in svg

    def test_obtuse(self, tmp_path, capsys):
        cfg = base_config(lattice={"angles": ["100deg", "40deg", "40deg"]}, epsilons=[0.1])
        code, _ = run(tmp_path, "solve", cfg)
        assert code == 3
        assert "alpha = 100 deg" in capsys.readouterr().err

    def test_malformed_json(self, tmp_path):
        code, _ = run(tmp_path, "solve", "{not json")
        assert code == 1

    def test_missing_file(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "o")]) == 1

    def test_needs_single_epsilon(self, tmp_path):
        code, _ = run(tmp_path, "solve", base_config())
        assert code == 1

    def test_solver_failure_exit(self, tmp_path):
        cfg = base_config(epsilons=[0.1], solver={"max_iterations": 0, "gradient_tolerance": 1e-300})
        cfg["map"] = {"name": "cubic_perturbation", "params": {"mu": 0.1}}
        code, out = run(tmp_path, "solve", cfg)
        assert code == 2
        assert json.loads((out / "report.json").read_text())["status"] == "solver_failure"

    def test_explicit_normalization(self, tmp_path):
        cfg = base_config(
            map={"name": "identity"},
            epsilons=[0.2],
            normalization={"source": "explicit", "image_of_origin": [1, 1], "seed_direction": math.pi / 2},
        )
        code, out = run(tmp_path, "solve", cfg)
        assert code == 0
        src, img = read_obj(out / "mesh_source.obj"), read_obj(out / "mesh_image.obj")
        np.testing.assert_allclose(img, (1 + 1j) + 1j * src, atol=1e-12)


class TestConverge:
    def test_outputs(self, tmp_path):
        code, out = run(tmp_path, "converge", base_config())
        assert code == 0
        with open(out / "errors.csv") as fh:
            rows = list(csv.reader(fh))
        assert (out / "errors.csv").read_text().splitlines()[0] == "epsilon,err_u,err_f,err_dz,err_dzbar,err_psi,err_c1,holonomy,iterations"
        assert tuple(rows[0]) == CSV_HEADER and len(rows) == 4
        assert float(rows[1][0]) == 0.2
        rep = json.loads((out / "report.json").read_text())
        assert rep["orders"]["err_f"] >= 0.8
        assert rep["orders"]["err_u"] is None

    def test_needs_three(self, tmp_path):
        code, _ = run(tmp_path, "converge", base_config(epsilons=[0.2, 0.1]))
        assert code == 1

    def test_byte_identical(self, tmp_path, monkeypatch):
        cfg = base_config(lattice={"angles": ["80deg", "60deg", "40deg"]})
        _, a = run(tmp_path, "converge", cfg, "a.json")
        monkeypatch.setenv("DCPL_THREADS", "2")
        _, b = run(tmp_path, "converge", cfg, "b.json", extra=("--seed", "0"))
        assert (a / "errors.csv").read_bytes() == (b / "errors.csv").read_bytes()
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()

    def test_obtuse_rows(self, tmp_path):
        code, out = run(tmp_path, "converge", base_config(lattice={"angles": ["100deg", "40deg", "40deg"]}))
        assert code == 3
        assert "nan" in (out / "errors.csv").read_text()


class TestTaylor:
    def test_square(self, tmp_path):
        cfg = base_config(map={"name": "square"}, region={"type": "disc", "center": [1, 0], "radius": 0.3},
                          epsilons=[0.1, 0.05, 0.025], taylor={"v0": [1, 0]})
        code, out = run(tmp_path, "taylor", cfg)
        assert code == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["relative_deviation"] <= 0.05
        header = (out / "taylor.csv").read_text().splitlines()[0]
        assert header == "epsilon,defect,defect_over_eps4,predicted_constant"

    def test_needs_v0(self, tmp_path):
        code, _ = run(tmp_path, "taylor", base_config())
        assert code == 1


class TestVerify:
    def test_exp_pass(self, tmp_path):
        code, out = run(tmp_path, "verify", base_config(epsilons=[0.05], verify={"samples": 200}))
        assert code == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["passed"] and rep["solution_in_trap"]

    def test_affine_pass(self, tmp_path):
        code, _ = run(tmp_path, "verify", base_config(map={"name": "affine", "params": {"c": 2}}, epsilons=[0.1]))
        assert code == 0

    def test_square_large_scale_fails(self, tmp_path):
        cfg = base_config(
            map={"name": "square"},
            lattice={"angles": ["60deg"] * 3, "origin": [1, 0]},
            region={"type": "disc", "center": [1, 0], "radius": 0.95},
            epsilons=[0.5],
            verify={"samples": 50},
        )
        code, out = run(tmp_path, "verify", cfg)
        assert code == 3
        rep = json.loads((out / "report.json").read_text())
        assert not rep["passed"] and rep["diagnostics"]["trap_width_exceeds_epsilon"]


def test_module_entry_point(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(base_config(map={"name": "identity"}, epsilons=[0.2])))
    proc = subprocess.run([sys.executable, "-m", "dcpl", "solve", "--config", str(cfg), "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
