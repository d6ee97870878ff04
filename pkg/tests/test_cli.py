import json
import subprocess
import sys

import pytest

from gausshodge.cli import ConfigError, ExperimentConfig, main, parse_config_text
from gausshodge.mesh import load_mesh
from gausshodge.report import dumps, sha256_text

SPHERE = ["--surface", "sphere", "--subdiv", "2", "--levels", "2", "--R-schedule", "4,5,6"]


def _json(path):
    return json.loads(path.read_text())


def test_gen_writes_meshes_and_manifest(tmp_path):
    assert main(["gen", *SPHERE, "--out", str(tmp_path)]) == 0
    d = tmp_path / "sphere"
    man = _json(d / "manifest.json")
    assert set(man["levels"]) == {"L0", "L1"}
    for lv, rec in man["levels"].items():
        mesh = load_mesh(d / rec["mesh"])
        assert mesh.content_hash() == rec["mesh_sha256"]
        assert sha256_text((d / rec["geometry"]).read_text()) == rec["geometry_sha256"]
    assert man["mesh_sha256"] == [man["levels"]["L0"]["mesh_sha256"], man["levels"]["L1"]["mesh_sha256"]]
    assert len(man["config_hash"]) == 64


def test_index_reports_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["index", *SPHERE, "--out", str(a)]) == 0
    assert main(["index", *SPHERE, "--out", str(b), "--threads", "2"]) == 0
    ja = (a / "sphere" / "index.json").read_bytes()
    assert ja == (b / "sphere" / "index.json").read_bytes()
    rep = json.loads(ja)
    assert rep["index"] == 4 and rep["config_hash"] and len(rep["mesh_sha256"]) == 2
    assert (a / "sphere" / "index.csv").read_bytes() == (b / "sphere" / "index.csv").read_bytes()


def test_full_pipeline_sphere(tmp_path, capsys):
    assert main(["all", *SPHERE, "--out", str(tmp_path)]) == 0
    ver = _json(tmp_path / "sphere" / "verify.json")
    assert ver["status"] == "PASS" and ver["index"] == 4
    assert "PASS" in capsys.readouterr().out


def test_cylinder_flagged(tmp_path, capsys):
    code = main(["index", "--surface", "cylinder", "--target-edge", "0.4", "--half-length", "6",
                 "--R-schedule", "4,5,6", "--out", str(tmp_path)])
    assert code == 0
    rep = _json(tmp_path / "cylinder" / "index.json")
    assert "ends not conical" in rep["flags"] and rep["index"] == 4
    assert "ends not conical" in capsys.readouterr().out


def _fixture_reports(root, name, index, genus, ends, pinch, dim):
    d = root / name
    d.mkdir(parents=True)
    (d / "index.json").write_text(dumps({"index": index, "genus": genus, "ends": ends, "pinch_constant": pinch,
                                         "flags": [], "mesh_sha256": ["0" * 64]}))
    (d / "harmonic.json").write_text(dumps({"dim": dim, "resolved": True}))


def test_verify_fails_on_lowered_index(tmp_path):
    _fixture_reports(tmp_path, "low", index=1, genus=2, ends=3, pinch=0.2, dim=6)
    assert main(["verify", "--surface", "cone-ended", "--name", "low", "--out", str(tmp_path)]) == 1
    assert _json(tmp_path / "low" / "verify.json")["status"] == "FAIL"


def test_large_pinch_is_not_a_failure(tmp_path):
    _fixture_reports(tmp_path, "pinched", index=9, genus=1, ends=0, pinch=1.75, dim=2)
    assert main(["verify", "--surface", "angenent", "--name", "pinched", "--out", str(tmp_path)]) == 0
    rep = _json(tmp_path / "pinched" / "verify.json")
    assert rep["status"] == "PASS" and rep["hypothesis"] == "hypothesis unmet"


def test_verify_without_reports(tmp_path, capsys):
    assert main(["verify", "--surface", "plane", "--out", str(tmp_path)]) == 2
    assert "missing prerequisite" in capsys.readouterr().err


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("surface = sphere  # round\nsubdiv = 2\nlevels_typo = 3\n")
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    cfg.write_text("surface = sphere\nsubdiv = 9\nrefinement_levels = 1\n")
    assert main(["gen", "--config", str(cfg), "--subdiv", "1", "--out", str(tmp_path)]) == 0
    man = _json(tmp_path / "sphere" / "manifest.json")
    assert man["config"]["subdiv"] == 1


def test_parse_config_text():
    vals = parse_config_text("surface = plane\nR_schedule = 4, 6, 8\nseed = 3\n\n# c\n")
    assert vals == {"surface": "plane", "R_schedule": (4.0, 6.0, 8.0), "seed": 3}
    with pytest.raises(ConfigError):
        parse_config_text("seed three")
    with pytest.raises(ConfigError):
        parse_config_text("seed = three")


@pytest.mark.parametrize("kw", [{"surface": "klein"}, {"surface": "plane", "R_schedule": (5.0, 4.0)},
                                {"surface": "plane", "refinement_levels": 9},
                                {"surface": "plane", "variant": "exact"}, {"surface": "plane", "target_edge": -1.0}])
def test_bad_configs(kw):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kw)


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "gausshodge.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip()


def test_structural_checks_with_end_cocycles():
    from gausshodge.cli import structural_checks
    from gausshodge.cones import gen_cone_ended

    geo, _ = gen_cone_ended(genus=0, n_ends=3, target_edge=0.4)
    rep = structural_checks(geo, seed=5)
    assert rep == {"d1d0_max": 0, "cup_shift_max": 0.0, "cup_trials": 100}
