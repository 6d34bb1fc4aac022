import csv
import json

import pytest
import scipy.io

from polyfv.cli.config import OUTPUT_ENV, ConfigError, parse_config
from polyfv.cli.main import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main


def write_ini(path, body):
    path.write_text(body)
    return path


@pytest.fixture
def lin_ini(tmp_path):
    out = tmp_path / "out"
    return write_ini(
        tmp_path / "lin.ini",
        f"""[case]
name = poisson_linear
dim = 3

[mesh]
family = random
n = 3
seed = 4

[output]
directory = {out}
dump_matrix = yes
""",
    )


@pytest.fixture(autouse=True)
def no_env(monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)


def test_parse_defaults_and_hash(lin_ini, tmp_path):
    cfg = parse_config(lin_ini)
    assert cfg.case == "poisson_linear" and cfg.family == "random" and cfg.N == 3 and cfg.seed == 4
    assert len(cfg.config_hash) == 16
    # output location does not enter the hash
    other = write_ini(tmp_path / "b.ini", lin_ini.read_text().replace(str(tmp_path / "out"), "/elsewhere"))
    assert parse_config(other).config_hash == cfg.config_hash
    changed = write_ini(tmp_path / "c.ini", lin_ini.read_text().replace("seed = 4", "seed = 5"))
    assert parse_config(changed).config_hash != cfg.config_hash


def test_cavity_defaults(tmp_path):
    cfg = parse_config(write_ini(tmp_path / "cav.ini", "[case]\nname = cavity\n"))
    assert (cfg.Pr, cfg.Ra, cfg.lam, cfg.family, cfg.N) == (0.71, 1e7, 1e-8, "gauss_lobatto", 20)


@pytest.mark.parametrize(
    "body, line",
    [
        ("[case]\nname = cavity\n\n[physics]\npr = -1\n", 5),
        ("[case]\nname = poisson_trig\n[mesh]\nfamliy = uniform\n", 4),
        ("[case]\nname = nope\n", 2),
        ("[case]\nname = poisson_trig\n[solver]\nomega = abc\n", 4),
        ("[case]\nname = poisson_trig\n[bogus]\nx = 1\n", 3),
    ],
)
def test_config_errors_name_the_line(tmp_path, body, line):
    path = write_ini(tmp_path / "bad.ini", body)
    with pytest.raises(ConfigError, match=rf"bad\.ini:{line}:"):
        parse_config(path)


def test_malformed_config_exit_2_and_no_outputs(tmp_path, capsys):
    out = tmp_path / "never"
    path = write_ini(tmp_path / "bad.ini", f"[case]\nname = cavity\n[physics]\npr = -1\n[output]\ndirectory = {out}\n")
    assert main(["run", str(path)]) == EXIT_CONFIG
    assert not out.exists()
    assert "bad.ini:4" in capsys.readouterr().err
    broken = write_ini(tmp_path / "broken.ini", "no section header\n")
    assert main(["run", str(broken)]) == EXIT_CONFIG
    assert main(["run", str(tmp_path / "missing.ini")]) == EXIT_CONFIG


def test_run_writes_artifacts_with_hash(lin_ini, tmp_path):
    assert main(["run", str(lin_ini)]) == EXIT_OK
    out = tmp_path / "out"
    h = parse_config(lin_ini).config_hash
    doc = json.loads((out / "metrics.json").read_text())
    assert doc["config_hash"] == h and doc["converged"]
    assert doc["errors"]["T"]["eps2"] < 1e-12
    raw = (out / "errors.csv").read_bytes()
    assert b"\r\n" in raw
    rows = list(csv.DictReader(raw.decode().splitlines()))
    assert rows and all(r["config_hash"] == h for r in rows)
    assert f"config_hash={h}" in (out / "fields.vtk").read_text().splitlines()[1]
    assert (out / "newton.log").read_text().startswith(f"# config_hash {h}")
    for name in ("diffusion.mtx", "jacobian.mtx"):
        text = (out / name).read_text()
        assert h in text.splitlines()[1]
        assert scipy.io.mmread(out / name).shape[0] > 0


def test_identical_configs_bit_identical_metrics(lin_ini, tmp_path, monkeypatch):
    assert main(["run", str(lin_ini)]) == EXIT_OK
    first = (tmp_path / "out" / "metrics.json").read_bytes()
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env_out"))
    assert main(["run", str(lin_ini)]) == EXIT_OK
    assert (tmp_path / "env_out" / "metrics.json").read_bytes() == first


def test_check_writes_nothing(lin_ini, tmp_path):
    assert main(["run", str(lin_ini), "--check"]) == EXIT_OK
    assert main(["mesh", str(lin_ini), "--check"]) == EXIT_OK
    assert not (tmp_path / "out").exists()


def test_mesh_export(lin_ini, tmp_path):
    assert main(["mesh", str(lin_ini), "--export"]) == EXIT_OK
    doc = json.loads((tmp_path / "out" / "mesh.json").read_text())
    assert doc["config_hash"] == parse_config(lin_ini).config_hash
    assert (tmp_path / "out" / "mesh.vtk").read_text().startswith("# vtk DataFile")


def test_study_level_rules(tmp_path):
    out = tmp_path / "study"
    ini = write_ini(
        tmp_path / "s.ini",
        f"[case]\nname = poisson_trig\ndim = 2\n[mesh]\nfamily = uniform\n[output]\ndirectory = {out}\n",
    )
    assert main(["study", str(ini), "--levels", "4,8"]) == EXIT_CONFIG
    assert not out.exists()
    assert main(["study", str(ini), "--levels", "4,8,16"]) == EXIT_OK
    doc = json.loads((out / "slopes.json").read_text())
    assert doc["complete"] and doc["slopes"]["T"]["eps2"] == pytest.approx(2.0, abs=0.15)
    assert (out / "loglog_T_eps2.dat").exists()
    cav = write_ini(tmp_path / "cav.ini", "[case]\nname = cavity\n")
    assert main(["study", str(cav), "--levels", "4,8,16"]) == EXIT_CONFIG


def test_solver_failure_exit_1(tmp_path):
    out = tmp_path / "fail"
    ini = write_ini(
        tmp_path / "f.ini",
        f"""[case]
name = cavity
[mesh]
family = uniform
n = 3
[physics]
ra = 1e5
lambda = 0.01
[solver]
max_iter = 1
ladder = 1e5
[output]
directory = {out}
""",
    )
    assert main(["run", str(ini)]) == EXIT_SOLVER
    doc = json.loads((out / "metrics.json").read_text())
    assert "failure" in doc and "converged" not in doc
