"""Run configuration round trips and the command-line contract."""

import hashlib
from pathlib import Path

import pytest

from normsol.cli import main
from normsol.config import RunConfig
from normsol.errors import ConfigError

DESK_INI = Path(__file__).resolve().parents[1] / "configs" / "desk_1d.ini"


def desk_text():
    return DESK_INI.read_text()


def test_round_trip_is_byte_identical():
    text = desk_text()
    cfg = RunConfig.from_text(text)
    assert cfg.to_text() == text
    assert RunConfig.from_text(cfg.to_text()).to_text() == text
    assert cfg.hash() == hashlib.sha256(text.encode()).hexdigest()
    assert cfg.potential().l == 2 and cfg.grid().M == 1024


def test_defaults_fill_optional_sections():
    text = desk_text().split("[solver]")[0]
    cfg = RunConfig.from_text(text)
    assert cfg.solver.tol_res is None and cfg.dynamics.gammas == (0.01,)
    assert RunConfig.from_text(cfg.to_text()) == cfg


def test_seed_override_changes_hash():
    cfg = RunConfig.from_text(desk_text())
    other = cfg.with_seed(9)
    assert other.solver.seed == 9 and other.hash() != cfg.hash()


@pytest.mark.parametrize(
    "edit,line,fragment",
    [
        (("a = 0.5", "a = zero"), 3, "a:"),
        (("eta = 1.0", "eta = 1.0\nbogus = 2"), 6, "unknown key"),
        (("peak_2_radius = 4.0\n", ""), 9, "peak 2 lacks"),
        (("M = 1024", "M = 1000"), 20, "power of two"),
        (("[output]", "[extra]\nx = 1\n\n[output]"), 43, "unknown section"),
    ],
)
def test_errors_carry_line_numbers(edit, line, fragment):
    text = desk_text().replace(*edit)
    with pytest.raises(ConfigError) as err:
        RunConfig.from_text(text)
    assert str(err.value).startswith(f"line {line}:") and fragment in str(err.value)


def test_box_too_small_is_rejected_before_compute():
    cfg = RunConfig.from_text(desk_text().replace("L = 800.0", "L = 200.0"))
    with pytest.raises(ConfigError, match="box too small"):
        cfg.validate()


def _write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_landscape_command(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["landscape", "--config", str(DESK_INI), "--out", str(out)]) == 0
    body = (out / "landscape.txt").read_text()
    assert body.startswith("# config_sha256 = ") and "R0 = 0.0360875" in body


def test_landscape_exit_codes(tmp_path):
    big = _write(tmp_path, desk_text().replace("a = 0.5", "a = 500000.0"))
    assert main(["landscape", "--config", big, "--out", str(tmp_path / "b"), "--quiet"]) == 2
    crit = (
        "[problem]\nN = 3\na = 0.5\nepsilon = 0.1\neta = 1e40\np = 6.0\nq = 3.0\n\n"
        "[potential]\nh_infty = 0.5\npeak_1_center = 0.0 0.0 0.0\npeak_1_amplitude = 0.5\n"
        "peak_1_radius = 4.0\n\n[grid]\nL = 100.0\nM = 64\n"
    )
    assert main(["landscape", "--config", _write(tmp_path, crit, "k.ini"), "--out", str(tmp_path / "k"),
                 "--quiet"]) == 3
    assert main(["landscape", "--config", str(tmp_path / "missing.ini")]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["landscape"]) == 1


def test_minimize_pipeline_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["minimize", "--config", str(DESK_INI), "--out", str(a)]) == 0
    table = capsys.readouterr().out
    assert table.splitlines()[0].startswith("region beta lambda")
    assert main(["minimize", "--config", str(DESK_INI), "--out", str(b), "--quiet"]) == 0
    assert capsys.readouterr().out == ""
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    assert {"record_1.txt", "record_2.nsf", "summary.txt", "landscape.txt"} <= set(names)
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    digest = RunConfig.load(DESK_INI).hash()
    for n in names:
        if n.endswith((".txt",)):
            assert digest in (a / n).read_text()
    assert "converged = 2" in (a / "summary.txt").read_text()

    assert main(["stability", "--config", str(DESK_INI), "--out", str(a), "--record", str(a / "record_1"),
                 "--quiet"]) == 0
    assert "verdict = PASS" in (a / "stability_1_0.txt").read_text()
    assert main(["evolve", "--config", str(DESK_INI), "--out", str(a), "--field", str(a / "record_2.nsf"),
                 "--quiet"]) == 0
    assert (a / "trace.csv").read_text().startswith(f"# config_sha256 = {digest}")
    assert (a / "final.nsf").read_bytes()[:4] == b"NSF1"


def test_large_epsilon_reports_region_escape(tmp_path, capsys):
    cfg = _write(tmp_path, desk_text().replace("epsilon = 0.1", "epsilon = 2.0"))
    assert main(["minimize", "--config", cfg, "--out", str(tmp_path / "e")]) == 4
    assert "RegionEscape" in capsys.readouterr().out


def test_guard_exit_code(tmp_path):
    from normsol.field import Grid, gaussian, normalize_to_mass, write_field

    # strong coupling shrinks R1 so the 10 R1 guard is reachable on this grid
    text = desk_text().replace("eta = 1.0", "eta = 1000.0").replace("dt = 0.001", "dt = 0.01")
    cfg = _write(tmp_path, text.replace("sample_every = 100", "sample_every = 10"))
    g = Grid(1, 800.0, 1024)
    field = tmp_path / "f.nsf"
    write_field(field, normalize_to_mass(gaussian(g, 1.0), 1.5))
    out = tmp_path / "g"
    code = main(["evolve", "--config", cfg, "--out", str(out), "--field", str(field), "--quiet"])
    assert code == 5
    assert (out / "trace.csv").exists() and (out / "final.nsf").exists()
