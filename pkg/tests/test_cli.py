import json
import os
import subprocess
import sys

import pytest

from irsnoma import ConfigurationError, ScenarioConfig
from irsnoma.cli import CSV_HEADER, main
from irsnoma.config import config_from_dict, emit_config, load_config_text, parse_config

SMALL = """\
M: 24
K: 2
G: 2
Mbar: 4
N: 4
L: 8
trials: 2
snr_grid_db: [0, 20]
clusters:
  - azimuth_deg: 30
  - azimuth_deg: -45
"""


def write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_file_fills_default_profile(tmp_path):
    cfg = parse_config(write(tmp_path, "L: 100\n"))
    assert cfg == ScenarioConfig(L=100)
    assert (cfg.M, cfg.N, cfg.Mbar, cfg.G, cfg.U, cfg.K) == (90, 8, 8, 4, 4, 4)
    assert cfg.alpha_sq == (0.4, 0.35, 0.2, 0.05)


def test_odd_users_rejected(tmp_path):
    with pytest.raises(ConfigurationError, match="U must be even"):
        parse_config(write(tmp_path, "U: 3\nalpha_sq: [0.5, 0.3, 0.2]\n"))


def test_groups_must_match_streams(tmp_path):
    with pytest.raises(ConfigurationError, match="G = Mbar/2"):
        parse_config(write(tmp_path, "G: 4\nMbar: 4\n"))
    with pytest.raises(ConfigurationError, match="N >= Mbar"):
        parse_config(write(tmp_path, "N: 4\n"))


@pytest.mark.parametrize("text,match", [
    ("Lx: 3\n", "unknown configuration key"),
    ("solver:\n  tolerance: 1\n", "solver.tolerance"),
    ("clusters:\n  - azimuth_deg: 1\n    colour: red\n", "colour"),
    ("trials: 2.5\n", "integer"),
    ("chi_bs_u: 1.5\n", "chi_bs_u"),
    ("alpha_sq: [0.9, 0.35, 0.2, 0.05]\n", "sum"),
    ("schemes: [irs_noma, magic]\n", "magic"),
    ("[1, 2\n", "malformed"),
])
def test_bad_files(tmp_path, text, match):
    with pytest.raises(ConfigurationError, match=match):
        parse_config(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError, match="not found"):
        parse_config(tmp_path / "nope.yaml")


def test_round_trip():
    for cfg in (ScenarioConfig(), load_config_text(SMALL),
                ScenarioConfig(L=7, xi=0.01, schemes=("oma",), solver_tol=1e-9)):
        assert load_config_text(emit_config(cfg)) == cfg


def test_empty_file_is_default():
    assert load_config_text("") == ScenarioConfig()


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], [l.split(",") for l in lines[1:]]


def test_run_writes_csv_and_manifest(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--output-dir", str(out)]) == 0
    header, rows = read_csv(out / "results.csv")
    assert header == CSV_HEADER
    assert len(rows) == 4 * 4 * 2
    assert {r[0] for r in rows} == {"irs_noma", "dp_noma", "sp_noma", "oma"}
    m = json.loads((out / "manifest.json").read_text())
    for key in ("config_echo", "seed", "tool_version", "wall_time_s", "rejected_trial_counts",
                "kernel_backend", "scheme_assumptions"):
        assert key in m
    # the manifest alone reproduces the run
    out2 = tmp_path / "again"
    assert main(["run", "--config", str(out / "manifest.json"), "--output-dir", str(out2)]) == 0
    assert (out2 / "results.csv").read_bytes() == (out / "results.csv").read_bytes()


def test_scheme_filter_and_overrides(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "o"
    rc = main(["run", "--config", str(cfg), "--output-dir", str(out), "--schemes",
               "irs_noma,oma", "--snr", "5", "--trials", "1"])
    assert rc == 0
    _, rows = read_csv(out / "results.csv")
    assert {r[0] for r in rows} == {"irs_noma", "oma"}
    assert {r[1] for r in rows} == {"5"}
    assert {r[5] for r in rows} == {"1"}


def test_same_seed_same_bytes(tmp_path):
    cfg = write(tmp_path, SMALL)
    outs = []
    for i in range(2):
        o = tmp_path / f"s{i}"
        assert main(["run", "--config", str(cfg), "--output-dir", str(o), "--seed", "7"]) == 0
        outs.append((o / "results.csv").read_bytes())
    assert outs[0] == outs[1]
    o = tmp_path / "s8"
    main(["run", "--config", str(cfg), "--output-dir", str(o), "--seed", "8"])
    assert (o / "results.csv").read_bytes() != outs[0]


def test_error_exit_codes(tmp_path, capsys):
    bad = write(tmp_path, "U: 3\n")
    assert main(["run", "--config", str(bad), "--output-dir", str(tmp_path / "x")]) == 2
    assert "U must be even" in capsys.readouterr().err
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write(tmp_path, SMALL)
    assert main(["run", "--config", str(cfg), "--output-dir", str(blocker / "sub")]) == 3
    # infeasible precoder dimensions are caught before any trial
    inf = write(tmp_path, SMALL.replace("M: 24", "M: 8"), "inf.yaml")
    assert main(["run", "--config", str(inf), "--output-dir", str(tmp_path / "y")]) == 2


def test_config_subcommand_prints_yaml(tmp_path, capsys):
    assert main(["config", "--config", str(write(tmp_path, "L: 55\n"))]) == 0
    text = capsys.readouterr().out
    assert load_config_text(text) == ScenarioConfig(L=55)


def test_numbers_use_nine_significant_digits(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "n"
    main(["run", "--config", str(cfg), "--output-dir", str(out), "--schemes", "oma"])
    _, rows = read_csv(out / "results.csv")
    for r in rows:
        digits = r[3].replace(".", "").replace("-", "").split("e")[0].lstrip("0")
        assert len(digits) <= 9
        assert float(r[3]) >= 0


def test_console_entry_point(tmp_path):
    cfg = write(tmp_path, SMALL)
    env = dict(os.environ)
    r = subprocess.run([sys.executable, "-m", "irsnoma.cli", "config", "--config", str(cfg)],
                       capture_output=True, text=True, env=env)
    assert r.returncode == 0 and "Mbar: 4" in r.stdout


def test_manifest_dict_accepted_directly():
    d = {"config_echo": {"L": 12}}
    assert config_from_dict(d) == ScenarioConfig(L=12)
