"""Command-line behavior: config ingestion, CSV emission, exit codes,
determinism, and the verification runner."""

import filecmp
import math
import subprocess

import pytest

from qldp import cli, partition

BASE = """\
horizon = 220
seed = 5
t_list = [100]
output_dir = "{out}"

[environment]
type = "periodic"

[[environment.letters]]
name = 0.0

[model]
builder = "inline"
waiting_probs = [0.6, 0.4]
reward_atoms = [[1.0, 1.0]]
potential = 0.0

[phi_grid]
min = -1.0
max = 1.0
step = 0.25

[w_grid]
min = 0.5
max = 1.0
step = 0.25

[mc]
n_samples = 2000
delta = 0.05
batch_partition = 4
"""


def write_cfg(tmp_path, text, name="cfg.toml", out="out"):
    out_dir = tmp_path / out
    path = tmp_path / name
    path.write_text(text.format(out=out_dir.as_posix()))
    return path, out_dir


def rows_of(path):
    lines = path.read_text().splitlines()
    header = lines[0].split(",")
    return header, [dict(zip(header, line.split(","))) for line in lines[1:]]


def test_missing_config_exits_2(tmp_path, capsys):
    code = cli.main(["cgf", "--config", str(tmp_path / "nope.toml")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_bad_toml_exits_2(tmp_path):
    cfg = tmp_path / "broken.toml"
    cfg.write_text("horizon = [unclosed\n")
    assert cli.main(["cgf", "--config", str(cfg)]) == 2


def test_negative_grid_step_exits_2(tmp_path):
    cfg, _ = write_cfg(tmp_path, BASE.replace("step = 0.25", "step = -0.25", 1))
    assert cli.main(["cgf", "--config", str(cfg)]) == 2


def test_unknown_builder_exits_2(tmp_path):
    cfg, _ = write_cfg(tmp_path, BASE.replace('builder = "inline"', 'builder = "nope"'))
    assert cli.main(["cgf", "--config", str(cfg)]) == 2


def test_horizon_below_t_list_exits_2(tmp_path):
    cfg, _ = write_cfg(tmp_path, BASE.replace("horizon = 220", "horizon = 50"))
    assert cli.main(["cgf", "--config", str(cfg)]) == 2


IID_ENV = """\
[environment]
type = "iid"
weights = [0.5, 0.5]

[[environment.letters]]
name = 0.0

[[environment.letters]]
name = 1.0
"""


def test_variational_route_needs_periodic(tmp_path, capsys):
    text = BASE.replace(
        '[environment]\ntype = "periodic"\n\n[[environment.letters]]\nname = 0.0\n',
        IID_ENV,
    )
    cfg, _ = write_cfg(tmp_path, text)
    code = cli.main(["cgf", "--config", str(cfg), "--route", "variational"])
    assert code == 2
    assert "NotPeriodic" in capsys.readouterr().err


def test_cgf_kingman_route_works_on_iid(tmp_path):
    text = BASE.replace(
        '[environment]\ntype = "periodic"\n\n[[environment.letters]]\nname = 0.0\n',
        IID_ENV,
    )
    cfg, out = write_cfg(tmp_path, text)
    assert cli.main(["cgf", "--config", str(cfg), "--route", "kingman"]) == 0
    header, rows = rows_of(out / "cgf.csv")
    assert header == ["phi_1", "z", "source", "gap"]
    assert {r["source"] for r in rows} == {"kingman"}
    assert all(r["gap"] == "nan" for r in rows)


def test_cgf_both_routes_and_gap(tmp_path):
    cfg, out = write_cfg(tmp_path, BASE)
    assert cli.main(["cgf", "--config", str(cfg)]) == 0
    header, rows = rows_of(out / "cgf.csv")
    assert header == ["phi_1", "z", "source", "gap"]
    assert {r["source"] for r in rows} == {"kingman", "variational"}
    # 9 grid points, one row per route each
    assert len(rows) == 18
    gaps = [abs(float(r["gap"])) for r in rows]
    assert max(gaps) <= 0.01
    by_phi = {}
    for r in rows:
        by_phi.setdefault(r["phi_1"], {})[r["source"]] = float(r["z"])
    for pair in by_phi.values():
        assert abs(pair["kingman"] - pair["variational"]) <= 0.01


def test_cgf_route_gap_tolerance_exit_1(tmp_path, capsys):
    text = BASE + '\n[tolerances]\nroute_gap = 1e-12\n'
    cfg, out = write_cfg(tmp_path, text)
    code = cli.main(["cgf", "--config", str(cfg)])
    assert code == 1
    assert "exceeds tolerance" in capsys.readouterr().err
    # the CSV is still written for inspection
    assert (out / "cgf.csv").exists()


def test_rate_normalized_value_at_full_occupation(tmp_path):
    text = BASE.replace("max = 1.0\nstep = 0.25\n\n[w_grid]", "max = 8.0\nstep = 0.05\n\n[w_grid]")
    cfg, out = write_cfg(tmp_path, text)
    assert cli.main(["rate", "--config", str(cfg)]) == 0
    header, rows = rows_of(out / "rate.csv")
    assert header == ["w_1", "rate", "normalized_rate", "boundary_flag"]
    assert [r["w_1"] for r in rows] == ["0.5", "0.75", "1.0"]
    got = float(rows[-1]["normalized_rate"])
    assert abs(got - (-math.log(0.6))) <= 5e-3
    # w = 0.5 and w = 1.0 are the edges of the achievable contact
    # fractions, so their suprema sit on the phi-grid boundary (true
    # argmax phi -> -/+ inf) and must carry the flag; w = 0.75 is interior
    assert [r["boundary_flag"] for r in rows] == ["1", "0", "1"]


def test_rate_free_equals_constrained_when_tail_vanishes(tmp_path):
    # finite-support waits have identically zero deep tails, so the free
    # normalization degenerates to the constrained one file-for-file
    cfg, _ = write_cfg(tmp_path, BASE)
    d1, d2 = tmp_path / "constrained", tmp_path / "free"
    assert cli.main(["rate", "--config", str(cfg), "--out", str(d1)]) == 0
    assert cli.main(["rate", "--config", str(cfg), "--out", str(d2), "--kind", "free"]) == 0
    assert filecmp.cmp(d1 / "rate.csv", d2 / "rate.csv", shallow=False)


def test_simulate_rerun_identical_and_seed_override(tmp_path):
    cfg, _ = write_cfg(tmp_path, BASE)
    d1, d2, d3 = (tmp_path / n for n in ("a", "b", "c"))
    for d in (d1, d2):
        assert cli.main(["simulate", "--config", str(cfg), "--out", str(d)]) == 0
    assert filecmp.cmp(d1 / "scan.csv", d2 / "scan.csv", shallow=False)
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(d3), "--seed", "99"]) == 0
    assert not filecmp.cmp(d1 / "scan.csv", d3 / "scan.csv", shallow=False)
    header, rows = rows_of(d3 / "scan.csv")
    assert header == ["w_1", "log_mass_per_t", "std_error", "hits", "n_samples", "t", "seed"]
    assert all(r["seed"] == "99" and r["t"] == "100" for r in rows)


def test_simulate_thread_count_does_not_change_bytes(tmp_path, monkeypatch):
    cfg, _ = write_cfg(tmp_path, BASE)
    d1, d2 = tmp_path / "one", tmp_path / "three"
    monkeypatch.setenv("QLDP_THREADS", "1")
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(d1)]) == 0
    monkeypatch.setenv("QLDP_THREADS", "3")
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(d2)]) == 0
    assert filecmp.cmp(d1 / "scan.csv", d2 / "scan.csv", shallow=False)


def test_simulate_free_kind(tmp_path):
    cfg, out = write_cfg(tmp_path, BASE)
    assert cli.main(["simulate", "--config", str(cfg), "--kind", "free"]) == 0
    _, rows = rows_of(out / "scan.csv")
    assert len(rows) == 3


DIM2 = """\
horizon = 80
seed = 1
t_list = [40]
output_dir = "{out}"

[environment]
type = "periodic"

[[environment.letters]]
name = 0.0

[model]
builder = "inline"
waiting_probs = [0.7, 0.3]
reward_atoms = [[1.0, 0.0, 0.5], [0.0, 1.0, 0.5]]

[phi_grid]
min = [-0.5, -0.5]
max = [0.5, 0.5]
step = [0.5, 0.5]

[w_grid]
min = 0.0
max = 1.0
step = 0.5
"""


def test_cgf_two_dimensional_tilt(tmp_path):
    cfg, out = write_cfg(tmp_path, DIM2)
    assert cli.main(["cgf", "--config", str(cfg), "--route", "kingman"]) == 0
    header, rows = rows_of(out / "cgf.csv")
    assert header == ["phi_1", "phi_2", "z", "source", "gap"]
    assert len(rows) == 9


def test_verify_subset_passes(capsys):
    assert cli.main(["verify", "--criteria", "6"]) == 0
    out = capsys.readouterr().out
    assert "criterion 6" in out and "PASS" in out
    assert "all 1 criteria passed" in out


def test_verify_broken_dp_exits_nonzero(monkeypatch, capsys):
    real = partition.constrained_partition

    def broken(model, traj, t, phi):
        table = real(model, traj, t, phi)
        values = table.values.copy()
        values[1:] += 1e-3
        return partition.PartitionTable(
            values=values, phi=table.phi, traj_id=table.traj_id, model_id=table.model_id
        )

    monkeypatch.setattr(partition, "constrained_partition", broken)
    code = cli.main(["verify", "--criteria", "1"])
    assert code == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "FAILED criteria: [1]" in out


def test_verify_unknown_number_exits_2():
    assert cli.main(["verify", "--criteria", "42"]) == 2


def test_verify_writes_csv(tmp_path, capsys):
    out = tmp_path / "report"
    assert cli.main(["verify", "--criteria", "6", "--out", str(out)]) == 0
    capsys.readouterr()
    header, rows = rows_of(out / "verify.csv")
    assert header == ["number", "name", "passed", "measured", "expected", "runtime_s"]
    assert rows[0]["number"] == "6" and rows[0]["passed"] == "1"


TOO_MANY = """\
horizon = 80
seed = 1
t_list = [40]
output_dir = "{out}"

[environment]
type = "periodic"

[[environment.letters]]
name = 0.0

[model]
builder = "markov_return"
states = ["c", "b1", "b2", "b3", "b4", "b5"]
c = "c"
K = [
  [0.5, 0.1, 0.1, 0.1, 0.1, 0.1],
  [0.5, 0.1, 0.1, 0.1, 0.1, 0.1],
  [0.5, 0.1, 0.1, 0.1, 0.1, 0.1],
  [0.5, 0.1, 0.1, 0.1, 0.1, 0.1],
  [0.5, 0.1, 0.1, 0.1, 0.1, 0.1],
  [0.5, 0.1, 0.1, 0.1, 0.1, 0.1],
]
s_max = 8

[phi_grid]
min = 0.0
max = 0.0
step = 0.1

[w_grid]
min = 0.0
max = 1.0
step = 0.5
"""


def test_state_count_cap_exits_3(tmp_path, capsys):
    cfg, _ = write_cfg(tmp_path, TOO_MANY)
    assert cli.main(["cgf", "--config", str(cfg)]) == 3
    assert "TooManyStates" in capsys.readouterr().err


PINNING = """\
horizon = 130
seed = 3
t_list = [64]
output_dir = "{out}"

[model]
builder = "pinning"
alpha = 0.5
h = 1.0
beta = 0.4
disorder = "gaussian"
s_max = 8

[phi_grid]
min = 0.0
max = 0.0
step = 0.1

[w_grid]
min = 0.5
max = 1.0
step = 0.25
"""


def test_pinning_config_defaults_environment(tmp_path):
    cfg, out = write_cfg(tmp_path, PINNING)
    assert cli.main(["cgf", "--config", str(cfg), "--route", "kingman"]) == 0
    _, rows = rows_of(out / "cgf.csv")
    assert len(rows) == 1 and rows[0]["source"] == "kingman"


def test_pinning_tail_cap_exits_3(tmp_path):
    cfg, _ = write_cfg(tmp_path, PINNING.replace("s_max = 8", "s_max = 8\ntail_cap = 1e-9"))
    assert cli.main(["cgf", "--config", str(cfg), "--route", "kingman"]) == 3


def test_unknown_subcommand_raises_system_exit():
    with pytest.raises(SystemExit):
        cli.main(["frobnicate"])


def test_console_script_entry_point():
    proc = subprocess.run(
        ["qldp", "verify", "--criteria", "6"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "all 1 criteria passed" in proc.stdout
