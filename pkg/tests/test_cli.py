"""CLI checks: config parsing, exit codes, CSV shape, worker determinism."""

import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridlcu import cli, qed


def run_cli(args, tmp_path, capsys=None):
    code = cli.main([*args, "--out", str(tmp_path)])
    return code


def read_lines(path):
    return path.read_text().splitlines()


# ---------------------------------------------------------------------------
# config parsing


def test_parse_config_text_basics():
    text = "\n".join(
        [
            "# comment only",
            "",
            "run.seed = 7   # trailing comment",
            "demo.m=3",
            "qed.r_values = 0.1, 0.2",
        ]
    )
    cfg = cli.parse_config_text(text)
    assert cfg == {"run.seed": "7", "demo.m": "3", "qed.r_values": "0.1, 0.2"}


def test_parse_config_rejects_bad_lines():
    with pytest.raises(cli.ConfigError):
        cli.parse_config_text("just words\n")
    with pytest.raises(cli.ConfigError):
        cli.parse_config_text("= 3\n")
    with pytest.raises(cli.ConfigError):
        cli.parse_config_text("a = 1\na = 2\n")


def test_coerce_types():
    assert cli._coerce("x", "int", "12") == 12
    assert cli._coerce("x", "float", "1e-3") == pytest.approx(1e-3)
    assert cli._coerce("x", "floats", "1, 2,3") == (1.0, 2.0, 3.0)
    with pytest.raises(cli.ConfigError):
        cli._coerce("x", "int", "1.5")
    with pytest.raises(cli.ConfigError):
        cli._coerce("x", "u64", str(2**64))
    with pytest.raises(cli.ConfigError):
        cli._coerce("x", "floats", " , ")


@settings(max_examples=60, deadline=None)
@given(total=st.integers(0, 997), workers=st.integers(1, 17))
def test_chunk_ranges_cover_the_range(total, workers):
    chunks = cli._chunk_ranges(total, workers)
    flat = [i for start, count in chunks for i in range(start, start + count)]
    assert flat == list(range(total))
    assert all(count > 0 for _, count in chunks)


def test_flag_beats_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("run.seed = 1\nrun.shots = 500\npartitions.m = 3\n")
    code = cli.main(
        ["partitions", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path)]
    )
    assert code == 0
    assert read_lines(tmp_path / "partitions.csv")[-1] == "# seed=9 version=0.1.0"


# ---------------------------------------------------------------------------
# exit codes


def test_unknown_key_is_config_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("demo.turbo = yes\n")
    assert cli.main(["demo", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_missing_grid_key_is_named(tmp_path, capsys):
    cfg = tmp_path / "partial.cfg"
    cfg.write_text("qed.pz_min = 1e-3\nqed.pz_points = 4\n")
    assert cli.main(["qed", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "qed.pz_max" in capsys.readouterr().err


def test_bad_values_are_config_errors(tmp_path):
    cases = [
        "demo.m = 7\n",  # above the demo cap
        "demo.m = banana\n",
        "run.workers = 0\n",
        "run.shots = 0\n",
    ]
    for text in cases:
        cfg = tmp_path / "case.cfg"
        cfg.write_text(text)
        assert cli.main(["demo", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_absent_config_file_is_config_error(tmp_path):
    assert cli.main(["demo", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2


def test_module_validation_maps_to_config_error(tmp_path):
    cfg = tmp_path / "g.cfg"
    cfg.write_text("gsp.epsilon = 0.9\ngsp.p0 = 0.5\n")
    assert cli.main(["gsp", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_partitions_m_cap(tmp_path):
    cfg = tmp_path / "m.cfg"
    cfg.write_text("partitions.m = 9\n")
    assert cli.main(["partitions", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_backend_disagreement_exits_three(tmp_path, monkeypatch, capsys):
    def broken(channel, state, obs, backend="analytic"):
        return 1.0 if backend == "analytic" else 0.0

    monkeypatch.setattr(cli.hybrid, "exact_expectation", broken)
    code = cli.main(["demo", "--seed", "1", "--shots", "10", "--out", str(tmp_path)])
    assert code == 3
    assert "invariant violation" in capsys.readouterr().err


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main([])
    assert exc.value.code == 2


# ---------------------------------------------------------------------------
# demo


def test_demo_outputs_and_pass_line(tmp_path, capsys):
    code = cli.main(["demo", "--seed", "11", "--shots", "2000", "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "cross-check ok" in out
    shots = read_lines(tmp_path / "demo_shots.csv")
    assert shots[0] == "shot,k,kprime,z,b,j,g"
    assert len(shots) == 2000 + 2
    assert shots[-1] == "# seed=11 version=0.1.0"
    reports = read_lines(tmp_path / "demo_reports.csv")
    assert reports[0].startswith("method,target,estimate")
    assert {line.split(",")[0] for line in reports[1:-1]} == {"bernstein", "asymptotic"}
    parts = read_lines(tmp_path / "demo_partitions.csv")
    assert parts[0] == "partition,a_star,R,R_minus_P"


def test_demo_rerun_and_worker_counts_byte_identical(tmp_path):
    dirs = [tmp_path / name for name in ("a", "b", "c")]
    for d, workers in zip(dirs, ("1", "1", "4")):
        cli.main(["demo", "--seed", "23", "--shots", "1500", "--workers", workers, "--out", str(d)])
    for name in ("demo_shots.csv", "demo_reports.csv", "demo_partitions.csv"):
        ref = (dirs[0] / name).read_bytes()
        assert (dirs[1] / name).read_bytes() == ref
        assert (dirs[2] / name).read_bytes() == ref


def test_demo_seed_changes_shots(tmp_path):
    cli.main(["demo", "--seed", "1", "--shots", "300", "--out", str(tmp_path / "s1")])
    cli.main(["demo", "--seed", "2", "--shots", "300", "--out", str(tmp_path / "s2")])
    a = (tmp_path / "s1" / "demo_shots.csv").read_bytes()
    b = (tmp_path / "s2" / "demo_shots.csv").read_bytes()
    assert a != b


# ---------------------------------------------------------------------------
# partitions


def test_partitions_table_m5(tmp_path):
    assert cli.main(["partitions", "--seed", "4", "--out", str(tmp_path)]) == 0
    lines = read_lines(tmp_path / "partitions.csv")
    body = lines[1:-1]
    assert len(body) == 52  # Bell(5)
    rows = {}
    for line in body:
        text, a_star, r, gap = line.rsplit(",", 3)
        rows[text.strip('"')] = (int(a_star), float(r), float(gap))
    finest = rows["1|2|3|4|5"]
    assert finest[0] == 0
    assert finest[1] == pytest.approx(1.0, abs=1e-12)
    coarsest = rows["1,2,3,4,5"]
    assert coarsest[0] == 3
    assert coarsest[2] == 0.0
    assert min(r for _, r, _ in rows.values()) == pytest.approx(coarsest[1])
    assert all(gap >= -1e-12 for _, _, gap in rows.values())


# ---------------------------------------------------------------------------
# sweep drivers


def test_lchs_csv_shape(tmp_path):
    assert cli.main(["lchs", "--seed", "0", "--out", str(tmp_path)]) == 0
    lines = read_lines(tmp_path / "lchs_bound.csv")
    assert lines[0] == "K2,M,alpha,s_norm1,rp_bound,overhead_bound_at_P,P_assumed"
    assert len(lines) == 60 + 2


def test_qlss_csv_shape(tmp_path):
    cfg = tmp_path / "q.cfg"
    cfg.write_text("qlss.kappas = 4, 8\nqlss.dim = 4\n")
    assert cli.main(["qlss", "--config", str(cfg), "--seed", "7", "--out", str(tmp_path)]) == 0
    lines = read_lines(tmp_path / "qlss_table.csv")
    assert lines[0].startswith("kappa,epsilon,J,K,one_norm")
    assert len(lines) == 2 + 2


def test_gsp_report_row(tmp_path):
    assert cli.main(["gsp", "--seed", "3", "--out", str(tmp_path)]) == 0
    lines = read_lines(tmp_path / "gsp_report.csv")
    assert len(lines) == 3
    fields = lines[1].split(",")
    assert int(fields[0]) == 16  # dim


def test_qed_matches_direct_sweep_and_workers(tmp_path):
    for d, workers in ((tmp_path / "w1", "1"), (tmp_path / "w3", "3")):
        assert cli.main(["qed", "--seed", "5", "--workers", workers, "--out", str(d)]) == 0
    w1 = (tmp_path / "w1" / "qed_sweep.csv").read_bytes()
    assert (tmp_path / "w3" / "qed_sweep.csv").read_bytes() == w1
    rows = qed.fig_sweep(seed=5)
    lines = w1.decode().splitlines()
    assert len(lines) == len(rows) + 2
    first = lines[1].split(",")
    assert float(first[3]) == pytest.approx(rows[0].p, abs=1e-15)


def test_qed_custom_grid(tmp_path):
    cfg = tmp_path / "qed.cfg"
    cfg.write_text("qed.pz_min = 1e-3\nqed.pz_max = 1e-2\nqed.pz_points = 3\nqed.codewords = 2\nqed.r_values = 0.5\n")
    assert cli.main(["qed", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path)]) == 0
    lines = read_lines(tmp_path / "qed_sweep.csv")
    assert len(lines) == 3 + 2
    pzs = [float(line.split(",")[1]) for line in lines[1:-1]]
    assert pzs == pytest.approx(list(np.geomspace(1e-3, 1e-2, 3)))


# ---------------------------------------------------------------------------
# plot stub and entry point


def test_emit_plot_script_compiles(tmp_path):
    code = cli.main(["lchs", "--seed", "0", "--out", str(tmp_path), "--emit-plot-script"])
    assert code == 0
    stub = tmp_path / "plot_lchs.py"
    assert stub.is_file()
    text = stub.read_text()
    assert "lchs_bound.csv" in text
    compile(text, str(stub), "exec")


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "hybridlcu.cli", "partitions", "--seed", "2", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "52 rows" in proc.stdout
    assert (tmp_path / "partitions.csv").is_file()
