import io
import json
import re

import numpy as np
import pytest

from seqopt.cli import main
from seqopt.files import read_sequences, read_table, write_sequences
from seqopt.objective import uniform_weights
from seqopt.solver import ProblemInstance, random_feasible_start, trial_rng
from seqopt.basis import sequences_from_vector

SMALL = ["--n", "8", "--k", "2", "--starts", "3", "--seed", "5", "-q"]


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    root = tmp_path_factory.mktemp("solve")
    out = {}
    for problem in ("p1", "p2"):
        d = root / problem
        assert main(["solve", "--problem", problem, *SMALL, "--out", str(d)]) == 0
        out[problem] = d
    return out


def test_solve_outputs(solved):
    d = solved["p1"]
    rows = read_table(d / "trials.csv")
    assert len(rows) == 3
    assert list(rows[0])[:14] == [
        "trial_id", "converged", "objective", "ave_snr", "min_snr", "r_ac", "r_cc",
        "r_ac_max", "r_cc_max", "e1", "e2", "e3", "kkt_residual", "iterations",
    ]
    assert sum(r["best"] == "1" for r in rows) == 1
    conv = [r for r in rows if r["converged"] == "1"]
    assert conv and all(float(r["e1"]) <= 1e-9 and float(r["e2"]) == 0.0 for r in conv)
    assert read_sequences(d / "best_solution.csv").shape == (2, 8)
    manifest = json.loads((d / "manifest.json").read_text())
    assert manifest["instance"] == {"N": 8, "K": 2, "Z_AC": 1.0, "Z_CC": 2.0, "problem": "p1"}
    assert manifest["config"]["starts"] == 3 and manifest["config"]["seed"] == 5


def test_p2_table_has_nonnegative_e3(solved):
    rows = [r for r in read_table(solved["p2"] / "trials.csv") if r["converged"] == "1"]
    assert rows and min(float(r["e3"]) for r in rows) >= -1e-9


def test_solve_is_deterministic(solved, tmp_path):
    assert main(["solve", "--problem", "p1", *SMALL, "--out", str(tmp_path)]) == 0
    for name in ("trials.csv", "best_solution.csv", "summary.csv"):
        assert (tmp_path / name).read_bytes() == (solved["p1"] / name).read_bytes()


def test_eval_matches_solve_report(solved, tmp_path, capsys):
    capsys.readouterr()
    assert main(["eval", str(solved["p1"] / "best_solution.csv")]) == 0
    row = read_table(io.StringIO(capsys.readouterr().out))[0]
    best = next(r for r in read_table(solved["p1"] / "trials.csv") if r["best"] == "1")
    assert np.isclose(float(row["ave_snr"]), float(best["ave_snr"]), rtol=1e-12)
    assert np.isclose(float(row["min_snr"]), float(best["min_snr"]), rtol=1e-12)


def test_eval_reference_families(tmp_path, capsys):
    files = []
    for fam in ("gold", "fzc", "sarwate"):
        f = tmp_path / f"{fam}.csv"
        assert main(["gen-ref", "--family", fam, "--n", "31", "--k", "4", "--out", str(f)]) == 0
        files.append(str(f))
    capsys.readouterr()
    assert main(["eval", *files, "--per-user"]) == 0
    rows = read_table(io.StringIO(capsys.readouterr().out))
    assert [r["set"] for r in rows] == files
    for r in rows:
        assert float(r["ave_snr"]) >= float(r["min_snr"])
        assert all(np.isfinite(float(r[c])) for c in ("ave_snr", "min_snr", "r_ac", "r_cc", "r_ac_max", "r_cc_max"))
        assert "r_cc_4" in r


def test_gen_ref_sarwate(tmp_path):
    f = tmp_path / "s.csv"
    assert main(["gen-ref", "--family", "sarwate", "--n", "31", "--k", "4", "--out", str(f)]) == 0
    seqs = read_sequences(f)
    assert seqs.shape == (4, 31) and np.allclose(np.abs(seqs), 1.0, atol=1e-15)
    params = json.loads(f.with_suffix(".json").read_text())
    assert params["instance"]["family"] == "sarwate"


def test_gen_ref_gold_length_error(tmp_path, capsys):
    assert main(["gen-ref", "--family", "gold", "--n", "30", "--out", str(tmp_path / "g.csv")]) == 2
    assert "30" in capsys.readouterr().err


def test_kkt_check_converged_p1(solved, capsys):
    assert main(["kkt-check", str(solved["p1"] / "best_solution.csv"), "--tol", "1e-5"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_kkt_check_p2_prints_active_set(solved, capsys):
    capsys.readouterr()
    main(["kkt-check", str(solved["p2"] / "best_solution.csv"), "--problem", "p2"])
    out = capsys.readouterr().out
    m = re.search(r"active set U=\[([\d, ]*)\].*sum\(nu\)=(\S+)", out)
    assert m and len(m.group(1).split(",")) >= 1 and m.group(1).strip()
    assert abs(float(m.group(2)) - 1.0) <= 1e-5


def test_kkt_check_random_point_fails(tmp_path):
    inst = ProblemInstance.uniform(8, 2, 1, 2, "p1")
    x = random_feasible_start(inst, trial_rng(0, 0))
    f = tmp_path / "r.csv"
    write_sequences(f, sequences_from_vector(x, 8, 2, False))
    assert main(["kkt-check", str(f)]) != 0


def test_kkt_check_infeasible_input(tmp_path, capsys):
    f = tmp_path / "bad.csv"
    write_sequences(f, 2 * np.ones((2, 8)))
    assert main(["kkt-check", str(f)]) == 2
    assert "feasib" in capsys.readouterr().err.lower()


def test_usage_errors(capsys):
    assert main([]) == 1
    assert main(["solve", "--bogus"]) == 1
    assert main(["gen-ref"]) == 1
    assert main(["solve", "--problem", "p3"]) == 1


def test_malformed_csv_exit_code(tmp_path, capsys):
    f = tmp_path / "bad.csv"
    f.write_text("user,re_1,im_1\n1,x,0\n")
    assert main(["eval", str(f)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_invalid_instance_exit_code(tmp_path):
    assert main(["solve", "--n", "1", "--k", "1", "-q", "--out", str(tmp_path)]) == 2


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("problem = p2\nn = 6\nk = 1\nstarts = 2\nquiet = true\n")
    out = tmp_path / "o"
    assert main(["solve", "--config", str(conf), "--starts", "1", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["instance"]["problem"] == "p2" and manifest["instance"]["N"] == 6
    assert manifest["config"]["starts"] == 1
    conf.write_text("nonsense = 1\n")
    assert main(["solve", "--config", str(conf), "--out", str(out)]) == 1


def test_repro_writes_tables(tmp_path, capsys):
    assert main(["repro", "--n", "6", "--k", "2", "--starts", "1", "-q", "--out", str(tmp_path)]) == 0
    rows = read_table(tmp_path / "tables.csv")
    assert [(r["problem"], r["zac"], r["zcc"]) for r in rows] == [
        ("p1", "1", "2"), ("p1", "2", "1"), ("p2", "1", "2"), ("p2", "2", "1"),
    ]
    assert (tmp_path / "p2_zac2_zcc1" / "trials.csv").exists()
