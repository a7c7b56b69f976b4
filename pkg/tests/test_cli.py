import csv
import io

import numpy as np
import pytest

from expkrylov import cli
from expkrylov.cli import (
    CSV_COLUMNS, EXIT_OK, EXIT_UNSTABLE, EXIT_USAGE, EXIT_VERIFY, RunConfig, default_krylov_dim,
    load_config, main, observed_order, reference_solution,
)
from expkrylov.problems import lorenz96

LORENZ_H = "0.3/20,0.3/40,0.3/80,0.3/160"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_observed_order_is_least_squares_slope():
    hs = [0.1, 0.05, 0.025]
    assert observed_order(hs, [3 * h ** 4 for h in hs]) == pytest.approx(4.0)
    assert np.isnan(observed_order(hs, [0.0, 0.0, 1.0]))


def test_converge_writes_csv_and_reports_orders(tmp_path, capsys):
    out = tmp_path / "conv.csv"
    rc = main(["converge", "--method", "expK,exp4sp", "--h-list", LORENZ_H, "--out", str(out),
               "--no-timing", "--cache-dir", str(tmp_path / "cache")])
    assert rc == EXIT_OK
    rows = read_csv(out)
    assert list(rows[0]) == list(CSV_COLUMNS)
    assert len(rows) == 8
    assert {r["method"] for r in rows} == {"expK", "exp4sp"}
    assert all(float(r["wall_s"]) == 0.0 for r in rows)
    text = capsys.readouterr().out
    orders = {line.split()[0]: float(line.split()[-1]) for line in text.splitlines()}
    assert abs(orders["expK"] - 3.99) <= 0.2
    assert abs(orders["exp4sp"] - 2.97) <= 0.2


def test_variant_flag_applies_to_bare_family(tmp_path):
    out = tmp_path / "v.csv"
    rc = main(["converge", "--method", "erow4", "--variant", "ktype", "--h-list", LORENZ_H,
               "--out", str(out), "--cache-dir", str(tmp_path)])
    assert rc == EXIT_OK
    assert {(r["method"], r["variant"]) for r in read_csv(out)} == {("erow4k", "ktype")}


def test_csv_is_deterministic_without_timing(tmp_path):
    args = ["converge", "--method", "exp4k", "--h-list", "0.1,0.05,0.025", "--no-timing",
            "--cache-dir", str(tmp_path)]
    main(args + ["--out", str(tmp_path / "a.csv")])
    main(args + ["--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_config_file_drives_a_run(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("problem.name = lorenz96\nproblem.N = 20\nscheme.method = exp4k\n"
                   "scheme.M = 6\nrun.h_list = 0.1, 0.05, 0.025\n"
                   f"run.out = {tmp_path / 'cfg.csv'}\nrun.no_timing = true\n")
    parsed = load_config(cfg)
    assert parsed.params == {"N": 20} and parsed.M == 6 and parsed.h_list == (0.1, 0.05, 0.025)
    assert main(["converge", "--config", str(cfg), "--cache-dir", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "cfg.csv")
    assert len(rows) == 3 and int(rows[0]["arnoldi_vectors"]) == 6 * 3


def test_config_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("run.colour = blue\n")
    assert main(["converge", "--config", str(cfg)]) == EXIT_USAGE


@pytest.mark.parametrize("argv", [
    ["converge", "--h-list", "0.1"],
    ["converge", "--h-list", "0.1,0.05"],
    ["workprec", "--method", ""],
    ["converge", "--method", "exp9", "--h-list", "0.1,0.05,0.025"],
    ["converge", "--h-list", "0.05,0.1,0.025"],
    ["converge", "--h-list", "0.07,0.035,0.0175"],
    ["converge", "--param", "N"],
    ["frobnicate"],
])
def test_usage_errors(argv, tmp_path):
    assert main(argv + ["--cache-dir", str(tmp_path)] if argv[0] != "frobnicate" else argv) == EXIT_USAGE


def test_instability_exit_code(tmp_path, capsys):
    rc = main(["converge", "--problem", "shallow_water", "--param", "nx=8", "--param", "ny=8",
               "--tspan", "0,2", "--h-list", "1,0.5,0.25", "--method", "expK", "--M", "2",
               "--cache-dir", str(tmp_path)])
    assert rc == EXIT_UNSTABLE
    err = capsys.readouterr().err
    assert "expK" in err and "h=1" in err and "step" in err


def test_workprec_rows_per_method_and_step(tmp_path):
    out = tmp_path / "wp.csv"
    rc = main(["workprec", "--problem", "shallow_water", "--param", "nx=8", "--param", "ny=8",
               "--h-list", "0.1/4,0.1/8,0.1/16", "--out", str(out), "--cache-dir", str(tmp_path)])
    assert rc == EXIT_OK
    rows = read_csv(out)
    assert len(rows) == 4 * 3
    assert [r["method"] for r in rows[::3]] == ["expK", "exp4", "exp4k", "erow4"]


def test_verify_passes_and_prints_table(capsys):
    assert main(["verify"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "tree,elementary_differential,exp4k,exp4sp,erow4k,erow4sp,exact" in out
    assert "3943/97200" in out


def test_verify_bseries_suite_table(capsys):
    assert main(["verify", "--suite", "bseries"]) == EXIT_OK
    rows = [r for r in csv.reader(io.StringIO(capsys.readouterr().out)) if r and r[0].isdigit()]
    assert len(rows) == 21 and all(len(r) == 7 for r in rows)


def test_verify_with_injected_fault(capsys):
    assert main(["verify", "--suite", "tableaux", "--inject-fault"]) == EXIT_VERIFY
    out = capsys.readouterr().out
    assert "first failing check is order-4 condition (a)" in out
    assert main(["verify", "--suite", "tableaux", "--inject-fault", "alpha.3.2=1/80"]) == EXIT_VERIFY


def test_tableau_subcommand(tmp_path, capsys):
    assert main(["tableau"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "alpha.3.2 = -1/80" in text
    path = tmp_path / "t.txt"
    path.write_text(text)
    assert main(["tableau", "--check", str(path)]) == EXIT_OK
    path.write_text(text.replace("alpha.3.2 = -1/80", "alpha.3.2 = 1/80"))
    assert main(["tableau", "--check", str(path)]) == EXIT_VERIFY
    assert main(["tableau", "--as-printed"]) == EXIT_VERIFY


def test_bseries_subcommand(capsys):
    assert main(["bseries", "--method", "erow4k"]) == EXIT_OK
    out = capsys.readouterr().out
    rows = {r[0]: r for r in csv.reader(io.StringIO(out)) if r and r[0].isdigit()}
    assert rows["13"] == ["13", "Af''(f,f)", "1/24", "0"]
    assert out.strip().endswith("order with Krylov dimension M=4: 3")


def test_default_krylov_dims():
    assert default_krylov_dim("lorenz96", {}) == 5
    assert default_krylov_dim("shallow_water", {"nx": 32}) == 10
    assert default_krylov_dim("allen_cahn", {"n": 50}) == 20
    assert RunConfig(problem="lorenz96").schemes()[0].M == 5


class TestReferenceCache:
    def test_cache_hit_is_bit_identical(self, tmp_path, monkeypatch):
        p = lorenz96()
        first = reference_solution(p, 0.3 / 40, tmp_path)
        files = list(tmp_path.glob("ref-*.npz"))
        assert len(files) == 1

        def boom(*a, **k):
            raise AssertionError("cache miss")

        monkeypatch.setattr(cli, "rk4_integrate", boom)
        again = reference_solution(p, 0.3 / 40, tmp_path)
        assert np.array_equal(first, again)

    def test_deleted_or_corrupt_cache_is_recomputed(self, tmp_path, capsys):
        p = lorenz96()
        first = reference_solution(p, 0.3 / 40, tmp_path)
        (path,) = tmp_path.glob("ref-*.npz")
        path.unlink()
        assert np.array_equal(reference_solution(p, 0.3 / 40, tmp_path), first)
        path.write_bytes(path.read_bytes()[:50])
        assert np.array_equal(reference_solution(p, 0.3 / 40, tmp_path), first)
        assert "recomputing" in capsys.readouterr().err
        assert not list(tmp_path.glob("*.tmp"))

    def test_key_depends_on_configuration(self, tmp_path):
        reference_solution(lorenz96(), 0.3 / 40, tmp_path)
        reference_solution(lorenz96(F=9.0), 0.3 / 40, tmp_path)
        reference_solution(lorenz96(), 0.3 / 80, tmp_path)
        assert len(list(tmp_path.glob("ref-*.npz"))) == 3
