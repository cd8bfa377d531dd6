import pytest

from rulebayes.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main, read_trace

SMALL = """
[experiment]
name = {name}
seed = {seed}
[evolution]
iterations = 150
[sampler]
n_chains = 2
n_iterations = 1200
burn_in = 400
thinning = 8
"""


def small_config(tmp_path, name="linear", seed=0, extra=""):
    p = tmp_path / f"{name}_{seed}.ini"
    p.write_text(SMALL.format(name=name, seed=seed) + extra)
    return p


def test_reproduce_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["reproduce", "--config", str(small_config(tmp_path)), "--out", str(out)]) == EXIT_OK
    names = {p.name for p in out.iterdir()}
    for expected in ("metrics.csv", "metrics.txt", "comparison.txt", "run_record.txt", "config.ini", "evolution.txt"):
        assert expected in names
    assert "rules_proportion.txt" in names and "rules_distance.txt" in names
    traces = sorted(out.glob("trace_*_chain*.csv"))
    assert len(traces) == 6
    assert "No rules" in capsys.readouterr().out
    tr = read_trace(sorted(out.glob("trace_no_rules_chain*.csv")))
    assert tr.n_chains == 2 and tr.n_draws == 100


def test_reproduce_is_deterministic_and_metrics_recompute(tmp_path):
    cfg = small_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["reproduce", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    for f in sorted(a.glob("trace_*.csv")) + [a / "metrics.csv"]:
        assert f.read_bytes() == (b / f.name).read_bytes(), f.name
    before = (a / "metrics.csv").read_bytes()
    assert main(["metrics", "--config", str(cfg), "--out", str(a)]) == EXIT_OK
    assert (a / "metrics.csv").read_bytes() == before


def test_evolve_then_fit(tmp_path):
    cfg = small_config(tmp_path, seed=2)
    rules = tmp_path / "rules"
    assert main(["evolve", "--config", str(cfg), "--out", str(rules)]) == EXIT_OK
    assert (rules / "rules_proportion.txt").is_file()
    fit = tmp_path / "fit"
    assert main(["fit", "--config", str(cfg), "--rules", str(rules), "--out", str(fit)]) == EXIT_OK
    assert (fit / "summary_pr_rules.csv").is_file()


def test_fit_without_rules_is_config_error(tmp_path):
    assert main(["fit", "--config", str(small_config(tmp_path)), "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["reproduce", "--config", str(tmp_path / "none.ini"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_balance_requires_powerplant(tmp_path):
    argv = ["reproduce", "--config", str(small_config(tmp_path)), "--balance", "--out", str(tmp_path / "o")]
    assert main(argv) == EXIT_CONFIG


def test_bad_data_file_is_runtime_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("AT,V,AP,RH,PE\n30,1,2,3,oops\n")
    cfg = small_config(tmp_path, name="powerplant", extra=f"[data]\npath = {bad}\n")
    assert main(["reproduce", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_RUNTIME


def test_usage_errors_exit_through_argparse():
    with pytest.raises(SystemExit) as info:
        main(["reproduce", "quadratic"])
    assert info.value.code == 2
