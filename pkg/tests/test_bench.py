import json
import os

import numpy as np
import pytest
from scipy import sparse

from acfw import SolverConfig, run
from acfw.core import CSV_FIELDS
from acfw.bench.cli import main
from acfw.bench.config import (DATA_DIR_ENV, ConfigError, ExperimentConfig, build_config,
                               expand_grid, format_config, load_config, parse_pairs,
                               resolve_data_path)
from acfw.bench.io import TIME_FIELDS, emit_csv, emit_plot_data, format_csv, parse_csv_text, read_csv
from acfw.bench.libsvm import (LibSVMFormatError, SparseDesign, format_libsvm, parse_libsvm,
                               parse_libsvm_lines, write_libsvm)
from acfw.bench.runner import run_experiment
from acfw.bench.synthetic import dictlearn, dictlearn_data, gen_synthetic, quadratic_simplex, quadratic_span


# --- LIBSVM ---

def test_libsvm_line_examples():
    des = parse_libsvm_lines(["1 3:0.5 7:-2"])
    assert des.labels.tolist() == [1.0]
    assert des.entries == [[(2, 0.5), (6, -2.0)]]
    assert des.n_cols == 7
    des = parse_libsvm_lines(["-1 1:1", "+1 2:3"])
    assert des.labels.tolist() == [0.0, 1.0]


def test_libsvm_two_valued_labels():
    # smaller of two observed labels maps to 0
    assert parse_libsvm_lines(["1 1:1", "2 1:1"]).labels.tolist() == [0.0, 1.0]


@pytest.mark.parametrize("lines,lineno", [
    (["1 1:1", "x 2:1"], 2),
    (["1 1:a"], 1),
    (["1 3:1 2:1"], 1),
    (["1 0:1"], 1),
    (["1 1:1", "1 12"], 2),
])
def test_libsvm_errors_report_line(lines, lineno):
    with pytest.raises(LibSVMFormatError) as err:
        parse_libsvm_lines(lines)
    assert err.value.lineno == lineno
    assert f"line {lineno}" in str(err.value)


def test_libsvm_empty_file(tmp_path):
    path = tmp_path / "empty.svm"
    path.write_text("# only a comment\n\n")
    with pytest.raises(LibSVMFormatError):
        parse_libsvm(path)


def test_libsvm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    for trial in range(5):
        mat = sparse.random(12, 9, density=0.3, random_state=trial, format="csr")
        mat.data = rng.standard_normal(mat.nnz)
        labels = rng.integers(0, 2, 12).astype(float)
        labels[:2] = [0.0, 1.0]
        des = SparseDesign.from_matrix(mat, labels)
        path = tmp_path / f"d{trial}.svm"
        write_libsvm(des, path)
        back = parse_libsvm(path, n_cols=9)
        assert back == des
        assert np.array_equal(back.to_csr().toarray(), mat.toarray())


def test_sparse_design_invariants():
    with pytest.raises(ValueError):
        SparseDesign(1, 3, [[(1, 1.0), (1, 2.0)]], np.ones(1))
    with pytest.raises(ValueError):
        SparseDesign(1, 3, [[(3, 1.0)]], np.ones(1))


def test_libsvm_format_uses_signed_labels():
    des = SparseDesign(2, 2, [[(0, 1.5)], []], np.array([1.0, 0.0]))
    assert format_libsvm(des) == "+1 1:1.5\n-1\n"


# --- synthetic ---

@pytest.mark.parametrize("kind", ["quadratic-simplex", "quadratic-l2ball", "quadratic-span", "logistic-l1",
                                  "logistic-span", "huber-nuclear", "dictlearn"])
def test_synthetic_deterministic(kind):
    a, b = gen_synthetic(kind, 3), gen_synthetic(kind, 3)
    x = np.random.default_rng(0).standard_normal(a.objective.dimension) * 0.1
    assert a.objective.value(x) == b.objective.value(x)
    assert np.array_equal(a.objective.gradient(x), b.objective.gradient(x))
    c = gen_synthetic(kind, 4)
    assert c.objective.value(x) != a.objective.value(x)


def test_gen_synthetic_errors():
    with pytest.raises(ValueError):
        gen_synthetic("nope")
    with pytest.raises(ValueError):
        gen_synthetic("quadratic-simplex", d=0)


def test_dictlearn_unit_columns_and_scaling():
    A, B, C = dictlearn_data(1)
    assert np.allclose(np.linalg.norm(B, axis=0), 1.0, atol=1e-12, rtol=0)
    assert np.allclose(A, B @ C)
    assert np.linalg.matrix_rank(C) == 5


def test_dictlearn_full_scale_constructible():
    inst = dictlearn(0, full_scale=True)
    assert inst.data["A"].shape == (500, 1000)
    assert inst.dictionary.dim == 500 * 200 + 200 * 1000


# --- config ---

def test_config_defaults_and_overrides(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("# comment\nproblem = logistic-l1\nmethod = B\nsubroutine = AFW\nmax_iters = 20\n")
    cfg = load_config(path, ["seed=4", "gap_tol=1e-3"])
    assert (cfg.problem, cfg.method, cfg.subroutine, cfg.seed, cfg.max_iters) == ("logistic-l1", "B", "AFW", 4, 20)
    assert cfg.gap_tol == 1e-3 and cfg.eta == 1.5 and cfg.lam == 0.01


def test_config_format_round_trip():
    cfg = ExperimentConfig(problem="huber-nuclear", seed=9, max_seconds=5.0, beta=3.0)
    raw = parse_pairs(format_config(cfg).splitlines())
    assert build_config(raw) == cfg


@pytest.mark.parametrize("raw", [
    {"problem": "quadratic-simplex", "subroutine": "MP"},
    {"problem": "quadratic-span", "subroutine": "CFW"},
    {"problem": "huber-nuclear", "subroutine": "PFW"},
    {"method": "OPEN", "subroutine": "AFW"},
    {"problem": "dictlearn", "method": "FIXED"},
    {"problem": "quadratic-simplex", "data_path": "x.svm"},
    {"eta": "2.5"},
    {"seed": "abc"},
    {"colour": "red"},
    {"method": "XYZ"},
])
def test_config_rejects(raw):
    with pytest.raises(ConfigError):
        build_config(raw)


def test_config_parse_errors():
    with pytest.raises(ConfigError, match=":2:"):
        parse_pairs(["seed = 1", "no equals sign"])
    with pytest.raises(ConfigError, match="duplicate"):
        parse_pairs(["seed = 1", "seed = 2"])


def test_expand_grid():
    combos = expand_grid({"seed": "0, 1", "subroutine": "CFW,AFW", "problem": "quadratic-simplex"})
    assert len(combos) == 4
    assert {(c["seed"], c["subroutine"]) for c in combos} == {("0", "CFW"), ("0", "AFW"), ("1", "CFW"), ("1", "AFW")}


def test_data_dir_env(tmp_path, monkeypatch):
    (tmp_path / "a.svm").write_text("1 1:1\n")
    monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path))
    assert resolve_data_path("a.svm") == os.path.join(str(tmp_path), "a.svm")
    assert resolve_data_path("missing.svm") == "missing.svm"


def test_run_experiment_reads_libsvm(tmp_path, monkeypatch):
    rng = np.random.default_rng(1)
    mat = rng.standard_normal((30, 4))
    des = SparseDesign.from_matrix(mat, (mat[:, 0] > 0).astype(float))
    write_libsvm(des, tmp_path / "toy.svm")
    monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path))
    cfg = ExperimentConfig(problem="logistic-l1", data_path="toy.svm", max_iters=50)
    trace, summary = run_experiment(cfg)
    assert trace.x.shape == (4,) and summary["success"]
    with pytest.raises(FileNotFoundError):
        run_experiment(ExperimentConfig(problem="logistic-l1", data_path="nope.svm"))


# --- CSV / plot data ---

def _short_trace(iters=3):
    inst = quadratic_simplex(0, d=10, kappa=3)
    return run(inst.objective, inst.dictionary, "CFW", SolverConfig(max_iters=iters, gap_tol=0.0))


def test_csv_header_and_line_count(tmp_path):
    tr = _short_trace(3)
    path = tmp_path / "t.csv"
    emit_csv(tr, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,f,gap,gamma,gamma_max,L_t,accepted,in_I_eta,in_G,n_f,n_g,n_lmo,elapsed_s"
    assert len(lines) == 4


def test_csv_infinity_token():
    inst = quadratic_span(0, d=5)
    tr = run(inst.objective, inst.dictionary, "MP", SolverConfig(max_iters=3, gap_tol=0.0))
    rows = format_csv(tr).splitlines()[1:]
    col = CSV_FIELDS.index("gamma_max")
    assert all(r.split(",")[col] == "inf" for r in rows)
    back = parse_csv_text(format_csv(tr))
    assert np.isinf(back.column("gamma_max")).all()


def test_csv_round_trip(tmp_path):
    tr = _short_trace(40)
    path = tmp_path / "t.csv"
    emit_csv(tr, path)
    back = read_csv(path)
    assert len(back.records) == len(tr.records)
    for a, b in zip(tr.records, back.records):
        for name in CSV_FIELDS:
            assert getattr(a, name) == getattr(b, name)
    assert format_csv(back) == format_csv(tr)


def test_csv_rejects_empty_and_bad_header(tmp_path):
    tr = _short_trace(0)
    tr.records.clear()
    with pytest.raises(ValueError):
        emit_csv(tr, tmp_path / "x.csv")
    with pytest.raises(ValueError):
        parse_csv_text("a,b\n1,2\n")


def test_plot_data_groups_by_label(tmp_path):
    inst = quadratic_simplex(0, d=10)
    traces = [run(inst.objective, inst.dictionary, s, SolverConfig(max_iters=5)) for s in ("CFW", "PFW", "CFW")]
    path = tmp_path / "plot.json"
    emit_plot_data(traces, path)
    data = json.loads(path.read_text())
    assert sorted(data) == ["AC-CFW", "AC-PFW"]
    assert len(data["AC-CFW"]) == 2
    assert set(data["AC-PFW"][0]) == {"t", "elapsed_s", "gap", "f", "n_f"}


# --- runs ---

def test_run_experiment_determinism():
    cfg = ExperimentConfig(problem="logistic-l1", subroutine="PFW", max_iters=200, seed=2)
    a, _ = run_experiment(cfg)
    b, _ = run_experiment(cfg)
    assert format_csv(a, exclude=TIME_FIELDS) == format_csv(b, exclude=TIME_FIELDS)


def test_quadratic_simplex_reaches_gap():
    trace, summary = run_experiment(ExperimentConfig(problem="quadratic-simplex", max_iters=5000, gap_tol=1e-6))
    assert summary["final_gap"] <= 1e-6
    assert summary["success"]
    assert set(summary) >= {"final_gap", "n_f", "n_g", "n_lmo", "elapsed_s"}


def test_ac_beats_open_loop_at_equal_budget():
    kw = dict(problem="quadratic-simplex", max_iters=1000, gap_tol=0.0)
    ac, _ = run_experiment(ExperimentConfig(method="AC", **kw))
    ol, _ = run_experiment(ExperimentConfig(method="OPEN", **kw))
    assert ac.final_gap <= ol.final_gap


@pytest.mark.parametrize("method,sub,problem", [
    ("AC", "MP", "logistic-span"), ("B", "CFW", "huber-nuclear"), ("FIXED", "AFW", "quadratic-simplex"),
    ("AC", "CFW", "dictlearn"), ("OPEN", "CFW", "quadratic-l2ball"),
])
def test_run_experiment_combinations(method, sub, problem):
    cfg = ExperimentConfig(problem=problem, method=method, subroutine=sub, max_iters=30,
                           L=10.0 if problem == "dictlearn" and method == "FIXED" else None)
    trace, summary = run_experiment(cfg)
    assert summary["label"] == f"{method}-{sub}"
    assert summary["success"], summary["audit"]


# --- CLI ---

def test_cli_run_writes_outputs(tmp_path, capsys):
    cfg = tmp_path / "run.txt"
    cfg.write_text("problem = quadratic-simplex\nsubroutine = AFW\nmax_iters = 100\n")
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--set", "seed=1", "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == {"trace.csv", "summary.json", "config.txt"}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["label"] == "AC-AFW" and summary["seed"] == 1
    assert "AC-AFW on quadratic-simplex" in capsys.readouterr().out
    # the saved config replays
    assert load_config(out / "config.txt").seed == 1


def test_cli_stdout_csv_deterministic(capsys):
    argv = ["run", "--set", "problem=huber-nuclear", "--set", "max_iters=30", "--stdout-csv"]
    outs = []
    for _ in range(2):
        assert main(argv) == 0
        text = capsys.readouterr().out
        outs.append("\n".join(",".join(line.split(",")[:-1]) for line in text.splitlines()))
    assert outs[0] == outs[1]
    assert outs[0].startswith("t,f,gap")


def test_cli_config_errors(tmp_path, capsys):
    assert main(["run", "--set", "problem=quadratic-simplex", "--set", "subroutine=MP"]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.txt")]) == 2


def test_cli_sweep(tmp_path, capsys):
    grid = tmp_path / "grid.txt"
    grid.write_text("problem = quadratic-simplex\nsubroutine = CFW, PFW\nseed = 0, 1\nmax_iters = 50\n")
    out = tmp_path / "sweep"
    assert main(["sweep", "--grid", str(grid), "--out", str(out), "--workers", "2"]) == 0
    runs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert len(runs) == 4 and runs[0].startswith("0000-AC-CFW-quadratic-simplex-s0")
    plots = json.loads((out / "plot.json").read_text())
    assert sorted(plots) == ["AC-CFW", "AC-PFW"]
    assert len(json.loads((out / "sweep.json").read_text())) == 4


def test_cli_sweep_fails_fast_on_bad_combo(tmp_path):
    grid = tmp_path / "grid.txt"
    grid.write_text("problem = quadratic-simplex\nsubroutine = CFW, MP\n")
    assert main(["sweep", "--grid", str(grid), "--out", str(tmp_path / "o")]) == 2
    assert not (tmp_path / "o").exists()


@pytest.mark.parametrize("problem", ["quadratic-simplex", "logistic-l1", "huber-nuclear", "dictlearn"])
def test_cli_gradcheck(problem, capsys):
    assert main(["gradcheck", "--problem", problem, "--points", "3"]) == 0
    assert "ok" in capsys.readouterr().out.splitlines()[-1]


def test_cli_audit(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["run", "--set", "problem=quadratic-simplex", "--set", "subroutine=PFW",
                 "--set", "max_iters=200", "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["audit", "--trace", str(out / "trace.csv")]) == 0
    text = capsys.readouterr().out
    assert "lipschitz_ceiling" in text and "FAIL" not in text
    # tamper with one L_t: the ceiling check must catch it
    lines = (out / "trace.csv").read_text().splitlines()
    cols = lines[5].split(",")
    cols[CSV_FIELDS.index("L_t")] = "1e6"
    lines[5] = ",".join(cols)
    (out / "trace.csv").write_text("\n".join(lines) + "\n")
    assert main(["audit", "--trace", str(out / "trace.csv")]) == 1
