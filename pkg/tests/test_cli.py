import json

import numpy as np
import pytest
import yaml

from fcmwdtw.cli import DEFAULT_Q_GRID, grid_cells, main
from fcmwdtw.core import HyperParams, MultivariateSeries, read_series_csv, write_series_csv
from fcmwdtw.pipeline import run_once

FAST = ["-c", "3", "--max-iters", "15"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def report(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


def test_fit_writes_model_and_report(capsys, synthetic_csv, tmp_path):
    model = tmp_path / "m.json"
    doc = report(capsys, "fit", synthetic_csv, "--model", model, *FAST)
    assert model.exists()
    assert doc["iterations"] == len(doc["loss_history"]) >= 1
    assert np.isclose(sum(doc["lambdas"]), 1.0)
    assert doc["seconds"] >= 0


def test_fit_default_config_smoke(capsys, synthetic_csv, tmp_path):
    code, _, err = run(capsys, "fit", synthetic_csv, "--model", tmp_path / "m.json")
    assert code == 0, err


def test_same_seed_gives_identical_model_bytes(capsys, synthetic_csv, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        report(capsys, "fit", synthetic_csv, "--model", path, *FAST, "--seed", "7")
    assert a.read_bytes() == b.read_bytes()


def test_too_many_clusters_exits_2(capsys, tmp_path, rng):
    path = tmp_path / "short.csv"
    write_series_csv(MultivariateSeries(rng.random((20, 2))), path)
    code, _, err = run(capsys, "fit", path, "--model", tmp_path / "m.json", "-c", "10")
    assert code == 2 and "c=10" in err


def test_invalid_q_exits_2(capsys, synthetic_csv, tmp_path):
    code, _, err = run(capsys, "fit", synthetic_csv, "--model", tmp_path / "m.json", "-q", "0.5")
    assert code == 2 and "q" in err


def test_missing_input_exits_2(capsys, tmp_path):
    code, _, _ = run(capsys, "fit", tmp_path / "nope.csv", "--model", tmp_path / "m.json")
    assert code == 2


@pytest.fixture(scope="module")
def fitted(tmp_path_factory, synthetic_csv):
    path = tmp_path_factory.mktemp("model") / "model.json"
    assert main(["fit", str(synthetic_csv), "--model", str(path), *FAST]) == 0
    return path


def test_score_training_input(capsys, fitted, synthetic_csv, tmp_path):
    out = tmp_path / "s.csv"
    code, _, err = run(capsys, "score", fitted, synthetic_csv, "-o", out)
    assert code == 0, err
    lines = out.read_text().splitlines()
    assert lines[0] == "index,score,coverage,label"
    rows = [ln.split(",") for ln in lines[1:]]
    assert len(rows) == 400
    assert all(r[1] != "" and np.isfinite(float(r[1])) and int(r[2]) > 0 for r in rows)


def test_score_to_stdout(capsys, fitted, synthetic_csv):
    code, out, _ = run(capsys, "score", fitted, synthetic_csv)
    assert code == 0 and out.startswith("index,score,coverage")


def test_score_short_series_exits_2(capsys, fitted, tmp_path, rng):
    path = tmp_path / "tiny.csv"
    write_series_csv(MultivariateSeries(rng.random((5, 2))), path)
    code, _, _ = run(capsys, "score", fitted, path)
    assert code == 2


def test_score_dimension_mismatch(capsys, fitted, tmp_path, rng):
    path = tmp_path / "three.csv"
    write_series_csv(MultivariateSeries(rng.random((50, 3))), path)
    code, _, err = run(capsys, "score", fitted, path)
    assert code == 2
    assert "w=2" in err and "w=3" in err


def test_round_trip_scores_identical_bytes(capsys, synthetic_csv, tmp_path):
    from fcmwdtw.detector import score_series, write_scores_csv
    from fcmwdtw.pipeline import fit_series

    series = read_series_csv(synthetic_csv)
    model = fit_series(series, HyperParams(c=3, max_iters=10))
    direct = tmp_path / "direct.csv"
    write_scores_csv(score_series(model, series), direct)

    from fcmwdtw.fcm import save_model
    saved = tmp_path / "m.json"
    save_model(model, saved)
    via_cli = tmp_path / "cli.csv"
    assert main(["score", str(saved), str(synthetic_csv), "-o", str(via_cli)]) == 0
    assert direct.read_bytes() == via_cli.read_bytes()


def _scores_file(tmp_path, scores, labels=None):
    path = tmp_path / "scores.csv"
    head = "index,score,coverage" + (",label" if labels is not None else "")
    rows = [head]
    for i, s in enumerate(scores):
        rows.append(f"{i},{s},1" + (f",{labels[i]}" if labels is not None else ""))
    path.write_text("\n".join(rows) + "\n")
    return path


def test_evaluate_perfect(capsys, tmp_path):
    doc = report(capsys, "evaluate", _scores_file(tmp_path, [0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]))
    assert doc["roc_auc"] == 1.0 and doc["pr_auc"] == 1.0
    assert (doc["n_pos"], doc["n_neg"]) == (2, 2)


def test_evaluate_known_roc(capsys, tmp_path):
    doc = report(capsys, "evaluate", _scores_file(tmp_path, [0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]))
    assert doc["roc_auc"] == pytest.approx(0.75)


def test_evaluate_skips_uncovered_rows(capsys, tmp_path):
    path = tmp_path / "gaps.csv"
    path.write_text("index,score,coverage,label\n0,,0,1\n1,0.1,1,0\n2,0.9,1,1\n")
    assert report(capsys, "evaluate", path)["roc_auc"] == 1.0


def test_evaluate_without_labels_exits_2(capsys, tmp_path):
    code, _, err = run(capsys, "evaluate", _scores_file(tmp_path, [0.1, 0.2]))
    assert code == 2 and "label" in err


def test_evaluate_one_class_exits_2(capsys, tmp_path):
    code, _, _ = run(capsys, "evaluate", _scores_file(tmp_path, [0.1, 0.2, 0.3], [0, 0, 0]))
    assert code == 2


def test_cli_pipeline_matches_library(capsys, fitted, synthetic_csv, tmp_path):
    scores = tmp_path / "s.csv"
    assert main(["score", str(fitted), str(synthetic_csv), "-o", str(scores)]) == 0
    capsys.readouterr()
    doc = report(capsys, "evaluate", scores)
    _, _, ev = run_once(read_series_csv(synthetic_csv), HyperParams(c=3, max_iters=15))
    assert doc["roc_auc"] == ev.roc_auc and doc["pr_auc"] == ev.pr_auc


def test_grid_single_cell_matches_manual(capsys, synthetic_csv):
    doc = report(capsys, "grid", synthetic_csv, "--c-grid", "3", "--m-grid", "1.7", "--q-grid", "3",
                 "--max-iters", "15")
    assert doc["cells"] == 1
    row = doc["results"][0]
    _, _, ev = run_once(read_series_csv(synthetic_csv), HyperParams(c=3, m=1.7, q=3.0, max_iters=15))
    assert row["roc_auc"] == ev.roc_auc and row["pr_auc"] == ev.pr_auc and row["best"]


def test_grid_over_c_beats_single_run(capsys, synthetic_csv):
    doc = report(capsys, "grid", synthetic_csv, "--c-grid", "2", "3", "5", "--m-grid", "1.7",
                 "--q-grid", "3", "--max-iters", "15")
    rocs = [r["roc_auc"] for r in doc["results"]]
    assert rocs == sorted(rocs, reverse=True)
    assert [r["best"] for r in doc["results"]] == [True, False, False]
    _, _, single = run_once(read_series_csv(synthetic_csv), HyperParams(c=3, max_iters=15))
    assert rocs[0] >= single.roc_auc


def test_grid_parallel_matches_sequential(capsys, synthetic_csv):
    argv = ["grid", synthetic_csv, "--c-grid", "2", "3", "--m-grid", "1.7", "--q-grid", "3",
            "--max-iters", "10"]
    seq = report(capsys, *argv)
    par = report(capsys, *argv, "--jobs", "2")
    assert seq == par


def test_q_grid_excludes_unit_interval():
    assert not any(0 <= q <= 1 for q in DEFAULT_Q_GRID)
    cells = grid_cells([3], [1.7], [-2, 0, 0.5, 1, 2], 1e-4, 10)
    assert sorted(p.q for p in cells) == [-2.0, 2.0]


def test_grid_needs_labels(capsys, tmp_path, rng):
    path = tmp_path / "nolab.csv"
    write_series_csv(MultivariateSeries(rng.random((60, 2))), path)
    code, _, _ = run(capsys, "grid", path, "--c-grid", "2", "--m-grid", "1.7", "--q-grid", "3")
    assert code == 2


def test_bench_single_size(capsys):
    doc = report(capsys, "bench", "--sizes", "8", "-n", "20", "--iters", "2", "--repeats", "1")
    assert len(doc["rows"]) == 1 and doc["loglog_slope"] is None


def test_bench_time_linear_in_n():
    from fcmwdtw.bench import run_bench, time_fit

    run_bench([8], n=10, iters=1, repeats=1)
    small = time_fit(200, 32, iters=5, repeats=5)
    large = time_fit(400, 32, iters=5, repeats=5)
    ratio = large.seconds_per_iteration / small.seconds_per_iteration
    assert 1.4 <= ratio <= 2.6, ratio


def test_synth_writes_labelled_csv(capsys, tmp_path):
    path = tmp_path / "syn.csv"
    doc = report(capsys, "synth", path, "-n", "300", "--anomalies", "2", "--seed", "4")
    series = read_series_csv(path)
    assert series.n == 300 and series.w == 2
    assert int(series.labels.sum()) == doc["anomalous_points"] > 0


def test_config_file_sets_defaults_and_flags_win(capsys, synthetic_csv, tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(yaml.safe_dump({"c": 2, "max-iters": 4, "epsilon": 1e-300}))
    doc = report(capsys, "fit", synthetic_csv, "--model", tmp_path / "a.json", "--config", cfg)
    assert doc["iterations"] == 4
    assert json.loads((tmp_path / "a.json").read_text())["c"] == 2
    doc = report(capsys, "fit", synthetic_csv, "--model", tmp_path / "b.json", "--config", cfg,
                 "--max-iters", "2")
    assert doc["iterations"] == 2


def test_config_unknown_key_rejected(capsys, synthetic_csv, tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("colour: red\n")
    with pytest.raises(SystemExit) as exc:
        main(["fit", str(synthetic_csv), "--model", str(tmp_path / "m.json"), "--config", str(cfg)])
    assert exc.value.code == 2


def test_thread_override(capsys, synthetic_csv, tmp_path, monkeypatch):
    monkeypatch.setenv("FCMWDTW_NUM_THREADS", "1")
    code, _, err = run(capsys, "fit", synthetic_csv, "--model", tmp_path / "m.json", *FAST)
    assert code == 0, err
    monkeypatch.setenv("FCMWDTW_NUM_THREADS", "lots")
    code, _, _ = run(capsys, "fit", synthetic_csv, "--model", tmp_path / "m.json", *FAST)
    assert code == 2
