"""CLI surface: exit codes, JSON-only stdout, end-to-end subcommands on the
bundled datasets."""

from __future__ import annotations

import json
import socket
import subprocess
import sys

import numpy as np
import pytest

from sen2pro.cli import main
from sen2pro.core import (
    SampleSet,
    load_eval_dataset,
    load_prob_embeddings,
    save_sample_sets,
)

from conftest import DATA_DIR


def _closed_port() -> int:
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()
    return port


def _json_lines(captured: str) -> list[dict]:
    return [json.loads(line) for line in captured.splitlines() if line]


@pytest.fixture(scope="module")
def emb_file(tmp_path_factory):
    """Bundled 50-sentence corpus embedded once (jobs=4) for reuse."""
    out = tmp_path_factory.mktemp("cli") / "emb.jsonl"
    code = main([
        "embed", "--config", str(DATA_DIR / "pipeline.json"),
        "--corpus", str(DATA_DIR / "corpus.txt"), "--out", str(out), "--jobs", "4",
    ])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def fewshot_emb(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli-probe")
    sentences: list[str] = []
    for name in ("fewshot_train.tsv", "fewshot_test.tsv"):
        for line in (DATA_DIR / name).read_text(encoding="utf-8").splitlines():
            if line.strip():
                sentences.append(line.split("\t")[0])
    corpus = base / "fewshot_corpus.txt"
    corpus.write_text("\n".join(dict.fromkeys(sentences)) + "\n", encoding="utf-8")
    out = base / "fewshot_emb.jsonl"
    assert main(["embed", "--corpus", str(corpus), "--out", str(out), "--jobs", "4"]) == 0
    return out


class TestEmbed:
    def test_serial_rerun_is_byte_identical(self, emb_file, tmp_path, capsys):
        out2 = tmp_path / "emb2.jsonl"
        code = main([
            "embed", "--config", str(DATA_DIR / "pipeline.json"),
            "--corpus", str(DATA_DIR / "corpus.txt"), "--out", str(out2),
        ])
        assert code == 0
        (status,) = _json_lines(capsys.readouterr().out)
        assert status["task"] == "embed" and status["n"] == 50
        # fresh serial run vs the module fixture's jobs=4 run
        assert out2.read_bytes() == emb_file.read_bytes()

    def test_missing_corpus_is_io_error(self, tmp_path, capsys):
        code = main(["embed", "--corpus", str(tmp_path / "nope.txt"),
                     "--out", str(tmp_path / "o.jsonl")])
        assert code == 2
        captured = capsys.readouterr()
        assert captured.out == ""  # errors never pollute stdout
        assert "i/o error" in captured.err

    def test_remote_without_endpoint_is_usage_problem(self, tmp_path, capsys):
        corpus = tmp_path / "c.txt"
        corpus.write_text("one line\n")
        code = main(["embed", "--backend", "remote", "--corpus", str(corpus),
                     "--out", str(tmp_path / "o.jsonl")])
        assert code == 1

    def test_unreachable_endpoint_is_transport_error(self, tmp_path, capsys):
        corpus = tmp_path / "c.txt"
        corpus.write_text("one line\n")
        code = main([
            "embed", "--backend", "remote",
            "--endpoint", f"http://127.0.0.1:{_closed_port()}",
            "--corpus", str(corpus), "--out", str(tmp_path / "o.jsonl"),
        ])
        assert code == 2

    def test_endpoint_env_var_is_honored(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("SEN2PRO_ENDPOINT", f"http://127.0.0.1:{_closed_port()}")
        corpus = tmp_path / "c.txt"
        corpus.write_text("one line\n")
        code = main(["embed", "--backend", "remote", "--corpus", str(corpus),
                     "--out", str(tmp_path / "o.jsonl")])
        assert code == 2  # transport failure proves the env endpoint was used


class TestEvalCommands:
    def test_eval_sts_bundled_pairs(self, emb_file, capsys):
        code = main(["eval-sts", "--embeddings", str(emb_file),
                     "--dataset", str(DATA_DIR / "sts_pairs_20.tsv")])
        assert code == 0
        records = _json_lines(capsys.readouterr().out)
        metrics = {r["metric"] for r in records}
        assert metrics == {"spearman", "pearson"}
        assert all(r["n"] == 20 for r in records)
        assert all(-1.0 <= r["value"] <= 1.0 for r in records)

    def test_eval_sts_stdout_is_stable(self, emb_file, capsys):
        argv = ["eval-sts", "--embeddings", str(emb_file),
                "--dataset", str(DATA_DIR / "sts_pairs_20.tsv")]
        assert main(argv) == 0
        first = capsys.readouterr().out
        assert main(argv) == 0
        assert capsys.readouterr().out == first

    def test_eval_rank_bundled_pools(self, tmp_path, capsys):
        # pool/query sentences are the dataset's own, not the shared corpus
        ds = load_eval_dataset(DATA_DIR / "rank_pools.jsonl", "rank_pools")
        sentences = sorted(
            {s for rec in ds.records for s in (rec.query, rec.positive, *rec.pool)}
        )
        corpus = tmp_path / "rank_corpus.txt"
        corpus.write_text("\n".join(sentences) + "\n", encoding="utf-8")
        emb = tmp_path / "rank_emb.jsonl"
        assert main(["embed", "--corpus", str(corpus), "--out", str(emb),
                     "--jobs", "4"]) == 0
        capsys.readouterr()
        code = main(["eval-rank", "--embeddings", str(emb),
                     "--dataset", str(DATA_DIR / "rank_pools.jsonl")])
        assert code == 0
        records = _json_lines(capsys.readouterr().out)
        by_metric = {r["metric"]: r["value"] for r in records}
        assert 0.0 < by_metric["mrr"] <= 1.0
        assert {"hits@1", "hits@3", "hits@10"} <= set(by_metric)

    def test_eval_analogy_bundled_quads(self, tmp_path, capsys):
        emb = tmp_path / "analogy_emb.jsonl"
        assert main(["embed", "--corpus", str(DATA_DIR / "analogy_corpus.txt"),
                     "--out", str(emb), "--jobs", "4"]) == 0
        capsys.readouterr()
        code = main(["eval-analogy", "--embeddings", str(emb),
                     "--dataset", str(DATA_DIR / "analogy_quads.tsv")])
        assert code == 0
        (record,) = _json_lines(capsys.readouterr().out)
        assert record["metric"] == "mean_abs_x" and record["value"] >= 0.0

    def test_malformed_dataset_is_validation_error(self, emb_file, tmp_path, capsys):
        bad = tmp_path / "bad.tsv"
        bad.write_text("not a scored pair\n")
        code = main(["eval-sts", "--embeddings", str(emb_file), "--dataset", str(bad)])
        assert code == 1


class TestDistance:
    def test_per_pair_distances(self, emb_file, tmp_path, capsys):
        corpus = (DATA_DIR / "corpus.txt").read_text(encoding="utf-8").splitlines()
        pairs = tmp_path / "pairs.tsv"
        pairs.write_text(f"{corpus[0]}\t{corpus[1]}\n{corpus[2]}\t{corpus[2]}\n")
        code = main(["distance", "--embeddings", str(emb_file), "--pairs", str(pairs)])
        assert code == 0
        (record,) = _json_lines(capsys.readouterr().out)
        assert record["n"] == 2
        assert record["distances"][0] > 0.0
        assert record["distances"][1] == 0.0  # self-pair

    def test_fixed_alpha_flag(self, emb_file, tmp_path, capsys):
        corpus = (DATA_DIR / "corpus.txt").read_text(encoding="utf-8").splitlines()
        pairs = tmp_path / "pairs.tsv"
        pairs.write_text(f"{corpus[0]}\t{corpus[1]}\n")
        code = main(["distance", "--embeddings", str(emb_file), "--pairs", str(pairs),
                     "--alpha-mode", "fixed", "--alpha", "0.03"])
        assert code == 0
        (record,) = _json_lines(capsys.readouterr().out)
        assert record["config"] == {"alpha_mode": "fixed", "fixed_alpha": 0.03}


class TestProbe:
    def test_both_feature_modes_report_accuracy(self, fewshot_emb, capsys):
        values = {}
        for mode in ("mu", "mu_sigma"):
            code = main([
                "probe", "--train", str(DATA_DIR / "fewshot_train.tsv"),
                "--test", str(DATA_DIR / "fewshot_test.tsv"),
                "--features", str(fewshot_emb), "--mode", mode,
            ])
            assert code == 0
            (record,) = _json_lines(capsys.readouterr().out)
            assert record["task"] == "probe"
            assert record["config"]["mode"] == mode
            assert record["config"]["classes"] == 4
            values[mode] = record["value"]
        assert all(0.0 <= v <= 1.0 for v in values.values())


class TestEstimate:
    def test_samples_to_estimates(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        sets = [
            SampleSet(sentence_id=str(i), mode="model", samples=rng.normal(size=(5, 4)))
            for i in range(3)
        ]
        src = tmp_path / "samples.jsonl"
        save_sample_sets(sets, src)
        out = tmp_path / "pe.jsonl"
        assert main(["estimate", "--samples", str(src), "--out", str(out)]) == 0
        (record,) = _json_lines(capsys.readouterr().out)
        assert record["n"] == 3
        assert len(load_prob_embeddings(out)) == 3


class TestTheory:
    def test_theorem2_reports_pass_fraction(self, capsys):
        code = main(["theory", "--what", "theorem2", "--k", "8",
                     "--trials", "50", "--seed", "7"])
        assert code == 0
        (record,) = _json_lines(capsys.readouterr().out)
        assert record["experiment"] == "theorem2"
        measurements = dict(map(tuple, record["measurements"]))
        assert 0.0 <= measurements["pass_fraction"] <= 1.0
        assert record["parameters"]["k"] == 8

    def test_tradeoff_small_grid(self, capsys):
        code = main(["theory", "--what", "tradeoff", "--k-grid", "8",
                     "--n", "40", "--trials", "2", "--seed", "0"])
        assert code == 0
        (record,) = _json_lines(capsys.readouterr().out)
        assert record["experiment"] == "estimator_tradeoff"


class TestSweep:
    def test_sweep_emits_one_record_per_n(self, tmp_path, capsys):
        corpus = tmp_path / "c.txt"
        corpus.write_text("ferry wakes slap the pilings\ngulls ride the thermal line\n"
                          "a diver checks her gauge\nropes salt stiff by noon\n")
        ds = tmp_path / "pairs.tsv"
        ds.write_text(
            "ferry wakes slap the pilings\tgulls ride the thermal line\t0.6\n"
            "a diver checks her gauge\tropes salt stiff by noon\t0.4\n"
            "ferry wakes slap the pilings\tropes salt stiff by noon\t0.2\n"
        )
        code = main(["sweep", "--corpus", str(corpus), "--dataset", str(ds),
                     "--n-grid", "2,4", "--seed", "3"])
        assert code == 0
        records = _json_lines(capsys.readouterr().out)
        assert [r["config"]["n_samples"] for r in records] == [2, 4]


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        assert main(["transmogrify"]) == 1
        assert capsys.readouterr().out == ""

    def test_unknown_flag(self, capsys):
        assert main(["embed", "--corpus", "x", "--out", "y", "--frobnicate"]) == 1

    def test_module_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "sen2pro", "theory", "--what", "theorem2",
             "--k", "4", "--trials", "10", "--seed", "1"],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        record = json.loads(proc.stdout)
        assert record["experiment"] == "theorem2"
