"""Conversion pipeline, sweeps, plan export, and CLI behavior."""

from __future__ import annotations

import json

import numpy as np
import pytest

import otalign.pipeline as pipeline
from otalign import (
    ConvertConfig,
    EmbeddingMatrix,
    Marginals,
    convert,
    cosine_cost,
    export_plan,
    frechet_distance,
    gaussian_stats,
    load_embeddings,
    save_embeddings,
    solve_entropic,
    sweep,
    transport_cost,
)
from otalign.cli import main
from otalign.errors import ConfigError

from conftest import two_cloud_instance


@pytest.fixture(autouse=True)
def _fresh_cache():
    pipeline.clear_coupling_cache()
    yield
    pipeline.clear_coupling_cache()


@pytest.fixture()
def cloud_files(tmp_path):
    src, tgt = two_cloud_instance(seed=42, m=120, n=140)
    sp, tp = tmp_path / "src.emb", tmp_path / "tgt.emb"
    save_embeddings(src, sp)
    save_embeddings(tgt, tp)
    return sp, tp, src, tgt


def _cfg(sp, tp, out, **kw) -> ConvertConfig:
    return ConvertConfig(source=sp, target=tp, output=out, **kw)


class TestConvert:
    def test_knn_k1_self_conversion_is_identity(self, tmp_path):
        rng = np.random.default_rng(60)
        m = EmbeddingMatrix(rng.normal(size=(10, 4)).astype(np.float32))
        sp = tmp_path / "x.emb"
        out = tmp_path / "out.emb"
        save_embeddings(m, sp)
        convert(_cfg(sp, sp, out, method="knn", k=1))
        np.testing.assert_allclose(load_embeddings(out).data, m.data, atol=1e-6)

    def test_ot_bar_full_k_matches_direct_projection(self, cloud_files, tmp_path):
        sp, tp, src, tgt = cloud_files
        out = tmp_path / "out.emb"
        convert(_cfg(sp, tp, out, method="ot-bar", k=tgt.rows, epsilon=0.05, tol=1e-10))
        coup = solve_entropic(
            cosine_cost(src, tgt),
            Marginals.uniform(src.rows, tgt.rows),
            epsilon=0.05,
            tol=1e-10,
        )
        p = 1.0 / src.rows
        want = (coup.gamma / p) @ tgt.data.astype(np.float64)
        np.testing.assert_allclose(load_embeddings(out).data, want, atol=1e-6)

    def test_ave_and_bar_k1_write_identical_files(self, cloud_files, tmp_path):
        sp, tp, _, _ = cloud_files
        out_a, out_b = tmp_path / "a.emb", tmp_path / "b.emb"
        convert(_cfg(sp, tp, out_a, method="ot-ave", k=1))
        convert(_cfg(sp, tp, out_b, method="ot-bar", k=1))
        assert out_a.read_bytes() == out_b.read_bytes()

    def test_deterministic_across_runs(self, cloud_files, tmp_path):
        sp, tp, _, _ = cloud_files
        out1, out2 = tmp_path / "r1.emb", tmp_path / "r2.emb"
        for out in (out1, out2):
            pipeline.clear_coupling_cache()
            convert(_cfg(sp, tp, out, method="ot-bar", k=4, threads=1))
        assert out1.read_bytes() == out2.read_bytes()

    def test_report_written_with_solver_diagnostics(self, cloud_files, tmp_path):
        sp, tp, _, _ = cloud_files
        out = tmp_path / "out.emb"
        rep = tmp_path / "rep.json"
        convert(_cfg(sp, tp, out, method="ot-ave", k=4, report=rep))
        report = json.loads(rep.read_text())
        assert report["method"] == "ot-ave"
        assert report["iterations"] >= 1
        assert report["marginal_error"] <= 1e-6
        assert np.isfinite(report["transport_cost"])

    def test_knn_report_flags_unused_solver_params(self, cloud_files, tmp_path):
        sp, tp, _, _ = cloud_files
        out = tmp_path / "out.emb"
        rep = tmp_path / "rep.json"
        convert(_cfg(sp, tp, out, method="knn", k=4, epsilon=0.5, report=rep))
        report = json.loads(rep.read_text())
        assert "epsilon" in report["unused_params"]

    def test_coupling_solved_once_for_repeat_configs(self, cloud_files, tmp_path, monkeypatch):
        sp, tp, _, _ = cloud_files
        calls = []
        real = pipeline.solve_entropic

        def counting(*args, **kwargs):
            calls.append(1)
            return real(*args, **kwargs)

        monkeypatch.setattr(pipeline, "solve_entropic", counting)
        convert(_cfg(sp, tp, tmp_path / "a.emb", method="ot-ave", k=2))
        convert(_cfg(sp, tp, tmp_path / "b.emb", method="ot-bar", k=5))
        assert len(calls) == 1

    def test_bad_method_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            _cfg(tmp_path / "a", tmp_path / "b", tmp_path / "c", method="nearest")

    def test_bad_k_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            _cfg(tmp_path / "a", tmp_path / "b", tmp_path / "c", method="knn", k=0)


class TestSweep:
    def test_k1_ot_methods_report_equal_frechet(self, cloud_files):
        sp, tp, _, _ = cloud_files
        cfg = _cfg(sp, tp, sp.with_suffix(".unused"), method="knn")
        report = sweep(cfg, ["ot-ave", "ot-bar"], [1])
        vals = [r.frechet for r in report.records]
        assert vals[0] == vals[1]

    def test_alignment_improves_over_identity_baseline(self, cloud_files):
        sp, tp, src, tgt = cloud_files
        cfg = _cfg(sp, tp, sp.with_suffix(".unused"), method="knn")
        report = sweep(cfg, ["knn", "ot-ave", "ot-bar"], [4])
        baseline = frechet_distance(gaussian_stats(src), gaussian_stats(tgt))
        for rec in report.records:
            assert rec.frechet < baseline

    def test_record_count_and_skips(self, cloud_files):
        sp, tp, _, tgt = cloud_files
        cfg = _cfg(sp, tp, sp.with_suffix(".unused"), method="knn")
        ks = [1, 3, 4, 5, 10, 1000]
        report = sweep(cfg, ["knn", "ot-ave", "ot-bar"], ks)
        assert len(report.records) == len(ks) * 3
        skipped = [r for r in report.records if r.skipped]
        assert len(skipped) == 3
        assert all(r.k == 1000 for r in skipped)

    def test_sweep_matches_independent_convert(self, cloud_files, tmp_path):
        sp, tp, _, tgt = cloud_files
        cfg = _cfg(sp, tp, sp.with_suffix(".unused"), method="knn")
        report = sweep(cfg, ["ot-bar"], [4])
        out = tmp_path / "solo.emb"
        pipeline.clear_coupling_cache()
        convert(_cfg(sp, tp, out, method="ot-bar", k=4))
        solo = frechet_distance(
            gaussian_stats(load_embeddings(out)), gaussian_stats(tgt)
        )
        assert report.records[0].frechet == pytest.approx(solo, abs=1e-9)

    def test_report_files(self, cloud_files, tmp_path):
        sp, tp, _, _ = cloud_files
        cfg = _cfg(sp, tp, sp.with_suffix(".unused"), method="knn")
        report = sweep(cfg, ["knn", "ot-bar"], [1, 3])
        jsonl = tmp_path / "rep.jsonl"
        csv = tmp_path / "rep.csv"
        report.write_jsonl(jsonl)
        report.write_csv(csv)
        lines = jsonl.read_text().strip().splitlines()
        assert len(lines) == 4
        first = json.loads(lines[0])
        assert first["method"] == "knn" and first["k"] == 1
        assert csv.read_text().count("\n") == 5  # header + 4 records


class TestExportPlan:
    def test_single_cell_plan_file(self, tmp_path):
        m = EmbeddingMatrix(np.array([[2.0, 3.0]], dtype=np.float32))
        sp, out = tmp_path / "m.emb", tmp_path / "plan.emb"
        save_embeddings(m, sp)
        export_plan(_cfg(sp, sp, out, method="ot-bar"))
        plan = load_embeddings(out)
        np.testing.assert_array_equal(plan.data, [[1.0]])

    def test_row_sums_are_uniform(self, cloud_files, tmp_path):
        sp, tp, src, _ = cloud_files
        out = tmp_path / "plan.emb"
        export_plan(_cfg(sp, tp, out, method="ot-bar", tol=1e-8))
        plan = load_embeddings(out).data.astype(np.float64)
        np.testing.assert_allclose(plan.sum(axis=1), 1.0 / src.rows, atol=1e-7)

    def test_round_trip_preserves_transport_cost(self, cloud_files, tmp_path):
        sp, tp, src, tgt = cloud_files
        out = tmp_path / "plan.emb"
        cfg = _cfg(sp, tp, out, method="ot-bar")
        export_plan(cfg)
        cost = cosine_cost(src, tgt)
        coup = solve_entropic(cost, Marginals.uniform(src.rows, tgt.rows), epsilon=cfg.epsilon)
        from otalign import Coupling

        reloaded = Coupling(
            load_embeddings(out).data.astype(np.float64),
            epsilon=cfg.epsilon,
            iterations=coup.iterations,
            marginal_error=coup.marginal_error,
        )
        a = transport_cost(coup, cost)
        b = transport_cost(reloaded, cost)
        assert b == pytest.approx(a, rel=1e-6)


class TestCli:
    def test_convert_and_inspect(self, cloud_files, tmp_path, capsys):
        sp, tp, _, _ = cloud_files
        out = tmp_path / "out.emb"
        rc = main(
            [
                "convert",
                "--source", str(sp),
                "--target", str(tp),
                "--output", str(out),
                "--method", "ot-bar",
                "--k", "4",
                "--threads", "1",
            ]
        )
        assert rc == 0
        assert main(["inspect", str(out)]) == 0
        capsys.readouterr()

    def test_inspect_reports_shape(self, cloud_files, capsys):
        sp, _, src, _ = cloud_files
        assert main(["inspect", str(sp)]) == 0
        info = json.loads(capsys.readouterr().out)
        assert info["rows"] == src.rows
        assert info["dims"] == src.dims

    def test_fad_identical_files_is_zero(self, cloud_files, capsys):
        sp, _, _, _ = cloud_files
        assert main(["fad", str(sp), str(sp)]) == 0
        assert float(capsys.readouterr().out.strip()) <= 1e-6

    def test_sweep_writes_reports(self, cloud_files, tmp_path):
        sp, tp, _, _ = cloud_files
        rep = tmp_path / "rep.jsonl"
        rc = main(
            [
                "sweep",
                "--source", str(sp),
                "--target", str(tp),
                "--methods", "knn,ot-bar",
                "--ks", "1,4",
                "--report", str(rep),
            ]
        )
        assert rc == 0
        assert rep.exists() and rep.with_suffix(".csv").exists()

    def test_plan_subcommand(self, cloud_files, tmp_path):
        sp, tp, _, _ = cloud_files
        out = tmp_path / "plan.emb"
        rc = main(["plan", "--source", str(sp), "--target", str(tp), "--output", str(out)])
        assert rc == 0
        assert out.exists()

    def test_missing_file_exits_3(self, tmp_path):
        rc = main(["inspect", str(tmp_path / "missing.emb")])
        assert rc == 3

    def test_corrupt_file_exits_3(self, tmp_path):
        bad = tmp_path / "bad.emb"
        bad.write_bytes(b"not an emb1 file at all")
        assert main(["inspect", str(bad)]) == 3

    def test_bad_k_exits_2(self, cloud_files, tmp_path):
        sp, tp, _, _ = cloud_files
        rc = main(
            [
                "convert",
                "--source", str(sp),
                "--target", str(tp),
                "--output", str(tmp_path / "o.emb"),
                "--method", "knn",
                "--k", "0",
            ]
        )
        assert rc == 2

    def test_k_above_target_size_exits_2(self, cloud_files, tmp_path):
        sp, tp, _, tgt = cloud_files
        rc = main(
            [
                "convert",
                "--source", str(sp),
                "--target", str(tp),
                "--output", str(tmp_path / "o.emb"),
                "--method", "knn",
                "--k", str(tgt.rows + 1),
            ]
        )
        assert rc == 2

    def test_dim_mismatch_exits_3(self, tmp_path):
        rng = np.random.default_rng(61)
        a = tmp_path / "a.emb"
        b = tmp_path / "b.emb"
        save_embeddings(EmbeddingMatrix(rng.normal(size=(4, 3)).astype(np.float32)), a)
        save_embeddings(EmbeddingMatrix(rng.normal(size=(4, 5)).astype(np.float32)), b)
        rc = main(
            [
                "convert",
                "--source", str(a),
                "--target", str(b),
                "--output", str(tmp_path / "o.emb"),
                "--method", "knn",
            ]
        )
        assert rc == 3
