"""Configs, checkpoints, run/resume/evaluate/sweep and the CLI surface."""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from pinnlab.harness import (CSV_HEADER, Checkpoint, RunConfig,
                             TrainingRecord, evaluate, load_checkpoint,
                             load_config, resume, run, save_checkpoint,
                             save_config, sweep)
from pinnlab.lbfgs import LbfgsConfig
from pinnlab.losses import PhaseThresholds, rmae
from pinnlab.model import init_mlp

TINY = dict(pde="convection", pde_params={"beta": 3.0}, precision="fp64",
            seed=0, depth=1, width=6, nx=7, nt=7, outer_steps=3)


def tiny_config(**over):
    kw = dict(TINY)
    kw.update(over)
    return RunConfig(**kw)


class TestConfigIO:
    def test_round_trip_lossless(self, tmp_path):
        cfg = RunConfig(pde="reaction", pde_params={"rho": 5.5},
                        precision="bf16", seed=17, depth=4, width=96,
                        nx=31, nt=41, outer_steps=123,
                        lambda_f=0.25, lambda_b=7.5, stall_patience=11,
                        output_dir="some/dir",
                        optimizer=LbfgsConfig(max_inner_iter=9,
                                              history_size=13,
                                              tolerance_grad=2e-10,
                                              tolerance_change=3e-8,
                                              c1=2e-4, c2=0.85,
                                              max_line_search_evals=19),
                        thresholds=PhaseThresholds(loss_low=2e-3,
                                                   err_low=0.04,
                                                   err_high=0.4))
        path = tmp_path / "run.ini"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_defaults_documented(self):
        cfg = RunConfig()
        assert cfg.optimizer.tolerance_change == 1e-7
        assert cfg.optimizer.max_inner_iter == 20
        assert cfg.optimizer.history_size == 50
        assert cfg.thresholds.loss_low == 1e-3


class TestCheckpointIO:
    def mk(self, precision="fp64"):
        params = init_mlp(3, 1, 4).flat_view
        return Checkpoint(format_version=1, config=tiny_config(),
                          precision=precision, params=params,
                          rng_key=(123, 456), rng_counter=(1, 2, 3, 4),
                          outer_step=7)

    def test_round_trip_byte_identical(self, tmp_path):
        ck = self.mk()
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(ck, p1)
        loaded = load_checkpoint(p1)
        save_checkpoint(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert_array_equal(loaded.params, ck.params)
        assert loaded.config == ck.config
        assert loaded.rng_key == ck.rng_key
        assert loaded.rng_counter == ck.rng_counter
        assert loaded.outer_step == ck.outer_step

    def test_magic_validation(self, tmp_path):
        path = tmp_path / "bogus.ckpt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(ValueError):
            load_checkpoint(path)

    def test_fp32_values_embed_exactly(self, tmp_path):
        from pinnlab.precision import FP32
        params = init_mlp(0, 1, 4, FP32).flat_view
        ck = self.mk("fp32")
        ck.params = params
        path = tmp_path / "c.ckpt"
        save_checkpoint(ck, path)
        loaded = load_checkpoint(path)
        assert_array_equal(loaded.params,
                           loaded.params.astype(np.float32).astype(np.float64))


class TestRun:
    def test_zero_steps_identity(self, tmp_path):
        cfg = tiny_config(outer_steps=0)
        records, ck, stalled = run(cfg)
        assert records == []
        assert not stalled
        assert_array_equal(ck.params, init_mlp(0, 1, 6).flat_view)

    def test_same_config_identical_csv_except_wall(self, tmp_path):
        cfg = tiny_config()
        p1, p2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        run(cfg, csv_path=p1)
        run(cfg, csv_path=p2)
        rows1 = p1.read_text().splitlines()
        rows2 = p2.read_text().splitlines()
        assert rows1[0] == rows2[0] == CSV_HEADER
        for a, b in zip(rows1[1:], rows2[1:]):
            assert a.rsplit(",", 1)[0] == b.rsplit(",", 1)[0]

    def test_records_match_schema(self, tmp_path):
        cfg = tiny_config()
        path = tmp_path / "r.csv"
        records, ck, _ = run(cfg, csv_path=path)
        assert len(records) == 3
        lines = path.read_text().splitlines()
        assert lines[0].split(",") == [
            "outer_step", "inner_count", "stop_reason", "loss_total",
            "loss_f", "loss_b", "rmae", "rrmse", "grad_inf_norm",
            "param_l2_norm", "phase", "wall_seconds"]
        first = lines[1].split(",")
        assert first[0] == "1"
        assert float(first[3]) == records[0].loss_total

    def test_checkpoint_written(self, tmp_path):
        path = tmp_path / "w.ckpt"
        _, ck, _ = run(tiny_config(), checkpoint_path=path)
        loaded = load_checkpoint(path)
        assert_array_equal(loaded.params, ck.params)
        assert loaded.outer_step == 3


class TestResume:
    def test_same_precision_zero_steps_identity(self):
        _, ck, _ = run(tiny_config())
        records, ck2, _ = resume(ck, "fp64", 0)
        assert records == []
        assert_array_equal(ck2.params, ck.params)
        assert ck2.outer_step == ck.outer_step

    def test_fp32_to_fp64_exact_promotion(self):
        _, ck, _ = run(tiny_config(precision="fp32"))
        records, ck2, _ = resume(ck, "fp64", 0)
        assert_array_equal(ck2.params, ck.params)
        assert ck2.precision == "fp64"

    def test_narrowing_needs_flag(self):
        _, ck, _ = run(tiny_config())
        with pytest.raises(ValueError):
            resume(ck, "fp32", 0)
        _, ck3, _ = resume(ck, "fp32", 0, allow_narrowing=True)
        assert_array_equal(
            ck3.params, ck3.params.astype(np.float32).astype(np.float64))

    def test_resume_continues_numbering(self, tmp_path):
        _, ck, _ = run(tiny_config())
        records, ck2, _ = resume(ck, "fp64", 2)
        assert [r.outer_step for r in records] == [4, 5]
        assert ck2.outer_step == 5


class FakeTruthNet:
    """Checkpoint whose parameters do not matter; evaluate() is driven by
    the reference itself in these tests."""


class TestEvaluate:
    def test_trained_checkpoint_metrics(self, tmp_path):
        _, ck, _ = run(tiny_config())
        field_csv = tmp_path / "field.csv"
        mae, rmse = evaluate(ck, field_csv=field_csv)
        assert 0.0 <= mae and 0.0 <= rmse
        lines = field_csv.read_text().splitlines()
        assert lines[0] == "x,t,u_pred,u_true"
        assert len(lines) == 1 + 7 * 7

    def test_analytic_field_zero_error(self):
        from pinnlab.losses import rmae as _rmae
        from pinnlab.pde_suite import analytic_convection, make_grid, \
            make_problem
        problem = make_problem("convection", beta=3.0)
        colloc = make_grid(problem, 7, 7)
        truth = problem.reference_on(colloc.xs, colloc.ts).ravel()
        pred = analytic_convection(colloc.interior[:, 0],
                                   colloc.interior[:, 1], 3.0)
        assert _rmae(pred, truth) == 0.0

    def test_zero_network_rmae_one(self):
        cfg = tiny_config(outer_steps=0)
        _, ck, _ = run(cfg)
        ck.params = np.zeros_like(ck.params)
        mae, rmse = evaluate(ck)
        assert mae == 1.0 and rmse == 1.0

    def test_custom_grid(self):
        _, ck, _ = run(tiny_config())
        mae1, _ = evaluate(ck, nx=5, nt=5)
        assert np.isfinite(mae1)


class TestSweep:
    def test_single_cell_matches_run(self, tmp_path):
        cfg = tiny_config()
        rows, results = sweep(cfg, ["fp64"], [],
                              csv_path=tmp_path / "sweep.csv")
        assert len(rows) == 1
        records, ck, _ = results[0]
        solo_records, solo_ck, _ = run(cfg)
        assert_array_equal(ck.params, solo_ck.params)
        assert rows[0].endswith("ok")

    def test_grid_cells_and_csv(self, tmp_path):
        cfg = tiny_config(outer_steps=1)
        path = tmp_path / "sweep.csv"
        rows, results = sweep(cfg, ["fp32", "fp64"],
                              [("beta", 3.0), ("beta", 5.0)], csv_path=path)
        assert len(rows) == 4
        lines = path.read_text().splitlines()
        assert lines[0].startswith("pde,param_name,param_value,precision")
        assert len(lines) == 5

    def test_failure_recorded_not_raised(self, tmp_path):
        cfg = tiny_config(outer_steps=1, pde_params={"beta": float("nan")})
        rows, results = sweep(cfg, ["fp64"], [])
        assert len(rows) == 1
        assert rows[0].endswith("error")
        assert results[0] is None

    def test_empty_precisions_rejected(self):
        with pytest.raises(ValueError):
            sweep(tiny_config(), [], [])


class TestCli:
    def run_cli(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "pinnlab.cli", *args],
            capture_output=True, text=True)

    def test_train_evaluate_landscape_oracle(self, tmp_path):
        out = tmp_path / "runs"
        r = self.run_cli("train", "--pde", "convection", "--param",
                         "beta=3.0", "--precision", "fp64", "--seed", "0",
                         "--width", "6", "--depth", "1", "--grid", "7x7",
                         "--outer-steps", "2", "--out", str(out))
        assert r.returncode == 0, r.stderr
        ckpt = out / "convection_fp64_seed0.ckpt"
        assert ckpt.exists()
        assert (out / "convection_fp64_seed0.csv").exists()

        r = self.run_cli("evaluate", "--checkpoint", str(ckpt),
                         "--grid", "5x5", "--out", str(tmp_path / "f.csv"))
        assert r.returncode == 0, r.stderr
        assert (tmp_path / "f.csv").exists()

        r = self.run_cli("landscape", "--checkpoint", str(ckpt),
                         "--seed", "1", "--extent", "0.5", "--points", "3",
                         "--out", str(tmp_path / "plane.csv"))
        assert r.returncode == 0, r.stderr
        assert (tmp_path / "plane.csv").read_text().startswith(
            "alpha,beta,loss,rmae")

        r = self.run_cli("resume", "--checkpoint", str(ckpt),
                         "--precision", "fp64", "--steps", "1")
        assert r.returncode == 0, r.stderr

    def test_error_is_machine_readable(self, tmp_path):
        r = self.run_cli("evaluate", "--checkpoint",
                         str(tmp_path / "missing.ckpt"))
        assert r.returncode != 0
        assert r.stderr.startswith("error: {")

    def test_oracle_ac_export(self, tmp_path):
        path = tmp_path / "ac.csv"
        r = self.run_cli("oracle-ac", "--out", str(path),
                         "--nx", "5", "--nt", "3")
        assert r.returncode == 0, r.stderr
        lines = path.read_text().splitlines()
        assert lines[0] == "x,t,u"
        assert len(lines) == 1 + 5 * 3
