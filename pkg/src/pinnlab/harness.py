"""Experiment orchestration: seeded runs, precision-switching resume,
sweeps, CSV logging and binary checkpoints.

A run is fully determined by (config, seed, precision); every CSV field
except wall_seconds replays bit-identically.  Checkpoints store parameters
as little-endian float64, which embeds narrower-format values exactly, so
promoting an fp32 checkpoint to fp64 changes no value.
"""

from __future__ import annotations

import configparser
import io
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import batcheval
from .lbfgs import (LbfgsConfig, LbfgsState, StopReason, stall_diagnostic,
                    step)
from .losses import (MlpObjective, Phase, PhaseThresholds, classify_phase,
                     rmae, rrmse)
from .model import MlpParams, init_mlp, layer_shapes
from .pde_suite import CollocationSet, make_grid, make_problem
from .precision import FP64, PrecisionSpec, from_name

CSV_HEADER = ("outer_step,inner_count,stop_reason,loss_total,loss_f,loss_b,"
              "rmae,rrmse,grad_inf_norm,param_l2_norm,phase,wall_seconds")

CHECKPOINT_MAGIC = b"PINNLAB-CKPT\n"
FORMAT_VERSION = 1


@dataclass
class RunConfig:
    pde: str = "convection"
    pde_params: dict = field(default_factory=dict)
    precision: str = "fp64"
    seed: int = 0
    depth: int = 3
    width: int = 64
    nx: int = 51
    nt: int = 51
    outer_steps: int = 500
    lambda_f: float = 1.0
    lambda_b: float = 1.0
    stall_patience: int = 20
    output_dir: str = "runs"
    optimizer: LbfgsConfig = field(default_factory=LbfgsConfig)
    thresholds: PhaseThresholds = field(default_factory=PhaseThresholds)


@dataclass
class TrainingRecord:
    outer_step: int
    inner_count: int
    stop_reason: str
    loss_total: float
    loss_f: float
    loss_b: float
    rmae: float
    rrmse: float
    grad_inf_norm: float
    param_l2_norm: float
    phase: str
    wall_seconds: float

    def csv_row(self) -> str:
        return ",".join([
            str(self.outer_step), str(self.inner_count), self.stop_reason,
            repr(self.loss_total), repr(self.loss_f), repr(self.loss_b),
            repr(self.rmae), repr(self.rrmse), repr(self.grad_inf_norm),
            repr(self.param_l2_norm), self.phase, repr(self.wall_seconds)])


@dataclass
class Checkpoint:
    format_version: int
    config: RunConfig
    precision: str
    params: np.ndarray       # float64 exact embedding
    rng_key: tuple
    rng_counter: tuple
    outer_step: int


# ---------------------------------------------------------------------------
# config serialization (key = value sections)

def config_to_ini(cfg: RunConfig, parser=None, prefix: str = ""):
    p = parser if parser is not None else configparser.ConfigParser()
    run = prefix + "run"
    p[run] = {
        "pde": cfg.pde,
        "precision": cfg.precision,
        "seed": str(cfg.seed),
        "depth": str(cfg.depth),
        "width": str(cfg.width),
        "nx": str(cfg.nx),
        "nt": str(cfg.nt),
        "outer_steps": str(cfg.outer_steps),
        "lambda_f": repr(cfg.lambda_f),
        "lambda_b": repr(cfg.lambda_b),
        "stall_patience": str(cfg.stall_patience),
        "output_dir": cfg.output_dir,
    }
    p[prefix + "pde_params"] = {k: repr(v) for k, v in cfg.pde_params.items()}
    o = cfg.optimizer
    p[prefix + "optimizer"] = {
        "max_inner_iter": str(o.max_inner_iter),
        "history_size": str(o.history_size),
        "tolerance_grad": repr(o.tolerance_grad),
        "tolerance_change": repr(o.tolerance_change),
        "c1": repr(o.c1),
        "c2": repr(o.c2),
        "max_line_search_evals": str(o.max_line_search_evals),
    }
    t = cfg.thresholds
    p[prefix + "phases"] = {
        "loss_low": repr(t.loss_low),
        "err_low": repr(t.err_low),
        "err_high": repr(t.err_high),
    }
    return p


def config_from_ini(p, prefix: str = "") -> RunConfig:
    run = p[prefix + "run"]
    opt = p[prefix + "optimizer"] if p.has_section(prefix + "optimizer") else {}
    ph = p[prefix + "phases"] if p.has_section(prefix + "phases") else {}
    pde_params = {}
    if p.has_section(prefix + "pde_params"):
        pde_params = {k: float(v) for k, v in p[prefix + "pde_params"].items()}
    base_opt = LbfgsConfig()
    base_ph = PhaseThresholds()
    return RunConfig(
        pde=run.get("pde", "convection"),
        pde_params=pde_params,
        precision=run.get("precision", "fp64"),
        seed=int(run.get("seed", "0")),
        depth=int(run.get("depth", "3")),
        width=int(run.get("width", "64")),
        nx=int(run.get("nx", "51")),
        nt=int(run.get("nt", "51")),
        outer_steps=int(run.get("outer_steps", "500")),
        lambda_f=float(run.get("lambda_f", "1.0")),
        lambda_b=float(run.get("lambda_b", "1.0")),
        stall_patience=int(run.get("stall_patience", "20")),
        output_dir=run.get("output_dir", "runs"),
        optimizer=LbfgsConfig(
            max_inner_iter=int(opt.get("max_inner_iter",
                                       base_opt.max_inner_iter)),
            history_size=int(opt.get("history_size", base_opt.history_size)),
            tolerance_grad=float(opt.get("tolerance_grad",
                                         base_opt.tolerance_grad)),
            tolerance_change=float(opt.get("tolerance_change",
                                           base_opt.tolerance_change)),
            c1=float(opt.get("c1", base_opt.c1)),
            c2=float(opt.get("c2", base_opt.c2)),
            max_line_search_evals=int(opt.get("max_line_search_evals",
                                              base_opt.max_line_search_evals)),
        ),
        thresholds=PhaseThresholds(
            loss_low=float(ph.get("loss_low", base_ph.loss_low)),
            err_low=float(ph.get("err_low", base_ph.err_low)),
            err_high=float(ph.get("err_high", base_ph.err_high)),
        ))


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w") as fh:
        config_to_ini(cfg).write(fh)


def load_config(path) -> RunConfig:
    p = configparser.ConfigParser()
    with open(path) as fh:
        p.read_file(fh)
    return config_from_ini(p)


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(ck: Checkpoint, path) -> None:
    p = config_to_ini(ck.config)
    p["checkpoint"] = {
        "format_version": str(ck.format_version),
        "precision": ck.precision,
        "outer_step": str(ck.outer_step),
        "param_count": str(ck.params.size),
        "rng_key": ",".join(str(v) for v in ck.rng_key),
        "rng_counter": ",".join(str(v) for v in ck.rng_counter),
    }
    buf = io.StringIO()
    p.write(buf)
    header = buf.getvalue().encode("utf-8")
    payload = np.ascontiguousarray(ck.params, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(f"{len(header)}\n".encode("ascii"))
        fh.write(header)
        fh.write(payload)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        header_len = int(fh.readline().decode("ascii").strip())
        parser = configparser.ConfigParser()
        parser.read_string(fh.read(header_len).decode("utf-8"))
        ck = parser["checkpoint"]
        n = int(ck["param_count"])
        params = np.frombuffer(fh.read(n * 8), dtype="<f8").copy()
        if params.size != n:
            raise ValueError(f"{path}: truncated parameter payload")
    return Checkpoint(
        format_version=int(ck["format_version"]),
        config=config_from_ini(parser),
        precision=ck["precision"],
        params=params,
        rng_key=tuple(int(v) for v in ck["rng_key"].split(",") if v),
        rng_counter=tuple(int(v) for v in ck["rng_counter"].split(",") if v),
        outer_step=int(ck["outer_step"]))


def _rng_state(seed: int):
    state = np.random.Philox(seed).state["state"]
    return tuple(int(v) for v in state["key"]), \
        tuple(int(v) for v in state["counter"])


# ---------------------------------------------------------------------------
# training loop

class _Evaluator:
    """fp64 dense-grid metrics for the current parameters."""

    def __init__(self, problem, colloc, shapes):
        self.shapes = shapes
        self.points = colloc.interior
        self.truth = problem.reference_on(colloc.xs, colloc.ts).ravel()

    def __call__(self, flat64):
        Ws, bs = batcheval.unpack_flat(flat64, self.shapes)
        out, _ = batcheval.forward_channels(Ws, bs, self.points, {"u"}, FP64)
        return rmae(out["u"], self.truth), rrmse(out["u"], self.truth)


def _train(cfg: RunConfig, flat64: np.ndarray, start_step: int,
           n_steps: int, csv_path=None, append: bool = False):
    """Shared loop behind run() and resume(); returns (records, flat64)."""
    spec = from_name(cfg.precision)
    problem = make_problem(cfg.pde, **cfg.pde_params)
    colloc = make_grid(problem, cfg.nx, cfg.nt)
    shapes = layer_shapes(cfg.depth, cfg.width)
    objective = MlpObjective(problem, colloc, shapes, cfg.lambda_f,
                             cfg.lambda_b, spec)
    evaluate_metrics = _Evaluator(problem, colloc, shapes)
    state = LbfgsState(config=cfg.optimizer, precision=spec)

    last_breakdown = {}

    def closure(flat):
        breakdown, grad = objective(flat)
        last_breakdown["value"] = breakdown
        return breakdown.total, grad

    x = np.ascontiguousarray(flat64, dtype=spec.dtype)
    records = []
    phase = Phase.UN_CONVERGED
    stall_run = 0
    stalled = False
    fh = None
    if csv_path is not None:
        fh = open(csv_path, "a" if append else "w")
        if not append:
            fh.write(CSV_HEADER + "\n")
    try:
        for k in range(n_steps):
            t0 = time.perf_counter()
            x_before = x.astype(np.float64)
            x, report = step(state, closure, x)
            if not np.all(np.isfinite(x)) or not np.isfinite(report.loss):
                raise FloatingPointError(
                    f"non-finite state at outer step {start_step + k + 1}")
            wall = time.perf_counter() - t0

            flat64_now = x.astype(np.float64)
            err_mae, err_rmse = evaluate_metrics(flat64_now)
            breakdown = last_breakdown["value"]
            phase = classify_phase(breakdown.total, err_mae, cfg.thresholds,
                                   phase)
            rec = TrainingRecord(
                outer_step=start_step + k + 1,
                inner_count=report.inner_count,
                stop_reason=report.stop_reason.value,
                loss_total=breakdown.total,
                loss_f=breakdown.l_f,
                loss_b=breakdown.l_b,
                rmae=err_mae,
                rrmse=err_rmse,
                grad_inf_norm=float(np.max(np.abs(report.grad))),
                param_l2_norm=float(np.linalg.norm(flat64_now)),
                phase=phase.value,
                wall_seconds=wall)
            records.append(rec)
            if fh is not None:
                fh.write(rec.csv_row() + "\n")

            stall = stall_diagnostic(flat64_now, flat64_now - x_before, spec)
            stall_run = stall_run + 1 if stall.underflow_stall else 0
            if cfg.stall_patience and stall_run >= cfg.stall_patience:
                stalled = True
                break
    finally:
        if fh is not None:
            fh.close()
    return records, x.astype(np.float64), stalled


def run(cfg: RunConfig, csv_path=None, checkpoint_path=None):
    """Train from a fresh seeded initialization; returns
    (records, final Checkpoint, stalled flag)."""
    spec = from_name(cfg.precision)
    params = init_mlp(cfg.seed, cfg.depth, cfg.width, spec)
    records, flat64, stalled = _train(cfg, params.flat_view, 0,
                                      cfg.outer_steps, csv_path)
    key, counter = _rng_state(cfg.seed)
    ck = Checkpoint(format_version=FORMAT_VERSION, config=cfg,
                    precision=cfg.precision, params=flat64,
                    rng_key=key, rng_counter=counter,
                    outer_step=len(records))
    if checkpoint_path is not None:
        save_checkpoint(ck, checkpoint_path)
    return records, ck, stalled


def resume(ck: Checkpoint, new_precision: str, extra_steps: int,
           csv_path=None, checkpoint_path=None, allow_narrowing: bool = False):
    """Continue training under a (usually wider) precision.

    The optimizer history starts empty; parameter values are carried over
    exactly when widening.  Narrowing requires allow_narrowing and rounds
    the parameters onto the narrower grid.
    """
    old = from_name(ck.precision)
    new = from_name(new_precision)
    if new.significand_bits < old.significand_bits and not allow_narrowing:
        raise ValueError(
            f"resume from {old.name} to {new.name} narrows the format; "
            "pass allow_narrowing to round the parameters")
    params = ck.params
    if new.significand_bits < old.significand_bits:
        params = np.asarray(
            [new.round_scalar(v) for v in params], dtype=np.float64)
    cfg = replace(ck.config, precision=new.name)
    records, flat64, stalled = _train(cfg, params, ck.outer_step, extra_steps,
                                      csv_path)
    out = Checkpoint(format_version=FORMAT_VERSION, config=cfg,
                     precision=new.name, params=flat64,
                     rng_key=ck.rng_key, rng_counter=ck.rng_counter,
                     outer_step=ck.outer_step + len(records))
    if checkpoint_path is not None:
        save_checkpoint(out, checkpoint_path)
    return records, out, stalled


def evaluate(ck: Checkpoint, nx: int | None = None, nt: int | None = None,
             field_csv=None):
    """Dense-grid prediction against the reference; returns (rmae, rrmse)
    and optionally writes the field CSV x,t,u_pred,u_true (t-outer)."""
    cfg = ck.config
    problem = make_problem(cfg.pde, **cfg.pde_params)
    colloc = make_grid(problem, nx or cfg.nx, nt or cfg.nt)
    shapes = layer_shapes(cfg.depth, cfg.width)
    Ws, bs = batcheval.unpack_flat(ck.params, shapes)
    out, _ = batcheval.forward_channels(Ws, bs, colloc.interior, {"u"}, FP64)
    truth = problem.reference_on(colloc.xs, colloc.ts).ravel()
    if field_csv is not None:
        with open(field_csv, "w") as fh:
            fh.write("x,t,u_pred,u_true\n")
            for (x, t), up, ut in zip(colloc.interior, out["u"], truth):
                fh.write(f"{float(x)!r},{float(t)!r},"
                         f"{float(up)!r},{float(ut)!r}\n")
    return rmae(out["u"], truth), rrmse(out["u"], truth)


SWEEP_HEADER = ("pde,param_name,param_value,precision,seed,outer_steps_run,"
                "final_loss,final_rmae,final_rrmse,final_phase,stalled,status")


def sweep(base: RunConfig, precisions: list, param_grid: list,
          csv_path=None, workers: int = 1):
    """All (precision, parameter) combinations of the base config.

    param_grid entries are (name, value) pairs; an empty grid sweeps only
    precisions.  A failed run records status=error for its cell and the
    sweep continues.
    """
    if not precisions:
        raise ValueError("need at least one precision")
    cells = [(prec, pv) for prec in precisions
             for pv in (param_grid or [None])]
    rows = []
    results = []

    def one(prec, pv):
        cfg = replace(base, precision=prec)
        if pv is not None:
            cfg = replace(cfg, pde_params={**base.pde_params, pv[0]: pv[1]})
        return run(cfg)

    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(one, prec, pv) for prec, pv in cells]
            outcomes = []
            for fut in futures:
                try:
                    outcomes.append((fut.result(), None))
                except Exception as e:       # noqa: BLE001 - recorded per cell
                    outcomes.append((None, e))
    else:
        outcomes = []
        for prec, pv in cells:
            try:
                outcomes.append((one(prec, pv), None))
            except Exception as e:           # noqa: BLE001 - recorded per cell
                outcomes.append((None, e))

    for (prec, pv), (outcome, err) in zip(cells, outcomes):
        pname, pval = pv if pv is not None else ("", "")
        if err is not None:
            rows.append(f"{base.pde},{pname},{pval},{prec},{base.seed},0,"
                        f"nan,nan,nan,,false,error")
            results.append(None)
            continue
        records, ck, stalled = outcome
        last = records[-1] if records else None
        rows.append(",".join([
            base.pde, str(pname), str(pval), prec, str(base.seed),
            str(len(records)),
            repr(last.loss_total) if last else "nan",
            repr(last.rmae) if last else "nan",
            repr(last.rrmse) if last else "nan",
            last.phase if last else "",
            "true" if stalled else "false",
            "ok"]))
        results.append((records, ck, stalled))

    if csv_path is not None:
        with open(csv_path, "w") as fh:
            fh.write(SWEEP_HEADER + "\n")
            for row in rows:
                fh.write(row + "\n")
    return rows, results
