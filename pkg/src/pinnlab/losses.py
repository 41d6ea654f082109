"""Training objective, evaluation metrics and the training-phase classifier.

The objective is the weighted sum of the mean squared interior residual and
the mean squared constraint violation.  total_loss accepts either network
parameters (fast batched path, gradient available) or any field object
(scalar path, used by oracles and tests).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import batcheval
from .model import MlpParams
from .pde_suite import (CollocationSet, PdeProblem, residual_arrays,
                        residual_partials)
from .precision import FP64, PrecisionSpec, pairwise_sum


@dataclass
class LossBreakdown:
    total: float
    l_f: float
    l_b: float
    lambda_f: float
    lambda_b: float


class Phase(enum.Enum):
    UN_CONVERGED = "unconverged"
    FAILURE = "failure"
    SUCCESS = "success"


@dataclass(frozen=True)
class PhaseThresholds:
    """Bands separating the three training phases.

    Between err_low and err_high the classification keeps its previous
    value (hysteresis), so a run's phase sequence cannot chatter.
    """

    loss_low: float = 1e-3
    err_low: float = 0.05
    err_high: float = 0.3

    def __post_init__(self):
        if not (self.err_low < self.err_high):
            raise ValueError("require err_low < err_high")
        if self.loss_low <= 0:
            raise ValueError("loss_low must be positive")


def classify_phase(loss: float, err: float, cfg: PhaseThresholds,
                   previous: Phase = Phase.UN_CONVERGED) -> Phase:
    if loss > cfg.loss_low:
        return Phase.UN_CONVERGED
    if err >= cfg.err_high:
        return Phase.FAILURE
    if err <= cfg.err_low:
        return Phase.SUCCESS
    return previous


def rmae(pred, truth) -> float:
    """Sum |pred - truth| / sum |truth| (relative l1 error)."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise ValueError("pred and truth must have equal length")
    denom = float(np.sum(np.abs(truth)))
    if denom == 0.0:
        raise ValueError("reference values sum to zero")
    return float(np.sum(np.abs(pred - truth))) / denom


def rrmse(pred, truth) -> float:
    """Relative l2 error: sqrt(sum (pred-truth)^2 / sum truth^2)."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if pred.shape != truth.shape:
        raise ValueError("pred and truth must have equal length")
    denom = float(np.sum(truth ** 2))
    if denom == 0.0:
        raise ValueError("reference values sum to zero")
    return float(np.sqrt(np.sum((pred - truth) ** 2) / denom))


def _mean(spec: PrecisionSpec, x: np.ndarray) -> float:
    if not spec.is_emulated:
        return float(np.mean(x))
    total = pairwise_sum(spec, x.ravel(), axis=0)
    return float(spec.round_array(total / spec.dtype(x.size)))


def _boundary_batches(problem: PdeProblem, colloc: CollocationSet, spec):
    """Constraint terms as (channel, points, sign, target) batch specs.

    A periodic constraint contributes two batches with opposite signs; the
    violation is their elementwise difference.
    """
    x1 = problem.x_range[1]
    out = []
    for tag, pts in colloc.boundary:
        if tag == "initial":
            target = problem.initial_condition(pts[:, 0])
            out.append((tag, [("u", pts, 1.0)], target))
        elif tag == "initial_dt":
            out.append((tag, [("ut", pts, 1.0)], None))
        elif tag in ("dirichlet_x0", "dirichlet_x1"):
            out.append((tag, [("u", pts, 1.0)], None))
        elif tag == "periodic_value":
            right = pts.copy()
            right[:, 0] = x1
            out.append((tag, [("u", pts, 1.0), ("u", right, -1.0)], None))
        elif tag == "periodic_dx":
            right = pts.copy()
            right[:, 0] = x1
            out.append((tag, [("ux", pts, 1.0), ("ux", right, -1.0)], None))
        else:
            raise ValueError(f"unknown boundary tag {tag!r}")
    return out


class MlpObjective:
    """Loss and parameter gradient of a network on a fixed collocation set.

    All arithmetic runs under the given precision; the gradient comes from
    the hand-derived batched backward pass.  Instances are reused across
    optimizer iterations so per-batch structures are built once.
    """

    def __init__(self, problem: PdeProblem, colloc: CollocationSet,
                 shapes, lambda_f: float = 1.0, lambda_b: float = 1.0,
                 precision: PrecisionSpec = FP64):
        if colloc.interior.shape[0] == 0:
            raise ValueError("interior collocation set is empty")
        self.problem = problem
        self.colloc = colloc
        self.shapes = list(shapes)
        self.lambda_f = float(lambda_f)
        self.lambda_b = float(lambda_b)
        self.precision = precision
        dt = precision.dtype
        self.X_int = np.ascontiguousarray(colloc.interior, dtype=dt)
        self.bnd = []
        for tag, parts, target in _boundary_batches(problem, colloc, precision):
            parts_c = [(ch, np.ascontiguousarray(p, dtype=dt), s)
                       for ch, p, s in parts]
            tgt = None if target is None else np.ascontiguousarray(target, dt)
            self.bnd.append((tag, parts_c, tgt))
        self.n_bnd = colloc.n_constraints

    def __call__(self, flat):
        """flat (in precision dtype) -> (LossBreakdown, grad flat array)."""
        spec = self.precision
        r = spec.round_array
        dt = spec.dtype
        Ws, bs = batcheval.unpack_flat(flat, self.shapes)

        gWs = [np.zeros_like(w) for w in Ws]
        gbs = [np.zeros_like(b) for b in bs]

        def accumulate(gw, gb):
            for k in range(len(gWs)):
                gWs[k] = r(gWs[k] + gw[k])
                gbs[k] = r(gbs[k] + gb[k])

        # interior residual term
        need = set(self.problem.channels)
        ch, cache = batcheval.forward_channels(Ws, bs, self.X_int, need, spec)
        res = residual_arrays(self.problem, ch, spec)
        l_f = _mean(spec, r(res * res))
        n_int = dt(self.X_int.shape[0])
        seed = r(r(dt(2.0 * self.lambda_f) * res) / n_int)
        partials = residual_partials(self.problem, ch, spec)
        adj = {name: r(seed * part) for name, part in partials.items()}
        accumulate(*batcheval.backward_channels(cache, adj, spec))

        # constraint term
        l_b = 0.0
        if self.n_bnd:
            sq_sum = dt(0.0)
            n_bnd = dt(self.n_bnd)
            for tag, parts, target in self.bnd:
                viol = None
                caches = []
                for chname, pts, sign in parts:
                    vals, cch = batcheval.forward_channels(
                        Ws, bs, pts, {chname}, spec)
                    v = vals[chname]
                    caches.append((chname, cch, sign))
                    viol = v if viol is None else r(viol - v)
                if target is not None:
                    viol = r(viol - target)
                sq = r(viol * viol)
                sq_sum = r(sq_sum + (np.sum(sq, dtype=dt)
                                     if not spec.is_emulated
                                     else pairwise_sum(spec, sq, axis=0)))
                seed_b = r(r(dt(2.0 * self.lambda_b) * viol) / n_bnd)
                for chname, cch, sign in caches:
                    a = seed_b if sign > 0 else r(-seed_b)
                    accumulate(*batcheval.backward_channels(
                        cch, {chname: a}, spec))
            l_b = float(r(sq_sum / n_bnd))

        total = float(r(dt(self.lambda_f) * dt(l_f)
                        + dt(self.lambda_b) * dt(l_b)))
        grad = batcheval.pack_flat(gWs, gbs)
        return (LossBreakdown(total=total, l_f=float(l_f), l_b=float(l_b),
                              lambda_f=self.lambda_f, lambda_b=self.lambda_b),
                grad)


def total_loss(params, problem: PdeProblem, colloc: CollocationSet,
               lambda_f: float = 1.0, lambda_b: float = 1.0,
               precision: PrecisionSpec = FP64) -> LossBreakdown:
    """Objective value for network parameters or for any field object."""
    if isinstance(params, MlpParams):
        obj = MlpObjective(problem, colloc, params.shapes,
                           lambda_f, lambda_b, precision)
        breakdown, _ = obj(np.ascontiguousarray(params.flat_view,
                                                dtype=precision.dtype))
        return breakdown
    return field_loss(params, problem, colloc, lambda_f, lambda_b)


def field_loss(field, problem: PdeProblem, colloc: CollocationSet,
               lambda_f: float = 1.0, lambda_b: float = 1.0) -> LossBreakdown:
    """Scalar-path objective for a field (float64, fixed left-to-right
    sums); the independent route against which the batched path is tested."""
    from . import pde_suite
    if colloc.interior.shape[0] == 0:
        raise ValueError("interior collocation set is empty")
    res_op = {
        "convection": lambda u, p: pde_suite.residual_convection(
            u, p, problem.params["beta"]),
        "reaction": lambda u, p: pde_suite.residual_reaction(
            u, p, problem.params["rho"]),
        "wave": pde_suite.residual_wave,
        "allen_cahn": pde_suite.residual_allen_cahn,
    }[problem.name]
    acc = 0.0
    for p in colloc.interior:
        rv = res_op(field, (float(p[0]), float(p[1])))
        acc += rv * rv
    l_f = acc / colloc.interior.shape[0]
    l_b = 0.0
    if colloc.n_constraints:
        viol = pde_suite.boundary_residuals(problem, field, colloc.boundary)
        acc = 0.0
        for v in viol:
            acc += v * v
        l_b = acc / viol.size
    return LossBreakdown(total=lambda_f * l_f + lambda_b * l_b,
                         l_f=l_f, l_b=l_b,
                         lambda_f=lambda_f, lambda_b=lambda_b)
