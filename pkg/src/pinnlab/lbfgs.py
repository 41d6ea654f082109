"""Limited-memory BFGS with a strong-Wolfe line search.

One call to step() runs up to max_inner_iter quasi-Newton updates, each of
which builds a direction from the stored curvature pairs via the two-loop
recursion, line-searches it, applies the update and stores a new pair.  The
inner loop exits early on any of the convergence tests; which test fires,
and how early, depends on the arithmetic precision of the closure and the
vector updates, which is exactly the behaviour this laboratory instruments.

Vector arithmetic runs in the active precision's storage dtype; scalar
comparisons are made on those quantized values (as deep-learning framework
optimizers do).
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .precision import FP64, PrecisionSpec, dot, machine_epsilon


class StopReason(enum.Enum):
    MAX_INNER = "max_inner"
    GRAD_TOLERANCE = "grad_tolerance"
    CHANGE_TOLERANCE = "change_tolerance"
    LOSS_CHANGE_TOLERANCE = "loss_change_tolerance"
    LINE_SEARCH_FAIL = "line_search_fail"


@dataclass
class LbfgsConfig:
    max_inner_iter: int = 20
    history_size: int = 50
    tolerance_grad: float = 1e-9
    tolerance_change: float = 1e-7
    c1: float = 1e-4
    c2: float = 0.9
    max_line_search_evals: int = 25


@dataclass
class CurvaturePair:
    s: np.ndarray
    y: np.ndarray
    rho: float


@dataclass
class LbfgsState:
    config: LbfgsConfig
    precision: PrecisionSpec = FP64
    history: deque = field(default_factory=deque)
    gamma: float = 1.0
    outer_steps: int = 0
    total_inner_iters: int = 0
    last_inner_count: int = 0
    stop_reason: StopReason | None = None


@dataclass
class LineSearchResult:
    alpha: float
    f: float
    derphi: float
    evals: int
    success: bool           # both Wolfe conditions verified
    sufficient_only: bool   # fallback: best sufficient-decrease point


@dataclass
class InnerRecord:
    alpha: float
    f0: float
    derphi0: float
    f_new: float
    derphi_new: float
    ls_success: bool


@dataclass
class StepReport:
    inner_count: int
    stop_reason: StopReason
    loss: float
    grad: np.ndarray
    n_evals: int
    line_searches: list


@dataclass
class StallReport:
    max_update: float
    max_param: float
    underflow_stall: bool


def accept_pair(state: LbfgsState, s: np.ndarray, y: np.ndarray) -> bool:
    """Store (s, y) if the curvature condition holds; evict the oldest pair
    beyond capacity.  Returns whether the pair was stored."""
    if s.shape != y.shape:
        raise ValueError("s and y must have the same length")
    spec = state.precision
    ys = dot(spec, y, s)
    ns = float(np.linalg.norm(s.astype(np.float64)))
    ny = float(np.linalg.norm(y.astype(np.float64)))
    if not (ys > 1e-10 * ns * ny):
        return False
    rho = spec.round_scalar(1.0 / ys)
    state.history.append(CurvaturePair(s=s, y=y, rho=rho))
    while len(state.history) > state.config.history_size:
        state.history.popleft()
    yy = dot(spec, y, y)
    state.gamma = spec.round_scalar(ys / yy)
    return True


def two_loop_direction(state: LbfgsState, grad: np.ndarray) -> np.ndarray:
    """-H @ grad with H built implicitly from the curvature history and the
    diagonal seed gamma * I (gamma = 1 with empty history)."""
    spec = state.precision
    r = spec.round_array
    q = grad.copy()
    alphas = []
    for pair in reversed(state.history):
        a = spec.round_scalar(pair.rho * dot(spec, pair.s, q))
        alphas.append(a)
        q = r(q - r(spec.dtype(a) * pair.y))
    gamma = state.gamma if state.history else 1.0
    result = r(spec.dtype(gamma) * q)
    for pair, a in zip(state.history, reversed(alphas)):
        b = spec.round_scalar(pair.rho * dot(spec, pair.y, result))
        result = r(result + r(spec.dtype(a - b) * pair.s))
    return r(-result)


def _cubic_interpolate(x1, f1, g1, x2, f2, g2, bounds=None):
    """Minimizer of the cubic through two points with derivatives, clipped
    to bounds (midpoint when the cubic has no interior minimum)."""
    if bounds is not None:
        xmin_bound, xmax_bound = bounds
    else:
        xmin_bound, xmax_bound = (x1, x2) if x1 <= x2 else (x2, x1)
    d1 = g1 + g2 - 3 * (f1 - f2) / (x1 - x2)
    d2_square = d1 ** 2 - g1 * g2
    if d2_square >= 0:
        d2 = math.sqrt(d2_square)
        if x1 <= x2:
            min_pos = x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2 * d2))
        else:
            min_pos = x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2 * d2))
        return min(max(min_pos, xmin_bound), xmax_bound)
    return (xmin_bound + xmax_bound) / 2.0


def strong_wolfe(phi, alpha0: float, c1: float = 1e-4, c2: float = 0.9,
                 max_evals: int = 25, f0: float | None = None,
                 derphi0: float | None = None, bracket_tol: float = 1e-9,
                 scale: float = 1.0) -> LineSearchResult:
    """Bracket-then-zoom line search for the strong Wolfe conditions.

    phi(alpha) must return (value, derivative).  If the budget runs out the
    best point satisfying sufficient decrease is returned with
    success=False; with no such point the result carries alpha=0.
    """
    if f0 is None or derphi0 is None:
        f0, derphi0 = phi(0.0)
    if not derphi0 < 0:
        raise ValueError("line search requires a descent direction")

    evals = 0
    best = None  # (alpha, f, g) with sufficient decrease

    def note(a, f, g):
        nonlocal best
        if f <= f0 + c1 * a * derphi0 and (best is None or f < best[1]):
            best = (a, f, g)

    a_prev, f_prev, g_prev = 0.0, f0, derphi0
    a = alpha0
    bracket = None
    done = None
    while evals < max_evals:
        f_a, g_a = phi(a)
        evals += 1
        if not math.isfinite(f_a):
            a = a_prev + 0.5 * (a - a_prev)
            continue
        note(a, f_a, g_a)
        if f_a > f0 + c1 * a * derphi0 or (evals > 1 and f_a >= f_prev):
            bracket = [(a_prev, f_prev, g_prev), (a, f_a, g_a)]
            break
        if abs(g_a) <= -c2 * derphi0:
            done = (a, f_a, g_a)
            break
        if g_a >= 0:
            bracket = [(a_prev, f_prev, g_prev), (a, f_a, g_a)]
            break
        min_step = a + 0.01 * (a - a_prev)
        max_step = a * 10.0
        a_next = _cubic_interpolate(a_prev, f_prev, g_prev, a, f_a, g_a,
                                    bounds=(min_step, max_step))
        a_prev, f_prev, g_prev = a, f_a, g_a
        a = a_next
    else:
        bracket = [(0.0, f0, derphi0), (a_prev, f_prev, g_prev)]

    if done is None and bracket is not None:
        lo, hi = bracket
        if lo[1] > hi[1]:
            lo, hi = hi, lo
        insuf_progress = False
        while evals < max_evals:
            width = abs(hi[0] - lo[0])
            if width * scale < bracket_tol:
                break
            aj = _cubic_interpolate(lo[0], lo[1], lo[2], hi[0], hi[1], hi[2])
            bmin, bmax = min(lo[0], hi[0]), max(lo[0], hi[0])
            eps = 0.1 * (bmax - bmin)
            if min(bmax - aj, aj - bmin) < eps:
                if insuf_progress or aj >= bmax or aj <= bmin:
                    aj = bmax - eps if abs(aj - bmax) < abs(aj - bmin) \
                        else bmin + eps
                    insuf_progress = False
                else:
                    insuf_progress = True
            else:
                insuf_progress = False
            f_j, g_j = phi(aj)
            evals += 1
            if not math.isfinite(f_j):
                break
            note(aj, f_j, g_j)
            if f_j > f0 + c1 * aj * derphi0 or f_j >= lo[1]:
                hi = (aj, f_j, g_j)
            else:
                if abs(g_j) <= -c2 * derphi0:
                    done = (aj, f_j, g_j)
                    break
                if g_j * (hi[0] - lo[0]) >= 0:
                    hi = lo
                lo = (aj, f_j, g_j)
        if done is None and lo[1] < f0:
            note(lo[0], lo[1], lo[2])

    if done is not None:
        return LineSearchResult(alpha=done[0], f=done[1], derphi=done[2],
                                evals=evals, success=True,
                                sufficient_only=False)
    if best is not None:
        return LineSearchResult(alpha=best[0], f=best[1], derphi=best[2],
                                evals=evals, success=False,
                                sufficient_only=True)
    return LineSearchResult(alpha=0.0, f=f0, derphi=derphi0, evals=evals,
                            success=False, sufficient_only=False)


def step(state: LbfgsState, closure, params: np.ndarray):
    """One outer optimizer step: up to max_inner_iter inner iterations.

    closure(flat_params) -> (loss: float, grad: array in the active dtype).
    Returns (updated params, StepReport).  All update arithmetic runs in
    the active precision; the change test looks at the applied update
    alpha * d, which is where narrow formats underflow against the
    parameter magnitudes.
    """
    cfg = state.config
    spec = state.precision
    r = spec.round_array
    x = np.ascontiguousarray(params, dtype=spec.dtype)

    f, g = closure(x)
    if not math.isfinite(f):
        raise FloatingPointError("non-finite loss at the current parameters")
    n_evals = 1
    records: list[InnerRecord] = []
    state.outer_steps += 1

    if float(np.max(np.abs(g))) <= cfg.tolerance_grad:
        state.last_inner_count = 0
        state.stop_reason = StopReason.GRAD_TOLERANCE
        return x, StepReport(0, StopReason.GRAD_TOLERANCE, f, g, n_evals,
                             records)

    stop = None
    n_iter = 0
    while n_iter < cfg.max_inner_iter:
        n_iter += 1
        state.total_inner_iters += 1
        d = two_loop_direction(state, g)
        derphi0 = dot(spec, g, d)
        if not derphi0 < -cfg.tolerance_change:
            stop = StopReason.CHANGE_TOLERANCE
            break

        if state.outer_steps == 1 and n_iter == 1:
            alpha0 = min(1.0, 1.0 / float(np.sum(np.abs(g))))
        else:
            alpha0 = 1.0

        last_eval = {}

        def phi(alpha):
            if alpha == 0.0:
                return f, derphi0
            xa = r(x + r(spec.dtype(alpha) * d))
            fa, ga = closure(xa)
            last_eval[alpha] = (xa, fa, ga)
            return fa, float(dot(spec, ga, d))

        ls = strong_wolfe(phi, alpha0, cfg.c1, cfg.c2,
                          cfg.max_line_search_evals, f0=f, derphi0=derphi0,
                          scale=float(np.max(np.abs(d))))
        n_evals += ls.evals

        if ls.alpha == 0.0:
            # no finite sufficient-decrease point: one damped step, then out
            alpha = alpha0 / 10.0
            fa, ga = phi(alpha)
            n_evals += 1
            records.append(InnerRecord(alpha, f, derphi0, fa, ga, False))
            s = r(spec.dtype(alpha) * d)
            x = r(x + s)
            if alpha in last_eval:
                f, g = last_eval[alpha][1], last_eval[alpha][2]
            stop = StopReason.LINE_SEARCH_FAIL
            break

        records.append(InnerRecord(ls.alpha, f, derphi0, ls.f, ls.derphi,
                                   ls.success))
        s = r(spec.dtype(ls.alpha) * d)
        x_new = r(x + s)
        _, f_new, g_new = last_eval[ls.alpha]
        y = r(g_new - g)
        accept_pair(state, s, y)

        f_prev = f
        x, f, g = x_new, f_new, g_new

        if n_iter >= cfg.max_inner_iter:
            stop = StopReason.MAX_INNER
            break
        if float(np.max(np.abs(g))) <= cfg.tolerance_grad:
            stop = StopReason.GRAD_TOLERANCE
            break
        if float(np.max(np.abs(s))) <= cfg.tolerance_change:
            stop = StopReason.CHANGE_TOLERANCE
            break
        if abs(f - f_prev) < cfg.tolerance_change:
            stop = StopReason.LOSS_CHANGE_TOLERANCE
            break

    state.last_inner_count = n_iter
    state.stop_reason = stop
    return x, StepReport(n_iter, stop, f, g, n_evals, records)


def stall_diagnostic(params: np.ndarray, proposed_update: np.ndarray,
                     precision: PrecisionSpec) -> StallReport:
    """Flags an update too small to register at the format's resolution
    relative to the parameter magnitudes."""
    max_update = float(np.max(np.abs(proposed_update))) \
        if proposed_update.size else 0.0
    max_param = float(np.max(np.abs(params))) if params.size else 0.0
    eps = machine_epsilon(precision)
    return StallReport(
        max_update=max_update, max_param=max_param,
        underflow_stall=max_update < eps * max(1.0, max_param))
