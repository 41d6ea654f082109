"""Loss/error landscape probes: segment interpolation between checkpoints,
seeded 2-D slices around a checkpoint, and barrier quantification.

Probes always evaluate in fp64 regardless of the precision being studied,
so the instrument itself cannot stall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .losses import MlpObjective, rmae
from .model import flat_size
from .pde_suite import CollocationSet, PdeProblem
from .precision import FP64
from . import batcheval


@dataclass
class LandscapeSlice:
    kind: str                    # "segment" or "plane"
    coords: np.ndarray           # (n,) alphas, or (n*n, 2) alpha/beta pairs
    loss_values: np.ndarray
    error_values: np.ndarray
    directions: list | None = None


def _evaluator(problem: PdeProblem, colloc: CollocationSet, shapes):
    obj = MlpObjective(problem, colloc, shapes, precision=FP64)
    truth = problem.reference_on(colloc.xs, colloc.ts).ravel()

    def at(flat):
        breakdown, _ = obj(flat)
        Ws, bs = batcheval.unpack_flat(flat, shapes)
        pred, _ = batcheval.forward_channels(Ws, bs, colloc.interior,
                                             {"u"}, FP64)
        return breakdown.total, rmae(pred["u"], truth)
    return at


def interpolate_segment(theta_a: np.ndarray, theta_b: np.ndarray,
                        n_points: int, problem: PdeProblem,
                        colloc: CollocationSet, shapes) -> LandscapeSlice:
    """Loss and error along (1-a) theta_a + a theta_b for a in [0, 1]."""
    theta_a = np.asarray(theta_a, dtype=np.float64)
    theta_b = np.asarray(theta_b, dtype=np.float64)
    if theta_a.shape != theta_b.shape:
        raise ValueError("endpoint parameter vectors differ in length")
    if theta_a.size != flat_size(shapes):
        raise ValueError("parameter vectors do not match the layer shapes")
    if n_points < 2:
        raise ValueError("need at least two interpolation points")
    at = _evaluator(problem, colloc, shapes)
    alphas = np.linspace(0.0, 1.0, n_points)
    losses = np.empty(n_points)
    errors = np.empty(n_points)
    diff = theta_b - theta_a
    for i, a in enumerate(alphas):
        # both endpoints hit the anchors exactly; a zero difference vector
        # keeps the whole slice constant
        theta = theta_b if a == 1.0 else theta_a + a * diff
        losses[i], errors[i] = at(theta)
    return LandscapeSlice(kind="segment", coords=alphas,
                          loss_values=losses, error_values=errors)


def _filter_normalized_directions(theta: np.ndarray, shapes, seed: int):
    """Two random directions, each layer block rescaled to the norm of the
    corresponding parameter block, then the second orthogonalized against
    the first."""
    gen = np.random.Generator(np.random.Philox(seed))
    dirs = [gen.standard_normal(theta.size), gen.standard_normal(theta.size)]
    blocks = []
    pos = 0
    for o, i in shapes:
        n = o * i + o
        blocks.append((pos, pos + n))
        pos += n
    for d in dirs:
        for lo, hi in blocks:
            pn = np.linalg.norm(theta[lo:hi])
            dn = np.linalg.norm(d[lo:hi])
            d[lo:hi] *= pn / dn if dn > 0 else 0.0
    d1, d2 = dirs
    n1 = float(np.dot(d1, d1))
    if n1 > 0:
        d2 = d2 - (np.dot(d2, d1) / n1) * d1
    return d1, d2


def slice_2d(theta_center: np.ndarray, seed: int, extent: float, n: int,
             problem: PdeProblem, colloc: CollocationSet,
             shapes) -> LandscapeSlice:
    """Loss and error on an (alpha, beta) grid spanning two seeded,
    filter-normalized directions around a checkpoint."""
    if n < 2:
        raise ValueError("need at least a 2x2 grid")
    theta = np.asarray(theta_center, dtype=np.float64)
    d1, d2 = _filter_normalized_directions(theta, shapes, seed)
    at = _evaluator(problem, colloc, shapes)
    axis = np.linspace(-extent, extent, n)
    coords = np.empty((n * n, 2))
    losses = np.empty(n * n)
    errors = np.empty(n * n)
    k = 0
    for b in axis:
        for a in axis:
            coords[k] = (a, b)
            losses[k], errors[k] = at(theta + a * d1 + b * d2)
            k += 1
    return LandscapeSlice(kind="plane", coords=coords, loss_values=losses,
                          error_values=errors, directions=[d1, d2])


def barrier_height(sl: LandscapeSlice) -> float:
    """Excess loss along a segment above its endpoints, clipped at zero."""
    if sl.kind != "segment":
        raise ValueError("barrier_height expects a segment slice")
    interior = sl.loss_values[1:-1]
    if interior.size == 0:
        return 0.0
    endpoint = max(sl.loss_values[0], sl.loss_values[-1])
    return max(0.0, float(np.max(interior)) - endpoint)


def save_slice_csv(sl: LandscapeSlice, path) -> None:
    """segment: alpha,loss,rmae ; plane: alpha,beta,loss,rmae."""
    def f(v):
        return repr(float(v))

    with open(path, "w") as fh:
        if sl.kind == "segment":
            fh.write("alpha,loss,rmae\n")
            for a, l, e in zip(sl.coords, sl.loss_values, sl.error_values):
                fh.write(f"{f(a)},{f(l)},{f(e)}\n")
        else:
            fh.write("alpha,beta,loss,rmae\n")
            for (a, b), l, e in zip(sl.coords, sl.loss_values,
                                    sl.error_values):
                fh.write(f"{f(a)},{f(b)},{f(l)},{f(e)}\n")
