"""Benchmark problems: 1-D convection, reaction, wave and Allen-Cahn.

Each problem carries its residual operator (expressed over the derivative
channels u, u_x, u_t, u_xx, u_tt), its initial/boundary constraint terms,
the domain, and a reference solution (closed form for three of them, a
semi-implicit finite-difference solve for Allen-Cahn).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import record, derivative_ref
from .precision import FP64

PI = math.pi


# ---------------------------------------------------------------------------
# closed-form solutions

def analytic_convection(x, t, beta):
    return np.sin(x - beta * t)


def analytic_reaction(x, t, rho):
    h = np.exp(-((x - PI) ** 2) / (2.0 * (PI / 4.0) ** 2))
    e = np.exp(rho * t)
    return h * e / (h * (e - 1.0) + 1.0)


def analytic_wave(x, t, beta):
    # The half weight on the second harmonic makes the standing wave match
    # both initial conditions; without it the t=0 slice disagrees with the
    # stated initial displacement.
    return (np.sin(PI * x) * np.cos(2.0 * PI * t)
            + 0.5 * np.sin(beta * PI * x) * np.cos(2.0 * beta * PI * t))


def convection_builder(beta):
    def u(x, t):
        return (x - beta * t).sin()
    return u


def reaction_builder(rho):
    inv_two_sigma2 = 1.0 / (2.0 * (PI / 4.0) ** 2)

    def u(x, t):
        h = (-((x - PI) ** 2 * inv_two_sigma2)).exp()
        e = (rho * t).exp()
        return h * e / (h * (e - 1.0) + 1.0)
    return u


def wave_builder(beta):
    def u(x, t):
        return ((PI * x).sin() * (2.0 * PI * t).cos()
                + 0.5 * ((beta * PI * x).sin() * (2.0 * beta * PI * t).cos()))
    return u


# ---------------------------------------------------------------------------
# fields: anything exposing value/dx/dt/dxx/dtt at a point

class TapeField:
    """Differentiable view of a closed-form expression via the tape engine."""

    def __init__(self, builder, precision=FP64):
        self.builder = builder
        self.precision = precision

    def _deriv(self, x, t, which):
        rec = record(self.builder, (x, t), (), self.precision)
        if which == "u":
            return rec.value
        return derivative_ref(rec, which).value

    def value(self, x, t):
        return self._deriv(x, t, "u")

    def dx(self, x, t):
        return self._deriv(x, t, "dx")

    def dt(self, x, t):
        return self._deriv(x, t, "dt")

    def dxx(self, x, t):
        return self._deriv(x, t, "dxx")

    def dtt(self, x, t):
        return self._deriv(x, t, "dtt")


class MlpField(TapeField):
    """Differentiable view of a network checkpoint (scalar path)."""

    def __init__(self, params, precision=FP64):
        from .model import build_forward
        super().__init__(build_forward(params), precision)


# ---------------------------------------------------------------------------
# residual operators (field form, used by tests and oracles)

def residual_convection(u, p, beta):
    x, t = p
    return u.dt(x, t) + beta * u.dx(x, t)


def residual_reaction(u, p, rho):
    x, t = p
    v = u.value(x, t)
    return u.dt(x, t) - rho * v * (1.0 - v)


def residual_wave(u, p):
    x, t = p
    return u.dtt(x, t) - 4.0 * u.dxx(x, t)


def residual_allen_cahn(u, p):
    x, t = p
    v = u.value(x, t)
    return u.dt(x, t) - 0.0001 * u.dxx(x, t) + 5.0 * v ** 3 - 5.0 * v


# ---------------------------------------------------------------------------
# problem definitions

@dataclass
class PdeProblem:
    """One benchmark problem: residual, constraints, domain, reference."""

    name: str
    params: dict
    x_range: tuple[float, float]
    t_range: tuple[float, float]
    channels: tuple[str, ...]          # derivative channels in the residual
    boundary_tags: tuple[str, ...]     # constraint kinds, canonical order

    def initial_condition(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.name == "convection":
            return np.sin(x)
        if self.name == "reaction":
            return np.exp(-((x - PI) ** 2) / (2.0 * (PI / 4.0) ** 2))
        if self.name == "wave":
            b = self.params["beta"]
            return np.sin(PI * x) + 0.5 * np.sin(b * PI * x)
        return x ** 2 * np.cos(PI * x)

    def analytic_field(self) -> TapeField:
        if self.name == "convection":
            return TapeField(convection_builder(self.params["beta"]))
        if self.name == "reaction":
            return TapeField(reaction_builder(self.params["rho"]))
        if self.name == "wave":
            return TapeField(wave_builder(self.params["beta"]))
        raise ValueError("allen_cahn has no closed-form solution")

    def reference_on(self, xs, ts) -> np.ndarray:
        """Reference solution on the tensor grid, shape (nt, nx)."""
        if self.name == "allen_cahn":
            return allen_cahn_reference(xs, ts)
        xg, tg = np.meshgrid(xs, ts)
        if self.name == "convection":
            return analytic_convection(xg, tg, self.params["beta"])
        if self.name == "reaction":
            return analytic_reaction(xg, tg, self.params["rho"])
        return analytic_wave(xg, tg, self.params["beta"])


_DEFAULT_PARAMS = {
    "convection": {"beta": 50.0},
    "reaction": {"rho": 5.0},
    "wave": {"beta": 3.0},
    "allen_cahn": {},
}

_DOMAINS = {
    "convection": ((0.0, 2.0 * PI), (0.0, 1.0)),
    "reaction": ((0.0, 2.0 * PI), (0.0, 1.0)),
    "wave": ((0.0, 1.0), (0.0, 1.0)),
    "allen_cahn": ((-1.0, 1.0), (0.0, 1.0)),
}

_CHANNELS = {
    "convection": ("ux", "ut"),
    "reaction": ("u", "ut"),
    "wave": ("uxx", "utt"),
    "allen_cahn": ("u", "ut", "uxx"),
}

_BOUNDARY_TAGS = {
    "convection": ("initial", "periodic_value"),
    "reaction": ("initial", "periodic_value"),
    "wave": ("initial", "initial_dt", "dirichlet_x0", "dirichlet_x1"),
    "allen_cahn": ("initial", "periodic_value", "periodic_dx"),
}


def make_problem(name: str, **params) -> PdeProblem:
    if name not in _DEFAULT_PARAMS:
        raise ValueError(f"unknown problem {name!r}; expected one of "
                         f"{sorted(_DEFAULT_PARAMS)}")
    p = dict(_DEFAULT_PARAMS[name])
    for k, v in params.items():
        if k not in p:
            raise ValueError(f"{name} takes no parameter {k!r}")
        p[k] = float(v)
    return PdeProblem(name=name, params=p,
                      x_range=_DOMAINS[name][0], t_range=_DOMAINS[name][1],
                      channels=_CHANNELS[name],
                      boundary_tags=_BOUNDARY_TAGS[name])


# ---------------------------------------------------------------------------
# collocation grids

@dataclass
class CollocationSet:
    """Interior points plus tagged constraint points.

    Interior ordering is t-major (all x for the first t, then the next t).
    Periodic tags store the representative point on the left edge; the
    paired right-edge point is implied by the problem domain.
    """

    interior: np.ndarray                      # (N, 2)
    boundary: list[tuple[str, np.ndarray]]    # [(tag, (n, 2) points)]
    xs: np.ndarray
    ts: np.ndarray

    @property
    def n_constraints(self) -> int:
        return sum(pts.shape[0] for _, pts in self.boundary)


def make_grid(problem: PdeProblem, nx: int, nt: int) -> CollocationSet:
    """Uniform tensor grid including endpoints; corner points belong to the
    initial-condition set, so periodic/Dirichlet tags skip t = t0."""
    if nx < 2 or nt < 2:
        raise ValueError("nx and nt must be >= 2")
    (x0, x1), (t0, t1) = problem.x_range, problem.t_range
    xs = np.linspace(x0, x1, nx)
    ts = np.linspace(t0, t1, nt)
    interior = np.column_stack([np.tile(xs, nt), np.repeat(ts, nx)])

    def pts(xvals, tvals):
        return np.column_stack([np.broadcast_to(xvals, np.broadcast_shapes(
            np.shape(xvals), np.shape(tvals))).ravel(),
            np.broadcast_to(tvals, np.broadcast_shapes(
                np.shape(xvals), np.shape(tvals))).ravel()])

    boundary = []
    for tag in problem.boundary_tags:
        if tag in ("initial", "initial_dt"):
            boundary.append((tag, pts(xs, t0)))
        elif tag == "dirichlet_x0":
            boundary.append((tag, pts(x0, ts[1:])))
        elif tag == "dirichlet_x1":
            boundary.append((tag, pts(x1, ts[1:])))
        elif tag in ("periodic_value", "periodic_dx"):
            boundary.append((tag, pts(x0, ts[1:])))
        else:
            raise ValueError(f"unknown boundary tag {tag!r}")
    return CollocationSet(interior=interior, boundary=boundary, xs=xs, ts=ts)


def boundary_residuals(problem: PdeProblem, u, boundary) -> np.ndarray:
    """Per-point constraint violations for a field, in tag order."""
    x1 = problem.x_range[1]
    out = []
    for tag, pts in boundary:
        for x, t in pts:
            if tag == "initial":
                out.append(u.value(x, t) - float(problem.initial_condition(x)))
            elif tag == "initial_dt":
                out.append(u.dt(x, t))
            elif tag in ("dirichlet_x0", "dirichlet_x1"):
                out.append(u.value(x, t))
            elif tag == "periodic_value":
                out.append(u.value(x, t) - u.value(x1, t))
            elif tag == "periodic_dx":
                out.append(u.dx(x, t) - u.dx(x1, t))
            else:
                raise ValueError(f"unknown boundary tag {tag!r}")
    return np.asarray(out)


# ---------------------------------------------------------------------------
# residuals over channel arrays (vectorized training path)

def residual_arrays(problem: PdeProblem, ch: dict, spec) -> np.ndarray:
    """Residual for a batch from its channel arrays, under spec arithmetic."""
    r = spec.round_array
    dt = spec.dtype
    if problem.name == "convection":
        return r(ch["ut"] + r(dt(problem.params["beta"]) * ch["ux"]))
    if problem.name == "reaction":
        rho = dt(problem.params["rho"])
        u = ch["u"]
        growth = r(rho * r(u * r(dt(1.0) - u)))
        return r(ch["ut"] - growth)
    if problem.name == "wave":
        return r(ch["utt"] - r(dt(4.0) * ch["uxx"]))
    u = ch["u"]
    cubic = r(dt(5.0) * r(u * r(u * u)))
    return r(r(r(ch["ut"] - r(dt(1e-4) * ch["uxx"])) + cubic)
             - r(dt(5.0) * u))


def residual_partials(problem: PdeProblem, ch: dict, spec) -> dict:
    """d(residual)/d(channel) arrays for the backward pass."""
    r = spec.round_array
    dt = spec.dtype
    if problem.name == "convection":
        one = np.ones_like(ch["ut"])
        return {"ut": one, "ux": r(dt(problem.params["beta"]) * one)}
    if problem.name == "reaction":
        rho = dt(problem.params["rho"])
        u = ch["u"]
        one = np.ones_like(u)
        du = r(r(dt(2.0) * r(rho * u)) - rho)
        return {"ut": one, "u": du}
    if problem.name == "wave":
        one = np.ones_like(ch["utt"])
        return {"utt": one, "uxx": r(dt(-4.0) * one)}
    u = ch["u"]
    one = np.ones_like(u)
    du = r(r(dt(15.0) * r(u * u)) - dt(5.0))
    return {"ut": one, "uxx": r(dt(-1e-4) * one), "u": du}


# ---------------------------------------------------------------------------
# Allen-Cahn reference oracle

_AC_CACHE: dict = {}


def allen_cahn_reference(xs, ts, n_space: int = 2048, n_time: int = 20000,
                         n_snapshots: int = 2000) -> np.ndarray:
    """Reference Allen-Cahn solution sampled onto a (ts, xs) grid.

    Semi-implicit finite differences on a fine periodic grid: the diffusion
    term is treated implicitly (the circulant second-difference system is
    solved exactly in Fourier space), the cubic reaction explicitly.
    Sampling is bilinear in (x, t) from snapshots at fixed times; the t = 0
    row is the initial condition evaluated exactly.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    key = (xs.tobytes(), ts.tobytes(), n_space, n_time, n_snapshots)
    if key in _AC_CACHE:
        return _AC_CACHE[key].copy()

    if n_time % n_snapshots:
        raise ValueError("n_time must be a multiple of n_snapshots")
    stride = n_time // n_snapshots
    h = 2.0 / n_space
    dt = 1.0 / n_time
    fine_x = -1.0 + h * np.arange(n_space)
    u = fine_x ** 2 * np.cos(PI * fine_x)

    k = np.arange(n_space // 2 + 1)
    lam = (2.0 - 2.0 * np.cos(2.0 * PI * k / n_space)) / h ** 2
    denom = 1.0 + dt * 0.0001 * lam

    snaps = np.empty((n_snapshots + 1, n_space))
    snaps[0] = u
    for step in range(1, n_time + 1):
        rhs = u + dt * (5.0 * u - 5.0 * u ** 3)
        u = np.fft.irfft(np.fft.rfft(rhs) / denom, n=n_space)
        if step % stride == 0:
            if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > 10.0:
                raise RuntimeError("Allen-Cahn reference solver diverged")
            snaps[step // stride] = u

    # bilinear sample; x wraps periodically so x = 1 reads the x = -1 column
    snap_t = np.linspace(0.0, 1.0, n_snapshots + 1)
    xq = np.mod(xs + 1.0, 2.0)
    ix = np.minimum((xq / h).astype(int), n_space - 1)
    fx = xq / h - ix
    ixp = (ix + 1) % n_space
    it_ = np.minimum((ts / (1.0 / n_snapshots)).astype(int), n_snapshots - 1)
    ft = ts / (1.0 / n_snapshots) - it_

    out = np.empty((ts.size, xs.size))
    for j, t in enumerate(ts):
        if t == 0.0:
            out[j] = xs ** 2 * np.cos(PI * xs)
            continue
        lo = snaps[it_[j]]
        hi = snaps[it_[j] + 1]
        row_lo = lo[ix] * (1.0 - fx) + lo[ixp] * fx
        row_hi = hi[ix] * (1.0 - fx) + hi[ixp] * fx
        out[j] = row_lo * (1.0 - ft[j]) + row_hi * ft[j]
    _AC_CACHE[key] = out
    return out.copy()
