"""Benchmark problems: grids, analytic solutions, residual operators and
constraint violations."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pinnlab import pde_suite as pde
from pinnlab.pde_suite import (CollocationSet, TapeField, boundary_residuals,
                               make_grid, make_problem)

PI = math.pi


class ConstField:
    def __init__(self, c):
        self.c = c

    def value(self, x, t):
        return self.c

    def dx(self, x, t):
        return 0.0

    def dt(self, x, t):
        return 0.0

    def dxx(self, x, t):
        return 0.0

    def dtt(self, x, t):
        return 0.0


class TestGrids:
    def test_101_grid_count(self):
        colloc = make_grid(make_problem("convection"), 101, 101)
        assert colloc.interior.shape == (10201, 2)

    def test_2x2_corners(self):
        colloc = make_grid(make_problem("convection"), 2, 2)
        want = {(0.0, 0.0), (2 * PI, 0.0), (0.0, 1.0), (2 * PI, 1.0)}
        got = {(x, t) for x, t in colloc.interior}
        assert got == want

    def test_t_major_ordering(self):
        colloc = make_grid(make_problem("wave"), 3, 2)
        assert_allclose(colloc.interior,
                        [[0, 0], [0.5, 0], [1, 0],
                         [0, 1], [0.5, 1], [1, 1]])

    def test_wave_initial_sets(self):
        colloc = make_grid(make_problem("wave"), 3, 3)
        tags = dict(colloc.boundary)
        assert tags["initial"].shape == (3, 2)
        assert tags["initial_dt"].shape == (3, 2)
        assert np.all(tags["initial"][:, 1] == 0.0)
        assert np.all(tags["initial_dt"][:, 1] == 0.0)
        # Dirichlet edges skip the corners already owned by the initial set
        assert tags["dirichlet_x0"].shape == (2, 2)
        assert np.all(tags["dirichlet_x0"][:, 1] > 0.0)

    def test_domains(self):
        for name, (xr, tr) in [
            ("convection", ((0, 2 * PI), (0, 1))),
            ("reaction", ((0, 2 * PI), (0, 1))),
            ("wave", ((0, 1), (0, 1))),
            ("allen_cahn", ((-1, 1), (0, 1))),
        ]:
            p = make_problem(name)
            assert p.x_range == pytest.approx(xr)
            assert p.t_range == pytest.approx(tr)

    def test_deterministic(self):
        p = make_problem("reaction")
        a = make_grid(p, 7, 5)
        b = make_grid(p, 7, 5)
        assert np.array_equal(a.interior, b.interior)
        for (ta, pa), (tb, pb) in zip(a.boundary, b.boundary):
            assert ta == tb and np.array_equal(pa, pb)

    def test_small_grid_rejected(self):
        with pytest.raises(ValueError):
            make_grid(make_problem("convection"), 1, 5)

    def test_unknown_problem(self):
        with pytest.raises(ValueError):
            make_problem("burgers")
        with pytest.raises(ValueError):
            make_problem("convection", gamma=2.0)


class TestAnalyticValues:
    def test_convection_points(self):
        assert pde.analytic_convection(0.0, 0.0, 50.0) == 0.0
        assert pde.analytic_convection(PI / 2, 0.0, 50.0) == 1.0
        assert pde.analytic_convection(1.0, 0.1, 50.0) == \
            pytest.approx(math.sin(-4.0), rel=1e-15)

    def test_reaction_t0_collapses_to_bump(self):
        xs = np.linspace(0, 2 * PI, 17)
        h = np.exp(-((xs - PI) ** 2) / (2 * (PI / 4) ** 2))
        assert_allclose(pde.analytic_reaction(xs, 0.0, 5.0), h, rtol=1e-15)

    def test_reaction_logistic_limit(self):
        assert pde.analytic_reaction(PI, 10.0, 5.0) == pytest.approx(1.0)

    def test_reaction_direct_formula(self):
        x, t, rho = PI / 2, 0.5, 5.0
        h = math.exp(-((x - PI) ** 2) / (2 * (PI / 4) ** 2))
        want = h * math.exp(rho * t) / (h * (math.exp(rho * t) - 1) + 1)
        assert pde.analytic_reaction(x, t, rho) == pytest.approx(want,
                                                                 rel=1e-15)

    def test_wave_initial_and_boundary(self):
        beta = 3.0
        xs = np.linspace(0, 1, 11)
        assert_allclose(pde.analytic_wave(xs, 0.0, beta),
                        np.sin(PI * xs) + 0.5 * np.sin(beta * PI * xs),
                        rtol=1e-14, atol=1e-15)
        for t in np.linspace(0, 1, 7):
            assert pde.analytic_wave(0.0, t, beta) == pytest.approx(0.0,
                                                                    abs=1e-14)
            assert pde.analytic_wave(1.0, t, beta) == pytest.approx(0.0,
                                                                    abs=1e-13)


class TestResidualOperators:
    def test_constant_field_convection(self):
        assert pde.residual_convection(ConstField(3.0), (1.0, 0.5), 50.0) \
            == 0.0

    def test_linear_field_convection(self):
        # u = x has u_x = 1, so the residual is beta
        f = TapeField(lambda x, t: x + 0.0 * t)
        assert pde.residual_convection(f, (0.3, 0.7), 50.0) == \
            pytest.approx(50.0, rel=1e-14)

    def test_reaction_fixed_points(self):
        for c in (0.0, 1.0):
            assert pde.residual_reaction(ConstField(c), (1.0, 0.5), 5.0) \
                == 0.0

    def test_wave_trivial(self):
        f = TapeField(lambda x, t: x + 0.0 * t)
        assert pde.residual_wave(f, (0.3, 0.7)) == pytest.approx(0.0,
                                                                 abs=1e-14)
        mode = TapeField(lambda x, t: (PI * x).sin() * (2 * PI * t).cos())
        assert pde.residual_wave(mode, (0.3, 0.7)) == pytest.approx(0.0,
                                                                    abs=1e-9)

    def test_allen_cahn_fixed_points(self):
        for c in (0.0, 1.0, -1.0):
            assert pde.residual_allen_cahn(ConstField(c), (0.2, 0.4)) == 0.0

    @pytest.mark.parametrize("name,params,builder,op", [
        ("convection", {"beta": 50.0},
         lambda: pde.convection_builder(50.0),
         lambda u, p: pde.residual_convection(u, p, 50.0)),
        ("reaction", {"rho": 5.0},
         lambda: pde.reaction_builder(5.0),
         lambda u, p: pde.residual_reaction(u, p, 5.0)),
        ("wave", {"beta": 3.0},
         lambda: pde.wave_builder(3.0),
         lambda u, p: pde.residual_wave(u, p)),
    ])
    def test_analytic_residual_zero(self, name, params, builder, op):
        problem = make_problem(name, **params)
        field = TapeField(builder())
        rng = np.random.default_rng(17)
        (x0, x1), (t0, t1) = problem.x_range, problem.t_range
        for _ in range(100):
            p = (rng.uniform(x0, x1), rng.uniform(t0, t1))
            assert abs(op(field, p)) <= 1e-8


class TestBoundaryResiduals:
    def test_analytic_convection_satisfies_constraints(self):
        problem = make_problem("convection", beta=50.0)
        colloc = make_grid(problem, 9, 9)
        field = TapeField(pde.convection_builder(50.0))
        viol = boundary_residuals(problem, field, colloc.boundary)
        assert viol.shape == (9 + 8,)
        assert np.max(np.abs(viol)) <= 1e-8

    def test_wave_initial_velocity_zero(self):
        problem = make_problem("wave", beta=3.0)
        colloc = make_grid(problem, 9, 5)
        field = TapeField(pde.wave_builder(3.0))
        viol = boundary_residuals(problem, field, colloc.boundary)
        assert np.max(np.abs(viol)) <= 1e-8

    def test_zero_field_ic_violation(self):
        problem = make_problem("convection")
        pts = [("initial", np.array([[PI / 2, 0.0]]))]
        viol = boundary_residuals(problem, ConstField(0.0), pts)
        assert viol[0] == pytest.approx(-1.0, rel=1e-15)

    def test_unknown_tag_rejected(self):
        problem = make_problem("convection")
        with pytest.raises(ValueError):
            boundary_residuals(problem, ConstField(0.0),
                               [("robin", np.array([[0.0, 0.0]]))])

    def test_allen_cahn_analytic_like_constraints(self):
        # a periodic, even closed form satisfies both periodic constraints
        problem = make_problem("allen_cahn")
        colloc = make_grid(problem, 7, 5)
        field = TapeField(lambda x, t: (PI * x).cos() * (1.0 + 0.5 * t))
        viol = dict(zip([t for t, _ in colloc.boundary],
                        np.split(boundary_residuals(problem, field,
                                                    colloc.boundary),
                                 np.cumsum([p.shape[0] for _, p
                                            in colloc.boundary])[:-1])))
        assert np.max(np.abs(viol["periodic_value"])) <= 1e-12
        assert np.max(np.abs(viol["periodic_dx"])) <= 1e-9
