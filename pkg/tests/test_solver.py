import math

import numpy as np
import pytest

from ptorsion import (
    DomainSpec,
    NonDifferentiableError,
    RadialTorsion,
    SolveConfig,
    Solution,
    SolverError,
    build_boundary,
    load_solution,
    residual_check,
    save_solution,
    solve_torsion,
    triangulate,
)
from ptorsion.meshing import BoundaryEdges, Mesh
from ptorsion.solver import (
    FemSpace,
    SolveInfo,
    assemble_energy,
    energy_gradient,
)

RNG = np.random.default_rng(42)


# -- configuration ----------------------------------------------------------------


def test_config_validation():
    with pytest.raises(SolverError, match=r"p must be in \(1,2\]"):
        SolveConfig(p=2.5)
    with pytest.raises(SolverError, match=r"p must be in \(1,2\]"):
        SolveConfig(p=1.0)
    with pytest.raises(SolverError):
        SolveConfig(p=1.5, eps_min=0.0)
    with pytest.raises(SolverError):
        SolveConfig(p=1.5, eps_min=0.2, eps0=0.1)
    with pytest.raises(SolverError):
        SolveConfig(p=1.5, eps_factor=1.0)
    with pytest.raises(SolverError):
        SolveConfig(p=1.5, tol_grad=0.0)


def test_eps_schedule():
    sched = SolveConfig(p=1.5).eps_schedule()
    assert sched[0] == 0.1 and sched[-1] == 1e-8
    assert all(b < a for a, b in zip(sched, sched[1:]))
    assert SolveConfig(p=2.0).eps_schedule() == [1e-8]


# -- energy and gradient -------------------------------------------------------------


def test_energy_zero_field(lab):
    fem = FemSpace.build(lab.mesh("disk", 0.2))
    u = np.zeros(fem.mesh.n_vertices)
    assert assemble_energy(fem, u, 1.5, 0.0) == 0.0
    assert assemble_energy(fem, u, 2.0, 0.0) == 0.0


def test_energy_of_interpolated_oracle(lab):
    # smooth-solution energy is -pi/16; the interpolant can only be above
    mesh = lab.mesh("disk", 0.05)
    fem = FemSpace.build(mesh)
    u = RadialTorsion(2.0, 2, 1.0).value(mesh.points)
    e = assemble_energy(fem, u, 2.0, 0.0)
    assert -math.pi / 16.0 <= e <= -math.pi / 16.0 + 5e-3
    assert e == pytest.approx(-math.pi / 16.0, abs=5e-3)


def test_energy_monotone_in_regularization(lab):
    fem = FemSpace.build(lab.mesh("disk", 0.2))
    u = RadialTorsion(1.5, 2, 1.0).value(fem.mesh.points)
    vals = [assemble_energy(fem, u, 1.5, eps) for eps in (0.5, 0.1, 0.01, 0.0)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    with pytest.raises(SolverError):
        assemble_energy(fem, u, 1.5, -1e-3)


def test_gradient_of_zero_field_is_minus_load(lab):
    fem = FemSpace.build(lab.mesh("disk", 0.2))
    u = np.zeros(fem.mesh.n_vertices)
    g = energy_gradient(fem, u, 1.5, 0.1)
    assert np.allclose(g, -fem.load, rtol=0, atol=1e-15)
    assert np.all(g[fem.interior] < 0)


def test_gradient_matches_finite_differences(lab):
    fem = FemSpace.build(lab.mesh("disk", 0.3))
    n = fem.mesh.n_vertices
    u = 0.05 * RNG.standard_normal(n)
    u[~fem.interior] = 0.0
    p, eps = 1.5, 1e-2
    g = energy_gradient(fem, u, p, eps)
    h = 1e-6
    for i in RNG.choice(np.flatnonzero(fem.interior), size=8, replace=False):
        up, um = u.copy(), u.copy()
        up[i] += h
        um[i] -= h
        fd = (assemble_energy(fem, up, p, eps)
              - assemble_energy(fem, um, p, eps)) / (2.0 * h)
        assert abs(g[i] - fd) / abs(g[i]) < 1e-6


def test_gradient_undefined_at_critical_point_without_regularization(lab):
    fem = FemSpace.build(lab.mesh("disk", 0.3))
    u = np.zeros(fem.mesh.n_vertices)
    with pytest.raises(NonDifferentiableError):
        energy_gradient(fem, u, 1.5, 0.0)
    # p = 2 has no degenerate weight; eps = 0 is fine
    energy_gradient(fem, u, 2.0, 0.0)


# -- the solve itself ------------------------------------------------------------------


def test_disk_solve_hits_oracle_max(lab):
    sol2 = lab.solution("disk", 2.0, 0.05)
    assert sol2.max_value == pytest.approx(0.25, rel=0.01)
    sol15 = lab.solution("disk", 1.5, 0.05)
    assert sol15.max_value == pytest.approx(1.0 / 12.0, rel=0.02)


def test_solution_field_contracts(lab):
    for p in (1.5, 2.0):
        sol = lab.solution("disk", p, 0.1)
        boundary = sol.mesh.is_boundary_vertex
        assert np.all(sol.values[boundary] == 0.0)
        assert np.all(sol.values[~boundary] > 0.0)
        assert np.all(np.isfinite(sol.values))
        assert sol.info.grad_rel <= sol.config.tol_grad


def test_line_search_energy_monotone(lab):
    trace = lab.solution("ellipse", 1.5, 0.1).info.trace
    energies = [step["energy"] for step in trace]
    slack = 1e-11 * max(abs(e) for e in energies)
    assert all(b <= a + slack for a, b in zip(energies, energies[1:]))


def test_stage_bookkeeping(lab):
    info = lab.solution("disk", 1.5, 0.1).info
    eps_seq = [s["eps"] for s in info.stages]
    assert eps_seq == SolveConfig(p=1.5).eps_schedule()
    assert info.iterations == len(info.trace)
    assert info.eps_floor == 1e-8


def test_residual_decreases_across_continuation_stages():
    mesh = triangulate(build_boundary(DomainSpec.disk(1.0)), 0.2)
    fem = FemSpace.build(mesh)
    load_norm = float(np.linalg.norm(fem.load[fem.interior]))
    resid = []
    for eps_stop in (0.1, 0.1 / 4 ** 3, 0.1 / 4 ** 6, 1e-8):
        sol = solve_torsion(mesh, SolveConfig(p=1.5, eps_min=eps_stop))
        g = energy_gradient(fem, sol.values, 1.5, 1e-8)
        resid.append(float(np.linalg.norm(g[fem.interior])) / load_norm)
    assert all(b < a for a, b in zip(resid, resid[1:]))


def test_weak_residual_at_convergence(lab):
    for key in (("disk", 1.5, 0.1), ("ellipse", 1.5, 0.1)):
        sol = lab.solution(*key)
        assert residual_check(sol) <= 10.0 * sol.config.tol_grad


def test_weak_residual_normalization(lab):
    mesh = lab.mesh("disk", 0.2)
    fem = FemSpace.build(mesh)
    cfg = SolveConfig(p=2.0)
    zero = Solution(mesh=mesh, fem=fem, config=cfg,
                    values=np.zeros(mesh.n_vertices),
                    info=SolveInfo(stages=[], iterations=0, energy=0.0,
                                   grad_rel=1.0, eps_floor=cfg.eps_min,
                                   backend="numpy"))
    assert residual_check(zero) == pytest.approx(1.0, rel=1e-12)


def test_oracle_convergence_three_levels():
    curve = build_boundary(DomainSpec.disk(1.0))
    oracle = RadialTorsion(1.5, 2, 1.0)
    errs = []
    for h in (0.2, 0.1, 0.05):
        mesh = triangulate(curve, h)
        sol = solve_torsion(mesh, SolveConfig(p=1.5))
        errs.append(float(np.max(np.abs(sol.values - oracle.value(mesh.points)))))
    assert errs[0] / errs[1] >= 1.7 and errs[1] / errs[2] >= 1.7


def _permuted_copy(mesh: Mesh, perm: np.ndarray) -> Mesh:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    b = mesh.boundary
    boundary = BoundaryEdges(v0=inv[b.v0], v1=inv[b.v1], component=b.component,
                             t_mid=b.t_mid, normal=b.normal, chord=b.chord,
                             arc=b.arc, tri=b.tri)
    return Mesh(points=mesh.points[perm], triangles=inv[mesh.triangles],
                h=mesh.h, vertex_component=mesh.vertex_component[perm],
                vertex_param=mesh.vertex_param[perm], boundary=boundary)


def test_solution_invariant_under_vertex_reordering(lab):
    mesh = lab.mesh("disk", 0.2)
    sol = solve_torsion(mesh, SolveConfig(p=1.5))
    perm = np.random.default_rng(7).permutation(mesh.n_vertices)
    sol_p = solve_torsion(_permuted_copy(mesh, perm), SolveConfig(p=1.5))
    diff = float(np.max(np.abs(sol_p.values - sol.values[perm])))
    assert diff <= 2.0 * sol.config.tol_grad


def test_rerun_is_deterministic(lab):
    mesh = lab.mesh("disk", 0.2)
    a = solve_torsion(mesh, SolveConfig(p=1.5)).values
    b = solve_torsion(mesh, SolveConfig(p=1.5)).values
    assert np.array_equal(a, b)


# -- serialization ----------------------------------------------------------------------


def test_solution_round_trip_bit_identical(tmp_path, lab):
    sol = lab.solution("disk", 1.5, 0.1)
    path = tmp_path / "u.csv"
    save_solution(str(path), sol.mesh, sol.values)
    again = load_solution(str(path), sol.mesh)
    assert np.array_equal(again, sol.values)
