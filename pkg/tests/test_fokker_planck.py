import numpy as np
import pytest

from helidiff.diagnostics import entropy
from helidiff.errors import ContractViolation, NumericalFailureError
from helidiff.fokker_planck import (DiffusionRHS, EquilibriumSpec, FullRHS,
                                    compute_beta, evolve, fp_rhs_pointwise,
                                    fp_step, make_equilibrium, stable_dt,
                                    stationary_residual)
from helidiff.grid import DensityGrid, flat_grid, random_positive_grid
from helidiff.operators import (CoordinateMap, VectorField3,
                                catalog_hamiltonian, catalog_operator,
                                cosine_hamiltonian, quadratic_hamiltonian)


def test_flat_beltrami_rhs_vanishes():
    g = flat_grid((32, 32, 32))
    r = DiffusionRHS(g, catalog_operator("beltrami"))(g.values)
    assert np.max(np.abs(r)) < 1e-8 * np.max(g.values)


def test_flat_antisym_rhs_equals_charge_source():
    # substituting grad f = 0 leaves df/dt = f B / 8 with B = -4 sin x cos y
    g = flat_grid((48, 48, 48))
    r = DiffusionRHS(g, catalog_operator("antisym"))(g.values)
    X, Y, _ = g.meshgrid()
    expected = g.values * (-4.0 * np.sin(X) * np.cos(Y)) / 8.0
    scale = np.max(np.abs(expected))
    assert np.max(np.abs(r - expected)) < 0.02 * scale


def test_flat_not_stationary_for_unit_norm():
    g = flat_grid((32, 32, 32))
    rhs = DiffusionRHS(g, catalog_operator("unit_norm"))
    assert stationary_residual(g, rhs) > 1e-2


def test_conservative_and_expanded_forms_agree_at_second_order():
    w = catalog_operator("antisym")
    diffs = []
    for n in (16, 32, 64):
        g = flat_grid((n, n, n))
        X, _, Z = g.meshgrid()
        f = (1.0 + 0.3 * np.sin(X) * np.cos(Z)) * g.values
        rhs = DiffusionRHS(g, w)
        diffs.append(np.max(np.abs(rhs.conservative(f) - rhs.expanded(f))))
    assert diffs[0] / diffs[1] > 3.0
    assert diffs[1] / diffs[2] > 3.0


def test_poisson_foliation_equilibrium_residual_refines():
    # f = A exp(-gamma F(C))/lambda is stationary; F periodic so the
    # density lives on the periodic box
    op = catalog_operator("lambda_grad_casimir")
    spec = EquilibriumSpec("casimir_foliation",
                           {"lam": op.lam, "casimir": op.casimir,
                            "F": np.sin, "gamma": 0.3})
    res = []
    for n in (16, 32, 64):
        g = flat_grid((n, n, n))
        eq = make_equilibrium(spec, g)
        res.append(stationary_residual(eq, DiffusionRHS(g, op)))
    assert res[0] / res[1] > 3.0
    assert res[1] / res[2] > 3.0


def test_scaled_beltrami_zeta_equilibrium_is_discretely_stationary():
    # conformally scaled Beltrami field: f = A/|w| (zeta = 0) makes
    # f w proportional to the unscaled Beltrami field, whose discrete curl
    # stays parallel to it; the residual is roundoff at any resolution
    wB = catalog_operator("beltrami")

    def scaled(p):
        p = np.asarray(p, dtype=float)
        return (1.0 + 0.3 * np.cos(p[..., 0]))[..., None] * wB(p)

    w = VectorField3(scaled, name="scaled_beltrami")
    for n in (16, 32):
        g = flat_grid((n, n, n))
        eq = make_equilibrium(EquilibriumSpec("zeta_potential", {"w": w}), g)
        assert stationary_residual(eq, DiffusionRHS(g, w)) < 1e-12


def test_pointwise_zeta_equilibrium_cylinder():
    # w-hat = (-y, x, 0)/rho has b-hat = grad log(rho); f = A/rho is the
    # zeta-potential equilibrium, checked o the n-D pointwise evaluator
    def wcyl(p):
        p = np.asarray(p, dtype=float)
        rho = np.sqrt(p[..., 0] ** 2 + p[..., 1] ** 2)
        return np.stack([-p[..., 1] / rho, p[..., 0] / rho,
                         np.zeros_like(rho)], axis=-1)

    J = VectorField3(wcyl, name="cylinder").to_operator()

    def f(y):
        return 1.0 / np.sqrt(y[0] ** 2 + y[1] ** 2)

    x0 = np.array([1.1, 0.4, 0.2])
    r1 = abs(fp_rhs_pointwise(J, f, x0, fd_step=1e-2))
    r2 = abs(fp_rhs_pointwise(J, f, x0, fd_step=5e-3))
    assert r1 / r2 > 3.0
    assert r2 < 1e-5


def test_fp_step_zero_rhs_is_bitwise_identity():
    g = random_positive_grid((16, 16, 16), seed=2)
    out = fp_step(g, lambda v: np.zeros_like(v), dt=0.1)
    assert np.array_equal(out.values, g.values)
    assert out.time == g.time + 0.1


def test_fp_step_mass_conservation_and_positivity():
    g = random_positive_grid((24, 24, 24), seed=4, amplitude=0.3)
    rhs = DiffusionRHS(g, catalog_operator("antisym"))
    dt = stable_dt(g, rhs, wmax2=6.0)
    clip = []
    f = g
    for _ in range(50):
        f = fp_step(f, rhs, dt, clip)
    assert abs(f.mass() - 1.0) < 1e-12
    assert np.all(f.values >= 0.0)
    assert float(np.sum(clip)) < 1e-12


def test_clip_budget_abort():
    g = flat_grid((8, 8, 8))
    sink = np.zeros(g.shape)
    sink[0, 0, 0] = -1.0  # drives one cell negative, past the clip budget
    with pytest.raises(NumericalFailureError):
        evolve(g, lambda v: sink, t_final=1.0, dt=0.01)


def test_heat_kernel_variance_growth():
    # w = z-hat acts as a 2D Laplacian in (x, y): d<x^2>/dt = 1 at unit noise
    g = DensityGrid((48, 48, 48), side=8.0)
    X, Y, _ = g.meshgrid()
    g.values = np.exp(-(X ** 2 + Y ** 2) / 0.5)
    g.normalize()
    rhs = DiffusionRHS(g, catalog_operator("uniform_z"))
    var0 = float(np.sum(g.values * X ** 2) * g.cell_volume)
    res = evolve(g, rhs, t_final=0.5, dt=stable_dt(g, rhs, 1.0))
    var1 = float(np.sum(res.final.values * X ** 2) * g.cell_volume)
    assert abs((var1 - var0) / 0.5 - 1.0) < 0.02


def test_beltrami_relaxes_to_flat_with_monotone_entropy():
    g = random_positive_grid((24, 24, 24), seed=1)
    rhs = DiffusionRHS(g, catalog_operator("beltrami"))
    res = evolve(g, rhs, t_final=20.0, dt=stable_dt(g, rhs, 2.0),
                 stop_when_flat=5e-4,
                 trace_fns={"S": lambda d: entropy(d, "S")})
    fbar = res.final.values.mean()
    assert np.max(np.abs(res.final.values - fbar)) / fbar <= 1e-3
    S = np.asarray(res.traces["S"])
    assert np.min(np.diff(S)) >= -1e-9


def test_compute_beta_identity():
    g = flat_grid((48, 48, 48))
    w = catalog_operator("grad_casimir")
    ham = cosine_hamiltonian((1.0, 0.7, 0.5))
    for b0 in (0.5, 1.0, 2.0):
        eq = make_equilibrium(EquilibriumSpec("boltzmann",
                                              {"H0": ham, "beta": b0}), g)
        assert abs(compute_beta(eq, w, ham) - b0) < 1e-2
    # flat density: f_j = 0 so beta = 0
    assert abs(compute_beta(g, w, ham)) < 1e-12


def test_compute_beta_euler_rigid_body():
    g = flat_grid((64, 64, 64), side=7.0)
    w = catalog_operator("euler_rigid_body")
    ham = catalog_hamiltonian("rigid_body", inertia=(1.0, 2.0, 3.0))
    eq = make_equilibrium(EquilibriumSpec("boltzmann", {"H0": ham, "beta": 2.0}), g)
    assert abs(compute_beta(eq, w, ham) - 2.0) < 1e-2


def test_compute_beta_degenerate_denominator():
    g = flat_grid((16, 16, 16))
    w = catalog_operator("uniform_z")
    # H depends only on z: J(dH) = w x grad H = 0, no noise coupling
    ham = cosine_hamiltonian((0.0, 0.0, 1.0))
    with pytest.raises(ContractViolation):
        compute_beta(g, w, ham)


def test_full_rhs_energy_neutral_with_adaptive_beta():
    op = catalog_operator("grad_casimir")
    ham = cosine_hamiltonian((1.0, 0.6, 0.4))
    g = DensityGrid((24, 24, 24))
    X, Y, _ = g.meshgrid()
    g.values = np.exp(-np.cos(X) - 0.5 * np.cos(Y))
    g.normalize()
    full = FullRHS(g, op, ham, adaptive=True)
    r = full(g.values)
    dE = float(np.sum(r * full.energy_density) * g.cell_volume)
    assert abs(dE) < 1e-12
    # adaptive beta close to the quadrature-form compute_beta
    assert abs(full.last_beta - compute_beta(g, op, ham)) < 5e-2


def test_full_rhs_boltzmann_residual_refines():
    op = catalog_operator("grad_casimir")
    ham = cosine_hamiltonian((1.0, 0.7, 0.5))
    res = []
    for n in (16, 32, 64):
        g = flat_grid((n, n, n))
        eq = make_equilibrium(EquilibriumSpec("boltzmann", {"H0": ham, "beta": 1.0}), g)
        res.append(stationary_residual(eq, FullRHS(g, op, ham, beta=1.0)))
    assert res[0] / res[1] > 3.0
    assert res[1] / res[2] > 3.0


def test_full_rhs_casimir_z_only_density_is_stationary():
    # J = uniform_z, f = f(z): advection is a z-independent rotation and
    # diffusion acts only in (x, y); the density does not evolve
    op = catalog_operator("uniform_z")
    ham = cosine_hamiltonian((1.0, 1.0, 1.0))
    g = DensityGrid((24, 24, 24))
    _, _, Z = g.meshgrid()
    g.values = 1.0 + 0.4 * np.cos(Z)
    g.normalize()
    r = FullRHS(g, op, ham, beta=0.0)(g.values)
    assert np.max(np.abs(r)) < 1e-13


def test_full_rhs_diagonal_coordinate_map_scaling():
    # with R = diag(s, s, s) the diffusion flux scales by s^2 exactly
    op = catalog_operator("grad_casimir")
    ham = cosine_hamiltonian((0.0, 0.0, 0.0))  # zero drift isolates diffusion
    g = random_positive_grid((16, 16, 16), seed=6)
    base = FullRHS(g, op, ham, beta=0.0)(g.values)
    scaled = FullRHS(g, op, ham, R=CoordinateMap.diagonal_map([2.0, 2.0, 2.0]),
                     beta=0.0)(g.values)
    assert np.allclose(scaled, 4.0 * base, rtol=1e-12, atol=1e-18)


def test_full_rhs_anisotropic_map_against_roll_oracle():
    op = catalog_operator("beltrami")
    ham = cosine_hamiltonian((0.0, 0.0, 0.0))
    g = random_positive_grid((16, 16, 16), seed=8)
    d = np.array([2.0, 1.0, 1.0])
    got = FullRHS(g, op, ham, R=CoordinateMap.diagonal_map(d), beta=0.0)(g.values)

    # independent assembly: F^i = (1/2) sum_k J^{ik} d_k^2 D_j(J^{jk} f)
    Wx, Wy, Wz = g.sample_field(op)
    zero = np.zeros_like(Wx)
    J = [[zero, -Wz, Wy], [Wz, zero, -Wx], [-Wy, Wx, zero]]

    def D(a, ax):
        return (np.roll(a, -1, axis=ax) - np.roll(a, 1, axis=ax)) / (2 * g.widths[ax])

    F = []
    for i in range(3):
        acc = np.zeros(g.shape)
        for k in range(3):
            Uk = sum(D(J[j][k] * g.values, j) for j in range(3))
            acc += 0.5 * J[i][k] * d[k] ** 2 * Uk
        F.append(acc)
    oracle = sum(D(F[i], i) for i in range(3))
    assert np.max(np.abs(got - oracle)) < 1e-14


def test_make_equilibrium_flat_and_gaussian_moments():
    g = flat_grid((16, 16, 16), side=6.0)
    eq = make_equilibrium(EquilibriumSpec("flat"), g)
    assert np.allclose(eq.values, 1.0 / 216.0)

    big = flat_grid((64, 64, 64), side=12.0)
    ham = quadratic_hamiltonian((1.0, 1.0, 1.0))
    eq = make_equilibrium(EquilibriumSpec("boltzmann", {"H0": ham, "beta": 1.0}), big)
    X, Y, Z = big.meshgrid()
    for axis_sq in (X ** 2, Y ** 2, Z ** 2):
        m2 = float(np.sum(eq.values * axis_sq) * big.cell_volume)
        assert abs(m2 - 1.0) < 0.01


def test_make_equilibrium_inv_lambda_profile():
    op = catalog_operator("lambda_grad_casimir")
    g = flat_grid((32, 32, 32))
    eq = make_equilibrium(EquilibriumSpec("casimir_foliation", {"lam": op.lam}), g)
    X, _, _ = g.meshgrid()
    prof = 1.0 / np.sqrt(1.0 + np.cos(X) ** 2)
    prof /= np.sum(prof) * g.cell_volume
    assert np.max(np.abs(eq.values - prof)) < 1e-12


def test_make_equilibrium_unknown_kind():
    with pytest.raises(ContractViolation):
        make_equilibrium(EquilibriumSpec("exotic"), flat_grid((8, 8, 8)))


def test_stable_dt_positive_and_bounded():
    g = flat_grid((24, 24, 24))
    rhs = DiffusionRHS(g, catalog_operator("beltrami"))
    dt = stable_dt(g, rhs, wmax2=2.0)
    heur = 0.2 * float(np.min(g.widths)) ** 2 / 2.0
    assert 0.0 < dt <= heur + 1e-15
