import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from g2torus.errors import (DegenerateDensity, GridMismatch, MassMismatch, NoRotation,
                            NotZeroMean, ShockDetected)
from g2torus.geometry import (CircularTransport, _LiftedCDF, connection_U, dirichlet_metric,
                              discrete_circular_ot, find_rotation, geodesic_bvp, geodesic_ivp,
                              geodesic_residual, geodesic_rhs, hessian_vol, hitchin_volume,
                              potential_residual, potential_solve, rotation_path,
                              sectional_curvature, shock_time, transport_K, transport_gauge,
                              transport_residual, transport_solve, vol_chi,
                              vtt_integrand_decomposition)
from g2torus.profile import Grid, Profile, antiderivative_arr, d_arr, eval_arr, q_arr, shift_arr

from conftest import densities, tangents

TWO_PI = 2 * np.pi


def xs(n):
    return np.arange(n) / n


def rot_u0(n=256):
    return 1 + 0.2 * np.cos(TWO_PI * xs(n))


# -- metric and connection ------------------------------------------------------


def test_dirichlet_metric_examples():
    x = xs(64)
    one, s = np.ones(64), np.sin(TWO_PI * x)
    assert abs(dirichlet_metric(one, s, s) - 1 / (8 * np.pi ** 2)) < 1e-10
    assert abs(dirichlet_metric(one, s, s) - 0.0126651) < 1e-7
    assert dirichlet_metric(one, np.zeros(64), s) == 0.0
    with pytest.raises(NotZeroMean):
        dirichlet_metric(one, s + 1, s)
    with pytest.raises(GridMismatch):
        dirichlet_metric(np.ones(32), s, s)


@given(densities(), tangents(), tangents())
def test_dirichlet_metric_cross_form(u, f, g):
    lq = antiderivative_arr(q_arr(f, u) / u)
    assert abs(dirichlet_metric(u, f, g) + np.mean(lq * g)) < 1e-9
    assert abs(dirichlet_metric(u, f, g) - dirichlet_metric(u, g, f)) < 1e-14
    assert dirichlet_metric(u, f, f) >= 0


def test_connection_examples():
    x = xs(64)
    one, s = np.ones(64), np.sin(TWO_PI * x)
    U = connection_U(one, s, s)
    assert np.max(np.abs(U + np.sin(2 * TWO_PI * x) / TWO_PI)) < 1e-14
    assert np.max(np.abs(connection_U(one, np.zeros(64), s))) == 0
    p = connection_U(Profile(Grid(64), one), Profile(Grid(64), s), Profile(Grid(64), s))
    assert isinstance(p, Profile)


@given(densities(), tangents(), tangents())
def test_connection_symmetric(u, f, g):
    assert np.max(np.abs(connection_U(u, f, g) - connection_U(u, g, f))) < 1e-14


def test_metric_compatibility_second_order():
    """``d/dt G(Y, Y) = 2 G(D_t Y, Y)`` along a path, ``D_t Y = Y_t - U'``."""
    n = 64
    x = xs(n)

    def path(t):
        u = 1 + 0.3 * np.cos(TWO_PI * (x + 0.2 * t)) * (1 + 0.5 * t)
        return u / u.mean()

    def field(t):
        return np.sin(TWO_PI * x) * np.cos(t) + 0.3 * np.cos(2 * TWO_PI * x) * t

    t0 = 0.3
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        lhs = (dirichlet_metric(path(t0 + h), field(t0 + h), field(t0 + h))
               - dirichlet_metric(path(t0 - h), field(t0 - h), field(t0 - h))) / (2 * h)
        u, y = path(t0), field(t0)
        ut = (path(t0 + h) - path(t0 - h)) / (2 * h)
        yt = (field(t0 + h) - field(t0 - h)) / (2 * h)
        D = yt - d_arr(connection_U(u, ut, y))
        errs.append(abs(lhs - 2 * dirichlet_metric(u, D, y)))
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5, errs
    assert errs[-1] < 1e-7


def test_geodesic_is_autoparallel():
    u = rot_u0(64)
    f = 0.2 * np.sin(2 * TWO_PI * xs(64))
    _, ft = geodesic_rhs(u, f)
    assert np.max(np.abs(ft - d_arr(connection_U(u, f, f)))) < 1e-12


# -- geodesic equation ------------------------------------------------------------


def test_geodesic_rhs_examples():
    u = rot_u0(64)
    du, df = geodesic_rhs(u, np.zeros(64))
    assert np.max(np.abs(du)) == 0 and np.max(np.abs(df)) == 0
    s = np.sin(TWO_PI * xs(64))
    du, df = geodesic_rhs(np.ones(64), s)
    assert np.array_equal(du, s)
    assert abs(np.mean(df)) < 1e-15


@given(densities(), tangents())
def test_geodesic_rhs_zero_mean(u, f):
    _, df = geodesic_rhs(u, f)
    assert abs(np.mean(df)) < 1e-14


def test_rotation_satisfies_gauge_free_geodesic():
    u0 = rot_u0(256)
    c = 0.37
    path = rotation_path(u0, c, np.linspace(0, 1, 5))
    for u, f, ft in zip(path.u, path.f, path.ft):
        assert geodesic_residual(u, f, ft, gauge=None) < 1e-7
        e = c / np.mean(1 / u)
        assert geodesic_residual(u, f, ft, gauge=e) < 1e-7
    # the canonical representative does not reproduce a rotation
    assert geodesic_residual(path.u[0], path.f[0], path.ft[0], gauge=0.0) > 1e-2


def test_ivp_characteristics():
    n = 256
    x = xs(n)
    path = geodesic_ivp(np.ones(n), np.sin(TWO_PI * x), 0.5, dt=1e-3)
    assert abs(shock_time(np.ones(n), np.sin(TWO_PI * x)) - 1.0) < 1e-12
    q0 = np.cos(TWO_PI * x) / TWO_PI
    dq0 = -np.sin(TWO_PI * x)
    X = x + 0.5 * q0
    want = 1.0 / (1 + 0.5 * dq0)
    got = eval_arr(path.u[-1], X)
    assert abs(got[0] - 1) < 1e-6
    assert np.max(np.abs(got - want)) < 1e-6


def test_ivp_constant_and_errors():
    n = 64
    path = geodesic_ivp(rot_u0(n), np.zeros(n), 0.3)
    assert np.max(np.abs(path.u - rot_u0(n))) == 0
    with pytest.raises(ShockDetected) as exc:
        geodesic_ivp(np.ones(n), np.sin(TWO_PI * xs(n)), 0.95)
    assert abs(exc.value.shock_time - 1) < 1e-12
    with pytest.raises(ValueError):
        geodesic_ivp(np.ones(n), np.sin(TWO_PI * xs(n)), -1)


def test_ivp_from_rotation_velocity_is_canonical_not_rigid():
    """A canonical geodesic starting with a rotation velocity; it drifts from the rigid rotation."""
    n = 128
    u0 = rot_u0(n)
    c = 0.1
    path = geodesic_ivp(u0, c * d_arr(u0), 1.0, dt=1e-3, store_every=100)
    assert np.max(path.burgers_residuals()) < 1e-5
    rigid = shift_arr(u0, c)
    assert np.max(np.abs(path.u[-1] - rigid)) > 1e-2


def _random_ivp(seed, n=256, T=0.4):
    rng = np.random.default_rng(seed)
    x = xs(n)
    u0 = 1 + sum(rng.uniform(-0.15, 0.15) * np.cos(TWO_PI * k * x + rng.uniform(0, TWO_PI))
                 for k in (1, 2))
    f0 = sum(rng.uniform(-0.3, 0.3) * np.sin(TWO_PI * k * x + rng.uniform(0, TWO_PI))
             for k in (1, 2, 3))
    f0 -= f0.mean()
    T = min(T, 0.5 * shock_time(u0, f0))
    return geodesic_ivp(u0, f0, T, dt=1e-3, store_every=20)


@pytest.mark.parametrize("seed", range(3))
def test_ivp_invariants(seed):
    path = _random_ivp(seed)
    assert np.max(path.burgers_residuals()) < 1e-5
    assert np.max(path.hj_variances()) < 1e-5
    assert np.max(np.abs(path.mass_series() - path.mass_series()[0])) < 1e-9
    assert np.max(path.hessian_series()) <= 1e-12
    assert np.max(path.geodesic_residuals()) < 1e-6


def test_ivp_volume_finite_difference():
    n = 256
    x = xs(n)
    u0 = 1 + 0.2 * np.cos(TWO_PI * x)
    f0 = 0.3 * np.sin(2 * TWO_PI * x)
    path = geodesic_ivp(u0, f0, 0.2, dt=1e-3)
    vol = path.vol_series()
    h = path.times[1] - path.times[0]
    fd = (vol[2:] - 2 * vol[1:-1] + vol[:-2]) / h ** 2
    hv = path.hessian_series()[1:-1]
    assert np.max(np.abs(fd - hv)) / np.max(np.abs(hv)) < 1e-4


# -- boundary value problem ---------------------------------------------------------


def test_bvp_identity_pair():
    u = rot_u0(64)
    path = geodesic_bvp(u, u, steps=4)
    assert np.max(np.abs(path.u - u)) < 1e-12
    assert path.dirichlet_length() < 1e-12


def test_bvp_errors():
    u = rot_u0(64)
    with pytest.raises(MassMismatch):
        geodesic_bvp(u, 1.1 * u)
    bad = 1 + np.cos(TWO_PI * xs(64))
    with pytest.raises(DegenerateDensity):
        geodesic_bvp(u, bad)


def _bump(n, centre, k=2.0):
    b = np.exp(k * np.cos(TWO_PI * (xs(n) - centre)))
    return b / b.mean()


def test_bvp_bump_transport():
    n = 512
    u0, u1 = _bump(n, 0.25, k=1.0), _bump(n, 0.75, k=1.0)
    path = geodesic_bvp(u0, u1, steps=20)
    assert np.max(np.abs(path.u[-1] - u1)) < 1e-6
    assert np.max(path.geodesic_residuals()) < 1e-5
    ot = discrete_circular_ot(u0, u1)
    assert abs(path.dirichlet_length() - np.sqrt(ot)) < 1e-4
    speeds = path.speeds()
    assert np.var(speeds) < 1e-6


def test_bvp_is_geodesic():
    n = 256
    u0 = rot_u0(n)
    u1 = 1 + 0.3 * np.sin(2 * TWO_PI * xs(n))
    path = geodesic_bvp(u0, u1, steps=10)
    assert np.max(np.abs(path.u[-1] - u1)) < 1e-6
    assert np.max(path.geodesic_residuals()) < 1e-5
    assert np.max(path.burgers_residuals()) < 1e-5


def test_rotation_pair_minimiser_is_not_rigid():
    """For ``u1 = u0(. + 0.1)`` the cheapest circle map is not the rigid rotation."""
    n = 256
    u0 = rot_u0(n)
    u1 = shift_arr(u0, 0.1)
    path = geodesic_bvp(u0, u1, steps=10)
    ot = path.meta["ot_cost"]
    assert abs(ot - discrete_circular_ot(u0, u1)) < 1e-6
    assert ot < 0.1 * 0.1 ** 2
    assert np.max(np.abs(path.u[5] - shift_arr(u0, 0.05))) > 1e-3


def test_bvp_rigid_shift_parameter():
    """The shift ``-F0(0.1)`` selects ``T(x) = x - 0.1`` and reproduces the rotation."""
    n = 128
    u0 = rot_u0(n)
    u1 = shift_arr(u0, 0.1)
    theta = -float(_LiftedCDF(u0)(np.array([0.1]))[0])
    path = geodesic_bvp(u0, u1, steps=2, shift=theta)
    assert np.max(np.abs(path.u[1] - shift_arr(u0, 0.05))) < 1e-10
    assert np.max(np.abs(path.u[-1] - u1)) < 1e-10
    assert abs(CircularTransport(u0, u1, theta).cost() - 0.01) < 1e-10


# -- potential, volume, Hessian, curvature ----------------------------------------------


def test_potential_examples():
    x = xs(64)
    s = np.sin(TWO_PI * x)
    beta, alpha = potential_solve(np.ones(64), s)
    assert np.max(np.abs(beta - s / (4 * np.pi ** 2))) < 1e-14
    assert abs(1 / (4 * np.pi ** 2) - 0.02533) < 1e-5
    assert np.max(np.abs(alpha + np.cos(TWO_PI * x) / TWO_PI)) < 1e-14
    b0, a0 = potential_solve(np.ones(64), np.zeros(64))
    assert np.max(np.abs(b0)) == 0 and np.max(np.abs(a0)) == 0


@given(densities(n=128), tangents(n=128))
def test_potential_residual(u, f):
    beta, alpha = potential_solve(u, f)
    assert potential_residual(u, beta, f) < 1e-8
    assert abs(np.mean(beta)) < 1e-12
    assert np.max(np.abs(alpha - q_arr(f, u))) == 0


def test_volume_examples():
    assert hitchin_volume(np.ones(64)) == 1.0
    assert hitchin_volume(1 + 0.5 * np.cos(TWO_PI * xs(64))) < 1
    assert abs(vol_chi(rot_u0(64), lambda y: y) - 1) < 1e-15


@given(densities())
def test_volume_bounded_by_one(u):
    assert hitchin_volume(u) <= 1 + 1e-15


def test_hessian_examples():
    x = xs(64)
    assert abs(hessian_vol(np.ones(64), np.sin(TWO_PI * x)) + 1 / 9) < 1e-8
    assert hessian_vol(rot_u0(64), np.zeros(64)) == 0


@given(densities(n=256, amp_max=0.4), tangents(n=256), st.floats(-2, 2))
def test_hessian_decomposition(u, f, e):
    main, I1, I2 = vtt_integrand_decomposition(u, f, gauge=e)
    a = q_arr(f, u) + e
    da_u = f / u - a * d_arr(u) / u ** 2  # quotient rule with a' = f
    assert np.max(np.abs(main + I1 + I2 + 4 * da_u ** 2)) < 1e-10 * max(1, np.max(da_u ** 2))
    hv = hessian_vol(u, f, gauge=e)
    assert abs(np.mean(np.cbrt(u) * (main + I1 + I2)) / 18 - hv) < 1e-9 * max(1, abs(hv))
    assert hessian_vol(u, f, gauge=e) <= 0


def test_curvature_examples():
    x = xs(64)
    one, s, c = np.ones(64), np.sin(TWO_PI * x), np.cos(TWO_PI * x)
    assert abs(sectional_curvature(one, s, c) - 3 / (16 * np.pi ** 2)) < 1e-10
    u = rot_u0(64)
    assert abs(sectional_curvature(u, s, 2 * s)) < 1e-24


@given(densities(), tangents(), tangents(), st.floats(-3, 3))
def test_curvature_properties(u, f, g, c):
    k = sectional_curvature(u, f, g)
    assert k >= 0
    assert abs(k - sectional_curvature(u, g, f)) <= 1e-14 * max(1, k)
    assert abs(sectional_curvature(u, c * f, g) - c * c * k) <= 1e-12 * max(1, k)
    assert abs(sectional_curvature(u, f, c * f)) < 1e-12


# -- rotations -------------------------------------------------------------------------


def test_transport_solve_recovers_shift():
    n = 256
    u0 = rot_u0(n) + 0.05 * np.sin(3 * TWO_PI * xs(n))
    u1 = shift_arr(u0, 0.3)
    path = transport_solve(u0, u1)
    assert abs(path.meta["shift"] - 0.3) < 1e-8
    assert np.max(np.abs(path.u[-1] - u1)) < 1e-8
    for u, f in zip(path.u, path.f):
        assert transport_residual(u, f, gauge=None) < 1e-7
        assert transport_residual(u, f, gauge=transport_gauge(u, f)) < 1e-7


def test_transport_solve_trivial_and_failure():
    n = 128
    u0 = rot_u0(n)
    path = transport_solve(u0, u0)
    assert abs(path.meta["shift"]) < 1e-8
    x = xs(n)
    with pytest.raises(NoRotation):
        find_rotation(1 + 0.1 * np.cos(TWO_PI * x), 1 + 0.1 * np.cos(2 * TWO_PI * x))


def test_rotation_is_torsion_free_direction():
    """Zero Hessian along a rotation forces ``K(f) = 0`` in the matching gauge."""
    u0 = rot_u0(256)
    path = rotation_path(u0, 0.25, np.linspace(0, 1, 6))
    for u, f in zip(path.u, path.f):
        e = transport_gauge(u, f)
        assert abs(hessian_vol(u, f, gauge=e)) < 1e-12
        assert transport_residual(u, f, gauge=e) < 1e-6
    # in the canonical gauge K does not vanish on a rotation
    assert np.max(np.abs(transport_K(path.u[0], path.f[0]))) > 1e-3


# -- artifacts ---------------------------------------------------------------------------


def test_path_artifacts(tmp_path):
    path = geodesic_ivp(np.ones(32), np.sin(TWO_PI * xs(32)), 0.1, dt=0.01)
    path.to_csv(tmp_path / "p.csv")
    rows = list(csv.reader(open(tmp_path / "p.csv")))
    assert rows[0] == ["t", "x_index", "u", "f", "q"]
    assert len(rows) == 1 + len(path) * 32
    path.write_summary(tmp_path / "s.json")
    s = json.load(open(tmp_path / "s.json"))
    assert set(s) == {"vol_series", "hessian_series", "shock_margin", "dirichlet_length"}
