import csv
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from g2torus.errors import PositivityLost, StiffnessAbort
from g2torus.flows import (chi_flow_rhs, contraction_rate, energy_decay_check, energy_E,
                           entropy_F, entropy_rate, flow_run, hitchin_weight, integrate_flow,
                           length_contraction_experiment, parse_chi, power_weight, pressure,
                           time_derivative, transport_K, vol_chi_of, write_flow_csv)
from g2torus.geometry import hitchin_volume
from g2torus.profile import Grid, Profile, d_arr, q_arr

from conftest import densities

TWO_PI = 2 * np.pi


def xs(n):
    return np.arange(n) / n


def cos_profile(n, a):
    return 1 + a * np.cos(TWO_PI * xs(n))


# -- weights -------------------------------------------------------------------


def test_parse_chi():
    assert parse_chi("hitchin").name == "hitchin"
    assert parse_chi(" Heat ").name == "heat"
    assert parse_chi("linear").name == "linear"
    w = parse_chi("power:0.5")
    assert w.value(4.0) == 2.0 and w.d1(4.0) == 0.25
    assert parse_chi(w) is w
    for bad in ("power:x", "power:-1", "cubic", ""):
        with pytest.raises(ValueError):
            parse_chi(bad)


@pytest.mark.parametrize("spec", ["hitchin", "heat", "power:0.3", "power:2.5"])
def test_weight_derivatives(spec):
    w = parse_chi(spec)
    y = np.linspace(0.3, 3, 17)
    h = 1e-5
    assert np.max(np.abs((w.value(y + h) - w.value(y - h)) / (2 * h) - w.d1(y))) < 1e-8
    assert np.max(np.abs((w.d1(y + h) - w.d1(y - h)) / (2 * h) - w.d2(y))) < 1e-7
    r, s = w.r_s(y)
    assert np.allclose(s - r, w.d1(y) / y)
    assert np.max(np.abs(pressure(y, w) - (y * w.d1(y) - w.value(y)))) < 1e-13
    P = pressure(y, w)
    assert np.max(np.abs((pressure(y + h, w) - pressure(y - h, w)) / (2 * h) - w.d2(y) * y)) < 1e-7
    assert P.shape == y.shape


def test_porous_medium_rejected_where_concavity_needed():
    u0 = cos_profile(32, 0.1)
    chi = power_weight(2.0)
    assert not chi.concave
    with pytest.raises(ValueError):
        chi.check_concave(u0)
    with pytest.raises(ValueError):
        length_contraction_experiment(u0, np.sin(TWO_PI * xs(32)), chi=chi)
    with pytest.raises(ValueError):
        energy_decay_check(u0, chi=chi)
    # exploration of the right-hand side stays allowed
    assert abs(np.mean(chi_flow_rhs(u0, chi))) < 1e-15


# -- right-hand side -------------------------------------------------------------


def test_heat_rhs():
    n = 64
    u = cos_profile(n, 0.1)
    want = -0.4 * np.pi ** 2 * np.cos(TWO_PI * xs(n))
    assert np.max(np.abs(chi_flow_rhs(u, "heat") - want)) < 1e-11
    assert np.max(np.abs(chi_flow_rhs(np.full(n, 1.0), "hitchin"))) == 0
    p = chi_flow_rhs(Profile(Grid(n), u), "heat")
    assert isinstance(p, Profile)


@given(densities())
def test_hitchin_rhs_is_laplacian_of_cube_root(u):
    want = 2 * d_arr(d_arr(np.cbrt(u)))
    got = chi_flow_rhs(u, "hitchin")
    assert np.max(np.abs(got - want)) < 1e-10
    assert abs(np.mean(got)) < 1e-15


# -- flow runs -----------------------------------------------------------------


def test_heat_exact_solution():
    n = 128
    states = flow_run(cos_profile(n, 0.1), "heat", 0.1, samples=3)
    want = 1 + 0.1 * np.exp(-4 * np.pi ** 2 * 0.1) * np.cos(TWO_PI * xs(n))
    assert np.max(np.abs(states[-1].u - want)) < 1e-6


def test_constant_flow():
    states = flow_run(np.ones(32), "hitchin", 0.5, samples=4)
    for s in states:
        assert np.max(np.abs(s.u - 1)) == 0
        assert s.energy == 0


def test_hitchin_equilibrates():
    n = 64
    states = flow_run(cos_profile(n, 0.3), "hitchin", 1.0, samples=11)
    assert np.max(np.abs(states[-1].u - 1)) < 1e-3
    vols = np.array([s.vol_chi for s in states])
    assert np.all(np.diff(vols) >= -1e-10)
    assert np.all(vols <= 3.0) and vols[-1] > vols[0]
    assert 3.0 - vols[-1] < 1e-5
    hv = [hitchin_volume(s.u) for s in states]
    assert np.all(np.diff(hv) >= -1e-12) and hv[0] < hv[-1] <= 1.0


@pytest.mark.parametrize("spec", ["heat", "hitchin", "power:0.5", "power:0.2"])
def test_flow_invariants(spec):
    rng = np.random.default_rng(7)
    n = 64
    x = xs(n)
    u0 = 1 + sum(rng.uniform(-0.1, 0.1) * np.cos(TWO_PI * k * x + rng.uniform(0, TWO_PI))
                 for k in (1, 2, 3))
    states = flow_run(u0, spec, 0.01, samples=41)
    masses = np.array([np.mean(s.u) for s in states])
    assert np.max(np.abs(masses - np.mean(u0))) < 1e-9
    vols = np.array([s.vol_chi for s in states])
    assert np.all(np.diff(vols) >= -1e-10)
    # d/dt Vol = E
    ts = np.array([s.t for s in states])
    E = np.array([s.energy for s in states])
    dv = time_derivative(vols, ts)
    assert np.max(np.abs(dv - E)) < 1e-3 * np.max(E)
    assert np.all(E >= 0)


def test_flow_errors():
    with pytest.raises(PositivityLost):
        flow_run(np.r_[np.zeros(1), np.ones(31)], "heat", 0.1)
    with pytest.raises(StiffnessAbort):
        integrate_flow(cos_profile(64, 0.1), "heat", [0.1], courant=1e-13)
    with pytest.raises(ValueError):
        flow_run(np.ones(16), "heat", -1)


def test_flow_csv(tmp_path):
    states = flow_run(cos_profile(32, 0.1), "heat", 0.01, samples=3)
    write_flow_csv(states, tmp_path / "f.csv")
    rows = list(csv.reader(open(tmp_path / "f.csv")))
    assert rows[0] == ["t", "vol_chi", "energy", "entropy", "min_u", "max_u"]
    assert len(rows) == 4 and float(rows[-1][0]) == 0.01


# -- energy and entropy ----------------------------------------------------------


def test_energy_examples():
    assert energy_E(np.ones(32), "hitchin") == 0
    n = 256
    u = cos_profile(n, 0.1)
    du = -0.1 * TWO_PI * np.sin(TWO_PI * xs(n))
    assert abs(energy_E(u, "heat") - np.mean(du ** 2 / u)) < 1e-10


def test_entropy_sign():
    """With ``eta = y^2`` and concave weight the entropy decreases."""
    n = 64
    u0 = cos_profile(n, 0.2)
    states = flow_run(u0, "hitchin", 0.01, samples=41)
    F = np.array([s.entropy for s in states])
    assert np.all(np.diff(F) <= 1e-14)
    rate = entropy_rate(u0, "hitchin", lambda y: 2 * np.ones_like(y))
    assert rate < 0
    assert abs(entropy_F(u0, lambda y: y * y) - states[0].entropy) == 0
    ts = np.array([s.t for s in states])
    assert abs(time_derivative(F, ts)[0] - rate) < 1e-3 * abs(rate)


def test_vol_chi_of_linear_is_mass():
    assert abs(vol_chi_of(cos_profile(32, 0.4), "linear") - 1) < 1e-15


# -- contraction -----------------------------------------------------------------


def test_time_derivative_order():
    errs = []
    for m in (21, 41, 81):
        t = np.linspace(0, 1, m)
        errs.append(np.max(np.abs(time_derivative(np.exp(t), t) - np.exp(t))))
    assert errs[0] / errs[1] > 12 and errs[1] / errs[2] > 12


def test_contraction_zero_variation():
    rep = length_contraction_experiment(cos_profile(32, 0.1), np.zeros(32))
    assert rep.rel_err == 0 and max(map(abs, rep.formula_value)) == 0
    assert max(map(abs, rep.fd_value)) == 0


def test_contraction_heat_example():
    n = 64
    rep = length_contraction_experiment(cos_profile(n, 0.1), np.sin(TWO_PI * xs(n)), eps=1e-4,
                                        chi="heat")
    assert max(rep.formula_value) < 0
    assert max(rep.fd_value) <= 1e-8
    assert rep.rel_err < 1e-3


def test_contraction_rotation_mode():
    n = 64
    u0 = cos_profile(n, 0.1)
    v = d_arr(u0)
    K = transport_K(u0, v)
    assert np.max(np.abs(K - (v - q_arr(v, u0) * v / u0))) == 0
    rep = length_contraction_experiment(u0, v, chi="hitchin")
    assert max(rep.formula_value) <= 0
    assert max(rep.fd_value) <= 1e-8
    assert rep.rel_err < 1e-3


def test_contraction_report_json(tmp_path):
    n = 32
    rep = length_contraction_experiment(cos_profile(n, 0.1), np.sin(TWO_PI * xs(n)), T=0.01,
                                        samples=11)
    rep.write(tmp_path / "c.json")
    d = json.load(open(tmp_path / "c.json"))
    assert {"t_samples", "formula_value", "fd_value", "rel_err"} <= set(d)


@given(densities(n=32, amp_max=0.5), st.sampled_from(["heat", "hitchin", "power:0.5"]))
def test_contraction_rate_nonpositive(u, spec):
    v = np.sin(TWO_PI * xs(32)) + 0.3 * np.cos(2 * TWO_PI * xs(32))
    assert contraction_rate(u, v, spec) <= 0


def test_energy_decay():
    n = 64
    heat = energy_decay_check(cos_profile(n, 0.1), "heat", T=0.05, samples=41)
    assert heat.extra["monotone"]
    assert np.all(np.diff(heat.extra["energy"]) < 0)
    assert heat.rel_err < 1e-3
    hit = energy_decay_check(cos_profile(n, 0.3), "hitchin", T=0.05, samples=41)
    assert hit.extra["monotone"] and hit.rel_err < 1e-3
    flat = energy_decay_check(np.ones(n), "hitchin", T=0.05, samples=11)
    assert max(flat.extra["energy"]) == 0
