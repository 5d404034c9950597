r"""Gradient flows of weighted volumes ``Vol_chi(u) = int chi(u)``.

The flow is

.. math::

    u_t = -(\tilde\tau)_x, \qquad \tilde\tau = \chi_{uu}(u)\, u_x\, u,

the heat equation for ``chi = y(1 - log y)`` and ``u_t = 2 (u^{1/3})_xx``
for ``chi = 3 y^{1/3}``. Along it ``d/dt Vol_chi = E(u) = int tau~^2/u``,
and for concave ``chi`` the Dirichlet length of a variation decays at the
rate ``2 int chi_uu K(u_s)^2``, with ``K(v) = v - Q(v) u_x/u``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import PositivityLost, StiffnessAbort
from .geometry import dirichlet_metric
from .profile import EPS_POS, Profile, d_arr, q_arr


@dataclass(frozen=True)
class WeightFn:
    """A weight ``chi`` with its first two derivatives."""

    name: str
    value: Callable
    d1: Callable
    d2: Callable
    concave: bool = True
    pressure: Callable | None = None  # closed form of y chi_u - chi, avoids cancellation

    def r_s(self, u):
        """``(r, s) = (chi_uu, chi_uu + chi_u/u)``."""
        r = self.d2(u)
        return r, r + self.d1(u) / u

    def check_concave(self, u) -> None:
        """Raise if ``chi_uu > 0`` anywhere on the sampled range of ``u``."""
        u = np.asarray(u, dtype=float)
        ys = np.linspace(np.min(u), np.max(u), 33)
        if not self.concave or np.any(self.d2(ys) > 1e-14):
            raise ValueError(f"weight {self.name!r} is not concave on [{ys[0]:.4g}, {ys[-1]:.4g}]")


def power_weight(p: float) -> WeightFn:
    p = float(p)
    if p <= 0:
        raise ValueError("power weight needs p > 0")
    return WeightFn(
        f"power:{p:g}",
        lambda y: y ** p,
        lambda y: p * y ** (p - 1),
        lambda y: p * (p - 1) * y ** (p - 2),
        concave=p <= 1,
        pressure=lambda y: (p - 1) * y ** p,
    )


def hitchin_weight() -> WeightFn:
    return WeightFn(
        "hitchin",
        lambda y: 3 * np.cbrt(y),
        lambda y: np.cbrt(y) ** -2,
        lambda y: -2.0 / 3.0 * np.cbrt(y) ** -5,
        pressure=lambda y: -2 * np.cbrt(y),
    )


def heat_weight() -> WeightFn:
    return WeightFn(
        "heat",
        lambda y: y * (1 - np.log(y)),
        lambda y: -np.log(y),
        lambda y: -1.0 / np.asarray(y, dtype=float),
        pressure=lambda y: -np.asarray(y, dtype=float),
    )


def linear_weight() -> WeightFn:
    return WeightFn(
        "linear",
        lambda y: np.asarray(y, dtype=float) * 1.0,
        lambda y: np.ones_like(np.asarray(y, dtype=float)),
        lambda y: np.zeros_like(np.asarray(y, dtype=float)),
        pressure=lambda y: np.zeros_like(np.asarray(y, dtype=float)),
    )


def parse_chi(spec: str | WeightFn) -> WeightFn:
    """Parse ``power:p``, ``hitchin``, ``heat`` or ``linear``."""
    if isinstance(spec, WeightFn):
        return spec
    s = spec.strip().lower()
    if s == "hitchin":
        return hitchin_weight()
    if s == "heat":
        return heat_weight()
    if s == "linear":
        return linear_weight()
    if s.startswith("power:"):
        try:
            p = float(s.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad power exponent in {spec!r}") from None
        return power_weight(p)
    raise ValueError(f"unknown chi spec {spec!r}; expected power:p, hitchin, heat or linear")


def _arr(p):
    return np.asarray(p.values if isinstance(p, Profile) else p, dtype=float)


def pressure(u, chi: WeightFn) -> np.ndarray:
    """``P(u) = u chi_u(u) - chi(u)``, so that ``P' = chi_uu u u'``."""
    u = _arr(u)
    if chi.pressure is not None:
        return chi.pressure(u)
    return u * chi.d1(u) - chi.value(u)


def tau_tilde(u, chi: WeightFn) -> np.ndarray:
    """``chi_uu(u) u' u``, differentiated in the conservative form ``P(u)'``."""
    return d_arr(pressure(u, chi))


def chi_flow_rhs(u, chi):
    """``u_t = -(chi_uu(u) u' u)'``; exactly zero-mean."""
    chi = parse_chi(chi)
    ua = _arr(u)
    out = -d_arr(tau_tilde(ua, chi))
    out -= np.mean(out)
    return Profile(u.grid, out) if isinstance(u, Profile) else out


def energy_E(u, chi) -> float:
    """``int tau~^2 / u``, the rate of change of ``Vol_chi`` along the flow."""
    chi = parse_chi(chi)
    u = _arr(u)
    return float(np.mean(tau_tilde(u, chi) ** 2 / u))


def entropy_F(u, eta: Callable) -> float:
    """``int eta(u)``."""
    return float(np.mean(eta(_arr(u))))


def entropy_rate(u, chi, eta_dd: Callable) -> float:
    """``d/dt int eta(u) = int eta''(u) chi_uu(u) u'^2 u``."""
    chi = parse_chi(chi)
    u = _arr(u)
    return float(np.mean(eta_dd(u) * chi.d2(u) * d_arr(u) ** 2 * u))


def transport_K(u, v) -> np.ndarray:
    u, v = _arr(u), _arr(v)
    return v - q_arr(v, u) * d_arr(u) / u


def contraction_rate(u, us, chi) -> float:
    """``2 int chi_uu(u) K(u_s)^2``."""
    chi = parse_chi(chi)
    u = _arr(u)
    return float(2 * np.mean(chi.d2(u) * transport_K(u, us) ** 2))


@dataclass
class FlowState:
    t: float
    u: np.ndarray
    vol_chi: float
    energy: float
    entropy: float


def _square(y):
    return y * y


def stable_dt(u, chi: WeightFn, courant: float = 0.2) -> float:
    """Diffusive step bound ``courant / (max|chi_uu u| n^2)``."""
    D = float(np.max(np.abs(chi.d2(u) * u)))
    n = len(u)
    return math.inf if D == 0 else courant / (D * n * n)


def _rk4_step(u, chi, h):
    k1 = chi_flow_rhs(u, chi)
    k2 = chi_flow_rhs(u + 0.5 * h * k1, chi)
    k3 = chi_flow_rhs(u + 0.5 * h * k2, chi)
    k4 = chi_flow_rhs(u + h * k3, chi)
    return u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_flow(u0, chi, times, courant: float = 0.2, min_dt: float = 1e-12):
    """Evolve ``u0`` and return the states at the increasing output ``times``."""
    chi = parse_chi(chi)
    u = _arr(u0).copy()
    if np.min(u) <= EPS_POS:
        raise PositivityLost(f"initial density min {np.min(u):.3e} below floor")
    times = np.asarray(times, dtype=float)
    out = []
    t = 0.0
    for target in times:
        while t < target - 1e-15:
            h = min(stable_dt(u, chi, courant), target - t)
            if h < min_dt and target - t > min_dt:
                raise StiffnessAbort(f"time step {h:.3e} underflowed at t={t:.6g}")
            u = _rk4_step(u, chi, h)
            t = target if target - t - h < 1e-15 else t + h
            if not np.all(np.isfinite(u)) or np.min(u) < EPS_POS:
                raise PositivityLost(f"density min {np.min(u):.3e} at t={t:.6g}")
        out.append(u.copy())
    return np.array(out)


def flow_run(u0, chi, T: float, samples: int = 11, courant: float = 0.2,
             eta: Callable = _square, times=None) -> list[FlowState]:
    """Run the chi flow to ``T`` and record diagnostics at ``samples`` times.

    Raises
    ------
    PositivityLost
        If the density leaves the positive cone.
    StiffnessAbort
        If the adaptive step drops below ``1e-12``.
    """
    chi = parse_chi(chi)
    if T < 0:
        raise ValueError("final time must be non-negative")
    ts = np.linspace(0.0, T, samples) if times is None else np.asarray(times, dtype=float)
    us = integrate_flow(u0, chi, ts, courant)
    return [FlowState(float(t), u, vol_chi_of(u, chi), energy_E(u, chi), entropy_F(u, eta))
            for t, u in zip(ts, us)]


def vol_chi_of(u, chi) -> float:
    return float(np.mean(parse_chi(chi).value(_arr(u))))


def write_flow_csv(states, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "vol_chi", "energy", "entropy", "min_u", "max_u"])
        for s in states:
            w.writerow([repr(s.t), repr(s.vol_chi), repr(s.energy), repr(s.entropy),
                        repr(float(np.min(s.u))), repr(float(np.max(s.u)))])


@dataclass
class ContractionReport:
    t_samples: list
    formula_value: list
    fd_value: list
    rel_err: float
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"t_samples": self.t_samples, "formula_value": self.formula_value,
                "fd_value": self.fd_value, "rel_err": self.rel_err, **self.extra}

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)


def time_derivative(y, t) -> np.ndarray:
    """Fourth-order difference on uniform samples, one-sided five-point stencils at the ends."""
    y = np.asarray(y, dtype=float)
    t = np.asarray(t, dtype=float)
    if len(y) < 5:
        return np.gradient(y, t, edge_order=2)
    h = t[1] - t[0]
    d = np.empty_like(y)
    d[2:-2] = (y[:-4] - 8 * y[1:-3] + 8 * y[3:-1] - y[4:]) / (12 * h)
    f0 = np.array([-25, 48, -36, 16, -3]) / (12 * h)
    f1 = np.array([-3, -10, 18, -6, 1]) / (12 * h)
    d[0] = f0 @ y[:5]
    d[1] = f1 @ y[:5]
    d[-1] = -f0 @ y[::-1][:5]
    d[-2] = -f1 @ y[::-1][:5]
    return d


def _rel_err(fd, formula) -> float:
    scale = float(np.max(np.abs(formula)))
    diff = float(np.max(np.abs(np.asarray(fd) - np.asarray(formula))))
    return diff / scale if scale > 0 else diff


def length_contraction_experiment(u0, v, eps: float = 1e-4, chi="heat", T: float = 0.02,
                                  samples: int = 41, courant: float = 0.2) -> ContractionReport:
    """Compare ``d/dt G(u_s, u_s)`` from two nearby flows with ``2 int chi_uu K(u_s)^2``.

    ``u_s`` is the one-sided difference ``(u^eps - u)/eps`` of the flows from
    ``u0`` and ``u0 + eps v``; the time derivative uses :func:`time_derivative` over
    ``samples`` equally spaced outputs.
    """
    chi = parse_chi(chi)
    u0, v = _arr(u0), _arr(v)
    chi.check_concave(np.concatenate([u0, u0 + eps * v]))
    ts = np.linspace(0.0, T, samples)
    ua = integrate_flow(u0, chi, ts, courant)
    if not np.any(v):
        zeros = [0.0] * samples
        return ContractionReport(ts.tolist(), zeros, zeros, 0.0, {"chi": chi.name, "eps": eps})
    ub = integrate_flow(u0 + eps * v, chi, ts, courant)
    us = (ub - ua) / eps
    us -= us.mean(axis=1, keepdims=True)
    G = np.array([dirichlet_metric(a, s, s) for a, s in zip(ua, us)])
    fd = time_derivative(G, ts)
    formula = np.array([contraction_rate(a, s, chi) for a, s in zip(ua, us)])
    return ContractionReport(ts.tolist(), formula.tolist(), fd.tolist(), _rel_err(fd, formula),
                             {"chi": chi.name, "eps": eps, "length_sq": G.tolist()})


def energy_decay_check(u0, chi="heat", T: float = 0.05, samples: int = 161,
                       courant: float = 0.2) -> ContractionReport:
    """Compare ``dE/dt`` along one flow with ``2 int chi_uu K(u_t)^2``."""
    chi = parse_chi(chi)
    u0 = _arr(u0)
    chi.check_concave(u0)
    ts = np.linspace(0.0, T, samples)
    us = integrate_flow(u0, chi, ts, courant)
    E = np.array([energy_E(u, chi) for u in us])
    fd = time_derivative(E, ts)
    formula = np.array([contraction_rate(u, chi_flow_rhs(u, chi), chi) for u in us])
    return ContractionReport(ts.tolist(), formula.tolist(), fd.tolist(), _rel_err(fd, formula),
                             {"chi": chi.name, "energy": E.tolist(),
                              "monotone": bool(np.all(np.diff(E) <= 1e-14 * max(1.0, E[0])))})
