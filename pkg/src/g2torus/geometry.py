r"""Riemannian geometry of cohomogeneity-one closed G2 structures.

A point is a positive unit-mass density ``u`` on the circle and a tangent
vector is a zero-mean profile ``f = u_t``. The Dirichlet metric is

.. math::

    \mathcal G_u(f, g) = \int u^{-1} Q(f) Q(g),

whose canonical geodesics are ``u_t = f``, ``f_t = \tilde U_x`` with
``\tilde U = (Q(f)^2/u)_x``. Along them ``q = -Q(f)/u`` solves the inviscid
Burgers equation, and the Dirichlet distance is the circular Wasserstein
distance.

Most routines accept :class:`~g2torus.profile.Profile` objects or plain numpy
arrays and return numpy scalars/arrays or profiles mirroring the input.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import (
    DegenerateDensity,
    GridMismatch,
    MassMismatch,
    NoRotation,
    NotZeroMean,
    PositivityLost,
    ShockDetected,
)
from .profile import (
    EPS_POS,
    Grid,
    Profile,
    antiderivative_arr,
    d2_arr,
    d_arr,
    eval_arr,
    q_arr,
    shift_arr,
)

SHOCK_SAFETY = 0.9


def _arr(p) -> np.ndarray:
    return np.asarray(p.values if isinstance(p, Profile) else p, dtype=float)


def _same_n(*arrs):
    ns = {a.shape[-1] for a in arrs}
    if len(ns) > 1:
        raise GridMismatch(f"profiles sampled on different grids: {sorted(ns)}")


def _check_density(u):
    if np.min(u) <= EPS_POS:
        raise PositivityLost(f"density min {np.min(u):.3e} below floor {EPS_POS}")


def _check_tangent(f):
    m = float(np.mean(f))
    if abs(m) > 1e-10 * max(1.0, float(np.max(np.abs(f)))):
        raise NotZeroMean(f"tangent profile has mean {m:.3e}")


def _wrap_like(ref, v):
    return Profile(ref.grid, v) if isinstance(ref, Profile) else v


# ---------------------------------------------------------------------------
# metric and connection


def dirichlet_metric(u, f, g) -> float:
    """``int Q(f) Q(g) / u``."""
    u, f, g = _arr(u), _arr(f), _arr(g)
    _same_n(u, f, g)
    _check_density(u)
    _check_tangent(f)
    _check_tangent(g)
    return float(np.mean(q_arr(f, u) * q_arr(g, u) / u))


def connection_U(u, f, g):
    """Christoffel term ``U``, symmetric in ``(f, g)``.

    In the density coordinate the covariant derivative of ``Y`` along a path
    with velocity ``X`` is ``Y_t - U(u, X, Y)'``, so geodesics solve
    ``f_t = U(u, f, f)'``.
    """
    ua, fa, ga = _arr(u), _arr(f), _arr(g)
    _same_n(ua, fa, ga)
    Qf, Qg = q_arr(fa, ua), q_arr(ga, ua)
    U = (fa * Qg + Qf * ga) / ua - Qf * Qg * d_arr(ua) / ua ** 2
    return _wrap_like(u, U)


def u_tilde(u: np.ndarray, f: np.ndarray, alpha: np.ndarray | None = None) -> np.ndarray:
    """``(alpha^2/u)_x``; ``alpha`` defaults to the canonical ``Q(f)``."""
    a = q_arr(f, u) if alpha is None else alpha
    return 2 * a * f / u - a * a * d_arr(u) / u ** 2


def geodesic_rhs(u, f):
    """Right-hand side ``(u_t, f_t) = (f, d/dx U~)`` of the canonical geodesic."""
    ua, fa = _arr(u), _arr(f)
    _same_n(ua, fa)
    ft = d_arr(u_tilde(ua, fa))
    ft -= np.mean(ft)
    return _wrap_like(u, fa.copy()), _wrap_like(f, ft)


def q_velocity(u, f) -> np.ndarray:
    """Burgers velocity ``q = -Q(f)/u``."""
    u, f = _arr(u), _arr(f)
    return -q_arr(f, u) / u


def q_time_derivative(u, f, ft) -> np.ndarray:
    """Exact ``q_t`` given the state and ``f_t`` (with ``u_t = f``)."""
    u, f, ft = _arr(u), _arr(f), _arr(ft)
    F = antiderivative_arr(f)
    Ft = antiderivative_arr(ft)
    A, B = np.mean(F / u), np.mean(1.0 / u)
    At = np.mean(Ft / u) - np.mean(F * f / u ** 2)
    Bt = -np.mean(f / u ** 2)
    Q = F - A / B
    Qt = Ft - (At * B - A * Bt) / B ** 2
    return -Qt / u + Q * f / u ** 2


def burgers_residual(u, f, ft) -> float:
    """``sup |q_t + q q_x|``."""
    q = q_velocity(u, f)
    return float(np.max(np.abs(q_time_derivative(u, f, ft) + q * d_arr(q))))


def hj_variance(u, f, ft) -> float:
    """Spatial variance of ``phi_t + phi_x^2/2`` where ``phi = L(q)``.

    ``q`` has zero mean because ``int Q(f)/u = 0``, so ``phi`` is periodic.
    """
    q = q_velocity(u, f)
    phit = antiderivative_arr(q_time_derivative(u, f, ft))
    return float(np.var(phit + 0.5 * q * q))


def geodesic_residual(u, f, ft, gauge=0.0) -> float:
    """``sup |f_t - ((Q(f) + e)^2/u)''|``.

    ``gauge=0`` tests the canonical equation. ``gauge=None`` minimises over
    the constant ``e``, i.e. over every potential ``alpha`` with
    ``alpha' = f``; this is the form satisfied by rigid rotations.
    """
    u, f, ft = _arr(u), _arr(f), _arr(ft)
    Q = q_arr(f, u)
    base = ft - d2_arr(Q * Q / u)
    lin = d2_arr(2 * Q / u)
    quad = d2_arr(1.0 / u)

    def res(e):
        return float(np.max(np.abs(base - e * lin - e * e * quad)))

    if gauge is not None:
        return res(float(gauge))
    return res(_best_gauge(res, u, Q))


def _best_gauge(res, u, Q):
    # coarse scan then bounded refinement; the residual is not smooth in e
    scale = 1.0 + float(np.max(np.abs(Q)))
    grid = np.linspace(-4 * scale, 4 * scale, 161)
    e0 = grid[int(np.argmin([res(e) for e in grid]))]
    step = grid[1] - grid[0]
    r = minimize_scalar(res, bounds=(e0 - step, e0 + step), method="bounded",
                        options={"xatol": 1e-14})
    return float(r.x)


def transport_gauge(u, v) -> float:
    """Least-squares constant ``e`` minimising ``|v - u' (Q(v) + e)/u|``.

    For a rotation velocity ``v = c u'`` this is ``c / int u^{-1}``, turning
    ``Q(v) + e`` into ``c u``.
    """
    u, v = _arr(u), _arr(v)
    w = d_arr(u) / u
    base = v - w * q_arr(v, u)
    den = float(np.dot(w, w))
    return float(np.dot(base, w)) / den if den > 0 else 0.0


def transport_residual(u, v, gauge=0.0) -> float:
    """``sup |K(v)|`` with ``K(v) = v - u' (Q(v) + e)/u``; ``gauge=None`` uses :func:`transport_gauge`."""
    u, v = _arr(u), _arr(v)
    w = d_arr(u) / u
    e = transport_gauge(u, v) if gauge is None else float(gauge)
    return float(np.max(np.abs(v - w * (q_arr(v, u) + e))))


def transport_K(u, v):
    """``K(v) = v - Q(v) u'/u`` in the canonical gauge."""
    ua, va = _arr(u), _arr(v)
    return _wrap_like(v, va - d_arr(ua) * q_arr(va, ua) / ua)


# ---------------------------------------------------------------------------
# volume and curvature


def hitchin_volume(u) -> float:
    """``int u^{1/3}``."""
    u = _arr(u)
    _check_density(u)
    return float(np.mean(np.cbrt(u)))


def vol_chi(u, chi) -> float:
    """``int chi(u)`` for a weight with a ``value`` evaluator (or a callable)."""
    u = _arr(u)
    _check_density(u)
    fn = chi.value if hasattr(chi, "value") else chi
    return float(np.mean(fn(u)))


def hessian_vol(u, f, gauge: float = 0.0) -> float:
    r"""``Vol_tt = -(2/9) int u^{1/3} [(alpha/u)']^2`` with ``alpha = Q(f) + gauge``.

    The canonical gauge applies along canonical geodesics; a rigid rotation
    needs the gauge making ``alpha = c u``.
    """
    u, f = _arr(u), _arr(f)
    _check_density(u)
    alpha = q_arr(f, u) + gauge
    return float(-2.0 / 9.0 * np.mean(np.cbrt(u) * d_arr(alpha / u) ** 2))


def vtt_integrand_decomposition(u, f, gauge: float = 0.0):
    """Pointwise pieces ``(main, I1, I2)`` of ``18 Vol_tt``, before the ``u^{1/3}`` weight.

    ``main + I1 + I2 = -4 [(alpha/u)']^2``.
    """
    u, f = _arr(u), _arr(f)
    a = q_arr(f, u) + gauge
    du = d_arr(u)
    main = -4 * f * f / u ** 2
    I1 = 4 * f * du * a / u ** 3
    I2 = (-4 * du ** 2 * a ** 2 + 4 * du * a * u * d_arr(a)) / u ** 4
    return main, I1, I2


def sectional_curvature(u, f, g) -> float:
    """``(3/4) [int (f Q(g) - Q(f) g)/u^2]^2 / int u^{-1}``."""
    u, f, g = _arr(u), _arr(f), _arr(g)
    _same_n(u, f, g)
    _check_density(u)
    _check_tangent(f)
    _check_tangent(g)
    I = np.mean((f * q_arr(g, u) - q_arr(f, u) * g) / u ** 2)
    return float(0.75 * I * I / np.mean(1.0 / u))


def potential_solve(u, f):
    """Potential ``beta03`` and canonical form ``alpha_c`` of a tangent vector.

    ``alpha_c = Q(f)`` and ``beta03 = -u^{5/3} (L[Q(f)/u] + C2)`` with ``C2``
    fixing ``int beta03 = 0``. Both solve ``[-u (u^{-5/3} beta03)']' = f``.
    """
    ua, fa = _arr(u), _arr(f)
    _same_n(ua, fa)
    _check_density(ua)
    _check_tangent(fa)
    Q = q_arr(fa, ua)
    Lq = antiderivative_arr(Q / ua)
    w = ua ** (5.0 / 3.0)
    C2 = -np.mean(w * Lq) / np.mean(w)
    beta = -w * (Lq + C2)
    return _wrap_like(u, beta), _wrap_like(u, Q)


def potential_residual(u, beta03, f) -> float:
    u, b, f = _arr(u), _arr(beta03), _arr(f)
    lhs = d_arr(-u * d_arr(u ** (-5.0 / 3.0) * b))
    return float(np.max(np.abs(lhs - f)))


# ---------------------------------------------------------------------------
# paths


@dataclass
class GeodesicPath:
    """Time samples ``(u, f)`` with ``f_t`` at each sample.

    ``u``, ``f``, ``ft`` are arrays of shape ``(len(times), n)``.
    """

    times: np.ndarray
    u: np.ndarray
    f: np.ndarray
    ft: np.ndarray
    shock_margin: float = math.inf
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.u.shape[1]

    @property
    def grid(self) -> Grid:
        return Grid(self.n)

    def __len__(self):
        return len(self.times)

    @property
    def states(self):
        g = self.grid
        return [(Profile(g, a), Profile(g, b)) for a, b in zip(self.u, self.f)]

    def q(self, i: int) -> np.ndarray:
        return q_velocity(self.u[i], self.f[i])

    def burgers_residuals(self) -> np.ndarray:
        return np.array([burgers_residual(a, b, c) for a, b, c in zip(self.u, self.f, self.ft)])

    def hj_variances(self) -> np.ndarray:
        return np.array([hj_variance(a, b, c) for a, b, c in zip(self.u, self.f, self.ft)])

    def geodesic_residuals(self, gauge=0.0) -> np.ndarray:
        return np.array([geodesic_residual(a, b, c, gauge) for a, b, c in zip(self.u, self.f, self.ft)])

    def vol_series(self) -> np.ndarray:
        return np.array([hitchin_volume(a) for a in self.u])

    def hessian_series(self, gauge=0.0) -> np.ndarray:
        return np.array([hessian_vol(a, b, gauge) for a, b in zip(self.u, self.f)])

    def mass_series(self) -> np.ndarray:
        return self.u.mean(axis=1)

    def speeds(self) -> np.ndarray:
        return np.sqrt([max(dirichlet_metric(a, b, b), 0.0) for a, b in zip(self.u, self.f)])

    def dirichlet_length(self) -> float:
        """Trapezoidal ``int sqrt(G(f, f)) dt``."""
        s = self.speeds()
        if len(s) < 2:
            return 0.0
        return float(np.trapezoid(s, self.times))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x_index", "u", "f", "q"])
            for i, t in enumerate(self.times):
                q = self.q(i)
                for k in range(self.n):
                    w.writerow([repr(float(t)), k, repr(float(self.u[i, k])),
                                repr(float(self.f[i, k])), repr(float(q[k]))])

    def summary(self) -> dict:
        return {
            "vol_series": self.vol_series().tolist(),
            "hessian_series": self.hessian_series().tolist(),
            "shock_margin": float(self.shock_margin),
            "dirichlet_length": self.dirichlet_length(),
        }

    def write_summary(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def shock_time(u0, f0) -> float:
    """First crossing time ``-1/min q0'`` of the Burgers characteristics."""
    dq = d_arr(q_velocity(u0, f0))
    m = float(np.min(dq))
    return math.inf if m >= 0 else -1.0 / m


def shock_margin(u0, f0, T) -> float:
    """``min_x (1 + T q0'(x))``."""
    return float(np.min(1.0 + T * d_arr(q_velocity(u0, f0))))


def _rk4(u, f, dt):
    def rhs(a, b):
        return b, _ft(a, b)

    k1u, k1f = rhs(u, f)
    k2u, k2f = rhs(u + 0.5 * dt * k1u, f + 0.5 * dt * k1f)
    k3u, k3f = rhs(u + 0.5 * dt * k2u, f + 0.5 * dt * k2f)
    k4u, k4f = rhs(u + dt * k3u, f + dt * k3f)
    u = u + dt / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
    f = f + dt / 6 * (k1f + 2 * k2f + 2 * k3f + k4f)
    return u, f - np.mean(f)


def _ft(u, f):
    ft = d_arr(u_tilde(u, f))
    return ft - np.mean(ft)


def geodesic_ivp(u0, f0, T: float, dt: float = 1e-3, store_every: int = 1) -> GeodesicPath:
    """Integrate the canonical geodesic from ``(u0, f0)`` up to time ``T``.

    Classical RK4 on ``(u, f)``; the step is capped by ``0.25/(max|q| n)``.

    Raises
    ------
    ShockDetected
        If ``T`` reaches the safety fraction of the characteristic crossing
        time of ``q0 = -Q(f0)/u0``.
    PositivityLost
        If ``min u`` falls below the positivity floor.
    """
    u, f = _arr(u0).copy(), _arr(f0).copy()
    _same_n(u, f)
    _check_density(u)
    _check_tangent(f)
    f = f - np.mean(f)
    if T < 0:
        raise ValueError("final time must be non-negative")
    ts = shock_time(u, f)
    margin = shock_margin(u, f, T)
    if T >= SHOCK_SAFETY * ts:
        raise ShockDetected(
            f"characteristics cross at t*={ts:.6g}; requested T={T:.6g} exceeds "
            f"{SHOCK_SAFETY} t*", shock_time=ts, margin=margin)
    n = u.shape[0]
    qmax = float(np.max(np.abs(q_velocity(u, f))))
    cap = 0.25 / (qmax * n) if qmax > 0 else dt
    steps = max(1, math.ceil(T / min(dt, cap) - 1e-9)) if T > 0 else 0
    h = T / steps if steps else 0.0
    times, us, fs, fts = [0.0], [u.copy()], [f.copy()], [_ft(u, f)]
    for k in range(1, steps + 1):
        u, f = _rk4(u, f, h)
        if not np.all(np.isfinite(u)) or np.min(u) < EPS_POS:
            raise PositivityLost(f"density min {np.min(u):.3e} at t={k * h:.6g}")
        if k % store_every == 0 or k == steps:
            times.append(k * h)
            us.append(u.copy())
            fs.append(f.copy())
            fts.append(_ft(u, f))
    return GeodesicPath(np.array(times), np.array(us), np.array(fs), np.array(fts),
                        shock_margin=margin, meta={"kind": "ivp", "dt": h, "shock_time": ts})


# ---------------------------------------------------------------------------
# circular optimal transport


class _LiftedCDF:
    """``F(x) = int_0^x u`` extended to the real line (unit mass, so ``F(x+1) = F(x)+1``)."""

    def __init__(self, u: np.ndarray):
        self.u = u
        n = len(u)
        k = np.arange(n // 2 + 1)
        w = np.full(k.shape, 2.0)
        w[0] = w[-1] = 1.0
        self._k = k
        self._cu = w * np.fft.rfft(u) / n
        self._cP = w * np.fft.rfft(antiderivative_arr(u - 1.0)) / n
        self.P0 = float(self._cP.real.sum())

    def both(self, x):
        """``(F(x), u(x))`` from one trigonometric evaluation."""
        x = np.asarray(x, dtype=float)
        z = np.exp(2j * np.pi * x)
        ph = np.empty(x.shape + self._k.shape, dtype=complex)
        ph[..., 0] = 1.0
        ph[..., 1:] = z[..., None]
        np.cumprod(ph, axis=-1, out=ph)
        return x + (ph @ self._cP).real - self.P0, (ph @ self._cu).real

    def __call__(self, x):
        return self.both(x)[0]

    def density(self, x):
        return self.both(x)[1]

    def inverse(self, s, y0=None, tol=1e-14, maxit=60):
        """Safeguarded Newton for ``F(y) = s``."""
        s = np.asarray(s, dtype=float)
        y = s.copy() if y0 is None else np.array(y0, dtype=float)
        lo, hi = s - 1.0, s + 1.0  # |F(y) - y| < 1 for unit mass
        for _ in range(maxit):
            F, d = self.both(y)
            r = F - s
            lo = np.where(r < 0, np.maximum(lo, y), lo)
            hi = np.where(r > 0, np.minimum(hi, y), hi)
            y_new = y - r / d
            bad = (y_new < lo) | (y_new > hi)
            y_new = np.where(bad, 0.5 * (lo + hi), y_new)
            done = np.max(np.abs(y_new - y)) <= tol * (1.0 + np.max(np.abs(y)))
            y = y_new
            if done:
                break
        return y


@dataclass
class CircularTransport:
    """Monotone circle map ``T(x) = F1^{-1}(F0(x) + theta)``."""

    u0: np.ndarray
    u1: np.ndarray
    theta: float

    def __post_init__(self):
        self.F0 = _LiftedCDF(self.u0)
        self.F1 = _LiftedCDF(self.u1)

    def map(self, x, guess=None):
        return self.F1.inverse(self.F0(x) + self.theta, y0=guess)

    def dmap(self, x, Tx=None):
        Tx = self.map(x) if Tx is None else Tx
        return self.F0.density(x) / self.F1.density(Tx)

    def cost(self) -> float:
        """``int (T(x) - x)^2 u0(x) dx``."""
        x = np.arange(len(self.u0)) / len(self.u0)
        d = self.map(x) - x
        return float(np.mean(d * d * self.u0))

    def mean_displacement(self) -> float:
        x = np.arange(len(self.u0)) / len(self.u0)
        return float(np.mean(self.map(x) - x))

    def lagrangian_points(self, y, t):
        """Solve ``(1-t) x + t T(x) = y`` for ``x`` by bracketed Newton.

        The left side is increasing in ``x`` and ``T(x) - x`` is bounded by its
        grid extremes (plus a margin), which gives the initial bracket.
        """
        y = np.asarray(y, dtype=float)
        n = len(self.u0)
        g = np.arange(n) / n
        disp = self.map(g) - g
        pad = 2.0 / n + 1e-3
        a, b = y - t * (disp.max() + pad), y - t * (disp.min() - pad)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        x = y - t * np.interp(y % 1.0, g, disp, period=1.0)
        x = np.clip(x, lo, hi)
        Tx = None
        for _ in range(100):
            Tx = self.map(x, guess=Tx)
            r = (1 - t) * x + t * Tx - y
            lo = np.where(r < 0, np.maximum(lo, x), lo)
            hi = np.where(r > 0, np.minimum(hi, x), hi)
            J = (1 - t) + t * self.dmap(x, Tx)
            x_new = x - r / J
            bad = (x_new < lo) | (x_new > hi)
            x_new = np.where(bad, 0.5 * (lo + hi), x_new)
            dx = x_new - x
            x = x_new
            if np.max(np.abs(dx)) < 1e-14 * (1.0 + np.max(np.abs(x))):
                break
        return x

    def interpolate(self, t):
        """Density ``u_t`` and Eulerian velocity ``v_t`` on the grid at time ``t``."""
        n = len(self.u0)
        y = np.arange(n) / n
        x = self.lagrangian_points(y, t)
        Tx = self.map(x)
        J = (1 - t) + t * self.dmap(x, Tx)
        return self.F0.density(x) / J, Tx - x


def optimal_shift(u0, u1) -> float:
    """``theta`` with ``int (T_theta(x) - x) dx = 0``: the minimiser of the convex cost."""
    u0, u1 = _arr(u0), _arr(u1)

    def g(th):
        return CircularTransport(u0, u1, th).mean_displacement()

    a, b = -1.0, 1.0
    ga, gb = g(a), g(b)
    while ga > 0:
        a -= 1.0
        ga = g(a)
    while gb < 0:
        b += 1.0
        gb = g(b)
    return float(brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def _check_pair(u0, u1):
    _same_n(u0, u1)
    for name, u in (("u0", u0), ("u1", u1)):
        if np.min(u) < EPS_POS:
            raise DegenerateDensity(f"{name} falls below the positivity floor ({np.min(u):.3e})")
    m0, m1 = float(np.mean(u0)), float(np.mean(u1))
    if abs(m0 - m1) > 1e-9:
        raise MassMismatch(f"masses differ: {m0!r} vs {m1!r}")
    if abs(m0 - 1.0) > 1e-9:
        raise MassMismatch(f"boundary densities must have unit mass, got {m0!r}")


def geodesic_bvp(u0, u1, steps: int = 20, shift: float | None = None, fd_step: float = 1e-3) -> GeodesicPath:
    """Displacement interpolation between two unit-mass densities.

    ``shift`` selects the circle map ``T(x) = F1^{-1}(F0(x) + shift)``; the
    default is the cost minimiser. ``f`` is ``-(u v)_x`` and ``f_t`` is a
    fourth-order centred difference in time with spacing ``fd_step``.
    """
    u0, u1 = _arr(u0), _arr(u1)
    _check_pair(u0, u1)
    theta = optimal_shift(u0, u1) if shift is None else float(shift)
    ot = CircularTransport(u0, u1, theta)
    times = np.linspace(0.0, 1.0, steps + 1)

    def state(t):
        u, v = ot.interpolate(t)
        f = -d_arr(u * v)
        return u, f - np.mean(f)

    us, fs, fts = [], [], []
    h = fd_step
    for t in times:
        u, f = state(t)
        # displacement interpolation extends a little past [0, 1], so the
        # centred stencil is valid at the endpoints as well
        fm2, fm1, fp1, fp2 = (state(t + k * h)[1] for k in (-2, -1, 1, 2))
        ft = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
        us.append(u)
        fs.append(f)
        fts.append(ft)
    return GeodesicPath(times, np.array(us), np.array(fs), np.array(fts),
                        meta={"kind": "bvp", "shift": theta, "ot_cost": ot.cost()})


def discrete_circular_ot(u0, u1, atoms: int = 2048) -> float:
    """Brute-force squared circular OT cost between equal-mass quantile atoms.

    Each density is replaced by ``atoms`` points at its ``(k+1/2)/atoms``
    quantiles; every cyclic matching ``k -> k + s`` with the best integer lift
    is tried and the minimal mean squared displacement returned.
    """
    u0, u1 = _arr(u0), _arr(u1)
    s = (np.arange(atoms) + 0.5) / atoms
    x = _LiftedCDF(u0).inverse(s)
    y = _LiftedCDF(u1).inverse(s)
    best = math.inf
    for sh in range(atoms):
        yy = np.roll(y, -sh) + np.where(np.arange(atoms) >= atoms - sh, 1.0, 0.0)
        d = yy - x
        # optimal integer lift of the whole matching
        k = np.round(-np.mean(d))
        best = min(best, float(np.mean((d + k) ** 2)))
    return best


# ---------------------------------------------------------------------------
# rotations


def rotation_path(u0, c: float, times) -> GeodesicPath:
    """Rigid rotation ``u(t, x) = u0(x + c t)`` sampled at ``times``."""
    u0 = _arr(u0)
    times = np.asarray(times, dtype=float)
    us = np.array([shift_arr(u0, c * t) for t in times])
    fs = np.array([c * d_arr(u) for u in us])
    fts = np.array([c * c * d2_arr(u) for u in us])
    return GeodesicPath(times, us, fs, fts, meta={"kind": "rotation", "speed": c})


def find_rotation(u0, u1, tol: float = 1e-8) -> float:
    """Shift ``C`` in ``(-1/2, 1/2]`` with ``u1 = u0(. + C)``.

    The integer peak of the cyclic cross-correlation of the mean-free parts
    is refined by minimising the sup-distance. Raises :class:`NoRotation`
    when the normalised peak is below ``1 - tol`` or the refined residual
    exceeds ``tol``.
    """
    u0, u1 = _arr(u0), _arr(u1)
    _same_n(u0, u1)
    a, b = u0 - u0.mean(), u1 - u1.mean()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    scale = max(1.0, float(np.max(np.abs(u0))))
    if na < 1e-14 * scale or nb < 1e-14 * scale:
        if np.max(np.abs(u0 - u1)) <= tol * scale:
            return 0.0
        raise NoRotation("one density is constant and the other is not")
    n = len(u0)
    corr = np.fft.irfft(np.conj(np.fft.rfft(a)) * np.fft.rfft(b), n)  # corr[k] = sum a[j] b[j+k]
    c0 = -int(np.argmax(corr)) / n

    def rho(c):
        return float(np.dot(shift_arr(a, c), b)) / (na * nb)

    r = minimize_scalar(lambda c: -rho(c), bounds=(c0 - 1.0 / n, c0 + 1.0 / n), method="bounded",
                        options={"xatol": 1e-15})
    c = float(r.x)
    peak = rho(c)
    if peak < 1 - tol:
        raise NoRotation(f"cross-correlation peak {peak:.12f} below 1 - {tol:g}")
    err = float(np.max(np.abs(shift_arr(u0, c) - u1)))
    if err > 1e3 * tol * scale:
        raise NoRotation(f"best rigid shift leaves sup error {err:.3e}")
    c = (c + 0.5) % 1.0 - 0.5
    if c == -0.5:
        c = 0.5
    return c


def transport_solve(u0, u1, steps: int = 20) -> GeodesicPath:
    """Rigid-rotation path between rotated densities (``K(u_t) = 0`` up to gauge)."""
    u0, u1 = _arr(u0), _arr(u1)
    c = find_rotation(u0, u1)
    path = rotation_path(u0, c, np.linspace(0.0, 1.0, steps + 1))
    path.meta["shift"] = c
    return path
