r"""Triples of densities: the product space and the coupled counterexample.

A state is three unit-mass densities ``u_i`` with velocities ``f_i``. Two
geometries are implemented.

* Product geometry: each ``(u_i, f_i)`` follows its own canonical geodesic,
  ``Ũ_i = (2 a_i c_i - b_i c_i^2) u_i``, and every weighted volume
  ``sum_i int chi_i(u_i)`` is geodesically concave.
* Coupled geometry: the G2 structure ``phi^K - sum_i (u_i - 1) dθ^i dx^{0i}``
  with ``u = u_1 u_2 u_3``, canonical forms ``Q_i`` normalised against
  ``u/u_i^2`` and

  .. math::

      \tilde U_i = \sum_j \epsilon_{ij}\big[a_j c_i + a_j c_j
        + \tfrac{c_j^2}{2}\sum_{k\ne i} b_k - c_j^2 b_j\big] u_i.

  The second variation of ``int chi(u)`` is ``int u^2 Q`` with ``Q`` a
  quadratic form in the 12 coefficients
  ``x = (a_1, a_2, a_3, b_11, b_12, ..., b_33)``, ``b_ij = b_i c_j``. Its
  matrix has a positive eigenvalue whenever ``(r, s) != (0, 0)``.

Notation: ``a_i = f_i/u_i``, ``b_i = u_i'/u_i``, ``c_i = Q_i(f_i)/u_i``,
``r = chi_uu(u)``, ``s = chi_uu(u) + chi_u(u)/u``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetExhausted, NotPositiveDefinite, NotZeroMean, PositivityLost
from .flows import WeightFn, parse_chi
from .profile import EPS_POS, d_arr, q_arr
from .rng import SplitMix64

EPS = np.array([[1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
COEFF_NAMES = ("a1", "a2", "a3", "b11", "b12", "b13", "b21", "b22", "b23", "b31", "b32", "b33")


@dataclass
class TripleState:
    """Three ``(u_i, f_i)`` pairs as ``(3, n)`` arrays, with per-component weights."""

    u: np.ndarray
    f: np.ndarray
    chi: tuple = ("power:0.3333333333333333",) * 3
    check_mass: bool = True

    def __post_init__(self):
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        self.f = np.atleast_2d(np.asarray(self.f, dtype=float))
        if self.u.shape != self.f.shape or self.u.shape[0] != 3:
            raise ValueError(f"expected two (3, n) arrays, got {self.u.shape} and {self.f.shape}")
        if np.min(self.u) <= EPS_POS:
            raise PositivityLost(f"component density min {np.min(self.u):.3e}")
        if self.check_mass and np.max(np.abs(self.u.mean(axis=1) - 1.0)) > 1e-9:
            raise ValueError("each component density must have unit mass")
        if np.max(np.abs(self.f.mean(axis=1))) > 1e-10 * max(1.0, float(np.max(np.abs(self.f)))):
            raise NotZeroMean("each velocity must have zero mean")
        if isinstance(self.chi, (str, WeightFn)):
            self.chi = (self.chi,) * 3
        self.chi = tuple(parse_chi(c) for c in self.chi)

    @property
    def n(self) -> int:
        return self.u.shape[1]

    @property
    def product(self) -> np.ndarray:
        return self.u.prod(axis=0)


@dataclass
class PointwiseCoeffs:
    """``a_i``, ``b_i``, ``c_i`` and ``b_ij = b_i c_j`` as arrays of shape ``(3, n)`` / ``(3, 3, n)``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def bij(self) -> np.ndarray:
        return self.b[:, None, :] * self.c[None, :, :]

    def vector(self) -> np.ndarray:
        """The 12-vector field ``(a_1, a_2, a_3, b_11, ..., b_33)`` of shape ``(12, n)``."""
        return np.concatenate([self.a, self.bij.reshape(9, -1)])


def canonical_forms(state: TripleState, coupled: bool) -> np.ndarray:
    """``Q_i(f_i)``, normalised by ``int Q_i/u_i = 0`` or, if ``coupled``, ``int u Q_i/u_i^2 = 0``."""
    out = np.empty_like(state.f)
    u = state.product
    for i in range(3):
        w = u / state.u[i] ** 2 if coupled else None
        out[i] = q_arr(state.f[i], state.u[i], weight=w)
    return out


def coefficients(state: TripleState, coupled: bool = True) -> PointwiseCoeffs:
    Q = canonical_forms(state, coupled)
    return PointwiseCoeffs(state.f / state.u, d_arr(state.u) / state.u, Q / state.u)


# ---------------------------------------------------------------------------
# product geometry


def m3_u_tilde(state: TripleState) -> np.ndarray:
    k = coefficients(state, coupled=False)
    return (2 * k.a * k.c - k.b * k.c ** 2) * state.u


def m3_geodesic_rhs(state: TripleState):
    """``(u_t, f_t)`` as ``(3, n)`` arrays for the product geometry."""
    ft = d_arr(m3_u_tilde(state))
    return state.f.copy(), ft - ft.mean(axis=1, keepdims=True)


def m3_hessian(state: TripleState) -> float:
    """``sum_i int chi_i''(u_i) K_i^2`` with ``K_i = u_i (a_i - b_i c_i)``."""
    k = coefficients(state, coupled=False)
    K = state.u * (k.a - k.b * k.c)
    return float(sum(np.mean(state.chi[i].d2(state.u[i]) * K[i] ** 2) for i in range(3)))


def m3_volume(state_u, chi) -> float:
    chi = tuple(parse_chi(c) for c in chi)
    return float(sum(np.mean(chi[i].value(state_u[i])) for i in range(3)))


# ---------------------------------------------------------------------------
# coupled geometry


def m3tilde_u_tilde(state: TripleState) -> np.ndarray:
    k = coefficients(state, coupled=True)
    a, b, c = k.a, k.b, k.c
    bsum = b.sum(axis=0)
    out = np.zeros_like(state.u)
    for i in range(3):
        acc = 0.0
        for j in range(3):
            acc = acc + EPS[i, j] * (a[j] * c[i] + a[j] * c[j]
                                     + 0.5 * c[j] ** 2 * (bsum - b[i]) - c[j] ** 2 * b[j])
        out[i] = acc * state.u[i]
    return out


def m3tilde_geodesic_rhs(state: TripleState):
    """``(u_t, f_t)`` as ``(3, n)`` arrays for the coupled geometry."""
    ft = d_arr(m3tilde_u_tilde(state))
    return state.f.copy(), ft - ft.mean(axis=1, keepdims=True)


def rs_from_chi(chi, u_value):
    """``(r, s) = (chi_uu(u), chi_uu(u) + chi_u(u)/u)``."""
    chi = parse_chi(chi)
    u_value = np.asarray(u_value, dtype=float)
    if np.any(u_value <= 0):
        raise ValueError("r and s need a positive density value")
    r, s = chi.r_s(u_value)
    if r.ndim == 0:
        return float(r), float(s)
    return r, s


def _weight(state: TripleState) -> WeightFn:
    chis = state.chi
    if len({c.name for c in chis}) != 1:
        raise ValueError("the coupled volume uses one common weight")
    return chis[0]


def m3tilde_vtt(state: TripleState) -> float:
    r"""Second variation of ``int chi(u_1 u_2 u_3)`` along the coupled geodesic.

    Evaluates ``int u^2 {r sum a_i^2 + 2 s sum_{i<j} a_i a_j
    - sum_i [r b_i + s sum_{l != i} b_l] Ũ_i/u_i}``.
    """
    chi = _weight(state)
    u = state.product
    r, s = chi.r_s(u)
    k = coefficients(state, coupled=True)
    Ut = m3tilde_u_tilde(state) / state.u
    a, b = k.a, k.b
    quad = r * (a ** 2).sum(axis=0) + 2 * s * (a[0] * a[1] + a[1] * a[2] + a[0] * a[2])
    bsum = b.sum(axis=0)
    coupling = sum((r * b[i] + s * (bsum - b[i])) * Ut[i] for i in range(3))
    return float(np.mean(u ** 2 * (quad - coupling)))


def m3tilde_vtt_matrix(state: TripleState) -> float:
    """Same quantity as :func:`m3tilde_vtt`, as ``int u^2 x^T A(r, s) x`` pointwise."""
    chi = _weight(state)
    u = state.product
    r, s = chi.r_s(u)
    x = coefficients(state, coupled=True).vector()
    A1 = _float_pattern(1.0, 0.0)
    A0 = _float_pattern(0.0, 1.0)
    qr = np.einsum("in,ij,jn->n", x, A1, x)
    qs = np.einsum("in,ij,jn->n", x, A0, x)
    return float(np.mean(u ** 2 * (r * qr + s * qs)))


# ---------------------------------------------------------------------------
# the 12 x 12 matrix

# Q = sum over (coef_r, coef_s, i, j) of (coef_r r + coef_s s) x_i x_j, transcribed
# group by group from the expanded second variation.
_A, _B = 0, 3


def _b(i, j):
    return _B + 3 * (i - 1) + (j - 1)


def _a(i):
    return i - 1


_Q_TERMS = []


def _term(cr, cs, i, j):
    _Q_TERMS.append((Fraction(cr), Fraction(cs), i, j))


for _i in (1, 2, 3):
    _term(1, 0, _a(_i), _a(_i))
for _i, _j in ((1, 2), (2, 3), (1, 3)):
    _term(0, 2, _a(_i), _a(_j))
for _i in (1, 2, 3):
    _term(1, -1, _b(_i, _i), _b(_i, _i))
# a_1 row
for cr, cs, bb in ((-2, 2, (1, 1)), (0, 1, (1, 2)), (0, 1, (1, 3)),
                   (1, -1, (2, 1)), (1, 0, (2, 2)), (0, 1, (2, 3)),
                   (1, -1, (3, 1)), (0, 1, (3, 2)), (1, 0, (3, 3))):
    _term(cr, cs, _a(1), _b(*bb))
# a_2 row
for cr, cs, bb in ((1, 0, (1, 1)), (1, -1, (1, 2)), (0, 1, (1, 3)),
                   (0, 1, (2, 1)), (-2, 2, (2, 2)), (0, 1, (2, 3)),
                   (0, 1, (3, 1)), (1, -1, (3, 2)), (1, 0, (3, 3))):
    _term(cr, cs, _a(2), _b(*bb))
# a_3 row
for cr, cs, bb in ((1, 0, (1, 1)), (0, 1, (1, 2)), (1, -1, (1, 3)),
                   (0, 1, (2, 1)), (1, 0, (2, 2)), (1, -1, (2, 3)),
                   (0, 1, (3, 1)), (0, 1, (3, 2)), (-2, 2, (3, 3))):
    _term(cr, cs, _a(3), _b(*bb))
# b-b couplings, each with factor (r - s)
for sign, p, q in ((-1, (1, 1), (2, 1)), (-1, (1, 2), (2, 2)), (1, (1, 3), (2, 3)),
                   (-1, (1, 1), (3, 1)), (1, (1, 2), (3, 2)), (-1, (1, 3), (3, 3)),
                   (1, (2, 1), (3, 1)), (-1, (2, 2), (3, 2)), (-1, (2, 3), (3, 3))):
    _term(sign, -sign, _b(*p), _b(*q))


def _pattern(r, s, zero):
    A = [[zero for _ in range(12)] for _ in range(12)]
    for cr, cs, i, j in _Q_TERMS:
        c = cr * r + cs * s
        if i == j:
            A[i][i] += c
        else:
            A[i][j] += c / 2
            A[j][i] += c / 2
    return A


def _float_pattern(r, s) -> np.ndarray:
    return np.array(_pattern(r, s, 0.0), dtype=float)


def expanded_quadratic_form(x, r, s) -> float:
    """``Q(x)`` summed term by term over the expansion table (no matrix)."""
    x = np.asarray(x, dtype=float)
    return float(sum((float(cr) * r + float(cs) * s) * x[i] * x[j] for cr, cs, i, j in _Q_TERMS))


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


@dataclass
class CounterexampleMatrix:
    """Symmetric 12 x 12 matrix of ``Q`` with its ``3 + 9`` block partition.

    Entries are :class:`~fractions.Fraction` when ``r`` and ``s`` are rational.
    """

    r: object
    s: object
    A: np.ndarray

    @property
    def exact(self) -> bool:
        return self.A.dtype == object

    @property
    def A11(self):
        return self.A[:3, :3]

    @property
    def A12(self):
        return self.A[:3, 3:]

    @property
    def A21(self):
        return self.A[3:, :3]

    @property
    def A22(self):
        return self.A[3:, 3:]

    def trace(self):
        return sum(self.A[i, i] for i in range(12))

    def as_float(self) -> np.ndarray:
        return self.A.astype(float)

    def is_symmetric(self) -> bool:
        return bool(np.all(self.A == self.A.T))

    def quadratic_form(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(x @ self.as_float() @ x)


def build_matrix_A(r, s) -> CounterexampleMatrix:
    """Matrix ``A`` with ``x^T A x = Q(x)`` for the 12-vector ``(a_i, b_ij)``.

    Exact rationals in, exact rationals out.
    """
    if _is_exact(r) and _is_exact(s):
        r, s = Fraction(r), Fraction(s)
        A = np.empty((12, 12), dtype=object)
        A[:, :] = _pattern(r, s, Fraction(0))
    else:
        r, s = float(r), float(s)
        A = _float_pattern(r, s)
    return CounterexampleMatrix(r, s, A)


def printed_matrix_A(r, s) -> CounterexampleMatrix:
    """The block matrix exactly as typeset alongside the expansion.

    Kept for comparison only: its quadratic form differs from ``Q`` (zero
    diagonal in the lower block, an asymmetric entry, and a sign in the
    ``b_12 b_32`` coupling).
    """
    exact = _is_exact(r) and _is_exact(s)
    if exact:
        r, s = Fraction(r), Fraction(s)
        h = Fraction(1, 2)
        zero = Fraction(0)
    else:
        r, s = float(r), float(s)
        h = 0.5
        zero = 0.0
    d = r - s
    A11 = [[r, s, s], [s, r, s], [s, s, r]]
    A12 = [
        [-d, s * h, s * h, d * h, r * h, s * h, d * h, s * h, r * h],
        [r * h, d * h, s * h, s * h, -d, s * h, s * h, d * h, r * h],
        [r * h, s * h, d * h, s * h, r * h, d * h, s * h, s * h, -d],
    ]
    m = -d * h
    p = d * h
    o = zero
    A22 = [
        [o, o, o, m, o, o, m, o, o],
        [o, o, o, o, m, o, o, m, o],
        [o, o, o, o, o, p, o, o, m],
        [m, o, o, o, o, o, p, o, o],
        [o, m, o, o, o, o, o, m, o],
        [o, o, p, o, o, o, o, o, m],
        [p, o, o, p, o, o, o, o, o],
        [o, m, o, o, m, o, o, o, o],
        [o, o, m, o, o, m, o, o, o],
    ]
    A = np.empty((12, 12), dtype=object if exact else float)
    A[:3, :3] = A11
    A[:3, 3:] = A12
    A[3:, :3] = np.array(A12, dtype=A.dtype).T
    A[3:, 3:] = A22
    return CounterexampleMatrix(r, s, A)


@dataclass
class NSDVerdict:
    verdict: str
    lambda_max: float
    witness: np.ndarray
    eigenvalues: np.ndarray
    residual: float


def nsd_certificate(A, tol: float = 1e-10) -> NSDVerdict:
    """Largest eigenvalue with an eigenvector witness; ``NOT_NSD`` when it exceeds ``tol``."""
    M = A.as_float() if isinstance(A, CounterexampleMatrix) else np.asarray(A, dtype=float)
    if not np.allclose(M, M.T, atol=0, rtol=0):
        raise ValueError("nsd_certificate needs a symmetric matrix")
    w, V = np.linalg.eigh(M)
    v = V[:, -1]
    res = float(np.linalg.norm(M @ v - w[-1] * v))
    return NSDVerdict("NOT_NSD" if w[-1] > tol else "NSD", float(w[-1]), v, w, res)


# ---------------------------------------------------------------------------
# search over profiles


@dataclass
class SearchReport:
    best_value: float
    best_u: np.ndarray
    best_f: np.ndarray
    iterations: int
    exhausted: bool
    certificate: NSDVerdict
    history: list = field(default_factory=list)


def _profiles_from(theta, n, modes):
    x = np.arange(n) / n
    k = np.arange(1, modes + 1)
    C = np.cos(2 * np.pi * np.outer(k, x))
    S = np.sin(2 * np.pi * np.outer(k, x))
    p = theta.reshape(2, 3, 2, modes)
    u = 1.0 + p[0, :, 0] @ C + p[0, :, 1] @ S
    f = p[1, :, 0] @ C + p[1, :, 1] @ S
    return u, f


def _objective(theta, n, modes, chi, floor=0.05):
    u, f = _profiles_from(theta, n, modes)
    if np.min(u) < floor:
        return -math.inf
    norm = math.sqrt(float(np.mean(f * f).sum() * 3))
    if norm == 0:
        return 0.0
    st = TripleState(u, f / norm, (chi,) * 3)
    return m3tilde_vtt(st)


def _eigen_seed(chi, modes, amp=0.2) -> np.ndarray:
    """Start from the dominant eigenvector of ``A(r, s)`` at ``u = 1``.

    The ``a``-block sets the first-mode velocity amplitudes; the leading
    singular vectors of the ``b``-block set the density tilts.
    """
    r, s = rs_from_chi(chi, 1.0)
    v = nsd_certificate(build_matrix_A(r, s)).witness
    P, _, _ = np.linalg.svd(v[3:].reshape(3, 3))
    theta = np.zeros((2, 3, 2, modes))
    theta[0, :, 1, 0] = amp * P[:, 0] / max(1e-12, np.max(np.abs(P[:, 0])))
    theta[1, :, 0, 0] = v[:3]
    return theta.ravel()


def _ascend(th, iters_max, n, modes, chi, step, h=1e-6):
    """Normalised-gradient ascent with step growth on success and halving on failure."""
    th = th.copy()
    dim = th.size
    val = _objective(th, n, modes, chi)
    history = [val]
    lr = step
    it = 0
    for _ in range(iters_max):
        it += 1
        grad = np.empty(dim)
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = h
            fp, fm = _objective(th + e, n, modes, chi), _objective(th - e, n, modes, chi)
            grad[k] = 0.0 if not (math.isfinite(fp) and math.isfinite(fm)) else (fp - fm) / (2 * h)
        gnorm = float(np.linalg.norm(grad))
        if gnorm < 1e-12:
            break
        cand = th + lr * grad / gnorm
        cval = _objective(cand, n, modes, chi)
        if cval > val:
            th, val = cand, cval
            lr *= 1.2
        else:
            lr *= 0.5
            if lr < 1e-10:
                break
        history.append(val)
    return val, th, it, history


def nonconcavity_search(chi="power:0.3333333333333333", budget: int = 200, seed: int = 42,
                        n: int = 64, modes: int = 2, starts: int = 3, step: float = 0.05,
                        strict: bool = False) -> SearchReport:
    """Projected gradient ascent of the normalised second variation over band-limited triples.

    Velocities are scaled to unit ``L^2`` norm, densities stay unit-mass by
    construction and positive by rejection. The first start is the eigen
    seed, the rest are splitmix64 draws; starts run on separate threads and
    share nothing. ``budget`` counts ascent iterations
    over all starts. With ``strict`` the exhausted search raises
    :class:`BudgetExhausted` carrying the report; otherwise the report flags it.
    """
    chi = parse_chi(chi)
    rng = SplitMix64(seed)
    dim = 2 * 3 * 2 * modes
    seeds = [_eigen_seed(chi, modes)]
    for _ in range(starts - 1):
        th = rng.normal(size=dim) * 0.1
        th[dim // 2:] *= 10
        seeds.append(th)
    r1, s1 = rs_from_chi(chi, 1.0)
    cert = nsd_certificate(build_matrix_A(r1, s1))

    per = budget // max(1, len(seeds)) if budget else 0
    with ThreadPoolExecutor(max_workers=len(seeds)) as pool:
        runs = list(pool.map(lambda th: _ascend(th, per, n, modes, chi, step), seeds))
    best_val, best_th, iters, history = -math.inf, seeds[0], 0, []
    for val, th, it, hist in runs:
        iters += it
        history.extend(hist)
        if val > best_val:
            best_val, best_th = val, th
    u, f = _profiles_from(best_th, n, modes)
    norm = math.sqrt(float(np.mean(f * f).sum() * 3)) or 1.0
    report = SearchReport(best_val, u, f / norm, iters, budget > 0 and iters >= budget, cert, history)
    if strict and report.exhausted:
        raise BudgetExhausted(f"search used all {budget} iterations; best {best_val:.6g}", report)
    return report


# ---------------------------------------------------------------------------
# volume bound


def volume_bound_check(q, tol: float = 1e-12) -> dict:
    """Check ``3 int (det q)^{1/3} <= int tr q`` for a pointwise SPD field ``q`` of shape ``(3, 3, n)``."""
    q = np.asarray(q, dtype=float)
    if q.shape[:2] != (3, 3):
        raise ValueError("expected a (3, 3, n) matrix field")
    qn = np.moveaxis(q, -1, 0)
    if np.max(np.abs(qn - np.swapaxes(qn, 1, 2))) > 1e-12 * max(1.0, np.max(np.abs(qn))):
        raise NotPositiveDefinite("matrix field is not symmetric")
    ev = np.linalg.eigvalsh(qn)
    if np.min(ev) <= 0:
        raise NotPositiveDefinite(f"matrix field has eigenvalue {np.min(ev):.3e}")
    lhs = 3 * float(np.mean(np.cbrt(np.prod(ev, axis=1))))
    rhs = float(np.mean(ev.sum(axis=1)))
    spread = float(np.max(ev[:, -1] - ev[:, 0]))
    return {
        "lhs": lhs,
        "rhs": rhs,
        "holds": lhs <= rhs + tol,
        "gap": rhs - lhs,
        "scalar_pointwise": spread <= 1e-12 * max(1.0, float(np.max(ev))),
    }


def counterexample_report(chi="power:0.3333333333333333", u_eval: float = 1.0,
                          search: SearchReport | None = None) -> dict:
    """JSON-ready summary of the matrix certificate and, optionally, a search."""
    chi = parse_chi(chi)
    r, s = rs_from_chi(chi, u_eval)
    M = build_matrix_A(r, s)
    cert = nsd_certificate(M)
    return {
        "chi": chi.name,
        "u_eval": float(u_eval),
        "r": r,
        "s": s,
        "trace": float(M.trace()),
        "eigenvalues": cert.eigenvalues.tolist(),
        "lambda_max": cert.lambda_max,
        "verdict": cert.verdict,
        "search_best": None if search is None else search.best_value,
        "search_iters": None if search is None else search.iterations,
    }


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
