r"""Differential forms on :math:`T^3 \times T^4` with coefficients depending on ``x0``.

Axes are ordered ``t1 < t2 < t3 < x0 < x1 < x2 < x3`` (indices 0..6), and the
orientation ``dt^123 ^ dx^0123`` is positive. A :class:`MultiForm` stores a
sparse map from sorted axis tuples to coefficients. A coefficient is either a
length-``n`` float array (a profile in ``x0``) or a scalar; scalars may be
:class:`fractions.Fraction` for exact constant-coefficient computations.

The metric is the diagonal G2 metric induced by

.. math::

    \varphi = d\theta^{123} - \sum_{i=1,2} d\theta^i\wedge dx^{0i}
      - u\, d\theta^3\wedge dx^{03} - \sum_i d\theta^i \wedge dx^{\bar i},

namely ``g3 = diag(w^-1, w^-1, w^2)`` on the fibre and
``g4 = diag(w^2, w^-1, w^-1, w^2)`` on the base, ``w = u^{1/3}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

from .errors import DegreeError
from .profile import d_arr

AXES = ("t1", "t2", "t3", "x0", "x1", "x2", "x3")
AXIS_INDEX = {name: i for i, name in enumerate(AXES)}
THETA = (0, 1, 2)
XBLOCK = (3, 4, 5, 6)
X0 = 3


def _perm_sign(seq) -> int:
    """Sign of the permutation sorting ``seq`` (0 if an entry repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _is_zero(c) -> bool:
    if isinstance(c, np.ndarray):
        return not np.any(c)
    return c == 0


def _coeff_derivative(c):
    if isinstance(c, np.ndarray):
        return d_arr(c)
    return 0


def _axes_of(spec) -> tuple:
    """Accept ``(0, 3)``, ``("t1", "x0")`` or ``"t1 x0"``."""
    if isinstance(spec, str):
        spec = spec.replace(",", " ").split()
    return tuple(AXIS_INDEX[a] if isinstance(a, str) else int(a) for a in spec)


class MultiForm:
    """A homogeneous differential form of fixed degree."""

    __slots__ = ("degree", "terms")

    def __init__(self, degree: int, terms=None):
        if not 0 <= degree <= 7:
            raise DegreeError(f"degree {degree} outside 0..7")
        self.degree = degree
        clean = {}
        for key, c in (terms or {}).items():
            key = _axes_of(key)
            if len(key) != degree:
                raise DegreeError(f"key {key} has wrong length for a {degree}-form")
            s = _perm_sign(key)
            if s == 0:
                continue
            skey = tuple(sorted(key))
            c = c if s > 0 else -c
            clean[skey] = clean[skey] + c if skey in clean else c
        self.terms = {k: v for k, v in clean.items() if not _is_zero(v)}

    # construction ---------------------------------------------------------
    @classmethod
    def basis(cls, spec, coeff=1):
        key = _axes_of(spec)
        return cls(len(key), {key: coeff})

    @classmethod
    def zero(cls, degree):
        return cls(degree, {})

    # algebra --------------------------------------------------------------
    def __add__(self, other):
        if other == 0:
            return self
        if other.degree != self.degree:
            raise DegreeError("cannot add forms of different degree")
        terms = dict(self.terms)
        for k, c in other.terms.items():
            terms[k] = terms[k] + c if k in terms else c
        return MultiForm(self.degree, terms)

    __radd__ = __add__

    def __neg__(self):
        return MultiForm(self.degree, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        """Multiply every coefficient by a scalar or a profile array ``c``."""
        return MultiForm(self.degree, {k: c * v for k, v in self.terms.items()})

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def __xor__(self, other):
        return wedge(self, other)

    def coeff(self, spec, default=0):
        key = _axes_of(spec)
        s = _perm_sign(key)
        c = self.terms.get(tuple(sorted(key)), default)
        return c if s >= 0 else -c

    def map_coeffs(self, fn):
        return MultiForm(self.degree, {k: fn(v) for k, v in self.terms.items()})

    def sup(self) -> float:
        """Largest absolute coefficient value over all terms and samples."""
        if not self.terms:
            return 0.0
        return max(float(np.max(np.abs(np.asarray(c, dtype=float)))) for c in self.terms.values())

    def __repr__(self):
        parts = [f"{'^'.join(AXES[i] for i in k)}" for k in sorted(self.terms)]
        return f"MultiForm(degree={self.degree}, terms=[{', '.join(parts)}])"

    def dump(self) -> str:
        """One ``AXES <subset> COEFF <value>`` line per term.

        Profile-valued coefficients are summarised by their sample count and
        range, constants are written verbatim.
        """
        lines = []
        for k in sorted(self.terms):
            c = self.terms[k]
            if isinstance(c, np.ndarray):
                desc = f"profile[n={c.shape[-1]},min={c.min():.12g},max={c.max():.12g}]"
            else:
                desc = str(c)
            lines.append(f"AXES {','.join(AXES[i] for i in k)} COEFF {desc}")
        return "\n".join(lines)


def wedge(a: MultiForm, b: MultiForm) -> MultiForm:
    if a.degree + b.degree > 7:
        raise DegreeError(f"wedge of degrees {a.degree}+{b.degree} exceeds 7")
    terms = {}
    for ka, ca in a.terms.items():
        for kb, cb in b.terms.items():
            key = ka + kb
            s = _perm_sign(key)
            if s == 0:
                continue
            skey = tuple(sorted(key))
            c = ca * cb if s > 0 else -(ca * cb)
            terms[skey] = terms[skey] + c if skey in terms else c
    return MultiForm(a.degree + b.degree, terms)


def exterior_d(a: MultiForm) -> MultiForm:
    """``d = dx^0 ^ d/dx^0`` since coefficients only depend on ``x0``."""
    if a.degree >= 7:
        return MultiForm.zero(7) if a.degree == 7 else None
    terms = {}
    for k, c in a.terms.items():
        if X0 in k:
            continue
        dc = _coeff_derivative(c)
        if _is_zero(dc):
            continue
        key = (X0,) + k
        s = _perm_sign(key)
        skey = tuple(sorted(key))
        terms[skey] = terms.get(skey, 0) + (dc if s > 0 else -dc)
    return MultiForm(a.degree + 1, terms)


# ---------------------------------------------------------------------------
# metric


def exact_cube_root(u):
    """Cube root of a non-negative rational, exact when ``u`` is a perfect cube."""
    u = Fraction(u)
    num = round(u.numerator ** (1 / 3))
    den = round(u.denominator ** (1 / 3))
    for a in (num - 1, num, num + 1):
        for b in (den - 1, den, den + 1):
            if a >= 0 and b > 0 and Fraction(a, b) ** 3 == u:
                return Fraction(a, b)
    raise ValueError(f"{u} is not a rational cube; exact mode needs u = (p/q)^3")


@dataclass(frozen=True, eq=False)
class G2Metric:
    """Diagonal G2 metric induced by the density ``u``.

    ``u`` is either a positive profile array or a scalar. A
    :class:`~fractions.Fraction` scalar selects exact arithmetic, in which case
    ``u`` must be a rational cube.
    """

    u: object
    w: object
    diag: tuple
    inv: tuple

    @classmethod
    def from_u(cls, u):
        if isinstance(u, (Fraction, int)) and not isinstance(u, bool):
            w = exact_cube_root(u)
            u = Fraction(u)
        else:
            u = np.asarray(u, dtype=float)
            if np.any(u <= 0):
                raise ValueError("metric needs a positive density")
            w = np.cbrt(u)
            if u.ndim == 0:
                u, w = float(u), float(w)
        one = Fraction(1) if isinstance(w, Fraction) else 1.0
        diag = (one / w, one / w, w * w, w * w, one / w, one / w, w * w)
        inv = (w, w, one / (w * w), one / (w * w), w, w, one / (w * w))
        return cls(u, w, diag, inv)

    @property
    def exact(self) -> bool:
        return isinstance(self.w, Fraction)

    def sqrt_det(self, block=None):
        """Volume density; 1 on the fibre, ``w`` on the base and in total."""
        if block == "theta":
            return Fraction(1) if self.exact else 1.0
        return self.w

    def ginv_prod(self, key):
        out = 1
        for i in key:
            out = out * self.inv[i]
        return out


def _block_axes(block):
    if block is None:
        return tuple(range(7))
    if block in ("x", "base", 4):
        return XBLOCK
    if block in ("theta", "fibre", "fiber", 3):
        return THETA
    raise ValueError(f"unknown block {block!r}")


def hodge_star(a: MultiForm, m: G2Metric, block=None) -> MultiForm:
    """Hodge star of the full metric, or of one factor (``block="x"``/``"theta"``).

    On a basis form ``e^I`` with complement ``I^c`` inside the chosen block,
    ``*e^I = sign(I, I^c) sqrt(det g) prod_{i in I} g^{ii} e^{I^c}``.
    """
    axes = _block_axes(block)
    dim = len(axes)
    terms = {}
    for k, c in a.terms.items():
        if not set(k) <= set(axes):
            raise DegreeError(f"term {k} does not live in block {block!r}")
        comp = tuple(i for i in axes if i not in k)
        s = _perm_sign(k + comp)
        factor = m.sqrt_det(block) * m.ginv_prod(k)
        val = c * factor
        terms[comp] = -val if s < 0 else val
    return MultiForm(dim - a.degree, terms)


def codifferential(a: MultiForm, m: G2Metric, block=None) -> MultiForm:
    """``delta = (-1)^p * d *`` on p-forms, using the full or a block star.

    On the seven-manifold this sign makes the codifferential of ``phi(u)``
    equal the closed-form torsion of :func:`torsion`. With ``block="x"`` the
    same formula is applied with the base star; on 2-forms that is
    ``+*d*``, the sign under which the torus connection yields the geodesic
    equation.
    """
    if a.degree == 0:
        raise DegreeError("codifferential of a function is zero-degree")
    out = hodge_star(exterior_d(hodge_star(a, m, block)), m, block)
    return -out if a.degree % 2 else out


def interior(vec, a: MultiForm) -> MultiForm:
    """Contraction ``i_V a`` with a vector given as ``{axis: component}``."""
    if a.degree == 0:
        return MultiForm.zero(0)
    vec = {(_axes_of([k])[0] if isinstance(k, str) else k): v for k, v in vec.items()}
    terms = {}
    for k, c in a.terms.items():
        for pos, ax in enumerate(k):
            if ax not in vec:
                continue
            key = k[:pos] + k[pos + 1:]
            val = vec[ax] * c
            if pos % 2:
                val = -val
            terms[key] = terms[key] + val if key in terms else val
    return MultiForm(a.degree - 1, terms)


def sharp(a: MultiForm, m: G2Metric, block=None) -> dict:
    """Musical isomorphism on 1-forms: ``{axis: g^{ii} a_i}``."""
    if a.degree != 1:
        raise DegreeError("sharp needs a 1-form")
    return {k[0]: m.inv[k[0]] * c for k, c in a.terms.items()}


# ---------------------------------------------------------------------------
# the G2 structure


def _const(c, like):
    return Fraction(c) if isinstance(like, Fraction) else c


def hyper_symplectic_triple(u):
    """``(omega_1, omega_2, omega_3)`` with ``omega_3 = u dx^03 + dx^12``."""
    one = _const(1, u)
    w1 = MultiForm(2, {(3, 4): one, (5, 6): one})
    w2 = MultiForm(2, {(3, 5): one, (6, 4): one})
    w3 = MultiForm(2, {(3, 6): u, (4, 5): one})
    return w1, w2, w3


def phi(u) -> MultiForm:
    """The closed G2 structure ``dt^123 - sum_i dt^i ^ omega_i``."""
    one = _const(1, u)
    out = MultiForm(3, {(0, 1, 2): one})
    for i, om in enumerate(hyper_symplectic_triple(u)):
        out = out - wedge(MultiForm(1, {(i,): one}), om)
    return out


def dual_psi(u, m: G2Metric | None = None) -> MultiForm:
    """The coassociative 4-form ``psi = *phi``."""
    m = m or G2Metric.from_u(u)
    return hodge_star(phi(u), m)


def torsion(u) -> MultiForm:
    r"""Closed-form torsion ``tau = sum_i dt^i ^ tau_i`` for ``u = u(x0)``.

    ``tau_1 = -(1/3) u^{-5/3} u' dx^1``, ``tau_2 = -(1/3) u^{-5/3} u' dx^2``,
    ``tau_3 = (2/3) u^{-2/3} u' dx^3``.
    """
    if not isinstance(u, np.ndarray):
        return MultiForm.zero(2)
    du = d_arr(u)
    a = -(1.0 / 3.0) * u ** (-5.0 / 3.0) * du
    b = (2.0 / 3.0) * u ** (-2.0 / 3.0) * du
    return MultiForm(2, {(0, 4): a, (1, 5): a, (2, 6): b})


# ---------------------------------------------------------------------------
# pointwise inner products


def g2_inner(a: MultiForm, b: MultiForm, m: G2Metric):
    """Pointwise metric pairing ``g(a, b)`` (a profile array or a scalar)."""
    if a.degree != b.degree:
        raise DegreeError("inner product of forms of different degree")
    out = 0
    for k, c in a.terms.items():
        if k in b.terms:
            out = out + c * b.terms[k] * m.ginv_prod(k)
    return out


def l2_inner(a: MultiForm, b: MultiForm, m: G2Metric) -> float:
    """``int g(a, b) vol_phi`` with ``vol_phi = u^{1/3} dt^123 dx^0123``."""
    dens = g2_inner(a, b, m) * m.w
    return float(np.mean(dens)) if isinstance(dens, np.ndarray) else dens


# ---------------------------------------------------------------------------
# dense tensors for the contraction operators


def _sample_shape(*objs):
    for o in objs:
        if isinstance(o, MultiForm):
            for c in o.terms.values():
                if isinstance(c, np.ndarray):
                    return c.shape
        elif isinstance(o, np.ndarray) and o.dtype != object:
            return o.shape[2:] if o.ndim > 2 else ()
        elif isinstance(o, G2Metric) and isinstance(o.w, np.ndarray):
            return o.w.shape
    return ()


def _exact(*objs) -> bool:
    for o in objs:
        if isinstance(o, G2Metric):
            return o.exact
    return False


def _zeros(shape, exact):
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape)


def to_dense(a: MultiForm, sample_shape=(), exact=False) -> np.ndarray:
    """Fully antisymmetric component array of shape ``(7,)*p + sample_shape``."""
    p = a.degree
    out = _zeros((7,) * p + tuple(sample_shape), exact)
    for k, c in a.terms.items():
        for perm in itertools.permutations(range(p)):
            idx = tuple(k[i] for i in perm)
            s = _perm_sign(perm)
            out[idx] = c if s > 0 else -c
    return out


def from_dense(arr: np.ndarray, p: int) -> MultiForm:
    terms = {}
    for k in itertools.combinations(range(7), p):
        c = arr[k]
        if isinstance(c, np.ndarray) and c.dtype != object:
            c = np.array(c)
        terms[k] = c
    return MultiForm(p, terms)


def _ginv_vec(m: G2Metric, sample_shape, exact):
    g = _zeros((7,) + tuple(sample_shape), exact)
    for i in range(7):
        g[i] = m.inv[i]
    return g


def _g_vec(m: G2Metric, sample_shape, exact):
    g = _zeros((7,) + tuple(sample_shape), exact)
    for i in range(7):
        g[i] = m.diag[i]
    return g


class Sym2Tensor:
    """Symmetric 2-tensor with components ``h[i, j]`` (plus a sample axis)."""

    __slots__ = ("comps",)

    def __init__(self, comps: np.ndarray):
        self.comps = comps

    @classmethod
    def metric(cls, m: G2Metric, sample_shape=()):
        exact = m.exact
        h = _zeros((7, 7) + tuple(sample_shape), exact)
        for i in range(7):
            h[i, i] = m.diag[i]
        return cls(h)

    def __add__(self, other):
        return Sym2Tensor(self.comps + other.comps)

    def __sub__(self, other):
        return Sym2Tensor(self.comps - other.comps)

    def scale(self, c):
        return Sym2Tensor(self.comps * c)

    def is_symmetric(self) -> bool:
        return bool(np.all(self.comps == np.swapaxes(self.comps, 0, 1)))

    def sup(self) -> float:
        return float(np.max(np.abs(self.comps.astype(float))))


def tensor_inner(h: Sym2Tensor, k: Sym2Tensor, m: G2Metric):
    """``<h, k> = (1/2) h_ij k_kl g^ik g^jl``.

    The factor 1/2 makes ``i_phi`` and ``j_phi`` mutually adjoint against the
    form inner product.
    """
    exact = m.exact
    shape = h.comps.shape[2:]
    gi = _ginv_vec(m, shape, exact)
    return np.einsum("ij...,ij...,i...,j...->...", h.comps, k.comps, gi, gi) / 2


def contract_j(omega: MultiForm, eta: MultiForm, m: G2Metric) -> Sym2Tensor:
    r"""``j_omega eta = 1/2 (omega_{iA} eta_j^A + omega_{jA} eta_i^A)``, full index sums."""
    if omega.degree != eta.degree:
        raise DegreeError("j needs forms of equal degree")
    p = omega.degree
    if p not in (2, 3):
        raise DegreeError("j is implemented for 2- and 3-forms")
    exact = _exact(m)
    shape = _sample_shape(omega, eta, m)
    A = to_dense(omega, shape, exact)
    B = to_dense(eta, shape, exact)
    gi = _ginv_vec(m, shape, exact)
    if p == 2:
        t = np.einsum("ia...,ja...,a...->ij...", A, B, gi)
    else:
        t = np.einsum("iab...,jab...,a...,b...->ij...", A, B, gi, gi)
    return Sym2Tensor((t + np.swapaxes(t, 0, 1)) / 2)


def contract_i(h: Sym2Tensor, omega: MultiForm, m: G2Metric) -> MultiForm:
    r"""``i_omega h = (1/(p-1)!) h_{i1 l} g^{ls} omega_{s i2..ip} dx^{i1..ip}``."""
    p = omega.degree
    if p not in (2, 3):
        raise DegreeError("i is implemented for 2- and 3-forms")
    exact = _exact(m)
    shape = h.comps.shape[2:]
    W = to_dense(omega, shape, exact)
    gi = _ginv_vec(m, shape, exact)
    if p == 2:
        T = np.einsum("il...,l...,lj...->ij...", h.comps, gi, W)
    else:
        T = np.einsum("il...,l...,ljk...->ijk...", h.comps, gi, W)
    scale = factorial(p - 1)
    terms = {}
    for k in itertools.combinations(range(7), p):
        acc = 0
        for perm in itertools.permutations(range(p)):
            idx = tuple(k[i] for i in perm)
            acc = acc + _perm_sign(perm) * T[idx]
        terms[k] = acc / scale if not exact else acc / Fraction(scale)
    return MultiForm(p, terms)


# ---------------------------------------------------------------------------
# G2 representation theory


def project_3form(X: MultiForm, u, m: G2Metric | None = None):
    r"""Split a 3-form into its ``Lambda^3_1``, ``Lambda^3_7``, ``Lambda^3_27`` parts.

    ``X_1 = (1/7) g(phi, X) phi`` and ``X_7 = -(1/4) *[*(X ^ phi) ^ phi]``.
    The map ``X -> *[*(X ^ phi) ^ phi]`` is ``-4`` on the 7-dimensional
    summand and vanishes on the other two, whence the sign.
    """
    if X.degree != 3:
        raise DegreeError("project_3form needs a 3-form")
    m = m or G2Metric.from_u(u)
    ph = phi(u)
    seventh = Fraction(1, 7) if m.exact else 1.0 / 7.0
    quarter = Fraction(-1, 4) if m.exact else -0.25
    X1 = ph.scale(g2_inner(ph, X, m) * seventh)
    X7 = hodge_star(wedge(hodge_star(wedge(X, ph), m), ph), m).scale(quarter)
    X27 = X - X1 - X7
    return X1, X7, X27


def project_2form(a: MultiForm, u, m: G2Metric | None = None):
    r"""Split a 2-form into ``Lambda^2_7`` and ``Lambda^2_14`` parts.

    The map ``a -> *(a ^ phi)`` acts as ``2`` on the 7-part and ``-1`` on the
    14-part.
    """
    if a.degree != 2:
        raise DegreeError("project_2form needs a 2-form")
    m = m or G2Metric.from_u(u)
    third = Fraction(1, 3) if m.exact else 1.0 / 3.0
    s = hodge_star(wedge(a, phi(u)), m)
    a7 = (a + s).scale(third)
    return a7, a - a7


def vector_contract_phi(vec, u) -> MultiForm:
    """``i_V phi`` for a vector ``V`` given as ``{axis: component}``."""
    return interior(vec, phi(u))


# ---------------------------------------------------------------------------
# the mixed terms of the torus connection


def a_torus_terms(u: np.ndarray, f: np.ndarray, g: np.ndarray):
    """Mixed terms of the 1-form connection on the torus fibration.

    Returns a dict with the two contractions ``i_{beta#} A^alpha_3`` and
    ``i_{alpha#} A^beta_3`` and the three codifferential terms, each a 1-form on
    the base, computed from the canonical potentials ``alpha = Q(f) dx^3`` and
    ``beta = Q(g) dx^3``.
    """
    from .profile import q_arr

    u = np.asarray(u, dtype=float)
    m = G2Metric.from_u(u)
    Qf = q_arr(np.asarray(f, dtype=float), u)
    Qg = q_arr(np.asarray(g, dtype=float), u)
    alpha = MultiForm(1, {(6,): Qf})
    beta = MultiForm(1, {(6,): Qg})
    a_sh = sharp(alpha, m)
    b_sh = sharp(beta, m)
    om1, om2, _ = hyper_symplectic_triple(u)
    w_inv = 1.0 / m.w  # the u^{-1/3} in A, with vol_0 = dx^0123

    def i_Omega3(x):
        return (wedge(interior(x, om1), om2) - wedge(interior(x, om2), om1)).scale(0.5)

    def i2_Omega3(x, y):
        return (wedge(interior(x, om1), interior(y, om2))
                - wedge(interior(x, om2), interior(y, om1))).scale(0.5)

    def A3(da, x, y):
        top = (wedge(interior(x, da), i_Omega3(y)) + wedge(interior(y, da), i_Omega3(x))
               + wedge(i2_Omega3(x, y), da))
        return top.coeff((3, 4, 5, 6)) * w_inv

    def contract_A(da, vec):
        terms = {}
        for ax in XBLOCK:
            c = A3(da, vec, {ax: 1.0})
            if not _is_zero(c):
                terms[(ax,)] = c
        return MultiForm(1, terms)

    dA = exterior_d(alpha)
    dB = exterior_d(beta)
    u23 = m.w * m.w
    um23 = 1.0 / u23

    def delta_term(form):
        return codifferential(form, m, block="x").scale(u23)

    t1 = delta_term(wedge(alpha, hodge_star(i_Omega3(b_sh).scale(um23), m, block="x")))
    t2 = delta_term(wedge(beta, hodge_star(i_Omega3(a_sh).scale(um23), m, block="x")))
    t3 = -delta_term(hodge_star(i2_Omega3(a_sh, b_sh).scale(um23), m, block="x"))
    return {
        "i_beta_A_alpha": contract_A(dA, b_sh),
        "i_alpha_A_beta": contract_A(dB, a_sh),
        "delta_alpha": t1,
        "delta_beta": t2,
        "delta_pair": t3,
    }


# ---------------------------------------------------------------------------
# seeded identity suite


def _rand_coeff(rng, exact, n):
    if exact:
        return Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 6)))
    from .rng import random_tangent

    return rng.normal() + random_tangent(rng, n, modes=3, scale=0.5)


def random_form(rng, p: int, n: int = 32, exact: bool = False) -> MultiForm:
    """Random ``p``-form with every coefficient populated."""
    return MultiForm(p, {k: _rand_coeff(rng, exact, n)
                         for k in itertools.combinations(range(7), p)})


def random_density_u(rng, n: int = 32, exact: bool = False):
    """A random rational cube in exact mode, a band-limited density otherwise."""
    if exact:
        return Fraction(int(rng.integers(1, 6)), int(rng.integers(1, 6))) ** 3
    from .rng import random_density

    return random_density(rng, n, modes=3, amp=0.4)


def _err(x) -> float:
    if isinstance(x, MultiForm):
        return x.sup()
    if isinstance(x, Sym2Tensor):
        return x.sup()
    return float(np.max(np.abs(np.asarray(x, dtype=float))))


IDENTITY_NAMES = (
    "j_phi_X1_norm", "j_phi_X1_metric", "i_phi_j_phi_X27", "j_phi_X7",
    "ij_adjoint", "proj3_idempotent", "proj3_orthogonal", "proj2_idempotent",
    "proj2_orthogonal", "omega14_dalpha_tau", "star_involution", "d_squared",
    "delta_squared", "torsion_is_delta_phi", "phi_norm",
)


def identity_errors(u, rng, n: int = 128) -> dict:
    """Errors of every identity for one density ``u`` and one set of random forms."""
    m = G2Metric.from_u(u)
    exact = m.exact
    ph = phi(u)
    shape = () if exact else (n,)
    X = random_form(rng, 3, n, exact)
    a = random_form(rng, 2, n, exact)
    X1, X7, X27 = project_3form(X, u, m)
    out = {}

    jX1 = contract_j(ph, X1, m)
    out["j_phi_X1_norm"] = _err(tensor_inner(jX1, jX1, m) - 18 * g2_inner(X1, X1, m))
    six7 = Fraction(6, 7) if exact else 6.0 / 7.0
    out["j_phi_X1_metric"] = _err(jX1 - Sym2Tensor.metric(m, shape).scale(six7 * g2_inner(ph, X, m)))
    out["i_phi_j_phi_X27"] = _err(contract_i(contract_j(ph, X27, m), ph, m) - X27.scale(4))
    out["j_phi_X7"] = _err(contract_j(ph, X7, m))

    h = contract_j(random_form(rng, 3, n, exact), random_form(rng, 3, n, exact), m)
    out["ij_adjoint"] = _err(g2_inner(contract_i(h, ph, m), X, m) - tensor_inner(h, contract_j(ph, X, m), m))

    P1 = project_3form(X1, u, m)
    P7 = project_3form(X7, u, m)
    P27 = project_3form(X27, u, m)
    out["proj3_idempotent"] = max(_err(P1[0] - X1), _err(P1[1]), _err(P1[2]),
                                  _err(P7[0]), _err(P7[1] - X7), _err(P7[2]),
                                  _err(P27[0]), _err(P27[1]), _err(P27[2] - X27))
    out["proj3_orthogonal"] = max(_err(g2_inner(X1, X7, m)), _err(g2_inner(X1, X27, m)),
                                  _err(g2_inner(X7, X27, m)))

    a7, a14 = project_2form(a, u, m)
    q7, q14 = project_2form(a7, u, m)
    r7, r14 = project_2form(a14, u, m)
    out["proj2_idempotent"] = max(_err(q7 - a7), _err(q14), _err(r7), _err(r14 - a14))
    out["proj2_orthogonal"] = _err(g2_inner(a7, a14, m))
    out["omega14_dalpha_tau"] = _err(g2_inner(ph, exterior_d(a14), m) - g2_inner(torsion(u), a14, m))

    out["star_involution"] = _err(hodge_star(hodge_star(X, m), m) - X)
    out["d_squared"] = _err(exterior_d(exterior_d(a)))
    out["delta_squared"] = _err(codifferential(codifferential(X, m), m))
    out["torsion_is_delta_phi"] = _err(codifferential(ph, m) - torsion(u))
    out["phi_norm"] = _err(g2_inner(ph, ph, m) - 7)
    return out


def identity_suite(seed: int = 42, trials: int = 100, n: int = 128, exact: bool = False) -> dict:
    """Maximum error of each identity over ``trials`` seeded draws.

    In exact mode ``u`` is a random rational cube and every coefficient a
    random rational constant, so each error is computed without rounding.
    """
    from .rng import SplitMix64

    rng = SplitMix64(seed)
    worst = {k: 0.0 for k in IDENTITY_NAMES}
    for _ in range(trials):
        u = random_density_u(rng, n, exact)
        for k, v in identity_errors(u, rng, n).items():
            worst[k] = max(worst[k], v)
    return worst
