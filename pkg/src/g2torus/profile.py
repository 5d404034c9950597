r"""Periodic scalar calculus on the unit circle :math:`S^1 = \mathbb{R}/\mathbb{Z}`.

Profiles are real functions sampled at ``x_k = k/n`` on a uniform grid with
``n`` a power of two. Differentiation and antidifferentiation act through the
discrete Fourier transform, so band-limited data (degree < n/2) is handled
to rounding accuracy.

The two integral operators used throughout the package are

.. math::

    L(f) = F - \int F, \qquad Q_u(f) = F + C_1, \qquad
    C_1 = -\Big[\int u^{-1} F\Big]\Big[\int u^{-1}\Big]^{-1},

where ``F`` is any antiderivative of the zero-mean profile ``f``. ``L(f)``
is the zero-mean antiderivative, ``Q(f)`` the antiderivative orthogonal to
the constants in the weighted pairing :math:`\int u^{-1}(\cdot)`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridMismatch, NotZeroMean, PositivityLost

#: Positivity floor for densities.
EPS_POS = 1e-8

#: Absolute tolerance on the mean of a tangent profile.
MEAN_TOL = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform grid on the unit circle with ``n`` samples."""

    n: int

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 16, got {n!r}")

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n) / self.n

    @property
    def h(self) -> float:
        return 1.0 / self.n

    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers matching ``numpy.fft.rfft`` output."""
        return np.arange(self.n // 2 + 1)


def _as_grid(grid) -> Grid:
    return grid if isinstance(grid, Grid) else Grid(int(grid))


@dataclass(frozen=True, eq=False)
class Profile:
    """A real function on the circle sampled on ``grid``.

    Supports elementwise arithmetic with scalars, arrays and other profiles on
    the same grid. Combining profiles from different grids raises
    :class:`GridMismatch`.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    # constructors -----------------------------------------------------------
    @classmethod
    def from_function(cls, grid, func):
        grid = _as_grid(grid)
        return cls(grid, np.broadcast_to(func(grid.x), (grid.n,)))

    @classmethod
    def constant(cls, grid, c=0.0):
        grid = _as_grid(grid)
        return cls(grid, np.full(grid.n, float(c)))

    @classmethod
    def from_fourier(cls, grid, modes):
        """Build ``sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)`` from ``{k: (a_k, b_k)}``."""
        grid = _as_grid(grid)
        x = grid.x
        v = np.zeros(grid.n)
        for k, (a, b) in modes.items():
            v += a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)
        return cls(grid, v)

    # numpy interop ----------------------------------------------------------
    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.grid.n

    @property
    def n(self) -> int:
        return self.grid.n

    def _coerce(self, other):
        if isinstance(other, Profile):
            if other.grid != self.grid:
                raise GridMismatch(f"grids differ: n={self.grid.n} vs n={other.grid.n}")
            return other.values
        return other

    def _wrap(self, v):
        return Profile(self.grid, v)

    def __add__(self, other):
        return self._wrap(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._coerce(other))

    def __rsub__(self, other):
        return self._wrap(self._coerce(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / self._coerce(other))

    def __rtruediv__(self, other):
        return self._wrap(self._coerce(other) / self.values)

    def __pow__(self, p):
        return self._wrap(self.values ** p)

    def __neg__(self):
        return self._wrap(-self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def min(self) -> float:
        return float(np.min(self.values))

    def max(self) -> float:
        return float(np.max(self.values))

    def mean(self) -> float:
        return float(np.mean(self.values))


class PositiveProfile(Profile):
    """A strictly positive profile (a density). ``normalized`` enforces unit mass."""

    def __init__(self, grid, values, normalized=False):
        super().__init__(grid, values)
        if np.min(self.values) <= 0:
            raise PositivityLost(f"profile not positive (min={np.min(self.values):.3e})")
        if normalized and abs(self.mass - 1.0) >= 1e-12:
            raise ValueError(f"normalized density must have unit mass, got {self.mass!r}")
        object.__setattr__(self, "normalized", bool(normalized))

    @property
    def mass(self) -> float:
        return float(np.mean(self.values))

    @classmethod
    def of(cls, p: Profile, normalized=False):
        return cls(p.grid, p.values, normalized=normalized)


class TangentProfile(Profile):
    """A zero-mean profile, i.e. a tangent vector to the space of densities."""

    def __init__(self, grid, values):
        super().__init__(grid, values)
        m = float(np.mean(self.values))
        if abs(m) >= MEAN_TOL:
            raise NotZeroMean(f"tangent profile has mean {m:.3e}")

    @classmethod
    def of(cls, p: Profile):
        return cls(p.grid, p.values)

    @classmethod
    def project(cls, p: Profile):
        """Subtract the mean and wrap."""
        v = np.asarray(p.values) - np.mean(p.values)
        return cls(p.grid, v)


# ---------------------------------------------------------------------------
# array kernels (used internally by the heavier modules)


def _k(n):
    return np.arange(n // 2 + 1)


def d_arr(v: np.ndarray) -> np.ndarray:
    """Spectral derivative of periodic samples; the Nyquist mode is dropped."""
    n = v.shape[-1]
    vh = np.fft.rfft(v)
    vh = vh * (2j * np.pi * _k(n))
    vh[..., -1] = 0.0
    return np.fft.irfft(vh, n)


def d2_arr(v: np.ndarray) -> np.ndarray:
    n = v.shape[-1]
    vh = np.fft.rfft(v)
    vh = vh * (-(2 * np.pi * _k(n)) ** 2)
    vh[..., -1] = 0.0
    return np.fft.irfft(vh, n)


def antiderivative_arr(v: np.ndarray) -> np.ndarray:
    """Zero-mean antiderivative of a zero-mean array (mean is discarded)."""
    n = v.shape[-1]
    vh = np.fft.rfft(v)
    k = _k(n)
    out = np.zeros_like(vh)
    out[..., 1:-1] = vh[..., 1:-1] / (2j * np.pi * k[1:-1])
    return np.fft.irfft(out, n)


def q_arr(f: np.ndarray, u: np.ndarray, weight: np.ndarray | None = None) -> np.ndarray:
    """Canonical antiderivative with ``int weight * Q = 0``; weight defaults to ``1/u``."""
    F = antiderivative_arr(f)
    w = 1.0 / u if weight is None else weight
    return F - np.mean(w * F) / np.mean(w)


def shift_arr(v: np.ndarray, c: float) -> np.ndarray:
    """Samples of ``x -> v(x + c)`` by the Fourier shift theorem."""
    n = v.shape[-1]
    vh = np.fft.rfft(v)
    nyq = vh[..., -1].real * np.cos(np.pi * n * c)
    vh = vh * np.exp(2j * np.pi * _k(n) * c)
    vh[..., -1] = nyq
    return np.fft.irfft(vh, n)


def eval_arr(v: np.ndarray, x) -> np.ndarray:
    """Trigonometric interpolant of ``v`` evaluated at arbitrary points ``x``."""
    n = v.shape[-1]
    k = _k(n)
    w = np.full(k.shape, 2.0)
    w[0] = w[-1] = 1.0
    c = w * np.fft.rfft(v) / n
    ph = np.exp(2j * np.pi * np.multiply.outer(np.asarray(x, dtype=float), k))
    return (ph * c).real.sum(axis=-1)


# ---------------------------------------------------------------------------
# public operations


def _vals(p):
    return p.values if isinstance(p, Profile) else np.asarray(p, dtype=float)


def _check_same(*ps):
    grids = {p.grid for p in ps if isinstance(p, Profile)}
    if len(grids) > 1:
        raise GridMismatch("profiles live on different grids: " + ", ".join(str(g.n) for g in grids))
    return grids.pop() if grids else None


def integrate(p) -> float:
    """Rectangle-rule integral over one period; exact for degree < n/2."""
    return float(np.mean(_vals(p)))


def derivative(p: Profile) -> Profile:
    return Profile(p.grid, d_arr(p.values))


def antiderivative_L(f: Profile) -> Profile:
    """The zero-mean antiderivative ``L(f)`` of a zero-mean profile."""
    m = float(np.mean(f.values))
    if abs(m) > 1e-10 * max(1.0, float(np.max(np.abs(f.values)))):
        raise NotZeroMean(f"antiderivative on S^1 needs zero mean, got mean {m:.3e}")
    return Profile(f.grid, antiderivative_arr(f.values))


def canonical_Q(f: Profile, u: Profile) -> Profile:
    """The antiderivative of ``f`` normalised by ``int Q/u = 0``."""
    _check_same(f, u)
    m = float(np.mean(f.values))
    if abs(m) > 1e-10 * max(1.0, float(np.max(np.abs(f.values)))):
        raise NotZeroMean(f"Q needs a zero-mean argument, got mean {m:.3e}")
    if np.min(u.values) <= 0:
        raise PositivityLost("canonical_Q needs a positive weight profile")
    return Profile(f.grid, q_arr(f.values, u.values))


def shifted(p: Profile, c: float) -> Profile:
    """The rotated profile ``x -> p(x + c)``."""
    return Profile(p.grid, shift_arr(p.values, c))


# ---------------------------------------------------------------------------
# text format


def parse_profile(text: str, n: int | None = None) -> Profile:
    """Parse the sample (``N <int>``) or ``FOURIER`` profile text format.

    A ``FOURIER`` file needs the grid size ``n`` from the caller.
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty profile file")
    head = lines[0].split()
    if head[0].upper() == "N":
        count = int(head[1])
        vals = [float(tok) for ln in lines[1:] for tok in ln.split()]
        if len(vals) != count:
            raise ValueError(f"header says N={count} but found {len(vals)} samples")
        return Profile(Grid(count), np.array(vals))
    if head[0].upper() == "FOURIER":
        if n is None:
            raise ValueError("FOURIER profiles need an explicit grid size")
        modes = {}
        for ln in lines[1:]:
            k, a, b = ln.split()
            k = int(k)
            if k < 0 or k >= n // 2:
                raise ValueError(f"mode {k} not representable on n={n}")
            pa, pb = modes.get(k, (0.0, 0.0))
            modes[k] = (pa + float(a), pb + float(b))
        return Profile.from_fourier(Grid(n), modes)
    raise ValueError(f"unrecognised profile header {lines[0]!r}")


def format_profile(p: Profile) -> str:
    body = "\n".join(repr(float(v)) for v in p.values)
    return f"N {p.n}\n{body}\n"


def load_profile(path, n: int | None = None) -> Profile:
    return parse_profile(Path(path).read_text(), n=n)


def save_profile(p: Profile, path) -> None:
    Path(path).write_text(format_profile(p))
