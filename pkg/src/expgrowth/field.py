"""Periodic fields with synchronized physical and Fourier representations.

Coefficients follow the Fourier-series convention on the torus,

    h(x) = sum_k hhat_k exp(i k.x),

so ``A*sin(x)`` has hhat_{+1} = -iA/2, hhat_{-1} = +iA/2 and every homogeneous
norm below excludes the k = 0 mode.  With this convention ||A sin x||_2 = A.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "SpectralField",
    "NormReport",
    "transform_forward",
    "transform_inverse",
    "s_norm",
    "besov_norm",
    "fsp_norm",
    "analytic_norm",
    "laplacian",
    "mean",
    "norm_report",
    "pad_spectrum",
    "unpad_spectrum",
    "random_field",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid of ``n`` points per axis on [0, length)^dim."""

    dim: int = 1
    n: int = 256
    length: float = 2.0 * math.pi

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.n < 8 or self.n % 2:
            raise ValueError("n must be even and >= 8")
        if not self.length > 0:
            raise ValueError("length must be positive")

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def spacing(self):
        return self.length / self.n

    @property
    def size(self):
        return self.n**self.dim

    @cached_property
    def axis(self):
        return self.spacing * np.arange(self.n)

    @cached_property
    def coords(self):
        """Physical coordinates, one array per axis (``indexing='ij'``)."""
        if self.dim == 1:
            return (self.axis,)
        return tuple(np.meshgrid(self.axis, self.axis, indexing="ij"))

    @cached_property
    def integer_wavenumbers(self):
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        if self.dim == 1:
            return (k,)
        return tuple(np.meshgrid(k, k, indexing="ij"))

    @cached_property
    def wavenumbers(self):
        scale = 2.0 * math.pi / self.length
        return tuple(scale * k for k in self.integer_wavenumbers)

    @cached_property
    def k2(self):
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def kmag(self):
        return np.sqrt(self.k2)

    @cached_property
    def nonzero(self):
        return self.kmag > 0

    def refined(self, factor=2):
        return Grid(self.dim, self.n * factor, self.length)


def _check_finite(a, what):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite values")


class SpectralField:
    """Real periodic field; physical samples and coefficients computed lazily.

    Build one with :meth:`from_physical` or :meth:`from_spectral`.  Arrays are
    treated as read-only; operations return new fields.
    """

    __slots__ = ("grid", "_phys", "_spec")

    def __init__(self, grid, physical=None, spectral=None):
        if physical is None and spectral is None:
            raise ValueError("need physical or spectral data")
        self.grid = grid
        self._phys = None if physical is None else np.asarray(physical, dtype=float)
        self._spec = None if spectral is None else np.asarray(spectral, dtype=complex)
        for arr in (self._phys, self._spec):
            if arr is not None and arr.shape != grid.shape:
                raise ValueError(f"data shape {arr.shape} != grid shape {grid.shape}")

    @classmethod
    def from_physical(cls, grid, values):
        values = np.asarray(values, dtype=float)
        _check_finite(values, "physical samples")
        return cls(grid, physical=values)

    @classmethod
    def from_spectral(cls, grid, coeffs):
        return cls(grid, spectral=coeffs)

    @classmethod
    def from_function(cls, grid, func):
        return cls.from_physical(grid, func(*grid.coords))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, physical=np.zeros(grid.shape), spectral=np.zeros(grid.shape, complex))

    @property
    def synced(self):
        return self._phys is not None and self._spec is not None

    @property
    def physical(self):
        if self._phys is None:
            self._phys = np.fft.ifftn(self._spec).real * self.grid.size
        return self._phys

    @property
    def spectral(self):
        if self._spec is None:
            _check_finite(self._phys, "physical samples")
            self._spec = np.fft.fftn(self._phys) / self.grid.size
        return self._spec

    def sync(self):
        self.physical, self.spectral
        return self

    def copy(self):
        return SpectralField(
            self.grid,
            None if self._phys is None else self._phys.copy(),
            None if self._spec is None else self._spec.copy(),
        )

    def __add__(self, other):
        return SpectralField(self.grid, spectral=self.spectral + other.spectral)

    def __sub__(self, other):
        return SpectralField(self.grid, spectral=self.spectral - other.spectral)

    def __mul__(self, c):
        return SpectralField(self.grid, spectral=c * self.spectral)

    __rmul__ = __mul__

    def __repr__(self):
        return f"SpectralField(grid={self.grid!r})"

    # norms as methods for convenience
    def s_norm(self, s):
        return s_norm(self, s)

    def besov_norm(self, s):
        return besov_norm(self, s)

    def fsp_norm(self, s, p):
        return fsp_norm(self, s, p)

    def analytic_norm(self, s, nu, p=1.0):
        return analytic_norm(self, s, nu, p)

    def laplacian(self):
        return laplacian(self)

    def mean(self):
        return mean(self)


def transform_forward(field):
    """Populate Fourier coefficients from physical samples."""
    field.spectral
    return field


def transform_inverse(field):
    field.physical
    return field


def _weights(field, s):
    g = field.grid
    w = np.zeros(g.shape)
    w[g.nonzero] = g.kmag[g.nonzero] ** s
    return w


def s_norm(field, s):
    """sum_{k != 0} |k|^s |hhat_k|."""
    return float(np.sum(_weights(field, s) * np.abs(field.spectral)))


def besov_norm(field, s):
    """Max over dyadic shells 2^(m-1) <= |k| < 2^m of the shell s-norm."""
    g = field.grid
    kk = g.kmag[g.nonzero]
    vals = kk**s * np.abs(field.spectral[g.nonzero])
    if vals.size == 0:
        return 0.0
    shell = np.floor(np.log2(kk)).astype(int) + 1
    # guard against log2 round-off at exact powers of two
    shell[2.0 ** (shell - 1) > kk] -= 1
    shell[2.0**shell <= kk] += 1
    shell -= shell.min()
    return float(np.max(np.bincount(shell, weights=vals)))


def fsp_norm(field, s, p):
    """(sum_{k != 0} |k|^(s p) |hhat_k|^p)^(1/p)."""
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    a = np.abs(field.spectral)
    return float(np.sum(_weights(field, s * p) * a**p) ** (1.0 / p))


def analytic_norm(field, s, nu, p=1.0):
    """(sum_{k != 0} |k|^(s p) exp(p nu |k|) |hhat_k|^p)^(1/p)."""
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    g = field.grid
    expo = p * nu * float(g.kmag.max())
    if expo > 700.0:
        raise OverflowError(
            f"analytic weight exp({expo:.1f}) overflows; shrink nu below {700.0 / (p * g.kmag.max()):.4g}"
        )
    a = np.abs(field.spectral)
    w = _weights(field, s * p) * np.exp(p * nu * g.kmag)
    return float(np.sum(w * a**p) ** (1.0 / p))


def laplacian(field):
    return SpectralField(field.grid, spectral=-field.grid.k2 * field.spectral)


def mean(field):
    return float(field.spectral[(0,) * field.grid.dim].real)


def pad_spectrum(coeffs, grid, m):
    """Zero-pad n-grid coefficients onto an m-point-per-axis lattice."""
    n = grid.n
    kint = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    idx = np.mod(kint, m)
    out = np.zeros((m,) * grid.dim, dtype=complex)
    if grid.dim == 1:
        out[idx] = coeffs
    else:
        out[np.ix_(idx, idx)] = coeffs
    return out


def unpad_spectrum(coeffs, grid):
    """Restrict coefficients on a larger lattice to the n-grid wavenumbers."""
    n, m = grid.n, coeffs.shape[0]
    idx = np.mod(np.fft.fftfreq(n, d=1.0 / n).astype(int), m)
    if grid.dim == 1:
        return coeffs[idx]
    return coeffs[np.ix_(idx, idx)]


def random_field(grid, rng, band=8, norm2=None):
    """Real zero-mean field with random coefficients on 0 < |k| <= band.

    If ``norm2`` is given the field is rescaled so that its 2-norm equals it.
    """
    coeffs = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    kint = np.sqrt(sum(k**2 for k in grid.integer_wavenumbers))
    coeffs[(kint == 0) | (kint > band)] = 0.0
    # drop the Nyquist line so the real projection keeps every retained mode
    for k in grid.integer_wavenumbers:
        coeffs[np.abs(k) == grid.n // 2] = 0.0
    ni = (-np.arange(grid.n)) % grid.n
    partner = coeffs[ni] if grid.dim == 1 else coeffs[np.ix_(ni, ni)]
    coeffs = 0.5 * (coeffs + np.conj(partner))
    f = SpectralField(grid, spectral=coeffs)
    if norm2 is not None:
        cur = s_norm(f, 2.0)
        if cur == 0:
            raise ValueError("band contains no nonzero modes")
        f = SpectralField(grid, spectral=coeffs * (norm2 / cur))
    return f


@dataclass
class NormReport:
    """Every norm of one field at one time."""

    s_norms: dict = dc_field(default_factory=dict)
    besov_norms: dict = dc_field(default_factory=dict)
    fsp_norms: dict = dc_field(default_factory=dict)
    analytic_norms: dict = dc_field(default_factory=dict)
    sup_h: float = 0.0
    sup_lap: float = 0.0

    def flat(self):
        """Column name -> value, as written to time-series CSV."""
        out = {}
        for s, v in self.s_norms.items():
            out[f"s_norm[{_fmt(s)}]"] = v
        for s, v in self.besov_norms.items():
            out[f"besov[{_fmt(s)}]"] = v
        for (s, p), v in self.fsp_norms.items():
            out[f"fsp[{_fmt(s)},{_fmt(p)}]"] = v
        for (s, nu), v in self.analytic_norms.items():
            out[f"analytic[{_fmt(s)},{_fmt(nu)}]"] = v
        out["sup_h"] = self.sup_h
        out["sup_lap"] = self.sup_lap
        return out


def _fmt(x):
    return repr(float(x)).removesuffix(".0") if float(x).is_integer() else repr(float(x))


def norm_report(field, s_values=(2.0, 6.0), besov_s=(), sp_pairs=(), analytic=()):
    """Evaluate the requested norm families on ``field``."""
    lap = laplacian(field)
    return NormReport(
        s_norms={float(s): s_norm(field, s) for s in s_values},
        besov_norms={float(s): besov_norm(field, s) for s in besov_s},
        fsp_norms={(float(s), float(p)): fsp_norm(field, s, p) for s, p in sp_pairs},
        analytic_norms={(float(s), float(nu)): analytic_norm(field, s, nu) for s, nu in analytic},
        sup_h=float(np.max(np.abs(field.physical))),
        sup_lap=float(np.max(np.abs(lap.physical))),
    )
