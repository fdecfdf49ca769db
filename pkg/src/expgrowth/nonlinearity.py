"""Right-hand side Delta exp(-Delta h), evaluated two independent ways.

``rhs_direct`` exponentiates in physical space.  ``rhs_taylor`` sums the
truncated series -Delta^2 h + Delta sum_{j=2}^J (-Delta h)^j / j!.  Each is the
other's oracle; ``taylor_lattice`` forms the same powers by literal lattice
convolution, with no aliasing at all, for small grids.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve

from .field import SpectralField, pad_spectrum, s_norm, unpad_spectrum
from .series import series_tail, truncation_order

__all__ = [
    "BlowUpSignal",
    "RhsEvaluation",
    "EXP_OVERFLOW_THRESHOLD",
    "exp_term",
    "rhs_direct",
    "rhs_taylor",
    "default_order",
    "taylor_bound",
    "taylor_lattice",
    "convolution_bound_check",
    "symmetrize",
]

EXP_OVERFLOW_THRESHOLD = 700.0
LATTICE_MAX_N = 64


class BlowUpSignal(ArithmeticError):
    """exp(-Delta h) would overflow: sup(-Delta h) passed the sentinel."""


@dataclass
class RhsEvaluation:
    rhs: SpectralField
    method: str
    truncation_bound: float = 0.0
    order: int | None = None
    exp_max: float = 1.0


def _dealias_size(n, dealias):
    return 3 * n // 2 if dealias else n


def _neg_index(n):
    return (-np.arange(n)) % n


def symmetrize(coeffs):
    """Project coefficients onto those of a real field."""
    n = coeffs.shape[0]
    ni = _neg_index(n)
    partner = coeffs[ni] if coeffs.ndim == 1 else coeffs[np.ix_(ni, ni)]
    return 0.5 * (coeffs + np.conj(partner))


def _to_grid(field, coeffs, dealias):
    grid = field.grid
    m = _dealias_size(grid.n, dealias)
    if m == grid.n:
        return np.fft.ifftn(coeffs).real * grid.size
    return np.fft.ifftn(pad_spectrum(coeffs, grid, m)).real * m**grid.dim


def _from_grid(field, values, dealias):
    grid = field.grid
    m = _dealias_size(grid.n, dealias)
    coeffs = np.fft.fftn(values) / m**grid.dim
    if m != grid.n:
        coeffs = unpad_spectrum(coeffs, grid)
    return symmetrize(coeffs)


def exp_term(h, dealias=True):
    """Coefficients of exp(-Delta h) and the grid maximum of exp(-Delta h)."""
    u = _to_grid(h, -h.grid.k2 * h.spectral, dealias)
    peak = float(np.max(-u))
    if not np.isfinite(peak) or peak > EXP_OVERFLOW_THRESHOLD:
        raise BlowUpSignal(f"sup(-Delta h) = {peak:.4g} exceeds {EXP_OVERFLOW_THRESHOLD}")
    # transform exp - 1 so the rounding of the constant part does not reach the k != 0 modes
    ehat = _from_grid(h, np.expm1(-u), dealias)
    ehat[(0,) * h.grid.dim] += 1.0
    return ehat, float(np.exp(peak))


def rhs_direct(h, dealias=True):
    """Delta exp(-Delta h) via pointwise exponentiation."""
    ehat, emax = exp_term(h, dealias)
    rhs = -h.grid.k2 * ehat
    rhs[(0,) * h.grid.dim] = 0.0
    return RhsEvaluation(SpectralField(h.grid, spectral=rhs), "direct", 0.0, None, emax)


def taylor_bound(h, order):
    """||h||_6 * sum_{j > order} j^4/j! ||h||_2^(j-1)."""
    return s_norm(h, 6.0) * series_tail(2.0, s_norm(h, 2.0), order)


def default_order(h, eps=1e-12):
    return truncation_order(4.0, s_norm(h, 2.0), eps)


def rhs_taylor(h, order=None, dealias=True, tol=None):
    """-Delta^2 h + Delta sum_{j=2}^order (-Delta h)^j / j!.

    Powers are formed by repeated multiplication on the (padded) grid.  When
    ``tol`` is given and the tail bound exceeds it, a ``RuntimeWarning`` is
    issued and the evaluation is still returned.
    """
    if order is None:
        order = default_order(h)
    if order < 1:
        raise ValueError("order must be >= 1")
    g = h.grid
    lin = -(g.k2**2) * h.spectral
    if order >= 2:
        w = _to_grid(h, g.k2 * h.spectral, dealias)  # -Delta h
        term = 0.5 * w * w
        acc = term.copy()
        for j in range(3, order + 1):
            term = term * w / j
            acc += term
        rhs = lin - g.k2 * _from_grid(h, acc, dealias)
    else:
        rhs = lin.copy()
    rhs[(0,) * g.dim] = 0.0
    bound = taylor_bound(h, order)
    if tol is not None and bound > tol:
        warnings.warn(f"Taylor order {order} leaves tail bound {bound:.3g} > tol {tol:.3g}", RuntimeWarning)
    return RhsEvaluation(SpectralField(g, spectral=rhs), f"taylor({order})", bound, order)


def _centered(h):
    """|k|^2 hhat on the centered lattice, plus the lattice scale."""
    g = h.grid
    if g.n > LATTICE_MAX_N:
        raise ValueError(f"lattice convolution refused for n={g.n} > {LATTICE_MAX_N}")
    a = np.fft.fftshift(g.k2 * h.spectral)
    return a, 2.0 * np.pi / g.length


def _lattice_kmag(shape, offset, scale):
    ax = [scale * (np.arange(m) - offset) for m in shape]
    mesh = np.meshgrid(*ax, indexing="ij")
    return np.sqrt(sum(k**2 for k in mesh))


def _power(a, j):
    out = a
    for _ in range(j - 1):
        out = convolve(out, a, method="direct")
    return out


def taylor_lattice(h, order):
    """Exact lattice coefficients of Delta sum_{j=2}^order (-Delta h)^j / j!.

    Returns ``(kint, coeffs)`` with integer wavenumbers per axis on the
    extended centered lattice (1D: ``kint`` is a 1D array; 2D: a pair of
    meshgrids).
    """
    a, scale = _centered(h)
    n = h.grid.n
    size = order * (n - 1) + 1
    acc = np.zeros((size,) * h.grid.dim, dtype=complex)
    off = order * (n // 2)
    power = a
    fact = 1.0
    for j in range(2, order + 1):
        power = convolve(power, a, method="direct")
        fact *= j
        start = off - j * (n // 2)
        sl = tuple(slice(start, start + power.shape[0]) for _ in range(h.grid.dim))
        acc[sl] += power / fact
    kint_axis = np.arange(size) - off
    kmag = _lattice_kmag(acc.shape, off, scale)
    coeffs = -(kmag**2) * acc
    if h.grid.dim == 1:
        return kint_axis, coeffs
    return tuple(np.meshgrid(kint_axis, kint_axis, indexing="ij")), coeffs


def convolution_bound_check(h, s, j):
    """Both sides of sum_{k!=0} |k|^s |(|k|^2 hhat)^{*j}| <= j^s ||h||_{s+2} ||h||_2^(j-1).

    The left side uses exact lattice convolution (n <= 64 only).
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    a, scale = _centered(h)
    conv = _power(a, j)
    off = j * (h.grid.n // 2)
    kmag = _lattice_kmag(conv.shape, off, scale)
    w = np.zeros(conv.shape)
    nz = kmag > 0
    w[nz] = kmag[nz] ** s
    lhs = float(np.sum(w * np.abs(conv)))
    rhs = float(j**s * s_norm(h, s + 2.0) * s_norm(h, 2.0) ** (j - 1))
    return lhs, rhs
