"""Periodic spatial discretization, Fourier multipliers, and fractional Sobolev norms.

A real function g on the interval [-L, L) is stored through its normalized
Fourier coefficients

    c_k = (1/M) sum_j g(x_j) exp(-i xi_k x_j),     xi_k = pi k / L,

on the nodes x_j = -L + 2 L j / M, with k running over -M/2 .. M/2 - 1 in FFT
order.  With this normalization Parseval reads

    ||g||_{L2}^2 = (2L/M) sum_j g(x_j)^2 = 2 L sum_k |c_k|^2,

and the discrete fractional Sobolev norm is

    ||g||_{H^ell}^2 = 2 L sum_k (1 + xi_k^2)^ell |c_k|^2.

The frequency-cutoff smoothing operator applies the even multiplier

    m(xi) = 1                                   for |xi| <= N,
    m(xi) = (|xi|/N)^(ell-1)                    for |xi| >= 2N,

joined on N < |xi| < 2N by a C^1 monotone blend in log frequency:
m = exp(s(r) (ell-1) ln(|xi|/N)) with r = ln(|xi|/N)/ln 2 and
s(r) = 3 r^2 - 2 r^3.  It maps an H^ell function into H^1, which is what the
energy arguments exercised by the rest of the package rely on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import GridMismatchError, SymmetryError

__all__ = [
    "Grid",
    "SpectralField",
    "ImethodParams",
    "to_spectral",
    "from_spectral",
    "apply_multiplier",
    "derivative",
    "helmholtz_inverse",
    "sobolev_norm",
    "l2_norm",
    "l2_inner",
    "i_multiplier",
    "i_operator",
    "i_h1_norm",
    "nonlinear_product",
    "hermitian_symmetrize",
    "symmetry_defect",
    "write_field_csv",
    "read_field_csv",
    "write_field_binary",
    "read_field_binary",
]

BINARY_MAGIC = b"BBM1"
FIELD_CSV_HEADER = ("k", "re_ck", "im_ck")


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with M collocation points on [-L, L)."""

    M: int
    L: float

    def __post_init__(self):
        if not isinstance(self.M, int) or self.M % 2 != 0 or self.M < 8:
            raise ValueError(f"M must be an even integer >= 8, got {self.M!r}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"L must be a positive real, got {self.L!r}")

    @cached_property
    def x(self) -> np.ndarray:
        """Collocation nodes x_j = -L + 2 L j / M."""
        return -self.L + 2.0 * self.L * np.arange(self.M) / self.M

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in FFT order: 0, 1, ..., M/2-1, -M/2, ..., -1."""
        return np.rint(np.fft.fftfreq(self.M, d=1.0 / self.M)).astype(np.int64)

    @cached_property
    def xi(self) -> np.ndarray:
        """Angular frequencies xi_k = pi k / L in FFT order."""
        return np.pi * self.k / self.L

    @cached_property
    def phase(self) -> np.ndarray:
        # (-1)^k factors that translate between FFT indexing (origin at x = 0)
        # and nodes starting at x = -L.
        return np.where(self.k % 2 == 0, 1.0, -1.0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: True where |k| <= M/3."""
        return np.abs(self.k) <= self.M // 3

    @cached_property
    def helmholtz(self) -> np.ndarray:
        """Symbol of (I - d_xx)^{-1}: 1 / (1 + xi^2)."""
        return 1.0 / (1.0 + self.xi**2)

    @property
    def xi_max(self) -> float:
        """Largest resolved |xi| (Nyquist)."""
        return np.pi * (self.M // 2) / self.L


@dataclass
class SpectralField:
    """A real-valued function of x stored as complex Fourier coefficients.

    Coefficients are in FFT order and carry Hermitian symmetry
    c_{-k} = conj(c_k) whenever the field represents a real function.
    Instances have value semantics: arithmetic returns new fields.
    """

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != (self.grid.M,):
            raise GridMismatchError(
                f"expected {self.grid.M} coefficients, got shape {coeffs.shape}"
            )
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros(grid.M, dtype=np.complex128))

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def _check_grid(self, other: "SpectralField") -> None:
        if self.grid != other.grid:
            raise GridMismatchError(
                f"grids differ: {self.grid} vs {other.grid}"
            )

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_grid(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_grid(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)


@dataclass(frozen=True)
class ImethodParams:
    """Sobolev index ell in [0, 1] and multiplier threshold N > 0."""

    ell: float
    N: float

    def __post_init__(self):
        if not (0.0 <= self.ell <= 1.0):
            raise ValueError(f"ell must lie in [0, 1], got {self.ell!r}")
        if not (np.isfinite(self.N) and self.N > 0):
            raise ValueError(f"N must be positive, got {self.N!r}")


def to_spectral(values, grid: Grid) -> SpectralField:
    """Transform real nodal values to normalized Fourier coefficients."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (grid.M,):
        raise GridMismatchError(
            f"expected {grid.M} nodal values, got shape {values.shape}"
        )
    coeffs = np.fft.fft(values) * grid.phase / grid.M
    return SpectralField(grid, coeffs)


def from_spectral(field: SpectralField, tol: float = 1e-12) -> np.ndarray:
    """Return real nodal values; raise SymmetryError on a non-real field.

    The imaginary residue of the inverse transform is discarded when it is
    below tol (relative to the field's magnitude) and rejected otherwise.
    """
    grid = field.grid
    values = np.fft.ifft(field.coeffs * grid.phase) * grid.M
    scale = max(float(np.max(np.abs(values.real))), 1.0)
    residue = float(np.max(np.abs(values.imag)))
    if residue > tol * scale:
        raise SymmetryError(
            f"imaginary residue {residue:.3e} exceeds {tol:.1e} * {scale:.3e}; "
            "coefficients are not Hermitian-symmetric"
        )
    return values.real.copy()


def apply_multiplier(field: SpectralField, symbol: Callable) -> SpectralField:
    """Multiply coefficients by symbol(xi_k).

    `symbol` is called once with the full frequency array.  Realness of the
    field is preserved whenever symbol(-xi) = conj(symbol(xi)).
    """
    values = np.asarray(symbol(field.grid.xi))
    return SpectralField(field.grid, field.coeffs * values)


def derivative(field: SpectralField) -> SpectralField:
    """Spatial derivative: multiplication by i xi."""
    return SpectralField(field.grid, field.coeffs * (1j * field.grid.xi))


def helmholtz_inverse(field: SpectralField) -> SpectralField:
    """Apply (I - d_xx)^{-1}."""
    return SpectralField(field.grid, field.coeffs * field.grid.helmholtz)


def sobolev_norm(field: SpectralField, ell: float) -> float:
    """Discrete H^ell norm, ell in [0, 2]; ell = 0 is the L^2 norm."""
    if not (0.0 <= ell <= 2.0):
        raise ValueError(f"ell must lie in [0, 2], got {ell!r}")
    grid = field.grid
    weights = (1.0 + grid.xi**2) ** ell
    total = 2.0 * grid.L * float(np.sum(weights * np.abs(field.coeffs) ** 2))
    return float(np.sqrt(total))


def l2_norm(field: SpectralField) -> float:
    return sobolev_norm(field, 0.0)


def l2_inner(f: SpectralField, g: SpectralField) -> float:
    """L^2 inner product of two real fields: 2 L Re sum_k f_k conj(g_k)."""
    f._check_grid(g)
    return 2.0 * f.grid.L * float(np.real(np.sum(f.coeffs * np.conj(g.coeffs))))


def i_multiplier(xi, params: ImethodParams):
    """Evaluate the smoothing multiplier m(xi); even, nonincreasing, in (0, 1].

    Scalar input returns a float; array input returns an array.
    """
    xi_arr = np.abs(np.asarray(xi, dtype=np.float64))
    scalar = xi_arr.ndim == 0
    xi_arr = np.atleast_1d(xi_arr)
    n = params.N
    out = np.ones_like(xi_arr)
    high = xi_arr >= 2.0 * n
    if np.any(high):
        out[high] = (xi_arr[high] / n) ** (params.ell - 1.0)
    mid = (xi_arr > n) & ~high
    if np.any(mid):
        log_ratio = np.log(xi_arr[mid] / n)
        r = log_ratio / np.log(2.0)
        smooth = 3.0 * r**2 - 2.0 * r**3
        out[mid] = np.exp(smooth * (params.ell - 1.0) * log_ratio)
    return float(out[0]) if scalar else out


def i_operator(field: SpectralField, params: ImethodParams) -> SpectralField:
    """Apply the frequency-cutoff smoothing operator coefficientwise."""
    return SpectralField(
        field.grid, field.coeffs * i_multiplier(field.grid.xi, params)
    )


def i_h1_norm(field: SpectralField, params: ImethodParams) -> float:
    """H^1 norm of the smoothed field, computed as one weighted sum."""
    grid = field.grid
    m = i_multiplier(grid.xi, params)
    weights = m**2 * (1.0 + grid.xi**2)
    total = 2.0 * grid.L * float(np.sum(weights * np.abs(field.coeffs) ** 2))
    return float(np.sqrt(total))


def nonlinear_product(u: SpectralField, v: SpectralField, dealias: bool = True) -> SpectralField:
    """Pointwise product u*v computed pseudospectrally.

    With dealias=True the 2/3 rule is applied: coefficients with |k| > M/3
    are zeroed both before and after the physical-space product, so the
    convolution is exact within the retained band.
    """
    u._check_grid(v)
    grid = u.grid
    cu = u.coeffs
    cv = v.coeffs
    if dealias:
        cu = np.where(grid.dealias_mask, cu, 0.0)
        cv = np.where(grid.dealias_mask, cv, 0.0)
    a = (np.fft.ifft(cu * grid.phase) * grid.M).real
    b = (np.fft.ifft(cv * grid.phase) * grid.M).real
    prod = np.fft.fft(a * b) * grid.phase / grid.M
    if dealias:
        prod = np.where(grid.dealias_mask, prod, 0.0)
    return SpectralField(grid, prod)


def _reflect_indices(grid: Grid) -> np.ndarray:
    return (-grid.k) % grid.M


def hermitian_symmetrize(field: SpectralField) -> SpectralField:
    """Project onto Hermitian-symmetric coefficients (a real field)."""
    grid = field.grid
    c = field.coeffs
    sym = 0.5 * (c + np.conj(c[_reflect_indices(grid)]))
    sym[0] = sym[0].real
    sym[grid.M // 2] = sym[grid.M // 2].real
    return SpectralField(grid, sym)


def symmetry_defect(field: SpectralField) -> float:
    """Max |c_k - conj(c_{-k})|, including the Nyquist/DC imaginary parts."""
    grid = field.grid
    c = field.coeffs
    defect = float(np.max(np.abs(c - np.conj(c[_reflect_indices(grid)]))))
    return defect


def _ascending_order(grid: Grid) -> np.ndarray:
    return np.argsort(grid.k, kind="stable")


def write_field_csv(field: SpectralField, path) -> None:
    """Write rows (k, Re c_k, Im c_k) for k ascending, with a trailing
    comment line carrying M and L."""
    grid = field.grid
    order = _ascending_order(grid)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(FIELD_CSV_HEADER) + "\n")
        for idx in order:
            c = field.coeffs[idx]
            fh.write(f"{int(grid.k[idx])},{float(c.real)!r},{float(c.imag)!r}\n")
        fh.write(f"# M={grid.M} L={float(grid.L)!r}\n")


def read_field_csv(path) -> SpectralField:
    ks = []
    res = []
    ims = []
    meta = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != ",".join(FIELD_CSV_HEADER):
            raise ValueError(f"unexpected field CSV header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    meta[key] = value
                continue
            k_str, re_str, im_str = line.split(",")
            ks.append(int(k_str))
            res.append(float(re_str))
            ims.append(float(im_str))
    if "M" not in meta or "L" not in meta:
        raise ValueError("field CSV is missing the trailing '# M=... L=...' line")
    grid = Grid(int(meta["M"]), float(meta["L"]))
    if len(ks) != grid.M:
        raise ValueError(f"expected {grid.M} rows, got {len(ks)}")
    coeffs = np.zeros(grid.M, dtype=np.complex128)
    for k, re, im in zip(ks, res, ims):
        coeffs[k % grid.M] = re + 1j * im
    return SpectralField(grid, coeffs)


def write_field_binary(field: SpectralField, path) -> None:
    """Binary dump: magic 'BBM1', uint64 M, float64 L, then 2M little-endian
    float64 values (Re, Im interleaved, k ascending from -M/2)."""
    grid = field.grid
    order = _ascending_order(grid)
    flat = np.empty(2 * grid.M, dtype="<f8")
    flat[0::2] = field.coeffs[order].real
    flat[1::2] = field.coeffs[order].imag
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<Q", grid.M))
        fh.write(struct.pack("<d", grid.L))
        fh.write(flat.tobytes())


def read_field_binary(path) -> SpectralField:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BINARY_MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {BINARY_MAGIC!r}")
        (m,) = struct.unpack("<Q", fh.read(8))
        (length,) = struct.unpack("<d", fh.read(8))
        payload = fh.read()
    grid = Grid(int(m), float(length))
    flat = np.frombuffer(payload, dtype="<f8")
    if flat.size != 2 * grid.M:
        raise ValueError(f"expected {2 * grid.M} float64 values, got {flat.size}")
    ascending = flat[0::2] + 1j * flat[1::2]
    coeffs = np.empty(grid.M, dtype=np.complex128)
    order = _ascending_order(grid)
    coeffs[order] = ascending
    return SpectralField(grid, coeffs)
