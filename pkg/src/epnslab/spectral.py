"""Fourier-space foundation: periodic grids, spectral fields, and multiplier operators.

Conventions used throughout the package:

* unitary discrete transform (``norm="ortho"``), so Parseval holds with
  constant 1 between physical samples and spectral coefficients;
* all norms are box integrals, ``int f dx = (L/N)^3 * sum over samples``;
* singular multipliers (``1/|xi|``, ``1/|xi|^2``, ``xi xi^T/|xi|^2``) are
  defined as 0 at the zero mode, matching the mean-zero function spaces the
  continuum operators act on; the complementary projector ``I - xi xi^T/|xi|^2``
  is the identity at the zero mode.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft as _sfft

from .config import worker_count

SNAPSHOT_MAGIC = b"EPNS"
SNAPSHOT_VERSION = 1


def fftn_batch(arrays: np.ndarray) -> np.ndarray:
    """Unitary forward FFT over the trailing three axes of a stacked array."""
    return _sfft.fftn(arrays, axes=(-3, -2, -1), norm="ortho", workers=worker_count())


def ifftn_batch(arrays: np.ndarray) -> np.ndarray:
    """Unitary inverse FFT over the trailing three axes of a stacked array."""
    return _sfft.ifftn(arrays, axes=(-3, -2, -1), norm="ortho", workers=worker_count())


class FieldShapeError(ValueError):
    """Physical sample array does not match the grid."""


class GridMismatchError(ValueError):
    """Operation combining fields that live on different grids."""


class SnapshotFormatError(ValueError):
    """Snapshot file is malformed or carries an unsupported version."""


def _raised_cosine(r, lo, hi):
    """Smooth monotone transition, 1 for r <= lo, 0 for r >= hi."""
    out = np.ones_like(r)
    out[r >= hi] = 0.0
    mid = (r > lo) & (r < hi)
    out[mid] = 0.5 * (1.0 + np.cos(np.pi * (r[mid] - lo) / (hi - lo)))
    return out


class SpectralGrid:
    """Wavenumber lattice for a periodic box of side ``box_length``.

    Modes are ``xi = 2*pi*m/L`` for integer ``m`` in ``[-N/2, N/2)`` on each
    axis (standard FFT layout).  The grid also carries the 2/3-rule dealias
    mask (spherical, on integer mode magnitude) and a smooth radial low-pass
    weight that is 1 inside ``cutoff_r0`` and 0 outside ``cutoff_R0``.
    """

    def __init__(self, points_per_axis: int, box_length: float = 2.0 * np.pi,
                 cutoff_r0: float = 0.5, cutoff_R0: float = 2.0):
        if points_per_axis <= 0 or points_per_axis % 2 != 0:
            raise ValueError(f"points_per_axis must be even and positive, got {points_per_axis}")
        if box_length <= 0:
            raise ValueError("box_length must be positive")
        if not 0 < cutoff_r0 < cutoff_R0:
            raise ValueError("cutoffs must satisfy 0 < r0 < R0")
        n = points_per_axis
        self.points_per_axis = n
        self.box_length = float(box_length)
        self.cutoff_r0 = float(cutoff_r0)
        self.cutoff_R0 = float(cutoff_R0)

        modes = np.fft.fftfreq(n, d=1.0 / n)  # integer modes 0..N/2-1, -N/2..-1
        k1d = 2.0 * np.pi / self.box_length * modes
        self.kx = k1d.reshape(n, 1, 1)
        self.ky = k1d.reshape(1, n, 1)
        self.kz = k1d.reshape(1, 1, n)
        self.k_squared = self.kx**2 + self.ky**2 + self.kz**2
        self.k_mag = np.sqrt(self.k_squared)

        # singular multipliers with the zero-mode-to-zero convention
        # (the zero mode is the only lattice point with k = 0)
        safe = self.k_squared.copy()
        safe[0, 0, 0] = 1.0
        self.inv_k_squared = 1.0 / safe
        self.inv_k_squared[0, 0, 0] = 0.0
        self.inv_k_mag = 1.0 / np.sqrt(safe)
        self.inv_k_mag[0, 0, 0] = 0.0

        m_mag = np.sqrt(modes.reshape(n, 1, 1)**2 + modes.reshape(1, n, 1)**2
                        + modes.reshape(1, 1, n)**2)
        self.dealias_mask = m_mag <= n / 3.0
        # self-conjugate planes (mode -N/2 has no +N/2 partner); generated
        # initial data keeps them empty so odd multipliers stay Hermitian
        below = np.abs(modes) < n / 2
        self.nyquist_free_mask = (below.reshape(n, 1, 1) & below.reshape(1, n, 1)
                                  & below.reshape(1, 1, n))
        self.lowpass_weights = _raised_cosine(self.k_mag, self.cutoff_r0, self.cutoff_R0)

        self.cell_volume = (self.box_length / n) ** 3
        self.volume = self.box_length ** 3

    @property
    def shape(self):
        n = self.points_per_axis
        return (n, n, n)

    def axes(self):
        """Physical coordinates along one axis, ``[0, L)`` with N samples."""
        n = self.points_per_axis
        return np.linspace(0.0, self.box_length, n, endpoint=False)

    def meshgrid(self):
        x = self.axes()
        return np.meshgrid(x, x, x, indexing="ij")

    def compatible(self, other: "SpectralGrid") -> bool:
        return (self.points_per_axis == other.points_per_axis
                and self.box_length == other.box_length)

    def __repr__(self):
        return (f"SpectralGrid(N={self.points_per_axis}, L={self.box_length:g}, "
                f"r0={self.cutoff_r0:g}, R0={self.cutoff_R0:g})")


def _reflect(coeffs: np.ndarray) -> np.ndarray:
    """Coefficient array at the reflected modes xi -> -xi (FFT index layout)."""
    out = coeffs[::-1, ::-1, ::-1]
    return np.roll(out, 1, axis=(0, 1, 2))


@dataclass
class SpectralField:
    """Complex Fourier coefficients of a scalar field on a :class:`SpectralGrid`.

    ``real_flag`` records that the underlying physical field is real, i.e. the
    coefficients satisfy Hermitian symmetry ``c(-xi) = conj(c(xi))``.
    """

    grid: SpectralGrid
    coefficients: np.ndarray
    real_flag: bool = True

    def __post_init__(self):
        if self.coefficients.shape != self.grid.shape:
            raise FieldShapeError(
                f"coefficient shape {self.coefficients.shape} != grid shape {self.grid.shape}")
        if self.coefficients.dtype != np.complex128:
            self.coefficients = self.coefficients.astype(np.complex128)

    @classmethod
    def zeros(cls, grid: SpectralGrid, real_flag: bool = True) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128), real_flag)

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coefficients.copy(), self.real_flag)

    def physical(self) -> np.ndarray:
        return transform_inverse(self)

    def hermitian_defect(self) -> float:
        c = self.coefficients
        return float(np.max(np.abs(c - np.conj(_reflect(c)))))

    def hermitianized(self) -> "SpectralField":
        c = 0.5 * (self.coefficients + np.conj(_reflect(self.coefficients)))
        return SpectralField(self.grid, c, True)

    def _check(self, other: "SpectralField"):
        if not self.grid.compatible(other.grid):
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coefficients + other.coefficients,
                             self.real_flag and other.real_flag)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coefficients - other.coefficients,
                             self.real_flag and other.real_flag)

    def __mul__(self, factor) -> "SpectralField":
        real = self.real_flag and not np.iscomplexobj(factor)
        return SpectralField(self.grid, self.coefficients * factor, real)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coefficients, self.real_flag)


@dataclass
class VectorSpectralField:
    """Three scalar spectral fields sharing one grid."""

    components: tuple

    def __post_init__(self):
        if len(self.components) != 3:
            raise ValueError("vector field needs exactly 3 components")
        self.components = tuple(self.components)
        g = self.components[0].grid
        for c in self.components[1:]:
            if not g.compatible(c.grid):
                raise GridMismatchError("vector components live on different grids")
            if c.real_flag != self.components[0].real_flag:
                raise ValueError("inconsistent real_flag across components")

    @classmethod
    def zeros(cls, grid: SpectralGrid, real_flag: bool = True) -> "VectorSpectralField":
        return cls(tuple(SpectralField.zeros(grid, real_flag) for _ in range(3)))

    @property
    def grid(self) -> SpectralGrid:
        return self.components[0].grid

    @property
    def real_flag(self) -> bool:
        return self.components[0].real_flag

    def coefficient_stack(self) -> np.ndarray:
        return np.stack([c.coefficients for c in self.components])

    @classmethod
    def from_stack(cls, grid: SpectralGrid, stack: np.ndarray,
                   real_flag: bool = True) -> "VectorSpectralField":
        return cls(tuple(SpectralField(grid, stack[i], real_flag) for i in range(3)))

    def physical(self) -> np.ndarray:
        return np.stack([c.physical() for c in self.components])

    def copy(self) -> "VectorSpectralField":
        return VectorSpectralField(tuple(c.copy() for c in self.components))

    def hermitianized(self) -> "VectorSpectralField":
        return VectorSpectralField(tuple(c.hermitianized() for c in self.components))

    def __add__(self, other):
        return VectorSpectralField(tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        return VectorSpectralField(tuple(a - b for a, b in zip(self.components, other.components)))

    def __mul__(self, factor):
        return VectorSpectralField(tuple(c * factor for c in self.components))

    __rmul__ = __mul__

    def __neg__(self):
        return VectorSpectralField(tuple(-c for c in self.components))


# ---------------------------------------------------------------------------
# transforms

def transform_forward(grid: SpectralGrid, samples: np.ndarray) -> SpectralField:
    """Unitary forward transform of physical samples on the grid."""
    samples = np.asarray(samples)
    if samples.shape != grid.shape:
        raise FieldShapeError(f"sample shape {samples.shape} != grid shape {grid.shape}")
    real = not np.iscomplexobj(samples)
    coeffs = np.fft.fftn(samples, norm="ortho")
    return SpectralField(grid, coeffs, real)


def transform_inverse(field: SpectralField) -> np.ndarray:
    """Unitary inverse transform; returns a real array for real-flagged fields."""
    out = np.fft.ifftn(field.coefficients, norm="ortho")
    if field.real_flag:
        return out.real
    return out


def vector_from_physical(grid: SpectralGrid, samples: np.ndarray) -> VectorSpectralField:
    return VectorSpectralField(tuple(transform_forward(grid, samples[i]) for i in range(3)))


# ---------------------------------------------------------------------------
# multiplier operators

def derivative_multiplier(field: SpectralField, multi_index) -> SpectralField:
    """Apply ``(i xi)^alpha`` for a 3-component multi-index ``alpha``."""
    g = field.grid
    mult = (1j * g.kx) ** multi_index[0] * (1j * g.ky) ** multi_index[1] * (1j * g.kz) ** multi_index[2]
    return SpectralField(g, field.coefficients * mult, field.real_flag)


def gradient(field: SpectralField) -> VectorSpectralField:
    g = field.grid
    c = field.coefficients
    return VectorSpectralField((
        SpectralField(g, 1j * g.kx * c, field.real_flag),
        SpectralField(g, 1j * g.ky * c, field.real_flag),
        SpectralField(g, 1j * g.kz * c, field.real_flag),
    ))


def divergence(v: VectorSpectralField) -> SpectralField:
    g = v.grid
    cx, cy, cz = (c.coefficients for c in v.components)
    out = 1j * (g.kx * cx + g.ky * cy + g.kz * cz)
    return SpectralField(g, out, v.real_flag)


def curl(v: VectorSpectralField) -> VectorSpectralField:
    g = v.grid
    cx, cy, cz = (c.coefficients for c in v.components)
    wx = 1j * (g.ky * cz - g.kz * cy)
    wy = 1j * (g.kz * cx - g.kx * cz)
    wz = 1j * (g.kx * cy - g.ky * cx)
    return VectorSpectralField.from_stack(g, np.stack([wx, wy, wz]), v.real_flag)


def laplacian(field: SpectralField) -> SpectralField:
    return SpectralField(field.grid, -field.grid.k_squared * field.coefficients, field.real_flag)


def lambda_power(field: SpectralField, a: float) -> SpectralField:
    """Multiply coefficients by ``|xi|^a``; the zero mode maps to 0 unless a == 0."""
    g = field.grid
    if a == 0:
        return field.copy()
    if a >= 0:
        mult = g.k_mag ** a
    else:
        mult = g.inv_k_mag ** (-a)
    out = field.coefficients * mult
    out[0, 0, 0] = 0.0
    return SpectralField(g, out, field.real_flag)


def inv_neg_laplacian(field: SpectralField) -> SpectralField:
    """Solve ``-Delta out = field`` modewise; the mean of the input is dropped."""
    g = field.grid
    return SpectralField(g, field.coefficients * g.inv_k_squared, field.real_flag)


def poisson_gradient(field: SpectralField) -> VectorSpectralField:
    """``grad (-Delta)^{-1} field``, the field-strength map of the Poisson coupling."""
    return gradient(inv_neg_laplacian(field))


def leray_project(v: VectorSpectralField) -> VectorSpectralField:
    """Orthogonal projection onto divergence-free fields; zero mode passes through."""
    g = v.grid
    stack = v.coefficient_stack()
    kdot = g.kx * stack[0] + g.ky * stack[1] + g.kz * stack[2]
    scale = kdot * g.inv_k_squared
    out = np.stack([
        stack[0] - g.kx * scale,
        stack[1] - g.ky * scale,
        stack[2] - g.kz * scale,
    ])
    return VectorSpectralField.from_stack(g, out, v.real_flag)


def hodge_decompose(u: VectorSpectralField):
    """Split into the divergence amplitude ``q`` and curl amplitude ``w``.

    ``q`` carries the longitudinal part (``|xi|^{-1} div u``) and ``w`` the
    transverse part (``|xi|^{-1} curl u``).  The zero mode of ``u`` is not
    representable here and is dropped; pass it back to
    :func:`hodge_recompose` for an exact round trip.
    """
    g = u.grid
    q = SpectralField(g, divergence(u).coefficients * g.inv_k_mag, u.real_flag)
    w_stack = curl(u).coefficient_stack() * g.inv_k_mag
    w = VectorSpectralField.from_stack(g, w_stack, u.real_flag)
    return q, w


def hodge_recompose(q: SpectralField, w: VectorSpectralField,
                    mean_mode=None) -> VectorSpectralField:
    """Rebuild ``u = -|xi|^{-1} grad q + |xi|^{-1} curl w`` (+ optional zero mode)."""
    g = q.grid
    long_part = gradient(q).coefficient_stack() * (-g.inv_k_mag)
    trans_part = curl(w).coefficient_stack() * g.inv_k_mag
    stack = long_part + trans_part
    if mean_mode is not None:
        stack[:, 0, 0, 0] = np.asarray(mean_mode, dtype=np.complex128)
    return VectorSpectralField.from_stack(g, stack, q.real_flag and w.real_flag)


def lowpass(field: SpectralField) -> SpectralField:
    return SpectralField(field.grid, field.coefficients * field.grid.lowpass_weights,
                         field.real_flag)


def highpass(field: SpectralField) -> SpectralField:
    return SpectralField(field.grid, field.coefficients * (1.0 - field.grid.lowpass_weights),
                         field.real_flag)


def dealias(field: SpectralField) -> SpectralField:
    return SpectralField(field.grid, field.coefficients * field.grid.dealias_mask,
                         field.real_flag)


# ---------------------------------------------------------------------------
# norms (Plancherel box integrals)

def _sum_sq(obj) -> np.ndarray:
    if isinstance(obj, VectorSpectralField):
        return sum(np.abs(c.coefficients) ** 2 for c in obj.components)
    return np.abs(obj.coefficients) ** 2


def _grid_of(obj) -> SpectralGrid:
    return obj.grid


def l2_norm(obj) -> float:
    g = _grid_of(obj)
    return float(np.sqrt(g.cell_volume * np.sum(_sum_sq(obj))))


def sobolev_norm(obj, k: int) -> float:
    """Homogeneous seminorm ``|| |xi|^k f ||_{L^2}`` of a scalar or vector field."""
    if k < 0:
        raise ValueError("use neg_sobolev_norm for negative orders")
    g = _grid_of(obj)
    total = np.sum(g.k_squared ** k * _sum_sq(obj)) if k else np.sum(_sum_sq(obj))
    return float(np.sqrt(g.cell_volume * total))


def neg_sobolev_norm(obj, a: float) -> float:
    """Negative-order norm ``|| |xi|^{-a} f ||_{L^2}``; the zero mode is excluded."""
    if a <= 0:
        raise ValueError("a must be positive")
    g = _grid_of(obj)
    return float(np.sqrt(g.cell_volume * np.sum(g.inv_k_mag ** (2.0 * a) * _sum_sq(obj))))


def hk_norm(obj, k: int) -> float:
    """Full Sobolev norm, ``sqrt(sum_{j<=k} ||grad^j f||^2)``."""
    g = _grid_of(obj)
    sq = _sum_sq(obj)
    total = 0.0
    for j in range(k + 1):
        total += np.sum(g.k_squared ** j * sq) if j else np.sum(sq)
    return float(np.sqrt(g.cell_volume * total))


def box_integral(grid: SpectralGrid, samples: np.ndarray) -> float:
    """Box integral of physical samples, ``(L/N)^3 * sum``."""
    return float(grid.cell_volume * np.sum(samples))


# ---------------------------------------------------------------------------
# snapshot binary format

_HEADER = struct.Struct("<4sIIddIB")


def write_snapshot(path, t: float, fields) -> None:
    """Write spectral fields to the binary snapshot format.

    Header: magic ``EPNS``, version u32, N u32, L f64, t f64, n_components
    u32, real_flag u8 (little endian), followed by the complex coefficients of
    each component as f64 (re, im) pairs in row-major mode order.
    """
    fields = list(fields)
    if not fields:
        raise ValueError("need at least one component")
    g = fields[0].grid
    real_flag = all(f.real_flag for f in fields)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, g.points_per_axis,
                              g.box_length, float(t), len(fields), int(real_flag)))
        for f in fields:
            data = np.ascontiguousarray(f.coefficients, dtype=np.complex128)
            fh.write(data.astype("<c16").tobytes())


def read_snapshot(path, grid: SpectralGrid = None):
    """Read a snapshot; returns ``(t, [SpectralField, ...])``.

    If ``grid`` is given it must match the stored N and L; otherwise a grid
    with default cutoffs is constructed.
    """
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise SnapshotFormatError("truncated snapshot header")
        magic, version, n, box, t, n_components, real_flag = _HEADER.unpack(header)
        if magic != SNAPSHOT_MAGIC:
            raise SnapshotFormatError(f"bad magic {magic!r}")
        if version != SNAPSHOT_VERSION:
            raise SnapshotFormatError(f"unsupported snapshot version {version}")
        if grid is None:
            grid = SpectralGrid(n, box)
        elif grid.points_per_axis != n or grid.box_length != box:
            raise SnapshotFormatError("snapshot grid does not match the supplied grid")
        count = n ** 3
        fields = []
        for _ in range(n_components):
            raw = fh.read(16 * count)
            if len(raw) < 16 * count:
                raise SnapshotFormatError("truncated snapshot payload")
            coeffs = np.frombuffer(raw, dtype="<c16").astype(np.complex128).reshape(grid.shape)
            fields.append(SpectralField(grid, coeffs.copy(), bool(real_flag)))
    return t, fields
