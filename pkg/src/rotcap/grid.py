"""Periodic spectral grids and fields.

Geometry: the first two axes are horizontal with period 2*pi (integer
wavenumbers), the third axis is vertical with period 2, i.e. coordinates in
[-1, 1) and wavenumbers pi*n. An axis of size 1 is inactive (the field does
not depend on that coordinate); active axes need a power-of-two size >= 4.

Conventions used throughout the package:

* Fourier coefficients are stored normalized, ``c = fftn(values) / npoints``,
  so ``c[0,0,0]`` is the mean value and a mode ``cos(k.x)`` carries 0.5 at
  ``+k`` and ``-k``.
* Volume integrals use the true measure ``2*pi`` per active horizontal axis,
  while the vertical direction contributes a normalized average (weight 1).
  With this convention, integrals of columnar fields agree between a 3d grid
  and its horizontal reduction.
* Dealiasing keeps ``|k_i| <= floor(n_i * fraction / 2)`` per active axis
  (the 2/3 rule by default), applied as a sharp mask in coefficient space.
"""

from __future__ import annotations

import numpy as np

from .errors import GridError, MultiplierError, ProjectionError

HORIZONTAL_PERIOD = 2.0 * np.pi
VERTICAL_PERIOD = 2.0


def _valid_axis_size(n):
    return n == 1 or (n >= 4 and (n & (n - 1)) == 0)


class Grid:
    """Uniform periodic grid, wavenumber tables and the dealiasing mask."""

    def __init__(self, nx, ny=1, nz=1, dealias_fraction=2.0 / 3.0):
        for name, n in (("nx", nx), ("ny", ny), ("nz", nz)):
            if not _valid_axis_size(int(n)):
                raise GridError(
                    f"{name}={n}: active axis sizes must be powers of two >= 4"
                )
        if not 0.0 < dealias_fraction <= 1.0:
            raise GridError(f"dealias_fraction={dealias_fraction} not in (0, 1]")
        self.nx = int(nx)
        self.ny = int(ny)
        self.nz = int(nz)
        self.dealias_fraction = float(dealias_fraction)
        self.shape = (self.nx, self.ny, self.nz)
        self.npoints = self.nx * self.ny * self.nz

        # integer mode indices, broadcastable to self.shape
        def modes(n):
            return np.fft.fftfreq(n, d=1.0 / n).astype(np.float64)

        self._m1 = modes(self.nx).reshape(-1, 1, 1)
        self._m2 = modes(self.ny).reshape(1, -1, 1)
        self._m3 = modes(self.nz).reshape(1, 1, -1)
        # physical wavenumbers: integers horizontally, pi * integer vertically
        self.k1 = self._m1
        self.k2 = self._m2
        self.k3 = np.pi * self._m3
        self.ksq = self.k1**2 + self.k2**2 + self.k3**2
        self.kmag = np.sqrt(self.ksq)

        self.active = (self.nx > 1, self.ny > 1, self.nz > 1)
        n_h_active = int(self.active[0]) + int(self.active[1])
        # vertical integrals are normalized averages, so only horizontal
        # axes contribute to the measure
        self.measure = HORIZONTAL_PERIOD**n_h_active

        mask = np.ones(self.shape, dtype=bool)
        cuts = []
        for m, n in ((self._m1, self.nx), (self._m2, self.ny), (self._m3, self.nz)):
            if n == 1:
                cuts.append(0)
                continue
            cut = int(np.floor(n * self.dealias_fraction / 2.0))
            cut = min(cut, n // 2 - 1)  # always drop the unpaired Nyquist mode
            cuts.append(cut)
            mask &= np.abs(m) <= cut
        self.dealias_cutoffs = tuple(cuts)
        self.dealias_mask = mask
        self.kmax_retained = float(self.kmag[mask].max())

    # -- geometry ---------------------------------------------------------

    def coords(self):
        """Broadcastable coordinate arrays (x1, x2, x3)."""
        x1 = (HORIZONTAL_PERIOD * np.arange(self.nx) / self.nx).reshape(-1, 1, 1)
        x2 = (HORIZONTAL_PERIOD * np.arange(self.ny) / self.ny).reshape(1, -1, 1)
        x3 = (-1.0 + VERTICAL_PERIOD * np.arange(self.nz) / self.nz).reshape(1, 1, -1)
        return x1, x2, x3

    @property
    def spacings(self):
        dx = HORIZONTAL_PERIOD / self.nx
        dy = HORIZONTAL_PERIOD / self.ny
        dz = VERTICAL_PERIOD / self.nz
        return dx, dy, dz

    def min_spacing(self):
        return min(s for s, a in zip(self.spacings, self.active) if a)

    def horizontal(self):
        """The grid of vertical averages (same horizontal axes, nz=1)."""
        return Grid(self.nx, self.ny, 1, self.dealias_fraction)

    # -- identity ---------------------------------------------------------

    def _key(self):
        return (self.nx, self.ny, self.nz, self.dealias_fraction)

    def __eq__(self, other):
        return isinstance(other, Grid) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"Grid({self.nx}x{self.ny}x{self.nz}, dealias={self.dealias_fraction:.4f})"


def check_same_grid(*fields):
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridError(f"grid mismatch: {f.grid} vs {g}")
    return g


class SpectralField:
    """Real scalar field with lazily cached physical values and coefficients.

    Instances are immutable; all operations return new fields. Coefficient
    arrays must be conjugate-symmetric (the physical field is real); this is
    checked whenever values are materialized from coefficients.
    """

    __slots__ = ("grid", "_phys", "_spec")

    def __init__(self, grid, phys=None, spec=None):
        self.grid = grid
        self._phys = phys
        self._spec = spec

    @classmethod
    def from_phys(cls, grid, values):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != grid.shape:
            values = np.broadcast_to(values, grid.shape).astype(np.float64)
        values = np.ascontiguousarray(values)
        values.setflags(write=False)
        return cls(grid, phys=values)

    @classmethod
    def from_spec(cls, grid, coeffs):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.shape != grid.shape:
            raise GridError(f"coefficient shape {coeffs.shape} != grid {grid.shape}")
        coeffs = np.ascontiguousarray(coeffs)
        coeffs.setflags(write=False)
        return cls(grid, spec=coeffs)

    @property
    def values(self):
        if self._phys is None:
            w = np.fft.ifftn(self._spec) * self.grid.npoints
            scale = max(1.0, float(np.abs(w.real).max()))
            imax = float(np.abs(w.imag).max())
            if imax > 1e-8 * scale:
                raise GridError(
                    "coefficients are not conjugate-symmetric "
                    f"(imag/real = {imax / scale:.3e})"
                )
            v = np.ascontiguousarray(w.real)
            v.setflags(write=False)
            self._phys = v
        return self._phys

    @property
    def coeffs(self):
        if self._spec is None:
            c = np.ascontiguousarray(np.fft.fftn(self._phys) / self.grid.npoints)
            c.setflags(write=False)
            self._spec = c
        return self._spec

    # -- arithmetic -------------------------------------------------------

    def _binary(self, other, op):
        if isinstance(other, SpectralField):
            check_same_grid(self, other)
            if self._spec is not None and other._spec is not None:
                return SpectralField.from_spec(self.grid, op(self._spec, other._spec))
            return SpectralField.from_phys(self.grid, op(self.values, other.values))
        other = float(other)
        return SpectralField.from_phys(self.grid, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __neg__(self):
        if self._spec is not None:
            return SpectralField.from_spec(self.grid, -self._spec)
        return SpectralField.from_phys(self.grid, -self._phys)

    def __mul__(self, other):
        """Pointwise product. Not dealiased; callers dealias explicitly."""
        if isinstance(other, SpectralField):
            check_same_grid(self, other)
            return SpectralField.from_phys(self.grid, self.values * other.values)
        s = float(other)
        if self._spec is not None:
            return SpectralField.from_spec(self.grid, self._spec * s)
        return SpectralField.from_phys(self.grid, self._phys * s)

    def __rmul__(self, other):
        return self.__mul__(other)

    def dealias(self):
        return SpectralField.from_spec(self.grid, self.coeffs * self.grid.dealias_mask)

    def __repr__(self):
        return f"SpectralField({self.grid!r})"


def zero_field(grid):
    return SpectralField.from_phys(grid, np.zeros(grid.shape))


def const_field(grid, value):
    return SpectralField.from_phys(grid, np.full(grid.shape, float(value)))


def field_from_function(grid, fn):
    x1, x2, x3 = grid.coords()
    return SpectralField.from_phys(grid, np.broadcast_to(fn(x1, x2, x3), grid.shape))


# -- multipliers -----------------------------------------------------------


def apply_multiplier(f, m):
    """Apply a Fourier multiplier.

    ``m`` is either an array broadcastable to the coefficient shape or a
    callable receiving the grid and returning such an array.
    """
    marr = m(f.grid) if callable(m) else m
    return SpectralField.from_spec(f.grid, f.coeffs * marr)


def invert_multiplier(f, m, m_min=1e-12):
    """Divide coefficients by a multiplier that must stay away from zero."""
    marr = np.broadcast_to(m(f.grid) if callable(m) else m, f.grid.shape)
    small = float(np.abs(marr).min())
    if small < m_min:
        raise MultiplierError(
            f"multiplier has |m| = {small:.3e} < m_min = {m_min:.3e} on the grid"
        )
    return SpectralField.from_spec(f.grid, f.coeffs / marr)


def diff(f, axis, order=1):
    """Spectral derivative along one axis.

    Odd-order derivatives zero the unpaired Nyquist mode to keep the result
    conjugate-symmetric; dealiased fields never carry that mode anyway.
    """
    g = f.grid
    if axis not in (0, 1, 2):
        raise GridError(f"axis must be 0, 1 or 2, got {axis}")
    if not g.active[axis]:
        return zero_field(g) if order > 0 else f
    k = (g.k1, g.k2, g.k3)[axis]
    mult = (1j * k) ** order
    if order % 2 == 1:
        n = g.shape[axis]
        m_int = (g._m1, g._m2, g._m3)[axis]
        mult = np.where(m_int == -n // 2, 0.0, mult)
    return SpectralField.from_spec(g, f.coeffs * mult)


def laplacian(f, horizontal=False):
    g = f.grid
    ksq = g.k1**2 + g.k2**2 if horizontal else g.ksq
    return SpectralField.from_spec(g, -ksq * f.coeffs)


# -- integrals and norms ----------------------------------------------------


def integral(f):
    """Volume integral: 2*pi per active horizontal axis, vertical averaged."""
    return float(np.mean(f.values)) * f.grid.measure


def inner(f, g):
    check_same_grid(f, g)
    return float(np.mean(f.values * g.values)) * f.grid.measure


def l2_norm(f):
    return float(np.sqrt(np.mean(f.values**2) * f.grid.measure))


def l2_norm_spec(f):
    """L2 norm evaluated from coefficients (Parseval route)."""
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2) * f.grid.measure))


def lp_norm(f, p):
    if p == np.inf:
        return float(np.abs(f.values).max())
    p = float(p)
    if p < 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    return float((np.mean(np.abs(f.values) ** p) * f.grid.measure) ** (1.0 / p))


def linf_norm(f):
    return lp_norm(f, np.inf)


# -- vertical structure ------------------------------------------------------


def vertical_mean(f):
    """Vertical average as a field on the horizontal grid (nz=1)."""
    g = f.grid
    if g.nz == 1:
        return f
    c = f.coeffs[:, :, :1]
    return SpectralField.from_spec(g.horizontal(), c)


def vertical_split(f):
    """Split into vertical mean (on the horizontal grid) and fluctuation."""
    g = f.grid
    if g.nz == 1:
        raise GridError("vertical_split needs an active vertical axis")
    c = f.coeffs
    mean = SpectralField.from_spec(g.horizontal(), c[:, :, :1])
    cf = c.copy()
    cf[:, :, 0] = 0.0
    fluct = SpectralField.from_spec(g, cf)
    return mean, fluct


def lift_horizontal(f, grid):
    """Extend a field on the horizontal grid to a columnar field on ``grid``."""
    if f.grid.nz != 1 or (f.grid.nx, f.grid.ny) != (grid.nx, grid.ny):
        raise GridError(f"cannot lift {f.grid} to {grid}")
    return SpectralField.from_phys(grid, np.broadcast_to(f.values, grid.shape))


def inv_d3(f, mean_tol=1e-10):
    """Invert the vertical derivative on mean-free fields.

    The vertical mean (k3=0 plane) of the input must be negligible relative
    to the field size; the output is mean-free.
    """
    g = f.grid
    if g.nz == 1:
        raise GridError("inv_d3 needs an active vertical axis")
    c = f.coeffs
    total = float(np.sqrt(np.sum(np.abs(c) ** 2)))
    plane = float(np.sqrt(np.sum(np.abs(c[:, :, 0]) ** 2)))
    if plane > mean_tol * max(total, 1e-300):
        raise ProjectionError(
            f"vertical mean is not negligible: |mean|/|f| = {plane / max(total, 1e-300):.3e}"
        )
    denom = 1j * g.k3
    denom = np.where(np.abs(denom) == 0.0, 1.0, denom)
    out = c / denom
    out[:, :, 0] = 0.0
    nyq = (g._m3 == -g.nz // 2)
    out = np.where(nyq, 0.0, out)
    return SpectralField.from_spec(g, out)


def reflect_x3(f):
    """Reflection x3 -> -x3 (index m -> (nz - m) mod nz)."""
    g = f.grid
    if g.nz == 1:
        return f
    v = np.roll(np.flip(f.values, axis=2), 1, axis=2)
    return SpectralField.from_phys(g, v)


def parity_project(f, parity):
    """Even or odd part under x3 -> -x3. Idempotent bit for bit."""
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    if f.grid.nz == 1:
        return f if parity == "even" else zero_field(f.grid)
    r = reflect_x3(f)
    if parity == "even":
        return SpectralField.from_phys(f.grid, 0.5 * (f.values + r.values))
    return SpectralField.from_phys(f.grid, 0.5 * (f.values - r.values))


def parity_residual(f, parity):
    """L2 distance to the even/odd subspace, relative to the field size."""
    proj = parity_project(f, parity)
    num = l2_norm(f - proj)
    den = max(l2_norm(f), 1e-300)
    return num / den


# -- vector fields -----------------------------------------------------------


class VecField:
    """Tuple of scalar fields sharing one grid (2 horizontal or 3 components)."""

    __slots__ = ("components",)

    def __init__(self, *components):
        if len(components) not in (2, 3):
            raise GridError(f"VecField needs 2 or 3 components, got {len(components)}")
        check_same_grid(*components)
        self.components = tuple(components)

    @property
    def grid(self):
        return self.components[0].grid

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def __add__(self, other):
        return VecField(*(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        return VecField(*(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self):
        return VecField(*(-a for a in self.components))

    def __mul__(self, s):
        return VecField(*(a * s for a in self.components))

    def __rmul__(self, s):
        return self.__mul__(s)

    def dealias(self):
        return VecField(*(a.dealias() for a in self.components))

    def l2(self):
        return float(np.sqrt(sum(l2_norm(a) ** 2 for a in self.components)))


def grad(f, horizontal=False):
    if horizontal:
        return VecField(diff(f, 0), diff(f, 1))
    return VecField(diff(f, 0), diff(f, 1), diff(f, 2))


def div(v):
    out = diff(v[0], 0) + diff(v[1], 1)
    if len(v) == 3:
        out = out + diff(v[2], 2)
    return out


def div_h(v):
    return diff(v[0], 0) + diff(v[1], 1)


def perp_grad(f):
    """Rotated horizontal gradient (-d2 f, d1 f)."""
    return VecField(-diff(f, 1), diff(f, 0))


def curl_h(v):
    """Vertical vorticity d1 v2 - d2 v1 of the first two components."""
    return diff(v[1], 0) - diff(v[0], 1)


def dot(v, w):
    """Pointwise scalar product (no dealiasing)."""
    parts = [a * b for a, b in zip(v.components, w.components)]
    out = parts[0]
    for p in parts[1:]:
        out = out + p
    return out


def jacobian(a, b):
    """Horizontal Jacobian d1 a d2 b - d2 a d1 b with dealiased products."""
    term = diff(a, 0) * diff(b, 1) - diff(a, 1) * diff(b, 0)
    return term.dealias()


# -- misc -------------------------------------------------------------------


def random_band_limited(grid, rng, kmax, norm="l2", scale=1.0):
    """Random real field supported on 0 < |k| <= kmax, deterministically seeded."""
    v = rng.standard_normal(grid.shape)
    f = SpectralField.from_phys(grid, v)
    mask = (grid.kmag <= kmax) & (grid.kmag > 0) & grid.dealias_mask
    f = SpectralField.from_spec(grid, f.coeffs * mask)
    size = l2_norm(f) if norm == "l2" else linf_norm(f)
    if size == 0.0:
        raise GridError(f"no modes in 0 < |k| <= {kmax}")
    return f * (scale / size)
