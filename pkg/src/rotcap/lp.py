"""Dyadic (Littlewood-Paley) frequency decomposition.

The construction starts from a smooth radial cutoff ``chi`` equal to 1 inside
radius ``inner`` and 0 outside ``outer`` (defaults 1.1 and 1.9), built from
the classical exp(-1/t) glue, hence non-increasing in the radius. The annulus
bump is ``phi(s) = chi(s) - chi(2 s)``, supported on inner/2 <= s <= outer.

Blocks: block(-1) multiplies by chi(2 |k|) and block(j >= 0) by
phi(2^{-j} |k|). With the halved base cutoff the telescoping identity

    chi(2 s) + sum_{j >= 0} phi(2^{-j} s) = 1

holds exactly for every s, so the blocks form an exact partition of unity on
the grid, and low_pass(M) = chi(2^{1-M} |k|) equals the sum of blocks below M.
Blocks at distance >= 2 have disjoint supports.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError
from .grid import SpectralField, apply_multiplier


def _smoothstep(t, sharpness=1.0):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, monotone in between."""
    t = np.asarray(t, dtype=np.float64)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0.0, np.exp(-sharpness / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1.0, np.exp(-sharpness / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class LpProfile:
    """Radial cutoff profile defining the dyadic decomposition."""

    inner: float = 1.1
    outer: float = 1.9
    sharpness: float = 1.0

    def __post_init__(self):
        if not 1.0 <= self.inner < self.outer <= 2.0:
            raise ValueError(
                f"need 1 <= inner < outer <= 2, got ({self.inner}, {self.outer})"
            )
        if self.sharpness <= 0.0:
            raise ValueError("sharpness must be positive")

    def chi(self, s):
        """Smooth radial cutoff: 1 for |s| <= inner, 0 for |s| >= outer."""
        s = np.abs(np.asarray(s, dtype=np.float64))
        t = (s - self.inner) / (self.outer - self.inner)
        return 1.0 - _smoothstep(t, self.sharpness)

    def phi(self, s):
        """Annulus bump chi(s) - chi(2 s), supported on [inner/2, outer]."""
        s = np.asarray(s, dtype=np.float64)
        return self.chi(s) - self.chi(2.0 * s)

    def block_symbol(self, j, s):
        """Symbol of block j evaluated at radius s (j >= -1)."""
        if j < -1:
            raise ValueError(f"block index must be >= -1, got {j}")
        if j == -1:
            return self.chi(2.0 * np.asarray(s, dtype=np.float64))
        return self.phi(np.ldexp(1.0, -j) * np.asarray(s, dtype=np.float64))

    def low_pass_symbol(self, M, s):
        """Symbol of the partial sum of blocks j <= M - 1."""
        if M < 0:
            raise ValueError(f"low-pass index must be >= 0, got {M}")
        return self.chi(np.ldexp(2.0, -M) * np.asarray(s, dtype=np.float64))


DEFAULT_PROFILE = LpProfile()


def resolvable_blocks(grid, profile=DEFAULT_PROFILE):
    """Block indices whose symbol is not identically zero on retained modes.

    Block j >= 0 lives on radii [inner 2^{j-1}, outer 2^j]; it meets the grid
    as long as inner 2^{j-1} does not exceed the largest retained |k|.
    """
    kmax = grid.kmax_retained
    jmax = int(np.floor(np.log2(2.0 * kmax / profile.inner)))
    return list(range(-1, jmax + 1))


def _covering_blocks(grid, profile):
    """Block range whose symbols sum to exactly 1 on the whole grid.

    The telescoped sum of blocks -1..J equals chi(2^{-J} |k|), which is 1
    wherever |k| <= inner * 2^J, so J must clear the full-grid maximum
    (Nyquist corners included, not just retained modes).
    """
    kmax = float(grid.kmag.max())
    if kmax == 0.0:
        return [-1]
    jmax = max(0, int(np.ceil(np.log2(kmax / profile.inner))))
    return list(range(-1, jmax + 1))


def lp_block(f, j, profile=DEFAULT_PROFILE):
    """Dyadic block of a field: multiply coefficients by the block symbol."""
    return apply_multiplier(f, profile.block_symbol(j, f.grid.kmag))


def low_pass(f, M, profile=DEFAULT_PROFILE):
    """Low-pass partial sum of blocks j <= M - 1."""
    return apply_multiplier(f, profile.low_pass_symbol(M, f.grid.kmag))


def block_decompose(f, profile=DEFAULT_PROFILE):
    """All resolvable blocks of a field, as a dict {j: SpectralField}."""
    return {j: lp_block(f, j, profile) for j in resolvable_blocks(f.grid, profile)}


def partition_defect(grid, profile=DEFAULT_PROFILE):
    """Max pointwise deviation of the block symbols from summing to one."""
    s = grid.kmag
    total = np.zeros(grid.shape)
    for j in _covering_blocks(grid, profile):
        total = total + profile.block_symbol(j, s)
    return float(np.abs(total - 1.0).max())


def reconstruction_defect(f, profile=DEFAULT_PROFILE):
    """Relative L2 error of summing all covering blocks back together."""
    total = np.zeros(f.grid.shape, dtype=np.complex128)
    for j in _covering_blocks(f.grid, profile):
        total = total + lp_block(f, j, profile).coeffs
    num = float(np.sqrt(np.sum(np.abs(total - f.coeffs) ** 2)))
    den = max(float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2))), 1e-300)
    return num / den


def block_energies(f, profile=DEFAULT_PROFILE):
    """Squared L2 norm per block, a useful spectral fingerprint."""
    out = {}
    for j in resolvable_blocks(f.grid, profile):
        c = lp_block(f, j, profile).coeffs
        out[j] = float(np.sum(np.abs(c) ** 2) * f.grid.measure)
    return out


def check_block_field(f, j, profile=DEFAULT_PROFILE):
    """Sanity helper: the block of a block at distance >= 2 vanishes."""
    if not isinstance(f, SpectralField):
        raise GridError("check_block_field expects a SpectralField")
    g = lp_block(lp_block(f, j, profile), j + 2, profile)
    return float(np.abs(g.coeffs).max())
