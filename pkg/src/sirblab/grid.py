"""Cell-centered grids with zero-flux boundaries, diffusion, and cosine modes.

The domain is an interval (0, Lx) or a rectangle (0, Lx) x (0, Ly),
covered by a uniform cell-centered mesh: cell i has center (i + 1/2)*h.
Homogeneous Neumann conditions are imposed by mirroring values across
the boundary, which makes every boundary face flux exactly zero.

The diffusion operator div(a grad u) is discretized in flux form with
arithmetic-mean face coefficients:

    (D u)_i = (F_{i+1/2} - F_{i-1/2}) / h^2,
    F_{i+1/2} = (a_i + a_{i+1})/2 * (u_{i+1} - u_i),

second order accurate for smooth a and u, symmetric as a matrix, and
exactly conservative: the fluxes telescope so the sum of (D u) over all
cells vanishes.

The Neumann eigenfunctions cos(j pi x / L) evaluated at cell centers
form the DCT-II basis, which is exactly orthogonal under the discrete
cell-volume inner product for mode indices below the cell count. Mode
projections therefore measure perturbation amplitudes cleanly: constant
fields have exactly zero projection on every mode with j >= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

__all__ = [
    "Grid",
    "ScalarField",
    "CoefficientField",
    "Mode",
    "ModeSpectrum",
    "neumann_modes",
    "mode_profile",
    "project_mode",
    "apply_diffusion",
]


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered mesh on an interval or rectangle.

    lengths: domain extents per axis, all positive.
    cells:   cell counts per axis, each at least 3 so the interior
             stencil is distinguishable from the boundary one.
    """

    lengths: tuple
    cells: tuple

    def __post_init__(self):
        lengths = tuple(float(v) for v in self.lengths)
        cells = tuple(int(v) for v in self.cells)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "cells", cells)
        if len(lengths) not in (1, 2) or len(cells) != len(lengths):
            raise ValueError("grid must be 1D or 2D with matching lengths/cells")
        if any(not math.isfinite(L) or L <= 0.0 for L in lengths):
            raise ValueError(f"domain lengths must be positive, got {lengths}")
        if any(n < 3 for n in cells):
            raise ValueError(f"need at least 3 cells per axis, got {cells}")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple:
        return self.cells

    @property
    def ncells(self) -> int:
        n = 1
        for c in self.cells:
            n *= c
        return n

    @property
    def spacing(self) -> tuple:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def cell_volume(self) -> float:
        v = 1.0
        for h in self.spacing:
            v *= h
        return v

    def axis_centers(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def meshgrid(self):
        """Cell-center coordinate arrays of shape ``self.shape``."""
        axes = [self.axis_centers(k) for k in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(axes[0], axes[1], indexing="ij"))

    def to_dict(self) -> dict:
        return {"lengths": list(self.lengths), "cells": list(self.cells)}

    @classmethod
    def from_dict(cls, data: dict) -> "Grid":
        return cls(tuple(data["lengths"]), tuple(data["cells"]))


def _as_grid_array(grid: Grid, values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != grid.shape:
        if arr.size == grid.ncells:
            arr = arr.reshape(grid.shape)
        else:
            raise ValueError(
                f"values shape {arr.shape} does not match grid shape {grid.shape}"
            )
    return np.ascontiguousarray(arr)


@dataclass
class ScalarField:
    """One density sampled at cell centers."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = _as_grid_array(self.grid, self.values)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.grid.cell_volume)

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.cell_volume)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    def csv_rows(self):
        """Yield (coords..., value) per cell, row-major over cell indices."""
        coords = self.grid.meshgrid()
        flat = [c.ravel() for c in coords]
        vals = self.values.ravel()
        for k in range(vals.size):
            yield tuple(float(c[k]) for c in flat) + (float(vals[k]),)

    def to_csv(self) -> str:
        header = ["x", "y"][: self.grid.dim] + ["value"]
        lines = [",".join(header)]
        for row in self.csv_rows():
            lines.append(",".join(repr(v) for v in row))
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Diffusion coefficients
# ---------------------------------------------------------------------------

_PROFILES = ("cosine", "gaussian")
_PROFILE_ARGS = {
    "cosine": frozenset(("base", "amplitude", "modes")),
    "gaussian": frozenset(("base", "amplitude", "width", "center")),
}


@dataclass
class CoefficientField:
    """Spatially varying (or constant) diffusion coefficient.

    kind is one of:
      constant  a(x) = value
      cells     explicit per-cell samples on a fixed grid
      profile   named analytic profile evaluated on demand:
                  cosine:   base + amp * prod_axis cos(m_k pi x_k / L_k)
                  gaussian: base + amp * exp(-|x - center|^2 / width^2)

    The materialized coefficient must be strictly positive; the bounds
    (min, max) over the grid are checked the first time the field is
    materialized and cached with the samples.
    """

    kind: str
    value: float | None = None
    grid: Grid | None = None
    samples: np.ndarray | None = None
    profile: str | None = None
    profile_args: dict = field(default_factory=dict)

    @classmethod
    def constant(cls, value: float) -> "CoefficientField":
        value = float(value)
        if not math.isfinite(value) or value <= 0.0:
            raise ValueError(f"constant coefficient must be positive, got {value}")
        return cls(kind="constant", value=value)

    @classmethod
    def from_cells(cls, grid: Grid, values) -> "CoefficientField":
        arr = _as_grid_array(grid, values)
        if not np.all(np.isfinite(arr)) or np.min(arr) <= 0.0:
            raise ValueError("per-cell coefficients must be finite and positive")
        return cls(kind="cells", grid=grid, samples=arr)

    @classmethod
    def from_profile(cls, name: str, **args) -> "CoefficientField":
        if name not in _PROFILES:
            raise ValueError(f"unknown profile {name!r}; expected one of {_PROFILES}")
        extra = sorted(set(args) - _PROFILE_ARGS[name])
        if extra:
            raise ValueError(f"unknown arguments for profile {name!r}: {', '.join(extra)}")
        if "base" not in args:
            raise ValueError(f"profile {name!r} needs a 'base' level")
        return cls(kind="profile", profile=name, profile_args=dict(args))

    def _evaluate_profile(self, grid: Grid) -> np.ndarray:
        a = self.profile_args
        if self.profile == "cosine":
            base = float(a["base"])
            amp = float(a.get("amplitude", 0.0))
            modes = a.get("modes", [1] * grid.dim)
            out = np.full(grid.shape, base)
            wave = np.ones(grid.shape)
            for axis, m in enumerate(modes[: grid.dim]):
                x = grid.axis_centers(axis)
                c = np.cos(int(m) * math.pi * x / grid.lengths[axis])
                wave = wave * (c if grid.dim == 1 else
                               c.reshape([-1, 1] if axis == 0 else [1, -1]))
            return out + amp * wave
        if self.profile == "gaussian":
            base = float(a["base"])
            amp = float(a.get("amplitude", 0.0))
            width = float(a.get("width", 0.25 * min(grid.lengths)))
            center = a.get("center", [0.5 * L for L in grid.lengths])
            coords = grid.meshgrid()
            r2 = np.zeros(grid.shape)
            for c, x0 in zip(coords, center):
                r2 = r2 + (c - float(x0)) ** 2
            return base + amp * np.exp(-r2 / width**2)
        raise ValueError(f"unknown profile {self.profile!r}")

    def materialize(self, grid: Grid) -> np.ndarray:
        """Per-cell samples on the given grid, positivity-checked."""
        if self.kind == "constant":
            return np.full(grid.shape, self.value)
        if self.kind == "cells":
            if self.grid != grid:
                raise ValueError("coefficient samples belong to a different grid")
            return self.samples
        if self.kind == "profile":
            if self.samples is None or self.grid != grid:
                arr = self._evaluate_profile(grid)
                if not np.all(np.isfinite(arr)) or np.min(arr) <= 0.0:
                    raise ValueError(
                        f"profile {self.profile!r} is not strictly positive on the grid "
                        f"(min {np.min(arr)!r})"
                    )
                self.grid = grid
                self.samples = arr
            return self.samples
        raise ValueError(f"unknown coefficient kind {self.kind!r}")

    def bounds(self, grid: Grid) -> tuple:
        arr = self.materialize(grid)
        return float(np.min(arr)), float(np.max(arr))

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def constant_value(self) -> float:
        if not self.is_constant:
            raise ValueError("coefficient is not spatially constant")
        return self.value

    def to_csv(self, grid: Grid) -> str:
        return ScalarField(grid, self.materialize(grid)).to_csv()


# ---------------------------------------------------------------------------
# Neumann cosine modes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Mode:
    """One Laplacian eigenmode under zero-flux conditions."""

    j: int
    axis_indices: tuple
    lam: float
    description: str


@dataclass(frozen=True)
class ModeSpectrum:
    grid: Grid
    modes: tuple

    def __len__(self) -> int:
        return len(self.modes)

    def __getitem__(self, j: int) -> Mode:
        return self.modes[j]

    def lambdas(self) -> np.ndarray:
        return np.array([m.lam for m in self.modes])


def _describe(indices, lengths) -> str:
    parts = []
    for k, (j, L) in enumerate(zip(indices, lengths)):
        var = "xy"[k]
        if j == 0:
            continue
        parts.append(f"cos({j}*pi*{var}/{L:g})")
    return "*".join(parts) if parts else "1"


def neumann_modes(grid: Grid, count: int) -> ModeSpectrum:
    """The `count` smallest Laplacian eigenvalues on the domain.

    1D: lambda_j = (j pi / Lx)^2 for j = 0, 1, ...
    2D: sorted sums (jx pi / Lx)^2 + (jy pi / Ly)^2 over all index
        pairs, repeated eigenvalues kept with their multiplicity.
    Ties are broken by the index tuple so the ordering is deterministic.
    """
    count = int(count)
    if count < 1:
        raise ValueError(f"mode count must be >= 1, got {count}")
    if grid.dim == 1:
        L = grid.lengths[0]
        cand = [((j * math.pi / L) ** 2, (j,)) for j in range(count)]
    else:
        Lx, Ly = grid.lengths
        cand = []
        for jx in range(count):
            for jy in range(count):
                lam = (jx * math.pi / Lx) ** 2 + (jy * math.pi / Ly) ** 2
                cand.append((lam, (jx, jy)))
    cand.sort(key=lambda t: (t[0], t[1]))
    modes = tuple(
        Mode(j, idx, lam, _describe(idx, grid.lengths))
        for j, (lam, idx) in enumerate(cand[:count])
    )
    return ModeSpectrum(grid, modes)


def _axis_mode_values(grid: Grid, axis: int, j: int) -> np.ndarray:
    """Normalized 1D factor of an eigenfunction at cell centers.

    phi_0 = sqrt(1/L), phi_j = sqrt(2/L) cos(j pi x / L); under the
    cell-volume inner product these are exactly orthonormal for j below
    the cell count (midpoint DCT-II orthogonality).
    """
    L = grid.lengths[axis]
    x = grid.axis_centers(axis)
    if j == 0:
        return np.full_like(x, math.sqrt(1.0 / L))
    return math.sqrt(2.0 / L) * np.cos(j * math.pi * x / L)


def mode_profile(grid: Grid, mode: Mode) -> np.ndarray:
    """Normalized eigenfunction samples for one mode, shape grid.shape."""
    for axis, j in enumerate(mode.axis_indices):
        if j >= grid.cells[axis]:
            raise ValueError(
                f"mode index {j} along axis {axis} is not resolvable on "
                f"{grid.cells[axis]} cells"
            )
    factors = [_axis_mode_values(grid, axis, j)
               for axis, j in enumerate(mode.axis_indices)]
    if grid.dim == 1:
        return factors[0]
    return np.outer(factors[0], factors[1])


def project_mode(u: ScalarField, j: int, spectrum: ModeSpectrum | None = None) -> float:
    """Amplitude of mode j in the field: <u, phi_j> with cell-volume weights."""
    if j < 0:
        raise ValueError(f"mode index must be >= 0, got {j}")
    if spectrum is None:
        spectrum = neumann_modes(u.grid, j + 1)
    elif spectrum.grid != u.grid:
        raise ValueError("mode spectrum belongs to a different grid")
    if j >= len(spectrum):
        raise ValueError(f"mode index {j} out of range for spectrum of {len(spectrum)}")
    phi = mode_profile(u.grid, spectrum[j])
    return float(np.sum(u.values * phi) * u.grid.cell_volume)


# ---------------------------------------------------------------------------
# Diffusion operator
# ---------------------------------------------------------------------------

def apply_diffusion(u: ScalarField, a: CoefficientField) -> ScalarField:
    """Evaluate div(a grad u) with zero-flux boundaries."""
    grid = u.grid
    acells = a.materialize(grid)
    u2, a2 = kernels.as_2d(u.values), kernels.as_2d(acells)
    hx, hy = kernels.spacing_2d(grid)
    out = kernels.diffusion_apply(u2, a2, hx, hy)
    return ScalarField(grid, out.reshape(grid.shape))
