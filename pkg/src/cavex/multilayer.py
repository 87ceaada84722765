"""Plane-wave solution of a stratified x-ray cavity at grazing incidence.

Conventions
-----------
* Time dependence exp(-i omega t); refractive index n = 1 - delta + i beta,
  so beta >= 0 means absorption.
* z is measured downward from the first interface (top of the first film,
  z = 0). Vacuum fills z < 0, the substrate extends to z = +infinity.
* theta is the grazing angle, measured from the surface plane, not from the
  normal. All waves share the in-plane wavenumber k0*cos(theta); the
  out-of-plane component in layer j is

      kz_j = k0 * sqrt(n_j**2 - cos(theta)**2),

  with the principal square root. Since Im(n**2) >= 0 this picks the branch
  Im(kz) >= 0, so down-going waves decay into absorbing media.
* Within each layer the field is written

      E_j(z) = down_j * exp(+i kz_j (z - top_j)) + up_j * exp(-i kz_j (z - bottom_j)),

  i.e. the down-going amplitude is anchored at the layer's own top boundary
  and the up-going amplitude at its own bottom boundary. Both evaluation
  exponentials then have magnitude <= 1 everywhere inside the layer, which
  keeps the recursion and the field reconstruction finite for arbitrarily
  thick absorbing layers (total stacks of 10 um and more are routine).
  The semi-infinite vacuum layer is anchored at z = 0 for both directions
  (down = 1, up = r); the substrate is anchored at its top (down = t, up = 0).
* Incident amplitude is unity, so r and t are the usual reflection and
  transmission amplitudes. For a transparent substrate the flux-weighted
  transmittance is Re(kz_sub)/kz_vac * |t|**2 and |r|**2 + T = 1 holds for
  lossless stacks.

The recursion is the standard two-pass scheme: an upward pass accumulates
the reflection ratio at each layer bottom via the Moebius composition of
Fresnel coefficients with one-way phase factors exp(2 i kz t) (magnitude
<= 1), and a downward pass transfers amplitudes across interfaces by
matching E and dE/dz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import wavelength_nm
from .errors import GeometryError
from .materials import MaterialsDb, Isotope

__all__ = [
    "Layer",
    "Geometry",
    "CavityStack",
    "PlaneWaveSolution",
    "GridSolution",
    "load_geometry",
    "save_geometry",
    "resolve_stack",
    "solve_planewave",
    "solve_grid",
    "reflectivity",
    "rocking_curve",
    "DipMetrics",
    "dip_metrics",
]

INF = math.inf


@dataclass(frozen=True)
class Layer:
    """One slab of the stack: material name and thickness in nm (inf for the ends)."""

    material: str
    thickness_nm: float


@dataclass(frozen=True)
class Geometry:
    """Material/thickness listing of a stack plus the marked resonant layer, if any.

    meta carries free-form string annotations (design angle, focus offset)
    that geometry files persist as @key value directives.
    """

    layers: tuple[Layer, ...]
    resonant_index: int | None = None
    meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CavityStack:
    """A geometry with optical constants resolved at one photon energy.

    layers[0] must be semi-infinite vacuum, layers[-1] a semi-infinite
    substrate. Interior thicknesses are finite and nonnegative (zero is legal
    and acts as an exact no-op). resonant_index, when set, points at a finite
    interior layer hosting the nuclei.
    """

    layers: tuple[Layer, ...]
    n: tuple[complex, ...]
    energy_kev: float
    resonant_index: int | None = None

    def __post_init__(self):
        ls = self.layers
        if len(ls) < 2:
            raise GeometryError("a stack needs at least vacuum and a substrate")
        if len(ls) != len(self.n):
            raise GeometryError("one refractive index per layer required")
        if ls[0].material.lower() != "vacuum" or not math.isinf(ls[0].thickness_nm):
            raise GeometryError("first layer must be semi-infinite vacuum")
        if not math.isinf(ls[-1].thickness_nm):
            raise GeometryError("last layer must be semi-infinite")
        for i, layer in enumerate(ls[1:-1], start=1):
            t = layer.thickness_nm
            if not (math.isfinite(t) and t >= 0.0):
                raise GeometryError(f"layer {i} ({layer.material}): bad thickness {t}")
        ri = self.resonant_index
        if ri is not None:
            if not (0 < ri < len(ls) - 1):
                raise GeometryError(f"resonant layer index {ri} is not an interior layer")
        if self.energy_kev <= 0:
            raise GeometryError(f"photon energy must be positive, got {self.energy_kev}")

    @property
    def wavelength_nm(self) -> float:
        return wavelength_nm(self.energy_kev)

    @property
    def k0(self) -> float:
        """Vacuum wavenumber in 1/nm."""
        return 2.0 * math.pi / self.wavelength_nm

    @property
    def thicknesses_nm(self) -> np.ndarray:
        return np.array([l.thickness_nm for l in self.layers])

    @property
    def edges_nm(self) -> np.ndarray:
        """Depths of the interfaces, starting at 0 (vacuum/first film)."""
        interior = [l.thickness_nm for l in self.layers[1:-1]]
        return np.concatenate(([0.0], np.cumsum(interior)))

    @property
    def total_thickness_nm(self) -> float:
        return float(sum(l.thickness_nm for l in self.layers[1:-1]))

    def resonant_depth_nm(self) -> float:
        """Depth of the center of the marked resonant layer."""
        if self.resonant_index is None:
            raise GeometryError("stack has no resonant layer marked")
        edges = self.edges_nm
        i = self.resonant_index
        return float(edges[i - 1] + 0.5 * self.layers[i].thickness_nm)


def resolve_stack(
    db: MaterialsDb, geometry: Geometry, isotope: Isotope | str | None = None,
    energy_kev: float | None = None,
) -> CavityStack:
    """Resolve a geometry's optical constants at an isotope line or a raw energy."""
    if (isotope is None) == (energy_kev is None):
        raise GeometryError("pass exactly one of isotope or energy_kev")
    if isotope is not None:
        iso = db.isotope(isotope) if isinstance(isotope, str) else isotope
        energy_kev = iso.energy_kev
    n = tuple(db.refractive_index(l.material, energy_kev) for l in geometry.layers)
    return CavityStack(
        layers=geometry.layers, n=n, energy_kev=energy_kev,
        resonant_index=geometry.resonant_index,
    )


# ---------------------------------------------------------------------------
# Geometry files: one "material thickness" line per layer, top to bottom,
# "inf" for the semi-infinite ends, optional trailing "*" marking the
# resonant layer. "#" starts a comment.

def load_geometry(path: str | Path) -> Geometry:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise GeometryError(f"cannot read geometry file {p}: {exc}") from exc

    layers: list[Layer] = []
    resonant: int | None = None
    meta: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        where = f"{p}:{lineno}"
        if line.startswith("@"):
            key = tokens[0][1:]
            value = " ".join(tokens[1:])
            if not key or not value:
                raise GeometryError(f"{where}: directive needs '@key value', got {raw!r}")
            if key in meta:
                raise GeometryError(f"{where}: duplicate directive @{key}")
            meta[key] = value
            continue
        if len(tokens) not in (2, 3):
            raise GeometryError(f"{where}: expected 'material thickness [*]', got {raw!r}")
        material, thick_tok = tokens[0], tokens[1]
        if thick_tok.lower() in ("inf", "infinite"):
            thickness = INF
        else:
            try:
                thickness = float(thick_tok)
            except ValueError as exc:
                raise GeometryError(f"{where}: bad thickness {thick_tok!r}") from exc
            if not (thickness >= 0.0 and math.isfinite(thickness)):
                raise GeometryError(f"{where}: thickness must be finite and >= 0")
        if len(tokens) == 3:
            if tokens[2] != "*":
                raise GeometryError(f"{where}: unexpected token {tokens[2]!r}")
            if resonant is not None:
                raise GeometryError(f"{where}: second resonant marker (only one allowed)")
            resonant = len(layers)
        layers.append(Layer(material=material, thickness_nm=thickness))

    if len(layers) < 2:
        raise GeometryError(f"{p}: a stack needs at least two layers")
    if resonant is not None and not (0 < resonant < len(layers) - 1):
        raise GeometryError(f"{p}: resonant marker must sit on an interior layer")
    return Geometry(layers=tuple(layers), resonant_index=resonant, meta=meta)


def save_geometry(path: str | Path, geometry: Geometry, header: str | None = None) -> None:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for key, value in geometry.meta.items():
        lines.append(f"@{key} {value}")
    for i, layer in enumerate(geometry.layers):
        t = "inf" if math.isinf(layer.thickness_nm) else repr(layer.thickness_nm)
        mark = " *" if i == geometry.resonant_index else ""
        lines.append(f"{layer.material} {t}{mark}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Solver core

def _solve_amplitudes(n: np.ndarray, thickness: np.ndarray, k0: float, thetas: np.ndarray):
    """Two-pass amplitude recursion, vectorized over grazing angles.

    Returns kz, down, up arrays of shape (n_angles, n_layers) with the
    anchoring described in the module docstring.
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    if np.any(thetas <= 0.0) or np.any(thetas >= 0.5 * math.pi):
        raise ValueError("grazing angles must lie strictly inside (0, pi/2)")
    if abs(n[0].imag) != 0.0:
        raise GeometryError("the incidence medium must be transparent")

    nl = len(n)
    na = thetas.size
    cos2 = np.cos(thetas)[:, None] ** 2
    kz = k0 * np.sqrt(n[None, :] ** 2 - cos2)  # principal branch: Im(kz) >= 0

    # One-way phase across each interior layer, |phase| <= 1.
    phase = np.ones((na, nl), dtype=complex)
    if nl > 2:
        phase[:, 1:-1] = np.exp(1j * kz[:, 1:-1] * thickness[None, 1:-1])

    # Upward pass: X[:, j] is up/down evaluated at the bottom of layer j.
    X = np.zeros((na, nl - 1), dtype=complex)
    for j in range(nl - 2, -1, -1):
        ka, kb = kz[:, j], kz[:, j + 1]
        rj = (ka - kb) / (ka + kb)
        if j == nl - 2:
            y_below = np.zeros(na, dtype=complex)  # no up-wave in the substrate
        else:
            y_below = X[:, j + 1] * phase[:, j + 1] ** 2
        X[:, j] = (rj + y_below) / (1.0 + rj * y_below)

    down = np.zeros((na, nl), dtype=complex)
    up = np.zeros((na, nl), dtype=complex)
    down[:, 0] = 1.0
    up[:, 0] = X[:, 0]

    # Downward pass: transfer (down, up) evaluated at each interface.
    d_bot = down[:, 0]
    u_bot = up[:, 0]
    for j in range(nl - 1):
        ka, kb = kz[:, j], kz[:, j + 1]
        d_top = ((ka + kb) * d_bot + (kb - ka) * u_bot) / (2.0 * kb)
        down[:, j + 1] = d_top
        if j + 1 < nl - 1:
            d_bot = d_top * phase[:, j + 1]
            u_bot = X[:, j + 1] * d_bot
            up[:, j + 1] = u_bot
        # substrate keeps up = 0
    return thetas, kz, down, up


class GridSolution:
    """Stratified solutions of one stack over a grid of grazing angles.

    Amplitude anchoring follows the module conventions; fields produced by
    field_profile are normalized to unit incident amplitude per angle.
    """

    def __init__(self, stack: CavityStack, thetas: np.ndarray):
        n = np.array(stack.n, dtype=complex)
        thickness = stack.thicknesses_nm
        self.stack = stack
        self.k0 = stack.k0
        self.thetas, self.kz, self.down, self.up = _solve_amplitudes(
            n, thickness, self.k0, thetas
        )
        self.edges = stack.edges_nm
        self.thickness = thickness

    @property
    def r(self) -> np.ndarray:
        """Complex reflection amplitude per angle."""
        return self.up[:, 0]

    @property
    def t(self) -> np.ndarray:
        """Complex transmission amplitude into the substrate, per angle."""
        return self.down[:, -1]

    def reflectance(self) -> np.ndarray:
        return np.abs(self.r) ** 2

    def transmittance_flux(self) -> np.ndarray:
        """Flux-weighted |t|**2; zero below the substrate critical angle."""
        kz_vac = self.kz[:, 0].real
        return self.kz[:, -1].real / kz_vac * np.abs(self.t) ** 2

    def layer_of(self, z: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.edges, z, side="right")

    def field_profile(self, z) -> np.ndarray:
        """Complex field at depths z for every angle; shape (n_angles, n_z)."""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        nl = len(self.stack.layers)
        idx = self.layer_of(z)
        out = np.empty((self.thetas.size, z.size), dtype=complex)
        for j in range(nl):
            cols = np.nonzero(idx == j)[0]
            if cols.size == 0:
                continue
            kzj = self.kz[:, j][:, None]
            if j == 0:
                zz = z[cols][None, :]
                out[:, cols] = (
                    self.down[:, 0][:, None] * np.exp(1j * kzj * zz)
                    + self.up[:, 0][:, None] * np.exp(-1j * kzj * zz)
                )
            elif j == nl - 1:
                zeta = (z[cols] - self.edges[-1])[None, :]
                out[:, cols] = self.down[:, -1][:, None] * np.exp(1j * kzj * zeta)
            else:
                zeta = (z[cols] - self.edges[j - 1])[None, :]
                tj = self.thickness[j]
                out[:, cols] = self.down[:, j][:, None] * np.exp(1j * kzj * zeta) + self.up[
                    :, j
                ][:, None] * np.exp(1j * kzj * (tj - zeta))
        return out


class PlaneWaveSolution:
    """Single-angle view of the stratified solution."""

    def __init__(self, stack: CavityStack, theta_rad: float):
        self._grid = GridSolution(stack, np.array([theta_rad]))
        self.stack = stack
        self.theta_rad = float(theta_rad)

    @property
    def kz(self) -> np.ndarray:
        """Per-layer out-of-plane wavenumbers, 1/nm."""
        return self._grid.kz[0]

    @property
    def down_amplitudes(self) -> np.ndarray:
        """Down-going amplitude per layer (vacuum: at z=0; else at layer top)."""
        return self._grid.down[0]

    @property
    def up_amplitudes(self) -> np.ndarray:
        """Up-going amplitude per layer (vacuum: at z=0; else at layer bottom)."""
        return self._grid.up[0]

    @property
    def r(self) -> complex:
        return complex(self._grid.r[0])

    @property
    def t(self) -> complex:
        return complex(self._grid.t[0])

    @property
    def reflectance(self) -> float:
        return float(abs(self.r) ** 2)

    @property
    def transmittance_flux(self) -> float:
        return float(self._grid.transmittance_flux()[0])

    def field_at_depth(self, z):
        """Complex field at depth(s) z in nm, unit incident amplitude."""
        profile = self._grid.field_profile(z)[0]
        return profile if np.ndim(z) else complex(profile[0])


def solve_planewave(stack: CavityStack, theta_rad: float) -> PlaneWaveSolution:
    """Solve the stack for one grazing angle."""
    return PlaneWaveSolution(stack, theta_rad)


def solve_grid(stack: CavityStack, thetas_rad) -> GridSolution:
    """Solve the stack for an array of grazing angles."""
    return GridSolution(stack, np.asarray(thetas_rad, dtype=float))


def reflectivity(stack: CavityStack, thetas_rad) -> np.ndarray:
    """|r|**2 over an angle grid."""
    return solve_grid(stack, thetas_rad).reflectance()


def rocking_curve(stack: CavityStack, thetas_rad) -> tuple[np.ndarray, np.ndarray]:
    """Angle grid and reflectance, ready for plotting or CSV export."""
    thetas = np.asarray(thetas_rad, dtype=float)
    return thetas, reflectivity(stack, thetas)


# ---------------------------------------------------------------------------
# Rocking-curve dip metrics

@dataclass(frozen=True)
class DipMetrics:
    """Location, depth and width of one reflectance dip."""

    theta_rad: float
    r_min: float
    fwhm_rad: float
    theta_left_rad: float
    theta_right_rad: float


def dip_metrics(thetas: np.ndarray, reflectance: np.ndarray,
                around_rad: float | None = None) -> DipMetrics:
    """Measure the reflectance dip nearest ``around_rad`` (deepest dip if None).

    Width is taken at half depth between the dip minimum and the lower of the
    two bracketing shoulders (local maxima). When a dip is so broad that no
    shoulder or half-depth crossing exists inside the grid, the grid edge
    stands in, making the width a lower bound for the true value.
    """
    th = np.asarray(thetas, dtype=float)
    R = np.asarray(reflectance, dtype=float)
    if th.ndim != 1 or th.shape != R.shape:
        raise ValueError("thetas and reflectance must be matching 1-d arrays")
    if th.size < 5:
        raise ValueError("need at least 5 samples to measure a dip")
    interior = np.nonzero((R[1:-1] <= R[:-2]) & (R[1:-1] <= R[2:]))[0] + 1
    if interior.size == 0:
        interior = np.array([int(np.argmin(R))])
    if around_rad is None:
        i_min = interior[np.argmin(R[interior])]
    else:
        i_min = interior[np.argmin(np.abs(th[interior] - around_rad))]

    i_left = i_min
    while i_left > 0 and R[i_left - 1] >= R[i_left]:
        i_left -= 1
    left_shoulder = R[:i_min + 1].max() if i_left == 0 else R[i_left]
    i_right = i_min
    while i_right < R.size - 1 and R[i_right + 1] >= R[i_right]:
        i_right += 1
    right_shoulder = R[i_min:].max() if i_right == R.size - 1 else R[i_right]

    r_min = float(R[i_min])
    half = r_min + 0.5 * (min(left_shoulder, right_shoulder) - r_min)

    def _cross(i_from: int, step: int) -> float:
        i = i_from
        while 0 <= i + step < R.size:
            if R[i + step] >= half:
                x0, x1 = th[i], th[i + step]
                y0, y1 = R[i], R[i + step]
                if y1 == y0:
                    return x1
                return float(x0 + (half - y0) * (x1 - x0) / (y1 - y0))
            i += step
        return float(th[0] if step < 0 else th[-1])

    left = _cross(i_min, -1)
    right = _cross(i_min, +1)
    return DipMetrics(
        theta_rad=float(th[i_min]), r_min=r_min, fwhm_rad=right - left,
        theta_left_rad=left, theta_right_rad=right,
    )
