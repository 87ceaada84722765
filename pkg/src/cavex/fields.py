"""Cavity field of a focused beam: the enhancement factor and field maps.

A focused beam is expanded into plane-wave components (see beam module);
each component is propagated through the stack by the stratified solver and
the components are summed coherently. Everything is normalized to the peak
amplitude the same beam would have at its focus in free space, so the
returned quantity is the dimensionless field enhancement

    xi_E(x, z) = E_cavity(x, z) / max |E_free|,

equal to 1 at the focus when the stack is all vacuum. Above the surface the
incident and reflected parts are both present, so |xi_E| shows the standing
wave; inside the stack it shows guided-mode buildup or suppression.

Maps store |xi_E|**2 (the quantity proportional to intensity); point
evaluations return the complex amplitude so phase information is available
to callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beam import AngularSpectrum, GaussianBeam, angular_spectrum
from .errors import BeamConfigError, GeometryError
from .multilayer import CavityStack, solve_grid

__all__ = [
    "FieldMap",
    "FocusedFieldSolver",
    "cavity_field",
    "enhancement_factor",
    "field_map",
    "field_from_spectrum",
]

# Relative wavelength mismatch between beam and stack that is still treated
# as "the same energy" (guards against crossed-isotope bookkeeping).
WAVELENGTH_RTOL = 1e-6


def _check_consistent(stack: CavityStack, wavelength_nm: float) -> None:
    ref = stack.wavelength_nm
    if abs(wavelength_nm - ref) > WAVELENGTH_RTOL * ref:
        raise BeamConfigError(
            f"beam wavelength {wavelength_nm:.8g} nm does not match the stack "
            f"energy ({stack.energy_kev:g} keV -> {ref:.8g} nm)"
        )


@dataclass(frozen=True, eq=False)
class FieldMap:
    """|xi_E|**2 sampled on an (x, z) grid, plus provenance metadata."""

    x_nm: np.ndarray
    z_nm: np.ndarray
    xi_sq: np.ndarray  # shape (len(x_nm), len(z_nm))
    metadata: dict = field(default_factory=dict)

    def rows(self):
        """Yield (x_nm, z_nm, xi_sq) in x-major order for CSV export."""
        for i, x in enumerate(self.x_nm):
            for j, z in enumerate(self.z_nm):
                yield float(x), float(z), float(self.xi_sq[i, j])

    def peak(self) -> tuple[float, float, float]:
        """(x, z, value) of the map maximum."""
        i, j = np.unravel_index(int(np.argmax(self.xi_sq)), self.xi_sq.shape)
        return float(self.x_nm[i]), float(self.z_nm[j]), float(self.xi_sq[i, j])


class FocusedFieldSolver:
    """Reusable solver binding one stack and one beam decomposition.

    Solving the stack once per spectrum angle dominates the cost, so build
    this object once and evaluate fields at as many points as needed.
    """

    def __init__(
        self,
        stack: CavityStack,
        beam: GaussianBeam,
        n_samples: int = 101,
        cutoff_sigmas: float = 5.0,
    ):
        _check_consistent(stack, beam.wavelength_nm)
        self.stack = stack
        self.beam = beam
        self.spectrum = angular_spectrum(beam, n_samples=n_samples, cutoff_sigmas=cutoff_sigmas)
        self.grid = solve_grid(stack, self.spectrum.thetas)
        self._kx = stack.k0 * np.cos(self.spectrum.thetas)

    def field(self, x_nm, z_nm) -> np.ndarray:
        """Complex xi_E at broadcast (x, z) points."""
        x = np.asarray(x_nm, dtype=float)
        z = np.asarray(z_nm, dtype=float)
        shape = np.broadcast_shapes(x.shape, z.shape)
        xb = np.broadcast_to(x, shape).ravel()
        zb = np.broadcast_to(z, shape).ravel()
        profiles = self.grid.field_profile(zb)  # (na, np)
        xphase = np.exp(1j * self._kx[:, None] * xb[None, :])
        out = np.einsum("a,ap,ap->p", self.spectrum.weights, profiles, xphase)
        out /= self.spectrum.free_peak
        return out.reshape(shape) if shape else complex(out[0])

    def enhancement(self, x_nm, z_nm) -> float | np.ndarray:
        f = self.field(x_nm, z_nm)
        return np.abs(f) if isinstance(f, np.ndarray) else abs(f)

    def map(self, x_nm: np.ndarray, z_nm: np.ndarray) -> FieldMap:
        """|xi_E|**2 on the tensor grid x_nm times z_nm."""
        x = np.asarray(x_nm, dtype=float)
        z = np.asarray(z_nm, dtype=float)
        profiles = self.grid.field_profile(z)  # (na, nz)
        wp = self.spectrum.weights[:, None] * profiles  # fold weights once
        xphase = np.exp(1j * self._kx[None, :] * x[:, None])  # (nx, na)
        field_xz = xphase @ wp / self.spectrum.free_peak  # (nx, nz)
        meta = self.describe()
        return FieldMap(x_nm=x, z_nm=z, xi_sq=np.abs(field_xz) ** 2, metadata=meta)

    def describe(self) -> dict:
        b = self.beam
        return {
            "normalization": "per-beam free-space focal amplitude",
            "free_space_peak_sum": self.spectrum.free_peak,
            "n_samples": int(self.spectrum.thetas.size),
            "theta_window_rad": [float(self.spectrum.thetas[0]), float(self.spectrum.thetas[-1])],
            "beam": {
                "wavelength_nm": b.wavelength_nm,
                "waist_nm": b.waist_nm,
                "theta_in_rad": b.theta_in_rad,
                "focus_x_nm": b.focus_x_nm,
                "focus_z_nm": b.focus_z_nm,
                "divergence_rad": b.divergence_rad,
            },
            "stack": {
                "energy_keV": self.stack.energy_kev,
                "layers": [[l.material, l.thickness_nm] for l in self.stack.layers],
                "resonant_index": self.stack.resonant_index,
            },
            "z_convention": "z increases downward from the top boundary of the first film at z=0",
        }


def field_from_spectrum(
    stack: CavityStack, spectrum: AngularSpectrum, x_nm, z_nm, normalize: bool = True
) -> np.ndarray:
    """Coherent stack response to an explicit plane-wave decomposition.

    With normalize=False the raw superposition is returned, which is linear
    in the spectrum weights; normalize=True divides by the spectrum's
    free-space focal amplitude, giving xi_E.
    """
    _check_consistent(stack, spectrum.wavelength_nm)
    grid = solve_grid(stack, spectrum.thetas)
    kx = stack.k0 * np.cos(spectrum.thetas)
    x = np.asarray(x_nm, dtype=float)
    z = np.asarray(z_nm, dtype=float)
    shape = np.broadcast_shapes(x.shape, z.shape)
    xb = np.broadcast_to(x, shape).ravel()
    zb = np.broadcast_to(z, shape).ravel()
    profiles = grid.field_profile(zb)
    xphase = np.exp(1j * kx[:, None] * xb[None, :])
    out = np.einsum("a,ap,ap->p", spectrum.weights, profiles, xphase)
    if normalize:
        out = out / spectrum.free_peak
    return out.reshape(shape) if shape else complex(out[0])


def cavity_field(
    stack: CavityStack,
    beam: GaussianBeam,
    x_nm,
    z_nm,
    n_samples: int = 101,
    cutoff_sigmas: float = 5.0,
):
    """Complex xi_E of a focused beam at one or more (x, z) points."""
    solver = FocusedFieldSolver(stack, beam, n_samples=n_samples, cutoff_sigmas=cutoff_sigmas)
    return solver.field(x_nm, z_nm)


def enhancement_factor(
    stack: CavityStack,
    beam: GaussianBeam,
    x_nm: float | None = None,
    z_nm: float | None = None,
    n_samples: int = 101,
    cutoff_sigmas: float = 5.0,
) -> float:
    """|xi_E| at a point; defaults to x = 0 at the resonant layer center."""
    if z_nm is None:
        z_nm = stack.resonant_depth_nm()
    if x_nm is None:
        x_nm = 0.0
    solver = FocusedFieldSolver(stack, beam, n_samples=n_samples, cutoff_sigmas=cutoff_sigmas)
    return float(abs(solver.field(float(x_nm), float(z_nm))))


def field_map(
    stack: CavityStack,
    beam: GaussianBeam,
    x_span_nm: tuple[float, float] | None = None,
    z_span_nm: tuple[float, float] | None = None,
    nx: int = 221,
    nz: int = 201,
    n_samples: int = 101,
    cutoff_sigmas: float = 5.0,
) -> FieldMap:
    """Map |xi_E|**2 around the illuminated cavity region.

    Defaults: z from 150 nm above the surface to 50 nm into the substrate,
    x covering +/- 4 beam footprints (w0 / sin(theta_in)) around the point
    where the beam axis crosses the middle of that depth range.
    """
    if nx < 2 or nz < 2:
        raise ValueError("nx and nz must be at least 2")
    if z_span_nm is None:
        z_span_nm = (-150.0, stack.total_thickness_nm + 50.0)
    if x_span_nm is None:
        footprint = beam.waist_nm / math.sin(beam.theta_in_rad)
        z_mid = 0.5 * (z_span_nm[0] + z_span_nm[1])
        x_axis = beam.focus_x_nm + (z_mid - beam.focus_z_nm) / math.tan(beam.theta_in_rad)
        x_span_nm = (x_axis - 4.0 * footprint, x_axis + 4.0 * footprint)
    if not (z_span_nm[0] < z_span_nm[1]) or not (x_span_nm[0] < x_span_nm[1]):
        raise ValueError("spans must be increasing (min, max) pairs")

    solver = FocusedFieldSolver(stack, beam, n_samples=n_samples, cutoff_sigmas=cutoff_sigmas)
    x = np.linspace(x_span_nm[0], x_span_nm[1], nx)
    z = np.linspace(z_span_nm[0], z_span_nm[1], nz)
    fmap = solver.map(x, z)
    fmap.metadata["layer_edges_nm"] = [float(e) for e in stack.edges_nm]
    return fmap
