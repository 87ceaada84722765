"""Focused Gaussian beam at grazing incidence and its plane-wave decomposition.

The beam lives in the x-z plane of the stack frame (x along the surface in
the propagation direction, z downward, surface top at z = 0) and is treated
as invariant along the horizontal transverse direction: a line focus. The
waist w0 is the amplitude 1/e radius, giving the far-field divergence
theta_div = lambda / (pi * w0) and Rayleigh range z_R = pi * w0**2 / lambda.

A beam is represented either in closed form (free_space_field) or as a
finite set of plane-wave components on a Gauss-Legendre angle grid
(angular_spectrum). Each component's weight carries the phase that makes
all components interfere constructively at the focal point, so the
reconstructed free-space field peaks exactly there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BeamConfigError

__all__ = [
    "GaussianBeam",
    "AngularSpectrum",
    "divergence_from_waist",
    "waist_from_divergence",
    "aim_beam",
    "angular_spectrum",
    "free_space_field",
]


def divergence_from_waist(waist_nm: float, wavelength_nm: float) -> float:
    """Far-field divergence half-angle in rad of a Gaussian waist."""
    if waist_nm <= 0 or wavelength_nm <= 0:
        raise BeamConfigError("waist and wavelength must be positive")
    return wavelength_nm / (math.pi * waist_nm)


def waist_from_divergence(theta_div_rad: float, wavelength_nm: float) -> float:
    """Waist in nm that produces a given far-field divergence."""
    if theta_div_rad <= 0 or wavelength_nm <= 0:
        raise BeamConfigError("divergence and wavelength must be positive")
    return wavelength_nm / (math.pi * theta_div_rad)


@dataclass(frozen=True)
class GaussianBeam:
    """Gaussian beam incident on the surface at grazing angle theta_in.

    Parameters
    ----------
    wavelength_nm : vacuum wavelength.
    waist_nm : amplitude 1/e radius at the focus.
    theta_in_rad : grazing angle of the beam axis, measured from the surface.
    focus_x_nm, focus_z_nm : focal point in the stack frame (z downward,
        negative z is above the surface).
    """

    wavelength_nm: float
    waist_nm: float
    theta_in_rad: float
    focus_x_nm: float = 0.0
    focus_z_nm: float = 0.0

    def __post_init__(self):
        if self.wavelength_nm <= 0:
            raise BeamConfigError(f"wavelength must be positive, got {self.wavelength_nm}")
        if self.waist_nm <= self.wavelength_nm / 10.0:
            raise BeamConfigError(
                f"waist {self.waist_nm:g} nm is below lambda/10; the paraxial "
                "beam model does not apply"
            )
        if not (0.0 < self.theta_in_rad < 0.5 * math.pi):
            raise BeamConfigError(
                f"grazing angle must lie in (0, pi/2), got {self.theta_in_rad:g}"
            )
        if self.divergence_rad >= self.theta_in_rad:
            raise BeamConfigError(
                f"beam divergence {self.divergence_rad:g} rad reaches the horizon "
                f"(theta_in = {self.theta_in_rad:g} rad); increase the waist or angle"
            )

    @property
    def divergence_rad(self) -> float:
        return divergence_from_waist(self.waist_nm, self.wavelength_nm)

    @property
    def rayleigh_range_nm(self) -> float:
        return math.pi * self.waist_nm**2 / self.wavelength_nm

    @property
    def k0(self) -> float:
        """Vacuum wavenumber, 1/nm."""
        return 2.0 * math.pi / self.wavelength_nm


def aim_beam(
    wavelength_nm: float,
    waist_nm: float,
    theta_in_rad: float,
    focus_z_nm: float,
    target_x_nm: float = 0.0,
    target_z_nm: float = 0.0,
) -> GaussianBeam:
    """Build a beam whose axis passes through a target point.

    The focus is placed on that axis at depth focus_z_nm, so the focusing
    height can be varied without changing where the beam is pointed. With
    focus_z_nm equal to the target depth the focus sits on the target itself.
    """
    x_f = target_x_nm - (target_z_nm - focus_z_nm) / math.tan(theta_in_rad)
    return GaussianBeam(
        wavelength_nm=wavelength_nm,
        waist_nm=waist_nm,
        theta_in_rad=theta_in_rad,
        focus_x_nm=x_f,
        focus_z_nm=focus_z_nm,
    )


@dataclass(frozen=True, eq=False)
class AngularSpectrum:
    """Plane-wave decomposition of a Gaussian beam.

    thetas are grazing angles of the components; weights are complex and
    already include the Gauss-Legendre quadrature weight and the focal
    anchoring phase, so a field reconstruction is a plain sum

        E(x, z) = sum_j weights[j] * exp(i k0 (x cos(theta_j) + z sin(theta_j)))

    normalized such that |E| = free_peak at the focus. The overall scale is
    fixed by sum(|weights|**2 / quad_weights) = 1 (the discrete L2 norm of
    the amplitude profile under the quadrature measure).
    """

    thetas: np.ndarray
    weights: np.ndarray
    quad_weights: np.ndarray
    wavelength_nm: float
    focus_x_nm: float
    focus_z_nm: float

    @property
    def k0(self) -> float:
        return 2.0 * math.pi / self.wavelength_nm

    @property
    def free_peak(self) -> float:
        """Free-space focal amplitude of the plain reconstruction sum."""
        return float(np.sum(np.abs(self.weights)))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.weights) ** 2 / self.quad_weights)))

    def free_field(self, x_nm, z_nm) -> np.ndarray:
        """Reconstructed free-space field, normalized to amplitude 1 at the focus.

        x_nm and z_nm broadcast against each other.
        """
        x = np.asarray(x_nm, dtype=float)
        z = np.asarray(z_nm, dtype=float)
        shape = np.broadcast_shapes(x.shape, z.shape)
        xb = np.broadcast_to(x, shape).ravel()
        zb = np.broadcast_to(z, shape).ravel()
        phases = np.exp(
            1j * self.k0 * (np.cos(self.thetas)[:, None] * xb[None, :]
                            + np.sin(self.thetas)[:, None] * zb[None, :])
        )
        field = (self.weights[:, None] * phases).sum(axis=0) / self.free_peak
        return field.reshape(shape) if shape else complex(field[0])


def angular_spectrum(
    beam: GaussianBeam, n_samples: int = 101, cutoff_sigmas: float = 5.0
) -> AngularSpectrum:
    """Decompose a beam into plane waves on a Gauss-Legendre angle grid.

    The window spans theta_in +/- cutoff_sigmas standard deviations of the
    Gaussian amplitude profile (sigma = theta_div / sqrt(2)). A window edge
    below the horizon is clipped to just above zero: components that would
    arrive at or below grazing zero do not reach the surface and are
    dropped, which truncates at most the Phi(-sqrt(2)) ~ 8% amplitude tail
    permitted by the GaussianBeam divergence validation. The upper edge
    must stay below pi/2. n_samples = 1 is the documented plane-wave limit:
    a single component at theta_in with unit weight. Otherwise
    n_samples >= 15 is required for the quadrature to make sense.
    """
    k0 = beam.k0
    if n_samples == 1:
        thetas = np.array([beam.theta_in_rad])
        anchor = np.exp(
            -1j * k0 * (np.cos(thetas) * beam.focus_x_nm + np.sin(thetas) * beam.focus_z_nm)
        )
        return AngularSpectrum(
            thetas=thetas, weights=anchor, quad_weights=np.array([1.0]),
            wavelength_nm=beam.wavelength_nm,
            focus_x_nm=beam.focus_x_nm, focus_z_nm=beam.focus_z_nm,
        )
    if n_samples < 15:
        raise BeamConfigError(f"n_samples must be 1 or >= 15, got {n_samples}")
    if cutoff_sigmas < 3.0:
        raise BeamConfigError(f"cutoff_sigmas must be >= 3, got {cutoff_sigmas}")

    sigma = beam.divergence_rad / math.sqrt(2.0)
    half = cutoff_sigmas * sigma
    lo = max(beam.theta_in_rad - half, 1e-6)
    hi = beam.theta_in_rad + half
    if hi >= 0.5 * math.pi:
        raise BeamConfigError(
            f"angular window reaches {hi:g} rad, beyond pi/2; this beam is "
            "not a grazing-incidence configuration"
        )

    nodes, gl_weights = np.polynomial.legendre.leggauss(n_samples)
    mid = 0.5 * (hi + lo)
    halfspan = 0.5 * (hi - lo)
    thetas = mid + halfspan * nodes
    quad = gl_weights * halfspan

    amps = np.exp(-((thetas - beam.theta_in_rad) ** 2) / beam.divergence_rad**2)
    scale = 1.0 / math.sqrt(float(np.sum(quad * amps**2)))
    anchor = np.exp(
        -1j * k0 * (np.cos(thetas) * beam.focus_x_nm + np.sin(thetas) * beam.focus_z_nm)
    )
    weights = scale * amps * quad * anchor
    return AngularSpectrum(
        thetas=thetas, weights=weights, quad_weights=quad,
        wavelength_nm=beam.wavelength_nm,
        focus_x_nm=beam.focus_x_nm, focus_z_nm=beam.focus_z_nm,
    )


def free_space_field(beam: GaussianBeam, x_nm, z_nm, profile: str = "line") -> np.ndarray:
    """Analytic paraxial Gaussian beam field, peak amplitude 1 at the focus.

    profile="line" is the two-dimensional beam consistent with the
    one-angle-variable spectrum above (on-axis amplitude (1+(s/z_R)**2)**-1/4,
    half Gouy phase). profile="point" gives the rotationally symmetric beam
    (amplitude w0/w(s), full Gouy phase) for pulse-energy bookkeeping that
    involves the true three-dimensional spot.

    x_nm, z_nm broadcast; returns the complex field envelope times the
    carrier exp(i k s) along the beam axis.
    """
    x = np.asarray(x_nm, dtype=float)
    z = np.asarray(z_nm, dtype=float)
    shape = np.broadcast_shapes(x.shape, z.shape)
    xb = np.broadcast_to(x, shape)
    zb = np.broadcast_to(z, shape)

    ct, st = math.cos(beam.theta_in_rad), math.sin(beam.theta_in_rad)
    dx = xb - beam.focus_x_nm
    dz = zb - beam.focus_z_nm
    s = dx * ct + dz * st  # along the axis
    xi = -dx * st + dz * ct  # transverse, in plane

    z_r = beam.rayleigh_range_nm
    w0 = beam.waist_nm
    k0 = beam.k0
    ratio = s / z_r
    w = w0 * np.sqrt(1.0 + ratio**2)
    gouy = np.arctan(ratio)
    # 1/R with R the wavefront curvature radius; regular at s = 0.
    inv_r = s / (s**2 + z_r**2)

    envelope = np.exp(-(xi**2) / w**2)
    phase = k0 * s + 0.5 * k0 * xi**2 * inv_r
    if profile == "line":
        amp = (w0 / w) ** 0.5
        phase = phase - 0.5 * gouy
    elif profile == "point":
        amp = w0 / w
        phase = phase - gouy
    else:
        raise ValueError(f"profile must be 'line' or 'point', got {profile!r}")
    field = amp * envelope * np.exp(1j * phase)
    return field if shape else complex(field)
