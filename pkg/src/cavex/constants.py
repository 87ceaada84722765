"""Physical constants (SI, 2018 CODATA / exact SI definitions)."""

C_LIGHT = 299792458.0  # m/s, exact
HBAR_JS = 1.054571817e-34  # J s
HBAR_EVS = 6.582119569e-16  # eV s
EV_J = 1.602176634e-19  # J per eV, exact
EPS0 = 8.8541878128e-12  # F/m

# h*c expressed in keV nm; follows from the exact h, c and e.
HC_KEV_NM = 1.239841984

EV_TO_RAD_PER_S = EV_J / HBAR_JS  # angular frequency per eV


def wavelength_nm(energy_kev: float) -> float:
    """Vacuum wavelength in nm for a photon energy in keV."""
    if energy_kev <= 0.0:
        raise ValueError(f"photon energy must be positive, got {energy_kev} keV")
    return HC_KEV_NM / energy_kev


def omega_rad_per_s(energy_kev: float) -> float:
    """Angular frequency in rad/s for a photon energy in keV."""
    return energy_kev * 1e3 * EV_TO_RAD_PER_S
