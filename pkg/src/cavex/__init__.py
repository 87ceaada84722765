"""Grazing-incidence x-ray cavity fields, focused beams and nuclear excitation.

The package answers one chain of questions: what field does a focused x-ray
pulse build inside a thin-film cavity (multilayer + beam + fields), what does
that field do to a Moessbauer nuclear ensemble (excitation), and which cavity
does it best (optimize). materials holds the input data; the cli module wires
everything into reproducible CSV/JSON/figure reports.
"""

__version__ = "0.1.0"

from .beam import (
    AngularSpectrum,
    GaussianBeam,
    aim_beam,
    angular_spectrum,
    divergence_from_waist,
    free_space_field,
    waist_from_divergence,
)
from .errors import (
    BeamConfigError,
    CavexError,
    ConvergenceError,
    GeometryError,
    MaterialsError,
    MissingDataError,
    OptimizationError,
)
from .excitation import (
    BlochResult,
    ExcitationResult,
    ResonantPulse,
    bloch_oracle,
    chi_sigma,
    chi_source_nec,
    chi_source_sqrt_uj,
    effective_dipole_cm,
    excite,
    fluence_per_bandwidth,
    gaussian_pulse,
    inversion_fluence,
    pi_pulse_energy_uj,
    pulse_area,
    sigma_z,
    sigma_z_capped,
)
from .fields import (
    FieldMap,
    FocusedFieldSolver,
    cavity_field,
    enhancement_factor,
    field_map,
)
from .io_utils import load_default_db
from .materials import (
    Isotope,
    Material,
    MaterialsDb,
    OpticalEntry,
    SourceParams,
    load_db,
    loads,
    save_db,
    serialize,
)
from .multilayer import (
    CavityStack,
    DipMetrics,
    Geometry,
    GridSolution,
    Layer,
    PlaneWaveSolution,
    dip_metrics,
    load_geometry,
    reflectivity,
    resolve_stack,
    rocking_curve,
    save_geometry,
    solve_grid,
    solve_planewave,
)
from .optimize import (
    CavityTemplate,
    FixedDesign,
    OptimizationResult,
    ReferenceCavity,
    ScanResult,
    ScanRow,
    design_reference_cavity,
    evaluate_design,
    optimize_cavity,
    spot_size_scan,
)

__all__ = [
    "__version__",
    # errors
    "CavexError", "MaterialsError", "MissingDataError", "GeometryError",
    "BeamConfigError", "ConvergenceError", "OptimizationError",
    # materials
    "Isotope", "Material", "OpticalEntry", "SourceParams", "MaterialsDb",
    "load_db", "load_default_db", "loads", "save_db", "serialize",
    # multilayer
    "Layer", "Geometry", "CavityStack", "resolve_stack", "load_geometry",
    "save_geometry", "solve_planewave", "solve_grid", "reflectivity",
    "rocking_curve", "dip_metrics", "DipMetrics", "GridSolution",
    "PlaneWaveSolution",
    # beam
    "GaussianBeam", "AngularSpectrum", "aim_beam", "angular_spectrum",
    "divergence_from_waist", "waist_from_divergence", "free_space_field",
    # fields
    "FocusedFieldSolver", "FieldMap", "enhancement_factor", "cavity_field",
    "field_map",
    # excitation
    "ExcitationResult", "ResonantPulse", "BlochResult", "excite",
    "chi_sigma", "chi_source_sqrt_uj", "chi_source_nec", "pulse_area",
    "sigma_z", "sigma_z_capped", "effective_dipole_cm", "gaussian_pulse",
    "pi_pulse_energy_uj", "bloch_oracle", "fluence_per_bandwidth",
    "inversion_fluence",
    # optimize
    "CavityTemplate", "OptimizationResult", "FixedDesign", "ReferenceCavity",
    "optimize_cavity", "evaluate_design", "design_reference_cavity",
    "ScanRow", "ScanResult", "spot_size_scan",
]
