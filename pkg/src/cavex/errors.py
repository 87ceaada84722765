"""Exception taxonomy.

All library errors derive from CavexError so the command line layer can map
them to a single-line diagnostic and a nonzero exit code without catching
unrelated bugs.
"""


class CavexError(Exception):
    """Base class for all errors raised by this package."""


class MaterialsError(CavexError):
    """Malformed or inconsistent materials database content."""


class MissingDataError(CavexError):
    """A lookup (material, isotope, source, tabulated energy) has no entry."""


class GeometryError(CavexError):
    """Invalid cavity stack or geometry file."""


class BeamConfigError(CavexError):
    """Beam parameters violate the validity envelope of the beam model."""


class ConvergenceError(CavexError):
    """A numerical routine failed its internal convergence check."""


class OptimizationError(CavexError):
    """Cavity optimization could not complete."""
