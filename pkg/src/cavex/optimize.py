"""Global cavity design search and the spot-size scan pipelines.

The search problem: choose a cladding material (categorical), three layer
thicknesses, the grazing incidence angle and the focal depth so that the
focused-beam field enhancement at the resonant layer center is maximal.
Continuous parameters are searched in three stages: a deterministic mode
sweep (rocking-curve dips of a coarse thickness grid, identical for every
seed), generalized simulated annealing (scipy's dual_annealing in
pure-annealing mode: heavy-tailed visiting distribution, power-law
temperature schedule with restarts), and bounded Nelder-Mead polish of the
two best mutually distinct candidates. The categorical cladding is handled
by independent runs per material, best taken. Runs are deterministic given
(seed, budget), and the deterministic sweep plus multi-candidate polish
keeps the found optimum nearly seed-independent; the annealing stage can
only add candidates on top of that backbone.

Conventions:

* The beam axis always passes through the resonant-layer center at x = 0;
  z_focus is the focal depth along that axis, measured from the top cladding
  boundary (z = 0 at the vacuum side, positive into the stack). Negative
  z_focus puts the focus above the surface.
* The objective is evaluated at the resonant-layer center, not averaged
  over the (thin) layer.
* Budgets count objective evaluations. A budget is split evenly across
  cladding choices, and within one run between annealing and polish.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import dual_annealing, minimize

from .beam import aim_beam, divergence_from_waist
from .constants import wavelength_nm
from .errors import BeamConfigError, CavexError, GeometryError, OptimizationError
from .excitation import chi_source_nec, chi_source_sqrt_uj, inversion_fluence, sigma_z_capped
from .fields import enhancement_factor
from .materials import Isotope, MaterialsDb
from .multilayer import Geometry, Layer, reflectivity, resolve_stack, rocking_curve

__all__ = [
    "CavityTemplate",
    "OptimizationResult",
    "optimize_cavity",
    "evaluate_design",
    "FixedDesign",
    "ReferenceCavity",
    "design_reference_cavity",
    "ScanRow",
    "ScanResult",
    "spot_size_scan",
]

INF = float("inf")

ANNEALER_VISIT = 2.62
ANNEALER_ACCEPT = -5.0
ANNEALER_INITIAL_TEMP = 5230.0
ANNEALER_RESTART_RATIO = 2e-5


@dataclass(frozen=True)
class CavityTemplate:
    """Five-layer sandwich: cladding / guide / resonant / guide / cladding.

    The resonant layer thickness is fixed; d1 (top cladding), d2 and d3
    (guide layers above and below the nuclei) are searched. The bottom
    cladding is the semi-infinite substrate.
    """

    cladding_choices: tuple[str, ...] = ("Pt", "Pd")
    guiding_material: str = "C"
    resonant_thickness_nm: float = 1.0
    d_bounds_nm: tuple[float, float] = (0.5, 50.0)
    theta_bounds_factors: tuple[float, float] = (0.5, 4.0)
    z_focus_min_nm: float = -100.0

    def __post_init__(self):
        if not self.cladding_choices:
            raise OptimizationError("template needs at least one cladding choice")
        lo, hi = self.d_bounds_nm
        if not (0.0 < lo < hi) or not math.isfinite(hi):
            raise OptimizationError(f"thickness bounds must satisfy 0 < lo < hi, got {self.d_bounds_nm}")
        fl, fh = self.theta_bounds_factors
        if not (0.0 < fl < fh):
            raise OptimizationError(f"angle bound factors must satisfy 0 < lo < hi, got {self.theta_bounds_factors}")
        if self.resonant_thickness_nm <= 0:
            raise OptimizationError("resonant layer thickness must be positive")

    @property
    def z_focus_max_nm(self) -> float:
        return 3.0 * self.d_bounds_nm[1] + self.resonant_thickness_nm

    def build(self, db: MaterialsDb, iso: Isotope, cladding: str, d1: float, d2: float, d3: float):
        """Instantiate the template as a resolved CavityStack."""
        geometry = Geometry(
            layers=(
                Layer("vacuum", INF),
                Layer(cladding, d1),
                Layer(self.guiding_material, d2),
                Layer(iso.resonant_material, self.resonant_thickness_nm),
                Layer(self.guiding_material, d3),
                Layer(cladding, INF),
            ),
            resonant_index=3,
        )
        return resolve_stack(db, geometry, isotope=iso)

    def parameter_bounds(
        self,
        db: MaterialsDb,
        iso: Isotope,
        cladding: str,
        w0_nm: float | None = None,
        cutoff_sigmas: float = 5.0,
    ) -> list[tuple[float, float]]:
        """Box bounds for (d1, d2, d3, theta_in, z_focus).

        The angle window is a multiple of the cladding critical angle. When
        the spot size is known the lower angle bound is raised so the whole
        angular-spectrum window of the focused beam clears the horizon.
        z_focus may exceed the instantiated stack depth for small d's; the
        focus then simply sits in the substrate, which is legal.
        """
        d_lo, d_hi = self.d_bounds_nm
        theta_c = db.critical_angle_rad(cladding, iso.energy_kev)
        th_lo = self.theta_bounds_factors[0] * theta_c
        th_hi = self.theta_bounds_factors[1] * theta_c
        if w0_nm is not None:
            lam = wavelength_nm(iso.energy_kev)
            sigma = divergence_from_waist(w0_nm, lam) / math.sqrt(2.0)
            th_lo = max(th_lo, 1.02 * cutoff_sigmas * sigma)
        if th_lo >= th_hi:
            raise OptimizationError(
                f"no feasible incidence window for {cladding} at w0={w0_nm} nm: "
                f"beam validity needs theta >= {th_lo:.4e} rad but the template "
                f"caps it at {th_hi:.4e} rad"
            )
        return [
            (d_lo, d_hi),
            (d_lo, d_hi),
            (d_lo, d_hi),
            (th_lo, th_hi),
            (self.z_focus_min_nm, self.z_focus_max_nm),
        ]


@dataclass(frozen=True)
class FixedDesign:
    """A fully specified cavity + illumination, e.g. an optimizer output."""

    cladding: str
    d1_nm: float
    d2_nm: float
    d3_nm: float
    theta_in_rad: float
    z_focus_nm: float

    @classmethod
    def from_result(cls, result: "OptimizationResult") -> "FixedDesign":
        return cls(
            cladding=result.cladding,
            d1_nm=result.d1_nm,
            d2_nm=result.d2_nm,
            d3_nm=result.d3_nm,
            theta_in_rad=result.theta_in_rad,
            z_focus_nm=result.z_focus_nm,
        )

    @classmethod
    def from_geometry(cls, geometry: Geometry) -> "FixedDesign":
        """Read a design back from a geometry file with @-directives.

        Expects the five-layer template shape (vacuum, cladding, guide,
        resonant, guide, cladding substrate) and the directives
        @theta_in_mrad and @z_focus_nm.
        """
        ls = geometry.layers
        if len(ls) != 6:
            raise GeometryError(
                f"fixed-design geometry must have 6 layers (vacuum + 4 + substrate), got {len(ls)}"
            )
        if geometry.resonant_index != 3:
            raise GeometryError("fixed-design geometry must mark layer 3 as resonant")
        for key in ("theta_in_mrad", "z_focus_nm"):
            if key not in geometry.meta:
                raise GeometryError(f"fixed-design geometry is missing the @{key} directive")
        try:
            theta_mrad = float(geometry.meta["theta_in_mrad"])
            z_focus = float(geometry.meta["z_focus_nm"])
        except ValueError as exc:
            raise GeometryError(f"bad numeric directive in geometry meta: {exc}") from exc
        return cls(
            cladding=ls[1].material,
            d1_nm=ls[1].thickness_nm,
            d2_nm=ls[2].thickness_nm,
            d3_nm=ls[4].thickness_nm,
            theta_in_rad=theta_mrad * 1e-3,
            z_focus_nm=z_focus,
        )


@dataclass(frozen=True)
class OptimizationResult:
    """Best design found, with enough context to reproduce and audit it."""

    isotope: str
    w0_nm: float
    cladding: str
    d1_nm: float
    d2_nm: float
    d3_nm: float
    theta_in_rad: float
    z_focus_nm: float
    best_xi: float
    evaluations: int
    seed: int
    trace: tuple[tuple[int, float], ...]
    annealer_params: dict = field(default_factory=dict)
    guiding_material: str = "C"
    resonant_material: str = ""
    resonant_thickness_nm: float = 1.0

    @property
    def best_params(self) -> tuple:
        return (
            self.cladding,
            self.d1_nm,
            self.d2_nm,
            self.d3_nm,
            self.theta_in_rad,
            self.z_focus_nm,
        )

    def to_geometry(self) -> Geometry:
        """Geometry with design directives, ready for save_geometry."""
        return Geometry(
            layers=(
                Layer("vacuum", INF),
                Layer(self.cladding, self.d1_nm),
                Layer(self.guiding_material, self.d2_nm),
                Layer(self.resonant_material, self.resonant_thickness_nm),
                Layer(self.guiding_material, self.d3_nm),
                Layer(self.cladding, INF),
            ),
            resonant_index=3,
            meta={
                "theta_in_mrad": repr(self.theta_in_rad * 1e3),
                "z_focus_nm": repr(self.z_focus_nm),
                "isotope": self.isotope,
                "design_w0_nm": repr(self.w0_nm),
                "best_xi": repr(self.best_xi),
            },
        )

    def to_dict(self) -> dict:
        return {
            "isotope": self.isotope,
            "w0_nm": self.w0_nm,
            "cladding": self.cladding,
            "d1_nm": self.d1_nm,
            "d2_nm": self.d2_nm,
            "d3_nm": self.d3_nm,
            "theta_in_rad": self.theta_in_rad,
            "theta_in_mrad": self.theta_in_rad * 1e3,
            "z_focus_nm": self.z_focus_nm,
            "best_xi": self.best_xi,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "trace": [[int(i), float(v)] for i, v in self.trace],
            "annealer_params": dict(self.annealer_params),
            "guiding_material": self.guiding_material,
            "resonant_material": self.resonant_material,
            "resonant_thickness_nm": self.resonant_thickness_nm,
        }


def evaluate_design(
    db: MaterialsDb,
    template: CavityTemplate,
    iso: Isotope | str,
    design: FixedDesign,
    w0_nm: float,
    n_samples: int = 101,
    cutoff_sigmas: float = 5.0,
) -> float:
    """Enhancement at the resonant layer for one design and spot size.

    The angular window is narrowed (never below 3 sigma) when the fixed
    incidence angle would otherwise put part of the window below the
    horizon; raises BeamConfigError if even 3 sigma does not fit.
    """
    iso = db.isotope(iso) if isinstance(iso, str) else iso
    stack = template.build(db, iso, design.cladding, design.d1_nm, design.d2_nm, design.d3_nm)
    lam = stack.wavelength_nm
    sigma = divergence_from_waist(w0_nm, lam) / math.sqrt(2.0)
    cap = 0.98 * design.theta_in_rad / sigma
    cutoff = min(cutoff_sigmas, cap)
    if cutoff < 3.0:
        raise BeamConfigError(
            f"incidence angle {design.theta_in_rad:.4e} rad leaves only "
            f"{cap:.2f} sigma of angular window at w0={w0_nm} nm (need >= 3)"
        )
    z_nuc = stack.resonant_depth_nm()
    beam = aim_beam(
        lam, w0_nm, design.theta_in_rad, design.z_focus_nm,
        target_x_nm=0.0, target_z_nm=z_nuc,
    )
    return enhancement_factor(
        stack, beam, x_nm=0.0, z_nm=z_nuc,
        n_samples=n_samples, cutoff_sigmas=cutoff,
    )


class _BudgetExhausted(Exception):
    pass


class _CountedObjective:
    """Maximization bookkeeping around a design-evaluation callable."""

    def __init__(self, fn, budget: int):
        self.fn = fn
        self.budget = budget
        self.count = 0
        self.best = -math.inf
        self.best_x: np.ndarray | None = None
        self.trace: list[tuple[int, float]] = []
        self.history: list[tuple[float, np.ndarray]] = []

    def __call__(self, x) -> float:
        if self.count >= self.budget:
            raise _BudgetExhausted
        self.count += 1
        try:
            xi = self.fn(x)
        except CavexError as exc:
            raise OptimizationError(
                f"objective evaluation failed at parameters {np.asarray(x).tolist()}: {exc}"
            ) from exc
        if not math.isfinite(xi):
            raise OptimizationError(
                f"objective returned a non-finite value at parameters {np.asarray(x).tolist()}"
            )
        self.history.append((xi, np.array(x, dtype=float)))
        if xi > self.best:
            self.best = xi
            self.best_x = np.array(x, dtype=float)
            self.trace.append((self.count, xi))
        return -xi


def _clip_into(x, bounds, margin: float = 1e-9):
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    span = hi - lo
    return np.clip(np.asarray(x, dtype=float), lo + margin * span, hi - margin * span)


def _top_candidates(history, bounds, k: int, min_dist: float = 0.1):
    """Best k evaluated points that are mutually distinct in normalized coords.

    Selecting more than one start for the polish stage guards against the
    single best raw sample sitting in a narrow local peak while a slightly
    worse sample marks the basin of the true optimum.
    """
    lo = np.array([b[0] for b in bounds])
    span = np.array([b[1] for b in bounds]) - lo
    kept: list[np.ndarray] = []
    out: list[np.ndarray] = []
    for xi, x in sorted(history, key=lambda t: -t[0]):
        u = (x - lo) / span
        if all(float(np.linalg.norm(u - v)) >= min_dist for v in kept):
            kept.append(u)
            out.append(x)
        if len(out) == k:
            break
    return out


_SWEEP_D1_NM = (0.5, 1.0, 2.0, 4.0)
_SWEEP_GUIDE_NM = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)


def _mode_candidates(db, template, iso, cladding, bounds, n_theta: int = 481):
    """Deterministic mode sweep: rocking-dip angles of a thickness grid.

    Enhancement peaks sit at cavity mode angles, so instead of sampling the
    5-d box blindly, scan a coarse thickness grid, read each stack's
    reflectance dips from one vectorized rocking curve, and propose
    (thicknesses, dip angle, focus on the nuclei) starts. Candidates come
    back deepest dip first. Everything here is seed-independent.
    """
    thetas = np.linspace(bounds[3][0], bounds[3][1], n_theta)
    ranked: list[tuple[float, tuple[float, ...]]] = []
    for d1 in _SWEEP_D1_NM:
        for d2 in _SWEEP_GUIDE_NM:
            for d3 in _SWEEP_GUIDE_NM:
                stack = template.build(db, iso, cladding, d1, d2, d3)
                R = reflectivity(stack, thetas)
                ii = np.nonzero((R[1:-1] <= R[:-2]) & (R[1:-1] <= R[2:]))[0] + 1
                ii = ii[R[ii] < 0.9]
                ii = ii[np.argsort(R[ii])][:2]
                z_nuc = d1 + d2 + 0.5 * template.resonant_thickness_nm
                for i in ii:
                    ranked.append((float(R[i]), (d1, d2, d3, float(thetas[i]), z_nuc)))
    ranked.sort(key=lambda t: t[0])
    return [np.array(c) for _, c in ranked]


def _anneal_one(
    db, template, iso, cladding, w0_nm, per_budget, run_seed, x0, n_samples, cutoff_sigmas
):
    bounds = template.parameter_bounds(db, iso, cladding, w0_nm, cutoff_sigmas)

    def raw(x):
        design = FixedDesign(
            cladding=cladding, d1_nm=x[0], d2_nm=x[1], d3_nm=x[2],
            theta_in_rad=x[3], z_focus_nm=x[4],
        )
        return evaluate_design(db, template, iso, design, w0_nm, n_samples, cutoff_sigmas)

    obj = _CountedObjective(raw, per_budget)

    def polish(x_start, maxfev):
        if maxfev <= 4:
            return
        try:
            minimize(
                obj,
                x0=x_start,
                method="Nelder-Mead",
                bounds=bounds,
                options={"maxfev": maxfev, "xatol": 1e-8, "fatol": 1e-10},
            )
        except _BudgetExhausted:
            pass

    # Stage 1: deterministic mode sweep, identical for every seed, so the
    # polish stage below always sees the same backbone of candidates and the
    # reported optimum depends only weakly on the annealing run.
    if x0 is not None:
        obj(_clip_into(x0, bounds))
    candidates = _mode_candidates(db, template, iso, cladding, bounds)
    n_sweep = min(len(candidates), max(8, (2 * per_budget) // 5))
    try:
        for c in candidates[:n_sweep]:
            obj(_clip_into(c, bounds))
    except _BudgetExhausted:
        pass
    sweep_best_x = None if obj.best_x is None else obj.best_x.copy()

    # Stage 2: generalized simulated annealing on what is left, minus the
    # polish reserve. Pure annealing; refinement happens in stage 3.
    polish_each = min(150, max(10, per_budget // 6))
    anneal_budget = per_budget - obj.count - 3 * polish_each
    if anneal_budget >= 10 and obj.best_x is not None:
        try:
            dual_annealing(
                obj,
                bounds=bounds,
                maxfun=anneal_budget,
                rng=int(run_seed),
                visit=ANNEALER_VISIT,
                accept=ANNEALER_ACCEPT,
                initial_temp=ANNEALER_INITIAL_TEMP,
                restart_temp_ratio=ANNEALER_RESTART_RATIO,
                no_local_search=True,
                x0=obj.best_x,
            )
        except _BudgetExhausted:
            pass

    # Stage 3: simplex polish. The sweep best is always polished first (it
    # is the seed-independent backbone; annealing candidates must not starve
    # it), then the best two mutually distinct points seen anywhere, then
    # whatever budget is left goes to the overall winner.
    lo = np.array([b[0] for b in bounds])
    span = np.array([b[1] for b in bounds]) - lo
    starts: list[np.ndarray] = [] if sweep_best_x is None else [sweep_best_x]
    for cand in _top_candidates(obj.history, bounds, k=2):
        if all(float(np.linalg.norm((cand - s) / span)) >= 0.1 for s in starts):
            starts.append(cand)
    for x_start in starts[:3]:
        polish(x_start, min(polish_each, per_budget - obj.count))
    if obj.best_x is not None:
        polish(obj.best_x, per_budget - obj.count)

    if obj.best_x is None:
        raise OptimizationError(
            f"no successful objective evaluation for cladding {cladding} "
            f"within budget {per_budget}"
        )
    return obj, bounds, n_sweep, anneal_budget


def optimize_cavity(
    db: MaterialsDb,
    template: CavityTemplate,
    isotope: str | Isotope,
    w0_nm: float,
    budget: int = 2000,
    seed: int = 0,
    x0: tuple[str, tuple[float, ...]] | None = None,
    n_samples: int = 101,
    cutoff_sigmas: float = 5.0,
) -> OptimizationResult:
    """Search cavity geometry and illumination for maximum enhancement.

    x0, when given, is a (cladding, (d1, d2, d3, theta_in, z_focus)) warm
    start; it seeds the matching cladding's run and is evaluated first, so
    the result can only improve on it. The trace records (evaluation index,
    best-so-far) pairs within the winning cladding's run.
    """
    if budget < 100:
        raise OptimizationError(f"budget must be at least 100 evaluations, got {budget}")
    if w0_nm <= 0:
        raise OptimizationError(f"spot size must be positive, got {w0_nm}")
    iso = db.isotope(isotope) if isinstance(isotope, str) else isotope
    claddings = template.cladding_choices
    per_budget = budget // len(claddings)
    seq = np.random.SeedSequence(seed)
    run_seeds = [int(s.generate_state(1)[0]) for s in seq.spawn(len(claddings))]

    best_run = None  # (xi, index, cladding, obj, meta)
    total_evals = 0
    for idx, cladding in enumerate(claddings):
        start = None
        if x0 is not None and x0[0] == cladding:
            start = np.asarray(x0[1], dtype=float)
            if start.shape != (5,):
                raise OptimizationError(f"warm start vector must have 5 entries, got {start.shape}")
        obj, bounds, n_sweep, anneal_budget = _anneal_one(
            db, template, iso, cladding, w0_nm, per_budget, run_seeds[idx],
            start, n_samples, cutoff_sigmas,
        )
        total_evals += obj.count
        if best_run is None or obj.best > best_run[0]:
            best_run = (obj.best, idx, cladding, obj, (bounds, n_sweep, anneal_budget))

    _, idx, cladding, obj, (bounds, n_sweep, anneal_budget) = best_run
    x = obj.best_x
    design = FixedDesign(
        cladding=cladding, d1_nm=float(x[0]), d2_nm=float(x[1]), d3_nm=float(x[2]),
        theta_in_rad=float(x[3]), z_focus_nm=float(x[4]),
    )
    # deterministic function, so this reproduces obj.best exactly
    best_xi = evaluate_design(db, template, iso, design, w0_nm, n_samples, cutoff_sigmas)
    return OptimizationResult(
        isotope=iso.name,
        w0_nm=w0_nm,
        cladding=cladding,
        d1_nm=design.d1_nm,
        d2_nm=design.d2_nm,
        d3_nm=design.d3_nm,
        theta_in_rad=design.theta_in_rad,
        z_focus_nm=design.z_focus_nm,
        best_xi=best_xi,
        evaluations=total_evals,
        seed=seed,
        trace=tuple(obj.trace),
        annealer_params={
            "method": "generalized-simulated-annealing",
            "visit": ANNEALER_VISIT,
            "accept": ANNEALER_ACCEPT,
            "initial_temp": ANNEALER_INITIAL_TEMP,
            "restart_temp_ratio": ANNEALER_RESTART_RATIO,
            "no_local_search": True,
            "polish": "nelder-mead",
            "per_cladding_budget": per_budget,
            "mode_sweep": n_sweep,
            "anneal_maxfun": anneal_budget,
            "n_samples": n_samples,
            "cutoff_sigmas": cutoff_sigmas,
        },
        guiding_material=template.guiding_material,
        resonant_material=iso.resonant_material,
        resonant_thickness_nm=template.resonant_thickness_nm,
    )


# ---------------------------------------------------------------------------
# Reference cavity: critically coupled narrow-mode design

@dataclass(frozen=True)
class ReferenceCavity:
    geometry: Geometry
    theta_mode_rad: float
    r_min: float
    d_top_nm: float

    def design(self, z_focus_nm: float | None = None) -> FixedDesign:
        ls = self.geometry.layers
        z_nuc = ls[1].thickness_nm + ls[2].thickness_nm + 0.5 * ls[3].thickness_nm
        return FixedDesign(
            cladding=ls[1].material,
            d1_nm=ls[1].thickness_nm,
            d2_nm=ls[2].thickness_nm,
            d3_nm=ls[4].thickness_nm,
            theta_in_rad=self.theta_mode_rad,
            z_focus_nm=z_nuc if z_focus_nm is None else z_focus_nm,
        )


def _first_mode_depth(thetas: np.ndarray, refl: np.ndarray) -> tuple[float, float] | None:
    """(theta, R) of the lowest-angle interior local reflectance minimum."""
    interior = (refl[1:-1] <= refl[:-2]) & (refl[1:-1] <= refl[2:])
    idx = np.nonzero(interior)[0]
    if idx.size == 0:
        return None
    i = idx[0] + 1
    return float(thetas[i]), float(refl[i])


def design_reference_cavity(
    db: MaterialsDb,
    isotope: str | Isotope,
    cladding: str = "Pt",
    guiding: str = "C",
    guide_nm: float = 14.0,
    resonant_thickness_nm: float = 1.0,
    top_range_nm: tuple[float, float] = (0.5, 8.0),
    n_theta: int = 3001,
) -> ReferenceCavity:
    """Tune the top cladding thickness for critical coupling of mode 1.

    The guide thickness is fixed; only the coupling-layer thickness is
    scanned (coarse-to-fine) to minimize the reflectance of the lowest
    guided mode in the window between the guide and cladding critical
    angles. Raises OptimizationError if the deepest achievable mode-1
    reflectance is not below 0.05.
    """
    iso = db.isotope(isotope) if isinstance(isotope, str) else isotope
    th_lo = 1.02 * db.critical_angle_rad(guiding, iso.energy_kev)
    th_hi = 0.98 * db.critical_angle_rad(cladding, iso.energy_kev)
    if th_lo >= th_hi:
        raise OptimizationError(
            f"no guided-mode window: critical angle of {guiding} is not below {cladding}"
        )
    thetas = np.linspace(th_lo, th_hi, n_theta)

    def geometry_for(d_top: float) -> Geometry:
        return Geometry(
            layers=(
                Layer("vacuum", INF),
                Layer(cladding, d_top),
                Layer(guiding, guide_nm),
                Layer(iso.resonant_material, resonant_thickness_nm),
                Layer(guiding, guide_nm),
                Layer(cladding, INF),
            ),
            resonant_index=3,
        )

    def mode1_depth(d_top: float) -> float:
        stack = resolve_stack(db, geometry_for(d_top), isotope=iso)
        _, refl = rocking_curve(stack, thetas)
        found = _first_mode_depth(thetas, refl)
        return 1.0 if found is None else found[1]

    lo, hi = top_range_nm
    best_d = lo
    best_r = math.inf
    for stage_pts, (a, b) in (
        (31, (lo, hi)),
        (25, (None, None)),
        (25, (None, None)),
    ):
        if a is None:
            half = (b_prev - a_prev) / (stage_pts - 1) * 3.0
            a, b = max(lo, best_d - half), min(hi, best_d + half)
        grid = np.linspace(a, b, stage_pts)
        for d in grid:
            r = mode1_depth(float(d))
            if r < best_r:
                best_r, best_d = r, float(d)
        a_prev, b_prev = a, b

    if best_r >= 0.05:
        raise OptimizationError(
            f"critical coupling not reached: best mode-1 reflectance {best_r:.4f} "
            f"for {cladding}/{guiding} top thickness in {top_range_nm}"
        )
    stack = resolve_stack(db, geometry_for(best_d), isotope=iso)
    _, refl = rocking_curve(stack, thetas)
    theta_mode, r_min = _first_mode_depth(thetas, refl)
    z_nuc = best_d + guide_nm + 0.5 * resonant_thickness_nm
    geometry = geometry_for(best_d)
    geometry.meta.update(
        theta_in_mrad=repr(theta_mode * 1e3),
        z_focus_nm=repr(z_nuc),
        isotope=iso.name,
        mode1_reflectance=repr(r_min),
    )
    return ReferenceCavity(
        geometry=geometry, theta_mode_rad=theta_mode, r_min=r_min, d_top_nm=best_d
    )


# ---------------------------------------------------------------------------
# Spot-size scan

@dataclass(frozen=True)
class ScanRow:
    isotope: str
    w0_nm: float
    xi: float
    chi_nec_free: float
    chi_nec_cavity: float
    sigma_z: tuple[float, ...]  # aligned with ScanResult.sources
    fluence_uj_um2_mev: float
    theta_in_mrad: float
    d1_nm: float
    d2_nm: float
    d3_nm: float
    cladding: str
    z_focus_nm: float
    seed: int


@dataclass(frozen=True)
class ScanResult:
    rows: tuple[ScanRow, ...]
    failures: tuple[tuple[str, float, str], ...]  # (isotope, w0_nm, diagnostic)
    sources: tuple[str, ...]
    mode: str
    seed: int
    budget: int


def _scan_task(args) -> tuple[int, ScanRow | None, str | None]:
    (order, db, template, iso_name, w0, source_names, mode, fixed, budget,
     sub_seed, x0, n_samples, cutoff_sigmas) = args
    iso = db.isotope(iso_name)
    try:
        if mode == "per-spot":
            result = optimize_cavity(
                db, template, iso, w0, budget=budget, seed=sub_seed, x0=x0,
                n_samples=n_samples, cutoff_sigmas=cutoff_sigmas,
            )
            design = FixedDesign.from_result(result)
            xi = result.best_xi
        else:
            design = fixed
            xi = evaluate_design(
                db, template, iso, design, w0,
                n_samples=n_samples, cutoff_sigmas=cutoff_sigmas,
            )
        if xi <= 0.0:
            raise OptimizationError(f"enhancement collapsed to {xi}, row has no inversion threshold")
        chi_free = chi_source_nec(iso, w0, xi=1.0)
        chi_cav = chi_source_nec(iso, w0, xi=xi)
        sigmas = tuple(
            sigma_z_capped(chi_source_sqrt_uj(db.source(s)) / chi_cav) for s in source_names
        )
        fluence = inversion_fluence(iso, w0, design.theta_in_rad, chi_cav)
        row = ScanRow(
            isotope=iso.name,
            w0_nm=w0,
            xi=xi,
            chi_nec_free=chi_free,
            chi_nec_cavity=chi_cav,
            sigma_z=sigmas,
            fluence_uj_um2_mev=fluence,
            theta_in_mrad=design.theta_in_rad * 1e3,
            d1_nm=design.d1_nm,
            d2_nm=design.d2_nm,
            d3_nm=design.d3_nm,
            cladding=design.cladding,
            z_focus_nm=design.z_focus_nm,
            seed=sub_seed,
        )
        return order, row, None
    except CavexError as exc:
        return order, None, f"{type(exc).__name__}: {exc}"


def spot_size_scan(
    db: MaterialsDb,
    template: CavityTemplate,
    isotopes: list[str],
    w0_grid_nm: list[float],
    sources: list[str],
    mode: str = "per-spot",
    fixed: FixedDesign | None = None,
    budget: int = 2000,
    seed: int = 0,
    x0: tuple[str, tuple[float, ...]] | None = None,
    workers: int | None = None,
    n_samples: int = 101,
    cutoff_sigmas: float = 5.0,
) -> ScanResult:
    """One row per (isotope, spot size); failures are recorded, not fatal.

    per-spot mode re-optimizes the cavity at every grid point with an
    independent deterministic sub-seed; fixed mode re-evaluates the supplied
    design with the beam rescaled to each w0. Rows come back sorted by
    (isotope input order, w0).
    """
    if mode not in ("per-spot", "fixed"):
        raise OptimizationError(f"unknown scan mode {mode!r}")
    if mode == "fixed" and fixed is None:
        raise OptimizationError("fixed mode needs a FixedDesign")
    if mode == "per-spot" and fixed is not None:
        raise OptimizationError("per-spot mode takes no fixed design")
    if mode == "per-spot" and budget < 100:
        raise OptimizationError(f"per-spot scan needs budget >= 100, got {budget}")
    grid = [float(w) for w in w0_grid_nm]
    if len(grid) == 0:
        raise OptimizationError("empty spot-size grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise OptimizationError(f"spot-size grid must be strictly increasing, got {grid}")
    for name in isotopes:
        db.isotope(name)
    for name in sources:
        db.source(name)

    tasks = []
    order = 0
    for iso_idx, iso_name in enumerate(isotopes):
        for iw0, w0 in enumerate(grid):
            sub_seed = int(np.random.SeedSequence([seed, iso_idx, iw0]).generate_state(1)[0])
            tasks.append((
                order, db, template, iso_name, w0, tuple(sources), mode, fixed,
                budget, sub_seed, x0, n_samples, cutoff_sigmas,
            ))
            order += 1

    results: list[tuple[int, ScanRow | None, str | None]] = []
    if workers is not None and workers <= 1:
        results = [_scan_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_task, tasks))

    results.sort(key=lambda item: item[0])
    rows = []
    failures = []
    for order_idx, row, diag in results:
        if row is not None:
            rows.append(row)
        else:
            _, _, _, iso_name, w0 = tasks[order_idx][:5]
            failures.append((iso_name, w0, diag))
    return ScanResult(
        rows=tuple(rows),
        failures=tuple(failures),
        sources=tuple(sources),
        mode=mode,
        seed=seed,
        budget=budget,
    )
