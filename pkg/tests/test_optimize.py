from __future__ import annotations

import math

import pytest

from cavex import (
    CavityTemplate,
    FixedDesign,
    Geometry,
    Layer,
    MaterialsDb,
    chi_source_nec,
    chi_source_sqrt_uj,
    design_reference_cavity,
    evaluate_design,
    inversion_fluence,
    load_geometry,
    optimize_cavity,
    sigma_z_capped,
    spot_size_scan,
)
from cavex.errors import BeamConfigError, GeometryError, OptimizationError

_INF = math.inf


def _small_result(db: MaterialsDb, template: CavityTemplate, seed: int = 1):
    return optimize_cavity(db, template, "Fe57", 40.0, budget=150, seed=seed)


def test_template_validation() -> None:
    with pytest.raises(OptimizationError, match="at least one cladding"):
        CavityTemplate(cladding_choices=())
    with pytest.raises(OptimizationError, match="thickness bounds"):
        CavityTemplate(d_bounds_nm=(5.0, 1.0))
    with pytest.raises(OptimizationError, match="angle bound factors"):
        CavityTemplate(theta_bounds_factors=(2.0, 0.5))
    with pytest.raises(OptimizationError, match="resonant layer thickness"):
        CavityTemplate(resonant_thickness_nm=0.0)


def test_parameter_bounds(db: MaterialsDb, template: CavityTemplate) -> None:
    iso = db.isotope("Fe57")
    bounds = template.parameter_bounds(db, iso, "Pt")
    assert len(bounds) == 5
    theta_c = db.critical_angle_rad("Pt", iso.energy_kev)
    assert bounds[3] == (0.5 * theta_c, 4.0 * theta_c)
    assert bounds[4][0] == template.z_focus_min_nm
    # knowing the spot size tightens the angle floor to keep the beam valid
    tight = template.parameter_bounds(db, iso, "Pt", w0_nm=20.0)
    assert tight[3][0] > bounds[3][0]
    with pytest.raises(OptimizationError, match="no feasible incidence window"):
        template.parameter_bounds(db, iso, "Pt", w0_nm=4.0)


def test_template_build(db: MaterialsDb, template: CavityTemplate) -> None:
    iso = db.isotope("Fe57")
    stack = template.build(db, iso, "Pt", 2.0, 14.0, 12.0)
    materials = [layer.material for layer in stack.layers]
    assert materials == ["vacuum", "Pt", "C", "Fe", "C", "Pt"]
    assert stack.resonant_index == 3
    assert stack.resonant_depth_nm() == pytest.approx(2.0 + 14.0 + 0.5)


def test_optimize_is_deterministic(db: MaterialsDb, template: CavityTemplate) -> None:
    a = _small_result(db, template, seed=1)
    b = _small_result(db, template, seed=1)
    assert a.to_dict() == b.to_dict()


def test_optimize_result_shape(db: MaterialsDb, template: CavityTemplate) -> None:
    result = _small_result(db, template)
    assert result.isotope == "Fe57"
    assert result.w0_nm == 40.0
    assert result.evaluations == 150
    assert result.best_xi > 1.0
    assert result.cladding in template.cladding_choices
    assert result.resonant_material == "Fe"
    assert result.annealer_params["method"] == "generalized-simulated-annealing"
    assert result.annealer_params["visit"] == 2.62


def test_optimize_respects_bounds(db: MaterialsDb, template: CavityTemplate) -> None:
    result = _small_result(db, template)
    d_lo, d_hi = template.d_bounds_nm
    for d in (result.d1_nm, result.d2_nm, result.d3_nm):
        assert d_lo <= d <= d_hi
    bounds = template.parameter_bounds(
        db, db.isotope("Fe57"), result.cladding, w0_nm=40.0
    )
    assert bounds[3][0] <= result.theta_in_rad <= bounds[3][1]
    assert bounds[4][0] <= result.z_focus_nm <= bounds[4][1]


def test_trace_is_monotone(db: MaterialsDb, template: CavityTemplate) -> None:
    result = _small_result(db, template)
    values = [v for _, v in result.trace]
    assert all(b >= a for a, b in zip(values, values[1:]))
    counts = [i for i, _ in result.trace]
    assert all(b > a for a, b in zip(counts, counts[1:]))
    assert counts[-1] <= result.evaluations
    assert values[-1] == result.best_xi


def test_best_design_reevaluates_identically(
    db: MaterialsDb, template: CavityTemplate
) -> None:
    result = _small_result(db, template)
    design = FixedDesign.from_result(result)
    assert evaluate_design(db, template, "Fe57", design, 40.0) == pytest.approx(
        result.best_xi, rel=1e-12
    )


def test_warm_start_sets_the_floor(db: MaterialsDb, template: CavityTemplate) -> None:
    first = _small_result(db, template)
    x0 = (
        first.cladding,
        (first.d1_nm, first.d2_nm, first.d3_nm, first.theta_in_rad, first.z_focus_nm),
    )
    again = optimize_cavity(db, template, "Fe57", 40.0, budget=150, seed=99, x0=x0)
    assert again.best_xi >= first.best_xi - 1e-12
    assert again.trace[0][1] == pytest.approx(first.best_xi, rel=1e-12)


def test_budget_validation(db: MaterialsDb, template: CavityTemplate) -> None:
    with pytest.raises(OptimizationError, match="at least 100"):
        optimize_cavity(db, template, "Fe57", 40.0, budget=50)
    with pytest.raises(OptimizationError, match="spot size"):
        optimize_cavity(db, template, "Fe57", -1.0, budget=100)
    with pytest.raises(OptimizationError, match="5 entries"):
        optimize_cavity(db, template, "Fe57", 40.0, budget=100, x0=("Pt", (1.0, 2.0)))


def test_geometry_round_trip(db: MaterialsDb, template: CavityTemplate) -> None:
    result = _small_result(db, template)
    geometry = result.to_geometry()
    design = FixedDesign.from_geometry(geometry)
    assert design == FixedDesign.from_result(result)
    assert geometry.meta["isotope"] == "Fe57"
    assert float(geometry.meta["best_xi"]) == result.best_xi


def test_from_geometry_validation() -> None:
    layers = (
        Layer("vacuum", _INF),
        Layer("Pt", 2.0),
        Layer("C", 14.0),
        Layer("Fe", 1.0),
        Layer("C", 14.0),
        Layer("Pt", _INF),
    )
    good_meta = {"theta_in_mrad": "2.5", "z_focus_nm": "16.5"}
    with pytest.raises(GeometryError, match="6 layers"):
        FixedDesign.from_geometry(Geometry(layers=layers[:3] + layers[-1:], meta=good_meta))
    with pytest.raises(GeometryError, match="mark layer 3"):
        FixedDesign.from_geometry(Geometry(layers=layers, resonant_index=2, meta=good_meta))
    with pytest.raises(GeometryError, match="missing the @z_focus_nm"):
        FixedDesign.from_geometry(
            Geometry(layers=layers, resonant_index=3, meta={"theta_in_mrad": "2.5"})
        )
    with pytest.raises(GeometryError, match="bad numeric directive"):
        FixedDesign.from_geometry(
            Geometry(
                layers=layers,
                resonant_index=3,
                meta={"theta_in_mrad": "soon", "z_focus_nm": "16.5"},
            )
        )


def test_reference_cavity_designer(db: MaterialsDb) -> None:
    ref = design_reference_cavity(db, "Fe57")
    assert ref.r_min < 0.05
    materials = [layer.material for layer in ref.geometry.layers]
    assert materials == ["vacuum", "Pt", "C", "Fe", "C", "Pt"]
    assert 0.5 <= ref.d_top_nm <= 8.0
    theta_c_guide = db.critical_angle_rad("C", 14.4125)
    theta_c_clad = db.critical_angle_rad("Pt", 14.4125)
    assert theta_c_guide < ref.theta_mode_rad < theta_c_clad
    design = ref.design()
    assert design.theta_in_rad == ref.theta_mode_rad
    assert design.z_focus_nm == pytest.approx(ref.d_top_nm + 14.0 + 0.5)
    assert design.z_focus_nm == pytest.approx(ref.design(z_focus_nm=None).z_focus_nm)
    assert ref.design(z_focus_nm=3.0).z_focus_nm == 3.0


def test_reference_cavity_matches_packaged_file(
    db: MaterialsDb, reference_cav_path
) -> None:
    ref = design_reference_cavity(db, "Fe57")
    packaged = load_geometry(reference_cav_path)
    assert ref.d_top_nm == pytest.approx(packaged.layers[1].thickness_nm, rel=1e-12)
    assert ref.theta_mode_rad * 1e3 == pytest.approx(
        float(packaged.meta["theta_in_mrad"]), rel=1e-12
    )


def test_fixed_scan_row_bookkeeping(db: MaterialsDb, template: CavityTemplate) -> None:
    ref = design_reference_cavity(db, "Fe57")
    design = ref.design()
    scan = spot_size_scan(
        db,
        template,
        isotopes=["Fe57"],
        w0_grid_nm=[40.0, 80.0],
        sources=["euxfel", "xfelo"],
        mode="fixed",
        fixed=design,
        workers=1,
    )
    assert scan.mode == "fixed"
    assert scan.failures == ()
    assert [row.w0_nm for row in scan.rows] == [40.0, 80.0]
    iso = db.isotope("Fe57")
    for row in scan.rows:
        assert row.xi == pytest.approx(
            evaluate_design(db, template, iso, design, row.w0_nm), rel=1e-12
        )
        assert row.chi_nec_free == pytest.approx(chi_source_nec(iso, row.w0_nm), rel=1e-12)
        assert row.chi_nec_cavity * row.xi == pytest.approx(row.chi_nec_free, rel=1e-12)
        for name, value in zip(scan.sources, row.sigma_z):
            expected = sigma_z_capped(chi_source_sqrt_uj(db.source(name)) / row.chi_nec_cavity)
            assert value == pytest.approx(expected, rel=1e-12)
        assert row.fluence_uj_um2_mev == pytest.approx(
            inversion_fluence(iso, row.w0_nm, design.theta_in_rad, row.chi_nec_cavity),
            rel=1e-12,
        )
        assert row.cladding == "Pt"
        assert row.theta_in_mrad == pytest.approx(design.theta_in_rad * 1e3, rel=1e-12)


def test_fixed_scan_records_failures(db: MaterialsDb, template: CavityTemplate) -> None:
    # 1 mrad incidence cannot fit a 3-sigma window for a 20 nm spot
    design = FixedDesign(
        cladding="Pt", d1_nm=2.0, d2_nm=14.0, d3_nm=14.0,
        theta_in_rad=1.0e-3, z_focus_nm=16.5,
    )
    scan = spot_size_scan(
        db,
        template,
        isotopes=["Fe57"],
        w0_grid_nm=[20.0, 2000.0],
        sources=["euxfel"],
        mode="fixed",
        fixed=design,
        workers=1,
    )
    assert len(scan.rows) == 1
    assert scan.rows[0].w0_nm == 2000.0
    assert len(scan.failures) == 1
    iso_name, w0, diag = scan.failures[0]
    assert (iso_name, w0) == ("Fe57", 20.0)
    assert "BeamConfigError" in diag


def test_scan_is_deterministic(db: MaterialsDb, template: CavityTemplate) -> None:
    kwargs = dict(
        isotopes=["Fe57"],
        w0_grid_nm=[40.0],
        sources=["xfelo"],
        budget=120,
        seed=5,
        workers=1,
    )
    a = spot_size_scan(db, template, **kwargs)
    b = spot_size_scan(db, template, **kwargs)
    assert a.rows == b.rows
    assert a.rows[0].seed != 5  # per-row sub-seed, not the master seed


def test_scan_validation(db: MaterialsDb, template: CavityTemplate) -> None:
    design = FixedDesign(
        cladding="Pt", d1_nm=2.0, d2_nm=14.0, d3_nm=14.0,
        theta_in_rad=2.5e-3, z_focus_nm=16.5,
    )
    with pytest.raises(OptimizationError, match="unknown scan mode"):
        spot_size_scan(db, template, ["Fe57"], [40.0], [], mode="best")
    with pytest.raises(OptimizationError, match="needs a FixedDesign"):
        spot_size_scan(db, template, ["Fe57"], [40.0], [], mode="fixed")
    with pytest.raises(OptimizationError, match="takes no fixed design"):
        spot_size_scan(db, template, ["Fe57"], [40.0], [], mode="per-spot", fixed=design)
    with pytest.raises(OptimizationError, match="budget >= 100"):
        spot_size_scan(db, template, ["Fe57"], [40.0], [], budget=10)
    with pytest.raises(OptimizationError, match="empty spot-size grid"):
        spot_size_scan(db, template, ["Fe57"], [], [])
    with pytest.raises(OptimizationError, match="strictly increasing"):
        spot_size_scan(db, template, ["Fe57"], [80.0, 40.0], [])


def test_evaluate_design_narrows_the_window(db: MaterialsDb, template: CavityTemplate) -> None:
    # angle fits 5 sigma at w0=40 but fewer (>=3) at w0=25: both must work
    design = FixedDesign(
        cladding="Pt", d1_nm=2.4, d2_nm=14.0, d3_nm=14.0,
        theta_in_rad=2.542e-3, z_focus_nm=16.9,
    )
    assert evaluate_design(db, template, "Fe57", design, 40.0) > 0.0
    assert evaluate_design(db, template, "Fe57", design, 25.0) > 0.0
    with pytest.raises(BeamConfigError, match="sigma of angular window"):
        evaluate_design(db, template, "Fe57", design, 8.0)
