"""Command-line frontend.

Subcommands: materials, rocking, fieldmap, excite, optimize, scan.
Every flag carrying a physical quantity spells its unit in the flag name.
CSV-producing subcommands also render a matplotlib figure next to the CSV
(suppress with --no-plot) and write a JSON sidecar with the resolved
configuration; CSV bodies stay byte-identical across runs with equal seeds.

Exit codes: 0 success, 2 usage error (argparse), 1 runtime failure with a
single-line `error: <Kind>: message` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .beam import GaussianBeam, aim_beam
from .errors import CavexError, GeometryError
from .excitation import excite
from .fields import field_map
from .io_utils import figure_path, load_default_db, write_csv, write_sidecar
from .materials import SourceParams
from .multilayer import load_geometry, resolve_stack, rocking_curve, save_geometry
from .optimize import CavityTemplate, FixedDesign, optimize_cavity, spot_size_scan

__all__ = ["main", "build_parser"]


def _parse_scan_mode(value: str):
    if value == "per-spot":
        return ("per-spot", None)
    if value.startswith("fixed:") and len(value) > len("fixed:"):
        return ("fixed", value[len("fixed:"):])
    raise argparse.ArgumentTypeError(
        f"mode must be 'per-spot' or 'fixed:<geometry-file>', got {value!r}"
    )


def _parse_name_list(value: str):
    names = [tok.strip() for tok in value.split(",") if tok.strip()]
    if not names:
        raise argparse.ArgumentTypeError("expected a comma-separated list of names")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cavex",
        description="Thin-film x-ray cavity fields, focused beams and nuclear excitation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--data", metavar="DB", default=None,
                        help="materials database file (default: ./data/materials.db, then the packaged copy)")
    parser.add_argument("--seed", type=int, default=0, help="global random seed (default 0)")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes for scan rows (default: one per CPU)")
    parser.add_argument("--no-plot", action="store_true",
                        help="skip figure rendering next to CSV outputs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("materials", help="list or show validated database records")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?", default=None, help="record name (for show)")
    p.set_defaults(func=cmd_materials)

    p = sub.add_parser("rocking", help="reflectance vs grazing angle for a cavity file")
    p.add_argument("--cavity", required=True, help="geometry file")
    p.add_argument("--isotope", required=True, help="isotope fixing the photon energy")
    p.add_argument("--theta-min-mrad", type=float, required=True)
    p.add_argument("--theta-max-mrad", type=float, required=True)
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--out", default="rocking.csv")
    p.set_defaults(func=cmd_rocking)

    p = sub.add_parser("fieldmap", help="map |xi_E|^2 over (x, z) for a focused beam")
    p.add_argument("--cavity", required=True)
    p.add_argument("--isotope", required=True)
    p.add_argument("--spot-size-nm", type=float, required=True, help="focal amplitude 1/e radius w0")
    p.add_argument("--theta-in-mrad", type=float, required=True)
    p.add_argument("--focus-z-nm", type=float, default=None,
                   help="focal depth along the beam axis (default: resonant layer center)")
    p.add_argument("--focus-x-nm", type=float, default=None,
                   help="focal x; default aims the axis through x=0 at the resonant depth")
    p.add_argument("--n-angles", type=int, default=101)
    p.add_argument("--cutoff-sigmas", type=float, default=5.0)
    p.add_argument("--x-min-nm", type=float, default=None)
    p.add_argument("--x-max-nm", type=float, default=None)
    p.add_argument("--z-min-nm", type=float, default=None)
    p.add_argument("--z-max-nm", type=float, default=None)
    p.add_argument("--nx", type=int, default=221)
    p.add_argument("--nz", type=int, default=201)
    p.add_argument("--out", default="map.csv")
    p.set_defaults(func=cmd_fieldmap)

    p = sub.add_parser("excite", help="pulse area, inversion and source requirements")
    p.add_argument("--isotope", required=True)
    p.add_argument("--source", required=True,
                   help="source name from the database, or inline 'E_uJ,b_rel'")
    p.add_argument("--spot-size-nm", type=float, required=True)
    p.add_argument("--xi", type=float, default=1.0, help="field enhancement at the nuclei")
    p.add_argument("--theta-in-mrad", type=float, default=None,
                   help="grazing angle for the surface-fluence metric")
    p.add_argument("--out", default=None, help="optional CSV row output")
    p.set_defaults(func=cmd_excite)

    p = sub.add_parser("optimize", help="search cavity + illumination for maximum enhancement")
    p.add_argument("--isotope", required=True)
    p.add_argument("--spot-size-nm", type=float, required=True)
    p.add_argument("--budget", type=int, default=2000, help="objective evaluation budget")
    p.add_argument("--seed", type=int, default=None, dest="sub_seed",
                   help="overrides the global --seed")
    p.add_argument("--claddings", type=_parse_name_list, default=["Pt", "Pd"])
    p.add_argument("--guide", default="C", help="guiding layer material")
    p.add_argument("--n-angles", type=int, default=101)
    p.add_argument("--cutoff-sigmas", type=float, default=5.0)
    p.add_argument("--out", default="result.json")
    p.add_argument("--geometry-out", default=None,
                   help="also save the optimum as a geometry file with design directives")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("scan", help="spot-size scan: one CSV row per (isotope, w0)")
    p.add_argument("--isotopes", type=_parse_name_list, required=True)
    p.add_argument("--spot-min-nm", type=float, required=True)
    p.add_argument("--spot-max-nm", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")
    p.add_argument("--mode", type=_parse_scan_mode, default=("per-spot", None),
                   help="per-spot or fixed:<geometry-file>")
    p.add_argument("--sources", type=_parse_name_list, required=True)
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--seed", type=int, default=None, dest="sub_seed",
                   help="overrides the global --seed")
    p.add_argument("--claddings", type=_parse_name_list, default=["Pt", "Pd"])
    p.add_argument("--guide", default="C")
    p.add_argument("--n-angles", type=int, default=101)
    p.add_argument("--cutoff-sigmas", type=float, default=5.0)
    p.add_argument("--out", default="scan.csv")
    p.set_defaults(func=cmd_scan)

    return parser


def _record_lines(kind: str, obj) -> list[str]:
    lines = [f"[{kind}]"]
    if kind == "isotope":
        lines += [
            f"name = {obj.name}",
            f"energy_keV = {obj.energy_kev!r}",
            f"gamma_neV = {obj.gamma_nev!r}",
            f"alpha = {obj.alpha!r}",
            f"resonant_material = {obj.resonant_material}",
        ]
    elif kind == "material":
        lines.append(f"name = {obj.name}")
        for e in obj.entries:
            lines.append(f"energy_keV = {e.energy_kev!r}  delta = {e.delta!r}  beta = {e.beta!r}")
    else:
        lines += [
            f"name = {obj.name}",
            f"pulse_energy_uJ = {obj.pulse_energy_uj!r}",
            f"bandwidth_rel = {obj.bandwidth_rel!r}",
        ]
    return lines


def cmd_materials(args) -> int:
    db = load_default_db(args.data)
    if args.action == "list":
        print(f"database: {db.origin}")
        print(f"isotopes ({len(db.isotopes)}): " + " ".join(sorted(db.isotopes)))
        print(f"materials ({len(db.materials)}): " + " ".join(sorted(db.materials)))
        print(f"sources ({len(db.sources)}): " + " ".join(sorted(db.sources)))
        return 0
    if args.name is None:
        raise CavexError("materials show needs a record name")
    name = args.name.casefold()
    blocks = []
    for kind, table in (("isotope", db.isotopes), ("material", db.materials), ("source", db.sources)):
        for key, obj in sorted(table.items()):
            if key.casefold() == name:
                blocks.append("\n".join(_record_lines(kind, obj)))
    if not blocks:
        raise CavexError(f"no record named '{args.name}' in {db.origin}")
    print("\n\n".join(blocks))
    return 0


def cmd_rocking(args) -> int:
    db = load_default_db(args.data)
    geometry = load_geometry(args.cavity)
    stack = resolve_stack(db, geometry, isotope=args.isotope)
    if not (0.0 < args.theta_min_mrad < args.theta_max_mrad):
        raise GeometryError(
            f"need 0 < theta-min < theta-max, got {args.theta_min_mrad}, {args.theta_max_mrad}"
        )
    if args.points < 2:
        raise GeometryError(f"need at least 2 angle points, got {args.points}")
    grid_mrad = np.linspace(args.theta_min_mrad, args.theta_max_mrad, args.points)
    thetas, refl = rocking_curve(stack, grid_mrad * 1e-3)
    out = write_csv(args.out, ["theta_mrad", "reflectance"],
                    zip(grid_mrad.tolist(), refl.tolist()))
    write_sidecar(out, {
        "command": "rocking",
        "cavity": str(args.cavity),
        "isotope": args.isotope,
        "energy_keV": stack.energy_kev,
        "theta_min_mrad": args.theta_min_mrad,
        "theta_max_mrad": args.theta_max_mrad,
        "points": args.points,
        "data_origin": str(db.origin),
    })
    if not args.no_plot:
        from . import plots
        plots.save_rocking_figure(figure_path(out), thetas, refl)
    print(f"wrote {out}")
    return 0


def cmd_fieldmap(args) -> int:
    db = load_default_db(args.data)
    geometry = load_geometry(args.cavity)
    stack = resolve_stack(db, geometry, isotope=args.isotope)
    z_anchor = stack.resonant_depth_nm() if stack.resonant_index is not None else 0.0
    z_focus = args.focus_z_nm if args.focus_z_nm is not None else z_anchor
    theta = args.theta_in_mrad * 1e-3
    if args.focus_x_nm is None:
        beam = aim_beam(stack.wavelength_nm, args.spot_size_nm, theta, z_focus,
                        target_x_nm=0.0, target_z_nm=z_anchor)
    else:
        beam = GaussianBeam(
            wavelength_nm=stack.wavelength_nm, waist_nm=args.spot_size_nm,
            theta_in_rad=theta, focus_x_nm=args.focus_x_nm, focus_z_nm=z_focus,
        )
    x_span = None
    if args.x_min_nm is not None or args.x_max_nm is not None:
        if args.x_min_nm is None or args.x_max_nm is None:
            raise GeometryError("give both --x-min-nm and --x-max-nm or neither")
        x_span = (args.x_min_nm, args.x_max_nm)
    z_span = None
    if args.z_min_nm is not None or args.z_max_nm is not None:
        if args.z_min_nm is None or args.z_max_nm is None:
            raise GeometryError("give both --z-min-nm and --z-max-nm or neither")
        z_span = (args.z_min_nm, args.z_max_nm)
    fmap = field_map(stack, beam, x_span_nm=x_span, z_span_nm=z_span,
                     nx=args.nx, nz=args.nz,
                     n_samples=args.n_angles, cutoff_sigmas=args.cutoff_sigmas)
    out = write_csv(args.out, ["x_nm", "z_nm", "xi_sq"], fmap.rows())
    write_sidecar(out, {
        "command": "fieldmap",
        "cavity": str(args.cavity),
        "isotope": args.isotope,
        "spot_size_nm": args.spot_size_nm,
        "theta_in_mrad": args.theta_in_mrad,
        "focus_z_nm": z_focus,
        "focus_x_nm": beam.focus_x_nm,
        "nx": args.nx,
        "nz": args.nz,
        "n_angles": args.n_angles,
        "cutoff_sigmas": args.cutoff_sigmas,
        "map": fmap.metadata,
        "data_origin": str(db.origin),
    })
    if not args.no_plot:
        from . import plots
        plots.save_fieldmap_figure(figure_path(out), fmap)
    print(f"wrote {out}")
    return 0


def cmd_excite(args) -> int:
    db = load_default_db(args.data)
    if "," in args.source:
        tokens = args.source.split(",")
        if len(tokens) != 2:
            raise CavexError(f"inline source must be 'E_uJ,b_rel', got {args.source!r}")
        source = SourceParams(name="inline",
                              pulse_energy_uj=float(tokens[0]),
                              bandwidth_rel=float(tokens[1]))
    else:
        source = db.source(args.source)
    theta = None if args.theta_in_mrad is None else args.theta_in_mrad * 1e-3
    result = excite(db, args.isotope, source, args.spot_size_nm, xi=args.xi, theta_in_rad=theta)
    print(f"isotope: {result.isotope}")
    print(f"source: {result.source}")
    print(f"w0_nm: {result.w0_nm!r}")
    print(f"xi: {result.xi!r}")
    print(f"pulse_area_rad: {result.pulse_area_rad!r}")
    print(f"sigma_z: {result.sigma_z!r}")
    print(f"chi_sigma_m_per_sqrt_J: {result.chi_sigma_m_per_sqrt_j!r}")
    print(f"chi_source_sqrt_uJ: {result.chi_source_sqrt_uj!r}")
    print(f"chi_source_nec_sqrt_uJ: {result.chi_source_nec_sqrt_uj!r}")
    if result.fluence_uj_um2_mev is not None:
        print(f"fluence_uJ_um2_meV: {result.fluence_uj_um2_mev!r}")
    if args.out:
        header = ["isotope", "source", "w0_nm", "xi", "pulse_area_rad", "sigma_z",
                  "chi_source_sqrt_uJ", "chi_source_nec_sqrt_uJ",
                  "fluence_uJ_um2_meV", "theta_in_mrad"]
        row = [result.isotope, result.source, result.w0_nm, result.xi,
               result.pulse_area_rad, result.sigma_z,
               result.chi_source_sqrt_uj, result.chi_source_nec_sqrt_uj,
               "" if result.fluence_uj_um2_mev is None else result.fluence_uj_um2_mev,
               "" if args.theta_in_mrad is None else args.theta_in_mrad]
        out = write_csv(args.out, header, [row])
        print(f"wrote {out}")
    return 0


def cmd_optimize(args) -> int:
    db = load_default_db(args.data)
    iso = db.isotope(args.isotope)
    template = CavityTemplate(cladding_choices=tuple(args.claddings),
                              guiding_material=args.guide)
    seed = args.sub_seed if args.sub_seed is not None else args.seed
    result = optimize_cavity(db, template, iso, args.spot_size_nm,
                             budget=args.budget, seed=seed,
                             n_samples=args.n_angles, cutoff_sigmas=args.cutoff_sigmas)
    payload = {
        "result": result.to_dict(),
        "template": {
            "cladding_choices": list(template.cladding_choices),
            "guiding_material": template.guiding_material,
            "resonant_thickness_nm": template.resonant_thickness_nm,
            "d_bounds_nm": list(template.d_bounds_nm),
            "theta_bounds_factors": list(template.theta_bounds_factors),
            "z_focus_min_nm": template.z_focus_min_nm,
            "z_focus_max_nm": template.z_focus_max_nm,
        },
        "bounds": {
            clad: [list(b) for b in template.parameter_bounds(
                db, iso, clad, args.spot_size_nm, args.cutoff_sigmas)]
            for clad in template.cladding_choices
        },
        "z_convention": "z_focus measured from the top cladding boundary, positive into the stack",
        "data_origin": str(db.origin),
    }
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    payload["version"] = __version__
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if args.geometry_out:
        save_geometry(args.geometry_out, result.to_geometry(),
                      header="optimized cavity design; thicknesses in nm")
    if not args.no_plot:
        from . import plots
        plots.save_trace_figure(figure_path(out), result)
    print(f"best_xi: {result.best_xi!r}")
    print(f"wrote {out}")
    return 0


def cmd_scan(args) -> int:
    db = load_default_db(args.data)
    mode, fixed_path = args.mode
    fixed = None
    if mode == "fixed":
        fixed = FixedDesign.from_geometry(load_geometry(fixed_path))
    if args.points < 1:
        raise CavexError(f"need at least one grid point, got {args.points}")
    if not (0.0 < args.spot_min_nm < args.spot_max_nm) and args.points > 1:
        raise CavexError(
            f"need 0 < spot-min < spot-max, got {args.spot_min_nm}, {args.spot_max_nm}"
        )
    if args.spacing == "log":
        grid = np.geomspace(args.spot_min_nm, args.spot_max_nm, args.points)
    else:
        grid = np.linspace(args.spot_min_nm, args.spot_max_nm, args.points)
    template = CavityTemplate(cladding_choices=tuple(args.claddings),
                              guiding_material=args.guide)
    seed = args.sub_seed if args.sub_seed is not None else args.seed
    result = spot_size_scan(
        db, template, args.isotopes, grid.tolist(), args.sources,
        mode=mode, fixed=fixed, budget=args.budget, seed=seed,
        workers=args.threads, n_samples=args.n_angles,
        cutoff_sigmas=args.cutoff_sigmas,
    )
    header = (["isotope", "w0_nm", "xi", "chi_nec_free", "chi_nec_cavity"]
              + [f"sigma_z_{s}" for s in result.sources]
              + ["fluence_uJ_um2_meV", "theta_in_mrad", "d1_nm", "d2_nm", "d3_nm",
                 "cladding", "z_focus_nm", "seed"])
    rows = []
    for r in result.rows:
        rows.append([r.isotope, r.w0_nm, r.xi, r.chi_nec_free, r.chi_nec_cavity,
                     *r.sigma_z, r.fluence_uj_um2_mev, r.theta_in_mrad,
                     r.d1_nm, r.d2_nm, r.d3_nm, r.cladding, r.z_focus_nm, r.seed])
    out = write_csv(args.out, header, rows)
    write_sidecar(out, {
        "command": "scan",
        "isotopes": args.isotopes,
        "sources": list(result.sources),
        "mode": mode,
        "fixed_geometry": fixed_path,
        "grid_nm": grid.tolist(),
        "spacing": args.spacing,
        "budget": args.budget,
        "seed": seed,
        "failures": [list(f) for f in result.failures],
        "data_origin": str(db.origin),
    })
    if not args.no_plot:
        from . import plots
        plots.save_scan_figure(figure_path(out), result)
    for iso_name, w0, diag in result.failures:
        print(f"row failed: {iso_name} w0={w0:g} nm: {diag}", file=sys.stderr)
    print(f"wrote {out} ({len(result.rows)} rows, {len(result.failures)} failures)")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CavexError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
