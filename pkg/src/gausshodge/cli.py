"""Command-line driver: generate surfaces, run the spectral pipelines, write reports.

Configuration is a flat ``key = value`` file (``#`` starts a comment);
command-line flags override it.  Keys:

    surface            plane | sphere | cylinder | angenent | cone-ended
    name               output label (default: derived from the surface)
    radius             sphere / cylinder radius
    subdiv             icosphere subdivisions (sphere)
    target_edge        mesh size of the coarsest level
    R_outer            outer radius (plane, cone-ended)
    half_length        cylinder half length
    genus, ends        cone-ended topology
    R_schedule         comma-separated increasing radii
    refinement_levels  number of levels, 1..5
    variant            diagonal | galerkin
    tol_kernel         relative kernel threshold
    n_eig              eigenvalues reported by ``spectrum``
    seed               seed for the randomized structural checks
    threads            worker threads across refinement levels
    output_dir         where reports go

Exit codes: 0 success or PASS, 1 FAIL, 2 bad input or missing reports,
3 unstabilized sweep, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GaussHodgeError, Unstabilized
from .geometry import (F_functional, gen_cylinder, gen_plane_disk, gen_sphere, geometry_sidecar,
                       shrinker_residual, truncate_geometry)
from .mesh import atomic_write_text, format_off, topology
from .report import config_hash, csv_text, dumps, sha256_text
from .spectra import (R_SCHEDULE, TOL_KERNEL, harmonic_dimension, ladder_index, morse_index,
                      verify_index_bound)
from .weighted_dec import VARIANTS, assemble, export_operators, jacobi_form

SURFACES = ("plane", "sphere", "cylinder", "angenent", "cone-ended")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_UNSTABLE, EXIT_NUMERIC = 0, 1, 2, 3, 4

_DEFAULT_EDGE = {"plane": 0.2, "cylinder": 0.2, "angenent": 0.2, "cone-ended": 0.3, "sphere": None}


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    surface: str
    name: str = ""
    radius: float | None = None
    subdiv: int = 3
    target_edge: float | None = None
    R_outer: float | None = None
    half_length: float = 8.0
    genus: int = 0
    ends: int = 1
    R_schedule: tuple = R_SCHEDULE
    refinement_levels: int = 2
    variant: str = "galerkin"
    tol_kernel: float = TOL_KERNEL
    n_eig: int = 6
    seed: int = 0
    threads: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        if self.surface not in SURFACES:
            raise ConfigError(f"unknown surface {self.surface!r}; choose from {', '.join(SURFACES)}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        r = list(self.R_schedule)
        if not r or any(b <= a for a, b in zip(r, r[1:])) or r[0] <= 0:
            raise ConfigError("R_schedule must be positive and strictly increasing")
        if not 1 <= self.refinement_levels <= 5:
            raise ConfigError("refinement_levels must lie in [1, 5]")
        for key in ("tol_kernel", "target_edge", "radius", "R_outer", "half_length"):
            v = getattr(self, key)
            if v is not None and not v > 0:
                raise ConfigError(f"{key} must be positive")
        if self.n_eig < 1 or self.threads < 1:
            raise ConfigError("n_eig and threads must be at least 1")

    @property
    def label(self):
        if self.name:
            return self.name
        if self.surface == "cone-ended":
            return f"cone-ended-g{self.genus}-r{self.ends}"
        return self.surface

    def provenance(self):
        """Fields that determine the numbers (output location and thread count excluded)."""
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        d.pop("threads")
        d["R_schedule"] = list(self.R_schedule)
        return d


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key, text):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    text = text.strip()
    kind = _FIELD_TYPES[key]
    try:
        if key == "R_schedule":
            return tuple(float(x) for x in text.replace(" ", "").split(",") if x)
        if "int" in kind:
            return int(text)
        if "float" in kind:
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r}") from exc
    return text


def parse_config_text(text):
    """Parse ``key = value`` lines into a dict of typed values."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = _coerce(k.strip(), v)
    return out


def build_config(args):
    values = {}
    if args.config:
        try:
            values.update(parse_config_text(Path(args.config).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    for key in _FIELD_TYPES:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _coerce(key, str(v)) if isinstance(v, str) else v
    if args.out:
        values["output_dir"] = args.out
    if "surface" not in values:
        raise ConfigError("no surface given (use --surface or a config file)")
    return ExperimentConfig(**values)


# -- surfaces ---------------------------------------------------------------------

def make_surface(cfg, level=0):
    """Generate the configured surface at refinement ``level`` (0 = coarsest)."""
    shrink = 2.0 ** (-0.5 * level)
    h = (cfg.target_edge or _DEFAULT_EDGE[cfg.surface] or 0.2) * shrink
    if cfg.surface == "plane":
        return gen_plane_disk(R=cfg.R_outer or 8.0, target_edge=h)
    if cfg.surface == "sphere":
        return gen_sphere(radius=cfg.radius or 2.0, subdivisions=cfg.subdiv + level)
    if cfg.surface == "cylinder":
        return gen_cylinder(radius=cfg.radius or math.sqrt(2.0), half_length=cfg.half_length, target_edge=h)
    if cfg.surface == "angenent":
        from .angenent import gen_angenent_torus

        return gen_angenent_torus(target_edge=h)
    from .cones import gen_cone_ended

    geo, _ = gen_cone_ended(genus=cfg.genus, n_ends=cfg.ends, R_outer=cfg.R_outer or 10.0, target_edge=h)
    return geo


def surface_flags(geom):
    flags = []
    if geom.meta.get("ends_conical") is False:
        flags.append("ends not conical")
    inner = ~geom.mesh.is_boundary_vertex
    if geom.has_curvature and np.max(np.abs(shrinker_residual(geom)[inner]), initial=0.0) > 0.05:
        flags.append("not a shrinker")
    return flags


def surface_topology(geom):
    """``(genus, ends)``: ends are the marked ends, or boundary loops when unmarked."""
    _, genus, loops = topology(geom.mesh)
    return genus, (len(geom.ends) if geom.ends else loops)


# -- output -------------------------------------------------------------------------

class Run:
    """Output directory of one surface plus provenance for every report."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.dir = Path(cfg.output_dir) / cfg.label
        self.dir.mkdir(parents=True, exist_ok=True)
        self.chash = config_hash(cfg.provenance())

    def write_json(self, name, payload, mesh_hashes):
        body = {"config": self.cfg.provenance(), "config_hash": self.chash,
                "mesh_sha256": mesh_hashes, "version": __version__}
        body.update(payload)
        atomic_write_text(self.dir / name, dumps(body))

    def write_text(self, name, text):
        atomic_write_text(self.dir / name, text)

    def log(self, message):
        # timestamps live here so the JSON reports stay reproducible
        with open(self.dir / "run.log", "a") as fh:
            fh.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {message}\n")


def _levels(cfg, fn):
    levels = list(range(cfg.refinement_levels))
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            return list(pool.map(fn, levels))
    return [fn(lv) for lv in levels]


def cmd_gen(cfg, dump_operators=False):
    run = Run(cfg)
    files = {}
    for lv in range(cfg.refinement_levels):
        geo = make_surface(cfg, lv)
        off = format_off(geo.mesh)
        mesh_name = f"mesh_L{lv}.off"
        side_name = f"geometry_L{lv}.json"
        side = dumps(geometry_sidecar(geo), indent=0)
        run.write_text(mesh_name, off)
        run.write_text(side_name, side)
        files[f"L{lv}"] = {
            "mesh": mesh_name,
            "mesh_sha256": geo.mesh.content_hash(),
            "geometry": side_name,
            "geometry_sha256": sha256_text(side),
            "n_vertices": geo.mesh.n_vertices,
            "ends": [e.to_dict() for e in geo.ends],
            "F": F_functional(geo),
            "meta": geo.meta,
        }
        if dump_operators:
            export_operators(assemble(geo, variant=cfg.variant), run.dir / "operators", prefix=f"L{lv}")
    hashes = [files[k]["mesh_sha256"] for k in sorted(files)]
    run.write_json("manifest.json", {"levels": files}, hashes)
    run.log(f"gen {cfg.label}: {cfg.refinement_levels} levels")
    print(f"{cfg.label}: wrote {cfg.refinement_levels} mesh level(s) to {run.dir}")
    return EXIT_OK


def cmd_spectrum(cfg, dump_operators=False):
    """Smallest eigenvalues of the weighted Laplacian (natural) and Jacobi (Dirichlet) pencils."""
    from .linalg import smallest_eigenpairs

    run = Run(cfg)
    geo = make_surface(cfg, cfg.refinement_levels - 1)
    sub = truncate_geometry(geo, cfg.R_schedule[-1])
    ops = assemble(sub, variant=cfg.variant)
    k = cfg.n_eig
    lap, _ = smallest_eigenpairs(ops.K0, ops.M0, k, sigma=-1e-2)
    KJ, M0, _ = jacobi_form(ops)
    jac, _ = smallest_eigenpairs(KJ, M0, k, sigma=-10.0)
    if dump_operators:
        export_operators(ops, run.dir / "operators", prefix="spectrum")
    payload = {"surface": cfg.label, "R": cfg.R_schedule[-1], "n_vertices": sub.mesh.n_vertices,
               "laplacian_eigenvalues": lap.tolist(), "jacobi_eigenvalues": jac.tolist(),
               "F": F_functional(sub)}
    run.write_json("spectrum.json", payload, [sub.mesh.content_hash()])
    rows = [(cfg.label, i, float(a), float(b)) for i, (a, b) in enumerate(zip(lap, jac))]
    run.write_text("spectrum.csv", csv_text(["surface", "k", "laplacian", "jacobi"], rows))
    print(f"{cfg.label}: weighted Laplacian " + " ".join(f"{x:.4f}" for x in lap))
    return EXIT_OK


def cmd_index(cfg, dump_operators=False):
    run = Run(cfg)
    geos = _levels(cfg, lambda lv: make_surface(cfg, lv))
    sweeps = _levels(cfg, lambda lv: morse_index(geos[lv], cfg.R_schedule, cfg.variant))
    flags = surface_flags(geos[0])
    verdict, status = None, "stabilized"
    try:
        verdict = ladder_index(sweeps)
    except Unstabilized as exc:
        status = f"unstabilized: {exc}"
    genus, ends = surface_topology(geos[0])
    payload = {
        "surface": cfg.label,
        "levels": [s.to_dict() for s in sweeps],
        "index": verdict,
        "lower_bound": max((s.index_estimate or 0) for s in sweeps),
        "status": status,
        "flags": flags,
        "genus": genus,
        "ends": ends,
        "pinch_constant": geos[-1].pinch_constant(),
    }
    hashes = [g.mesh.content_hash() for g in geos]
    run.write_json("index.json", payload, hashes)
    rows = [(cfg.label, lv, R, c if c is not None else "", n, m)
            for lv, s in enumerate(sweeps)
            for R, c, n, m in zip(s.R_values, s.neg_counts, s.n_vertices, s.methods)]
    run.write_text("index.csv", csv_text(["surface", "level", "R", "neg_count", "n_vertices", "method"], rows))
    if dump_operators:
        export_operators(assemble(truncate_geometry(geos[-1], cfg.R_schedule[-1]), variant=cfg.variant),
                         run.dir / "operators", prefix="index")
    run.log(f"index {cfg.label}: {status}")
    note = f" [{'; '.join(flags)}]" if flags else ""
    if verdict is None:
        print(f"{cfg.label}: index unstabilized, lower bound {payload['lower_bound']}{note}")
        return EXIT_UNSTABLE
    print(f"{cfg.label}: index {verdict} (stabilized over {len(sweeps)} level(s)){note}")
    return EXIT_OK


def structural_checks(geom, seed, trials=100):
    """``D1 D0 = 0`` and invariance of the cup product under exact shifts.

    The shift ``a -> a + D0 f`` leaves ``cup(a, b)`` unchanged when ``b`` is
    closed and either ``b`` or ``f`` vanishes at the boundary.  Trials draw
    ``b`` from the compactly supported classes with any ``f``, and from the
    end cocycles with ``f`` zero on boundary vertices.
    """
    from .homology import cohomology_basis, cup_product

    mesh = geom.mesh
    dd = mesh.d1() @ mesh.d0()
    basis = cohomology_basis(mesh, geom.ends)
    compact = basis.nu + basis.tau + basis.gammaf
    cases = [(b, False) for b in compact] + [(b, True) for b in basis.eta]
    rng = np.random.default_rng(seed)
    on_boundary = mesh.is_boundary_vertex
    worst = 0
    if cases:
        D0 = mesh.d0()
        for _ in range(trials):
            a = rng.integers(-3, 4, mesh.n_edges)
            b, pin = cases[int(rng.integers(len(cases)))]
            f = rng.integers(-5, 6, mesh.n_vertices)
            if pin:
                f[on_boundary] = 0
            diff = cup_product(mesh, a + D0 @ f, b) - cup_product(mesh, a, b)
            worst = max(worst, abs(diff))
    return {"d1d0_max": int(abs(dd).max()) if dd.nnz else 0, "cup_shift_max": float(worst),
            "cup_trials": trials if cases else 0}


def cmd_harmonic(cfg, dump_operators=False):
    run = Run(cfg)
    geos = _levels(cfg, lambda lv: make_surface(cfg, lv))
    genus, ends = surface_topology(geos[0])
    expected = max(2 * genus + ends - 1, 0)
    reps = _levels(cfg, lambda lv: harmonic_dimension(geos[lv], cfg.R_schedule, cfg.tol_kernel, cfg.variant,
                                                       expected=expected))
    final = reps[-1]
    resolved = all(all(r.resolved) for r in reps)
    dim = final.final_dim
    payload = {
        "surface": cfg.label,
        "genus": genus,
        "ends": ends,
        "expected_lower_bound": expected,
        "levels": [r.to_dict() for r in reps],
        "dim": dim,
        "resolved": resolved,
        "equality": dim == expected,
        "structural": structural_checks(geos[0], cfg.seed),
    }
    run.write_json("harmonic.json", payload, [g.mesh.content_hash() for g in geos])
    rows = [(cfg.label, lv, R, d, g) for lv, r in enumerate(reps)
            for R, d, g in zip(r.R_values, r.dim_estimate, r.gap_ratio)]
    run.write_text("harmonic.csv", csv_text(["surface", "level", "R", "dim", "gap_ratio"], rows))
    if dump_operators:
        export_operators(assemble(geos[-1], variant=cfg.variant), run.dir / "operators", prefix="harmonic")
    ok = resolved and dim >= expected
    print(f"{cfg.label}: harmonic dimension {dim} (2g+r-1 = {expected}), "
          f"{'resolved' if resolved else 'UNRESOLVED'}")
    return EXIT_OK if ok else EXIT_FAIL


def _read_report(path):
    import json

    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"missing prerequisite report {path}; run the index and harmonic commands first") from exc


def cmd_verify(cfg, dump_operators=False):
    run = Run(cfg)
    idx = _read_report(run.dir / "index.json")
    harm = _read_report(run.dir / "harmonic.json")
    if idx.get("index") is None:
        raise Unstabilized(f"index sweep for {cfg.label} did not stabilize")
    rep = verify_index_bound(int(idx["index"]), int(idx["genus"]), int(idx["ends"]),
                             pinch=idx.get("pinch_constant"), harmonic_dim=harm.get("dim"))
    if not harm.get("resolved", False):
        rep["status"] = "FAIL"
        rep["harmonic_note"] = "harmonic dimension unresolved"
    rep["flags"] = idx.get("flags", [])
    rep["surface"] = cfg.label
    run.write_json("verify.json", rep, idx.get("mesh_sha256", []))
    c = rep["pinch_constant"]
    print(f"{cfg.label}: {rep['status']} index {rep['index']} >= {rep['bound']} "
          f"(corollary {rep['corollary_bound']:.4g}: {'met' if rep['corollary_pass'] else 'not met'}), "
          f"c = {c:.4g} {rep['hypothesis']}")
    return EXIT_OK if rep["status"] == "PASS" else EXIT_FAIL


def cmd_all(cfg, dump_operators=False):
    codes = [cmd_gen(cfg, dump_operators), cmd_spectrum(cfg), cmd_index(cfg), cmd_harmonic(cfg)]
    if codes[2] == EXIT_UNSTABLE:
        return EXIT_UNSTABLE
    codes.append(cmd_verify(cfg))
    return max(codes)


COMMANDS = {"gen": cmd_gen, "spectrum": cmd_spectrum, "index": cmd_index, "harmonic": cmd_harmonic,
            "verify": cmd_verify, "all": cmd_all}


def build_parser():
    p = argparse.ArgumentParser(prog="gausshodge", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key = value configuration file")
        s.add_argument("--out", help="output directory")
        s.add_argument("--threads", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--dump-operators", action="store_true", help="write MatrixMarket operators")
        s.add_argument("--surface", choices=SURFACES)
        s.add_argument("--name")
        s.add_argument("--radius", type=float)
        s.add_argument("--subdiv", type=int)
        s.add_argument("--target-edge", dest="target_edge", type=float)
        s.add_argument("--R-outer", dest="R_outer", type=float)
        s.add_argument("--half-length", dest="half_length", type=float)
        s.add_argument("--genus", type=int)
        s.add_argument("--ends", type=int)
        s.add_argument("--R-schedule", dest="R_schedule", help="comma-separated radii")
        s.add_argument("--levels", dest="refinement_levels", type=int)
        s.add_argument("--variant", choices=VARIANTS)
        s.add_argument("--tol-kernel", dest="tol_kernel", type=float)
        s.add_argument("--n-eig", dest="n_eig", type=int)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg, args.dump_operators)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Unstabilized as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except GaussHodgeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
