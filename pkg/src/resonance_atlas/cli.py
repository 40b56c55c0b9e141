"""Command line front end: parse an input system, run the requested
analysis tasks in dependency order, and emit deterministic JSON and CSV
reports.

Exit codes: 0 success, 2 input error, 3 numerical failure (lost zeros,
lattice requested for incommensurable lengths), 4 cross-check tolerance
breach.  Complex numbers appear in JSON as [re, im] pairs.  Identical
inputs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import crystal as crystal_mod
from . import density as density_mod
from . import diagram as diagram_mod
from . import exppoly as exppoly_mod
from . import geometry as geometry_mod
from .crystal import CrystalError, CrystalSpec, crystal_resonances
from .diagram import DiagramError, build_diagram, chains_for_diagram
from .exppoly import as_k_function, build_characteristic_exppoly
from .geometry import PointConfig
from .crystal import CrystalDeterminant
from .qgraph import (DET_DIM_CAP, GraphDeterminant, GraphError, GraphSpec,
                     IncommensurableError, PolynomialCoefficientError,
                     classify_KSH, commensurable_reduce, graph_resonances,
                     symbolic_det)
from .rootfind import RootfindError, SearchRect, find_zeros

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_TOLERANCE = 4

TASKS = ("diagram", "resonances", "density", "chains", "structure")


class InputError(Exception):
    pass


class ToleranceBreach(Exception):
    pass


@dataclass(frozen=True)
class Tolerances:
    freq_tol: float = 1e-9
    coeff_tol: float = 1e-9
    root_tol: float = 1e-9

    def __post_init__(self):
        for name in ("freq_tol", "coeff_tol", "root_tol"):
            if getattr(self, name) <= 0:
                raise InputError(f"tolerance {name} must be positive")

    def as_dict(self) -> dict:
        return {"freq_tol": self.freq_tol, "coeff_tol": self.coeff_tol,
                "root_tol": self.root_tol}


@dataclass(frozen=True)
class AnalysisConfig:
    kind: str
    payload: object
    rects: Tuple[SearchRect, ...]
    tolerances: Tolerances
    tasks: Tuple[str, ...]

    def __post_init__(self):
        if not self.tasks:
            raise InputError("at least one task required")
        for t in self.tasks:
            if t not in TASKS:
                raise InputError(
                    f"unknown task {t!r}; choose from {', '.join(TASKS)}")


def _cplx(z: complex) -> List[float]:
    return [float(z.real), float(z.imag)]


def _parse_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise InputError(f"complex value must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    return complex(float(v))


def _rect_json(r: SearchRect) -> List[float]:
    return [float(x) for x in r.bounds]


def parse_points(data: dict) -> PointConfig:
    try:
        centers = data["centers"]
        strengths = data["strengths"]
    except KeyError as e:
        raise InputError(f"points input missing field {e.args[0]!r}")
    try:
        return PointConfig(tuple(tuple(float(x) for x in c)
                                 for c in centers),
                           tuple(_parse_complex(s) for s in strengths))
    except (TypeError, ValueError) as e:
        raise InputError(f"invalid points input: {e}")


def parse_graph(data: dict) -> GraphSpec:
    for fieldname in ("vertices", "edges", "leads"):
        if fieldname not in data:
            raise InputError(f"graph input missing field {fieldname!r}")
    try:
        return GraphSpec.from_json(data)
    except (GraphError, KeyError, TypeError, ValueError) as e:
        raise InputError(f"invalid graph input: {e}")


def parse_crystal(data: dict) -> CrystalSpec:
    for fieldname in ("breakpoints", "permittivities"):
        if fieldname not in data:
            raise InputError(f"crystal input missing field {fieldname!r}")
    try:
        return CrystalSpec.from_json(data)
    except (CrystalError, TypeError, ValueError) as e:
        raise InputError(f"invalid crystal input: {e}")


_PARSERS = {"points": parse_points, "graph": parse_graph,
            "crystal": parse_crystal}


def validate(config: AnalysisConfig) -> List[dict]:
    """Schema and plausibility diagnostics; errors here are conditions a
    constructor cannot reject (it never sees the raw input) or soft
    warnings about near-degenerate data."""
    diags: List[dict] = []

    def warn(code, msg):
        diags.append({"severity": "warning", "code": code, "message": msg})

    def err(code, msg):
        diags.append({"severity": "error", "code": code, "message": msg})

    if config.kind == "points":
        cfg: PointConfig = config.payload
        if cfg.n >= 2:
            dm = geometry_mod.distance_matrix(cfg)
            diam = geometry_mod.diameter(cfg)
            off = [dm[i][j] for i in range(cfg.n)
                   for j in range(i + 1, cfg.n)]
            if min(off) < 1e-6 * diam:
                warn("near-degenerate-centers",
                     f"smallest separation {min(off):.3e} is below 1e-6 "
                     f"of the diameter {diam:.3e}")
        if any(abs(a.imag) > 0 for a in cfg.strengths):
            warn("complex-strengths",
                 "complex strengths: mirror symmetry unavailable, density "
                 "counts use the searched region only")
    elif config.kind == "graph":
        g: GraphSpec = config.payload
        _near_commensurable_warnings([l for _, _, l in g.edges],
                                     "edge lengths", warn)
        if g.dim > DET_DIM_CAP:
            warn("dimension-cap",
                 f"matrix dimension {g.dim} exceeds the symbolic cap "
                 f"{DET_DIM_CAP}; structure tasks unavailable")
    elif config.kind == "crystal":
        c: CrystalSpec = config.payload
        _near_commensurable_warnings(list(c.optical_lengths),
                                     "optical lengths", warn)
    for r in config.rects:
        if r.half_width < 10 * config.tolerances.root_tol \
                or r.half_height < 10 * config.tolerances.root_tol:
            warn("thin-rectangle",
                 f"rectangle {_rect_json(r)} is thin relative to the root "
                 f"tolerance")
    return diags


def _near_commensurable_warnings(lengths: Sequence[float], what, warn):
    for i in range(len(lengths)):
        for j in range(i + 1, len(lengths)):
            ratio = lengths[j] / lengths[i]
            fr = Fraction(ratio).limit_denominator(10 ** 6)
            gap = abs(float(fr) - ratio)
            if 0 < gap <= 1e-9:
                warn("near-commensurable",
                     f"{what} {lengths[i]} and {lengths[j]} have ratio "
                     f"within {gap:.1e} of {fr}; rational reconstruction "
                     f"will snap them together")


def _expsum_json(F) -> dict:
    return {
        "terms": [{"frequency": float(b),
                   "coefficients": [_cplx(x) for x in cs]}
                  for b, cs in F.terms],
        "constant_coefficients": F.constant_coefficients,
    }


def _multiset_json(ms) -> dict:
    return {
        "region": _rect_json(ms.region),
        "residual_bound": ms.residual_bound,
        "total": ms.total,
        "zeros": [{"k": _cplx(z), "multiplicity": m} for z, m in ms.zeros],
    }


def _diagram_json(diag) -> dict:
    return diagram_mod.diagram_to_json(diag)


def _points_pipeline(cfg: PointConfig, config: AnalysisConfig,
                     report: dict, csvs: Dict[str, str]):
    tol = config.tolerances
    D = build_characteristic_exppoly(cfg, freq_tol=None,
                                     coeff_tol=tol.coeff_tol)
    report["effective_size"] = exppoly_mod.effective_size(D)
    if D.cancellation.cancelled:
        report["cancelled_frequencies"] = [float(b) for b in
                                           D.cancellation.cancelled]
    # Spot check against the determinant oracle; failure means the
    # expansion and the matrix disagree, which invalidates everything else.
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(5):
        z = complex(rng.normal(), rng.normal())
        lhs = D.eval(z)
        rhs = ((-4 * math.pi) ** cfg.n
               * np.linalg.det(exppoly_mod.gamma_matrix(cfg, 1j * z)))
        worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
    report["oracle_relative_error"] = worst
    if worst > 1e-9:
        raise ToleranceBreach(
            f"determinant oracle mismatch: relative error {worst:.3e}")
    diag = build_diagram(D)
    tasks = config.tasks
    if "diagram" in tasks or "chains" in tasks or "density" in tasks:
        report["diagram"] = _diagram_json(diag)
    if "structure" in tasks:
        profile = geometry_mod.size_profile(cfg)
        a3a5 = diagram_mod.check_A3_A5(D, profile)
        # A4 needs two centers, A6 four; report null when inapplicable.
        structure = {
            "sizes": [float(s) for s in profile.sizes],
            "diameter": profile.diameter,
            "A3": a3a5.A3,
            "A5": a3a5.A5,
            "A4": geometry_mod.check_A4(profile) if cfg.n >= 2 else None,
            "A6": geometry_mod.check_A6(cfg) if cfg.n >= 4 else None,
        }
        try:
            structure["r_narrow"] = diagram_mod.r_narrow(diag, profile)
        except (DiagramError, ValueError) as e:
            structure["r_narrow"] = None
            structure["r_narrow_error"] = str(e)
        report["structure"] = structure
    multisets = []
    if "resonances" in tasks or "density" in tasks or "chains" in tasks:
        f, fp = as_k_function(D)
        for r in config.rects:
            multisets.append(find_zeros(f, fp, r, tol.root_tol))
        report["resonances"] = [_multiset_json(m) for m in multisets]
        rows = sorted(((z, m) for ms in multisets for z, m in ms.zeros),
                      key=lambda t: (t[0].real, t[0].imag))
        csvs["resonances.csv"] = _resonance_csv(rows)
    if "chains" in tasks:
        report["chains"] = [_chain_match_json(diag, ms) for ms in multisets]
    if "density" in tasks:
        real = all(abs(a.imag) == 0 for a in cfg.strengths)
        report["density"] = [
            _density_json(ms, diag, csvs, mirror=real, f=f, gap_eps=0.0)
            for ms in multisets]


def _resonance_csv(rows) -> str:
    lines = ["re,im,multiplicity"]
    for z, m in rows:
        lines.append(f"{z.real!r},{z.imag!r},{m}")
    return "\n".join(lines) + "\n"


def _chain_match_json(diag, ms) -> dict:
    x1 = ms.region.bounds[1]
    mu_min = min((s.mu for s in diag.segments if s.mu > 0), default=None)
    if mu_min is None:
        return {"chains": [], "unmatched_zeros": ms.total}
    t_max = max(2, int(x1 / (2 * math.pi * mu_min)) + 2)
    chains = chains_for_diagram(diag, range(1, t_max + 1))
    rep = density_mod.match_chains(ms, chains)
    out = []
    for ci, ch in enumerate(chains):
        seq = rep.residual_sequence(ci)
        if not seq:
            continue
        out.append({
            "mu": ch.mu, "omega": _cplx(ch.omega), "sign": ch.sign,
            "matched": [{"t": t, "residual": r} for t, r in seq],
        })
    return {"chains": out,
            "unmatched_zeros": len(rep.unmatched_zeros),
            "unmatched_predictions": len(rep.unmatched_predictions)}


# Searches on punctured domains stop short of Re k = 0; the gap strip is
# certified by a separate count down to this margin, and the leftover
# sliver falls inside the model's origin exclusion.
GAP_EPS = 1e-5


def _density_json(ms, diag, csvs: Dict[str, str], mirror: bool,
                  f=None, gap_eps: float = 0.0) -> dict:
    try:
        return _density_json_inner(ms, diag, csvs, mirror, f, gap_eps)
    except (density_mod.DensityError, RootfindError) as e:
        return {"error": str(e)}


def _density_json_inner(ms, diag, csvs: Dict[str, str], mirror: bool,
                        f, gap_eps: float) -> dict:
    if mirror:
        x0, _, y0, y1 = ms.region.bounds
        certified = x0 <= density_mod.AXIS_TOL
        if not certified and f is not None and gap_eps < x0:
            ms = density_mod.extend_region(
                ms, f, SearchRect.from_bounds(gap_eps, x0, y0, y1))
            certified = True
        work = density_mod.mirror_double(ms, gap_certified=certified)
    else:
        work = ms
    out: dict = {}
    cert = density_mod.certified_radius(work)
    out["certified_radius"] = cert
    if cert > 0:
        radii = density_mod.radius_grid(cert / 5.0, cert)
        total = density_mod.fit_density(
            [(R, density_mod.count_ball(work, R)) for R in radii])
        out["total_density"] = total.slope
        out["total_fit_rms"] = total.rms_residual
    if diag is not None:
        jumps = diagram_mod.density_jumps(diag)
        out["predicted_jumps"] = [{"mu": mu, "height": h}
                                  for mu, h in jumps]
        # Each mu certifies its own radius range; shallow boundaries reach
        # far beyond the ball radius, which is what resolves the jumps.
        kept: List[float] = []
        fits = []
        for mu in density_mod.jump_grid([mu for mu, _ in jumps]):
            rcap = density_mod.strip_radius_cap(work, mu)
            if rcap < 2.0:
                continue
            rs = density_mod.radius_grid(rcap / 5.0, rcap)
            fits.append(density_mod.fit_density(
                [(R, density_mod.count_log(work, mu, R)) for R in rs]))
            kept.append(mu)
        out["profile"] = [{"mu": m, "density": f.slope,
                           "rms": f.rms_residual}
                          for m, f in zip(kept, fits)]
        if len(kept) >= 2 and jumps:
            profile = density_mod.DensityProfile(tuple(kept), tuple(fits))
            min_height = 0.3 * min(h for _, h in jumps)
            found = density_mod.detect_jumps(profile, min_height)
            out["fitted_jumps"] = [{"mu": j.mu, "height": j.height}
                                   for j in found]
        csv_mus: Tuple[float, ...] = tuple(kept)
        gammas: Tuple[float, ...] = (0.0,)
    else:
        csv_mus = (0.0,)
        gammas = _gamma_grid(work)
    csv_cap = min((density_mod.strip_radius_cap(work, m, g)
                   for m in csv_mus for g in gammas), default=0.0)
    if csv_mus and csv_cap > 0:
        csv_radii = density_mod.radius_grid(csv_cap / 5.0, csv_cap)
        csvs["density.csv"] = density_mod.density_csv(
            work, csv_mus, gammas, csv_radii)
    return out


def _gamma_grid(ms) -> Tuple[float, ...]:
    depth = -ms.region.bounds[2]
    zdepth = max((-z.imag for z, _ in ms.zeros), default=depth)
    top = max(min(depth, zdepth + 0.2), 0.0)
    return tuple(round(x, 12) for x in np.linspace(0.0, top, 8))


def _graph_pipeline(g: GraphSpec, config: AnalysisConfig,
                    report: dict, csvs: Dict[str, str]):
    tol = config.tolerances
    tasks = config.tasks
    F = None
    if g.dim <= DET_DIM_CAP:
        F = symbolic_det(g)
        report["determinant"] = _expsum_json(F)
    form = None
    if F is not None and not F.is_zero:
        if "diagram" in tasks or "structure" in tasks:
            ksh = classify_KSH(F)
            report["classification"] = {
                "mu_max": ksh.mu_max,
                "neutral_strip": ksh.neutral_strip,
                "segments": [{"mu": mu, "r": r,
                              "omegas": [{"omega": _cplx(o), "mult": m}
                                         for o, m in om]}
                             for mu, r, om in ksh.segments],
            }
            if "diagram" in tasks:
                report["diagram"] = _diagram_json(ksh.diagram)
        if "structure" in tasks or "chains" in tasks:
            try:
                form = commensurable_reduce(F, tol.freq_tol)
                report["commensurable"] = {
                    "beta": form.beta,
                    "degrees": list(form.degrees),
                    "xi": [{"value": _cplx(x), "mult": m}
                           for x, m in form.xi_roots],
                    "spurious": [_cplx(x) for x in form.spurious],
                    "min_modulus": form.min_modulus,
                    "embedded": form.has_embedded,
                }
            except (IncommensurableError, PolynomialCoefficientError) as e:
                report["commensurable"] = {"applicable": False,
                                           "reason": str(e)}
                if "chains" in tasks:
                    raise RootfindError(
                        f"exact lattice requested but {e}")
    multisets = []
    if "resonances" in tasks or "density" in tasks or "chains" in tasks:
        for r in config.rects:
            multisets.append(graph_resonances(g, r, tol.root_tol))
        report["resonances"] = [_multiset_json(m) for m in multisets]
        rows = sorted(((z, m) for ms in multisets for z, m in ms.zeros),
                      key=lambda t: (t[0].real, t[0].imag))
        csvs["resonances.csv"] = _resonance_csv(rows)
    if "chains" in tasks and form is not None:
        worst = 0.0
        matched = 0
        for ms in multisets:
            pts = form.lattice_points(ms.region)
            for z, m in ms.zeros:
                if not pts:
                    continue
                d = min(abs(z - k) for _, k in pts)
                worst = max(worst, d)
                matched += m
        report["lattice_check"] = {"max_distance": worst,
                                   "zeros_checked": matched}
        if worst > 10 * tol.root_tol:
            raise ToleranceBreach(
                f"zeros deviate from the exact lattice by {worst:.3e}, "
                f"allowed {10 * tol.root_tol:.3e}")
    if "density" in tasks:
        fdet = GraphDeterminant(g)
        report["density"] = [
            _density_json(ms, None, csvs, mirror=True, f=fdet,
                          gap_eps=GAP_EPS)
            for ms in multisets]


def _crystal_pipeline(c: CrystalSpec, config: AnalysisConfig,
                      report: dict, csvs: Dict[str, str]):
    tol = config.tolerances
    tasks = config.tasks
    F = crystal_mod.crystal_exppoly(c)
    report["determinant"] = _expsum_json(F)
    if "diagram" in tasks or "structure" in tasks:
        if len(F.frequencies) >= 2:
            ksh = classify_KSH(F)
            report["classification"] = {"mu_max": ksh.mu_max,
                                        "neutral_strip": ksh.neutral_strip}
            if "diagram" in tasks:
                report["diagram"] = _diagram_json(ksh.diagram)
        else:
            report["classification"] = {"empty": True}
    reports = []
    if "resonances" in tasks or "density" in tasks or "chains" in tasks \
            or "structure" in tasks:
        for r in config.rects:
            reports.append(crystal_resonances(c, r, tol.root_tol))
        report["resonances"] = [_multiset_json(cr.multiset)
                                for cr in reports]
        rows = sorted(((z, m) for cr in reports
                       for z, m in cr.multiset.zeros),
                      key=lambda t: (t[0].real, t[0].imag))
        csvs["resonances.csv"] = _resonance_csv(rows)
        if reports and reports[0].commensurable:
            f0 = reports[0].form
            report["commensurable"] = {
                "beta": f0.beta,
                "xi": [{"value": _cplx(x), "mult": m}
                       for x, m in f0.xi_roots],
                "min_modulus": f0.min_modulus,
            }
            worst = max((cr.lattice_residual or 0.0) for cr in reports)
            report["lattice_check"] = {"max_distance": worst}
            if worst > 10 * tol.root_tol:
                raise ToleranceBreach(
                    f"zeros deviate from the exact lattice by {worst:.3e}, "
                    f"allowed {10 * tol.root_tol:.3e}")
        upper = [z for cr in reports for z, _ in cr.multiset.zeros
                 if z.imag >= -tol.root_tol]
        report["real_resonance_check"] = {
            "zeros_on_or_above_axis": len(upper)}
        if upper:
            raise ToleranceBreach(
                f"{len(upper)} zeros on or above the real axis; crystals "
                f"admit none")
    if "chains" in tasks and not (reports and reports[0].commensurable):
        raise RootfindError(
            "exact lattice requested but optical lengths are "
            "incommensurable")
    if "density" in tasks:
        fdet = CrystalDeterminant(c)
        report["density"] = [
            _density_json(cr.multiset, None, csvs, mirror=True, f=fdet,
                          gap_eps=GAP_EPS)
            for cr in reports]


_PIPELINES = {"points": _points_pipeline, "graph": _graph_pipeline,
              "crystal": _crystal_pipeline}


def run(config: AnalysisConfig) -> Tuple[dict, Dict[str, str]]:
    diags = validate(config)
    report: dict = {
        "kind": config.kind,
        "tolerances": config.tolerances.as_dict(),
        "search": [_rect_json(r) for r in config.rects],
        "tasks": list(config.tasks),
        "diagnostics": diags,
    }
    if any(d["severity"] == "error" for d in diags):
        raise InputError("; ".join(d["message"] for d in diags
                                   if d["severity"] == "error"))
    csvs: Dict[str, str] = {}
    _PIPELINES[config.kind](config.payload, config, report, csvs)
    return report, csvs


def emit(report: dict, csvs: Dict[str, str],
         out_dir: Optional[str]) -> str:
    text = json.dumps(report, sort_keys=True, indent=2,
                      allow_nan=False) + "\n"
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        for name in sorted(csvs):
            with open(os.path.join(out_dir, name), "w",
                      encoding="utf-8", newline="\n") as fh:
                fh.write(csvs[name])
    return text


def _load_json_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}")
    except json.JSONDecodeError as e:
        raise InputError(f"malformed JSON in {path}: {e}")


def _parse_rect_flag(text: str) -> SearchRect:
    parts = text.split(",")
    if len(parts) != 4:
        raise InputError(
            f"--rect needs x0,x1,y0,y1 (got {text!r})")
    try:
        x0, x1, y0, y1 = (float(p) for p in parts)
        return SearchRect.from_bounds(x0, x1, y0, y1)
    except ValueError as e:
        raise InputError(f"bad rectangle {text!r}: {e}")


def _build_config(kind: str, args) -> AnalysisConfig:
    file_cfg: dict = {}
    if args.config:
        file_cfg = _load_json_file(args.config)
    if "input" in file_cfg:
        payload_data = file_cfg["input"]
    elif args.input:
        payload_data = _load_json_file(args.input)
    else:
        raise InputError("no input: give --input FILE or a config with "
                         "an 'input' field")
    if not isinstance(payload_data, dict):
        raise InputError("input must be a JSON object")
    payload = _PARSERS[kind](payload_data)

    if "search" in file_cfg:
        try:
            rects = tuple(SearchRect.from_bounds(*[float(x) for x in r])
                          for r in file_cfg["search"])
        except (TypeError, ValueError) as e:
            raise InputError(f"bad search rectangles in config: {e}")
    else:
        rects = tuple(_parse_rect_flag(t) for t in (args.rect or []))

    tdata = {"freq_tol": args.tol_freq, "coeff_tol": args.tol_coeff,
             "root_tol": args.tol_root}
    for key, val in file_cfg.get("tolerances", {}).items():
        name = {"freq": "freq_tol", "coeff": "coeff_tol",
                "root": "root_tol"}.get(key, key)
        if name not in tdata:
            raise InputError(f"unknown tolerance {key!r} in config")
        tdata[name] = float(val)
    tolerances = Tolerances(**tdata)

    if "tasks" in file_cfg:
        tasks = tuple(file_cfg["tasks"])
    else:
        tasks = tuple(t.strip() for t in args.tasks.split(",") if t.strip())
    needs_rect = bool({"resonances", "density", "chains"} & set(tasks))
    if needs_rect and not rects:
        raise InputError("tasks needing a zero search require --rect")
    return AnalysisConfig(kind, payload, rects, tolerances, tasks)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resonance-atlas",
        description="Resonance structure of point scatterers, open "
                    "quantum graphs, and layered dielectrics.")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind, name in (("points", "analyze-points"),
                       ("graph", "analyze-graph"),
                       ("crystal", "analyze-crystal")):
        p = sub.add_parser(
            name, help=f"analyze a {kind} system")
        p.set_defaults(kind=kind)
        p.add_argument("--input", help="JSON file describing the system")
        p.add_argument("--config",
                       help="JSON config; its fields override flags")
        p.add_argument("--tasks", default="diagram",
                       help=f"comma list from: {', '.join(TASKS)}")
        p.add_argument("--rect", action="append",
                       help="search rectangle x0,x1,y0,y1 (repeatable)")
        p.add_argument("--tol-freq", type=float, default=1e-9)
        p.add_argument("--tol-coeff", type=float, default=1e-9)
        p.add_argument("--tol-root", type=float, default=1e-9)
        p.add_argument("--out-dir",
                       help="write report.json and CSV tables here "
                            "(default: print JSON to stdout)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _build_config(args.kind, args)
        report, csvs = run(config)
    except InputError as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (GraphError, CrystalError, ValueError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ToleranceBreach as e:
        print(f"tolerance breach: {e}", file=sys.stderr)
        return EXIT_TOLERANCE
    except (RootfindError, DiagramError, density_mod.DensityError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    text = emit(report, csvs, args.out_dir)
    if not args.out_dir:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
