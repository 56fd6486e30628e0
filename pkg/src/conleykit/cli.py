"""Scenario runner: load a TOML/JSON scenario, run its stages, write a JSON report
and optionally an SVG picture of one stage.

Exit codes: 0 when every certificate passes, 1 when any stage fails (the
report is still written), 2 on scenario parse or schema errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import jsonschema
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import conley, duality, spectra, unfolded
from .certificate import Certificate
from .compatibility import attractor_triangle, repeller_square
from .cubical import CubeSet, Grid, build_cubeset_from_predicate, transition_graph
from .errors import ConleyError, DimUnsupported, ScenarioError
from .flow import FlowConfig, VectorFieldSpec, orbit_segment
from .homology import PairHomology, pair_map
from .maps import flow_point_map, induced_homology_map

SCHEMA_VERSION = 1

DEFAULTS = {
    "tau": 0.125,
    "pad": 0.25,
    "samples": 0,          # 0 means centre + corners + 8 quasi-random points
    "delta_cells": 2.0,    # pairing radius in cell diagonals
    "sigma": 0.1,
    "theta": 0.3,
    "T": 2.0,
    "m_max": 3,
    "streamline_T": 0.5,
}

STAGE_KINDS = {
    "isolate": [],
    "pair": ["isolate"],
    "homology": ["pair", "block"],
    "block": ["isolate"],
    "flowmaps": ["pair", "block"],
    "duality": ["block"],
    "triple": ["isolate"],
    "compatibility": ["triple"],
    "unfolded": [],
}


# ---------------------------------------------------------------------------
# scenario loading

def _schema(name: str) -> dict:
    return json.loads(resources.files("conleykit").joinpath("schema").joinpath(name).read_text())


def bundled_scenarios() -> List[str]:
    root = resources.files("conleykit").joinpath("scenarios")
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".toml"))


def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    root = resources.files("conleykit").joinpath("scenarios")
    for cand in (path, path + ".toml"):
        q = root.joinpath(cand)
        if q.is_file():
            return Path(str(q))
    raise ScenarioError(f"scenario not found: {path}")


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(doc: dict, item: str) -> None:
    if "=" not in item:
        raise ScenarioError(f"override must look like key=value: {item!r}")
    key, val = item.split("=", 1)
    parts = key.strip().split(".")
    cur = doc
    if parts[0] == "stages" and len(parts) >= 3:
        stage = next((s for s in doc.get("stages", []) if s.get("id") == parts[1]), None)
        if stage is None:
            raise ScenarioError(f"override names unknown stage {parts[1]!r}")
        cur, parts = stage, parts[2:]
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
        if not isinstance(cur, dict):
            raise ScenarioError(f"override path {key!r} crosses a non-table value")
    cur[parts[-1]] = _parse_value(val.strip())


def load_scenario(path: str, overrides=()) -> dict:
    p = _resolve(path)
    text = p.read_text()
    try:
        doc = json.loads(text) if p.suffix == ".json" else tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ScenarioError(f"cannot parse {p.name}: {exc}") from exc
    for o in overrides:
        apply_override(doc, o)
    try:
        jsonschema.validate(doc, _schema("scenario.schema.json"))
    except jsonschema.ValidationError as exc:
        raise ScenarioError(f"scenario does not match the schema: {exc.message}") from exc
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ScenarioError(f"schema_version {doc['schema_version']} is not supported")
    grid = doc["grid"]
    dim = len(grid["lo"])
    if isinstance(grid["res"], int):
        grid["res"] = [grid["res"]] * dim
    if not (len(grid["hi"]) == len(grid["res"]) == dim):
        raise ScenarioError("grid lo, hi and res disagree in dimension")
    seen = {}
    for st in doc["stages"]:
        sid = st["id"]
        if sid in seen:
            raise ScenarioError(f"duplicate stage id {sid!r}")
        for dep in st.get("after", []):
            if dep not in seen:
                raise ScenarioError(f"stage {sid!r} depends on {dep!r}, which is not declared before it")
        src = st.get("of")
        if src is not None:
            if src not in seen:
                raise ScenarioError(f"stage {sid!r} reads {src!r}, which is not declared before it")
            if seen[src] not in STAGE_KINDS[st["kind"]]:
                raise ScenarioError(f"stage {sid!r} cannot read a {seen[src]!r} stage")
        elif STAGE_KINDS[st["kind"]]:
            want = STAGE_KINDS[st["kind"]]
            prev = [s for s, k in seen.items() if k in want]
            if not prev:
                raise ScenarioError(f"stage {sid!r} needs an earlier stage of kind {want}")
            st["of"] = prev[-1]
        seen[sid] = st["kind"]
    doc["_path"] = p.name
    return doc


def field_from_json(d: dict) -> VectorFieldSpec:
    kind = d["kind"]
    if kind == "linear":
        return VectorFieldSpec.linear(d["matrix"])
    if kind == "polynomial":
        return VectorFieldSpec.polynomial([[(c, e) for c, e in comp] for comp in d["terms"]],
                                          d.get("lattice"))
    if kind == "zero":
        return VectorFieldSpec.zero(int(d["dim"]))
    return VectorFieldSpec.catalog(kind)


# ---------------------------------------------------------------------------
# stage execution

class Context:
    def __init__(self, doc: dict):
        self.doc = doc
        self.field = field_from_json(doc["field"])
        fl = doc.get("flow", {})
        self.cfg = FlowConfig(tau=float(fl.get("tau", DEFAULTS["tau"])),
                              step=fl.get("step"))
        g = doc["grid"]
        self.grid = Grid(tuple(map(float, g["lo"])), tuple(map(float, g["hi"])), tuple(g["res"]))
        self.pad = float(g.get("pad", DEFAULTS["pad"]))
        self.samples = int(g.get("samples", DEFAULTS["samples"]))
        self._graph = None
        self._rgraph = None
        self.results: Dict[str, dict] = {}

    @property
    def graph(self):
        if self._graph is None:
            self._graph = transition_graph(self.field, self.cfg, self.grid, self.pad, self.samples)
        return self._graph

    @property
    def rgraph(self):
        if self._rgraph is None:
            self._rgraph = transition_graph(self.field, self.cfg.reversed(), self.grid, self.pad, self.samples)
        return self._rgraph

    def box(self, spec) -> CubeSet:
        if spec is None:
            return CubeSet.full(self.grid)
        lo = np.asarray(spec[0], dtype=float)
        hi = np.asarray(spec[1], dtype=float)
        return build_cubeset_from_predicate(
            self.grid, lambda p: np.all((p >= lo) & (p <= hi), axis=-1))


def _sig(h: PairHomology):
    return h.signature.to_json()


def _check_expect(cert: Certificate, sig: dict, expect: Optional[dict]):
    if expect is None:
        return
    want = {str(k): [int(v), []] for k, v in expect.items() if int(v)}
    cert.add("expected_homology", sig == want, [json.dumps(sig, sort_keys=True)])


def stage_isolate(ctx: Context, st: dict, out: dict):
    A = ctx.box(st.get("region"))
    T = float(st.get("T", 0.0))
    inv = conley.invariant_part(ctx.graph, A)
    cert = conley.is_isolating(ctx.graph, A, T)
    out["certificates"].append(cert.to_json())
    out["sets"] = {"A": A.to_json(), "inv": inv.to_json()}
    out["summary"] = {"A_cubes": len(A), "inv_cubes": len(inv)}
    return {"A": A, "inv": inv}


def stage_pair(ctx: Context, st: dict, out: dict):
    A = ctx.results[st["of"]]["A"]
    K1 = ctx.box(st["K1"]) & A if "K1" in st else None
    K2 = ctx.box(st["K2"]) & A if "K2" in st else None
    if "T" in st:
        pair = conley.build_index_pair_from_preindex(ctx.graph, A, K1, K2, float(st["T"]))
    else:
        pair = conley.search_tame_horizon(ctx.graph, A, K1, K2)
    out["certificates"].append(pair.certificate.to_json())
    out["sets"] = {"A": A.to_json(), "N": pair.N.to_json(), "L": pair.L.to_json()}
    out["summary"] = {"T": pair.T, "N_cubes": len(pair.N), "L_cubes": len(pair.L)}
    return {"A": A, "N": pair.N, "L": pair.L, "T": pair.T}


def stage_homology(ctx: Context, st: dict, out: dict):
    src = ctx.results[st["of"]]
    N = src["N"]
    L = src.get("L", src.get("n_minus"))
    sig = _sig(PairHomology(N, L))
    out["homology"] = {"forward": sig}
    cert = Certificate("homology", {"of": st["of"]})
    if "n_plus" in src:
        out["homology"]["reversed"] = _sig(PairHomology(N, src["n_plus"]))
    _check_expect(cert, sig, st.get("expect"))
    out["certificates"].append(cert.to_json())
    return {"N": N, "L": L}


def stage_block(ctx: Context, st: dict, out: dict):
    A = ctx.results[st["of"]]["A"]
    T = float(st.get("T", DEFAULTS["T"]))
    b = conley.isolating_block(ctx.graph, A, T, ctx.rgraph, int(st.get("layers", 1)))
    out["certificates"].append(b.certificate.to_json())
    out["sets"] = {"A": A.to_json(), "N": b.N.to_json(), "n_minus": b.n_minus.to_json(),
                   "n_plus": b.n_plus.to_json()}
    out["homology"] = {"forward": _sig(PairHomology(b.N, b.n_minus)),
                       "reversed": _sig(PairHomology(b.N, b.n_plus))}
    return {"A": A, "N": b.N, "n_minus": b.n_minus, "n_plus": b.n_plus, "block": b}


def stage_flowmaps(ctx: Context, st: dict, out: dict):
    """Flow maps between the pairs of several earlier stages, all pairs and composites."""
    ids = st.get("pairs") or [st["of"]]
    pairs = []
    for i in ids:
        r = ctx.results[i]
        pairs.append((r["N"], r.get("L", r.get("n_minus"))))
    T = float(st.get("T", DEFAULTS["T"]))
    H = [PairHomology(N, L) for N, L in pairs]
    M = {}
    for i in range(len(pairs)):
        for j in range(len(pairs)):
            fm = flow_point_map(ctx.field, ctx.cfg, pairs[i], pairs[j], T)
            M[i, j] = induced_homology_map(fm, H[i], H[j])
    cert = Certificate("flow_maps", {"T": T, "pairs": ids})
    bad = [[ids[i], ids[j]] for (i, j), f in M.items() if not f.is_isomorphism()]
    cert.add("all_isomorphisms", not bad, bad)
    badc = []
    for i in range(len(pairs)):
        for j in range(len(pairs)):
            for k in range(len(pairs)):
                if M[j, k].compose(M[i, j]).matrices != M[i, k].matrices:
                    badc.append([ids[i], ids[j], ids[k]])
    cert.add("composite_equals_direct", not badc, badc)
    out["certificates"].append(cert.to_json())
    out["matrices"] = {f"{ids[i]}->{ids[j]}": f.to_json() for (i, j), f in sorted(M.items())}
    return {}


def stage_duality(ctx: Context, st: dict, out: dict):
    src = ctx.results[st["of"]]
    delta = float(st.get("delta_cells", DEFAULTS["delta_cells"])) * duality.cell_diagonal(ctx.grid)
    data = duality.build_retractions(src["N"], src["n_minus"], src["n_plus"], delta)
    rep = duality.verify_duality(data, strict=False)
    cert = Certificate("duality", {"delta": delta})
    cert.add("identities", rep.passed, [rep.first_failure() or ""])
    out["certificates"].append(cert.to_json())
    out["duality"] = rep.to_json()
    return {}


def stage_triple(ctx: Context, st: dict, out: dict):
    A = ctx.results[st["of"]]["A"]
    ell = [float(v) for v in st["ell"]]
    theta = float(st["theta"])
    T = float(st.get("T", DEFAULTS["T"]))
    A1, A2, scert = conley.strong_morse_split(ctx.field, A, ell, theta, float(st.get("eps", 0.0)),
                                              graph=ctx.graph, cfg=ctx.cfg)
    out["certificates"].append(scert.to_json())
    tr = conley.index_triple(ctx.graph, A, A1, A2, T)
    for c in tr.certificates.values():
        out["certificates"].append(c.to_json())
    h23, h13, h12 = PairHomology(tr.N2, tr.N3), PairHomology(tr.N1, tr.N3), PairHomology(tr.N1, tr.N2)
    i, r = pair_map(h23, h13), pair_map(h13, h12)
    out["homology"] = {"attractor": _sig(h23), "total": _sig(h13), "repeller": _sig(h12)}
    out["matrices"] = {"attractor_map": i.to_json(), "repeller_map": r.to_json()}
    ex = Certificate("exactness")
    comp = r.compose(i)
    ex.add("composite_zero", all(not any(any(row) for row in M) for M in comp.matrices.values()))
    out["certificates"].append(ex.to_json())
    out["sets"] = {"A": A.to_json(), "N": tr.N1.to_json(), "N2": tr.N2.to_json(), "L": tr.N3.to_json()}
    return {"A": A, "triple": tr, "T": T}


def stage_compatibility(ctx: Context, st: dict, out: dict):
    src = ctx.results[st["of"]]
    A, tr = src["A"], src["triple"]
    T = float(st.get("T", src["T"]))
    empty = CubeSet.empty(ctx.grid)
    K1 = ctx.box(st["K_attractor"]) & A
    K3 = ctx.box(st["K_repeller"]) & A
    cert = Certificate("compatibility", {"T": T})
    res = {}
    for name, fn, K in (("attractor_triangle", attractor_triangle, K1),
                        ("repeller_square", repeller_square, K3)):
        r = fn(ctx.field, ctx.cfg, ctx.graph, A, tr, K, empty, T)
        cert.add(name, r.passed)
        res[name] = r.to_json()
    out["certificates"].append(cert.to_json())
    out["compatibility"] = res
    return {}


def stage_unfolded(ctx: Context, st: dict, out: dict):
    cut = unfolded.CuttingSpec.for_field(
        ctx.field, sigma=float(st.get("sigma", DEFAULTS["sigma"])),
        lyapunov=st.get("lyapunov", "zero"), lyap_scale=st.get("lyap_scale"),
        theta=float(st.get("theta", DEFAULTS["theta"])), R_tilde=float(st.get("R_tilde", 10.0)))
    m_max = int(st.get("m_max", DEFAULTS["m_max"]))
    T = float(st.get("T", 4.0))
    systems = {}
    for d in ("ind", "pro"):
        s = unfolded.assemble_system(ctx.field, cut, m_max, d, ctx.grid, T, ctx.cfg,
                                     ctx.graph, ctx.rgraph)
        systems[d] = s
        out["certificates"].extend(c.to_json() for c in s.certificates)
        out.setdefault("systems", {})[d] = s.to_json()
    ind, pro = systems["ind"], systems["pro"]
    dim = ctx.grid.dim
    k = int(st.get("duality_degree", dim))
    blocks = [(b.N, b.n_minus, b.n_plus) for b in ind.blocks]
    sd = duality.system_duality(blocks, [f.matrix(dim - k) for f in ind.connecting],
                                [f.matrix(k) for f in pro.connecting], k, strict=False)
    cert = Certificate("system_duality", {"degree": k})
    cert.add("identities", sd.report.passed, [sd.report.first_failure() or ""])
    fun = Certificate("functoriality")
    for name, s in systems.items():
        for i in range(len(s.connecting) - 1):
            a, b = s.blocks[i], s.blocks[i + 2]
            L = "n_minus" if name == "ind" else "n_plus"
            direct = pair_map(PairHomology(a.N, getattr(a, L)), PairHomology(b.N, getattr(b, L))) \
                if name == "ind" else unfolded.repeller_map(a, b)
            fun.add(f"{name}:{i}->{i + 2}", s.composite(i, i + 2).matrices == direct.matrices)
    so = spectra.SystemObject.from_unfolded(ind)
    try:
        spectra.system_morphism(so, so, [spectra.identity(x) for x in so.levels])
        fun.add("identity_family_natural", True)
    except ConleyError as exc:
        fun.add("identity_family_natural", False, [str(exc)])
    out["certificates"].extend([cert.to_json(), fun.to_json()])
    out["duality"] = sd.report.to_json()
    out["cutting"] = cut.to_json()
    J = ind.regions[0]
    out["sets"] = {"A": ind.regions[-1].to_json(), "N": ind.blocks[0].N.to_json(),
                   "n_minus": ind.blocks[0].n_minus.to_json(), "n_plus": ind.blocks[0].n_plus.to_json()}
    out["summary"] = {"J1_cubes": len(J), "levels": m_max}
    return {}


RUNNERS: Dict[str, Callable] = {
    "isolate": stage_isolate, "pair": stage_pair, "homology": stage_homology,
    "block": stage_block, "flowmaps": stage_flowmaps, "duality": stage_duality,
    "triple": stage_triple, "compatibility": stage_compatibility, "unfolded": stage_unfolded,
}


def _clean(obj):
    """Make a report JSON-safe and deterministic."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not math.isfinite(v):
            return None
        return float(f"{v:.12g}")
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, CubeSet):
        return obj.to_json()
    return obj


def run_scenario(doc: dict) -> dict:
    ctx = Context(doc)
    stages = []
    # A stage whose certificate fails still hands its sets on; only a stage that
    # raised (or was skipped) produces nothing for its dependents to read.
    broken = set()
    all_ok = True
    for st in doc["stages"]:
        out: Dict[str, Any] = {"id": st["id"], "kind": st["kind"], "certificates": [],
                               "params": {k: v for k, v in st.items() if k not in ("id", "kind")}}
        deps = set(st.get("after", [])) | ({st["of"]} if "of" in st else set())
        deps |= set(st.get("pairs", []))
        if deps & broken:
            out["status"] = "skipped"
            broken.add(st["id"])
            all_ok = False
            stages.append(out)
            continue
        try:
            ctx.results[st["id"]] = RUNNERS[st["kind"]](ctx, st, out) or {}
            ok = all(c["passed"] for c in out["certificates"])
            out["status"] = "pass" if ok else "fail"
        except ConleyError as exc:
            out["status"] = "fail"
            out["error"] = {"type": exc.name, "message": str(exc), "witnesses": _clean(exc.witnesses)}
            broken.add(st["id"])
        all_ok &= out["status"] == "pass"
        stages.append(out)
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": doc.get("name", doc["_path"]),
        "inputs": {"field": doc["field"], "flow": {"tau": ctx.cfg.tau, "step": ctx.cfg.step},
                   "grid": {"lo": list(ctx.grid.box_lo), "hi": list(ctx.grid.box_hi),
                            "res": list(ctx.grid.res), "pad": ctx.pad, "samples": ctx.samples}},
        "defaults": DEFAULTS,
        "stages": stages,
        "passed": all_ok,
        "notes": ["identities are checked on integer homology, not at the level of maps of spaces"],
    }
    report = _clean(report)
    jsonschema.validate(report, _schema("report.schema.json"))
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=1) + "\n"


# ---------------------------------------------------------------------------
# SVG

COLORS = {"A": "#e6e6e6", "inv": "#555555", "N": "#9ecae1", "N2": "#6baed6",
          "L": "#fb6a4a", "n_minus": "#fb6a4a", "n_plus": "#74c476"}
ORDER = ["A", "N", "N2", "L", "n_minus", "n_plus", "inv"]


def render_svg(report: dict, stage_id: str, size: int = 480) -> str:
    g = report["inputs"]["grid"]
    dim = len(g["res"])
    if dim >= 3:
        raise DimUnsupported("pictures are drawn for one- and two-dimensional grids only")
    stage = next((s for s in report["stages"] if s["id"] == stage_id), None)
    if stage is None:
        raise ScenarioError(f"no stage {stage_id!r} in the report")
    lo, hi, res = g["lo"], g["hi"], g["res"]
    sets = stage.get("sets", {})
    W = size
    H = max(40, round(size * (hi[1] - lo[1]) / (hi[0] - lo[0]))) if dim == 2 else 80
    sx = W / (hi[0] - lo[0])
    sy = (H / (hi[1] - lo[1])) if dim == 2 else 1.0
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white" stroke="black" stroke-width="1"/>']
    cw = W / res[0]
    ch = H / res[1] if dim == 2 else 40.0
    for name in ORDER:
        cubes = sets.get(name) or []
        if not cubes:
            continue
        out.append(f'<g id="{name}" fill="{COLORS[name]}" stroke="none">')
        for c in sorted(map(tuple, cubes)):
            x = c[0] * cw
            y = (H - (c[1] + 1) * ch) if dim == 2 else 20.0
            out.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{cw:.2f}" height="{ch:.2f}"/>')
        out.append("</g>")
    if any(sets.get(n) for n in ORDER):
        field = field_from_json(report["inputs"]["field"])
        cfg = FlowConfig(tau=report["inputs"]["flow"]["tau"])
        out.append('<g id="streamlines" fill="none" stroke="#222222" stroke-width="0.8">')
        n = 7
        if dim == 2:
            starts = [(lo[0] + (i + 0.5) * (hi[0] - lo[0]) / n, lo[1] + (j + 0.5) * (hi[1] - lo[1]) / n)
                      for i in range(n) for j in range(n)]
        else:
            starts = [(lo[0] + (i + 0.5) * (hi[0] - lo[0]) / (4 * n),) for i in range(4 * n)]
        for i, s in enumerate(starts):
            try:
                pts = orbit_segment(field, cfg, np.array(s), DEFAULTS["streamline_T"])
            except ConleyError:
                continue
            if dim == 2:
                xy = [((p[0] - lo[0]) * sx, H - (p[1] - lo[1]) * sy) for p in pts]
            else:
                row = 58.0 + 8.0 * (i % 3)
                xy = [((p[0] - lo[0]) * sx, row) for p in pts]
            xy = [(min(max(x, 0.0), W), min(max(y, 0.0), H)) for x, y in xy]
            d = " ".join(f"{x:.2f},{y:.2f}" for x, y in xy)
            out.append(f'<polyline points="{d}"/>')
            x1, y1 = xy[-1]
            out.append(f'<circle cx="{x1:.2f}" cy="{y1:.2f}" r="1.5" fill="#222222"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# commands

def _cmd_run(args) -> int:
    try:
        doc = load_scenario(args.scenario, args.override or [])
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run_scenario(doc)
    out = args.out or doc.get("outputs", {}).get("report") or (Path(doc["_path"]).stem + ".report.json")
    Path(out).write_text(dumps(report))
    svg = args.svg or doc.get("outputs", {}).get("svg")
    if svg:
        sid = doc.get("outputs", {}).get("svg_stage") or doc["stages"][-1]["id"]
        try:
            Path(svg).write_text(render_svg(report, sid))
        except DimUnsupported as exc:
            print(f"warning: {exc}", file=sys.stderr)
    for s in report["stages"]:
        err = f" ({s['error']['type']})" if "error" in s else ""
        print(f"{s['id']:<14} {s['status']}{err}")
    return 0 if report["passed"] else 1


def _read_set(path: str) -> CubeSet:
    try:
        return CubeSet.from_text(Path(path).read_text())
    except (OSError, ConleyError) as exc:
        raise ScenarioError(f"cannot read cube set {path}: {exc}") from exc


def _cmd_homology(args) -> int:
    try:
        N = _read_set(args.n)
        L = _read_set(args.l) if args.l else CubeSet.empty(N.grid)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        sig = PairHomology(N, L).signature
    except ConleyError as exc:
        print(json.dumps({"error": exc.name, "message": str(exc)}))
        return 1
    print(json.dumps({"homology": sig.to_json()}, sort_keys=True))
    return 0


def _cmd_check_pair(args) -> int:
    try:
        A, N, L = _read_set(args.a), _read_set(args.n), _read_set(args.l)
        field = VectorFieldSpec.catalog(args.field)
    except (ScenarioError, ConleyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    G = transition_graph(field, FlowConfig(tau=args.tau), A.grid)
    cert = conley.validate_index_pair(G, A, N, L, args.t)
    print(json.dumps(_clean(cert.to_json()), sort_keys=True))
    return 0 if cert.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conleykit", description="Conley index pipelines on cubical grids.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario file or a bundled scenario name")
    r.add_argument("scenario")
    r.add_argument("--out")
    r.add_argument("--svg")
    r.add_argument("--override", action="append", metavar="KEY=VALUE")
    r.set_defaults(func=_cmd_run)
    h = sub.add_parser("homology", help="relative homology of a pair of cube-set files")
    h.add_argument("--n", required=True)
    h.add_argument("--l")
    h.set_defaults(func=_cmd_homology)
    c = sub.add_parser("check-pair", help="validate an index pair against a catalog field")
    c.add_argument("--a", required=True)
    c.add_argument("--n", required=True)
    c.add_argument("--l", required=True)
    c.add_argument("--t", type=float, default=0.0)
    c.add_argument("--field", default="SADDLE2")
    c.add_argument("--tau", type=float, default=DEFAULTS["tau"])
    c.set_defaults(func=_cmd_check_pair)
    sub.add_parser("list", help="list bundled scenarios").set_defaults(
        func=lambda a: print("\n".join(bundled_scenarios())) or 0)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
