"""Command-line entry point binding every module.

Subcommands: airy, halfline, product, forms, domain, campaign, golden.
Tabular spectra go to CSV, structured reports to JSON; every emitted file
embeds the tool version and a hash of the configuration so reruns are
byte-identical.  Exit codes: 0 success, 2 validation error, 3 refusal on
numerical-resolution grounds.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__, airy, domains, forms, halfline, separation
from .profiles import ThresholdError, parse_profile

__all__ = ["main", "golden_check"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RESOLUTION = 3


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _parse_mu(text: str) -> float:
    if text == "pi2":
        return math.pi**2
    return float(text)


def _parse_tgrid(text: str) -> list[float]:
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty t grid")
    return vals


def _parse_transverse(text: str) -> separation.TransverseSpectrum:
    if text.startswith("dirichlet-interval:"):
        params = dict(p.split("=", 1) for p in text.split(":", 1)[1].split(",") if p)
        length = float(params.get("L", "1"))
        return separation.dirichlet_interval(length)
    raise ValueError(f"unknown transverse spec {text!r} (expected dirichlet-interval:L=...)")


class _Emitter:
    """Writes one payload as CSV rows or a JSON envelope."""

    def __init__(self, config: dict, module: str, operation: str):
        self.config = config
        self.module = module
        self.operation = operation
        self.hash = _config_hash(config)

    def csv(self, columns: list[str], rows: list[list], path: str | None) -> str:
        lines = [
            f"# specdegen {__version__}",
            f"# config_hash={self.hash}",
            f"# module={self.module} operation={self.operation}",
            ",".join(columns),
        ]
        for row in rows:
            lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row))
        text = "\n".join(lines) + "\n"
        self._write(text, path)
        return text

    def json(self, payload, path: str | None) -> str:
        envelope = {
            "tool": "specdegen",
            "version": __version__,
            "config_hash": self.hash,
            "config": self.config,
            "module": self.module,
            "operation": self.operation,
            "payload": payload,
        }
        text = json.dumps(envelope, indent=2, sort_keys=True) + "\n"
        self._write(text, path)
        return text

    @staticmethod
    def _write(text: str, path: str | None):
        if path:
            with open(path, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _pool_size() -> int:
    cap = os.environ.get("SPECDEGEN_THREADS")
    if cap:
        return max(1, int(cap))
    return min(4, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_airy(args) -> int:
    if args.airy_op == "eval":
        pair = airy.airy_eval(args.u)
        cfg = {"u": args.u}
        em = _Emitter(cfg, "airy", "eval")
        if args.format == "json":
            em.json(
                {
                    "u": pair.u,
                    "a_plus": pair.a_plus,
                    "a_minus": pair.a_minus,
                    "d_plus": pair.d_plus,
                    "d_minus": pair.d_minus,
                    "wronskian": pair.wronskian,
                },
                args.out,
            )
        else:
            em.csv(
                ["u", "a_plus", "a_minus", "d_plus", "d_minus"],
                [[pair.u, pair.a_plus, pair.a_minus, pair.d_plus, pair.d_minus]],
                args.out,
            )
        return EXIT_OK
    if args.airy_op == "zeros":
        zs = airy.airy_zeros(args.n, args.kind)
        table = zs.dirichlet_zeros if args.kind == "dirichlet" else zs.neumann_zeros
        cfg = {"n": args.n, "kind": args.kind}
        em = _Emitter(cfg, "airy", "zeros")
        if args.format == "json":
            em.json({"kind": args.kind, "zeros": list(table)}, args.out)
        else:
            em.csv(["index", "zero"], [[k + 1, z] for k, z in enumerate(table)], args.out)
        return EXIT_OK
    raise ValueError(f"unknown airy operation {args.airy_op!r}")


def _solve_one(profile_name, mu, bc, t, k):
    profile = parse_profile(profile_name)
    problem = halfline.HalfLineProblem(t=t, mu=mu, profile=profile, bc=bc)
    return halfline.solve(problem, k)


def _cmd_halfline(args) -> int:
    mu = _parse_mu(args.mu)
    if args.halfline_op == "solve":
        spec = _solve_one(args.profile, mu, args.bc, args.t, args.k)
        if spec.resolved_count < args.k:
            sys.stderr.write(
                f"resolution refusal: only {spec.resolved_count} of {args.k} modes "
                f"resolvable at t={args.t:g}\n"
            )
            return EXIT_RESOLUTION
        cfg = {"profile": args.profile, "mu": mu, "t": args.t, "bc": args.bc, "k": args.k}
        em = _Emitter(cfg, "halfline", "solve")
        rows = [
            [args.t, mu, p.k, p.lam, p.residual] for p in spec.eigenpairs
        ]
        em.csv(["t", "mu", "k", "lambda", "residual"], rows, args.out)
        if args.dump_eigenfunctions:
            for p in spec.eigenpairs:
                path = f"{args.dump_eigenfunctions}_k{p.k}.csv"
                _Emitter(cfg, "halfline", "eigenfunction").csv(
                    ["x", "w"], [[float(x), float(w)] for x, w in zip(p.x, p.w)], path
                )
        return EXIT_OK
    if args.halfline_op == "sweep":
        t_grid = _parse_tgrid(args.t_grid)
        cfg = {
            "profile": args.profile,
            "mu": mu,
            "bc": args.bc,
            "t_grid": t_grid,
            "k": args.k,
        }
        em = _Emitter(cfg, "halfline", "sweep")
        with ThreadPoolExecutor(max_workers=_pool_size()) as pool:
            specs = list(
                pool.map(lambda t: _solve_one(args.profile, mu, args.bc, t, args.k), t_grid)
            )
        rows = []
        for t, spec in sorted(zip(t_grid, specs), key=lambda z: -z[0]):
            for p in spec.eigenpairs:
                rows.append([t, mu, p.k, p.lam, p.residual])
        em.csv(["t", "mu", "k", "lambda", "residual"], rows, args.out)
        return EXIT_OK
    raise ValueError(f"unknown halfline operation {args.halfline_op!r}")


def _cmd_product(args) -> int:
    if args.product_op == "spectrum":
        profile = parse_profile(args.profile)
        b = _parse_transverse(args.b)
        spec = separation.product_spectrum(args.t, profile, b, args.lambda_max, bc=args.bc)
        cfg = {
            "profile": args.profile,
            "b": args.b,
            "t": args.t,
            "lambda_max": args.lambda_max,
            "bc": args.bc,
        }
        em = _Emitter(cfg, "product", "spectrum")
        rows = [[e.lam, e.mu_index, e.radial_index] for e in spec.entries]
        em.csv(["lambda", "ell", "k"], rows, args.out)
        return EXIT_OK
    if args.product_op == "cylinder":
        spec = separation.cylinder_spectrum(args.t, args.n)
        cfg = {"t": args.t, "n": args.n}
        em = _Emitter(cfg, "product", "cylinder")
        rows = [
            [e.lam, e.mu_index - 1, e.radial_index, e.multiplicity] for e in spec.entries
        ]
        em.csv(["lambda", "ell", "k", "multiplicity"], rows, args.out)
        return EXIT_OK
    raise ValueError(f"unknown product operation {args.product_op!r}")


def _read_family_file(path: str) -> list[tuple[float, np.ndarray]]:
    """Dense row-major CSV blocks, each headed by ``dim=<n> t=<value>``."""
    blocks = []
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    i = 0
    while i < len(lines):
        head = lines[i]
        if not head.startswith("dim="):
            raise ValueError(f"family file: expected 'dim=<n> t=<value>' header, got {head!r}")
        parts = dict(p.split("=", 1) for p in head.split())
        n = int(parts["dim"])
        t = float(parts["t"])
        rows = []
        for j in range(n):
            rows.append([float(v) for v in lines[i + 1 + j].split(",")])
        blocks.append((t, np.array(rows)))
        i += 1 + n
    return blocks


def _cmd_forms(args) -> int:
    if args.forms_op == "quasimode-campaign":
        viol, reports = forms.random_campaign(args.n, args.trials, seed=args.seed, dim=args.n)
        cfg = {"n": args.n, "trials": args.trials, "seed": args.seed}
        em = _Emitter(cfg, "forms", "quasimode-campaign")
        payload = {
            "trials": args.trials,
            "violations": viol,
            "worst_margin": min(
                (c.rhs - c.lhs for r in reports for c in r.checks), default=None
            ),
        }
        em.json(payload, args.out)
        return EXIT_OK
    if args.forms_op == "track":
        blocks = _read_family_file(args.family)
        if args.t_grid:
            wanted = set(_parse_tgrid(args.t_grid))
            blocks = [b for b in blocks if any(abs(b[0] - w) < 1e-12 for w in wanted)]
        blocks.sort(key=lambda b: b[0])
        if len(blocks) < 2:
            raise ValueError("need at least two family members to track")
        table = {t: m for t, m in blocks}

        def family(t: float) -> forms.FormPencil:
            if t in table:
                return forms.FormPencil(a=table[t])
            ts = sorted(table)
            j = int(np.searchsorted(ts, t))
            j = min(max(j, 1), len(ts) - 1)
            t0, t1 = ts[j - 1], ts[j]
            w = (t - t0) / (t1 - t0)
            return forms.FormPencil(a=(1 - w) * table[t0] + w * table[t1])

        fam = forms.track_branches(family, sorted(table))
        cfg = {"family": os.path.basename(args.family), "t_grid": sorted(table)}
        em = _Emitter(cfg, "forms", "track")
        rows = []
        for bi, branch in enumerate(fam.branches):
            for t, v in zip(branch.t_grid, branch.values):
                rows.append([float(t), bi, float(v)])
        em.csv(["t", "branch", "lambda"], rows, args.out)
        return EXIT_OK
    raise ValueError(f"unknown forms operation {args.forms_op!r}")


def _cmd_domain(args) -> int:
    if args.domain_op == "triangle":
        if args.h > args.t / 8.0:
            sys.stderr.write(
                f"resolution refusal: h = {args.h:g} cannot resolve the thin direction; "
                f"need h <= t/8 = {args.t / 8.0:g}\n"
            )
            return EXIT_RESOLUTION
        res = domains.triangle_spectrum(args.t, args.n, args.h)
        cfg = {"t": args.t, "n": args.n, "h": args.h}
        em = _Emitter(cfg, "domain", "triangle")
        rows = [
            [k + 1, res.lambdas_h[k], res.lambdas_h2[k], res.lambda_extrap[k],
             res.error_estimate[k], res.renormalized[k]]
            for k in range(args.n)
        ]
        em.csv(
            ["k", "lambda_h", "lambda_h2", "lambda_extrap", "error_estimate", "renormalized"],
            rows,
            args.out,
        )
        if args.dump_mesh:
            mesh = domains.triangle_mesh(args.t, max(int(round(1.0 / args.h)), 8))
            _Emitter(cfg, "domain", "mesh-vertices").csv(
                ["index", "x", "y"],
                [[i, float(v[0]), float(v[1])] for i, v in enumerate(mesh.vertices)],
                f"{args.dump_mesh}_vertices.csv",
            )
            _Emitter(cfg, "domain", "mesh-elements").csv(
                ["index", "v0", "v1", "v2"],
                [[i, int(e[0]), int(e[1]), int(e[2])] for i, e in enumerate(mesh.elements)],
                f"{args.dump_mesh}_elements.csv",
            )
        return EXIT_OK
    if args.domain_op == "sector":
        spec = domains.sector_spectrum(args.t, args.n)
        cfg = {"t": args.t, "n": args.n}
        em = _Emitter(cfg, "domain", "sector")
        rows = [
            [e.lam, e.mu_index, e.radial_index, args.t * args.t * e.lam]
            for e in spec.entries
        ]
        em.csv(["lambda", "ell", "k", "renormalized"], rows, args.out)
        return EXIT_OK
    if args.domain_op == "compare":
        t_grid = _parse_tgrid(args.t_grid)
        records = []
        for t in t_grid:
            sector = domains.sector_spectrum(t, args.n)
            tri = domains.triangle_spectrum(t, args.n, args.h)
            renorm_sector = [t * t * e.lam for e in sector.entries]
            rep = domains.compare_spectra(renorm_sector, sorted(tri.renormalized), args.n)
            records.append(
                {
                    "t": t,
                    "hausdorff": rep.hausdorff,
                    "hausdorff_over_t": rep.hausdorff / t,
                    "matched_diffs": list(rep.matched_diffs),
                    "fem_error_estimate": float(np.max(t * t * tri.error_estimate)),
                }
            )
        cfg = {"t_grid": t_grid, "n": args.n, "h": args.h}
        em = _Emitter(cfg, "domain", "compare")
        em.json(records, args.out)
        return EXIT_OK
    raise ValueError(f"unknown domain operation {args.domain_op!r}")


# ---------------------------------------------------------------------------
# campaigns and golden files
# ---------------------------------------------------------------------------


def _load_config(path: str) -> dict:
    """Key-value configuration with one level of nested tables (INI sections)."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ValueError(f"config file not found: {path}")
    return {s: dict(parser[s]) for s in parser.sections()}


def _cmd_campaign(args) -> int:
    cfg = _load_config(args.config)
    if "campaign" not in cfg or "kind" not in cfg["campaign"]:
        raise ValueError("config must have a [campaign] section with a 'kind' key")
    kind = cfg["campaign"]["kind"]
    out = cfg.get("output", {}).get("path")
    if kind == "supersep":
        hcfg = cfg.get("halfline", {})
        profile = parse_profile(hcfg.get("profile", "exp2"))
        mu = _parse_mu(hcfg.get("mu", "pi2"))
        t_grid = _parse_tgrid(hcfg.get("t_grid", "0.2,0.1,0.05"))
        k = int(hcfg.get("k", "1"))
        bc = hcfg.get("bc", "dirichlet")
        report = halfline.superseparation(profile, mu, t_grid, k=k, bc=bc)
        em = _Emitter(cfg, "campaign", "supersep")
        rows = [
            [r.t, r.lam_k, r.lam_k1, r.gap, r.gap_over_t, r.predicted_gap]
            for r in report.records
        ]
        em.csv(["t", "lambda_k", "lambda_k1", "gap", "gap_over_t", "predicted_gap"], rows, out)
        return EXIT_OK
    if kind == "quasimode":
        fcfg = cfg.get("forms", {})
        n = int(fcfg.get("n", "8"))
        trials = int(fcfg.get("trials", "1000"))
        if "seed" not in fcfg:
            raise ValueError("randomized campaigns must carry an explicit seed")
        seed = int(fcfg["seed"])
        viol, _ = forms.random_campaign(n, trials, seed=seed, dim=n)
        em = _Emitter(cfg, "campaign", "quasimode")
        em.json({"trials": trials, "violations": viol}, out)
        return EXIT_OK
    if kind == "halfline-sweep":
        hcfg = cfg.get("halfline", {})
        profile_name = hcfg.get("profile", "exp2")
        mu = _parse_mu(hcfg.get("mu", "pi2"))
        t_grid = _parse_tgrid(hcfg.get("t_grid", "0.2,0.1"))
        k = int(hcfg.get("k", "1"))
        bc = hcfg.get("bc", "dirichlet")
        with ThreadPoolExecutor(max_workers=_pool_size()) as pool:
            specs = list(pool.map(lambda t: _solve_one(profile_name, mu, bc, t, k), t_grid))
        rows = []
        for t, spec in sorted(zip(t_grid, specs), key=lambda z: -z[0]):
            for p in spec.eigenpairs:
                rows.append([t, mu, p.k, p.lam, p.residual])
        em = _Emitter(cfg, "campaign", "halfline-sweep")
        em.csv(["t", "mu", "k", "lambda", "residual"], rows, out)
        return EXIT_OK
    raise ValueError(f"unknown campaign kind {kind!r}")


def golden_check(path: str, golden: str, tolerances: dict[str, float] | None = None) -> list[str]:
    """Field-by-field comparison against a golden file; returns mismatch messages."""
    if not os.path.exists(golden):
        return [
            f"missing golden file {golden}; generate it by running the same command "
            f"with the output redirected to that path"
        ]
    if not os.path.exists(path):
        return [f"missing output file {path}"]
    tolerances = tolerances or {}
    with open(path) as fh:
        got = [ln.rstrip("\n") for ln in fh]
    with open(golden) as fh:
        want = [ln.rstrip("\n") for ln in fh]
    got_data = [ln for ln in got if not ln.startswith("#")]
    want_data = [ln for ln in want if not ln.startswith("#")]
    problems: list[str] = []
    if not got_data or not want_data:
        return ["empty file(s)"]
    header_got = got_data[0].split(",")
    header_want = want_data[0].split(",")
    if header_got != header_want:
        return [f"header mismatch: {header_got} vs {header_want}"]
    if len(got_data) != len(want_data):
        problems.append(f"row count {len(got_data) - 1} vs {len(want_data) - 1}")
    for row_idx, (g, w) in enumerate(zip(got_data[1:], want_data[1:]), start=1):
        for col, (gv, wv) in zip(header_got, zip(g.split(","), w.split(","))):
            if gv == wv:
                continue
            tol = tolerances.get(col, 0.0)
            try:
                if abs(float(gv) - float(wv)) <= tol:
                    continue
            except ValueError:
                pass
            problems.append(f"row {row_idx} field {col}: {gv} != {wv} (tol {tol:g})")
    return problems


def _cmd_golden(args) -> int:
    tolerances = {}
    if args.config:
        cfg = _load_config(args.config)
        tolerances = {k: float(v) for k, v in cfg.get("golden_tolerances", {}).items()}
    for spec in args.tol or []:
        name, val = spec.split("=", 1)
        tolerances[name] = float(val)
    problems = golden_check(args.path, args.golden, tolerances)
    if problems:
        for p in problems:
            sys.stderr.write(f"golden check: {p}\n")
        return 1
    sys.stdout.write("golden check: pass\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specdegen")
    sub = parser.add_subparsers(dest="command", required=True)

    p_airy = sub.add_parser("airy", help="Airy pair evaluation and zeros")
    airy_sub = p_airy.add_subparsers(dest="airy_op", required=True)
    pe = airy_sub.add_parser("eval")
    pe.add_argument("--u", type=float, required=True)
    pe.add_argument("--format", choices=("csv", "json"), default="csv")
    pe.add_argument("--out")
    pz = airy_sub.add_parser("zeros")
    pz.add_argument("--n", type=int, required=True)
    pz.add_argument("--kind", choices=("dirichlet", "neumann"), default="dirichlet")
    pz.add_argument("--format", choices=("csv", "json"), default="csv")
    pz.add_argument("--out")

    p_h = sub.add_parser("halfline", help="weighted half-line eigenproblems")
    h_sub = p_h.add_subparsers(dest="halfline_op", required=True)
    ps = h_sub.add_parser("solve")
    ps.add_argument("--profile", default="exp2")
    ps.add_argument("--mu", default="pi2")
    ps.add_argument("--t", type=float, required=True)
    ps.add_argument("--bc", choices=("dirichlet", "neumann"), default="dirichlet")
    ps.add_argument("--k", type=int, default=1)
    ps.add_argument("--emit", choices=("csv",), default="csv")
    ps.add_argument("--out")
    ps.add_argument("--dump-eigenfunctions")
    pw = h_sub.add_parser("sweep")
    pw.add_argument("--profile", default="exp2")
    pw.add_argument("--mu", default="pi2")
    pw.add_argument("--t-grid", required=True)
    pw.add_argument("--bc", choices=("dirichlet", "neumann"), default="dirichlet")
    pw.add_argument("--k", type=int, default=1)
    pw.add_argument("--emit", choices=("csv",), default="csv")
    pw.add_argument("--out")

    p_p = sub.add_parser("product", help="separated product spectra")
    p_sub = p_p.add_subparsers(dest="product_op", required=True)
    pp = p_sub.add_parser("spectrum")
    pp.add_argument("--profile", default="exp2")
    pp.add_argument("--b", default="dirichlet-interval:L=1")
    pp.add_argument("--t", type=float, required=True)
    pp.add_argument("--lambda-max", type=float, required=True)
    pp.add_argument("--bc", choices=("dirichlet", "neumann"), default="dirichlet")
    pp.add_argument("--emit", choices=("csv",), default="csv")
    pp.add_argument("--out")
    pc = p_sub.add_parser("cylinder")
    pc.add_argument("--t", type=float, required=True)
    pc.add_argument("--n", type=int, required=True)
    pc.add_argument("--emit", choices=("csv",), default="csv")
    pc.add_argument("--out")

    p_f = sub.add_parser("forms", help="finite-dimensional pencil diagnostics")
    f_sub = p_f.add_subparsers(dest="forms_op", required=True)
    pq = f_sub.add_parser("quasimode-campaign")
    pq.add_argument("--n", type=int, default=8)
    pq.add_argument("--trials", type=int, default=1000)
    pq.add_argument("--seed", type=int, required=True)
    pq.add_argument("--emit", choices=("json",), default="json")
    pq.add_argument("--out")
    pt = f_sub.add_parser("track")
    pt.add_argument("--family", required=True)
    pt.add_argument("--t-grid")
    pt.add_argument("--emit", choices=("csv",), default="csv")
    pt.add_argument("--out")

    p_d = sub.add_parser("domain", help="triangle, sector, and comparisons")
    d_sub = p_d.add_subparsers(dest="domain_op", required=True)
    pdt = d_sub.add_parser("triangle")
    pdt.add_argument("--t", type=float, required=True)
    pdt.add_argument("--n", type=int, default=10)
    pdt.add_argument("--h", type=float, default=0.01)
    pdt.add_argument("--emit", choices=("csv",), default="csv")
    pdt.add_argument("--out")
    pdt.add_argument("--dump-mesh")
    pds = d_sub.add_parser("sector")
    pds.add_argument("--t", type=float, required=True)
    pds.add_argument("--n", type=int, default=10)
    pds.add_argument("--emit", choices=("csv",), default="csv")
    pds.add_argument("--out")
    pdc = d_sub.add_parser("compare")
    pdc.add_argument("--t-grid", required=True)
    pdc.add_argument("--n", type=int, default=10)
    pdc.add_argument("--h", type=float, default=1.0 / 160)
    pdc.add_argument("--emit", choices=("json",), default="json")
    pdc.add_argument("--out")

    p_c = sub.add_parser("campaign", help="config-driven sweep campaigns")
    p_c.add_argument("--config", required=True)

    p_g = sub.add_parser("golden", help="golden-file regression harness")
    g_sub = p_g.add_subparsers(dest="golden_op", required=True)
    pgc = g_sub.add_parser("check")
    pgc.add_argument("--path", required=True)
    pgc.add_argument("--golden", required=True)
    pgc.add_argument("--config")
    pgc.add_argument("--tol", action="append", metavar="FIELD=TOL")
    return parser


_HANDLERS = {
    "airy": _cmd_airy,
    "halfline": _cmd_halfline,
    "product": _cmd_product,
    "forms": _cmd_forms,
    "domain": _cmd_domain,
    "campaign": _cmd_campaign,
    "golden": _cmd_golden,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0,) else 0
    try:
        return _HANDLERS[args.command](args)
    except (ValueError, ThresholdError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except airy.KernelResolutionError as exc:
        sys.stderr.write(f"resolution refusal: {exc}\n")
        return EXIT_RESOLUTION


if __name__ == "__main__":
    sys.exit(main())
