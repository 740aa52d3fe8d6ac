"""``rauzy-lab`` command-line entry point.

Exit codes: 0 on success, 2 on invalid input, 3 when a size cap is hit,
1 for any other library error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (ExperimentConfig, RunManifest, cached, config_hash,
                     manifest_line, parse_config, path_from_text)
from .errors import CapExceeded, RauzyLabError, ValidationError

log = logging.getLogger("rauzy_lab")

EXIT_OK, EXIT_ERROR, EXIT_INVALID, EXIT_CAP = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so run_command owns exit codes."""

    def error(self, message):
        raise ValidationError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value experiment config file")
    p.add_argument("--pair", "--class", dest="pair", help="permutation pair, e.g. ABCD/DCBA")
    p.add_argument("--gamma0", help="gamma0 as a move word or full path text (default: auto)")
    p.add_argument("--seed", type=int)
    p.add_argument("--cap", type=int)
    p.add_argument("--threads", type=int, help="worker cap (library calls are single threaded)")
    p.add_argument("--out", help="write tabular output here (CSV with a manifest header)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rauzy-lab", description="Rauzy-Veech dynamics and congruence covers")
    parser.add_argument("-v", "--verbose", action="store_true")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    def sub(group, names):
        g = groups.add_parser(group)
        s = g.add_subparsers(dest="command", required=True, parser_class=_Parser)
        out = {}
        for name in names:
            out[name] = s.add_parser(name)
            _common(out[name])
        return out

    r = sub("rauzy", ["class", "gamma0"])
    r["class"].add_argument("--edges", action="store_true", help="also print the edge list")
    r["gamma0"].add_argument("--upsilon", choices=["none", "spanning"], default="none")

    v = sub("rvgroup", ["modq", "gap"])
    for p in v.values():
        p.add_argument("--q", type=int)

    f = sub("flow", ["sample", "tails", "cocycle-dist", "correlate"])
    for p in f.values():
        p.add_argument("--n", type=int)
    for name in ("sample", "cocycle-dist", "correlate"):
        f[name].add_argument("--q", type=int)
    for name in ("tails", "cocycle-dist"):
        f[name].add_argument("--input", help="read returns from a 'flow sample' CSV instead of sampling")
    f["correlate"].add_argument("--t", type=float)
    f["correlate"].add_argument("--fiber", choices=["none", "identity"], default="identity")

    t = sub("transfer", ["rpf", "decay"])
    for p in t.values():
        p.add_argument("--grid", type=int)
        p.add_argument("--cutoff", type=int)
    t["rpf"].add_argument("--sigma", type=float)
    t["decay"].add_argument("--q", type=int)
    t["decay"].add_argument("--s", help="sigma,t")
    t["decay"].add_argument("--kmax", type=int)
    t["decay"].add_argument("--subspace", choices=["full", "mean_zero", "new"])

    qr = sub("quasirandom", ["bound", "dims", "orbit", "decouple"])
    for name in ("bound", "dims"):
        qr[name].add_argument("--q", type=int, required=True)
        qr[name].add_argument("--g", type=int, default=1)
    qr["orbit"].add_argument("--p", type=int, required=True)
    qr["orbit"].add_argument("--R", type=int, default=1)
    qr["orbit"].add_argument("--g", type=int, default=1)
    qr["orbit"].add_argument("--x", required=True, help="matrix rows, e.g. '0,1;0,0'")
    qr["decouple"].add_argument("--L", type=int, default=1)
    qr["decouple"].add_argument("--K", type=int, default=2)
    qr["decouple"].add_argument("--q", type=int)
    qr["decouple"].add_argument("--sigma", type=float)
    qr["decouple"].add_argument("--cutoff", type=int, default=12)
    return parser


def _effective_config(args) -> ExperimentConfig:
    cfg = parse_config(Path(args.config).read_text()) if args.config else ExperimentConfig()
    over = {}
    for attr, key in (("pair", "class_spec"), ("gamma0", "gamma0_spec"), ("cap", "cap"),
                      ("threads", "threads"), ("out", "output"), ("n", "n"), ("grid", "grid"),
                      ("kmax", "kmax"), ("subspace", "subspace"), ("t", "t")):
        val = getattr(args, attr, None)
        if val is not None:
            over[key] = val
    if getattr(args, "cutoff", None) is not None and args.group == "transfer":
        over["cutoff"] = args.cutoff
    if getattr(args, "sigma", None) is not None:
        over["sigma"] = args.sigma
    if getattr(args, "q", None) is not None:
        over["q_list"] = [args.q]
    if args.seed is not None:
        over["seeds"] = [args.seed]
    return replace(cfg, **over).validate()


class _Context:
    def __init__(self, args, cfg: ExperimentConfig, stdout):
        self.args, self.cfg, self.stdout = args, cfg, stdout
        self.manifest = RunManifest(config_hash(cfg))
        self.command = f"{args.group} {args.command}"

    @property
    def pair(self):
        from .rauzy import parse_pair
        return parse_pair(self.cfg.class_spec)

    @property
    def q(self) -> int:
        return self.cfg.q_list[0]

    @property
    def seed(self) -> int:
        return self.cfg.seeds[0]

    def say(self, line: str) -> None:
        print(line, file=self.stdout)

    def selection(self):
        from .selection import make_selection
        gamma0 = None
        if self.cfg.gamma0_spec != "auto":
            gamma0 = path_from_text(self.cfg.gamma0_spec, self.pair)
        return make_selection(self.pair, gamma0)

    def write_table(self, header: str, rows) -> None:
        """CSV to --out (with manifest) or to stdout when no file is given."""
        buf = io.StringIO()
        buf.write(manifest_line(self.manifest, self.command) + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header.split(","))
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
        if self.cfg.output:
            Path(self.cfg.output).write_text(buf.getvalue())
        else:
            self.stdout.write(buf.getvalue())


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _bool(x) -> str:
    return "true" if x else "false"


# -- commands ------------------------------------------------------------------

def _rauzy_class(ctx):
    from .rauzy import rauzy_class
    pair = ctx.pair
    cls = cached(f"class:{pair.text()}", lambda: rauzy_class(pair))
    ctx.say(f"vertices={len(cls.vertices)} arrows={len(cls.arrows)}")
    if ctx.args.edges:
        ctx.say(cls.edge_list())
    if ctx.cfg.output:
        ctx.write_table("edge", ([a.text()] for a in cls.arrows))


def _rauzy_gamma0(ctx):
    from .rauzy import contains_subpath, is_neat, rauzy_class
    from .rvgroup import spanning_tree_loops
    from .selection import is_strongly_positive, make_selection
    pair = ctx.pair
    ups0 = spanning_tree_loops(rauzy_class(pair), pair) if ctx.args.upsilon == "spanning" else []
    sel = make_selection(pair, None, ups0)
    g0 = sel.gamma0
    avoid = all(not contains_subpath(u, g0) for u in sel.upsilon)
    ctx.say(f"gamma0={g0.text()}")
    ctx.say(f"length={len(g0)} strongly_positive={_bool(is_strongly_positive(g0))} "
            f"neat={_bool(is_neat(g0))} avoids_upsilon={_bool(avoid)} upsilon={len(sel.upsilon)}")


def _rv_generators(ctx):
    from .rvgroup import rv_generators
    pair = ctx.pair
    return rv_generators(pair)


def _rvgroup_modq(ctx):
    from .rvgroup import mod_q_closure
    spec = _rv_generators(ctx)
    q, cap = ctx.q, ctx.cfg.cap
    size, surj = cached(f"modq:{ctx.pair.text()}:{q}:{cap}",
                        lambda: mod_q_closure(spec.matrices, q, cap))
    ctx.say(f"size={size} surjective={_bool(surj)}")


def _rvgroup_gap(ctx):
    from .rvgroup import cayley_gap
    spec = _rv_generators(ctx)
    res = cayley_gap(spec.matrices, ctx.q, seed=ctx.seed, cap=ctx.cfg.cap)
    ctx.say(f"lambda1={res.lambda1!r} q={res.q} order={res.group_order} "
            f"generators={len(res.generating_set)} iterations={res.iterations} "
            f"residual={res.residual:.3e} method={res.method}")


def _flow_sample(ctx):
    from .cocycle import format_matrix
    from .dynamics import sample_orbit
    sel = ctx.selection()
    # without --q the cocycles stay integral
    q = ctx.args.q
    recs = sample_orbit(ctx.seed, ctx.cfg.n, sel, q, restart=True)
    roofs = np.array([r.roof for r in recs])
    ctx.say(f"returns={len(recs)} mean_roof={float(roofs.mean())!r} min_roof={float(roofs.min())!r} "
            f"max_roof={float(roofs.max())!r} restarts={sum(r.restarted for r in recs)}")
    if ctx.cfg.output:
        ctx.write_table("return_index,roof,cocycle,lambda,length",
                        ((k, r.roof, format_matrix(r.cocycle.entries),
                          ";".join(repr(float(x)) for x in r.endpoint.lam), len(r.path))
                         for k, r in enumerate(recs)))


def _read_sample_csv(path: str):
    """``(roofs, cocycle matrices)`` from a ``flow sample`` CSV."""
    from .cocycle import parse_matrix
    rows = [r for r in csv.reader(line for line in Path(path).read_text().splitlines()
                                  if not line.startswith("#"))]
    if not rows or rows[0][:3] != ["return_index", "roof", "cocycle"]:
        raise ValidationError(f"{path} is not a 'flow sample' CSV")
    roofs = np.array([float(r[1]) for r in rows[1:]])
    mats = [parse_matrix(r[2]) for r in rows[1:]]
    return roofs, mats


def _flow_tails(ctx):
    from .dynamics import roof_tail_stats, sample_orbit
    if ctx.args.input:
        roofs = _read_sample_csv(ctx.args.input)[0]
    else:
        roofs = np.array([r.roof for r in sample_orbit(ctx.seed, ctx.cfg.n, ctx.selection(), restart=True)])
    slope, r2 = roof_tail_stats(roofs)
    ctx.say(f"n={len(roofs)} slope={slope!r} r2={r2!r} min_roof={float(roofs.min())!r}")


def _flow_cocycle_dist(ctx):
    from types import SimpleNamespace

    from .cocycle import SpElement
    from .dynamics import cocycle_distribution
    records = None
    if ctx.args.input:
        _, mats = _read_sample_csv(ctx.args.input)
        g = len(mats[0]) // 2
        records = [SimpleNamespace(cocycle=SpElement(g, ctx.q, m)) for m in mats]
    n = len(records) if records is not None else ctx.cfg.n
    group, counts, chi2, p = cocycle_distribution(ctx.seed, n, ctx.selection(), ctx.q,
                                                  records=records)
    ctx.say(f"q={ctx.q} order={len(group)} n={int(counts.sum())} chi2={chi2!r} p={p!r}")
    if ctx.cfg.output:
        ctx.write_table("element,count", enumerate(counts.tolist()))


def _flow_correlate(ctx):
    from .dynamics import ProductObservable, correlation_estimate, sample_orbit
    from .finite_group import enumerate_group
    from .rvgroup import rv_generators
    sel, q = ctx.selection(), ctx.q
    group = enumerate_group(rv_generators(sel.base).matrices, q, ctx.cfg.cap)
    fiber = None
    if ctx.args.fiber == "identity":
        fiber = -np.ones(len(group)) / len(group)
        fiber[group.identity_index] += 1.0
    u = ProductObservable(lambda lam, s: lam[0], fiber)
    n = ctx.cfg.n
    recs = sample_orbit(ctx.seed, max(4 * n, 1000), sel, q, restart=True)
    corr = correlation_estimate(u, u, ctx.cfg.t, ctx.seed, n, sel, q, group=group, records=recs)
    ctx.say(f"t={ctx.cfg.t!r} q={q} n={n} correlation={corr!r}")


def _transfer_config(ctx):
    from .transfer import make_transfer_config
    return make_transfer_config(ctx.selection(), ctx.cfg.grid, ctx.cfg.cutoff)


def _transfer_rpf(ctx):
    from .transfer import rpf_leading
    tc = _transfer_config(ctx)
    rpf = rpf_leading(tc, ctx.cfg.sigma)
    ctx.say(f"sigma={rpf.sigma!r} lambda={rpf.lambda_sigma!r} residual={rpf.residual:.3e} "
            f"h_min={float(rpf.h_sigma.min())!r} tail_bound={tc.tail_bound()!r} branches={tc.n_branches}")
    if ctx.cfg.output:
        cols = ",".join(f"mu{i}" for i in range(tc.d))
        ctx.write_table(cols + ",h", (list(p) + [h] for p, h in zip(tc.grid.points, rpf.h_sigma)))


def _transfer_decay(ctx):
    from .transfer import rpf_leading, twisted_radius
    sigma, t = ctx.cfg.sigma, 0.0
    if ctx.args.s:
        try:
            parts = [float(x) for x in ctx.args.s.split(",")]
        except ValueError as exc:
            raise ValidationError(f"--s expects 'sigma,t', got {ctx.args.s!r}") from exc
        sigma, t = parts[0], (parts[1] if len(parts) > 1 else 0.0)
    tc = _transfer_config(ctx)
    rpf = rpf_leading(tc, sigma)
    rep = twisted_radius(tc, rpf, ctx.q, ctx.cfg.kmax, ctx.cfg.subspace,
                         s=complex(sigma, t) if t else sigma, seed=ctx.seed, cap=ctx.cfg.cap)
    ctx.write_table("k,norm", ((k + 1, x) for k, x in enumerate(rep.norms)))
    ctx.say(f"rate={rep.rate!r} residual={rep.residual!r} tail_bound={rep.tail_bound!r}")


def _qr_bound(ctx):
    from .quasirandom import min_dim_bound
    b = min_dim_bound(ctx.args.q, ctx.args.g)
    ctx.say(f"q={b.q} g={b.g} bound={b.bound} method={b.method}")


def _qr_dims(ctx):
    from .quasirandom import dixon_characters
    ch = dixon_characters(ctx.args.q, ctx.args.g)
    dims = sorted(ch.dims.tolist())
    new = sorted(ch.dims[ch.new].tolist())
    ctx.say(f"dims={','.join(map(str, dims))}")
    ctx.say(f"new_dims={','.join(map(str, new))} new_min={min(new) if new else 'none'}")


def _qr_orbit(ctx):
    from .cocycle import parse_matrix
    from .quasirandom import LieAlgebraElement, adjoint_orbit_size
    a = ctx.args
    x = LieAlgebraElement(a.p, a.R, parse_matrix(a.x))
    if x.g != a.g:
        raise ValidationError(f"--x has genus {x.g}, expected {a.g}")
    ctx.say(f"orbit={adjoint_orbit_size(x, ctx.cfg.cap)}")


def _qr_decouple(ctx):
    from .quasirandom import decoupling_check
    from .transfer import make_transfer_config
    sel = ctx.selection()
    tc = make_transfer_config(sel, 2, ctx.args.cutoff)
    rep = decoupling_check(tc.branches, ctx.cfg.sigma, ctx.args.L, ctx.args.K, ctx.q)
    ctx.say(f"L={rep.L} K={rep.K} q={rep.q} paths={rep.n_paths} dominated={_bool(rep.dominated)} "
            f"c={rep.c!r} B={rep.B!r} block_rate={rep.block_rate!r} rate={rep.rate!r}")


COMMANDS = {
    ("rauzy", "class"): _rauzy_class,
    ("rauzy", "gamma0"): _rauzy_gamma0,
    ("rvgroup", "modq"): _rvgroup_modq,
    ("rvgroup", "gap"): _rvgroup_gap,
    ("flow", "sample"): _flow_sample,
    ("flow", "tails"): _flow_tails,
    ("flow", "cocycle-dist"): _flow_cocycle_dist,
    ("flow", "correlate"): _flow_correlate,
    ("transfer", "rpf"): _transfer_rpf,
    ("transfer", "decay"): _transfer_decay,
    ("quasirandom", "bound"): _qr_bound,
    ("quasirandom", "dims"): _qr_dims,
    ("quasirandom", "orbit"): _qr_orbit,
    ("quasirandom", "decouple"): _qr_decouple,
}


def run_command(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        cfg = _effective_config(args)
        ctx = _Context(args, cfg, stdout)
        COMMANDS[(args.group, args.command)](ctx)
    except SystemExit as exc:          # --help
        return int(exc.code or 0)
    except CapExceeded as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_CAP
    except (ValidationError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_INVALID
    except RauzyLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_ERROR
    return EXIT_OK


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
