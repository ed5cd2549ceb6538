"""Command-line interface: ``context-fuse {toy,fuse,learn,bn,bench}``.

Exit codes: 0 success, 1 input or validation error, 2 finished but a chain
missed the Geweke convergence rule.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import itertools
import json
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bayesnet import (
    build_graph,
    conditional_cooccurrence,
    load_graph,
    orient_edges,
    rank_completions,
    save_graph,
    threshold_graph,
    to_dot,
)
from .exceptions import ContextFuseError, InvalidInput, NotConvergedWarning
from .hbm import JointDensityTarget, posterior_class_probabilities
from .hyperprior import HIGH_CONFIDENCE, context_posterior, fuse_with_hyperprior
from .learning import estimate_context, load_coco_annotations, load_native_corpus, read_json
from .mcmc import SamplerConfig, benchmark, write_chain_csv
from .scenarios import BLURRY, TOY_SUBCASES, TRIOZAP, toy_context, toy_scene
from .scene import ClassCatalog, ContextModel, Scene, context_from_dict, make_scene, save_context

DATA_ENV = "CONTEXT_FUSE_DATA_DIR"
PACKAGE_DATA = Path(__file__).parent / "data"

EXIT_OK, EXIT_INPUT, EXIT_WARN = 0, 1, 2


def data_dir() -> Path:
    return Path(os.environ.get(DATA_ENV, PACKAGE_DATA))


def resolve_path(path: str | os.PathLike, base: Path | None = None) -> Path:
    """Find ``path`` as given, relative to ``base``, or under the data directory."""
    p = Path(path)
    if p.is_absolute() or p.exists():
        return p
    for root in (base, data_dir()):
        if root is not None and (root / p).exists():
            return root / p
    return p


@dataclass
class ScenarioFile:
    catalog: ClassCatalog
    contexts: list[ContextModel]
    scene: Scene
    query: tuple[int, int]  # (class index, object index)
    sampler: dict
    prior_weights: list | None = None
    mc_samples: int = 50_000
    threshold: float = HIGH_CONFIDENCE


def _load_corpus(path, fmt: str, supercategory=None):
    if fmt == "coco":
        return load_coco_annotations(path, supercategory)
    if supercategory is not None:
        raise InvalidInput("--supercategory needs a COCO corpus")
    return load_native_corpus(path)


def load_scenario(path) -> ScenarioFile:
    """Parse a scenario file; contexts may be inline or learned from a corpus."""
    path = resolve_path(path)
    data = read_json(path)
    try:
        classes = list(data["classes"])
        catalog = ClassCatalog(tuple(classes))
        contexts = []
        for entry in data["contexts"]:
            if "corpus" in entry:
                corpus = _load_corpus(resolve_path(entry["corpus"], path.parent),
                                      entry.get("format", "native"), entry.get("supercategory"))
                ctx = estimate_context(corpus, entry.get("name", Path(entry["corpus"]).stem))
            else:
                ctx = context_from_dict(entry)
            if ctx.catalog != catalog:
                raise InvalidInput(f"context {ctx.name!r} classes differ from the scenario's")
            contexts.append(ctx)
        if not contexts:
            raise InvalidInput("scenario lists no contexts")
        scene = make_scene(classes, [o["probs"] for o in data["scene"]],
                           [o["uncertainty"] for o in data["scene"]])
        q = data["query"]
        obj = int(q["object"])
        if not 0 <= obj < scene.n_objects:
            raise InvalidInput(f"query object {obj} out of range")
        hyper = data.get("hyperprior", {})
        return ScenarioFile(
            catalog=catalog,
            contexts=contexts,
            scene=scene,
            query=(catalog.index(q["class"]), obj),
            sampler=dict(data.get("sampler", {})),
            prior_weights=hyper.get("prior_weights"),
            mc_samples=int(hyper.get("mc_samples", 50_000)),
            threshold=float(hyper.get("threshold", HIGH_CONFIDENCE)),
        )
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"{path}: malformed scenario ({exc!r})") from None


def sampler_config(args, overrides: dict | None = None) -> SamplerConfig:
    cfg = dict(overrides or {})
    for flag in ("iterations", "burn_in", "thin", "eta_step", "c_step", "geweke_threshold"):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[flag] = value
    cfg["seed"] = args.seed
    try:
        return SamplerConfig(**cfg)
    except TypeError as exc:
        raise InvalidInput(f"bad sampler settings: {exc}") from None


def _header(args, title: str) -> list[str]:
    lines = [f"# {title}"]
    if not args.no_timestamps:
        lines.append(f"# generated {_dt.datetime.now().isoformat(timespec='seconds')}"
                     f" by context-fuse {__version__}")
    return lines


def _matrix_table(catalog: ClassCatalog, probs: np.ndarray) -> list[str]:
    names = catalog.names
    width = max(8, *(len(n) for n in names))
    lines = ["object  " + "  ".join(f"{n:>{width}}" for n in names)]
    for j in range(probs.shape[1]):
        lines.append(f"{j:>6}  " + "  ".join(f"{v:>{width}.4f}" for v in probs[:, j]))
    return lines


def _diag_lines(name: str, diag) -> list[str]:
    scores = ", ".join(f"{s:.3g}" for s in diag.geweke_scores)
    return [
        f"context {name}: acceptance {diag.acceptance_rate:.3f}, samples {diag.n_samples}, "
        f"converged {'yes' if diag.converged else 'no'} (tracked {diag.tracked})",
        f"  geweke: [{scores}]",
    ]


def _emit(args, lines: list[str], payload: dict) -> None:
    if args.json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        print("\n".join(lines))


def cmd_toy(args) -> int:
    config = sampler_config(args)
    context = toy_context(args.subcase)
    scene = toy_scene()
    probs, diag = posterior_class_probabilities(scene, context, config, query=(TRIOZAP, BLURRY))
    if args.chain_csv and diag.chain is not None:
        write_chain_csv(diag.chain, args.chain_csv, scene.catalog.names)
    p = float(probs[TRIOZAP, BLURRY])
    lines = _header(args, f"toy scenario, subcase {args.subcase}")
    lines.append(f"P(TRIOZAP | blurry object) = {p:.4f}")
    lines += _matrix_table(scene.catalog, probs)
    if context is not None:
        lines += _diag_lines(context.name, diag)
    _emit(args, lines, {
        "subcase": args.subcase,
        "p_triozap": p,
        "classes": list(scene.catalog.names),
        "posterior": probs.T.tolist(),
        "acceptance_rate": diag.acceptance_rate,
        "geweke_scores": diag.geweke_scores.tolist(),
        "converged": bool(diag.converged),
    })
    return EXIT_OK if diag.converged else EXIT_WARN


def cmd_fuse(args) -> int:
    sc = load_scenario(args.scenario)
    config = sampler_config(args, sc.sampler)
    cls, obj = sc.query
    label = f"P({sc.catalog.names[cls]} | object {obj})"
    lines = _header(args, f"fusion of {args.scenario}")
    payload = {"classes": list(sc.catalog.names), "query": {"object": obj,
               "class": sc.catalog.names[cls]}}
    if len(sc.contexts) == 1:
        probs, diag = posterior_class_probabilities(sc.scene, sc.contexts[0], config, sc.query)
        if args.chain_csv:
            write_chain_csv(diag.chain, args.chain_csv, sc.catalog.names)
        diags = [(sc.contexts[0].name, diag)]
    else:
        weights = context_posterior(sc.scene, sc.contexts, sc.prior_weights, sc.mc_samples,
                                    args.seed, sc.threshold)
        probs, comps = fuse_with_hyperprior(sc.scene, sc.contexts, weights, config, sc.query,
                                            n_jobs=args.jobs, return_components=True)
        diags = [(c.name, comp[1]) for c, comp in zip(sc.contexts, comps) if comp is not None]
        lines.append("context weights:")
        lines += [f"  {c.name:<12} {w:.4f}" for c, w in zip(sc.contexts, weights)]
        payload["context_weights"] = {c.name: float(w) for c, w in zip(sc.contexts, weights)}
    lines.append(f"{label} = {probs[cls, obj]:.4f}")
    lines += _matrix_table(sc.catalog, probs)
    for name, diag in diags:
        lines += _diag_lines(name, diag)
    payload.update({
        "posterior": probs.T.tolist(),
        "query_probability": float(probs[cls, obj]),
        "diagnostics": {name: {"acceptance_rate": d.acceptance_rate,
                               "geweke_scores": d.geweke_scores.tolist(),
                               "converged": bool(d.converged)} for name, d in diags},
    })
    _emit(args, lines, payload)
    return EXIT_OK if all(d.converged for _, d in diags) else EXIT_WARN


def cmd_learn(args) -> int:
    corpus = _load_corpus(resolve_path(args.corpus), "coco" if args.coco else "native",
                          args.supercategory)
    name = args.name or args.supercategory or Path(args.corpus).stem
    ctx = estimate_context(corpus, name)
    save_context(ctx, args.out)
    lines = _header(args, f"context {name!r} from {args.corpus}")
    lines.append(f"images {len(corpus)}, classes {ctx.n_classes}, written to {args.out}")
    lines += [f"  {n:<20} mu={m:.6f}" for n, m in zip(ctx.catalog.names, ctx.mu)]
    _emit(args, lines, {"name": name, "images": len(corpus), "out": str(args.out),
                        "mu": dict(zip(ctx.catalog.names, ctx.mu.tolist()))})
    return EXIT_OK


def _write_graph(graph, args) -> None:
    save_graph(graph, args.out)
    if args.dot:
        Path(args.dot).write_text(to_dot(graph))


def cmd_bn(args) -> int:
    lines = _header(args, f"co-occurrence graph: {args.bn_command}")
    if args.bn_command == "build":
        corpus = _load_corpus(resolve_path(args.corpus), "coco" if args.coco else "native",
                              args.supercategory)
        graph = threshold_graph(build_graph(corpus), args.tau)
        _write_graph(graph, args)
        payload = {"images": graph.total_images, "edges": len(graph.edges()), "out": args.out}
        lines.append(f"images {graph.total_images}, classes {len(graph.catalog)}, "
                     f"edges {len(graph.edges())} (tau {args.tau}), written to {args.out}")
    elif args.bn_command == "threshold":
        graph = threshold_graph(load_graph(resolve_path(args.graph)), args.tau)
        _write_graph(graph, args)
        payload = {"edges": len(graph.edges()), "out": args.out,
                   "oriented": [list(e) for e in orient_edges(graph)]}
        lines.append(f"edges {len(graph.edges())} after tau {args.tau}, written to {args.out}")
    elif args.bn_command == "query":
        graph = load_graph(resolve_path(args.graph))
        p = conditional_cooccurrence(graph, args.evidence, args.query)
        payload = {"evidence": args.evidence, "query": args.query, "probability": p}
        lines.append(f"P({args.query} | {args.evidence}) = {p:.6f}")
    else:
        graph = load_graph(resolve_path(args.graph))
        ranked = rank_completions(graph, args.evidence, args.top_k)
        payload = {"evidence": args.evidence,
                   "ranking": [{"class": c, "probability": p} for c, p in ranked]}
        width = max([6] + [len(c) for c, _ in ranked])
        lines.append(f"{'object':<{width}}  probability of co-occurrence")
        lines += [f"{c:<{width}}  {p:.3f}" for c, p in ranked]
    _emit(args, lines, payload)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.scenario:
        sc = load_scenario(args.scenario)
        scene, context, track = sc.scene, sc.contexts[0], sc.query
        base = sampler_config(args, sc.sampler)
    else:
        scene, context, track = toy_scene(), toy_context(args.toy), (TRIOZAP, BLURRY)
        if context is None:
            raise InvalidInput("the sensor-alone subcase runs no sampler")
        base = sampler_config(args)
    eta_steps = args.eta_steps or [base.eta_step]
    c_steps = args.c_steps or [base.c_step]
    configs, labels = [], []
    for e, c in itertools.product(eta_steps, c_steps):
        configs.append(base.replace(eta_step=e, c_step=c))
        labels.append(f"mh eta={e:g} c={c:g}")
    rows = benchmark(JointDensityTarget(scene, context), configs, track=track, labels=labels,
                     check_every=args.check_every)
    lines = _header(args, f"sampler benchmark, context {context.name}")
    width = max(len(l) for l in labels)
    lines.append(f"{'method':<{width}}  {'time/iter':>10}  {'iter to converge':>16}  "
                 f"{'estimate':>8}  {'accept':>6}")
    for r in rows:
        t = "-" if args.no_timestamps else f"{r.us_per_iter:.1f} us"
        conv = str(r.iterations_to_converge) if r.converged else "not reached"
        lines.append(f"{r.label:<{width}}  {t:>10}  {conv:>16}  {r.estimate:>8.4f}  "
                     f"{r.acceptance_rate:>6.3f}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "iterations", "us_per_iter", "iterations_to_converge",
                        "estimate", "acceptance_rate"])
            for r in rows:
                w.writerow([r.label, r.iterations, f"{r.us_per_iter:.3f}",
                            r.iterations_to_converge if r.converged else "",
                            repr(r.estimate), repr(r.acceptance_rate)])
    _emit(args, lines, {"rows": [{
        "method": r.label, "iterations": r.iterations,
        "us_per_iter": None if args.no_timestamps else r.us_per_iter,
        "iterations_to_converge": r.iterations_to_converge,
        "estimate": r.estimate, "acceptance_rate": r.acceptance_rate} for r in rows]})
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--no-timestamps", action="store_true",
                   help="omit timestamps and wall-clock timings")


def _add_sampler(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--thin", type=int)
    p.add_argument("--eta-step", type=float)
    p.add_argument("--c-step", type=float)
    p.add_argument("--geweke-threshold", type=float)


def _add_corpus(p: argparse.ArgumentParser) -> None:
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--coco", action="store_true", help="corpus is a COCO instances file")
    fmt.add_argument("--native", action="store_true", help="corpus is a JSON list of lists (default)")
    p.add_argument("--supercategory", help="keep only images with this COCO super-category")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="context-fuse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy", help="built-in missile-defense scenario")
    p.add_argument("subcase", choices=TOY_SUBCASES)
    p.add_argument("--chain-csv", help="dump the chain to this CSV file")
    _add_common(p)
    _add_sampler(p)
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("fuse", help="fuse a scenario file's readings with its contexts")
    p.add_argument("scenario")
    p.add_argument("--chain-csv", help="dump the chain (single-context scenarios)")
    p.add_argument("--jobs", type=int, default=1, help="parallel per-context chains")
    _add_common(p)
    _add_sampler(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("learn", help="learn a context model from a labeled corpus")
    p.add_argument("corpus")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--name")
    _add_corpus(p)
    _add_common(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("bn", help="co-occurrence graph commands")
    bn = p.add_subparsers(dest="bn_command", required=True)
    q = bn.add_parser("build")
    q.add_argument("corpus")
    q.add_argument("-o", "--out", required=True)
    q.add_argument("--dot")
    q.add_argument("--tau", type=int, default=0)
    _add_corpus(q)
    _add_common(q)
    q = bn.add_parser("threshold")
    q.add_argument("graph")
    q.add_argument("--tau", type=int, required=True)
    q.add_argument("-o", "--out", required=True)
    q.add_argument("--dot")
    _add_common(q)
    q = bn.add_parser("query")
    q.add_argument("graph")
    q.add_argument("--evidence", required=True)
    q.add_argument("--query", required=True)
    _add_common(q)
    q = bn.add_parser("rank")
    q.add_argument("graph")
    q.add_argument("--evidence", required=True)
    q.add_argument("--top-k", type=int)
    _add_common(q)
    p.set_defaults(func=cmd_bn)

    p = sub.add_parser("bench", help="time the sampler and find iterations to convergence")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--scenario")
    src.add_argument("--toy", choices=TOY_SUBCASES[1:], default="ohio-full")
    p.add_argument("--eta-steps", type=float, nargs="+")
    p.add_argument("--c-steps", type=float, nargs="+")
    p.add_argument("--check-every", type=int, default=1000)
    p.add_argument("--csv")
    _add_common(p)
    _add_sampler(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NotConvergedWarning)
            return args.func(args)
    except ContextFuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
