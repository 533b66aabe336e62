"""Command-line front end.

Subcommands: ``gen`` (orders and the honeycomb quotient), ``query``
(order-theoretic queries), ``check`` (law-check suites), ``run`` (automaton
evolution), ``export`` (DOT / CSV).  Exit codes: 0 on success with no
violations, 1 when a check finds violations, 2 on usage or config errors.
All sampling is seeded, so outputs are deterministic for a given seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import process as P
from .cca import (
    PartitionedCCAConfig,
    build_cca,
    build_reversal,
    cca_config_from_json,
    check_invariance,
    check_symmetry_action,
    dirac_scattering,
    identity_invariance,
    lattice_slice,
    ring_object,
    ring_site_marginals,
    ring_step_morphism,
    run_single_particle,
    sample_separated_quads,
    sample_words,
    sample_zigzag_chain_pairs,
    site_probabilities,
    translation_action,
    window_morphisms,
    window_slices,
)
from .errors import BadParams, CausalFieldsError, NotInvertible, NotUnitary
from .field_theory import (
    check_environment,
    check_functoriality,
    check_monoidality,
    check_reversal,
)
from .order import (
    DiamondLattice,
    Window,
    build_explicit,
    causal_paths,
    diamond,
    event_id,
    future,
    future_domain,
    lattice,
    materialize,
    order_from_json,
    order_to_dot,
    order_to_json,
    parse_lattice_event,
    past,
    past_domain,
)
from .report import Report
from .slices import (
    all_slices_category,
    enumerate_slices,
    foliation_category,
    is_cauchy,
    maximal_slices,
    validate_foliation,
    validate_slice_category,
)


_RANGE = __import__("re").compile(r"^-?\d+(\.\.|:)-?\d+$")


def _parse_range(text: str) -> tuple[int, int]:
    sep = ".." if ".." in text else ":"
    lo, _, hi = text.partition(sep)
    return int(lo), int(hi)


def _rewrite_ranges(argv: list[str]) -> list[str]:
    """Join range values onto their flags so argparse does not mistake a
    leading minus sign for an option (supports the "--x -3..3" form)."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in ("--x", "--t", "--window") and i + 1 < len(argv) and _RANGE.match(
            argv[i + 1].split(",")[0]
        ):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def _emit(obj, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# gen
# ---------------------------------------------------------------------------

def _gen_diamond(args) -> int:
    t0, t1 = _parse_range(args.t)
    lo, hi = _parse_range(args.x)
    d = args.d
    win = Window(t0, t1, (lo,) * d, (hi,) * d)
    omega = materialize(lattice(d), win)
    _emit(order_to_json(omega), args.out)
    return 0


def _gen_honeycomb(args) -> int:
    t0, t1 = _parse_range(args.t)
    lo, hi = _parse_range(args.x)
    win = Window(t0, t1, (lo,), (hi,))
    dia = materialize(lattice(1), win)
    events, edges, mapping = [], [], []
    for t, xs in dia.events:
        for layer in ("a", "b"):
            events.append(f"{t},{xs[0]},{layer}")
            mapping.append([f"{t},{xs[0]},{layer}", event_id((t, xs))])
        edges.append((f"{t},{xs[0]},a", f"{t},{xs[0]},b"))
    for (t, xs), (s, ys) in dia.hasse_edges():
        edges.append((f"{t},{xs[0]},b", f"{s},{ys[0]},a"))
    hone = build_explicit(events, edges)
    _emit(order_to_json(hone), args.out)
    blob = {
        "dom": order_to_json(hone),
        "cod": order_to_json(dia),
        "map": sorted(mapping),
    }
    _emit(blob, args.morphism_out)
    return 0


def _gen_file(args) -> int:
    omega = order_from_json(_load_json(args.infile))
    if isinstance(omega, DiamondLattice):
        _emit({"lattice": {"d": omega.d}}, args.out)
    else:
        _emit(order_to_json(omega), args.out)
    return 0


# ---------------------------------------------------------------------------
# query
# ---------------------------------------------------------------------------

def _load_order(args):
    omega = order_from_json(_load_json(args.order))
    if isinstance(omega, DiamondLattice) and getattr(args, "window", None):
        t_rng, x_rng = args.window.split(",", 1)
        t0, t1 = _parse_range(t_rng)
        lo, hi = _parse_range(x_rng)
        return omega, Window(t0, t1, (lo,) * omega.d, (hi,) * omega.d)
    return omega, None


def _parse_events(omega, text: str) -> frozenset:
    ids = [e for e in text.split(";") if e]
    if isinstance(omega, DiamondLattice):
        return frozenset(parse_lattice_event(e) for e in ids)
    return frozenset(ids)


def _event_list(events) -> list:
    return sorted(event_id(e) for e in events)


def _cmd_query(args) -> int:
    omega, win = _load_order(args)

    def one_event(text):
        return next(iter(_parse_events(omega, text)))

    what = args.what
    if what in ("future", "past", "dplus", "dminus", "cauchy"):
        a = _parse_events(omega, args.events)
        if what == "future":
            out = _event_list(future(omega, a, win))
        elif what == "past":
            out = _event_list(past(omega, a, win))
        elif what == "dplus":
            out = _event_list(future_domain(omega, a))
        elif what == "dminus":
            out = _event_list(past_domain(omega, a))
        else:
            out = bool(is_cauchy(omega, a, win))
        _emit({what: out}, args.out)
        return 0
    if what in ("diamond", "paths") and not (args.src and args.dst):
        raise BadParams(f"query {what} needs --from and --to")
    if what == "diamond":
        box = diamond(omega, one_event(args.src), one_event(args.dst))
        _emit({"diamond": _event_list(box)}, args.out)
        return 0
    if what == "paths":
        paths = [
            [event_id(e) for e in p]
            for p in causal_paths(omega, one_event(args.src), one_event(args.dst))
        ]
        _emit({"paths": sorted(paths)}, args.out)
        return 0
    if what == "slices":
        it = maximal_slices(omega, win) if args.maximal else enumerate_slices(omega, win)
        _emit({"slices": sorted(_event_list(s) for s in it)}, args.out)
        return 0
    raise BadParams(f"unknown query {what!r}")


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def _load_cca(args) -> PartitionedCCAConfig:
    blob = _load_json(args.cca)
    if getattr(args, "m", None) is not None or getattr(args, "eps", None) is not None:
        m = args.m if args.m is not None else 0.0
        eps = args.eps if args.eps is not None else 1.0
        blob = dict(blob)
        blob["U"] = P.matrix_to_json(dirac_scattering(m, eps))
        blob.pop("U_inv", None)
    return cca_config_from_json(blob)


def _sampled_morphisms(rng, count):
    pairs = window_morphisms(0, 3, -4, 6, 3)
    idx = rng.choice(len(pairs), size=min(count, len(pairs)), replace=False)
    return [pairs[i] for i in idx]


def _check_cca(args) -> Report:
    config = _load_cca(args)
    if config.d != 1:
        raise BadParams("the check suites run on d=1 configurations")
    rng = np.random.default_rng(args.seed)
    theory = build_cca(config)
    target = args.target
    if target == "functoriality":
        pairs = _sampled_morphisms(rng, max(args.samples, 8))
        by_source: dict = {}
        for s, g in pairs:
            by_source.setdefault(s, []).append(g)
        triples = [(s, g, d) for s, g in pairs for d in by_source.get(g, [])]
        if len(triples) > args.samples:
            keep = rng.choice(len(triples), size=args.samples, replace=False)
            triples = [triples[i] for i in keep]
        return check_functoriality(theory, triples, tol=args.tol)
    if target == "monoidality":
        quads = sample_separated_quads(rng, args.samples)
        return check_monoidality(theory, quads, tol=args.tol)
    if target == "nosignalling":
        pairs = _sampled_morphisms(rng, args.samples)
        products = [(s, g) for s, _, g, _ in sample_separated_quads(rng, max(args.samples // 2, 4))]
        return check_environment(theory, pairs, products, tol=args.tol)
    if target == "reversal":
        report = Report("reversal")
        try:
            reversal = build_reversal(config)
        except (NotInvertible, NotUnitary) as exc:
            report.count()
            report.record({"reason": f"no reversal: {exc}"}, float("inf"))
            return report
        pairs = sample_zigzag_chain_pairs(rng, args.samples)
        return check_reversal(theory, reversal, pairs, tol=args.tol)
    if target == "symmetry":
        action = translation_action(config.d)
        slices = window_slices(0, -4, 6, 3) + window_slices(1, -4, 6, 3)
        idx = rng.choice(len(slices), size=min(16, len(slices)), replace=False)
        morphisms = _sampled_morphisms(rng, min(args.samples, 32))
        pairs = [((0, (0,)), (1, (1,))), ((0, (0,)), (0, (2,))), ((0, (0,)), (3, (1,)))]
        words = sample_words(action, rng, 6, max_len=3)
        return check_symmetry_action(
            action, theory.category.order, theory.category,
            [slices[i] for i in idx], morphisms, pairs, words,
        )
    if target == "invariance":
        action = translation_action(config.d)
        alpha = identity_invariance(theory)
        words = sample_words(action, rng, 4, max_len=3)
        morphisms = _sampled_morphisms(rng, min(args.samples, 24))
        word_pairs = [(words[0], words[-1])]
        slices = [lattice_slice(0, [0]), lattice_slice(0, [0, 2])]
        return check_invariance(
            theory, action, alpha, words, morphisms,
            word_pairs=word_pairs, slice_samples=slices, tol=args.tol,
        )
    raise BadParams(f"unknown check target {args.target!r}")


def _cmd_check(args) -> int:
    if args.target in ("foliation", "category"):
        omega = order_from_json(_load_json(args.order))
        if args.target == "foliation":
            leaves = [frozenset(l) for l in json.loads(args.leaves)]
            report = validate_foliation(omega, leaves)
        else:
            if isinstance(omega, DiamondLattice):
                from .cca import cone_pair_witness, foliation_category_of_lattice

                cat = foliation_category_of_lattice(omega.d)
                pairs = [
                    ((0, (0,) * omega.d), (t, (x,) + (0,) * (omega.d - 1)))
                    for t in range(4)
                    for x in range(-t, t + 1, 2)
                ]
                report = validate_slice_category(
                    cat,
                    pair_witnesses=cone_pair_witness(omega.d),
                    event_pairs=pairs,
                )
            elif args.leaves:
                leaves = [frozenset(l) for l in json.loads(args.leaves)]
                cat = foliation_category(omega, leaves)
                report = validate_slice_category(cat)
            else:
                cat = all_slices_category(omega)
                report = validate_slice_category(cat)
    else:
        report = _check_cca(args)
    _emit(report.to_json(), args.out)
    return 0 if report.ok else 1


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _initial_single_particle(args, sites: int) -> np.ndarray:
    if args.initial:
        blob = _load_json(args.initial)
        comps = np.array(
            [[complex(re, im) for re, im in row] for row in blob["components"]]
        )
        if comps.shape != (2, sites):
            raise BadParams(f"initial components must be 2x{sites}")
        return comps
    psi = np.zeros((2, sites), dtype=complex)
    psi[0, sites // 2] = 1.0
    return psi


def _cmd_run(args) -> int:
    config = _load_cca(args)
    sites = args.sites
    records = []
    if args.mode == "single-particle":
        if config.backend != P.QUANTUM or config.d != 1 or config.cell_dim != 2:
            raise BadParams("single-particle mode needs the quantum d=1 qubit-cell automaton")
        theta_coin = effective_one_particle_block(config)
        psi = _initial_single_particle(args, sites)
        states = run_single_particle(psi, theta_coin, args.steps)
        norm0 = float(np.linalg.norm(states[0]) ** 2)
        drift = 0.0
        for k, st in enumerate(states):
            probs = site_probabilities(st)
            norm = float(np.linalg.norm(st) ** 2)
            drift = max(drift, abs(norm - norm0))
            records.append(
                {
                    "t": k,
                    "slice": {"t": k, "sites": sites},
                    "norm": norm,
                    "marginals": [float(p) for p in probs],
                    "components": [
                        [[float(a.real), float(a.imag)] for a in row] for row in st
                    ],
                }
            )
    else:
        obj = ring_object(config, sites)
        if obj.dim > 4096:
            raise BadParams("density mode is limited to small rings")
        step = ring_step_morphism(config, sites)
        state = _initial_density(args, config, obj)
        drift = 0.0
        norm0 = state.norm
        for k in range(args.steps + 1):
            marg = ring_site_marginals(config, state, sites)
            drift = max(drift, abs(state.norm - norm0))
            rec = {
                "t": k,
                "slice": {"t": k, "sites": sites},
                "norm": state.norm,
                "marginals": [float(p) for p in marg],
            }
            if args.dump_states:
                rec["state"] = P.matrix_to_json(np.asarray(state.data))
                rec["factors"] = list(state.obj.factors)
            records.append(rec)
            if k < args.steps:
                state = P.apply(step, state)
    out = {
        "config": cca_json_echo(config),
        "steps": args.steps,
        "sites": sites,
        "mode": args.mode,
        "trace_drift": drift,
        "per_step": records,
    }
    _emit(out, args.out)
    if args.csv:
        _write_marginal_csv(out, args.csv)
    return 0


def effective_one_particle_block(config: PartitionedCCAConfig) -> np.ndarray:
    from .cca import effective_scattering

    ueff = effective_scattering(config)
    return ueff[np.ix_((2, 1), (2, 1))]


def cca_json_echo(config: PartitionedCCAConfig) -> dict:
    from .cca import cca_config_to_json

    return cca_config_to_json(config)


def _initial_density(args, config, obj) -> P.ProcState:
    if args.initial:
        blob = _load_json(args.initial)
        m = P.matrix_from_json(blob)
        if config.backend == P.CLASSICAL:
            return P.state(obj, m.real.reshape(-1))
        return P.state(obj, m)
    if config.backend == P.CLASSICAL:
        p = np.zeros(obj.dim)
        p[1 << (len(obj.factors) - 1)] = 1.0  # excitation at site 0, first factor
        return P.state(obj, p)
    vec = np.zeros(obj.dim, dtype=complex)
    vec[1 << (len(obj.factors) - 1)] = 1.0
    return P.state(obj, np.outer(vec, vec.conj()))


def _write_marginal_csv(run_blob: dict, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "site", "probability"])
        for rec in run_blob["per_step"]:
            for site, p in enumerate(rec["marginals"]):
                writer.writerow([rec["t"], site, f"{p:.12g}"])


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def _cmd_export(args) -> int:
    if args.format == "dot":
        omega = order_from_json(_load_json(args.order))
        if isinstance(omega, DiamondLattice):
            raise BadParams("export dot needs a finite order (materialise a window first)")
        text = order_to_dot(omega)
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    if args.format == "csv":
        _write_marginal_csv(_load_json(args.run), args.out or "/dev/stdout")
        return 0
    raise BadParams(f"unknown export format {args.format!r}")


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causal-fields",
        description="causal orders, slice categories, field theories, cellular automata",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate causal orders")
    gen_sub = gen.add_subparsers(dest="kind", required=True)
    g_d = gen_sub.add_parser("diamond", help="materialise a diamond-lattice window")
    g_d.add_argument("--d", type=int, default=1)
    g_d.add_argument("--t", required=True, help="time range t0:t1")
    g_d.add_argument("--x", required=True, help="coordinate range lo:hi")
    g_d.add_argument("--out")
    g_d.set_defaults(fn=_gen_diamond)
    g_h = gen_sub.add_parser("honeycomb", help="brick-wall honeycomb window + collapse")
    g_h.add_argument("--t", required=True)
    g_h.add_argument("--x", required=True)
    g_h.add_argument("--out")
    g_h.add_argument("--morphism-out", dest="morphism_out")
    g_h.set_defaults(fn=_gen_honeycomb)
    g_f = gen_sub.add_parser("file", help="validate and re-emit an order file")
    g_f.add_argument("--in", dest="infile", required=True)
    g_f.add_argument("--out")
    g_f.set_defaults(fn=_gen_file)

    query = sub.add_parser("query", help="order-theoretic queries")
    query.add_argument("what", choices=[
        "future", "past", "dplus", "dminus", "diamond", "paths", "slices", "cauchy",
    ])
    query.add_argument("--order", required=True)
    query.add_argument("--events", default="", help="semicolon-separated event ids")
    query.add_argument("--from", dest="src")
    query.add_argument("--to", dest="dst")
    query.add_argument("--maximal", action="store_true")
    query.add_argument("--window", help="lattice window 't0:t1,lo:hi'")
    query.add_argument("--out")
    query.set_defaults(fn=_cmd_query)

    check = sub.add_parser("check", help="run a law-check suite")
    check.add_argument("target", choices=[
        "functoriality", "monoidality", "nosignalling", "reversal",
        "symmetry", "invariance", "foliation", "category",
    ])
    check.add_argument("--cca")
    check.add_argument("--order")
    check.add_argument("--leaves")
    check.add_argument("--samples", type=int, default=50)
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--tol", type=float, default=1e-10)
    check.add_argument("--m", type=float)
    check.add_argument("--eps", type=float)
    check.add_argument("--out")
    check.set_defaults(fn=_cmd_check)

    run = sub.add_parser("run", help="evolve an automaton on a ring")
    run.add_argument("--cca", required=True)
    run.add_argument("--steps", type=int, required=True)
    run.add_argument("--sites", type=int, default=64)
    run.add_argument("--mode", choices=["single-particle", "density"],
                     default="single-particle")
    run.add_argument("--initial")
    run.add_argument("--m", type=float)
    run.add_argument("--eps", type=float)
    run.add_argument("--dump-states", action="store_true", dest="dump_states")
    run.add_argument("--out")
    run.add_argument("--csv")
    run.set_defaults(fn=_cmd_run)

    export = sub.add_parser("export", help="export DOT or CSV artifacts")
    export.add_argument("format", choices=["dot", "csv"])
    export.add_argument("--order")
    export.add_argument("--run")
    export.add_argument("--out")
    export.set_defaults(fn=_cmd_export)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(_rewrite_ranges(list(sys.argv[1:] if argv is None else argv)))
    try:
        return args.fn(args)
    except CausalFieldsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
