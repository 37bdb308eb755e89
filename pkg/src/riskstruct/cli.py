"""Command-line front end.

Commands: build, analyze, regions, plan, reduce, diff, export-dot, validate.
All output is deterministic for a given input; the environment variable
RISKSTRUCT_SEED is reserved but unused since every algorithm is
deterministic.

Exit codes: 0 success (diff: identical), 1 I/O failure, 2 invalid input or
usage, 3 (diff only) differences found.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from typing import Optional, Sequence

from .core import RiskModelError, RiskStructure, embed_state, parse_state
from .analysis import (
    BandThresholds,
    assign_regions,
    mishap_reach_probability,
    risk_priority,
)
from .construct import CatalogInvalid, construct_rs
from .plan import is_mitigation_monotonous, plan_mitigations
from .reduce import collapse_safe_chains, drop_irrelevant, quotient, EQUIVALENCES
from .serialize import (
    fmt_prob,
    load_catalog,
    load_drop_rules,
    load_model,
    model_to_json,
    save_model,
    to_dot,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_DIFFERENT = 3


def _parse_bands(text: str) -> tuple[float, float]:
    values = {}
    for part in text.split(","):
        key, sep, val = part.partition("=")
        if not sep or key not in ("l", "h"):
            raise argparse.ArgumentTypeError(
                f"bands must look like l=0.01,h=0.1, got {text!r}"
            )
        values[key] = float(val)
    if set(values) != {"l", "h"}:
        raise argparse.ArgumentTypeError("bands need both l= and h=")
    return values["l"], values["h"]


def _thresholds(model: RiskStructure, bands: Optional[tuple[float, float]]) -> BandThresholds:
    if bands is None:
        return BandThresholds.from_model(model)
    return BandThresholds(l_below=bands[0], h_at_least=bands[1])


class _CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load_model(path: str):
    try:
        return load_model(path)
    except OSError as exc:
        raise _CliError(EXIT_IO, f"cannot read model {path!r}: {exc}") from None
    except (RiskModelError, KeyError, ValueError) as exc:
        raise _CliError(EXIT_INVALID, f"invalid model {path!r}: {exc}") from None


def _fail(code: int, message: str) -> int:
    print(f"riskstruct: {message}", file=sys.stderr)
    return code


def cmd_validate(args) -> int:
    try:
        load_catalog(args.catalog)
    except CatalogInvalid as exc:
        for message in exc.errors:
            print(f"{args.catalog}: {message}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read catalog {args.catalog!r}: {exc}")
    print(f"{args.catalog}: valid")
    return EXIT_OK


def cmd_build(args) -> int:
    try:
        catalog = load_catalog(args.catalog)
    except CatalogInvalid as exc:
        for message in exc.errors:
            print(f"{args.catalog}: {message}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read catalog {args.catalog!r}: {exc}")
    if args.max_subset is not None:
        catalog = replace(
            catalog, options=replace(catalog.options, max_subset_size=args.max_subset)
        )
    if args.bands is not None:
        catalog = replace(
            catalog,
            options=replace(
                catalog.options,
                band_l_below=args.bands[0],
                band_h_at_least=args.bands[1],
            ),
        )
    model, log = construct_rs(catalog)
    for record in log.records:
        print(
            f"increment {record.increment} {record.sweep}: "
            f"+{record.states_added} states +{record.transitions_added} transitions "
            f"({record.non_mishap_total} non-mishap states, "
            f"{record.states_total} states, {record.transitions_total} transitions)"
        )
    out = args.output or "model.json"
    try:
        save_model(out, model, log)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write model {out!r}: {exc}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    model, _ = _load_model(args.model)
    thresholds = _thresholds(model, args.bands)
    regions = assign_regions(model)
    for state in model.sorted_states():
        pr = mishap_reach_probability(model, state)
        rp = risk_priority(model, state, thresholds=thresholds)
        print(
            f"{model.label(state)}\t{regions[state].value}\t{fmt_prob(pr):.6g}\t{rp.value}"
        )
    return EXIT_OK


def cmd_regions(args) -> int:
    model, _ = _load_model(args.model)
    regions = assign_regions(model)
    for state in model.sorted_states():
        print(f"{model.label(state)}\t{regions[state].value}")
    return EXIT_OK


def cmd_plan(args) -> int:
    model, _ = _load_model(args.model)
    thresholds = _thresholds(model, args.bands)
    try:
        start = model.state_named(args.from_state)
    except RiskModelError as exc:
        return _fail(EXIT_INVALID, str(exc))
    plans = plan_mitigations(
        model, start, thresholds=thresholds, allow_ordinary=args.allow_ordinary
    )
    for plan in plans:
        monotonous = is_mitigation_monotonous(
            model, plan, thresholds=thresholds, slack=args.slack
        )
        print(
            f"{model.label(plan.end)}\t{','.join(plan.action_names())}\t"
            f"{plan.max_rp.value}\t{plan.total_cost}\t"
            f"{fmt_prob(plan.attainment):.6g}\t{'Y' if monotonous else 'N'}"
        )
    return EXIT_OK


def cmd_reduce(args) -> int:
    model, log = _load_model(args.model)
    try:
        if args.equiv is not None:
            model = quotient(model, args.equiv, require_equal_rp=args.require_equal_rp)
        if args.drop is not None:
            rules = load_drop_rules(args.drop)
            model = drop_irrelevant(model, rules)
        if args.collapse_chains:
            model = collapse_safe_chains(model)
    except RiskModelError as exc:
        return _fail(EXIT_INVALID, str(exc))
    if args.output:
        try:
            save_model(args.output, model, log)
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot write model {args.output!r}: {exc}")
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(model_to_json(model, log))
    return EXIT_OK


def cmd_diff(args) -> int:
    model_a, _ = _load_model(args.model_a)
    model_b, _ = _load_model(args.model_b)
    ids_a = {h.id for h in model_a.hazards}
    ids_b = {h.id for h in model_b.hazards}
    if not ids_a <= ids_b:
        return _fail(
            EXIT_INVALID,
            f"incompatible hazard sets: {sorted(ids_a - ids_b)} only in {args.model_a}",
        )
    for h in model_a.hazards:
        if model_b.hazard(h.id).n_mitigations != h.n_mitigations:
            return _fail(
                EXIT_INVALID,
                f"incompatible hazard {h.id!r}: different n_mitigations",
            )

    def embedded_labels(model: RiskStructure) -> dict:
        # a state's identity is its display label with every member name
        # embedded into the wider hazard set
        mapping = {}
        for s in model.states:
            members = sorted(
                embed_state(parse_state(m, model.hazards), model_b.hazards).name
                for m in model.label(s).split("|")
            )
            mapping[s] = "|".join(members)
        return mapping

    map_a, map_b = embedded_labels(model_a), embedded_labels(model_b)
    states_a = set(map_a.values())
    states_b = set(map_b.values())

    def transition_keys(model, mapping):
        keys = set()
        for t in model.transitions:
            keys.add(
                (
                    mapping[t.source],
                    t.action.name,
                    mapping[t.target],
                    fmt_prob(t.pr) if t.pr is not None else None,
                    t.cs,
                )
            )
        return keys

    trans_a, trans_b = transition_keys(model_a, map_a), transition_keys(model_b, map_b)
    different = False
    for name in sorted(states_a - states_b):
        print(f"- state {name}")
        different = True
    for name in sorted(states_b - states_a):
        print(f"+ state {name}")
        different = True

    def fmt_key(key) -> str:
        source, action, target, pr, cs = key
        weights = ",".join(
            str(w) for w in (f"{pr:.6g}" if pr is not None else None, cs) if w is not None
        )
        suffix = f" ({weights})" if weights else ""
        return f"{source} -{action}-> {target}{suffix}"

    for key in sorted(trans_a - trans_b, key=fmt_key):
        print(f"- transition {fmt_key(key)}")
        different = True
    for key in sorted(trans_b - trans_a, key=fmt_key):
        print(f"+ transition {fmt_key(key)}")
        different = True
    return EXIT_DIFFERENT if different else EXIT_OK


def cmd_export_dot(args) -> int:
    model, _ = _load_model(args.model)
    text = to_dot(model)
    if args.output:
        try:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot write {args.output!r}: {exc}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskstruct",
        description="Build, analyze, reduce, and plan over risk structures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a catalog file")
    p.add_argument("catalog")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build", help="construct a model from a catalog")
    p.add_argument("catalog")
    p.add_argument("-o", "--output", help="model file to write (default model.json)")
    p.add_argument("--max-subset", type=int, help="cap on simultaneous hazard subsets")
    p.add_argument("--bands", type=_parse_bands, help="band thresholds l=<p>,h=<p>")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("analyze", help="regions, mishap probability, risk priority")
    p.add_argument("model")
    p.add_argument("--bands", type=_parse_bands, help="band thresholds l=<p>,h=<p>")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("regions", help="region of every state")
    p.add_argument("model")
    p.set_defaults(func=cmd_regions)

    p = sub.add_parser("plan", help="lowest-risk mitigation plans from a state")
    p.add_argument("model")
    p.add_argument("--from", dest="from_state", required=True, metavar="STATE")
    p.add_argument("--bands", type=_parse_bands, help="band thresholds l=<p>,h=<p>")
    p.add_argument("--allow-ordinary", action="store_true")
    p.add_argument("--slack", type=int, default=0, help="tolerated rp increases")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("reduce", help="quotient, drop rules, chain collapse")
    p.add_argument("model")
    p.add_argument("--equiv", choices=EQUIVALENCES)
    p.add_argument("--require-equal-rp", action="store_true")
    p.add_argument("--drop", help="drop-rule file")
    p.add_argument("--collapse-chains", action="store_true")
    p.add_argument("-o", "--output", help="model file to write (default stdout)")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("diff", help="content diff of two models")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("export-dot", help="deterministic DOT rendering")
    p.add_argument("model")
    p.add_argument("-o", "--output", help="file to write (default stdout)")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CliError as exc:
        return _fail(exc.code, str(exc))
    except RiskModelError as exc:
        return _fail(EXIT_INVALID, str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, str(exc))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
