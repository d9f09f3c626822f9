"""Command line interface.

Subcommands::

    htdl sat FILE                 print SAT / UNSAT / INDETERMINATE
    htdl subsumes FILE A B        print true / false / INDETERMINATE
    htdl classify FILE            print the concept hierarchy
    htdl clausify FILE            print the clause set and ground assertions
    htdl trace FILE               print the derivation tree (dot or jsonl)
    htdl gen FAMILY [params]      print a generated knowledge base

Exit status: 0 on a completed run, 2 on a parse error, 3 when a resource
limit was hit, 4 when the blocking-strategy guard rejects the input.
The environment variable HTDL_SEED perturbs don't-care orderings.
"""

import argparse
import sys

from .model import KBError
from .kbio import parse_kb, serialize_kb, ParseError, SimplicityError
from .clauses import serialize_clauses
from .preprocess import preprocess
from .engine import (
    RunConfig, INDETERMINATE, trace_to_dot, trace_to_jsonl,
)
from .blocking import STRATEGIES
from .reasoner import Reasoner, GuardRejection
from .families import GENERATORS

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_RESOURCE = 3
EXIT_GUARD = 4


def _add_run_options(p):
    p.add_argument("--blocking", choices=STRATEGIES,
                   default="anywhere-pairwise")
    p.add_argument("--unsafe-blocking", action="store_true",
                   help="run even if the strategy guard rejects the input")
    p.add_argument("--individual-cap", type=int, default=200000)
    p.add_argument("--timeout", type=float, default=300.0)
    p.add_argument("--backjumping", action="store_true")
    p.add_argument("--disjunct-order", choices=("declared", "reversed"),
                   default="declared")
    p.add_argument("--validate", action="store_true",
                   help="check forest invariants after every rule")
    p.add_argument("--no-cache", action="store_true",
                   help="disable blocker-label caching across runs")


def _config(args) -> RunConfig:
    return RunConfig.from_env(
        blocking=args.blocking, unsafe_blocking=args.unsafe_blocking,
        individual_cap=args.individual_cap, timeout=args.timeout,
        backjumping=args.backjumping, disjunct_order=args.disjunct_order,
        validate=args.validate)


def _load(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kb(fh.read())


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="htdl", description="hypertableau description-logic reasoner")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sat = sub.add_parser("sat", help="decide satisfiability")
    p_sat.add_argument("file")
    _add_run_options(p_sat)

    p_sub = sub.add_parser("subsumes", help="decide concept subsumption")
    p_sub.add_argument("file")
    p_sub.add_argument("sub")
    p_sub.add_argument("sup")
    _add_run_options(p_sub)

    p_cls = sub.add_parser("classify", help="compute the concept hierarchy")
    p_cls.add_argument("file")
    _add_run_options(p_cls)

    p_cl = sub.add_parser("clausify", help="print the preprocessed clauses")
    p_cl.add_argument("file")

    p_tr = sub.add_parser("trace", help="print the derivation tree")
    p_tr.add_argument("file")
    p_tr.add_argument("--format", choices=("dot", "jsonl"), default="dot")
    _add_run_options(p_tr)

    p_gen = sub.add_parser("gen", help="generate a benchmark knowledge base")
    p_gen.add_argument("family", choices=sorted(GENERATORS))
    p_gen.add_argument("params", nargs="*", type=int,
                       help="family parameters, in order")

    args = parser.parse_args(argv)

    try:
        if args.command == "gen":
            gen, names = GENERATORS[args.family]
            if len(args.params) != len(names):
                print(f"family {args.family} expects parameters: "
                      + " ".join(names), file=sys.stderr)
                return EXIT_PARSE
            sys.stdout.write(serialize_kb(gen(*args.params)))
            return EXIT_OK

        kb = _load(args.file)

        if args.command == "clausify":
            clausal = preprocess(kb)
            sys.stdout.write(
                serialize_clauses(clausal.clauses, clausal.assertions))
            return EXIT_OK

        reasoner = Reasoner(kb, _config(args),
                            use_cache=not args.no_cache)

        if args.command == "sat":
            verdict = reasoner.is_satisfiable()
            if verdict == INDETERMINATE:
                print(INDETERMINATE)
                return EXIT_RESOURCE
            print("SAT" if verdict else "UNSAT")
            return EXIT_OK

        if args.command == "subsumes":
            verdict = reasoner.subsumes(args.sub, args.sup)
            if verdict == INDETERMINATE:
                print(INDETERMINATE)
                return EXIT_RESOURCE
            print("true" if verdict else "false")
            return EXIT_OK

        if args.command == "classify":
            taxonomy = reasoner.classify()
            sys.stdout.write(taxonomy.pretty())
            return EXIT_RESOURCE if taxonomy.indeterminate else EXIT_OK

        if args.command == "trace":
            result = reasoner.check(trace=True)
            if args.format == "dot":
                sys.stdout.write(trace_to_dot(result.trace))
            else:
                sys.stdout.write(trace_to_jsonl(result.trace))
            if result.verdict == INDETERMINATE:
                return EXIT_RESOURCE
            return EXIT_OK

    except (ParseError, SimplicityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except GuardRejection as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except KBError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
