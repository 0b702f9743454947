"""Command line interface.

    objevents verify <scenario> [--suites ...]
    objevents sample <scenario> --trials N [--records out.jsonl]
    objevents fuzz --object-dim D --probe-dims 2 3 --count K
    objevents scenarios [--show NAME]

``<scenario>`` is a path to a JSON scenario or the name of a builtin
(``cnot2``, ``cnot3``, ``qutrit3``, ``cnot2-broken``). Exit status is 0 when
every executed suite passes, 1 on a suite failure and 2 when the scenario
cannot be parsed or validated.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .runner import SUITES, VerificationReport, run, run_sampling
from .scenario import (
    ScenarioError,
    builtin_names,
    builtin_text,
    generate_random_scenario,
    load_scenario,
)

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--tolerance-scale", type=float, default=1.0, help="multiply every tolerance")
    p.add_argument("--output", type=Path, default=None, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--timing", action="store_true", help="include wall time (reports are then not reproducible)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="objevents", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common], help="run the suites listed in a scenario")
    v.add_argument("scenario")
    v.add_argument("--suites", nargs="+", choices=SUITES, default=None, help="run only these suites")

    s = sub.add_parser("sample", parents=[common], help="sample trials and count disagreements")
    s.add_argument("scenario")
    s.add_argument("--trials", type=int, default=None)
    s.add_argument("--records", type=Path, default=None, help="write one JSON line per trial")

    f = sub.add_parser("fuzz", parents=[common], help="axiom suites on Haar-random models")
    f.add_argument("--object-dim", type=int, required=True)
    f.add_argument("--probe-dims", type=int, nargs="+", required=True)
    f.add_argument("--count", type=int, default=1)

    ls = sub.add_parser("scenarios", help="list builtin scenarios")
    ls.add_argument("--show", metavar="NAME", default=None, help="print a builtin scenario")
    return parser


def _emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _render(report: VerificationReport, fmt: str) -> str:
    return report.to_json() if fmt == "json" else report.to_text()


def _load(ref: str, scale: float):
    sf, _ = load_scenario(ref)
    return sf.build(sf.tolerance_config(scale))


def cmd_verify(args) -> int:
    built = _load(args.scenario, args.tolerance_scale)
    report = run(built, seed=args.seed, suites=args.suites, timing=args.timing)
    _emit(_render(report, args.format), args.output)
    if not report.passed:
        print(f"objevents: failing suites: {', '.join(report.failing)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_sample(args) -> int:
    built = _load(args.scenario, args.tolerance_scale)
    trials = built.spec.trials if args.trials is None else args.trials
    if trials < 1:
        raise ScenarioError("--trials must be positive")
    report, out = run_sampling(built, trials, args.seed)
    if args.records is not None and out is not None:
        with args.records.open("w", encoding="utf-8") as fh:
            for r in out[0]:
                fh.write(json.dumps({"trial": r.trial_index, "outcomes": r.outcomes, "agreed": r.agreed}) + "\n")
    _emit(_render(report, args.format), args.output)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_fuzz(args) -> int:
    base = 0 if args.seed is None else args.seed
    reports = []
    for k in range(args.count):
        seed = int(np.random.SeedSequence([base, k]).generate_state(1)[0])
        sf = generate_random_scenario(args.object_dim, args.probe_dims, seed)
        built = sf.build(sf.tolerance_config(args.tolerance_scale))
        reports.append(run(built, timing=args.timing))
    ok = all(r.passed for r in reports)
    if args.format == "json":
        text = json.dumps({"passed": ok, "reports": [r.to_dict() for r in reports]}, indent=2) + "\n"
    else:
        text = "".join(r.to_text() for r in reports)
    _emit(text, args.output)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_scenarios(args) -> int:
    if args.show:
        sys.stdout.write(builtin_text(args.show))
    else:
        sys.stdout.write("\n".join(builtin_names()) + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    handler = {"verify": cmd_verify, "sample": cmd_sample, "fuzz": cmd_fuzz, "scenarios": cmd_scenarios}[args.command]
    try:
        return handler(args)
    except ScenarioError as e:
        print(f"objevents: invalid scenario: {e}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as e:
        print(f"objevents: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
