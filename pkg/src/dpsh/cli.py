"""Command-line surface: calibrate, curve, release, audit.

Exit codes: 0 success, 1 audit found a violated bound, 2 infeasible
parameters (the noise level cannot reach the target delta at any
threshold), 3 violated precondition (bad flag combinations, histogram
constraints), 4 I/O failure. Curve points fan out across a thread pool
capped by DPSH_THREADS (default: machine cores); rows are written in grid
order regardless of completion order.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import secrets
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import accounting, mechanisms, oracles, plotting
from .accounting import InfeasibleError, MechanismConfig, PrivacyParams
from .histogram import (
    SparseHistogram,
    build_histogram,
    dataset_from_json,
    histogram_from_json,
    noisy_histogram_to_json,
)

__all__ = ["CurveRow", "build_parser", "main", "cmd_calibrate", "cmd_curve", "cmd_release", "cmd_audit"]

EXIT_OK = 0
EXIT_AUDIT_FAIL = 1
EXIT_INFEASIBLE = 2
EXIT_PRECONDITION = 3
EXIT_IO = 4

_CSV_HEADER = ("total_noise", "gshm_add", "gshm_exact", "csh_add", "csh_tight")
_CURVE_ANALYSES = ("gshm-add", "gshm-exact", "csh-add", "csh-tight")


@dataclass(frozen=True)
class CurveRow:
    """One grid point: minimum feasible threshold per analysis, None where
    the noise level is below that analysis' feasibility floor."""

    total_noise: float
    min_tau_gshm_add: float | None
    min_tau_gshm_exact: float | None
    min_tau_csh_add: float | None
    min_tau_csh_tight: float | None

    def values(self) -> tuple[float | None, ...]:
        return (
            self.min_tau_gshm_add,
            self.min_tau_gshm_exact,
            self.min_tau_csh_add,
            self.min_tau_csh_tight,
        )


def _thread_count() -> int:
    raw = os.environ.get("DPSH_THREADS", "")
    if raw.strip():
        try:
            value = int(raw)
        except ValueError as exc:
            raise ValueError(f"DPSH_THREADS must be an integer, got {raw!r}") from exc
        if value < 1:
            raise ValueError(f"DPSH_THREADS must be positive, got {value}")
        return value
    return os.cpu_count() or 1


def _per_coordinate_sigma(analysis: str, total_noise: float, k: int) -> float:
    # gshm noise is independent, so total per-coordinate noise is sigma
    # itself; the correlated mechanisms carry the shared draw on top
    if analysis.startswith("gshm"):
        return total_noise
    return total_noise / math.sqrt(1.0 + 1.0 / math.sqrt(k))


def _min_tau_or_none(analysis: str, k: int, total_noise: float, target: PrivacyParams) -> float | None:
    sigma = _per_coordinate_sigma(analysis, total_noise, k)
    try:
        return accounting.min_tau(analysis, k, sigma, target)
    except InfeasibleError:
        return None


def curve_row(k: int, target: PrivacyParams, total_noise: float) -> CurveRow:
    taus = [_min_tau_or_none(a, k, total_noise, target) for a in _CURVE_ANALYSES]
    return CurveRow(total_noise, *taus)


def cmd_calibrate(args: argparse.Namespace) -> int:
    target = PrivacyParams(args.epsilon, args.delta)
    if args.solve_sigma:
        sigma = accounting.min_sigma(args.analysis, args.k, target)
    else:
        sigma = args.sigma
    try:
        tau = accounting.min_tau(args.analysis, args.k, sigma, target)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if args.analysis.startswith("gshm"):
        total_noise = sigma
    else:
        total_noise = accounting.total_noise_csh(sigma, args.k)
    print(
        json.dumps(
            {
                "analysis": args.analysis,
                "k": args.k,
                "epsilon": args.epsilon,
                "delta": args.delta,
                "sigma": sigma,
                "tau": tau,
                "total_noise": total_noise,
            }
        )
    )
    return EXIT_OK


def cmd_curve(args: argparse.Namespace) -> int:
    if not args.noise_min < args.noise_max:
        raise ValueError(
            f"--noise-min must be below --noise-max, got {args.noise_min} and {args.noise_max}"
        )
    if args.steps < 2:
        raise ValueError(f"--steps must be at least 2, got {args.steps}")
    if not args.noise_min > 0:
        raise ValueError(f"--noise-min must be positive, got {args.noise_min}")
    target = PrivacyParams(args.epsilon, args.delta)
    grid = np.linspace(args.noise_min, args.noise_max, args.steps)
    threads = _thread_count()

    def row_at(total_noise: float) -> CurveRow:
        return curve_row(args.k, target, float(total_noise))

    if threads > 1 and args.steps > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row_at, grid))
    else:
        rows = [row_at(x) for x in grid]

    out = Path(args.out)
    try:
        with out.open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(_CSV_HEADER)
            for row in rows:
                writer.writerow(
                    [repr(row.total_noise)]
                    + ["" if v is None else repr(v) for v in row.values()]
                )
    except OSError as exc:
        print(f"cannot write {out}: {exc}", file=sys.stderr)
        return EXIT_IO

    if not args.no_plot:
        png = out.with_suffix(".png")
        series = {
            label: [getattr(row, f"min_tau_{label.replace('-', '_')}") for row in rows]
            for label in _CURVE_ANALYSES
        }
        try:
            plotting.render_curve(
                png,
                [row.total_noise for row in rows],
                series,
                title=f"k={args.k}, epsilon={args.epsilon}, delta={args.delta}",
            )
        except OSError as exc:
            print(f"cannot write {png}: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"wrote {out} and {png}")
    else:
        print(f"wrote {out}")
    return EXIT_OK


def _load_histogram(path: Path) -> SparseHistogram:
    text = path.read_text()
    try:
        parsed = json.loads(text)
    except json.JSONDecodeError as exc:
        raise OSError(f"{path} is not valid JSON: {exc}") from exc
    if isinstance(parsed, dict) and "users" in parsed:
        return build_histogram(dataset_from_json(text))
    return histogram_from_json(text)


_RELEASE_ANALYSIS = {
    "gshm": "gshm-exact",
    "csh": "csh-tight",
    "topk": "csh-tight",
    "discrete-csh": "discrete-csh",
}


def cmd_release(args: argparse.Namespace) -> int:
    config = MechanismConfig(args.k, args.sigma, args.tau)
    hist = _load_histogram(Path(args.input))
    seed = args.seed if args.seed is not None else secrets.randbits(64)
    rng = np.random.default_rng(seed)
    if args.mechanism == "gshm":
        noisy = mechanisms.gshm_release(hist, args.sigma, args.tau, rng, seed=seed)
    elif args.mechanism == "csh":
        noisy = mechanisms.csh_release(hist, config, rng, seed=seed)
    elif args.mechanism == "topk":
        noisy = mechanisms.topk_release(hist, config, rng, seed=seed)
    else:
        noisy = mechanisms.discrete_csh_release(hist, config, rng, seed=seed)
    try:
        receipt = mechanisms.build_receipt(
            noisy, config, _RELEASE_ANALYSIS[args.mechanism], args.epsilon, seed
        )
    except ValueError as exc:
        # the achieved delta is not a probability below one: the config
        # cannot carry any (epsilon, delta) guarantee worth a receipt
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = Path(args.out)
    receipt_path = out.with_suffix(".receipt.json")
    try:
        out.write_text(noisy_histogram_to_json(noisy) + "\n")
        receipt_path.write_text(
            json.dumps(mechanisms.receipt_to_json(receipt), indent=2, sort_keys=True) + "\n"
        )
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    print(json.dumps({"output": str(out), "receipt": str(receipt_path), "seed": seed}))
    return EXIT_OK


def cmd_audit(args: argparse.Namespace) -> int:
    j = args.j if args.j is not None else args.k
    seed = args.seed if args.seed is not None else secrets.randbits(64)
    rng = np.random.default_rng(seed)
    run_hockey_stick = args.hockey_stick or args.k <= 2
    if args.hockey_stick and args.k > 2:
        raise ValueError(
            f"the hockey-stick check integrates exactly only for k in {{1, 2}}, got k={args.k}"
        )
    all_pass = True

    estimate = oracles.mc_delta_inf(args.k, j, args.sigma, args.tau, args.trials, rng)
    bound = accounting.delta_inf_bound(args.k, j, args.sigma, args.tau)
    mc_ok = estimate.estimate <= bound + 4.0 * estimate.std_error
    all_pass &= mc_ok
    print(
        json.dumps(
            {
                "check": "mc-crossing-vs-bound",
                "k": args.k,
                "j": j,
                "sigma": args.sigma,
                "tau": args.tau,
                "trials": args.trials,
                "seed": seed,
                "estimate": estimate.estimate,
                "std_error": estimate.std_error,
                "bound": bound,
                "pass": mc_ok,
            }
        )
    )

    if run_hockey_stick and args.k <= 2:
        config = MechanismConfig(args.k, args.sigma, args.tau)
        tight, _ = accounting.csh_tight_delta(config, args.epsilon)
        add = accounting.csh_add_deltas(config, args.epsilon).delta_total
        for case in oracles.NEIGHBOR_CASES:
            divergence = oracles.hockey_stick_csh(
                args.k, args.sigma, args.tau, args.epsilon, case
            )
            case_ok = divergence <= tight + 2e-7 and tight <= add + 1e-12
            all_pass &= case_ok
            print(
                json.dumps(
                    {
                        "check": "hockey-stick-vs-analytic",
                        "neighbor_case": case,
                        "epsilon": args.epsilon,
                        "divergence": divergence,
                        "delta_tight": tight,
                        "delta_add": add,
                        "pass": case_ok,
                    }
                )
            )

    print("PASS" if all_pass else "FAIL")
    return EXIT_OK if all_pass else EXIT_AUDIT_FAIL


class _Parser(argparse.ArgumentParser):
    # usage errors are precondition violations, not the default exit 2,
    # which this tool reserves for infeasible parameters
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_PRECONDITION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="dpsh",
        description="Differentially private release of sparse histograms "
        "with correlated Gaussian noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cal = sub.add_parser("calibrate", help="solve for the minimum threshold (and noise level)")
    cal.add_argument("--analysis", required=True, choices=accounting.ANALYSES)
    cal.add_argument("--k", required=True, type=int)
    cal.add_argument("--epsilon", required=True, type=float)
    cal.add_argument("--delta", required=True, type=float)
    group = cal.add_mutually_exclusive_group(required=True)
    group.add_argument("--sigma", type=float, help="per-coordinate noise scale")
    group.add_argument(
        "--solve-sigma",
        action="store_true",
        help="use the smallest feasible noise level instead of a fixed --sigma",
    )
    cal.set_defaults(handler=cmd_calibrate)

    cur = sub.add_parser("curve", help="tabulate minimum thresholds over a noise grid")
    cur.add_argument("--k", required=True, type=int)
    cur.add_argument("--epsilon", required=True, type=float)
    cur.add_argument("--delta", required=True, type=float)
    cur.add_argument("--noise-min", required=True, type=float)
    cur.add_argument("--noise-max", required=True, type=float)
    cur.add_argument("--steps", required=True, type=int)
    cur.add_argument("--out", required=True, help="CSV path; the PNG lands beside it")
    cur.add_argument("--no-plot", action="store_true", help="skip the PNG")
    cur.set_defaults(handler=cmd_curve)

    rel = sub.add_parser("release", help="run a mechanism on a histogram file")
    rel.add_argument("--input", required=True, help="JSON with 'counts' or 'users'")
    rel.add_argument(
        "--mechanism", required=True, choices=("gshm", "csh", "topk", "discrete-csh")
    )
    rel.add_argument("--k", required=True, type=int)
    rel.add_argument("--sigma", required=True, type=float)
    rel.add_argument("--tau", required=True, type=float)
    rel.add_argument("--seed", type=int, help="64-bit seed; omitted: drawn from system entropy")
    rel.add_argument(
        "--epsilon",
        type=float,
        default=1.0,
        help="epsilon at which the receipt's achieved delta is computed",
    )
    rel.add_argument("--out", required=True, help="output JSON; receipt lands beside it")
    rel.set_defaults(handler=cmd_release)

    aud = sub.add_parser("audit", help="check accounting bounds against numerical oracles")
    aud.add_argument("--k", required=True, type=int)
    aud.add_argument("--j", type=int, help="crossing coordinates (default: k)")
    aud.add_argument("--sigma", required=True, type=float)
    aud.add_argument("--tau", required=True, type=float)
    aud.add_argument("--epsilon", type=float, default=1.0)
    aud.add_argument("--trials", type=int, default=1_000_000)
    aud.add_argument("--seed", type=int)
    aud.add_argument(
        "--hockey-stick",
        action="store_true",
        help="insist on the divergence check (automatic for k <= 2; error above)",
    )
    aud.set_defaults(handler=cmd_audit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
