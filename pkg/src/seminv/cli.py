"""Command-line surface: simulate, certify, bounds, experiment, subsample.

Exit codes: 0 success, 1 validation/usage error, 2 runtime error. All
randomness flows from --seed; the SEED environment variable is honored when
the flag is absent. Every output directory receives exactly one
``manifest.json`` capturing the tool version, the resolved command, the master
seed, and content digests of the input configs, so identical manifests imply
byte-identical output trees.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
import time
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .bounds import GENERAL, HARD_K, SOFT_K_DEGREE_D, evaluate_budget
from .config import (
    dataset_from_csv,
    dataset_to_csv,
    dump_json,
    file_digest,
    format_float,
    intervention_to_dict,
    load_yaml,
    parse_dist_config,
    parse_experiment_config,
    parse_sem_config,
)
from .errors import UsageError, ValidationError
from .experiment import ExperimentReport, conditional_subsample, run_experiment
from .interventions import apply, observational, sample_intervention
from .invariance import (
    Head,
    Representation,
    empirical_gradient_norm_split,
    population_gradient,
    population_least_squares_head,
)
from .sem import sample_dataset

log = logging.getLogger("seminv")

BOUND_KINDS = {"hard": HARD_K, "soft": SOFT_K_DEGREE_D, "general": GENERAL}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        print(self.format_usage(), file=sys.stderr, end="")
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="seminv", description=__doc__)
    parser.add_argument("--version", action="version", version=f"seminv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="emit interventional datasets as CSV")
    sim.add_argument("--sem", required=True, help="SEM config (YAML)")
    sim.add_argument("--dist", help="intervention distribution config (YAML)")
    sim.add_argument("--num-envs", type=int, default=1)
    sim.add_argument("--n-samples", type=int, required=True)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", required=True)

    cert = sub.add_parser("certify", help="invariance reports across environments")
    cert.add_argument("--sem", required=True)
    cert.add_argument("--dist", help="environment family; omit for observational only")
    cert.add_argument("--num-envs", type=int, default=1)
    cert.add_argument("--subset", help="comma-separated variable names selected by phi")
    cert.add_argument("--phi", help="comma-separated diagonal values (alternative to --subset)")
    cert.add_argument("--head", help="comma-separated head; default: fit on the base SEM")
    cert.add_argument("--eps", type=float, required=True)
    cert.add_argument("--n-samples", type=int, default=10_000)
    cert.add_argument("--seed", type=int, default=None)
    cert.add_argument("--out", required=True)

    bnd = sub.add_parser("bounds", help="interventional/sample complexity tables")
    bnd.add_argument("--kind", required=True, choices=sorted(BOUND_KINDS))
    bnd.add_argument("--n", type=int, default=0)
    bnd.add_argument("--k", type=int, default=0)
    bnd.add_argument("--d", type=int, default=0)
    bnd.add_argument("--delta", type=float, required=True)
    bnd.add_argument("--delta-prime", type=float, required=True)
    bnd.add_argument("--eps", type=float, default=0.1)
    bnd.add_argument("--L", type=float, default=1.0)
    bnd.add_argument("--C", type=float, default=1.0)
    bnd.add_argument("--csv", help="also append the row to this CSV file")

    exp = sub.add_parser("experiment", help="run the full generalization study")
    exp.add_argument("--config", required=True)
    exp.add_argument("--quick", action="store_true", help="n_samples=5000, repeats=2")
    exp.add_argument("--seed", type=int, default=None)
    exp.add_argument("--out", required=True)

    ssp = sub.add_parser("subsample", help="split one dataset into pseudo-environments")
    ssp.add_argument("--data", required=True, help="dataset CSV")
    ssp.add_argument("--target", required=True, help="target variable name")
    ssp.add_argument("--rule-vars", required=True, help="comma-separated rule variable names")
    ssp.add_argument("--bins", type=int, required=True)
    ssp.add_argument("--out", required=True)
    return parser


def _resolve_seed(flag_value: int | None, default: int = 0) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get("SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ValidationError(f"SEED environment variable is not an integer: {env!r}") from exc
    return default


def _write(out_dir: Path, name: str, text: str) -> None:
    (out_dir / name).write_text(text)


def _manifest(out_dir: Path, command: Sequence[str], seed: int, inputs: Sequence[str]) -> None:
    payload = {
        "tool_version": __version__,
        "command": list(command),
        "master_seed": seed,
        "input_digests": {name: file_digest(name) for name in inputs},
    }
    _write(out_dir, "manifest.json", dump_json(payload))


def _parse_name_list(raw: str, names: Sequence[str]) -> list[int]:
    index = {n: i for i, n in enumerate(names)}
    out = []
    for token in raw.split(","):
        token = token.strip()
        if token not in index:
            raise ValidationError(f"unknown variable {token!r}")
        out.append(index[token])
    return out


def _environments(args, sem, names):
    """Yield (intervention, env_model) for the requested family, or just the base."""
    if args.dist is None:
        iv = observational()
        yield iv, sem
        return
    dist = parse_dist_config(load_yaml(args.dist), names, sem.target)
    seed = _resolve_seed(args.seed)
    for k in range(args.num_envs):
        iv = sample_intervention(dist, sem, seed + k)
        yield iv, apply(sem, iv)


def _cmd_simulate(args) -> int:
    sem, names = parse_sem_config(load_yaml(args.sem))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = _resolve_seed(args.seed)
    manifest_inputs = [args.sem] + ([args.dist] if args.dist else [])
    ivs = []
    for k, (iv, env) in enumerate(_environments(args, sem, names)):
        ds = sample_dataset(env, args.n_samples, seed + 10_000 + k, intervention_id=iv.id)
        _write(out_dir, f"env_{k:03d}_{iv.id}.csv", dataset_to_csv(ds, names))
        ivs.append(intervention_to_dict(iv, names))
    _write(out_dir, "interventions.json", dump_json(ivs))
    _manifest(out_dir, sys.argv[1:] or ["simulate"], seed, manifest_inputs)
    return 0


def _cmd_certify(args) -> int:
    sem, names = parse_sem_config(load_yaml(args.sem))
    n = sem.num_features
    if (args.subset is None) == (args.phi is None):
        raise ValidationError("provide exactly one of --subset or --phi")
    if args.subset is not None:
        feature_names = [names[i] for i in sem.feature_indices]
        phi = Representation.from_subset(_parse_name_list(args.subset, feature_names), n)
    else:
        phi = Representation(diag=np.array([float(v) for v in args.phi.split(",")]))
    if args.head is not None:
        head = Head(coeffs=np.array([float(v) for v in args.head.split(",")]))
    else:
        head = population_least_squares_head(sem, phi)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = _resolve_seed(args.seed)
    rows = []
    for k, (iv, env) in enumerate(_environments(args, sem, names)):
        pop = float(np.linalg.norm(population_gradient(env, phi, head)))
        ds = sample_dataset(env, args.n_samples, seed + 20_000 + k, intervention_id=iv.id)
        emp = empirical_gradient_norm_split(ds, phi, head)
        rows.append(
            {
                "intervention_id": iv.id,
                "phi": [float(v) for v in phi.diag],
                "head": [float(v) for v in head.coeffs],
                "population_norm": pop,
                "empirical_norm": emp,
                "eps": args.eps,
                "invariant": pop <= args.eps,
            }
        )
        print(f"{iv.id}  population={pop:.3e}  empirical={emp:.3e}  invariant={pop <= args.eps}")
    _write(out_dir, "certification.json", dump_json(rows))
    _manifest(out_dir, sys.argv[1:], seed, [args.sem] + ([args.dist] if args.dist else []))
    return 0


def _cmd_bounds(args) -> int:
    budget = evaluate_budget(
        BOUND_KINDS[args.kind],
        n=args.n,
        k=args.k,
        d=args.d,
        delta=args.delta,
        delta_prime=args.delta_prime,
        eps=args.eps,
        L=args.L,
        C=args.C,
    )
    header = "kind,n,k,d,delta,delta_prime,eps,L,C,m,N"
    row = (
        f"{budget.kind},{budget.n},{budget.k},{budget.d},{format_float(budget.delta)},"
        f"{format_float(budget.delta_prime)},{format_float(budget.eps)},{format_float(budget.L)},"
        f"{format_float(budget.C)},{budget.m_interventions},{budget.n_samples_per_env}"
    )
    print(header)
    print(row)
    print(f"# natural logs; {budget.caveat}")
    if args.csv:
        path = Path(args.csv)
        text = (header + "\n") if not path.exists() else ""
        with path.open("a") as fh:
            fh.write(text + row + "\n")
    return 0


def _report_csvs(report: ExperimentReport) -> tuple[str, str]:
    gen = io.StringIO()
    w = csv.writer(gen, lineterminator="\n")
    w.writerow(["m", "repeat", "subset", "rho", "generalization_pct"])
    for r in report.results:
        for s in r.subsets:
            w.writerow(
                [
                    r.m,
                    r.repeat,
                    " ".join(str(i) for i in s.subset),
                    format_float(s.rho),
                    format_float(s.generalization_pct),
                ]
            )
    erm = io.StringIO()
    w = csv.writer(erm, lineterminator="\n")
    w.writerow(["m", "repeat", "erm_generalization_pct"])
    for r in report.results:
        w.writerow([r.m, r.repeat, format_float(r.erm_generalization_pct)])
    return gen.getvalue(), erm.getvalue()


def _cmd_experiment(args) -> int:
    config, _names = parse_experiment_config(load_yaml(args.config), Path(args.config).parent)
    seed = _resolve_seed(args.seed, default=config.master_seed)
    overrides = {"master_seed": seed}
    if args.quick:
        overrides.update(n_samples=5_000, repeats=2)
    from dataclasses import replace

    config = replace(config, **overrides)
    started = time.monotonic()
    report = run_experiment(config)
    log.info("experiment finished in %.1f s", time.monotonic() - started)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write(out_dir, "report.json", dump_json(report.to_dict()))
    gen_csv, erm_csv = _report_csvs(report)
    _write(out_dir, "generalization.csv", gen_csv)
    _write(out_dir, "erm.csv", erm_csv)
    _manifest(out_dir, sys.argv[1:], seed, [args.config])
    return 0


def _cmd_subsample(args) -> int:
    text = Path(args.data).read_text()
    ds, names = dataset_from_csv(text, args.target)
    rule_vars = _parse_name_list(args.rule_vars, names)
    parts = conditional_subsample(ds, rule_vars, args.bins)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for k, part in enumerate(parts):
        _write(out_dir, f"bin_{k:03d}.csv", dataset_to_csv(part, names))
    _manifest(out_dir, sys.argv[1:], _resolve_seed(None), [args.data])
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "certify": _cmd_certify,
    "bounds": _cmd_bounds,
    "experiment": _cmd_experiment,
    "subsample": _cmd_subsample,
}


def dispatch(argv: Sequence[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
