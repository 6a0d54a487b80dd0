"""Command-line entry point: variable selection on a CSV or the replicated
simulation study, with JSON/CSV reports and plot-ready long-format output."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass

from ._emcore import EmConfig
from .datasets import DataMatrix, load_csv
from .gaussian_mixture import hard_labels
from .metrics import ari
from .simulation import METHOD_NAMES, StudySummary, default_study_spec, run_study
from .vscc import SelectionResult, vscc_gaussian, vscc_manly

__all__ = ["RunConfig", "RunReport", "run_select", "run_simulation",
           "emit_pairs_data", "main"]

# EM settings for CLI runs; the study uses a shorter budget with two starts
# per fit so the desk-scale protocol stays affordable.
_SELECT_CONFIG = EmConfig(max_iter=500, rel_tol=1e-8, n_starts=4)
_STUDY_CONFIG = EmConfig(max_iter=300, rel_tol=1e-7, n_starts=2)


class CliError(ValueError):
    """Configuration or usage error; reported as one diagnostic line."""


@dataclass(frozen=True)
class RunConfig:
    """Parsed command-line options."""

    input: str | None
    simulate: bool
    methods: tuple[str, ...]
    g_min: int
    g_max: int
    seed: int
    standardize: bool
    label_column: str | None
    out_dir: str
    replicates: int
    n: int
    threads: int

    def __post_init__(self):
        if self.g_min < 1:
            raise CliError(f"g_min must be >= 1, got {self.g_min}")
        if self.g_min > self.g_max:
            raise CliError(f"empty G range {self.g_min}:{self.g_max}")
        if (self.input is None) == (not self.simulate):
            raise CliError("exactly one of --input and --simulate is required")
        if not self.methods:
            raise CliError("at least one method is required")
        for m in self.methods:
            if m not in METHOD_NAMES:
                raise CliError(f"unknown method {m!r}; choose from {METHOD_NAMES}")
        if self.replicates < 1:
            raise CliError("replicates must be >= 1")
        if self.n < 2:
            raise CliError("simulation sample size must be >= 2")
        if self.threads < 1:
            raise CliError("threads must be >= 1")


@dataclass(frozen=True)
class RunReport:
    """Result of one selection run, serializable to canonical JSON.

    elapsed_seconds is the single field excluded from the byte-determinism
    contract of the JSON report.
    """

    method: str
    input: str
    n: int
    p: int
    seed: int
    g_range: tuple[int, int]
    standardized: bool
    chosen_variables: tuple[str, ...]
    chosen_exponent: int
    g: int
    uncertainty: float
    bic: float
    ari: float | None
    subset_table: tuple[dict, ...]
    elapsed_seconds: float

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "input": self.input,
            "n": self.n,
            "p": self.p,
            "seed": self.seed,
            "g_range": list(self.g_range),
            "standardized": self.standardized,
            "chosen_variables": list(self.chosen_variables),
            "chosen_exponent": self.chosen_exponent,
            "g": self.g,
            "uncertainty": self.uncertainty,
            "bic": self.bic,
            "ari": self.ari,
            "subset_table": [dict(row) for row in self.subset_table],
            "elapsed_seconds": self.elapsed_seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def emit_pairs_data(X: DataMatrix, labels, path) -> None:
    """Write a long-format CSV (observation, variable, value[, label]).

    With labels None or empty the label column is omitted. One data row per
    matrix cell, observation-major, consumable by any plotting tool.
    """
    has_labels = labels is not None and len(labels) > 0
    if has_labels and len(labels) != X.n:
        raise ValueError(f"labels must have length n={X.n}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        header = ["observation", "variable", "value"]
        if has_labels:
            header.append("label")
        writer.writerow(header)
        for i in range(X.n):
            for j in range(X.p):
                row = [i + 1, X.column_names[j], repr(float(X.values[i, j]))]
                if has_labels:
                    row.append(int(labels[i]))
                writer.writerow(row)


def _subset_table(result: SelectionResult) -> tuple[dict, ...]:
    rows = []
    for k, subset in enumerate(result.family.subsets):
        fit = result.fits[k]
        rows.append({
            "exponent": k + 1,
            "variables": [result.column_names[j] for j in sorted(subset)],
            "uncertainty": None if fit is None else result.uncertainties[k],
            "bic": None if fit is None else fit.bic,
            "g": None if fit is None else fit.n_components,
        })
    return tuple(rows)


def run_select(config: RunConfig) -> RunReport:
    """Run one selection method end-to-end on a CSV and write reports."""
    dataset = load_csv(config.input, config.label_column)
    X = dataset.data
    g_range = range(config.g_min, config.g_max + 1)
    em_config = EmConfig(
        max_iter=_SELECT_CONFIG.max_iter, rel_tol=_SELECT_CONFIG.rel_tol,
        n_starts=_SELECT_CONFIG.n_starts, seed=config.seed,
        ridge=_SELECT_CONFIG.ridge)
    method = config.methods[0]
    t0 = time.perf_counter()
    if method == "vscc":
        result = vscc_gaussian(X, g_range, em_config,
                               scale_input=config.standardize)
    else:
        mode = method.removeprefix("vscc-manly-")
        result = vscc_manly(X, g_range, mode, em_config,
                            scale_input=config.standardize)
    elapsed = time.perf_counter() - t0

    labels_hat = hard_labels(result.final_fit.responsibilities)
    ari_value = None
    if dataset.labels is not None:
        ari_value = ari(labels_hat, dataset.labels)

    report = RunReport(
        method=method,
        input=str(config.input),
        n=X.n,
        p=X.p,
        seed=config.seed,
        g_range=(config.g_min, config.g_max),
        standardized=config.standardize,
        chosen_variables=result.chosen_subset,
        chosen_exponent=result.chosen_index,
        g=result.final_fit.n_components,
        uncertainty=result.uncertainties[result.chosen_index - 1],
        bic=result.final_fit.bic,
        ari=ari_value,
        subset_table=_subset_table(result),
        elapsed_seconds=elapsed,
    )

    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, "report.json"), "w",
              encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")

    chosen_idx = [X.column_names.index(name) for name in result.chosen_subset]
    selected = X.select(chosen_idx)
    with open(os.path.join(config.out_dir, "selected.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(selected.column_names) + ["cluster"])
        for i in range(selected.n):
            writer.writerow([repr(float(v)) for v in selected.values[i]]
                            + [int(labels_hat[i])])
    emit_pairs_data(selected, labels_hat,
                    os.path.join(config.out_dir, "selected_long.csv"))

    print(f"method: {report.method}")
    print(f"chosen variables ({len(report.chosen_variables)}): "
          f"{', '.join(report.chosen_variables)}")
    print(f"G: {report.g}  uncertainty: {report.uncertainty:.4f}  "
          f"BIC: {report.bic:.2f}"
          + (f"  ARI: {report.ari:.4f}" if report.ari is not None else ""))
    print(f"reports written to {config.out_dir}")
    return report


def run_simulation(config: RunConfig) -> StudySummary:
    """Run the replicated simulation study and write summary CSV/JSON."""
    spec = default_study_spec(n=config.n, seed=config.seed)
    em_config = EmConfig(
        max_iter=_STUDY_CONFIG.max_iter, rel_tol=_STUDY_CONFIG.rel_tol,
        n_starts=_STUDY_CONFIG.n_starts, seed=config.seed,
        ridge=_STUDY_CONFIG.ridge)
    summary = run_study(spec, config.replicates, config.methods,
                        range(config.g_min, config.g_max + 1), em_config,
                        threads=config.threads)
    os.makedirs(config.out_dir, exist_ok=True)
    with open(os.path.join(config.out_dir, "simulation_summary.csv"), "w",
              encoding="utf-8") as fh:
        fh.write(summary.to_csv())
    with open(os.path.join(config.out_dir, "simulation_summary.json"), "w",
              encoding="utf-8") as fh:
        fh.write(summary.to_json() + "\n")
    for row in summary.rows:
        counts = ", ".join(f"{v}={c}" for v, c in row.selection_counts)
        print(f"{row.method}: n={row.n} replicates={row.replicates} "
              f"failures={row.failures} mean_G={row.mean_g:.2f} "
              f"modal_G={row.modal_g} ARI={row.mean_ari:.3f} "
              f"({row.sd_ari:.3f}) [{counts}]")
    print(f"summary written to {config.out_dir}")
    return summary


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="skewselect", description=__doc__)
    parser.add_argument("--input", help="CSV file to run selection on")
    parser.add_argument("--simulate", action="store_true",
                        help="run the replicated simulation study")
    parser.add_argument("--method", default="vscc-manly-full",
                        help="selection method; comma-separated list in "
                             f"simulation mode (choices: {', '.join(METHOD_NAMES)})")
    parser.add_argument("--g-range", default="1:9", metavar="MIN:MAX",
                        help="component counts to test (default 1:9)")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--label-col", default=None,
                        help="name of the true-label column in the CSV")
    parser.add_argument("--replicates", type=int, default=25,
                        help="simulation replicates (default 25)")
    parser.add_argument("--n", type=int, default=500,
                        help="simulation sample size (default 500)")
    parser.add_argument("--out-dir", default=".")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes for replicates "
                             "(default: SKEWSELECT_THREADS or 1)")
    parser.add_argument("--no-standardize", action="store_true",
                        help="skip input standardization")
    return parser


def _parse_g_range(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise CliError(f"--g-range expects MIN:MAX, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise CliError(f"--g-range expects integers, got {text!r}") from None


def _config_from_args(args) -> RunConfig:
    g_min, g_max = _parse_g_range(args.g_range)
    methods = tuple(m.strip() for m in args.method.split(",") if m.strip())
    if args.input is not None and len(methods) != 1:
        raise CliError("selection mode takes exactly one --method")
    threads = args.threads
    if threads is None:
        env = os.environ.get("SKEWSELECT_THREADS", "")
        try:
            threads = int(env) if env else 1
        except ValueError:
            raise CliError(
                f"SKEWSELECT_THREADS must be an integer, got {env!r}") from None
    return RunConfig(
        input=args.input,
        simulate=args.simulate,
        methods=methods,
        g_min=g_min,
        g_max=g_max,
        seed=args.seed,
        standardize=not args.no_standardize,
        label_column=args.label_col,
        out_dir=args.out_dir,
        replicates=args.replicates,
        n=args.n,
        threads=threads,
    )


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        config = _config_from_args(args)
        if config.simulate:
            run_simulation(config)
        else:
            run_select(config)
        return 0
    except SystemExit:
        raise
    except Exception as err:
        print(f"skewselect: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
