"""Command-line entry point: ``clickmix {simulate,fit,sweep,evaluate,replicate}``.

Exit codes: 0 success, 2 fit failure, 3 input or usage error.
"""

from __future__ import annotations

import argparse
import logging
import secrets
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, serialize
from .continuous import expected_complete_rate_loglik, literal_rate_update, rate_aggregates
from .em import EmConfig, FitFailure, ModelKind, fit, prepare_stats, sweep
from .evaluate import (
    adjusted_rand_index,
    bic_table,
    format_selection_table,
    quantiles,
    selection_rows,
    to_tsv,
)
from .seqdata import DataFormatError, SequenceFormat, collapse_dataset, parse_dataset, write_dataset
from .simulate import ScenarioKind, ScenarioSpec, constants_version, generate_scenario
from .studies import (
    default_threads,
    run_msnbc_study,
    run_semi_supervised_study,
    run_sweep_study,
)

EXIT_OK = 0
EXIT_FIT_FAILURE = 2
EXIT_INPUT_ERROR = 3

log = logging.getLogger("clickmix")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _group_range(text: str) -> tuple[int, int]:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return int(lo), int(hi)
        g = int(text)
        return g, g
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected G or LO..HI, got {text!r}") from None


def _add_em_flags(p: argparse.ArgumentParser) -> None:
    d = EmConfig()
    p.add_argument("--starts", type=int, default=d.num_starts, help="emEM random starts")
    p.add_argument("--short-iters", type=int, default=d.short_iters, help="EM iterations per short run")
    p.add_argument("--epsilon", type=float, default=d.epsilon, help="Aitken stopping tolerance")
    p.add_argument("--max-iters", type=int, default=d.max_iters)
    p.add_argument("--floor", type=float, default=d.floor, help="lower bound on every parameter")
    p.add_argument("--seed", type=int, default=None)


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("data", type=Path)
    p.add_argument("--kind", required=True, type=str.upper, choices=[k.value for k in ModelKind])
    p.add_argument(
        "--format", default="auto",
        choices=["auto", SequenceFormat.SEQUENCES_ONLY.value, SequenceFormat.WITH_TIMES.value],
    )
    p.add_argument("--num-states", type=int, default=None, help="fix J instead of inferring it")
    p.add_argument("--collapse", action="store_true", help="merge repeated visits before CM/DM fitting")
    p.add_argument("--ignore-labels", action="store_true", help="treat every sequence as unlabelled")
    p.add_argument("--out", type=Path, default=None, help="write the fit result as JSON")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clickmix", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="write simulated datasets with truth sidecars")
    p.add_argument("--scenario", required=True)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=None, help="sequences per dataset")
    p.add_argument("--length-range", type=_group_range, default=None, metavar="LO..HI")
    p.add_argument("--labelled-fraction", type=float, default=None)
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("fit", help="fit one G")
    _add_data_flags(p)
    p.add_argument("--groups", type=int, required=True)
    p.add_argument("--compare-literal-update", action="store_true",
                   help="CM: also score the alternative a/b rate expression")
    _add_em_flags(p)

    p = sub.add_parser("sweep", help="fit a range of G and select by BIC")
    _add_data_flags(p)
    p.add_argument("--groups", type=_group_range, default=(1, 5), metavar="LO..HI")
    _add_em_flags(p)

    p = sub.add_parser("evaluate", help="ARI of a fit result against a truth sidecar")
    p.add_argument("--result", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--include-labelled", action="store_true")

    p = sub.add_parser("replicate", help="rerun a simulation study end to end")
    p.add_argument("study", choices=["sim1", "sim2", "sim3", "msnbc"])
    p.add_argument("--replicates", type=int, default=None, help="default 100 (msnbc: 1)")
    p.add_argument("--size", choices=["small", "large", "both"], default="both")
    p.add_argument("--groups", type=_group_range, default=(1, 5), metavar="LO..HI")
    p.add_argument("--include-labelled", action="store_true", help="sim3: score labelled sequences too")
    p.add_argument("--threads", type=int, default=None, help="worker processes (env CLICKMIX_THREADS)")
    p.add_argument("--out", type=Path, default=Path("."))
    _add_em_flags(p)
    return parser


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = secrets.randbits(32)
        print(f"seed: {seed}")
    return seed


def _config(args, kind, g_range) -> EmConfig:
    return EmConfig(
        num_starts=args.starts, short_iters=args.short_iters, epsilon=args.epsilon,
        max_iters=args.max_iters, floor=args.floor, g_range=g_range,
        seed=args.seed, model_kind=kind,
    )


def _load(args):
    fmt = args.format
    if fmt == "auto":
        with open(args.data, encoding="utf-8") as fh:
            has_times = any(";" in line for line in fh if line.strip() and not line.startswith("#"))
        fmt = SequenceFormat.WITH_TIMES if has_times else SequenceFormat.SEQUENCES_ONLY
    data = parse_dataset(args.data, fmt, label_column=True, num_states=args.num_states)
    if args.ignore_labels:
        data = data.without_labels()
    kind = ModelKind.parse(args.kind)
    if args.collapse and kind is not ModelKind.DWM:
        data = collapse_dataset(data)
    if kind is ModelKind.CM and not data.has_times:
        raise UsageError("CM needs holding times: give data in the sequences-with-times format")
    if kind in (ModelKind.CM, ModelKind.DM) and data.has_repeats:
        raise UsageError(f"{kind.value} forbids repeated states; rerun with --collapse")
    return data, kind


def _describe(result) -> None:
    model = result.model
    print(f"model: {model.kind}, G={model.n_groups}, J={model.num_states}")
    print(f"log-likelihood: {result.loglik!r}")
    print(f"BIC: {result.bic!r}")
    print(f"iterations: {result.iterations}  converged: {result.converged}  start: {result.chosen_start}")
    print("weights: " + " ".join(f"{w:.4f}" for w in model.weights))
    if model.kind == "CM":
        print("mean holding time per state (rows = groups):")
        for g, row in enumerate(model.holding_times(), start=1):
            print(f"  g{g}: " + " ".join(f"{t:.4g}" for t in row))
    if result.monotonicity_violations:
        print(f"warning: {result.monotonicity_violations} log-likelihood decreases", file=sys.stderr)


def cmd_simulate(args) -> int:
    try:
        kind = ScenarioKind(args.scenario)
    except ValueError:
        raise UsageError(f"unknown scenario {args.scenario!r}; choose from "
                         + ", ".join(k.value for k in ScenarioKind if k is not ScenarioKind.CUSTOM))
    if kind is ScenarioKind.CUSTOM:
        raise UsageError("custom scenarios are only available through the library")
    seed = _resolve_seed(args.seed)
    overrides = {}
    if args.n is not None:
        overrides["n"] = args.n
    if args.length_range is not None:
        overrides["length_range"] = args.length_range
    if args.labelled_fraction is not None:
        overrides["labelled_fraction"] = args.labelled_fraction
    spec = ScenarioSpec.preset(kind, replicates=args.replicates, seed=seed, **overrides)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for r, rep in enumerate(generate_scenario(spec)):
        stem = f"{kind.value}_r{r:03d}"
        write_dataset(rep.dataset, out / f"{stem}.txt")
        rows = [["index", "group"]] + [[str(i + 1), str(int(g))] for i, g in enumerate(rep.truth)]
        (out / f"{stem}.truth.tsv").write_text(to_tsv(rows), encoding="utf-8")
        files += [f"{stem}.txt", f"{stem}.truth.tsv"]
        if rep.raw is not None:
            write_dataset(rep.raw, out / f"{stem}.raw.txt")
            files.append(f"{stem}.raw.txt")
    manifest = {
        "command": "simulate",
        "scenario": kind.value,
        "seed": seed,
        "spec": {**asdict(spec), "kind": kind.value},
        "constants_version": constants_version(),
        "clickmix_version": __version__,
        "files": files,
    }
    (out / f"{kind.value}_manifest.json").write_text(serialize.dumps(manifest), encoding="utf-8")
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


def cmd_fit(args) -> int:
    data, kind = _load(args)
    args.seed = _resolve_seed(args.seed)
    config = _config(args, kind, (args.groups, args.groups))
    result = fit(data, args.groups, config)
    _describe(result)
    if args.compare_literal_update:
        if kind is not ModelKind.CM:
            raise UsageError("--compare-literal-update applies to CM only")
        stats = prepare_stats(data, kind)
        agg = rate_aggregates(stats, result.responsibilities)
        ours = expected_complete_rate_loglik(*agg, result.model.generators)
        alt = expected_complete_rate_loglik(*agg, literal_rate_update(stats, result.responsibilities, config.floor))
        print(f"expected complete-data rate term: fitted {ours!r}, a/b expression {alt!r}")
    if args.out:
        serialize.save(serialize.fit_to_dict(result), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    data, kind = _load(args)
    args.seed = _resolve_seed(args.seed)
    config = _config(args, kind, args.groups)
    result = sweep(data, config)
    table = bic_table({kind.value: result.bic_by_g()})
    print(table.format(), end="")
    for g, why in result.failures.items():
        print(f"G={g} failed: {why}", file=sys.stderr)
    _describe(result.best)
    if args.out:
        serialize.save(serialize.fit_to_dict(result.best, result.bic_by_g()), args.out)
    return EXIT_OK


def _read_truth(path: Path) -> np.ndarray:
    rows = [line.split("\t") for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not rows or rows[0][:2] != ["index", "group"]:
        raise DataFormatError(f"{path}: expected an index/group TSV header")
    return np.array([int(r[1]) for r in rows[1:]])


def cmd_evaluate(args) -> int:
    result = serialize.fit_from_dict(serialize.load(args.result))
    truth = _read_truth(args.truth)
    pred = result.assignments()
    if truth.shape != pred.shape:
        raise DataFormatError(f"truth has {truth.size} rows, fit has {pred.size} sequences")
    keep = np.ones(truth.size, dtype=bool) if args.include_labelled else ~result.labelled
    if keep.sum() < 2:
        raise DataFormatError("fewer than two sequences to score")
    ari = adjusted_rand_index(truth[keep], pred[keep])
    print(f"ARI: {ari!r} over {int(keep.sum())} sequences")
    return EXIT_OK


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _record_rows(records, groups) -> list[list[str]]:
    head = ["setting", "kind", "replicate", "selected_g", "ari"] + [f"bic_G{g}" for g in groups]
    head += ["floor_events", "monotonicity_violations"]
    rows = [head]
    for r in records:
        bics = [("" if r.bics.get(g) is None else repr(r.bics[g])) for g in groups]
        rows.append(
            [r.setting, r.kind, str(r.replicate), "" if r.selected_g is None else str(r.selected_g),
             "" if r.ari is None else repr(r.ari)] + bics
            + [str(r.floor_events), str(r.monotonicity_violations)]
        )
    return rows


def cmd_replicate(args) -> int:
    seed = _resolve_seed(args.seed)
    threads = args.threads or default_threads()
    sizes = ("small", "large") if args.size == "both" else (args.size,)
    replicates = args.replicates or (1 if args.study == "msnbc" else 100)
    config = EmConfig(
        num_starts=args.starts, short_iters=args.short_iters, epsilon=args.epsilon,
        max_iters=args.max_iters, floor=args.floor, g_range=args.groups, seed=0,
    )
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    name = args.study
    if name in ("sim1", "sim2"):
        study = run_sweep_study(name, sizes, replicates, seed, config, threads=threads)
    elif name == "sim3":
        study = run_semi_supervised_study(sizes, replicates, seed, config, threads=threads,
                                          include_labelled=args.include_labelled)
    else:
        study = run_msnbc_study(replicates, seed, config, threads=threads)

    groups = config.groups if name != "sim3" else [3]
    text = format_selection_table(study.summaries)
    if name == "sim3":
        lines = ["setting\tkind\t" + "\t".join(("min", "q1", "median", "q3", "max"))]
        for setting, s in study.summaries:
            q = quantiles(s.aris)
            lines.append(f"{setting}\t{s.kind}\t" + "\t".join(f"{v:.4f}" for v in q.values()))
        text = "ARI distribution on " + ("all" if args.include_labelled else "unlabelled") \
            + " sequences\n" + _tsv_align(lines)
    files = {
        f"{name}_table.txt": text,
        f"{name}_selection.tsv": to_tsv(selection_rows(study.summaries)),
        f"{name}_replicates.tsv": to_tsv(_record_rows(study.records, groups)),
        f"{name}_ari_long.tsv": to_tsv(
            [["setting", "kind", "replicate", "ari"]]
            + [[r.setting, r.kind, str(r.replicate), repr(r.ari)] for r in study.records if r.ari is not None]
        ),
    }
    if study.bic_tables:
        first = study.bic_tables[0][1]
        files[f"{name}_bic_table.txt"] = first.format()
        bic_rows = [["replicate"] + first.records()[0]]
        for r, table in study.bic_tables:
            bic_rows += [[str(r)] + row for row in table.records()[1:]]
        files[f"{name}_bic.tsv"] = to_tsv(bic_rows)
        text = text + "\nBIC by model and G (replicate 0)\n" + first.format()
    manifest = {
        "command": "replicate",
        "study": name,
        "seed": seed,
        "replicates": replicates,
        "sizes": list(sizes),
        "config": {**asdict(config), "model_kind": None, "seed": None},
        "constants_version": constants_version(),
        "clickmix_version": __version__,
        "floor_events": study.floor_events,
        "monotonicity_violations": study.monotonicity_violations,
        "files": sorted(files),
    }
    files[f"{name}_manifest.json"] = serialize.dumps(manifest)
    for fname, content in files.items():
        _write(out / fname, content)
    print(text, end="")
    print(f"log-likelihood decreases: {study.monotonicity_violations} (floor-bound: {study.floor_events})")
    return EXIT_OK


def _tsv_align(lines: list[str]) -> str:
    rows = [ln.split("\t") for ln in lines]
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n" for r in rows)


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "sweep": cmd_sweep,
    "evaluate": cmd_evaluate,
    "replicate": cmd_replicate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except FitFailure as exc:
        print(f"clickmix: fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT_FAILURE
    except (UsageError, DataFormatError, ValueError, OSError) as exc:
        print(f"clickmix: error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
