"""End-to-end replication studies: generate, fit or sweep, evaluate."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial

import numpy as np

from .em import EmConfig, FitFailure, fit, sweep
from .evaluate import BicTable, EvalSummary, adjusted_rand_index, bic_table, selection_table
from .seqdata import collapse_dataset
from .simulate import ScenarioSpec, generate_replicate

THREADS_ENV = "CLICKMIX_THREADS"

STUDIES = ("sim1", "sim2", "sim3", "msnbc")


@dataclass
class ReplicateRecord:
    setting: str
    kind: str
    replicate: int
    selected_g: int | None
    ari: float | None
    bics: dict[int, float | None] = field(default_factory=dict)
    floor_events: int = 0
    monotonicity_violations: int = 0


@dataclass
class StudyResult:
    study: str
    records: list[ReplicateRecord]
    summaries: list[tuple[str, EvalSummary]]
    bic_tables: list[tuple[int, BicTable]] = field(default_factory=list)

    @property
    def monotonicity_violations(self) -> int:
        return sum(r.monotonicity_violations for r in self.records)

    @property
    def floor_events(self) -> int:
        return sum(r.floor_events for r in self.records)

    def summary(self, setting: str, kind: str) -> EvalSummary:
        for s, summ in self.summaries:
            if s == setting and summ.kind == kind:
                return summ
        raise KeyError((setting, kind))


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def fit_seed(seed: int, replicate: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(replicate, 2)).generate_state(1)[0])


def _map(func, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def _sweep_replicate(r, *, spec, config, kinds, setting):
    rep = generate_replicate(spec, r)
    out = []
    cfg_seed = fit_seed(spec.seed, r)
    for kind in kinds:
        cfg = replace(config, model_kind=kind, seed=cfg_seed)
        try:
            res = sweep(rep.dataset, cfg)
        except FitFailure:
            out.append(ReplicateRecord(setting, kind, r, None, None))
            continue
        ari = adjusted_rand_index(rep.truth, res.best.assignments())
        out.append(ReplicateRecord(
            setting, kind, r, res.best_g, ari, res.bic_by_g(),
            sum(f.floor_events for f in res.fits.values()),
            sum(f.monotonicity_violations for f in res.fits.values()),
        ))
    return out


def _summaries(records, settings, kinds, g_range):
    out = []
    for setting in settings:
        for kind in kinds:
            rows = [r for r in records if r.setting == setting and r.kind == kind and r.selected_g is not None]
            if rows:
                out.append((setting, selection_table(kind, [r.selected_g for r in rows], [r.ari for r in rows], g_range)))
    return out


def run_sweep_study(
    study: str, sizes=("small", "large"), replicates: int = 100, seed: int = 0,
    config: EmConfig | None = None, kinds=("CM", "DM"), threads: int = 1,
) -> StudyResult:
    """Clustering study (sim1 or sim2): sweep G for each kind and replicate."""
    config = config or EmConfig()
    records = []
    settings = []
    for size in sizes:
        spec = ScenarioSpec.preset(f"{study}-{size}", replicates=replicates, seed=seed)
        setting = f"L {spec.length_range[0]}-{spec.length_range[1]}, N={spec.n}"
        settings.append(setting)
        task = partial(_sweep_replicate, spec=spec, config=config, kinds=kinds, setting=setting)
        for chunk in _map(task, list(range(replicates)), threads):
            records.extend(chunk)
    return StudyResult(study, records, _summaries(records, settings, kinds, config.g_range))


def _semi_replicate(r, *, spec, config, kinds, setting, n_groups, include_labelled):
    rep = generate_replicate(spec, r)
    unlabelled = np.array([s.label is None for s in rep.dataset.sequences])
    keep = np.ones_like(unlabelled) if include_labelled else unlabelled
    out = []
    for kind in kinds:
        cfg = replace(config, model_kind=kind, seed=fit_seed(spec.seed, r))
        try:
            res = fit(rep.dataset, n_groups, cfg)
        except FitFailure:
            out.append(ReplicateRecord(setting, kind, r, None, None))
            continue
        ari = adjusted_rand_index(rep.truth[keep], res.assignments()[keep])
        out.append(ReplicateRecord(
            setting, kind, r, n_groups, ari, {n_groups: res.bic},
            res.floor_events, res.monotonicity_violations,
        ))
    return out


def run_semi_supervised_study(
    sizes=("small", "large"), replicates: int = 100, seed: int = 0,
    config: EmConfig | None = None, kinds=("CM", "DM"), threads: int = 1,
    include_labelled: bool = False,
) -> StudyResult:
    """sim3: the sim2 draws with 70% of labels revealed, fitted at G=3."""
    config = config or EmConfig()
    records, settings = [], []
    for size in sizes:
        spec = ScenarioSpec.preset(f"sim3-{size}", replicates=replicates, seed=seed)
        setting = f"L {spec.length_range[0]}-{spec.length_range[1]}, N={spec.n}"
        settings.append(setting)
        task = partial(
            _semi_replicate, spec=spec, config=config, kinds=kinds, setting=setting,
            n_groups=3, include_labelled=include_labelled,
        )
        for chunk in _map(task, list(range(replicates)), threads):
            records.extend(chunk)
    return StudyResult("sim3", records, _summaries(records, settings, kinds, (3, 3)))


def _msnbc_replicate(r, *, spec, config, setting):
    rep = generate_replicate(spec, r)
    data = {"DWM": rep.raw, "DM": collapse_dataset(rep.raw), "CM": rep.dataset}
    records, rows = [], {}
    for kind in ("DWM", "DM", "CM"):
        cfg = replace(config, model_kind=kind, seed=fit_seed(spec.seed, r))
        try:
            res = sweep(data[kind], cfg)
        except FitFailure:
            records.append(ReplicateRecord(setting, kind, r, None, None))
            rows[kind] = {g: None for g in cfg.groups}
            continue
        rows[kind] = res.bic_by_g()
        ari = adjusted_rand_index(rep.truth, res.best.assignments()) if kind == "CM" else None
        records.append(ReplicateRecord(
            setting, kind, r, res.best_g, ari, rows[kind],
            sum(f.floor_events for f in res.fits.values()),
            sum(f.monotonicity_violations for f in res.fits.values()),
        ))
    return records, bic_table(rows)


def run_msnbc_study(
    replicates: int = 1, seed: int = 0, config: EmConfig | None = None, threads: int = 1,
    n: int | None = None,
) -> StudyResult:
    """Repeat-prone 17-category streams with times from four hidden rate sets.

    DWM is fitted to the raw streams, DM and CM to the collapsed streams
    (CM with the simulated times). ARI is reported against the rate set.
    """
    config = config or EmConfig()
    spec = ScenarioSpec.preset("msnbc-augment", replicates=replicates, seed=seed)
    if n is not None:
        spec = replace(spec, n=n)
    setting = f"L {spec.length_range[0]}-{spec.length_range[1]}, N={spec.n}"
    task = partial(_msnbc_replicate, spec=spec, config=config, setting=setting)
    records, tables = [], []
    for r, (recs, table) in enumerate(_map(task, list(range(replicates)), threads)):
        records.extend(recs)
        tables.append((r, table))
    summ = _summaries([x for x in records if x.kind == "CM"], [setting], ["CM"], config.g_range)
    return StudyResult("msnbc", records, summ, tables)
