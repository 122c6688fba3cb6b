"""Holdout-replication benchmark: run every method on every dataset, then aggregate."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .baseclf import ClassifierSpec
from .config import (
    ALL_METRICS,
    INDIVIDUAL_METHODS,
    METHOD_LABELS,
    PS_DES_METHODS,
    ExperimentConfig,
    format_config,
)
from .dataio import Dataset, apply_scaler, fit_scaler, load_csv, stratified_split
from .destech import Technique, metades_train
from .evalstats import METRICS, ScoreTable, average_ranks, mean_table, win_tie_loss, wilcoxon_signed_rank
from .pool import build_pool, cache_dsel_outputs
from .postselect import (
    PotentialKind,
    PotentialMetric,
    PsDesSystem,
    candidate_ensembles,
    combine,
    post_select,
    random_post_select,
)
from .regions import QueryOutputs, RegionOfCompetence, nearest_batch
from .seeding import child_seed, derive_rng

logger = logging.getLogger(__name__)

RAW_COLUMNS = ("dataset", "replication", "method", "metric", "value")


@dataclass(frozen=True, order=True)
class Record:
    dataset: str
    replication: int
    method: str
    metric: str
    value: float


@dataclass
class ResultsStore:
    records: list[Record] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    failures: list[tuple[str, str]] = field(default_factory=list)

    def add(self, dataset: str, replication: int, method: str, metric: str, value: float) -> None:
        # stored at the CSV precision so in-memory and reloaded aggregates agree
        self.records.append(Record(dataset, int(replication), method, metric, round(float(value), 6)))

    def sorted_records(self) -> list[Record]:
        return sorted(set(self.records))

    def datasets(self) -> list[str]:
        return list(dict.fromkeys(r.dataset for r in self.records))

    def methods(self) -> list[str]:
        seen = set(r.method for r in self.records)
        known = [m for m in METHOD_LABELS if m in seen]
        return known + sorted(seen - set(known))

    def metrics(self) -> list[str]:
        seen = set(r.metric for r in self.records)
        return [m for m in ALL_METRICS if m in seen] + sorted(seen - set(ALL_METRICS))


def save_results(store: ResultsStore, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_COLUMNS)
        for r in store.sorted_records():
            w.writerow([r.dataset, r.replication, r.method, r.metric, f"{r.value:.6f}"])


def load_results(path: str | Path) -> ResultsStore:
    store = ResultsStore()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RAW_COLUMNS:
            raise ValueError(f"{path}: expected columns {','.join(RAW_COLUMNS)}")
        for row in reader:
            store.add(row["dataset"], int(row["replication"]), row["method"], row["metric"], float(row["value"]))
    return store


# --------------------------------------------------------------------------- one replication


def _needed_techniques(cfg: ExperimentConfig) -> tuple[Technique, ...]:
    wanted = list(Technique(t) for t in cfg.des_set)
    for m in cfg.methods:
        if m in INDIVIDUAL_METHODS and Technique(m) not in wanted:
            wanted.append(Technique(m))
    return tuple(wanted)


def predict_replication(ds: Dataset, replication: int, cfg: ExperimentConfig) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Split, scale, build the pool and label the test split with every configured method.

    Returns the test labels and a ``method -> predictions`` mapping. The
    individual DES methods reuse the exact ensembles that PS-DES post-selects.
    """
    split = stratified_split(ds, cfg.split_fractions, derive_rng(cfg.master_seed, ds.name, replication, "split"))
    scaler = fit_scaler(split.train if cfg.scaler_scope == "train" else ds)
    train, dsel, test = (apply_scaler(scaler, part) for part in (split.train, split.dsel, split.test))

    specs = [ClassifierSpec(kind) for kind in cfg.base_classifiers]
    pool_seed = child_seed(derive_rng(cfg.master_seed, ds.name, replication, "pool"))
    pool = cache_dsel_outputs(build_pool(train, cfg.b, specs, pool_seed), dsel)

    techniques = _needed_techniques(cfg)
    meta = None
    if Technique.META_DES in techniques:
        meta = metades_train(pool, dsel, cfg.hc, cfg.k, cfg.kp_meta, cfg.meta_threshold)
    system = PsDesSystem(
        pool,
        dsel,
        tuple(Technique(t) for t in cfg.des_set),
        PotentialMetric(PotentialKind.ACCURACY),
        cfg.k,
        cfg.kp_knop,
        cfg.kp_meta,
        meta,
        seed=child_seed(derive_rng(cfg.master_seed, ds.name, replication, "select")),
    )
    metrics_for = {
        "ps_des_acc": PotentialMetric(PotentialKind.ACCURACY),
        "ps_des_f": PotentialMetric(PotentialKind.F_SCORE, cfg.f_convention),
        "ps_des_mcc": PotentialMetric(PotentialKind.MCC),
    }

    proba = pool.proba(test.features)
    roc_idx, roc_dist = nearest_batch(test.features, dsel.features, cfg.k)
    preds: dict[str, list[int]] = {m: [] for m in cfg.methods}
    for q in range(test.n_samples):
        query = QueryOutputs(test.features[q], proba[:, q, :])
        roc = RegionOfCompetence(roc_idx[q], roc_dist[q])
        _, cands = candidate_ensembles(query.x, system, techniques, roc, query)
        proposals = [cands[t] for t in system.des_set]
        for m in cfg.methods:
            if m in INDIVIDUAL_METHODS:
                chosen = cands[Technique(m)]
            elif m == "random":
                chosen = random_post_select(proposals, system.query_rng(q, "random"))
            else:
                chosen = post_select(proposals, metrics_for[m])
            preds[m].append(combine(chosen))
    return test.labels, {m: np.asarray(v) for m, v in preds.items()}


def run_replication(ds: Dataset, replication: int, cfg: ExperimentConfig) -> list[tuple]:
    y_true, preds = predict_replication(ds, replication, cfg)
    rows = []
    for method, y_pred in preds.items():
        for metric in cfg.metrics:
            rows.append((ds.name, replication, method, metric, METRICS[metric](y_true, y_pred, ds.n_classes)))
    return rows


def _run_cell(args):
    path, replication, cfg = args
    ds = load_csv(path)
    try:
        return path, replication, run_replication(ds, replication, cfg), None
    except Exception as exc:  # recorded, not fatal
        logger.exception("replication %d of %s failed", replication, path)
        return path, replication, [], f"{type(exc).__name__}: {exc}"


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, progress=None) -> ResultsStore:
    """Run every dataset x replication cell; per-dataset failures are recorded and skipped."""
    store = ResultsStore(metadata={"config_hash": cfg.digest(), "master_seed": cfg.master_seed})
    cells = []
    for path in cfg.dataset_paths:
        try:
            load_csv(path)
        except Exception as exc:
            store.failures.append((str(path), f"load: {exc}"))
            logger.error("skipping %s: %s", path, exc)
            continue
        cells.extend((path, r, cfg) for r in range(cfg.replications))

    failed = set()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outcomes: Iterable = ex.map(_run_cell, cells)
            results = list(_report(outcomes, len(cells), progress))
    else:
        results = list(_report(map(_run_cell, cells), len(cells), progress))
    for path, rep, rows, err in results:
        if err:
            store.failures.append((str(path), f"replication {rep}: {err}"))
            failed.add(path)
    for path, rep, rows, err in results:
        if path in failed:
            continue
        for row in rows:
            store.add(*row)
    return store


def _report(outcomes, total, progress):
    for i, out in enumerate(outcomes, 1):
        if progress:
            progress(i, total, out)
        yield out


# --------------------------------------------------------------------------- aggregation


@dataclass
class MetricReport:
    metric: str
    table: ScoreTable
    ranks: np.ndarray
    best: np.ndarray  # bool (methods, datasets)


@dataclass
class PairwiseReport:
    control: str
    metric: str
    others: tuple[str, ...]
    wtl: dict[str, tuple[int, int, int]]
    p_values: dict[str, float]


@dataclass
class Reports:
    metrics: dict[str, MetricReport]
    pairwise: list[PairwiseReport]
    missing: list[str]
    ranking_check: dict[str, dict]


RANKING_MIN_DATASETS = 10


def aggregate(store: ResultsStore, alternative: str = "greater", zero_method: str = "wilcox") -> Reports:
    if not store.records:
        raise ValueError("results store is empty")
    methods = store.methods()
    datasets = store.datasets()
    present = {(r.dataset, r.method, r.metric) for r in store.records}
    reports: dict[str, MetricReport] = {}
    missing = []
    for metric in store.metrics():
        complete = []
        for ds in datasets:
            gaps = [m for m in methods if (ds, m, metric) not in present]
            if gaps:
                missing.append(f"{metric}/{ds}: missing {', '.join(gaps)}")
            else:
                complete.append(ds)
        if not complete:
            continue
        table = mean_table(
            [(r.method, r.dataset, r.value) for r in store.records if r.metric == metric and r.dataset in complete],
            methods,
            complete,
        )
        best = table.values == table.values.max(axis=0, keepdims=True)
        reports[metric] = MetricReport(metric, table, average_ranks(table), best)

    pairwise = []
    for control in (m for m in PS_DES_METHODS if m in methods):
        others = tuple(m for m in methods if m != control)
        for metric, rep in reports.items():
            wtl = {o: win_tie_loss(control, o, rep.table) for o in others}
            p = {}
            for o in others:
                if len(rep.table.datasets) >= 3:
                    p[o] = wilcoxon_signed_rank(rep.table.row(control), rep.table.row(o), alternative, zero_method).p_value
                else:
                    p[o] = float("nan")
            pairwise.append(PairwiseReport(control, metric, others, wtl, p))

    return Reports(reports, pairwise, missing, _ranking_check(reports))


def _ranking_check(reports: dict[str, MetricReport]) -> dict[str, dict]:
    """Does PS-DES-acc rank at least as well as every individual DES technique?"""
    out = {}
    for metric, rep in reports.items():
        methods = rep.table.methods
        if "ps_des_acc" not in methods:
            continue
        ranks = dict(zip(methods, rep.ranks))
        rivals = {m: ranks[m] for m in INDIVIDUAL_METHODS if m in ranks}
        worse_than = [m for m, r in rivals.items() if ranks["ps_des_acc"] > r]
        out[metric] = {
            "n_datasets": len(rep.table.datasets),
            "applicable": len(rep.table.datasets) >= RANKING_MIN_DATASETS,
            "holds": not worse_than,
            "ps_des_acc_rank": ranks["ps_des_acc"],
            "beaten_by": worse_than,
        }
    return out


def _label(m: str) -> str:
    return METHOD_LABELS.get(m, m)


def _fmt(v: float) -> str:
    return "nan" if np.isnan(v) else f"{v:.3f}"


def write_reports(reports: Reports, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for metric, rep in reports.metrics.items():
        t = rep.table
        csv_path = out / f"mean_{metric}.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["dataset"] + [_label(m) for m in t.methods])
            for j, ds in enumerate(t.datasets):
                w.writerow([ds] + [f"{t.values[i, j]:.6f}" for i in range(len(t.methods))])
            w.writerow(["ranking"] + [f"{r:.2f}" for r in rep.ranks])
        md_path = out / f"mean_{metric}.md"
        lines = [
            "| Dataset | " + " | ".join(_label(m) for m in t.methods) + " |",
            "|---|" + "---:|" * len(t.methods),
        ]
        for j, ds in enumerate(t.datasets):
            cells = [f"**{t.values[i, j]:.3f}**" if rep.best[i, j] else f"{t.values[i, j]:.3f}" for i in range(len(t.methods))]
            lines.append(f"| {ds} | " + " | ".join(cells) + " |")
        lines.append("| ranking | " + " | ".join(f"{r:.2f}" for r in rep.ranks) + " |")
        md_path.write_text("\n".join(lines) + "\n")
        written += [csv_path, md_path]

    by_control: dict[str, list[PairwiseReport]] = {}
    for pr in reports.pairwise:
        by_control.setdefault(pr.control, []).append(pr)
    for control, prs in by_control.items():
        others = prs[0].others
        wtl_path, p_path = out / f"{control}_wtl.csv", out / f"{control}_pvalue.csv"
        with open(wtl_path, "w", newline="") as fw, open(p_path, "w", newline="") as fp:
            ww, wp = csv.writer(fw, lineterminator="\n"), csv.writer(fp, lineterminator="\n")
            ww.writerow(["metric"] + [_label(o) for o in others])
            wp.writerow(["metric"] + [_label(o) for o in others])
            for pr in prs:
                ww.writerow([pr.metric] + ["/".join(map(str, pr.wtl[o])) for o in others])
                wp.writerow([pr.metric] + [_fmt(pr.p_values[o]) for o in others])
        written += [wtl_path, p_path]

    summary = out / "summary.md"
    lines = ["# Ranking check", ""]
    for metric, chk in reports.ranking_check.items():
        if chk["holds"]:
            status = "holds"
        elif chk["applicable"]:
            status = "FLAG: does not hold"
        else:
            status = "does not hold (fewer than 10 datasets, informational)"
        beaten = f"; ranked behind {', '.join(_label(m) for m in chk['beaten_by'])}" if chk["beaten_by"] else ""
        lines.append(
            f"- {metric}: PS-DES-acc mean rank {chk['ps_des_acc_rank']:.2f} over {chk['n_datasets']} datasets: {status}{beaten}"
        )
    if reports.missing:
        lines += ["", "# Missing cells", ""] + [f"- {m}" for m in reports.missing]
    summary.write_text("\n".join(lines) + "\n")
    written.append(summary)
    return written


def save_run(store: ResultsStore, cfg: ExperimentConfig, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw = out / "raw_scores.csv"
    save_results(store, raw)
    (out / "config.txt").write_text(format_config(cfg))
    meta = dict(store.metadata, failures=store.failures)
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return raw
