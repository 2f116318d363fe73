"""Scenario configuration, experiment execution and result tables.

A scenario is one cell of the grid: dataset x split x bias x missing level.
Configs are JSON documents; see ``README.md`` for the schema.
"""
from __future__ import annotations

import copy
import csv
import hashlib
import io
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .bif import builtin_asia, load_bif, save_bif
from .bn import forward_sample
from .data import inject_missing, load_csv
from .ensemble import DegeneratePartyError, LearningConfig, train_fbne
from .evaluation import CENTRAL, FBNE, VERTIBAYES, ResultRecord, cross_validate, stratified_folds
from .federation import InfeasibleSplitError, SplitPlan, make_parties
from .learning import EmConfig
from .table import DataTable

logger = logging.getLogger(__name__)

FIXTURES_ENV = "FBNE_FIXTURES"
MISSING_LEVELS = (0.0, 0.05, 0.1, 0.3)


def fixtures_dir() -> Path:
    env = os.environ.get(FIXTURES_ENV)
    return Path(env) if env else Path(__file__).with_name("fixtures")


def resolve_fixture(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    for candidate in (fixtures_dir() / path, fixtures_dir() / f"{path}.bif", fixtures_dir() / f"{path}.csv"):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no dataset or fixture named {path!r} (looked in {fixtures_dir()})")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    dataset: dict
    class_column: str
    split: SplitPlan
    missing_level: float = 0.0
    repeats: int = 10
    folds: int = 10
    seed: int = 0
    learning: LearningConfig = LearningConfig()
    output: str | None = None

    def __post_init__(self):
        if self.missing_level not in MISSING_LEVELS:
            raise ValueError(f"missing level must be one of {MISSING_LEVELS}")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        raw = copy.deepcopy(raw)
        split = dict(raw.pop("split", {}))
        split.setdefault("kind", "vertical")
        if "assignment" in split:
            split["assignment"] = {int(k): tuple(v) for k, v in split["assignment"].items()}
        learning = dict(raw.pop("learning", {}))
        em = EmConfig(**learning.pop("em", {}))
        if learning.get("ordering") is not None:
            learning["ordering"] = tuple(learning["ordering"])
        return cls(
            split=SplitPlan(**split),
            learning=LearningConfig(em=em, **learning),
            missing_level=float(raw.pop("missing_level", 0.0)),
            **raw,
        )

    def to_dict(self) -> dict:
        split = {
            "kind": self.split.kind, "n_parties": self.split.n_parties, "bias": self.split.bias,
            "hybrid_mode": self.split.hybrid_mode, "seed": self.split.seed,
        }
        if self.split.assignment:
            split["assignment"] = {str(k): list(v) for k, v in self.split.assignment.items()}
        em = self.learning.em
        return {
            "name": self.name,
            "dataset": self.dataset,
            "class_column": self.class_column,
            "split": split,
            "missing_level": self.missing_level,
            "repeats": self.repeats,
            "folds": self.folds,
            "seed": self.seed,
            "learning": {
                "max_parents": self.learning.max_parents,
                "min_fraction": self.learning.min_fraction,
                "ordering": list(self.learning.ordering) if self.learning.ordering else None,
                "bootstrap_size": self.learning.bootstrap_size,
                "voting": self.learning.voting,
                "em": {"max_iterations": em.max_iterations,
                       "log_likelihood_tolerance": em.log_likelihood_tolerance,
                       "seed": em.seed, "restarts": em.restarts},
            },
            "output": self.output,
        }


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as f:
        return json.load(f)


def load_dataset(spec: dict, class_column: str) -> DataTable:
    """Read a CSV or sample a network, per the config's ``dataset`` block."""
    source = spec.get("source", "csv")
    if source == "csv":
        return load_csv(resolve_fixture(spec["path"]),
                        categorical=set(spec.get("categorical", ())) | {class_column},
                        continuous=spec.get("continuous", ()))
    if source in ("builtin-asia", "bif"):
        net = builtin_asia() if source == "builtin-asia" else load_bif(resolve_fixture(spec["path"]))
        return forward_sample(net, int(spec.get("n", 10000)), int(spec.get("seed", 0)))
    raise ValueError(f"unknown dataset source {source!r}")


def repeat_seeds(seed: int, repeat: int) -> dict[str, int]:
    ss = np.random.SeedSequence([seed, repeat])
    vals = ss.generate_state(4)
    return dict(zip(("missing", "split", "folds", "cv"), (int(v) for v in vals)))


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    repeats: list[list[ResultRecord]] = field(default_factory=list)
    skipped: str | None = None

    @property
    def models(self) -> list[str]:
        return [r.model for r in self.repeats[0]] if self.repeats else []

    def aucs(self, model: str) -> np.ndarray:
        return np.array([next(r.auc for r in rep if r.model == model) for rep in self.repeats])

    def mean_auc(self, model: str) -> float:
        return float(np.mean(self.aucs(model)))

    def std_auc(self, model: str) -> float:
        return float(np.std(self.aucs(model)))

    def mean_times(self, model: str) -> dict[str, float]:
        recs = [next(r for r in rep if r.model == model) for rep in self.repeats]
        return {k: float(np.mean([r.wall_time[k] for r in recs])) for k in recs[0].wall_time}


def run_scenario(config: ScenarioConfig | dict, write: bool = True) -> ScenarioResult:
    """Load data, inject missingness, split, cross-validate every model per repeat."""
    if isinstance(config, dict):
        config = ScenarioConfig.from_dict(config)
    result = ScenarioResult(config)
    table = load_dataset(config.dataset, config.class_column)
    for rep in range(config.repeats):
        seeds = repeat_seeds(config.seed, rep)
        data = inject_missing(table, config.missing_level, seeds["missing"], exempt=[config.class_column])
        plan = SplitPlan(config.split.kind, config.split.n_parties, config.split.bias,
                         config.split.hybrid_mode, seeds["split"], config.split.assignment)
        labels = data.data[:, data.column_index(config.class_column)].astype(int)
        folds = stratified_folds(labels, config.folds, seeds["folds"])
        try:
            records = cross_validate(data, config.class_column, plan, config.learning, folds,
                                     config.name, seeds["cv"])
        except (InfeasibleSplitError, DegeneratePartyError) as e:
            result.skipped = str(e)
            result.repeats = []
            break
        for r in records:
            r.predictions = None
        result.repeats.append(records)
    if write and config.output:
        write_outputs(result, table, Path(config.output))
    return result


def _fmt(x: float) -> str:
    return "nan" if np.isnan(x) else f"{x:.6f}"


def display_name(model: str) -> str:
    if model == FBNE:
        return "FBNE"
    if model == CENTRAL:
        return "Central"
    if model == VERTIBAYES:
        return "VertiBayes"
    return "Party " + model.split("-", 1)[1]


def results_csv(result: ScenarioResult) -> str:
    cfg = result.config
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "split", "n_parties", "bias", "missing_level", "model",
                "auc_mean", "auc_std", "repeats", "repeat_aucs", "skipped"])
    base = [cfg.name, cfg.split.kind, cfg.split.n_parties, cfg.split.bias, cfg.missing_level]
    if result.skipped:
        w.writerow(base + ["", "", "", 0, "", result.skipped])
    for m in result.models:
        w.writerow(base + [m, _fmt(result.mean_auc(m)), _fmt(result.std_auc(m)), len(result.repeats),
                           " ".join(_fmt(a) for a in result.aucs(m)), ""])
    return buf.getvalue()


def rank_marks(values: list[float]) -> list[str]:
    """'*' for the best value (all ties), '†' for the next distinct value."""
    finite = sorted({v for v in values if not np.isnan(v)}, reverse=True)
    best = finite[0] if finite else None
    second = finite[1] if len(finite) > 1 else None
    return ["*" if v == best else "†" if v == second else "" for v in values]


def summary_table(entries: list[tuple[str, float, dict[str, float] | str]]) -> str:
    """Plain-text results table: FBNE, each party, central, VertiBayes.

    Each entry is ``(scenario, missing_level, {model: mean_auc})`` or, for a
    skipped scenario, ``(scenario, missing_level, reason)``.
    """
    seen: list[str] = []
    for _, _, vals in entries:
        if isinstance(vals, dict):
            seen += [m for m in vals if m not in seen]
    order = [FBNE] + sorted(m for m in seen if m.startswith("party-")) + [CENTRAL, VERTIBAYES]
    order = [m for m in order if m in seen]
    head = ["Name", "Missing Data Level"] + [display_name(m) for m in order]
    lines = [" | ".join(head), "-+-".join("-" * len(h) for h in head)]
    for name, level, vals in entries:
        if isinstance(vals, str):
            lines.append(f"{name} | {level:g} | skipped: {vals}")
            continue
        row = [vals.get(m, float("nan")) for m in order]
        cells = [_fmt(v) + mk if m in vals else "-" for m, v, mk in zip(order, row, rank_marks(row))]
        lines.append(" | ".join([name, f"{level:g}"] + cells))
    lines.append("")
    lines.append("'*' best performing model, '†' second best.")
    return "\n".join(lines) + "\n"


def summary_rows(results: list[ScenarioResult]) -> str:
    entries = []
    for res in results:
        vals = res.skipped or {m: res.mean_auc(m) for m in res.models}
        entries.append((res.config.name, res.config.missing_level, vals))
    return summary_table(entries)


def entries_from_csv(text: str) -> list[tuple[str, float, dict[str, float] | str]]:
    entries: dict[tuple[str, float], dict | str] = {}
    for row in csv.DictReader(io.StringIO(text)):
        key = (row["scenario"], float(row["missing_level"]))
        if row["skipped"]:
            entries[key] = row["skipped"]
        else:
            entries.setdefault(key, {})[row["model"]] = float(row["auc_mean"])
    return [(k[0], k[1], v) for k, v in entries.items()]


def parse_summary(text: str) -> dict[tuple[str, str], dict[str, float]]:
    """Inverse of ``summary_rows`` for the numeric cells."""
    lines = text.splitlines()
    head = [h.strip() for h in lines[0].split("|")]
    out = {}
    for line in lines[2:]:
        cells = [c.strip() for c in line.split("|")]
        if len(cells) != len(head):
            continue
        row = {}
        for h, c in zip(head[2:], cells[2:]):
            c = c.rstrip("*†")
            if c not in ("-", ""):
                row[h] = float(c)
        out[(cells[0], cells[1])] = row
    return out


def timings_csv(result: ScenarioResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scenario", "model", "structure_s", "parameters_s", "prediction_s"])
    for m in result.models:
        t = result.mean_times(m)
        w.writerow([result.config.name, m, f"{t['structure']:.4f}", f"{t['parameters']:.4f}",
                    f"{t['prediction']:.4f}"])
    return buf.getvalue()


def export_members(result: ScenarioResult, table: DataTable, out: Path) -> list[Path]:
    """Train FBNE once on all rows (repeat-0 split) and save each member as BIF."""
    cfg = result.config
    seeds = repeat_seeds(cfg.seed, 0)
    data = inject_missing(table, cfg.missing_level, seeds["missing"], exempt=[cfg.class_column])
    plan = SplitPlan(cfg.split.kind, cfg.split.n_parties, cfg.split.bias, cfg.split.hybrid_mode,
                     seeds["split"], cfg.split.assignment)
    ensemble = train_fbne(data, make_parties(data, plan, cfg.class_column), cfg.learning)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for m in ensemble.members:
        p = out / f"party-{m.party_id}.bif"
        save_bif(m.model.network, p, name=f"{cfg.name}_party_{m.party_id}")
        paths.append(p)
    return paths


def write_outputs(result: ScenarioResult, table: DataTable, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(results_csv(result), encoding="utf-8")
    (out / "summary.txt").write_text(summary_rows([result]), encoding="utf-8")
    recorded = {k: v for k, v in result.config.to_dict().items() if k != "output"}
    (out / "config.json").write_text(json.dumps(recorded, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if not result.skipped:
        (out / "timings.csv").write_text(timings_csv(result), encoding="utf-8")
        export_members(result, table, out / "models")


# -- grids ---------------------------------------------------------------------

def _merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def expand_grid(grid: dict) -> list[dict]:
    """Cartesian product of the ``axes`` over ``base``.

    Recognised axes: ``dataset`` (list of ``{name, dataset, class_column}``),
    ``split`` (list of split blocks), ``bias`` and ``missing_level``.
    """
    base = grid.get("base", {})
    axes = grid.get("axes", {})
    datasets = axes.get("dataset", [{}])
    splits = axes.get("split", [{}])
    biases = axes.get("bias", [None])
    levels = axes.get("missing_level", [base.get("missing_level", 0.0)])
    cells = []
    for ds, sp, bias, lvl in itertools.product(datasets, splits, biases, levels):
        cell = _merge(base, {k: v for k, v in ds.items() if k != "name"})
        cell = _merge(cell, {"split": sp, "missing_level": lvl})
        if bias is not None and cell["split"].get("kind") == "horizontal":
            cell["split"]["bias"] = bias
        split = cell.get("split", {})
        dataset_name = ds.get("name", cell.get("name", "scenario"))
        label = [dataset_name, split.get("kind", "vertical"),
                 f"{split.get('n_parties', 2)}p"]
        if split.get("kind") == "horizontal":
            label.append(f"bias{split.get('bias', 0.5):g}")
        cell["name"] = "-".join(label)
        cell["dataset_name"] = dataset_name
        if all(cell_hash(cell) != cell_hash(c) for c in cells):
            cells.append(cell)
    return cells


def cell_hash(cell: dict) -> str:
    payload = {k: v for k, v in cell.items() if k not in ("output",)}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _run_cell(cell: dict, out_dir: str) -> str:
    cell = dict(cell)
    cell.pop("dataset_name", None)
    cell["output"] = out_dir
    run_scenario(cell)
    Path(out_dir, "DONE").write_text("ok\n", encoding="utf-8")
    return out_dir


def run_grid(grid: dict, output: str | os.PathLike | None = None, jobs: int = 1) -> Path:
    """Run every cell not already completed; write one summary table per dataset."""
    root = Path(output or grid.get("output", "results"))
    cells = expand_grid(grid)
    todo = []
    for cell in cells:
        d = root / "cells" / cell_hash(cell)
        if (d / "DONE").exists():
            logger.info("skipping completed cell %s", cell["name"])
            continue
        todo.append((cell, str(d)))
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for f in [pool.submit(_run_cell, c, d) for c, d in todo]:
                f.result()
    else:
        for c, d in todo:
            _run_cell(c, d)
    by_dataset: dict[str, list[str]] = {}
    for cell in cells:
        by_dataset.setdefault(cell["dataset_name"], []).append(cell_hash(cell))
    for name, hashes in by_dataset.items():
        csvs = [(root / "cells" / h / "results.csv").read_text(encoding="utf-8") for h in hashes]
        merged = csvs[0].splitlines(keepends=True)[:1] + [
            line for c in csvs for line in c.splitlines(keepends=True)[1:]
        ]
        (root / f"results_{name}.csv").write_text("".join(merged), encoding="utf-8")
        entries = [e for c in csvs for e in entries_from_csv(c)]
        (root / f"summary_{name}.txt").write_text(summary_table(entries), encoding="utf-8")
    return root


def inspect_model(path) -> str:
    """Text description of a saved network: nodes, parents, parameter count."""
    net = load_bif(path)
    lines = [f"{len(net.variables)} variables, {sum(len(p) for p in net.parents)} arcs"]
    for v, ps, cpt in zip(net.variables, net.parents, net.cpts):
        parents = ", ".join(net.variables[p].name for p in ps) or "-"
        free = cpt.table.size // v.cardinality * (v.cardinality - 1)
        lines.append(f"  {v.name} [{v.cardinality}] <- {parents}  ({free} free parameters)")
    return "\n".join(lines) + "\n"
