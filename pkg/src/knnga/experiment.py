"""Experiment specs, the two-part GA + KNN pipeline, and report rendering.

Spec file grammar: one ``key = value`` pair per line, keys are dotted
``section.name``; blank lines and lines starting with ``#`` are ignored.
Recognized keys::

    dataset.source        path to .arff/.csv, or "synthetic:heart-ap"
    dataset.class         class attribute name (ARFF only; default: last)
    dataset.schema        ARFF file whose @attribute lines type a CSV source
    dataset.n             synthetic instance count (default 40)
    experiment.k          comma list of K values (default 1,3,5)
    experiment.protocols  comma list of full-training, cv (default both)
    experiment.folds      CV fold count (default 5)
    experiment.seed       master seed (default 1)
    experiment.strict     true: re-run the GA inside each CV training fold
    ga.<field>            any GaConfig field; ga.seed overrides the derived seed
    ga.fitness_folds      internal CV folds of the wrapper fitness (default 5)
    knn.weighting         majority | inverse-distance
    knn.missing           mean-impute | max-penalty
    knn.normalization     minmax | zscore | none
    prune.policy          best-chromosome | keep-top:M | threshold:T
    output.dir            report directory (default "out"; env KNNGA_OUTPUT_DIR wins)

Component seeds are derived from the master seed with
``derive_seed(master, label)`` (sha256 of ``"<master>:<label>"``) for the
labels ``ga``, ``folds``, ``fitness-folds`` and ``synthetic``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from . import data_model
from ._rng import derive_seed
from .data_model import Dataset, parse_arff
from .errors import ConfigError, DataError, KnngaError, StageError
from .evaluation import CROSS_VALIDATION, FULL_TRAINING, Protocol, cross_validate, evaluate_full_training, \
    make_fitness
from .genetic_search import (
    AttributeRanking,
    BestChromosome,
    Chromosome,
    GaConfig,
    GaRun,
    PrunePolicy,
    format_ranking,
    format_run,
    parse_prune_policy,
    prune,
    rank_attributes,
    run_ga,
)
from .knn_core import KnnConfig

FORMAT_VERSION = "1"
SYNTHETIC_PREFIX = "synthetic:"
OUTPUT_ENV = "KNNGA_OUTPUT_DIR"
WITH_GA = "with-ga"
WITHOUT_GA = "without-ga"
CSV_COLUMNS = ("format_version", "dataset", "protocol", "k", "mask_kind", "mask", "correct", "instances",
               "accuracy")


@dataclass(frozen=True)
class ExperimentSpec:
    source: str
    class_attribute: str | None = None
    schema_path: str | None = None
    synthetic_n: int = 40
    k_values: tuple[int, ...] = (1, 3, 5)
    protocols: tuple[str, ...] = (FULL_TRAINING, CROSS_VALIDATION)
    folds: int = 5
    master_seed: int = 1
    strict: bool = False
    ga: GaConfig = field(default_factory=GaConfig)
    ga_seed_override: bool = False
    fitness_folds: int = 5
    knn: KnnConfig = field(default_factory=KnnConfig)
    prune_policy: PrunePolicy = field(default_factory=BestChromosome)
    output_dir: str = "out"

    def __post_init__(self):
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ConfigError("K list must be non-empty with every K >= 1")
        if not self.protocols or set(self.protocols) - {FULL_TRAINING, CROSS_VALIDATION}:
            raise ConfigError(f"protocols must be drawn from {FULL_TRAINING}, cv")
        if self.folds < 2 or self.fitness_folds < 2:
            raise ConfigError("fold counts must be >= 2")
        if self.synthetic_n < 1:
            raise ConfigError("dataset.n must be >= 1")
        if not self.source.startswith(SYNTHETIC_PREFIX):
            for p in (self.source, self.schema_path):
                if p is not None and not Path(p).is_file():
                    raise ConfigError(f"referenced file does not exist: {p}")
            if self.source.lower().endswith(".csv") and self.schema_path is None:
                raise ConfigError("CSV sources need dataset.schema")
        elif self.source != SYNTHETIC_PREFIX + "heart-ap":
            raise ConfigError(f"unknown synthetic generator {self.source!r}")

    @property
    def ga_config(self) -> GaConfig:
        if self.ga_seed_override:
            return self.ga
        return replace(self.ga, seed=derive_seed(self.master_seed, "ga"))

    @property
    def fold_seed(self) -> int:
        return derive_seed(self.master_seed, "folds")

    @property
    def fitness_seed(self) -> int:
        return derive_seed(self.master_seed, "fitness-folds")

    @property
    def synthetic_seed(self) -> int:
        return derive_seed(self.master_seed, "synthetic")


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}")


def _protocol_name(token: str) -> str:
    token = token.strip().lower()
    if token in (FULL_TRAINING, "full"):
        return FULL_TRAINING
    if token in ("cv", CROSS_VALIDATION):
        return CROSS_VALIDATION
    raise ConfigError(f"unknown protocol {token!r}")


_GA_FIELDS = {f.name: f for f in fields(GaConfig)}


def parse_spec(text: str, base_dir: str | os.PathLike = ".") -> ExperimentSpec:
    base = Path(base_dir)
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lower()
        if not sep or not re.fullmatch(r"[a-z_]+\.[a-z_]+", key):
            raise ConfigError(f"spec line {lineno}: expected 'section.key = value'")
        if key in raw:
            raise ConfigError(f"spec line {lineno}: duplicate key {key}")
        raw[key] = value.strip()

    def path(v: str) -> str:
        p = Path(v)
        return str(p if p.is_absolute() else base / p)

    kw: dict = {}
    ga_kw: dict = {}
    knn_kw: dict = {}
    try:
        for key, value in raw.items():
            section, name = key.split(".")
            if key == "dataset.source":
                kw["source"] = value if value.startswith(SYNTHETIC_PREFIX) else path(value)
            elif key == "dataset.class":
                kw["class_attribute"] = value
            elif key == "dataset.schema":
                kw["schema_path"] = path(value)
            elif key == "dataset.n":
                kw["synthetic_n"] = int(value)
            elif key == "experiment.k":
                kw["k_values"] = tuple(int(v) for v in value.split(","))
            elif key == "experiment.protocols":
                kw["protocols"] = tuple(dict.fromkeys(_protocol_name(v) for v in value.split(",")))
            elif key == "experiment.folds":
                kw["folds"] = int(value)
            elif key == "experiment.seed":
                kw["master_seed"] = int(value)
            elif key == "experiment.strict":
                kw["strict"] = _bool(value)
            elif key == "ga.fitness_folds":
                kw["fitness_folds"] = int(value)
            elif section == "ga" and name in _GA_FIELDS:
                typ = _GA_FIELDS[name].type
                if name == "seed":
                    kw["ga_seed_override"] = True
                ga_kw[name] = float(value) if typ == "float" else int(value) if typ == "int" else value
            elif key == "knn.weighting":
                knn_kw["weighting"] = value
            elif key == "knn.missing":
                knn_kw["missing_policy"] = value
            elif key == "knn.normalization":
                knn_kw["normalization"] = value
            elif key == "prune.policy":
                kw["prune_policy"] = parse_prune_policy(value)
            elif key == "output.dir":
                kw["output_dir"] = path(value)
            else:
                raise ConfigError(f"unknown spec key {key}")
        if "source" not in kw:
            raise ConfigError("spec needs dataset.source")
        return ExperimentSpec(ga=GaConfig(**ga_kw), knn=KnnConfig(**knn_kw), **kw)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid spec value: {exc}") from exc


def load_spec(path) -> ExperimentSpec:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read spec file {p}: {exc.strerror}") from exc
    return parse_spec(text, p.parent)


def load_dataset(spec: ExperimentSpec) -> Dataset:
    if spec.source.startswith(SYNTHETIC_PREFIX):
        return data_model.synth_heart_ap(spec.synthetic_n, spec.synthetic_seed)
    schema = None
    if spec.schema_path is not None:
        schema = parse_arff(Path(spec.schema_path).read_text(encoding="utf-8"), spec.class_attribute).schema
    return data_model.load(spec.source, spec.class_attribute, schema)


# ---------------------------------------------------------------- report

@dataclass(frozen=True)
class Cell:
    protocol: str
    k: int
    mask_kind: str
    mask: str
    correct: int
    instances: int
    accuracy: float


@dataclass(frozen=True)
class Report:
    dataset: str
    instances: int
    attributes: int
    feature_names: tuple[str, ...]
    ga_run: GaRun
    ranking: AttributeRanking
    selected_mask: str
    prune_policy: str
    prune_degenerate: bool
    fitness_k: int
    fitness_with_ga: float
    fitness_without_ga: float
    cells: tuple[Cell, ...]
    provenance: tuple[tuple[str, str], ...]
    format_version: str = FORMAT_VERSION

    def cell(self, protocol: str, k: int, mask_kind: str) -> Cell:
        for c in self.cells:
            if (c.protocol, c.k, c.mask_kind) == (protocol, k, mask_kind):
                return c
        raise KeyError((protocol, k, mask_kind))

    def grid(self) -> dict[tuple[str, int, str], float]:
        return {(c.protocol, c.k, c.mask_kind): c.accuracy for c in self.cells}


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (KnngaError, ValueError, OSError) as exc:
        raise StageError(name, exc) from exc


def select_features(d: Dataset, ga_cfg: GaConfig, knn: KnnConfig, policy: PrunePolicy, fitness_folds: int,
                    fitness_seed: int, workers: int = 1):
    """Part one: GA over masks with wrapper fitness, ranking and pruning."""
    fitness = make_fitness(d, knn, fitness_folds, fitness_seed)
    run = run_ga(ga_cfg, d.n_features, fitness, workers=workers)
    ranking = rank_attributes(run)
    result = prune(ranking, policy)
    return run, ranking, result, fitness


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> Report:
    """Run GA attribute selection, then evaluate every (protocol, K) with and without the GA mask."""
    d = _stage("load", load_dataset, spec)
    if len(d) == 0:
        raise StageError("load", DataError("dataset has no instances"))
    fitness_knn = replace(spec.knn, k=spec.k_values[0])
    ga_cfg = spec.ga_config
    run, ranking, pruned, fitness = _stage(
        "genetic-search", select_features, d, ga_cfg, fitness_knn, spec.prune_policy,
        spec.fitness_folds, spec.fitness_seed, workers)
    with_mask = pruned.mask
    ones = Chromosome.ones(d.n_features)
    fit_with = _stage("fitness", fitness, with_mask)
    fit_without = _stage("fitness", fitness, ones)

    def strict_mask(train: Dataset, fold: int):
        _, _, res, _ = select_features(train, ga_cfg, fitness_knn, spec.prune_policy, spec.fitness_folds,
                                       spec.fitness_seed, workers)
        return res.mask

    cells = []
    for proto in spec.protocols:
        for k in spec.k_values:
            knn = replace(spec.knn, k=k)
            for kind, mask in ((WITHOUT_GA, ones), (WITH_GA, with_mask)):
                if proto == FULL_TRAINING:
                    res = _stage("evaluate", evaluate_full_training, d, mask, knn)
                    label = str(mask)
                else:
                    strict = spec.strict and kind == WITH_GA
                    res = _stage("evaluate", cross_validate, d, mask, knn, spec.folds, spec.fold_seed,
                                 select_mask=strict_mask if strict else None)
                    label = "per-fold:" + "/".join(res.fold_masks) if strict else str(mask)
                cells.append(Cell(str(res.protocol), k, kind, label, res.correct, res.n_evaluated, res.accuracy))

    provenance = (
        ("master_seed", str(spec.master_seed)),
        ("ga_seed", str(ga_cfg.seed)),
        ("fold_seed", str(spec.fold_seed)),
        ("fitness_fold_seed", str(spec.fitness_seed)),
        ("synthetic_seed", str(spec.synthetic_seed) if spec.source.startswith(SYNTHETIC_PREFIX) else "-"),
        ("ga_config", _describe(ga_cfg)),
        ("knn_config", _describe(spec.knn)),
        ("fitness", f"stratified {spec.fitness_folds}-fold CV accuracy, K={fitness_knn.k}"),
        ("mask_reuse", "one GA run; its mask is reused for every K" + (
            " (CV with-GA cells re-run the GA per training fold)" if spec.strict else
            "; GA saw the full dataset, so CV with-GA cells are optimistic")),
        ("kernel_backend", "compiled" if _backend() == "cython" else "python"),
    )
    return Report(
        dataset=d.name, instances=len(d), attributes=len(d.schema),
        feature_names=tuple(d.schema[c].name for c in d.feature_indices),
        ga_run=run, ranking=ranking, selected_mask=str(with_mask), prune_policy=str(spec.prune_policy),
        prune_degenerate=pruned.degenerate, fitness_k=fitness_knn.k,
        fitness_with_ga=fit_with, fitness_without_ga=fit_without,
        cells=tuple(cells), provenance=provenance,
    )


def _backend() -> str:
    from . import kernels

    return kernels.BACKEND


def _describe(obj) -> str:
    parts = []
    for f in fields(obj):
        v = getattr(obj, f.name)
        parts.append(f"{f.name}={getattr(v, 'value', v)}")
    return ", ".join(parts)


def _pct(x: float) -> str:
    return f"{100 * x:.2f}"


def emit_report(r: Report, fmt: str = "markdown") -> str:
    fmt = fmt.lower()
    if fmt in ("csv",):
        return _emit_csv(r)
    if fmt in ("markdown", "md"):
        return _emit_markdown(r)
    raise ConfigError(f"unknown report format {fmt!r}")


def _emit_csv(r: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in r.cells:
        w.writerow((r.format_version, r.dataset, c.protocol, c.k, c.mask_kind, c.mask, c.correct, c.instances,
                    repr(c.accuracy)))
    return buf.getvalue()


def parse_report_csv(text: str) -> dict[tuple[str, int, str], float]:
    """Read an emitted CSV back into ``{(protocol, k, mask_kind): accuracy}``."""
    rows = list(csv.DictReader(io.StringIO(text)))
    return {(row["protocol"], int(row["k"]), row["mask_kind"]): float(row["accuracy"]) for row in rows}


def _emit_markdown(r: Report) -> str:
    ks = sorted({c.k for c in r.cells})
    protocols = list(dict.fromkeys(c.protocol for c in r.cells))
    names = r.feature_names
    kept = [names[j] for j, b in enumerate(r.selected_mask) if b == "1"]
    out = [
        f"# KNN + genetic search report: {r.dataset}",
        "",
        f"format version: {r.format_version}",
        "",
        "## Dataset",
        "",
        "| data set | instances | attributes |",
        "|---|---|---|",
        f"| {r.dataset} | {r.instances} | {r.attributes} |",
        "",
        "## Genetic search",
        "",
        format_run(r.ga_run),
        "",
        "## Attribute ranking",
        "",
        format_ranking(r.ranking, names),
        "",
        f"prune policy: {r.prune_policy}" + (" (degenerate: kept top-ranked attribute)" if r.prune_degenerate else ""),
        f"selected mask: {r.selected_mask} ({len(kept)} of {len(names)}: {', '.join(kept)})",
        f"fitness estimate at K={r.fitness_k}: {_pct(r.fitness_without_ga)} without GA, "
        f"{_pct(r.fitness_with_ga)} with GA",
        "",
    ]
    for proto in protocols:
        title = "full training set" if proto == FULL_TRAINING else f"{proto[2:]}-fold cross validation"
        out += [f"## Accuracy (%), {title}", "",
                "| mask | " + " | ".join(f"K={k}" for k in ks) + " |",
                "|---|" + "---|" * len(ks)]
        for kind in (WITH_GA, WITHOUT_GA):
            vals = [_pct(r.cell(proto, k, kind).accuracy) for k in ks]
            out.append(f"| {kind} | " + " | ".join(vals) + " |")
        out.append("")
    out += ["## Comparison with GA / without GA", "",
            f"K={ks[0]}", "",
            "| data set | protocol | accuracy without GA (knn only) | accuracy with GA (knn+GA) |",
            "|---|---|---|---|"]
    for proto in protocols:
        out.append(f"| {r.dataset} | {proto} | {_pct(r.cell(proto, ks[0], WITHOUT_GA).accuracy)} | "
                   f"{_pct(r.cell(proto, ks[0], WITH_GA).accuracy)} |")
    out += ["", "## Provenance", ""]
    out += [f"- {k}: {v}" for k, v in r.provenance]
    return "\n".join(out) + "\n"


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "-", name).strip("-") or "dataset"


def write_report(r: Report, out_dir, formats=("markdown", "csv")) -> list[Path]:
    """Write report files named ``<dataset>-<content hash>.{md,csv}``."""
    texts = {fmt: emit_report(r, fmt) for fmt in formats}
    digest = hashlib.sha256("".join(texts[f] for f in formats).encode()).hexdigest()[:12]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for fmt, text in texts.items():
        suffix = "csv" if fmt == "csv" else "md"
        p = out / f"{_slug(r.dataset)}-{digest}.{suffix}"
        p.write_text(text, encoding="utf-8")
        paths.append(p)
    return paths


def output_dir(spec: ExperimentSpec, override: str | None = None) -> str:
    return override or os.environ.get(OUTPUT_ENV) or spec.output_dir
