"""Bit-string genetic search over attribute subsets.

Every random draw comes from a stream keyed by ``(seed, purpose, generation,
slot)``, so a run is reproducible regardless of how many workers evaluate
fitness.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from ._rng import make_rng
from .errors import ConfigError, EmptyPopulation, FitnessError, LengthMismatch

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Chromosome:
    """Attribute mask; bit ``j`` set keeps feature ``j``."""

    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(1 if b else 0 for b in self.bits))

    @classmethod
    def ones(cls, n: int) -> "Chromosome":
        return cls((1,) * n)

    @classmethod
    def parse(cls, text: str) -> "Chromosome":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"mask must be a string of 0/1, got {text!r}")
        return cls(tuple(int(c) for c in text))

    def __len__(self):
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    def __getitem__(self, i):
        return self.bits[i]

    def __str__(self):
        return "".join(map(str, self.bits))

    @property
    def count(self) -> int:
        return sum(self.bits)

    @property
    def is_empty(self) -> bool:
        return not any(self.bits)

    def array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)


class Selection(str, Enum):
    ROULETTE = "roulette"
    RANK = "rank"
    TOURNAMENT = "tournament"


class CrossoverOp(str, Enum):
    SINGLE_POINT = "single-point"
    TWO_POINT = "two-point"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class GaConfig:
    crossover_prob: float = 0.6
    mutation_prob: float = 0.033
    population_size: int = 20
    max_generations: int = 20
    report_frequency: int = 20
    seed: int = 1
    selection: Selection = Selection.ROULETTE
    tournament_size: int = 2
    crossover: CrossoverOp = CrossoverOp.SINGLE_POINT
    elitism_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "selection", Selection(self.selection))
        object.__setattr__(self, "crossover", CrossoverOp(self.crossover))
        for name in ("crossover_prob", "mutation_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")
        for name in ("population_size", "max_generations", "report_frequency"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not 0 <= self.elitism_count < self.population_size:
            raise ConfigError("elitism_count must be in [0, population_size)")
        if self.selection is Selection.TOURNAMENT and not 1 <= self.tournament_size <= self.population_size:
            raise ConfigError("tournament_size must be in [1, population_size]")


def repair(bits: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Set one random bit if the mask is empty."""
    if not bits.any():
        bits = bits.copy()
        bits[rng.integers(len(bits))] = 1
    return bits


def init_population(cfg: GaConfig, n_features: int) -> list[Chromosome]:
    """All-ones baseline at slot 0, uniform random (repaired) masks elsewhere."""
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    population = [Chromosome.ones(n_features)]
    for slot in range(1, cfg.population_size):
        rng = make_rng(cfg.seed, "init", slot)
        bits = repair(rng.integers(0, 2, n_features, dtype=np.uint8), rng)
        population.append(Chromosome(tuple(bits)))
    return population


def select_index(fitnesses: Sequence[float], method: Selection | str, rng: np.random.Generator,
                 tournament_size: int = 2) -> int:
    method = Selection(method)
    f = np.asarray(fitnesses, dtype=float)
    n = len(f)
    if n == 0:
        raise EmptyPopulation("cannot select from an empty population")
    if method is Selection.TOURNAMENT:
        if not 1 <= tournament_size <= n:
            raise ConfigError(f"tournament size {tournament_size} not in [1, {n}]")
        picks = np.sort(rng.choice(n, size=tournament_size, replace=False))
        return int(picks[np.argmax(f[picks])])
    if method is Selection.RANK:
        weights = np.empty(n)
        weights[np.argsort(f, kind="stable")] = np.arange(1, n + 1)
    else:
        weights = f
    total = float(weights.sum())
    if total <= 0.0:
        return int(rng.integers(n))
    u = rng.random() * total
    idx = int(np.searchsorted(np.cumsum(weights), u, side="right"))
    return min(idx, n - 1)


def select(population: Sequence[Chromosome], fitnesses: Sequence[float], method: Selection | str,
           rng: np.random.Generator, tournament_size: int = 2) -> Chromosome:
    """Draw one parent.

    Roulette draws proportionally to fitness (uniformly if all are zero),
    rank proportionally to 1-based ascending rank, and tournament returns
    the fittest of ``tournament_size`` distinct members.
    """
    if len(population) != len(fitnesses):
        raise LengthMismatch("population and fitness lists differ in length")
    return population[select_index(fitnesses, method, rng, tournament_size)]


def single_point(p1: np.ndarray, p2: np.ndarray, cut: int) -> tuple[np.ndarray, np.ndarray]:
    return np.concatenate([p1[:cut], p2[cut:]]), np.concatenate([p2[:cut], p1[cut:]])


def two_point(p1: np.ndarray, p2: np.ndarray, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    c1, c2 = p1.copy(), p2.copy()
    c1[a:b], c2[a:b] = p2[a:b], p1[a:b]
    return c1, c2


def crossover(p1: Chromosome, p2: Chromosome, operator: CrossoverOp | str, prob: float,
              rng: np.random.Generator, repair_empty: bool = True) -> tuple[Chromosome, Chromosome]:
    operator = CrossoverOp(operator)
    if len(p1) != len(p2):
        raise LengthMismatch(f"parents differ in length ({len(p1)} vs {len(p2)})")
    a, b = p1.array(), p2.array()
    n = len(a)
    if rng.random() < prob and n > 1:
        if operator is CrossoverOp.UNIFORM:
            swap = rng.random(n) < 0.5
            a, b = np.where(swap, b, a), np.where(swap, a, b)
        elif operator is CrossoverOp.TWO_POINT and n > 2:
            lo, hi = np.sort(rng.choice(np.arange(1, n), size=2, replace=False))
            a, b = two_point(a, b, int(lo), int(hi))
        else:
            a, b = single_point(a, b, int(rng.integers(1, n)))
    if repair_empty:
        a, b = repair(a, rng), repair(b, rng)
    return Chromosome(tuple(a)), Chromosome(tuple(b))


def mutate(c: Chromosome, prob: float, rng: np.random.Generator, repair_empty: bool = True) -> Chromosome:
    bits = c.array()
    flips = rng.random(len(bits)) < prob
    bits = np.where(flips, 1 - bits, bits).astype(np.uint8)
    if repair_empty:
        bits = repair(bits, rng)
    return Chromosome(tuple(bits))


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    best: Chromosome


@dataclass(frozen=True)
class GaRun:
    config: GaConfig
    n_features: int
    generations: tuple[GenerationRecord, ...]
    population: tuple[Chromosome, ...]
    fitness: tuple[float, ...]
    evaluations: int
    reports: tuple[int, ...]
    fitness_calls: int = field(default=0, compare=False)

    @property
    def best(self) -> Chromosome:
        """Fittest chromosome seen in any generation (earliest on ties)."""
        top = max(self.generations, key=lambda r: (r.best_fitness, -r.generation))
        return top.best

    @property
    def best_fitness(self) -> float:
        return max(r.best_fitness for r in self.generations)


def _best_index(fits: Sequence[float]) -> int:
    return int(np.argmax(np.asarray(fits)))


def run_ga(cfg: GaConfig, n_features: int, fitness_fn: Callable[[Chromosome], float], *,
           workers: int = 1, cache: bool = True,
           progress: Callable[[GenerationRecord], None] | None = None) -> GaRun:
    """Generational GA with elitism, maximizing ``fitness_fn`` over masks.

    ``fitness_fn`` must be deterministic and return a value in [0, 1].
    Fitness values are cached by mask unless ``cache`` is False; either way
    the returned run is the same.
    """
    memo: dict[tuple[int, ...], float] = {}
    calls = 0

    def score(c: Chromosome) -> float:
        try:
            value = float(fitness_fn(c))
        except Exception as exc:
            raise FitnessError(str(c), exc) from exc
        if not 0.0 <= value <= 1.0:
            raise FitnessError(str(c), ValueError(f"fitness {value} outside [0, 1]"))
        return value

    def evaluate(pop: list[Chromosome]) -> list[float]:
        nonlocal calls
        if cache:
            todo = list(dict.fromkeys(c.bits for c in pop if c.bits not in memo))
        else:
            todo = [c.bits for c in pop]
        if workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                values = list(pool.map(lambda b: score(Chromosome(b)), todo))
        else:
            values = [score(Chromosome(b)) for b in todo]
        calls += len(todo)
        if cache:
            memo.update(zip(todo, values))
            return [memo[c.bits] for c in pop]
        return values

    def record(g: int, pop, fits) -> GenerationRecord:
        i = _best_index(fits)
        rec = GenerationRecord(g, float(fits[i]), math.fsum(fits) / len(fits), pop[i])
        if progress is not None:
            progress(rec)
        return rec

    population = init_population(cfg, n_features)
    fits = evaluate(population)
    records = [record(0, population, fits)]
    reports = []
    for g in range(1, cfg.max_generations + 1):
        order = sorted(range(len(population)), key=lambda i: (-fits[i], i))
        nxt = [population[i] for i in order[:cfg.elitism_count]]
        slot = 0
        while len(nxt) < cfg.population_size:
            rng = make_rng(cfg.seed, "breed", g, slot)
            p1 = select(population, fits, cfg.selection, rng, cfg.tournament_size)
            p2 = select(population, fits, cfg.selection, rng, cfg.tournament_size)
            c1, c2 = crossover(p1, p2, cfg.crossover, cfg.crossover_prob, rng)
            nxt.append(mutate(c1, cfg.mutation_prob, rng))
            if len(nxt) < cfg.population_size:
                nxt.append(mutate(c2, cfg.mutation_prob, rng))
            slot += 1
        population = nxt
        fits = evaluate(population)
        rec = record(g, population, fits)
        records.append(rec)
        if g % cfg.report_frequency == 0 or g == cfg.max_generations:
            reports.append(g)
            log.info("generation %d: best %.4f mean %.4f mask %s", g, rec.best_fitness, rec.mean_fitness, rec.best)
    return GaRun(cfg, n_features, tuple(records), tuple(population), tuple(float(f) for f in fits),
                 evaluations=len(records) * cfg.population_size, reports=tuple(reports), fitness_calls=calls)


# ---------------------------------------------------------------- ranking / pruning

@dataclass(frozen=True)
class AttributeRanking:
    scores: tuple[float, ...]
    order: tuple[int, ...]
    best: Chromosome | None = None


def rank_attributes(run: GaRun) -> AttributeRanking:
    """Score each attribute by its fitness-weighted frequency in the final population."""
    if not run.population:
        raise EmptyPopulation("run has no final population")
    fits = list(run.fitness)
    if math.fsum(fits) <= 0.0:
        fits = [1.0] * len(fits)
    total = math.fsum(fits)
    scores = []
    for j in range(run.n_features):
        s = math.fsum(f for f, c in zip(fits, run.population) if c.bits[j]) / total
        scores.append(min(1.0, max(0.0, s)))
    order = tuple(sorted(range(run.n_features), key=lambda j: (-scores[j], j)))
    return AttributeRanking(tuple(scores), order, run.best)


@dataclass(frozen=True)
class KeepTop:
    m: int

    def __str__(self):
        return f"keep-top:{self.m}"


@dataclass(frozen=True)
class Threshold:
    tau: float

    def __str__(self):
        return f"threshold:{self.tau!r}"


@dataclass(frozen=True)
class BestChromosome:
    def __str__(self):
        return "best-chromosome"


PrunePolicy = KeepTop | Threshold | BestChromosome


def parse_prune_policy(text: str) -> PrunePolicy:
    text = text.strip().lower()
    name, _, arg = text.partition(":")
    try:
        if name == "keep-top":
            return KeepTop(int(arg))
        if name == "threshold":
            return Threshold(float(arg))
    except ValueError:
        raise ConfigError(f"bad prune policy argument in {text!r}") from None
    if name == "best-chromosome" and not arg:
        return BestChromosome()
    raise ConfigError(f"unknown prune policy {text!r} (keep-top:M, threshold:T, best-chromosome)")


class DegeneratePolicy(UserWarning):
    """A prune policy would have kept no attribute; the top-ranked one was kept."""


@dataclass(frozen=True)
class PruneResult:
    mask: Chromosome
    degenerate: bool = False


def prune(ranking: AttributeRanking, policy: PrunePolicy) -> PruneResult:
    n = len(ranking.scores)
    if isinstance(policy, BestChromosome):
        if ranking.best is None:
            raise ConfigError("best-chromosome pruning needs a ranking built from a GA run")
        return PruneResult(ranking.best)
    if isinstance(policy, KeepTop):
        if policy.m < 1:
            raise ConfigError("keep-top needs m >= 1")
        keep = set(ranking.order[:policy.m])
    elif isinstance(policy, Threshold):
        if not 0.0 <= policy.tau <= 1.0:
            raise ConfigError("threshold must be in [0, 1]")
        keep = {j for j, s in enumerate(ranking.scores) if s >= policy.tau}
    else:
        raise ConfigError(f"unknown prune policy {policy!r}")
    degenerate = not keep
    if degenerate:
        warnings.warn(f"{policy} keeps no attribute; keeping the top-ranked one", DegeneratePolicy, stacklevel=2)
        keep = {ranking.order[0]}
    return PruneResult(Chromosome(tuple(int(j in keep) for j in range(n))), degenerate)


def format_run(run: GaRun) -> str:
    lines = ["| generation | best fitness | mean fitness | best mask |", "|---|---|---|---|"]
    for r in run.generations:
        lines.append(f"| {r.generation} | {r.best_fitness:.4f} | {r.mean_fitness:.4f} | {r.best} |")
    lines.append("")
    lines.append(f"fitness evaluations: {run.evaluations} requested, {run.fitness_calls} computed")
    return "\n".join(lines)


def format_ranking(ranking: AttributeRanking, names: Sequence[str] | None = None) -> str:
    names = list(names) if names is not None else [f"attr{j}" for j in range(len(ranking.scores))]
    lines = ["| rank | attribute | score |", "|---|---|---|"]
    for r, j in enumerate(ranking.order, start=1):
        lines.append(f"| {r} | {names[j]} | {ranking.scores[j]:.4f} |")
    return "\n".join(lines)
