"""Genetic-algorithm map-space search constrained by accelerator flexibility.

A genome is a flat tuple of nine indices: one per tile dimension, then the
order, parallel-pair and array-shape indices.  Each index points into a
per-gene choice list, so every decoded mapping lies in the allowed sets by
construction; buffer legality is restored by shrinking tiles.
"""
from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from .accel import AcceleratorSpec
from .cost import DEFAULT_ENERGY, OBJECTIVES, CostReport, EnergyParams, evaluate
from .errors import InfeasibleSpace, ValidationError
from .mapping import Mapping, buffer_verdict, clamp_baseline, clamp_tiles, footprint_of
from .mapspace import order_choices, parallel_choices, project, shape_choices
from .workload import DIMS, Layer, divisors, effective_dims

Genome = tuple[int, ...]
N_TILE = 6
ORDER, PAIR, SHAPE = 6, 7, 8
GROUPS = (tuple(range(N_TILE)), (ORDER,), (PAIR,), (SHAPE,))


@dataclass(frozen=True)
class GaConfig:
    population: int = 100
    generations: int = 100
    mutation_rate: float = 0.5
    crossover_rate: float = 0.5
    elite_count: int = 5
    seed: int = 0
    objective: str = "runtime"

    def __post_init__(self):
        if self.population < 1 or self.generations < 1:
            raise ValidationError("population and generations must be positive")
        if not 0 <= self.elite_count < self.population:
            raise ValidationError("elite_count must satisfy 0 <= elite_count < population")
        for name in ("mutation_rate", "crossover_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"objective must be one of {OBJECTIVES}")

    @property
    def budget(self) -> int:
        return self.population + (self.generations - 1) * (self.population - self.elite_count)

    def replace(self, **changes) -> "GaConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class GeneSpace:
    """Choice lists per gene plus the buffer-fit predicate used by repair."""
    tile_values: tuple[tuple[int, ...], ...]
    orders: tuple
    pairs: tuple
    shapes: tuple
    fits: Callable[[tuple[int, ...]], bool]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.tile_values) + (len(self.orders), len(self.pairs), len(self.shapes))

    def tiles_of(self, g: Genome) -> tuple[int, ...]:
        return tuple(self.tile_values[d][g[d]] for d in range(N_TILE))

    def decode(self, g: Genome) -> Mapping:
        return Mapping(self.tiles_of(g), self.orders[g[ORDER]], self.pairs[g[PAIR]], self.shapes[g[SHAPE]])

    def random(self, rng: random.Random) -> Genome:
        g = tuple(rng.randrange(n) for n in self.sizes)
        return self.repair(g, rng)

    def repair(self, g: Genome, rng: random.Random) -> Genome:
        """Shrink tiles, visiting dims in a random order, until they fit."""
        if self.fits(self.tiles_of(g)):
            return g
        g = list(g)
        while True:
            for d in rng.sample(range(N_TILE), N_TILE):
                cur = g[d]
                for idx in range(cur, -1, -1):
                    g[d] = idx
                    if self.fits(self.tiles_of(g)):
                        return tuple(g)
                g[d] = 0
            if all(g[d] == 0 for d in range(N_TILE)):
                raise InfeasibleSpace("no tile choice fits the buffer")


def mutate(g: Genome, space: GeneSpace, rate: float, rng: random.Random) -> Genome:
    """Redraw each gene with probability ``rate``, then repair."""
    out = list(g)
    for i, n in enumerate(space.sizes):
        if rng.random() < rate and n > 1:
            out[i] = rng.randrange(n)
    return space.repair(tuple(out), rng)


def crossover(a: Genome, b: Genome, space: GeneSpace, rng: random.Random) -> Genome:
    """Uniform crossover at gene-group granularity (tiles, order, pair, shape)."""
    child = list(a)
    for group in GROUPS:
        if rng.random() < 0.5:
            for i in group:
                child[i] = b[i]
    return space.repair(tuple(child), rng)


@dataclass(frozen=True)
class GaResult:
    genome: Genome
    score: tuple
    history: tuple
    evaluations: int


def run_ga(space: GeneSpace, fitness: Callable[[Genome], tuple], cfg: GaConfig,
           initial: Sequence[Genome] = ()) -> GaResult:
    """Generic GA loop; ``fitness`` returns a sortable tuple (lower is better).

    ``initial`` genomes (repaired) take the first slots of generation zero.
    """
    rng = random.Random(cfg.seed)
    cache: dict[Genome, tuple] = {}
    evaluations = 0

    def score(g: Genome) -> tuple:
        nonlocal evaluations
        evaluations += 1
        if g not in cache:
            cache[g] = fitness(g)
        return cache[g]

    pop = [space.repair(g, rng) for g in initial][:cfg.population]
    pop += [space.random(rng) for _ in range(cfg.population - len(pop))]
    scores = [score(g) for g in pop]
    best = min(zip(scores, pop))
    history = [best[0][0]]

    def tournament() -> Genome:
        i, j = rng.randrange(cfg.population), rng.randrange(cfg.population)
        return pop[i] if scores[i] <= scores[j] else pop[j]

    for _ in range(1, cfg.generations):
        ranked = sorted(range(cfg.population), key=lambda i: (scores[i], pop[i]))
        new_pop = [pop[i] for i in ranked[:cfg.elite_count]]
        new_scores = [scores[i] for i in ranked[:cfg.elite_count]]
        while len(new_pop) < cfg.population:
            a = tournament()
            if rng.random() < cfg.crossover_rate:
                child = crossover(a, tournament(), space, rng)
            else:
                child = a
            child = mutate(child, space, cfg.mutation_rate, rng)
            new_pop.append(child)
            new_scores.append(score(child))
        pop, scores = new_pop, new_scores
        best = min(best, min(zip(scores, pop)))
        history.append(best[0][0])
    return GaResult(best[1], best[0], tuple(history), evaluations)


def layer_space(layer: Layer, accel: AcceleratorSpec) -> GeneSpace:
    if accel.flex_class.t:
        tile_values = tuple(tuple(divisors(layer.dims[d])) for d in DIMS)
    else:
        tile_values = tuple((t,) for t in clamp_tiles(layer, accel.baseline.tiles))

    def fits(tiles):
        return bool(buffer_verdict(footprint_of(tiles, layer.stride, layer.kind), accel.buffer))

    return GeneSpace(tile_values, order_choices(layer, accel), parallel_choices(layer, accel),
                     shape_choices(layer, accel), fits)


def encode(space: GeneSpace, layer: Layer, m: Mapping) -> Genome | None:
    """Genome of a cost-equivalent point of ``m`` in ``space``, if there is one."""
    try:
        tiles = [space.tile_values[d].index(m.tiles[d]) for d in range(N_TILE)]
        eff = effective_dims(layer)
        target = project(m.order, eff)
        order = next(i for i, o in enumerate(space.orders) if project(o, eff) == target)
        return (*tiles, order, space.pairs.index(m.parallel), space.shapes.index(m.shape))
    except (ValueError, StopIteration):
        return None


@dataclass(frozen=True)
class SearchResult:
    mapping: Mapping
    report: CostReport
    history: tuple
    evaluations: int


def search(layer: Layer, accel: AcceleratorSpec, cfg: GaConfig = GaConfig(),
           ep: EnergyParams = DEFAULT_ENERGY, energy_adder: Fraction = Fraction(0)) -> SearchResult:
    """Best mapping found by the GA for one layer."""
    space = layer_space(layer, accel)
    if 0 in space.sizes:
        raise InfeasibleSpace(f"empty map space for layer {layer.name!r} on {accel.name!r}")

    def fitness(g: Genome) -> tuple:
        m = space.decode(g)
        rep = evaluate(layer, accel, m, ep, energy_adder)
        return rep.objective(cfg.objective), m.key()

    # generation zero always contains the accelerator's own baseline
    start = encode(space, layer, clamp_baseline(layer, accel))
    res = run_ga(space, fitness, cfg, initial=[start] if start is not None else [])
    m = space.decode(res.genome)
    return SearchResult(m, evaluate(layer, accel, m, ep, energy_adder), res.history, res.evaluations)
