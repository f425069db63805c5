"""Bit-by-bit construction of the labeling on a window.

Each step draws cell bits on the current partition, merges non-forking
clusters into forking ones, refines the forest by the new bit and coarsens the
partition twice (Fur, then Sep).  With ``audit=True`` every structural
invariant is checked exactly after each step and a failure raises
:class:`~fiid.errors.ContractViolation`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .cluster_ops import CellStep, clust, fur_step, r_plus, sep_step
from .errors import ContractViolation, DegeneracyError, InvalidParameter
from .partition import (
    Partition,
    bit_pi,
    is_compatible,
    is_refinement,
    quotient_forest,
    singleton_partition,
)
from .randomness import DEFAULT_PRECISION, LabelFamilies, organize_families
from .tree_window import Forest, TreeWindow, build_window, full_forest

POLICIES = ("paper_zero", "flag_and_exclude")


@dataclass(frozen=True)
class ConstructionConfig:
    degree: int = 3
    radius: int = 10
    n_bits: int = 3
    seed: int = 0
    fallback_policy: str = "flag_and_exclude"
    interior_margin: int = 4
    precision: int = DEFAULT_PRECISION
    fur_seeds: str = "vertex"
    archive: bool = True
    audit: bool = True

    def __post_init__(self):
        if self.n_bits < 0 or self.n_bits > 62:
            raise InvalidParameter("n_bits must be in 0..62")
        if self.interior_margin < 0 or self.radius <= self.interior_margin:
            raise InvalidParameter("need 0 <= interior_margin < radius")
        if self.fallback_policy not in POLICIES:
            raise InvalidParameter(f"fallback_policy must be one of {POLICIES}")
        if self.fur_seeds not in ("vertex", "quotient"):
            raise InvalidParameter("fur_seeds must be 'vertex' or 'quotient'")
        if self.precision < 1:
            raise InvalidParameter("precision must be positive")

    def replace(self, **changes) -> "ConstructionConfig":
        return ConstructionConfig(**{**asdict(self), **changes})


@dataclass(frozen=True)
class Degeneracy:
    step: int
    component: int
    cause: str


@dataclass
class StepRecord:
    step: int
    forest: Forest
    partition: Partition
    partition_plus: Partition | None
    guess: np.ndarray | None


@dataclass
class ConstructionState:
    config: ConstructionConfig
    window: TreeWindow
    step: int
    forest: Forest
    partition: Partition
    bits: list = field(default_factory=list)
    degeneracy: Degeneracy | None = None
    archive: list = field(default_factory=list)
    stats: list = field(default_factory=list)

    def words(self) -> np.ndarray:
        word = np.zeros(self.window.n, dtype=np.int64)
        for b in self.bits:
            word = (word << 1) | b
        return word

    def labels(self) -> np.ndarray:
        """``(n, k)`` array of the bits revealed so far."""
        if not self.bits:
            return np.zeros((self.window.n, 0), dtype=np.uint8)
        return np.stack(self.bits, axis=1)


def init(config: ConstructionConfig, window: TreeWindow | None = None,
         families: LabelFamilies | None = None) -> ConstructionState:
    window = window or build_window(config.degree, config.radius)
    families = families or organize_families(config.seed, window, config.precision)
    forest = full_forest(window)
    singletons = singleton_partition(window)
    result = sep_step(window, forest, singletons, families.U(0))
    state = ConstructionState(config, window, 0, forest, result.partition)
    if config.audit:
        _audit_sep(state, forest, singletons, result)
    if config.archive:
        state.archive.append(StepRecord(0, forest, result.partition, None, None))
    state.stats.append({"step": 0, "components": 1, "cells": result.partition.n_cells})
    return state


def step(state: ConstructionState, families: LabelFamilies) -> ConstructionState:
    """Reveal one more bit; on degeneracy the record is filled and nothing advances."""
    if state.degeneracy is not None:
        return state
    cfg, window = state.config, state.window
    k = state.step + 1
    guess = bit_pi(state.partition, families.B(k))[state.partition.cell_of]
    try:
        bit, rounds = r_plus(window, state.forest, guess, with_rounds=True)
        new_bits = [*state.bits, bit]
        forest = clust(window, np.stack(new_bits, axis=1))
        plus = fur_step(window, forest, state.partition, families.V(k), cfg.fur_seeds)
    except DegeneracyError as exc:
        state.degeneracy = Degeneracy(k, exc.components[0] if exc.components else -1, exc.cause)
        return state
    sep_result = sep_step(window, forest, plus.partition, families.U(k))
    if cfg.audit:
        _audit_step(state, guess, bit, forest, plus, sep_result)
    state.bits = new_bits
    state.step = k
    state.forest = forest
    state.partition = sep_result.partition
    if cfg.archive:
        state.archive.append(StepRecord(k, forest, sep_result.partition, plus.partition, guess))
    state.stats.append({
        "step": k,
        "components": forest.n_components,
        "cells_plus": plus.partition.n_cells,
        "cells": sep_result.partition.n_cells,
        "merge_rounds": int(rounds),
        "saturated": _saturated(sep_result).size,
    })
    return state


# -- audits ---------------------------------------------------------------


def _interior_cells(state: ConstructionState, pi: Partition) -> np.ndarray:
    deepest = np.zeros(pi.n_cells, dtype=np.int64)
    np.maximum.at(deepest, pi.cell_of, state.window.depth)
    return deepest <= state.config.radius - state.config.interior_margin


def _saturated(result: CellStep) -> np.ndarray:
    """Components whose quotient is a single cell (Sep cannot grow them)."""
    q = result.quotient
    counts = np.bincount(q.comp)
    return np.flatnonzero(counts == 1)


def _check(ok: bool, what: str) -> None:
    if not ok:
        raise ContractViolation(f"audit failed: {what}")


def separation_ok(result: CellStep, distance: int = 3) -> bool:
    """No two seed cells within quotient distance ``distance - 1``."""
    rooted = result.quotient.rooted
    seeds = result.seeds
    ids = np.where(seeds, np.arange(rooted.n), rooted.n)
    lo = rooted.ball_min(ids, distance - 1)
    hi = -rooted.ball_min(np.where(seeds, -np.arange(rooted.n), 1), distance - 1)
    mine = np.flatnonzero(seeds)
    return bool((lo[mine] == mine).all() and (hi[mine] == mine).all())


def strict_growth_ok(result: CellStep) -> bool:
    """Every output cell merges at least two input cells, except in single-cell components."""
    merged = np.bincount(result.assignment, minlength=result.quotient.rooted.n)
    seeds = np.flatnonzero(result.seeds)
    lonely = np.isin(result.quotient.comp[seeds], _saturated(result))
    return bool((merged[seeds][~lonely] >= 2).all())


def one_seed_per_cell(result: CellStep) -> bool:
    per_cell = np.bincount(result.partition.cell_of[result.quotient.tops[result.seeds]],
                           minlength=result.partition.n_cells)
    return bool((per_cell == 1).all())


def _audit_sep(state, forest, before: Partition, result: CellStep) -> None:
    after = result.partition
    _check(is_compatible(forest, after), "Sep output compatible with forest")
    _check(is_refinement(before, after), "Sep refines its input")
    _check(separation_ok(result, 4), "Sep seeds pairwise at quotient distance >= 4")
    _check(strict_growth_ok(result), "Sep strict growth")
    _check(one_seed_per_cell(result), "one Sep seed per output cell")
    degree = quotient_forest(forest.rooted(), after).rooted.degrees()
    _check(bool((degree[_interior_cells(state, after)] >= 4).all()),
           "interior quotient degree >= 4 after Sep")


def _audit_step(state, guess, bit, forest, plus: CellStep, sep_result: CellStep) -> None:
    window, old = state.window, state.partition
    cells = old.cell_of
    for name, values in (("guess", guess), ("bit", bit)):
        lo = np.full(old.n_cells, 2)
        hi = np.full(old.n_cells, -1)
        np.minimum.at(lo, cells, values)
        np.maximum.at(hi, cells, values)
        _check(bool((lo == hi).all()), f"{name} constant on partition cells")
    _check(forest == clust(window, bit, state.forest), "clust of all bits equals clust of new bit within old forest")
    _check(is_compatible(forest, old), "new forest compatible with previous partition")
    _check(is_refinement(old, plus.partition), "Fur refines its input")
    _check(is_compatible(forest, plus.partition), "Fur output compatible with forest")
    _check(one_seed_per_cell(plus), "one furcation seed per Fur cell")
    plus_degree = quotient_forest(forest.rooted(), plus.partition).rooted.degrees()
    _check(bool((plus_degree[_interior_cells(state, plus.partition)] >= 3).all()),
           "interior quotient degree >= 3 after Fur")
    _audit_sep(state, forest, plus.partition, sep_result)
    _check(is_refinement(old, sep_result.partition), "partition chain is increasing")


# -- runs -----------------------------------------------------------------


@dataclass
class LambdaResult:
    config: ConstructionConfig
    window: TreeWindow
    bits: np.ndarray  # (n, n_bits) uint8, zeroed under paper_zero after degeneracy
    forest: Forest
    degeneracy: Degeneracy | None
    stats: list
    archive: list
    root_chain: list  # size of the root's cell in Pi_0, Pi_1, ...

    @property
    def degenerate(self) -> bool:
        return self.degeneracy is not None

    def words(self) -> list[str]:
        return ["".join(map(str, row)) for row in self.bits.tolist()]

    def root_word(self) -> str:
        return "".join(str(b) for b in self.bits[0].tolist())

    def record(self) -> "ResultRecord":
        from .cluster_ops import cluster_report

        report = cluster_report(self.window, self.bits) if self.bits.shape[1] else None
        if report is None:
            clusters = [{"size": self.window.n, "reaches_boundary": True}]
        else:
            clusters = [{"size": int(s), "reaches_boundary": bool(b)}
                        for s, b in zip(report.size, report.reaches_boundary)]
        return ResultRecord(
            seed=self.config.seed,
            config=_config_dict(self.config),
            degenerate=None if self.degeneracy is None else asdict(self.degeneracy),
            words=self.words(),
            clusters=clusters,
            chain_sizes=list(self.root_chain),
        )


def _config_dict(cfg: ConstructionConfig) -> dict:
    out = asdict(cfg)
    out.pop("archive")
    out.pop("audit")
    return out


@dataclass
class ResultRecord:
    """The JSON face of a :class:`LambdaResult`."""

    seed: int
    config: dict
    degenerate: dict | None
    words: list
    clusters: list
    chain_sizes: list

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        return cls(**json.loads(text))


def run(config: ConstructionConfig, window: TreeWindow | None = None) -> LambdaResult:
    window = window or build_window(config.degree, config.radius)
    families = organize_families(config.seed, window, config.precision)
    state = init(config, window, families)
    chain = [int(state.partition.sizes()[state.partition.cell_of[0]])]
    for _ in range(config.n_bits):
        step(state, families)
        if state.degeneracy is not None:
            break
        chain.append(int(state.partition.sizes()[state.partition.cell_of[0]]))
    bits, forest = state.labels(), state.forest
    if state.degeneracy is not None and config.fallback_policy == "paper_zero":
        bits = np.zeros((window.n, config.n_bits), dtype=np.uint8)
        forest = full_forest(window)
    return LambdaResult(config, window, bits, forest, state.degeneracy, state.stats,
                        state.archive, chain)


@dataclass
class CellChain:
    cells: list
    truncated: bool


def cluster_chain(result: LambdaResult, v: int) -> CellChain:
    """The growing cells of ``v``: Pi_0(v), Pi_1(v), ... up to Pi_{n-1}(v)."""
    if not result.archive:
        raise InvalidParameter("cluster_chain needs a run with the archive enabled")
    done = len(result.archive)  # Pi_0 .. Pi_{done-1}
    upto = min(done, max(result.config.n_bits, 1))
    cells = [rec.partition.cell(v) for rec in result.archive[:upto]]
    return CellChain(cells, result.degenerate)
