"""Monte-Carlo and exact checks on top of the construction.

Batches are generated in parallel across seeds; every statistic is a
single-threaded reduction over the per-sample summaries.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import stats

from .cluster_ops import clust, cluster_report, fur_step, r_plus, sep_step
from .construction import (
    ConstructionConfig,
    LambdaResult,
    one_seed_per_cell,
    run,
    separation_ok,
    strict_growth_ok,
)
from .errors import ContractViolation, DegeneracyError, InsufficientDataError, InvalidParameter
from .partition import (
    Partition,
    classes_connected,
    is_compatible,
    is_refinement,
    singleton_partition,
    vor,
)
from .randomness import organize_families, stream_words
from .tree_window import Forest, TreeWindow, build_window, full_forest, window_size

GW_STREAM = 1 << 32
FORKING_REPORT_LIMIT = 200_000


# -- transport specs ------------------------------------------------------


@dataclass
class SampleContext:
    window: TreeWindow
    result: LambdaResult
    pi0: Partition
    families: object


def _self_mass(ctx: SampleContext):
    return 1.0, 1.0


def _neighbor_mass(ctx: SampleContext):
    deg = float(len(ctx.window.neighbors(0)))
    return deg, deg


def _distinguished_mass(ctx: SampleContext):
    cell = np.flatnonzero(ctx.pi0.cell_of == ctx.pi0.cell_of[0])
    keys = ctx.families.U(0)[1].keys()[cell]
    boss = cell[np.lexsort((cell, keys))[0]]
    sent = float(cell.size) if boss == 0 else 0.0
    return sent, 1.0


@dataclass(frozen=True)
class TransportSpec:
    """A mass function f(root, x) and f(x, root), evaluated per sample.

    ``support_radius`` bounds the distance from source to target; ``None``
    means the mass stays inside the source's cell of the first partition.
    ``mass`` must be a module-level function of a :class:`SampleContext`
    returning ``(sent, received)`` at the root.  It may only look at the
    labels and the tree structure, never at raw vertex numbers.
    """

    name: str
    mass: Callable
    support_radius: int | None = None
    exact: bool = False  # balanced per sample, not just in expectation


BUILTIN_SPECS = {
    "self": TransportSpec("self", _self_mass, 0, exact=True),
    "neighbors": TransportSpec("neighbors", _neighbor_mass, 1, exact=True),
    "distinguished-vertex": TransportSpec("distinguished-vertex", _distinguished_mass, None),
}


def transport_spec(name: str) -> TransportSpec:
    if name not in BUILTIN_SPECS:
        raise InvalidParameter(f"unknown transport spec {name!r}")
    return BUILTIN_SPECS[name]


# -- batches --------------------------------------------------------------


@dataclass
class SampleSummary:
    seed: int
    degenerate: bool
    degeneracy: dict | None
    root_word: str
    headline_ok: bool | None  # every interior cluster reaches the boundary
    n_clusters: int
    root_cluster_size: int
    chain_sizes: list
    root_cell_depth: int  # deepest vertex of the root's first cell
    max_interior_cell: int
    transport: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SampleBatch:
    config: ConstructionConfig
    seeds: list
    summaries: list

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise InvalidParameter("seeds in a batch must be distinct")

    @property
    def degeneracy_rate(self) -> float:
        return sum(s.degenerate for s in self.summaries) / max(len(self.summaries), 1)

    def usable(self) -> list:
        return [s for s in self.summaries if not s.degenerate]

    def to_json(self) -> str:
        body = {"config": asdict(self.config), "seeds": self.seeds,
                "samples": [s.to_dict() for s in self.summaries]}
        return json.dumps(body, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SampleBatch":
        body = json.loads(text)
        return cls(ConstructionConfig(**body["config"]), body["seeds"],
                   [SampleSummary(**s) for s in body["samples"]])


def headline_ok(result: LambdaResult, margin: int) -> bool:
    """Every cluster with a vertex at depth <= R - margin touches the boundary."""
    report = cluster_report(result.window, result.bits) if result.bits.shape[1] else None
    if report is None:
        return True
    inner = result.window.depth <= result.window.radius - margin
    wanted = np.unique(report.forest.comp[inner])
    return bool(report.reaches_boundary[wanted].all())


def summarize(result: LambdaResult, specs=()) -> SampleSummary:
    window, cfg = result.window, result.config
    families = organize_families(cfg.seed, window, cfg.precision)
    pi0 = result.archive[0].partition
    last = result.archive[-1].partition
    depth = window.depth
    root_cell = pi0.cell_of == pi0.cell_of[0]
    deepest = np.zeros(last.n_cells, dtype=np.int64)
    np.maximum.at(deepest, last.cell_of, depth)
    inner = deepest <= window.radius - cfg.interior_margin
    sizes = last.sizes()
    if result.bits.shape[1]:
        forest = clust(window, result.bits)
        n_clusters = forest.n_components
        root_size = int((forest.comp == forest.comp[0]).sum())
    else:
        n_clusters, root_size = 1, window.n
    ctx = SampleContext(window, result, pi0, families)
    transport = {}
    for spec in specs:
        sent, received = spec.mass(ctx)
        transport[spec.name] = [float(sent), float(received)]
    usable = not (result.degenerate and cfg.fallback_policy == "flag_and_exclude")
    return SampleSummary(
        seed=cfg.seed,
        degenerate=result.degenerate,
        degeneracy=None if result.degeneracy is None else asdict(result.degeneracy),
        root_word=result.root_word(),
        headline_ok=headline_ok(result, cfg.interior_margin) if usable else None,
        n_clusters=n_clusters,
        root_cluster_size=root_size,
        chain_sizes=list(result.root_chain),
        root_cell_depth=int(depth[root_cell].max()),
        max_interior_cell=int(sizes[inner].max()) if inner.any() else 0,
        transport=transport,
    )


_WORKER: dict = {}


def _worker_init(config: ConstructionConfig, specs):
    _WORKER["window"] = build_window(config.degree, config.radius)
    _WORKER["config"] = config
    _WORKER["specs"] = specs


def _worker_run(seed: int) -> SampleSummary:
    cfg = _WORKER["config"].replace(seed=seed)
    # the first partition is always needed for transport, so keep the archive
    result = run(cfg.replace(archive=True), _WORKER["window"])
    return summarize(result, _WORKER["specs"])


def generate_batch(config: ConstructionConfig, seeds, jobs: int = 1,
                   specs=tuple(BUILTIN_SPECS)) -> SampleBatch:
    """Run the construction for every seed; results come back ordered by seed list."""
    seeds = [int(s) for s in seeds]
    specs = [transport_spec(s) if isinstance(s, str) else s for s in specs]
    if jobs <= 1 or len(seeds) < 2:
        _worker_init(config, specs)
        summaries = [_worker_run(s) for s in seeds]
    else:
        with ProcessPoolExecutor(jobs, initializer=_worker_init, initargs=(config, specs)) as pool:
            summaries = list(pool.map(_worker_run, seeds, chunksize=max(1, len(seeds) // (8 * jobs))))
    return SampleBatch(config, seeds, summaries)


# -- statistics -----------------------------------------------------------


@dataclass
class ChiSquareReport:
    k: int
    statistic: float
    dof: int
    p_value: float
    counts: dict
    frequencies: dict
    n_used: int
    n_excluded: int
    band: float  # 4 sigma half-width around 2^-k

    @property
    def in_band(self) -> bool:
        target = 2.0 ** -self.k
        return all(abs(f - target) <= self.band for f in self.frequencies.values())

    def passed(self, alpha: float = 1e-3) -> bool:
        return self.in_band and self.p_value > alpha

    def to_dict(self) -> dict:
        return {**asdict(self), "in_band": self.in_band}


def _words(batch) -> tuple[list, int]:
    if isinstance(batch, SampleBatch):
        good = batch.usable()
        return [s.root_word for s in good], len(batch.summaries) - len(good)
    return list(batch), 0


def pattern_chisquare(batch, k: int) -> ChiSquareReport:
    """Chi-square of the root's first ``k`` bits against the uniform law on 2^k patterns.

    ``batch`` is a :class:`SampleBatch` (degenerate samples excluded) or a plain
    sequence of base-2 word strings.
    """
    words, excluded = _words(batch)
    if any(len(w) < k for w in words):
        raise InvalidParameter(f"some samples have fewer than {k} bits")
    n = len(words)
    cells = 1 << k
    if n < 10 * cells:
        raise InsufficientDataError(f"need at least {10 * cells} usable samples, got {n}")
    patterns = [format(i, f"0{k}b") if k else "" for i in range(cells)]
    index = {p: i for i, p in enumerate(patterns)}
    observed = np.bincount([index[w[:k]] for w in words], minlength=cells)
    if cells == 1:
        statistic, p_value = 0.0, 1.0
    else:
        res = stats.chisquare(observed)
        statistic, p_value = float(res.statistic), float(res.pvalue)
    p = 1.0 / cells
    return ChiSquareReport(
        k=k, statistic=statistic, dof=cells - 1, p_value=p_value,
        counts={pat: int(c) for pat, c in zip(patterns, observed)},
        frequencies={pat: float(c) / n for pat, c in zip(patterns, observed)},
        n_used=n, n_excluded=excluded, band=4 * math.sqrt(p * (1 - p) / n),
    )


@dataclass
class FairnessReport:
    frequencies: list
    band: float
    n_used: int

    @property
    def passed(self) -> bool:
        return all(abs(f - 0.5) <= self.band for f in self.frequencies)


def marginal_fairness(batch: SampleBatch) -> FairnessReport:
    """Frequency of 1 for each bit at the root, against 1/2 +- 4 sigma."""
    words, _ = _words(batch)
    if not words:
        raise InsufficientDataError("no usable samples")
    n = len(words)
    bits = np.array([[int(c) for c in w] for w in words], dtype=np.int64).reshape(n, -1)
    return FairnessReport(bits.mean(axis=0).tolist(), 4 * math.sqrt(0.25 / n), n)


@dataclass
class TransportReport:
    spec: str
    mean_sent: float
    mean_received: float
    se_sent: float
    se_received: float
    n: int
    exact_mismatches: int  # samples with sent != received (only meaningful for exact specs)
    clipped_fraction: float  # samples whose root cell reaches beyond depth R - m

    @property
    def combined_se(self) -> float:
        return math.hypot(self.se_sent, self.se_received)

    @property
    def z(self) -> float:
        diff = abs(self.mean_sent - self.mean_received)
        if diff == 0:
            return 0.0
        return diff / self.combined_se if self.combined_se > 0 else math.inf

    def passed(self, sigmas: float = 3.0, exact: bool = False) -> bool:
        if exact:
            return self.exact_mismatches == 0
        return self.z <= sigmas


def mass_transport_balance(batch: SampleBatch, spec: TransportSpec | str) -> TransportReport:
    """Mean mass sent and received at the root, with standard errors.

    Uses every sample, degenerate or not: the transports depend only on the
    first partition, which is built before any bit is drawn.
    """
    spec = transport_spec(spec) if isinstance(spec, str) else spec
    cfg = batch.config
    if spec.support_radius is not None and spec.support_radius > cfg.radius - cfg.interior_margin:
        raise ContractViolation(
            f"spec {spec.name!r} has support radius {spec.support_radius} > R - m = "
            f"{cfg.radius - cfg.interior_margin}")
    rows = [s.transport.get(spec.name) for s in batch.summaries]
    if not rows or any(r is None for r in rows):
        raise InsufficientDataError(f"batch has no values for spec {spec.name!r}")
    values = np.array(rows, dtype=float)
    n = values.shape[0]
    se = values.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(2)
    limit = cfg.radius - cfg.interior_margin
    clipped = sum(s.root_cell_depth > limit for s in batch.summaries) / n
    return TransportReport(
        spec=spec.name,
        mean_sent=float(values[:, 0].mean()), mean_received=float(values[:, 1].mean()),
        se_sent=float(se[0]), se_received=float(se[1]), n=n,
        exact_mismatches=int((values[:, 0] != values[:, 1]).sum()),
        clipped_fraction=float(clipped),
    )


# -- Galton-Watson oracle -------------------------------------------------


def gw_depth_survival(degree: int, depth: int, exact: bool = False):
    """Probability that the root's cluster under fair i.i.d. vertex bits reaches ``depth``.

    A child subtree fails to carry the cluster ``k`` more levels with probability
    ``e_k``: ``e_0 = 0`` and ``e_{k+1} = 1/2 + e_k^(degree-1) / 2``.
    """
    if degree < 3 or depth < 0:
        raise InvalidParameter("need degree >= 3 and depth >= 0")
    half = Fraction(1, 2) if exact else 0.5
    e = Fraction(0) if exact else 0.0
    for _ in range(depth):
        e = half + half * e ** (degree - 1)
    return 1 - e ** degree


def gw_extinction_fixed_point(degree: int) -> float:
    """Smallest root in [0, 1] of e = 1/2 + e^(degree-1)/2."""
    coeffs = np.zeros(degree)
    coeffs[0] = 0.5  # e^(degree-1)
    coeffs[-2] = -1.0
    coeffs[-1] = 0.5
    roots = np.roots(coeffs)
    real = roots[(abs(roots.imag) < 1e-9) & (roots.real >= -1e-12) & (roots.real <= 1 + 1e-9)].real
    return float(real.min())


def _level_starts(degree: int, radius: int) -> list:
    starts = [0, 1]
    size = degree
    for _ in range(radius):
        starts.append(starts[-1] + size)
        size *= degree - 1
    return starts


def _cluster_reaches(degree: int, radius: int, seed: int, starts) -> bool:
    """Explore the root's same-bit cluster level by level, window ids as in build_window."""
    def bits(ids):
        return (stream_words(seed, ids, GW_STREAM) >> np.uint64(63)).astype(np.uint8)

    mine = bits([0])[0]
    level = np.zeros(1, dtype=np.int64)  # index within the level
    for k in range(radius):
        fan = degree if k == 0 else degree - 1
        child = (level[:, None] * fan + np.arange(fan)).ravel()
        ids = starts[k + 1] + child
        level = child[bits(ids) == mine]
        if level.size == 0:
            return False
    return True


@dataclass
class GWReport:
    degree: int
    radius: int
    n_samples: int
    frequency: float
    oracle: float
    z: float
    forking_each_label: float | None

    @property
    def passed(self) -> bool:
        return abs(self.z) <= 3.0


def gw_empirical_survival(degree: int, radius: int, n_samples: int, seed: int = 0,
                          forking: bool | None = None) -> GWReport:
    """Frequency that the root's cluster reaches depth ``radius``; sample ``i`` uses seed ``seed + i``.

    Also reports how often both labels own a forking cluster, when the window
    is small enough to label completely (or when ``forking`` is forced).
    """
    if degree < 3 or radius < 1 or n_samples < 1:
        raise InvalidParameter("parameters must be positive, degree >= 3")
    starts = _level_starts(degree, radius)
    hits = sum(_cluster_reaches(degree, radius, seed + i, starts) for i in range(n_samples))
    freq = hits / n_samples
    oracle = gw_depth_survival(degree, radius)
    sd = math.sqrt(oracle * (1 - oracle) / n_samples)
    z = (freq - oracle) / sd if sd > 0 else (0.0 if freq == oracle else math.inf)
    if forking is None:
        forking = window_size(degree, radius) <= FORKING_REPORT_LIMIT
    each = forking_existence_frequency(degree, radius, n_samples, seed) if forking else None
    return GWReport(degree, radius, n_samples, freq, oracle, z, each)


def iid_bits(window: TreeWindow, seed: int) -> np.ndarray:
    return (stream_words(seed, np.arange(window.n), GW_STREAM) >> np.uint64(63)).astype(np.uint8)


def forking_existence_frequency(degree: int, radius: int, n_samples: int, seed: int = 0) -> float:
    """Fraction of samples where both labels own a forking cluster (proxy)."""
    window = build_window(degree, radius)
    hits = 0
    for i in range(n_samples):
        bits = iid_bits(window, seed + i)
        rep = cluster_report(window, bits)
        labels = bits[_component_roots(rep.forest)]
        hits += bool(rep.forking[labels == 0].any() and rep.forking[labels == 1].any())
    return hits / n_samples


def _component_roots(forest: Forest) -> np.ndarray:
    first = np.full(forest.n_components, forest.comp.shape[0], dtype=np.int64)
    np.minimum.at(first, forest.comp, np.arange(forest.comp.shape[0]))
    return first


# -- exact suite ----------------------------------------------------------


@dataclass
class Violation:
    check: str
    trial: int
    seed: int
    detail: str = ""


@dataclass
class ExactReport:
    trials: int
    radius: int
    seed: int
    checks: dict = field(default_factory=dict)  # name -> instances checked
    violations: list = field(default_factory=list)
    skipped: dict = field(default_factory=dict)  # name -> degenerate instances

    @property
    def passed(self) -> bool:
        return not self.violations

    def count(self, name: str, ok: bool, trial: int, detail: str = "") -> None:
        self.checks[name] = self.checks.get(name, 0) + 1
        if not ok:
            self.violations.append(Violation(name, trial, self.seed, detail))

    def skip(self, name: str) -> None:
        self.skipped[name] = self.skipped.get(name, 0) + 1

    def to_dict(self) -> dict:
        return {"trials": self.trials, "radius": self.radius, "seed": self.seed,
                "checks": self.checks, "skipped": self.skipped, "passed": self.passed,
                "violations": [asdict(v) for v in self.violations]}


def random_instance(window: TreeWindow, rng: np.random.Generator):
    """A random ambient forest and fair-ish labeling for r_plus checks."""
    keep = rng.choice([1.0, 0.995, 0.98])
    kept = rng.random(window.n) < keep
    bias = rng.choice([0.5, 0.3, 0.7])
    labels = (rng.random(window.n) < bias).astype(np.uint8)
    return Forest(window, kept), labels


def _try_r_plus(window, ambient, labels):
    try:
        return r_plus(window, ambient, labels)
    except DegeneracyError:
        return None


def symmetry_audit(n_trials: int, radius: int, seed: int = 0, degree: int = 3) -> ExactReport:
    """Check r_plus(1 - L) == 1 - r_plus(L) and r_plus(r_plus(L)) == r_plus(L) exactly."""
    window = build_window(degree, radius)
    report = ExactReport(n_trials, radius, seed)
    for t in range(n_trials):
        _r_plus_checks(window, np.random.default_rng([seed, t]), report, t)
    return report


def _r_plus_checks(window, rng, report: ExactReport, t: int) -> np.ndarray | None:
    ambient, labels = random_instance(window, rng)
    out = _try_r_plus(window, ambient, labels)
    flipped = _try_r_plus(window, ambient, 1 - labels)
    if out is None or flipped is None:
        report.count("r_plus symmetry", out is None and flipped is None, t,
                     "degeneracy is not label-blind")
        return None
    report.count("r_plus symmetry", np.array_equal(flipped, 1 - out), t,
                 f"{int((flipped != 1 - out).sum())} vertices differ")
    again = _try_r_plus(window, ambient, out)
    report.count("r_plus fixed point", again is not None and np.array_equal(again, out), t)
    return out


def exact_suite(n_trials: int = 1000, radius: int = 8, seed: int = 0, degree: int = 3) -> ExactReport:
    """Zero-tolerance structural checks of vor, sep, fur and r_plus on random instances.

    Each trial draws labels, merges them with r_plus so every cluster is forking,
    and feeds the resulting forest through sep and both fur seed rules.
    """
    window = build_window(degree, radius)
    report = ExactReport(n_trials, radius, seed)
    everything = full_forest(window)
    for t in range(n_trials):
        rng = np.random.default_rng([seed, t])
        _r_plus_checks(window, rng, report, t)
        _vor_checks(window, rng, report, t)
        families = organize_families(int(rng.integers(1 << 62)), window)
        labels = (rng.random(window.n) < 0.5).astype(np.uint8)
        merged = _try_r_plus(window, everything, labels)
        if merged is None:
            report.skip("forking forest")
            continue
        again = _try_r_plus(window, everything, merged)
        report.count("r_plus fixed point", again is not None and np.array_equal(again, merged), t)
        forest = clust(window, merged)
        pi = singleton_partition(window)
        for level in range(int(rng.integers(1, 3))):
            res = sep_step(window, forest, pi, families.U(level))
            _sep_checks(forest, pi, res, report, t)
            pi = res.partition
        _fur_checks(window, forest, singleton_partition(window), families, report, t)
        _fur_checks(window, forest, pi, families, report, t)
    return report


def _vor_checks(window, rng, report, t):
    ambient = Forest(window, rng.random(window.n) < 0.9)
    rooted = ambient.rooted()
    seeds = rng.random(window.n) < rng.choice([0.02, 0.1, 0.3])
    first = _component_roots(ambient)
    seeds[first[rng.random(first.shape[0]) < 0.5]] = True  # some components seeded at the top
    comp_seeded = np.zeros(ambient.n_components, dtype=bool)
    comp_seeded[ambient.comp[seeds]] = True
    seeds |= np.isin(np.arange(window.n), first[~comp_seeded])
    alpha = rng.random(window.n) + 1e-12
    phi = vor(rooted, seeds, alpha)
    report.count("vor connected", classes_connected(rooted, phi), t)
    per_class = np.bincount(phi[seeds], minlength=window.n)
    owners = np.unique(phi)
    report.count("vor one seed per cell", bool((per_class[owners] == 1).all()
                                                and seeds[owners].all()), t)


def _sep_checks(forest, pi, res, report, t):
    report.count("sep separation >= 3", separation_ok(res, 3), t)
    report.count("sep strict growth", strict_growth_ok(res), t)
    report.count("sep refinement", is_refinement(pi, res.partition), t)
    report.count("sep compatible", is_compatible(forest, res.partition), t)
    report.count("sep one seed per cell", one_seed_per_cell(res), t)


def _fur_checks(window, forest, pi, families, report, t):
    q_furc = None
    for rule in ("quotient", "vertex"):
        try:
            res = fur_step(window, forest, pi, families.V(1), rule)
        except DegeneracyError:
            report.skip(f"fur[{rule}]")
            if rule == "vertex":
                report.count("fur[vertex] never degenerate on forking forests", False, t)
            continue
        if q_furc is None:
            q_furc = res.quotient.rooted.boundary_branch_counts() >= 3
        per_cell = np.bincount(res.partition.cell_of[res.quotient.tops[q_furc]],
                               minlength=res.partition.n_cells)
        if rule == "quotient":
            report.count("fur[quotient] exactly one quotient furcation per cell",
                         bool((per_cell == 1).all()), t)
        else:
            report.count("fur[vertex] one seed per cell", one_seed_per_cell(res), t)
            report.count("fur[vertex] at most one quotient furcation per cell",
                         bool((per_cell <= 1).all()), t)
        report.count(f"fur[{rule}] refinement", is_refinement(pi, res.partition), t)
