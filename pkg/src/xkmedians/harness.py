"""Reference clustering, instance generators and experiment runners.

Everything here is driven by an :class:`ExperimentConfig` and a master
seed; trials draw from per-trial rng substreams so runs are reproducible
and trials independent.
"""

from __future__ import annotations

import abc
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import kernels
from .core import (
    CenterSet,
    DuplicateCenter,
    Instance,
    Internal,
    Leaf,
    ThresholdTree,
    XkmediansError,
    cost_tree,
    cost_unconstrained,
    validate_tree,
)
from .dynamic_tree import DeleteRequest, DynamicTree, InsertRequest, Request, \
    ReplayMismatch, replay_flatten
from .rng import RngHandle
from .static_builder import build_tree_static, partition_leaf_static

__all__ = [
    "ExperimentConfig",
    "reference_kmedians",
    "gen_gaussian_mixture",
    "gen_lower_bound_lp",
    "LowerBoundInstance",
    "check_center_separation",
    "SeparationReport",
    "gen_universal_lb",
    "UniversalInstance",
    "gen_request_stream",
    "run_competitive_experiment",
    "run_dynamic_experiment",
    "run_coupling_test",
    "run_fully_dynamic",
    "empirical_radius_decay",
    "DynamicClustererInterface",
    "StaticClusterer",
    "NaiveRecomputeClusterer",
    "canonical_shape",
    "chi_square_homogeneity",
]


_EXPERIMENTS = (
    "competitive",
    "dynamic",
    "coupling",
    "lowerbound",
    "universal",
    "fully_dynamic",
    "radius_decay",
)


@dataclass
class ExperimentConfig:
    experiment: str = "competitive"
    p: float = 2.0
    k: int = 16
    d: int = 8
    n_per_cluster: int = 8
    spread: float = 0.15
    trials: int = 10
    seed: int = 0
    generator: str = "gaussian"
    swap_budget: int = 32
    n_requests: int = 1000
    checkpoint_every: int = 250
    coupling_streams: int = 50
    stream_length: int = 40
    seeds_per_builder: int = 2000
    n_coincident: int = 3
    d_override: Optional[int] = None
    box_halfwidth: float = 4.0
    threads: int = 1

    def validate(self) -> list[str]:
        problems = []
        if self.experiment not in _EXPERIMENTS:
            problems.append(
                f"experiment must be one of {_EXPERIMENTS}, got {self.experiment!r}")
        if not (math.isfinite(self.p) and self.p >= 1.0):
            problems.append(f"p must be a finite real >= 1, got {self.p}")
        for name in ("k", "d", "n_per_cluster", "trials", "n_requests",
                     "checkpoint_every", "coupling_streams", "stream_length",
                     "seeds_per_builder", "n_coincident", "threads"):
            if int(getattr(self, name)) < 1:
                problems.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.spread < 0:
            problems.append(f"spread must be >= 0, got {self.spread}")
        if self.swap_budget < 0:
            problems.append(f"swap_budget must be >= 0, got {self.swap_budget}")
        if self.box_halfwidth <= 0:
            problems.append(f"box_halfwidth must be > 0, got {self.box_halfwidth}")
        return problems

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise XkmediansError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# reference clustering


def reference_kmedians(X, k: int, p: float, rng: RngHandle,
                       swap_budget: Optional[int] = None) -> CenterSet:
    """Distance-weighted seeding plus best-improvement single swaps.

    Centers are data points.  Each round evaluates every point as a
    swap-in candidate against its best swap-out center and applies the
    best strictly improving swap; stops when none improves or when the
    swap budget runs out.  The cost never increases across rounds.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < k:
        raise XkmediansError(f"need at least k={k} points, got {n}")
    if len({row.tobytes() for row in X}) < k:
        raise XkmediansError(f"fewer than k={k} distinct points")
    budget = 4 * k if swap_budget is None else swap_budget
    inv = 1.0 / p

    rows = [int(rng.integers(0, n))]
    best_pow = kernels.pow_dist_one(X, X[rows[0]], p)
    while len(rows) < k:
        total = float(best_pow.sum())
        if total > 0:
            r = int(rng.choice(n, p=best_pow / total))
        else:  # all remaining mass on duplicates; fall back to any unseen coords
            taken = {X[r].tobytes() for r in rows}
            fresh = [i for i in range(n) if X[i].tobytes() not in taken]
            r = int(fresh[int(rng.integers(0, len(fresh)))])
        if best_pow[r] == 0.0 and total > 0:
            continue  # duplicate of a chosen center (zero-probability draw)
        rows.append(r)
        np.minimum(best_pow, kernels.pow_dist_one(X, X[r], p), out=best_pow)

    centers = X[rows].copy()
    d1p, a1, d2p = kernels.nearest_two(X, centers, p)
    d1, d2 = d1p**inv, d2p**inv
    cost = float(d1.sum())
    cand = np.arange(n)
    for _ in range(budget):
        pos, out, new_cost = kernels.best_swap_batch(X, cand, p, d1, a1, d2, k)
        if not new_cost < cost - 1e-9 * max(1.0, cost):
            break
        incoming = X[cand[pos]]
        others = np.delete(centers, out, axis=0)
        if any(np.array_equal(incoming, c) for c in others):
            break  # would duplicate a kept center
        centers[out] = incoming
        d1p, a1, d2p = kernels.nearest_two(X, centers, p)
        d1, d2 = d1p**inv, d2p**inv
        new = float(d1.sum())
        assert new <= cost + 1e-6 * max(1.0, cost)
        cost = new
    return CenterSet(centers)


# ---------------------------------------------------------------------------
# generators


def gen_gaussian_mixture(k: int, d: int, n_per_cluster: int, spread: float,
                         rng: RngHandle, p: float = 2.0) -> Instance:
    """k isotropic clusters with means uniform in [-1, 1]^d."""
    while True:
        means = rng.uniform(-1.0, 1.0, (k, d))
        if len({row.tobytes() for row in means}) == k:
            break
    points = np.repeat(means, n_per_cluster, axis=0)
    if spread > 0:
        points = points + spread * rng.normal(size=points.shape)
    return Instance(points, CenterSet(means), p)


@dataclass(frozen=True)
class LowerBoundInstance:
    instance: Instance
    eps: float
    d_paper: int
    d_used: int
    opt_upper_bound: float  # certified: assigning every point to its center


def gen_lower_bound_lp(k: int, p: float, rng: RngHandle, n_coincident: int = 3,
                       d_override: Optional[int] = None) -> LowerBoundInstance:
    """Hard grid instance for lp: k random grid centers, each carrying a
    point at c + eps*1, one at c - eps*1 and n coincident copies.

    The grid step is eps = 1/ceil(ln k) so grid membership is exact; the
    dimension follows d = ceil(64 p^4 ln k) unless overridden.
    """
    if k < 2:
        raise XkmediansError("lower-bound instance needs k >= 2")
    d_paper = math.ceil(64.0 * p**4 * math.log(k))
    d = d_paper if d_override is None else int(d_override)
    g = math.ceil(math.log(k))
    eps = 1.0 / g
    while True:
        centers = rng.integers(0, g + 1, (k, d)) / g
        if len({row.tobytes() for row in centers}) == k:
            break
    shift = np.full(d, eps)
    points = np.concatenate([
        centers + shift,
        centers - shift,
        np.repeat(centers, n_coincident, axis=0),
    ])
    bound = 2.0 * k * eps * d ** (1.0 / p)
    return LowerBoundInstance(Instance(points, CenterSet(centers), p),
                              eps, d_paper, d, bound)


@dataclass(frozen=True)
class SeparationReport:
    min_pair_distance: float
    bound: float  # d^(1/p) / 12
    ratio: float  # min pair / d^(1/p)
    passed: bool


def check_center_separation(lb: LowerBoundInstance) -> SeparationReport:
    """Verify every center pair is at least d^(1/p)/12 apart."""
    centers = lb.instance.centers.coords
    p = lb.instance.p
    k, d = centers.shape
    best = math.inf
    for i in range(k - 1):
        dist = (np.abs(centers[i + 1:] - centers[i]) ** p).sum(axis=1) ** (1.0 / p)
        best = min(best, float(dist.min()))
    scale = d ** (1.0 / p)
    return SeparationReport(best, scale / 12.0, best / scale, best >= scale / 12.0)


@dataclass(frozen=True)
class UniversalInstance:
    """Two centers and one special point that no single tree serves well
    under every norm: origin plus (1 + d^(3/4), 1, ..., 1), special
    point all-ones."""

    centers: CenterSet
    points: np.ndarray
    special_point: np.ndarray

    def instance(self, p: float) -> Instance:
        return Instance(self.points, self.centers, p)

    def optimal_special_cost(self, p: float) -> float:
        dists = (np.abs(self.centers.coords - self.special_point) ** p
                 ).sum(axis=1) ** (1.0 / p)
        return float(dists.min())


def gen_universal_lb(d: int, n_coincident: int = 3) -> UniversalInstance:
    if d < 1:
        raise XkmediansError("dimension must be >= 1")
    c1 = np.zeros(d)
    c2 = np.ones(d)
    c2[0] = 1.0 + d**0.75
    x = np.ones(d)
    points = np.concatenate([
        np.repeat(c1[None, :], n_coincident, axis=0),
        np.repeat(c2[None, :], n_coincident, axis=0),
        x[None, :],
    ])
    return UniversalInstance(CenterSet(np.stack([c1, c2])), points, x)


def gen_request_stream(k: int, d: int, n_requests: int, rng: RngHandle,
                       box_halfwidth: float = 1.0) -> list[Request]:
    """Insert-heavy warmup to k centers, then a balanced request mix."""
    requests: list[Request] = []
    live: list[int] = []
    next_id = 0
    lo, hi = -0.95 * box_halfwidth, 0.95 * box_halfwidth
    for _ in range(n_requests):
        warm = len(live) < k and next_id < k
        if live and not warm and (len(live) >= 2 * k or rng.uniform() < 0.5):
            victim = live.pop(int(rng.integers(0, len(live))))
            requests.append(DeleteRequest(victim))
        else:
            requests.append(InsertRequest(tuple(rng.uniform(lo, hi, d))))
            live.append(next_id)
            next_id += 1
    return requests


# ---------------------------------------------------------------------------
# experiments


def _ratio(ct: float, cu: float) -> tuple[float, bool]:
    if cu == 0.0:
        return 1.0, True  # zero-cost instance: ratio 1 by convention, flagged
    return ct / cu, False


def theorem_envelope(p: float, k: int) -> float:
    """p * (ln k)^(1 + 1/p - 1/p^2), the shape of the upper bound."""
    if k < 2:
        return 1.0
    return p * math.log(k) ** (1.0 + 1.0 / p - 1.0 / p**2)


def _competitive_trial(cfg: ExperimentConfig, trial: int) -> dict:
    rng = RngHandle(cfg.seed).child(100, trial)
    inst = gen_gaussian_mixture(cfg.k, cfg.d, cfg.n_per_cluster, cfg.spread,
                                rng.child(0), p=cfg.p)
    centers = reference_kmedians(inst.points, cfg.k, cfg.p, rng.child(1),
                                 swap_budget=cfg.swap_budget)
    tree = build_tree_static(centers, cfg.p, rng.child(2))
    ct = cost_tree(inst.points, tree, centers, cfg.p)
    cu = cost_unconstrained(inst.points, centers, cfg.p)
    ratio, zero = _ratio(ct, cu)
    return {
        "trial": trial, "p": cfg.p, "k": cfg.k, "d": cfg.d,
        "n": inst.points.shape[0], "cost_tree": ct, "cost_unconstrained": cu,
        "ratio": ratio, "zero_cost": zero,
    }


def run_competitive_experiment(cfg: ExperimentConfig) -> dict:
    """Static tree cost against the reference clustering cost, per trial."""
    if cfg.threads > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            rows = list(pool.map(_competitive_trial, [cfg] * cfg.trials,
                                 range(cfg.trials)))
    else:
        rows = [_competitive_trial(cfg, t) for t in range(cfg.trials)]
    rows.sort(key=lambda r: r["trial"])
    ratios = np.array([r["ratio"] for r in rows])
    summary = {
        "median_ratio": float(np.median(ratios)),
        "max_ratio": float(ratios.max()),
        "envelope": theorem_envelope(cfg.p, cfg.k),
        "zero_cost_trials": int(sum(r["zero_cost"] for r in rows)),
    }
    return {"rows": rows, "summary": summary}


def run_dynamic_experiment(cfg: ExperimentConfig) -> dict:
    """Feed a request stream through the dynamic maintainer and account
    recourse, touched nodes, wall time and periodic cost ratios against
    a freshly built static tree on the same centers."""
    rng = RngHandle(cfg.seed).child(200)
    requests = gen_request_stream(cfg.k, cfg.d, cfg.n_requests, rng.child(0),
                                  cfg.box_halfwidth)
    cloud = rng.child(1).uniform(-cfg.box_halfwidth, cfg.box_halfwidth,
                                 (max(64, 4 * cfg.k), cfg.d))
    tree = DynamicTree(cfg.d, cfg.p, cfg.seed, box_halfwidth=cfg.box_halfwidth)
    checkpoints = []
    for idx, req in enumerate(requests):
        tree.process_request(req)
        if (idx + 1) % cfg.checkpoint_every == 0 and len(tree) >= 1:
            centers = tree.center_set()
            flat = tree.flatten()
            static = build_tree_static(centers, cfg.p, rng.child(2, idx))
            ct_dyn = cost_tree(cloud, flat, centers, cfg.p)
            ct_static = cost_tree(cloud, static, centers, cfg.p)
            ratio, zero = _ratio(ct_dyn, ct_static)
            checkpoints.append({
                "request_index": idx, "k": len(tree),
                "dynamic_cost": ct_dyn, "static_cost": ct_static,
                "ratio_vs_static": ratio, "zero_cost": zero,
            })
    ledger = list(tree.ledger)
    n = len(ledger)
    rebuilds = sum(r["rebuild_fired"] for r in ledger)
    summary = {
        "requests": n,
        "amortized_recourse": sum(r["recourse"] for r in ledger) / n,
        "amortized_touched": sum(r["touched_nodes"] for r in ledger) / n,
        "amortized_wall_nanos": sum(r["wall_nanos"] for r in ledger) / n,
        "rebuild_requests": int(rebuilds),
        "final_k": len(tree),
    }
    return {"ledger": ledger, "checkpoints": checkpoints, "summary": summary}


def canonical_shape(tree: ThresholdTree):
    """Hashable key: leaf ids plus left/right topology, thresholds ignored."""

    def enc(node):
        if isinstance(node, Leaf):
            return ("L", node.center_id)
        return ("I", enc(node.left), enc(node.right))

    return enc(tree.root)


def chi_square_homogeneity(counts_a: Counter, counts_b: Counter,
                           min_expected: float = 5.0) -> dict:
    """Two-sample chi-square over pooled categories.

    Categories whose pooled expectation is below ``min_expected`` are
    merged into one rest bucket.  With a single bucket the test is
    trivially satisfied (p = 1).
    """
    from scipy.stats import chi2

    na, nb = sum(counts_a.values()), sum(counts_b.values())
    total = na + nb
    cats = sorted(set(counts_a) | set(counts_b), key=repr)
    main_bins, rest = [], [0, 0]
    for c in cats:
        pooled = counts_a.get(c, 0) + counts_b.get(c, 0)
        if pooled * min(na, nb) / total >= min_expected:
            main_bins.append((counts_a.get(c, 0), counts_b.get(c, 0)))
        else:
            rest[0] += counts_a.get(c, 0)
            rest[1] += counts_b.get(c, 0)
    if rest[0] + rest[1] > 0:
        main_bins.append(tuple(rest))
    if len(main_bins) < 2:
        return {"statistic": 0.0, "p_value": 1.0, "dof": 0, "bins": len(main_bins)}
    stat = 0.0
    for ca, cb in main_bins:
        pooled = ca + cb
        ea, eb = pooled * na / total, pooled * nb / total
        stat += (ca - ea) ** 2 / ea + (cb - eb) ** 2 / eb
    dof = len(main_bins) - 1
    return {"statistic": float(stat), "p_value": float(chi2.sf(stat, dof)),
            "dof": dof, "bins": len(main_bins)}


def _shape_counts_static(coords: np.ndarray, p: float, seeds: int, rng: RngHandle
                         ) -> Counter:
    counts: Counter = Counter()
    for s in range(seeds):
        tree = build_tree_static(CenterSet(coords), p, rng.child(s))
        counts[canonical_shape(tree)] += 1
    return counts


def _shape_counts_dynamic(coords: np.ndarray, p: float, seeds: int, seed0: int,
                          box: float) -> Counter:
    """Shape counts for trees built by the dynamic machinery.

    After the sequential inserts the root is rebuilt, so the compared
    distribution is the exponential-clock construction on the full
    center set.  (A tree whose latest updates did not trigger a root
    rebuild follows the static algorithm with the anchors recorded at
    that rebuild, which is a different, equally valid, oracle choice.)
    """
    counts: Counter = Counter()
    for s in range(seeds):
        tree = DynamicTree(coords.shape[1], p, (seed0 + 1) * 1_000_003 + s,
                           box_halfwidth=box)
        for row in coords:
            tree.insert(row)
        tree.rebuild()
        counts[canonical_shape(tree.flatten())] += 1
    return counts


COUPLING_CONFIGURATIONS: dict[str, np.ndarray] = {
    "collinear4": np.array([[0.0], [0.25], [0.5], [0.75]]),
    "grid5": np.array([[0.0, 0.0], [0.8, 0.0], [0.0, 0.8], [0.8, 0.8], [0.4, 0.4]]),
}


def run_coupling_test(cfg: ExperimentConfig) -> dict:
    """(a) per-request shared-tape replay equality on random streams;
    (b) chi-square shape comparison between independent static and
    dynamic builds on fixed small configurations."""
    rng = RngHandle(cfg.seed).child(300)
    k_cap = min(cfg.k, 6)
    streams_ok = 0
    mismatches: list[str] = []
    for s in range(cfg.coupling_streams):
        srng = rng.child(s)
        tree = DynamicTree(min(cfg.d, 3), cfg.p, cfg.seed * 7919 + s,
                           box_halfwidth=1.0)
        ok = True
        for step in range(cfg.stream_length):
            if len(tree) == 0 or (len(tree) < k_cap and srng.uniform() < 0.6):
                pt = srng.uniform(-0.9, 0.9, tree.d)
                tree.insert(pt)
            else:
                ids = sorted(tree._points)
                tree.delete(ids[int(srng.integers(0, len(ids)))])
            try:
                if replay_flatten(tree) != tree.flatten():
                    ok = False
            except ReplayMismatch as exc:
                ok = False
                mismatches.append(f"stream {s} step {step}: {exc}")
            if not ok:
                break
        streams_ok += ok
    shape_tests = {}
    for name, coords in COUPLING_CONFIGURATIONS.items():
        static_counts = _shape_counts_static(coords, cfg.p,
                                             cfg.seeds_per_builder,
                                             rng.child(1000, hash(name) % 997))
        dyn_counts = _shape_counts_dynamic(coords, cfg.p,
                                           cfg.seeds_per_builder, cfg.seed, 1.0)
        shape_tests[name] = chi_square_homogeneity(static_counts, dyn_counts)
    return {
        "replay_streams": cfg.coupling_streams,
        "replay_equal": streams_ok,
        "replay_mismatches": mismatches[:10],
        "shape_tests": shape_tests,
    }


# ---------------------------------------------------------------------------
# fully dynamic composition


class DynamicClustererInterface(abc.ABC):
    """A dynamic k-medians engine: after each point insert/delete it
    yields at most k centers (rows of a float array)."""

    @abc.abstractmethod
    def process(self, op: str, point: Optional[np.ndarray], point_id: int
                ) -> np.ndarray:
        ...


class StaticClusterer(DynamicClustererInterface):
    """Never changes its centers; the trivial baseline."""

    def __init__(self, centers: np.ndarray):
        self._centers = np.asarray(centers, dtype=np.float64)

    def process(self, op, point, point_id):
        return self._centers


class NaiveRecomputeClusterer(DynamicClustererInterface):
    """Recompute the reference clustering every ceil(k/2) requests.

    Stands in for an external low-recourse dynamic k-medians algorithm;
    between recomputes it drops centers whose source point was deleted.
    """

    def __init__(self, k: int, p: float, rng: RngHandle,
                 period: Optional[int] = None, swap_budget: int = 8):
        self.k = k
        self.p = p
        self._rng = rng
        self._period = period if period is not None else math.ceil(k / 2)
        self._swap_budget = swap_budget
        self._points: dict[int, np.ndarray] = {}
        self._centers = np.zeros((0, 1))
        self._count = 0

    def _recompute(self) -> None:
        pts = np.stack(list(self._points.values()))
        distinct = {row.tobytes() for row in pts}
        if len(distinct) <= self.k:
            seen: set[bytes] = set()
            rows = []
            for i, row in enumerate(pts):
                if row.tobytes() not in seen:
                    seen.add(row.tobytes())
                    rows.append(i)
            self._centers = pts[rows]
        else:
            cs = reference_kmedians(pts, self.k, self.p,
                                    self._rng.child(self._count),
                                    swap_budget=self._swap_budget)
            self._centers = cs.coords.copy()

    def process(self, op, point, point_id):
        if op == "insert":
            self._points[point_id] = np.asarray(point, dtype=np.float64)
        else:
            gone = self._points.pop(point_id)
            keep = [i for i, c in enumerate(self._centers)
                    if not np.array_equal(c, gone) or gone.tobytes() in
                    {r.tobytes() for r in self._points.values()}]
            self._centers = self._centers[keep]
        self._count += 1
        if not self._points:
            self._centers = np.zeros((0, point.shape[0] if point is not None
                                      else self._centers.shape[1]))
        elif self._count % self._period == 1 or self._centers.shape[0] == 0:
            self._recompute()
        return self._centers


def run_fully_dynamic(cfg: ExperimentConfig,
                      clusterer: DynamicClustererInterface) -> dict:
    """Drive a point stream through a dynamic clusterer and mirror its
    center changes in the threshold tree, deletions before insertions so
    intermediate center sets never exceed k."""
    rng = RngHandle(cfg.seed).child(400)
    tree = DynamicTree(cfg.d, cfg.p, cfg.seed * 31 + 17,
                       box_halfwidth=cfg.box_halfwidth)
    tree_id: dict[bytes, int] = {}
    prev: dict[bytes, np.ndarray] = {}
    points: dict[int, np.ndarray] = {}
    next_pid = 0
    total_recourse = 0
    checkpoints = []
    warmup = max(1, int(0.6 * cfg.n_requests))
    for step in range(cfg.n_requests):
        if not points or step < warmup or rng.uniform() < 0.5:
            pid, next_pid = next_pid, next_pid + 1
            pt = rng.uniform(-0.9 * cfg.box_halfwidth, 0.9 * cfg.box_halfwidth,
                             cfg.d)
            points[pid] = pt
            centers = clusterer.process("insert", pt, pid)
        else:
            pid = sorted(points)[int(rng.integers(0, len(points)))]
            points.pop(pid)
            centers = clusterer.process("delete", None, pid)
        centers = np.asarray(centers, dtype=np.float64)
        k_limit = getattr(clusterer, "k", None)
        if k_limit is not None and centers.shape[0] > k_limit:
            raise XkmediansError("clusterer emitted more than k centers")
        keys = [row.tobytes() for row in centers]
        if len(set(keys)) != len(keys):
            raise DuplicateCenter("clusterer emitted duplicate centers")
        new = dict(zip(keys, centers))
        for key in [k_ for k_ in prev if k_ not in new]:
            total_recourse += tree.delete(tree_id.pop(key)).recourse
            prev.pop(key)
        for key, row in new.items():
            if key not in prev:
                res = tree.insert(row)
                tree_id[key] = res.center_id
                prev[key] = row
                total_recourse += res.recourse
        if k_limit is not None:
            assert len(tree) <= k_limit, "intermediate center set exceeded k"
        if (step + 1) % cfg.checkpoint_every == 0 and points and prev:
            X = np.stack(list(points.values()))
            cs = tree.center_set()
            ct = cost_tree(X, tree.flatten(), cs, cfg.p)
            cu = cost_unconstrained(X, cs, cfg.p)
            ratio, zero = _ratio(ct, cu)
            checkpoints.append({"request_index": step, "n_points": len(points),
                                "k_centers": len(cs), "ratio": ratio,
                                "zero_cost": zero})
    return {
        "point_requests": cfg.n_requests,
        "amortized_tree_recourse": total_recourse / cfg.n_requests,
        "checkpoints": checkpoints,
        "final_centers": len(tree),
    }


# ---------------------------------------------------------------------------
# radius decay diagnostic


def empirical_radius_decay(c: CenterSet, p: float, trials: int, rng: RngHandle
                           ) -> dict:
    """Distribution of sampled-cut steps until the main radius halves.

    A measurement, not a gate: reported next to the analysis bound
    L = ceil(2^(p+3) d ln k).
    """
    if len(c) < 2:
        raise XkmediansError("radius decay needs at least two centers")
    k, d = len(c), c.dim
    horizons: list[Optional[int]] = []
    traces = []
    for t in range(trials):
        part = partition_leaf_static(c, p, rng.child(t), trace=True)
        trace = part.radius_trace
        traces.append(trace)
        r0 = trace[0][1]
        steps = 0
        horizon: Optional[int] = None
        for samples, radius in trace:
            if radius <= r0 / 2.0:
                horizon = steps
                break
            steps += samples
        horizons.append(horizon)
    reached = [h for h in horizons if h is not None]
    analysis_bound = math.ceil(2 ** (p + 3) * d * math.log(k)) if k >= 2 else 0
    return {
        "trials": trials,
        "halved": len(reached),
        "horizon_median": float(np.median(reached)) if reached else None,
        "horizon_max": max(reached) if reached else None,
        "analysis_bound": analysis_bound,
        "traces": traces,
    }
