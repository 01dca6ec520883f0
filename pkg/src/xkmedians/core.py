"""Shared geometry, threshold-tree representation and cost evaluation.

A threshold tree routes a point by comparing one coordinate per internal
node: strictly less goes left, greater-or-equal goes right.  Leaves hold
exactly one center id.  Costs are the k-medians objective under an lp
norm: each point pays its lp distance to the center it is routed to.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

import numpy as np

from . import kernels

__all__ = [
    "XkmediansError",
    "DimensionMismatch",
    "EmptyCenterSet",
    "DuplicateCenter",
    "UnknownCenter",
    "Cut",
    "Leaf",
    "Internal",
    "TreeNode",
    "ThresholdTree",
    "CenterSet",
    "Instance",
    "lp_distance",
    "assign",
    "cost_tree",
    "cost_unconstrained",
    "validate_tree",
    "TreeReport",
    "tree_to_dict",
    "tree_from_dict",
    "instance_to_dict",
    "instance_from_dict",
]


class XkmediansError(Exception):
    """Base class for structured errors raised by this package."""


class DimensionMismatch(XkmediansError):
    pass


class EmptyCenterSet(XkmediansError):
    pass


class DuplicateCenter(XkmediansError):
    pass


class UnknownCenter(XkmediansError):
    pass


def as_point(x) -> np.ndarray:
    pt = np.asarray(x, dtype=np.float64)
    if pt.ndim != 1 or pt.size < 1:
        raise DimensionMismatch(f"point must be a 1-d vector, got shape {pt.shape}")
    if not np.all(np.isfinite(pt)):
        raise DimensionMismatch("point has non-finite coordinates")
    return pt


@dataclass(frozen=True)
class Cut:
    """One threshold split: x[coordinate] < threshold goes left."""

    coordinate: int
    threshold: float
    sign: int = 1
    timestamp: Optional[float] = None


@dataclass(frozen=True)
class Leaf:
    center_id: int


@dataclass(frozen=True)
class Internal:
    cut: Cut
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


@dataclass(frozen=True)
class ThresholdTree:
    root: TreeNode

    def leaves(self) -> Iterator[Leaf]:
        stack: list[TreeNode] = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                yield node
            else:
                stack.append(node.left)
                stack.append(node.right)

    def n_leaves(self) -> int:
        return sum(1 for _ in self.leaves())

    def n_nodes(self) -> int:
        count = 0
        stack: list[TreeNode] = [self.root]
        while stack:
            node = stack.pop()
            count += 1
            if isinstance(node, Internal):
                stack.append(node.left)
                stack.append(node.right)
        return count

    def depth(self) -> int:
        def _d(node: TreeNode) -> int:
            if isinstance(node, Leaf):
                return 0
            return 1 + max(_d(node.left), _d(node.right))

        return _d(self.root)


class CenterSet:
    """Immutable id -> point map; all points share one dimension.

    Ids are non-negative and unique; two centers may not share identical
    coordinates.  New ids are assigned monotonically and never reused.
    """

    def __init__(self, coords, ids=None):
        coords = np.ascontiguousarray(coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[0] < 1:
            raise EmptyCenterSet("need at least one center")
        if not np.all(np.isfinite(coords)):
            raise DimensionMismatch("center coordinates must be finite")
        if ids is None:
            ids = np.arange(coords.shape[0], dtype=np.int64)
        else:
            ids = np.asarray(ids, dtype=np.int64)
            if ids.shape != (coords.shape[0],):
                raise DimensionMismatch("ids and coords length mismatch")
            if np.any(ids < 0):
                raise XkmediansError("center ids must be non-negative")
        if len(set(ids.tolist())) != len(ids):
            raise DuplicateCenter("duplicate center id")
        seen = set()
        for row in coords:
            key = row.tobytes()
            if key in seen:
                raise DuplicateCenter("two centers share identical coordinates")
            seen.add(key)
        self._coords = coords
        self._coords.setflags(write=False)
        self._ids = ids
        self._ids.setflags(write=False)
        self._row_of = {int(i): r for r, i in enumerate(ids)}

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @property
    def ids(self) -> np.ndarray:
        return self._ids

    @property
    def dim(self) -> int:
        return self._coords.shape[1]

    def __len__(self) -> int:
        return self._coords.shape[0]

    def __contains__(self, center_id: int) -> bool:
        return int(center_id) in self._row_of

    def point(self, center_id: int) -> np.ndarray:
        try:
            return self._coords[self._row_of[int(center_id)]]
        except KeyError:
            raise UnknownCenter(f"no center with id {center_id}") from None

    def items(self):
        for i, cid in enumerate(self._ids):
            yield int(cid), self._coords[i]

    def subset(self, ids) -> "CenterSet":
        rows = [self._row_of[int(i)] for i in ids]
        return CenterSet(self._coords[rows].copy(), np.asarray(ids, dtype=np.int64))


@dataclass(frozen=True)
class Instance:
    """A clustering instance: points, centers and the norm exponent p."""

    points: np.ndarray
    centers: CenterSet
    p: float

    def __post_init__(self):
        if self.points.ndim != 2:
            raise DimensionMismatch("points must be a 2-d array")
        if self.points.shape[1] != self.centers.dim:
            raise DimensionMismatch("points and centers disagree on dimension")
        _check_p(self.p)


def _check_p(p: float) -> float:
    p = float(p)
    if not np.isfinite(p) or p < 1.0:
        raise XkmediansError(f"p must be a finite real >= 1, got {p}")
    return p


def lp_distance(a, b, p: float) -> float:
    """(sum_i |a_i - b_i|^p)^(1/p)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")
    p = _check_p(p)
    return float((np.abs(a - b) ** p).sum() ** (1.0 / p))


def assign(tree: ThresholdTree, x) -> int:
    """Route x from the root: left iff x[i] < threshold, else right."""
    x = np.asarray(x, dtype=np.float64)
    node = tree.root
    while isinstance(node, Internal):
        if x[node.cut.coordinate] < node.cut.threshold:
            node = node.left
        else:
            node = node.right
    return node.center_id


def tree_to_arrays(tree: ThresholdTree):
    """Array encoding (feat, thresh, left, right, leaf_center) for routing."""
    feat: list[int] = []
    thresh: list[float] = []
    left: list[int] = []
    right: list[int] = []
    center: list[int] = []

    def add(node: TreeNode) -> int:
        idx = len(feat)
        feat.append(-1)
        thresh.append(0.0)
        left.append(-1)
        right.append(-1)
        center.append(-1)
        if isinstance(node, Leaf):
            center[idx] = node.center_id
        else:
            feat[idx] = node.cut.coordinate
            thresh[idx] = node.cut.threshold
            left[idx] = add(node.left)
            right[idx] = add(node.right)
        return idx

    add(tree.root)
    return (
        np.asarray(feat, dtype=np.int32),
        np.asarray(thresh, dtype=np.float64),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(center, dtype=np.int64),
    )


def assign_many(tree: ThresholdTree, points: np.ndarray) -> np.ndarray:
    points = np.ascontiguousarray(points, dtype=np.float64)
    return kernels.route_points(*tree_to_arrays(tree), points)


def cost_tree(points, tree: ThresholdTree, centers: CenterSet, p: float) -> float:
    """Sum over points of lp distance to the tree-assigned center."""
    p = _check_p(p)
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] == 0:
        return 0.0
    leaf_ids = {leaf.center_id for leaf in tree.leaves()}
    missing = [i for i in leaf_ids if i not in centers]
    if missing:
        raise UnknownCenter(f"tree references unknown center ids {sorted(missing)}")
    assigned = assign_many(tree, points)
    target = np.stack([centers.point(i) for i in assigned])
    return float(((np.abs(points - target) ** p).sum(axis=1) ** (1.0 / p)).sum())


def cost_unconstrained(points, centers: CenterSet, p: float) -> float:
    """Sum over points of the lp distance to the nearest center."""
    p = _check_p(p)
    points = np.asarray(points, dtype=np.float64)
    if len(centers) == 0:
        raise EmptyCenterSet("cost_unconstrained needs at least one center")
    if points.shape[0] == 0:
        return 0.0
    dmin, _ = kernels.min_pow_dist(np.ascontiguousarray(points), centers.coords, p)
    return float((dmin ** (1.0 / p)).sum())


@dataclass
class TreeViolation:
    path: str  # "" for root, else e.g. "LRL"
    kind: str
    detail: str


@dataclass
class TreeReport:
    violations: list[TreeViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_tree(tree: ThresholdTree, centers: CenterSet) -> TreeReport:
    """Check the threshold-tree invariants; violations become report rows.

    Checked: every leaf id known and unique, leaf count equals |centers|,
    every center routed to its own leaf, and each internal node's side
    constraint (ids left of a cut have coordinate < threshold, right have
    >= threshold).
    """
    report = TreeReport()
    seen: dict[int, str] = {}

    def walk(node: TreeNode, path: str) -> list[int]:
        if isinstance(node, Leaf):
            cid = node.center_id
            if cid in seen:
                report.violations.append(
                    TreeViolation(path, "duplicate leaf",
                                  f"center {cid} already at '{seen[cid]}'")
                )
            else:
                seen[cid] = path
            if cid not in centers:
                report.violations.append(
                    TreeViolation(path, "unknown center", f"id {cid}")
                )
                return []
            return [cid]
        ids_left = walk(node.left, path + "L")
        ids_right = walk(node.right, path + "R")
        cut = node.cut
        if not np.isfinite(cut.threshold):
            report.violations.append(
                TreeViolation(path, "bad threshold", repr(cut.threshold))
            )
        for cid in ids_left:
            if centers.point(cid)[cut.coordinate] >= cut.threshold:
                report.violations.append(
                    TreeViolation(path, "side violation",
                                  f"center {cid} in left subtree has "
                                  f"coord {cut.coordinate} >= {cut.threshold}")
                )
        for cid in ids_right:
            if centers.point(cid)[cut.coordinate] < cut.threshold:
                report.violations.append(
                    TreeViolation(path, "side violation",
                                  f"center {cid} in right subtree has "
                                  f"coord {cut.coordinate} < {cut.threshold}")
                )
        return ids_left + ids_right

    covered = walk(tree.root, "")
    k = len(centers)
    if len(covered) != k or set(covered) != set(int(i) for i in centers.ids):
        report.violations.append(
            TreeViolation("", "leaf cover",
                          f"{len(covered)} leaves over {k} centers; "
                          f"missing {sorted(set(int(i) for i in centers.ids) - set(covered))}")
        )
    for cid, point in centers.items():
        if cid in seen and assign(tree, point) != cid:
            report.violations.append(
                TreeViolation(seen[cid], "routing violation",
                              f"center {cid} routed to {assign(tree, point)}")
            )
    return report


# ---------------------------------------------------------------------------
# JSON interchange


def tree_to_dict(tree: ThresholdTree) -> dict:
    def enc(node: TreeNode) -> dict:
        if isinstance(node, Leaf):
            return {"leaf": int(node.center_id)}
        cut: dict = {
            "coord": int(node.cut.coordinate),
            "threshold": float(node.cut.threshold),
            "sign": int(node.cut.sign),
        }
        if node.cut.timestamp is not None:
            cut["timestamp"] = float(node.cut.timestamp)
        return {"cut": cut, "left": enc(node.left), "right": enc(node.right)}

    return enc(tree.root)


def tree_from_dict(doc: dict) -> ThresholdTree:
    def dec(d: dict) -> TreeNode:
        if "leaf" in d:
            return Leaf(int(d["leaf"]))
        c = d["cut"]
        cut = Cut(int(c["coord"]), float(c["threshold"]), int(c.get("sign", 1)),
                  float(c["timestamp"]) if "timestamp" in c else None)
        return Internal(cut, dec(d["left"]), dec(d["right"]))

    return ThresholdTree(dec(doc))


def instance_to_dict(inst: Instance) -> dict:
    return {
        "p": float(inst.p),
        "d": int(inst.centers.dim),
        "points": inst.points.tolist(),
        "centers": inst.centers.coords.tolist(),
    }


def instance_from_dict(doc: dict) -> Instance:
    d = int(doc["d"])
    points = np.asarray(doc["points"], dtype=np.float64)
    if points.size == 0:
        points = points.reshape(0, d)
    centers = CenterSet(np.asarray(doc["centers"], dtype=np.float64))
    if points.shape[1] != d or centers.dim != d:
        raise DimensionMismatch("instance dimension disagrees with 'd'")
    return Instance(points, centers, float(doc["p"]))
