"""Static threshold-tree construction.

One partition call fixes an anchor (the coordinate-wise lower median of
its centers), then repeatedly samples random axis cuts and applies each
cut that splits the current main part (the cell still containing the
anchor).  The threshold offset theta is drawn with theta^p uniform on
[0, R^p], where R is the main part's lp radius around the anchor, so
thresholds concentrate near the boundary of the cell.  The call stops as
soon as the main part holds at most half of the call's centers; the
whole tree is built by recursing on every multi-center part.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import CenterSet, Cut, Internal, Leaf, ThresholdTree, XkmediansError
from .rng import RngHandle

__all__ = [
    "AnchorInfo",
    "PartialPartition",
    "get_anchor",
    "radius",
    "sample_cut",
    "partition_leaf_static",
    "build_tree_static",
]

# Candidate cuts are drawn in blocks; unused tail draws of a block are
# discarded, which leaves each applied cut's law unchanged (i.i.d. draws).
_BLOCK = 64


@dataclass(frozen=True)
class AnchorInfo:
    anchor: np.ndarray
    source_size: int


def get_anchor(centers: CenterSet) -> AnchorInfo:
    """Coordinate-wise lower median (order statistic floor((n-1)/2))."""
    coords = centers.coords
    n = len(centers)
    j = (n - 1) // 2
    anchor = np.partition(coords, j, axis=0)[j].copy()
    # Quarter guarantee, ties counted on both sides.
    need = -(-n // 4)
    ge = (coords >= anchor[None, :]).sum(axis=0)
    le = (coords <= anchor[None, :]).sum(axis=0)
    if (ge < need).any() or (le < need).any():
        raise XkmediansError("median anchor lost the quarter-per-side property")
    return AnchorInfo(anchor, n)


def radius(c_main: CenterSet, anchor: np.ndarray, p: float) -> float:
    """Max lp distance from the anchor to any main-part center."""
    if len(c_main) == 0:
        raise XkmediansError("radius of an empty main part")
    return _radius_coords(c_main.coords, anchor, p)


def _radius_coords(coords: np.ndarray, anchor: np.ndarray, p: float) -> float:
    return float(
        ((np.abs(coords - anchor[None, :]) ** p).sum(axis=1) ** (1.0 / p)).max()
    )


def sample_cut(anchor: np.ndarray, R: float, p: float, rng: RngHandle) -> Cut:
    """One candidate cut: uniform axis and sign, offset with theta^p ~ U[0, R^p]."""
    if not R > 0:
        raise XkmediansError(f"cut sampling needs R > 0, got {R}")
    d = anchor.shape[0]
    i = int(rng.integers(0, d))
    sign = 1 if rng.integers(0, 2) else -1
    theta = 0.0
    while theta == 0.0:  # zero-measure guard, keeps the anchor strictly main-side
        theta = float(rng.uniform(0.0, R**p)) ** (1.0 / p)
    return Cut(i, float(anchor[i] + sign * theta), sign)


@dataclass
class PartialPartition:
    """Output of one partition call: applied cuts and the id split."""

    anchor: np.ndarray
    chain: list[tuple[Cut, np.ndarray]] = field(default_factory=list)  # (cut, off ids)
    main_ids: np.ndarray = None  # type: ignore[assignment]
    # (samples drawn, radius) per radius regime, for decay diagnostics.
    radius_trace: list[tuple[int, float]] = field(default_factory=list)

    def parts(self) -> list[np.ndarray]:
        return [ids for _, ids in self.chain] + [self.main_ids]


def partition_leaf_static(
    c_u: CenterSet, p: float, rng: RngHandle, trace: bool = False
) -> PartialPartition:
    """One partition call on c_u; stops once 2*|main| <= |c_u|."""
    n = len(c_u)
    if n < 2:
        raise XkmediansError("partition needs at least two centers")
    anchor = get_anchor(c_u).anchor
    d = anchor.shape[0]
    ids = c_u.ids
    coords = c_u.coords
    main = np.arange(n)
    out = PartialPartition(anchor=anchor)
    gen = rng.generator

    while 2 * main.size > n:
        mc = coords[main]
        R = _radius_coords(mc, anchor, p)
        assert R > 0.0, "distinct centers force a positive radius"
        Rp = R**p
        drawn = 0
        while True:
            feats = gen.integers(0, d, _BLOCK)
            signs = gen.integers(0, 2, _BLOCK) * 2 - 1
            thetas = gen.uniform(0.0, Rp, _BLOCK) ** (1.0 / p)
            thresholds = anchor[feats] + signs * thetas
            # theta == 0 would put the anchor on the cut's right boundary;
            # mark those candidates unsplittable (probability-zero draws).
            thresholds[thetas == 0.0] = np.inf
            j = kernels.first_separating(mc, feats, thresholds)
            if j >= 0:
                drawn += j + 1
                break
            drawn += _BLOCK
        if trace:
            out.radius_trace.append((drawn, R))
        feat, sign, threshold = int(feats[j]), int(signs[j]), float(thresholds[j])
        left = coords[main, feat] < threshold
        off_local = ~left if sign == 1 else left
        off = main[off_local]
        assert 0 < off.size < main.size
        out.chain.append((Cut(feat, threshold, sign), ids[off]))
        main = main[~off_local]

    out.main_ids = ids[main]
    return out


def build_tree_static(c: CenterSet, p: float, rng: RngHandle) -> ThresholdTree:
    """Recursive construction: partition, then recurse on multi-center parts.

    Each recursive call draws from an rng substream keyed by its child
    index path, so sibling subtrees are reproducible independently.
    """

    def build(sub: CenterSet, handle: RngHandle):
        if len(sub) == 1:
            return Leaf(int(sub.ids[0]))
        part = partition_leaf_static(sub, p, handle)
        parts = part.parts()
        children = [
            Leaf(int(pids[0])) if pids.size == 1 else build(sub.subset(pids), handle.child(idx))
            for idx, pids in enumerate(parts)
        ]
        node = children[-1]  # main part is the deepest cell
        for (cut, _), child in zip(reversed(part.chain), reversed(children[:-1])):
            if cut.sign == 1:
                node = Internal(cut, node, child)  # anchor side: left
            else:
                node = Internal(cut, child, node)  # anchor side: right
        return node

    return ThresholdTree(build(c, rng.child(0)))
