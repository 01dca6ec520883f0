"""Fully dynamic threshold-tree maintenance over center insertions/deletions.

Each partition level keeps the state its last rebuild produced: the
anchor, the stopping time rho_u (timestamp of the last accepted cut),
the time-ordered list of cuts in use, and the lazy cut-stream index that
realized them.  A rebuild walks the level's cut stream in timestamp
order, accepting every cut that splits the current main part, until the
main part holds at most half of the level's centers.

An insert asks the level's index for the earliest cut separating the new
center from the anchor.  Three cases follow from its timestamp rho:
it equals a used cut's timestamp (descend into that cut's side), it
exceeds rho_u (the center stays in the main part; descend there), or it
is a fresh timestamp at most rho_u (splice the cut into the level with a
new one-center leaf).  A delete removes a singleton part together with
the cut that created it, or descends.  Every level counts updates since
its rebuild and rebuilds itself once they exceed a quarter of its
rebuild size, which keeps the frozen anchors approximate medians.

Because every decision is a deterministic function of the realized cut
streams, rerunning the construction from the recorded per-level state
(`replay_flatten`) reproduces the maintained tree exactly; that replay
is the coupling check between the dynamic and static algorithms.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import (
    CenterSet,
    Cut,
    DuplicateCenter,
    Internal,
    Leaf,
    ThresholdTree,
    TreeNode,
    UnknownCenter,
    XkmediansError,
    as_point,
)
from .cut_stream import EarliestCutIndex
from .rng import RngHandle

__all__ = [
    "DynamicTree",
    "InsertRequest",
    "DeleteRequest",
    "Request",
    "RequestResult",
    "ReplayMismatch",
    "replay_flatten",
]


class ReplayMismatch(XkmediansError):
    """Shared-tape replay produced a different structure than maintained."""


@dataclass(frozen=True)
class InsertRequest:
    coords: tuple

    @property
    def op(self) -> str:
        return "insert"


@dataclass(frozen=True)
class DeleteRequest:
    center_id: int

    @property
    def op(self) -> str:
        return "delete"


Request = Union[InsertRequest, DeleteRequest]


@dataclass(frozen=True)
class RequestResult:
    tree: Optional[ThresholdTree]
    recourse: int
    touched: int
    rebuild_fired: bool
    center_id: Optional[int] = None  # id assigned by an insert


class _Leaf:
    __slots__ = ("center_id",)
    n = 1

    def __init__(self, center_id: int):
        self.center_id = center_id


class _Link:
    """One used cut and the subtree of centers it separated off."""

    __slots__ = ("coordinate", "sign", "offset", "time", "threshold", "child")

    def __init__(self, coordinate, sign, offset, time, threshold, child):
        self.coordinate = coordinate
        self.sign = sign
        self.offset = offset
        self.time = time
        self.threshold = threshold
        self.child = child


class _Call:
    """State of one partition level since its last rebuild."""

    __slots__ = ("anchor", "rho_u", "k_u", "cnt", "index", "links", "main", "n",
                 "promoted")

    def __init__(self, anchor, rho_u, k_u, index, links, main, n):
        self.anchor = anchor
        self.rho_u = rho_u  # stopping time; 0.0 when no cut was accepted
        self.k_u = k_u      # center count at the last rebuild
        self.cnt = 0        # updates since the last rebuild
        self.index = index
        self.links = links  # ascending in .time
        self.main = main
        self.n = n          # current center count under this level
        # True once a delete removed the deepest cut and promoted its part
        # to the main slot: the removed cut's stream event then no longer
        # splits this level, and inserts must check for such orphans.
        self.promoted = False


_Node = Union[_Leaf, _Call]


def _flat_size(node: _Node) -> int:
    """Number of nodes this subtree contributes to the flattened tree."""
    if isinstance(node, _Leaf):
        return 1
    return sum(1 + _flat_size(link.child) for link in node.links) + _flat_size(node.main)


def _flatten(node: _Node) -> TreeNode:
    if isinstance(node, _Leaf):
        return Leaf(int(node.center_id))
    sub = _flatten(node.main)
    for link in reversed(node.links):
        child = _flatten(link.child)
        cut = Cut(link.coordinate, link.threshold, link.sign, link.time)
        sub = Internal(cut, sub, child) if link.sign == 1 else Internal(cut, child, sub)
    return sub


def _collect_ids(node: _Node, out: list[int]) -> None:
    if isinstance(node, _Leaf):
        out.append(node.center_id)
        return
    for link in node.links:
        _collect_ids(link.child, out)
    _collect_ids(node.main, out)


def _earliest_separating(index: EarliestCutIndex, main_coords: np.ndarray):
    """Earliest stream event splitting the main part, or None.

    While a partition level is active the separating offsets on every
    substream form the prefix interval (0, max offset], so one prefix
    query per substream suffices.
    """
    anchor = index.anchor
    best = None
    for i in range(index.d):
        col = main_coords[:, i]
        hi = float(col.max() - anchor[i])
        if hi > 0.0:
            off, ts = index.query_substream(i, 1, hi)
            key = (ts, i, 1, off)
            if best is None or key < best:
                best = key
        lo = float(anchor[i] - col.min())
        if lo > 0.0:
            off, ts = index.query_substream(i, -1, lo)
            key = (ts, i, -1, off)
            if best is None or key < best:
                best = key
    return best  # (time, coordinate, sign, offset)


@dataclass
class _Acc:
    recourse: int = 0
    touched: int = 0
    rebuild_fired: bool = False
    levels: list[int] = field(default_factory=list)  # recourse per visited level


class DynamicTree:
    """Maintains an explainable clustering tree under center updates.

    Centers live in the fixed box [-halfwidth, halfwidth]^d declared at
    construction; the cut streams are normalized to that box (offset
    law theta^p uniform on [0, (2*halfwidth)^p]).  Ids are assigned
    monotonically at insert and never reused.
    """

    def __init__(self, d: int, p: float, seed: int, box_halfwidth: float = 1.0,
                 normalizer: Optional[float] = None):
        if d < 1:
            raise XkmediansError("dimension must be >= 1")
        if p < 1.0:
            raise XkmediansError("p must be >= 1")
        self.d = int(d)
        self.p = float(p)
        self.box_halfwidth = float(box_halfwidth)
        self.normalizer = (
            float(normalizer) if normalizer is not None
            else (2.0 * self.box_halfwidth) ** self.p
        )
        self._rng = RngHandle(seed)
        self._rebuild_seq = 0
        self.root: Optional[_Node] = None
        self._points: dict[int, np.ndarray] = {}
        self._by_coords: dict[bytes, int] = {}
        self._next_id = 0
        self.ledger: list[dict] = []

    # ------------------------------------------------------------------
    # public surface

    def __len__(self) -> int:
        return len(self._points)

    def center_set(self) -> Optional[CenterSet]:
        if not self._points:
            return None
        ids = sorted(self._points)
        return CenterSet(np.stack([self._points[i] for i in ids]),
                         np.asarray(ids, dtype=np.int64))

    def flatten(self) -> Optional[ThresholdTree]:
        return ThresholdTree(_flatten(self.root)) if self.root is not None else None

    def insert(self, coords) -> RequestResult:
        pt = as_point(coords)
        if pt.shape[0] != self.d:
            raise XkmediansError(f"expected dimension {self.d}, got {pt.shape[0]}")
        if np.any(np.abs(pt) > self.box_halfwidth):
            raise XkmediansError(
                f"center outside the declared box [-{self.box_halfwidth}, "
                f"{self.box_halfwidth}]^{self.d}")
        key = pt.tobytes()
        if key in self._by_coords:
            raise DuplicateCenter("a center with identical coordinates exists")
        cid = self._next_id
        self._next_id += 1
        self._points[cid] = pt
        self._by_coords[key] = cid
        acc = _Acc()
        if self.root is None:
            self.root = self._rebuild_subtree(None, [cid], acc)
        else:
            self.root = self._insert_center(self.root, cid, pt, acc)
        return RequestResult(self.flatten(), acc.recourse, acc.touched,
                             acc.rebuild_fired, cid)

    def delete(self, center_id: int) -> RequestResult:
        cid = int(center_id)
        if cid not in self._points:
            raise UnknownCenter(f"no center with id {cid}")
        pt = self._points.pop(cid)
        del self._by_coords[pt.tobytes()]
        acc = _Acc()
        self.root = self._delete_center(self.root, cid, pt, acc)
        return RequestResult(self.flatten(), acc.recourse, acc.touched,
                             acc.rebuild_fired)

    def rebuild(self) -> RequestResult:
        """Rebuild the whole tree from the current centers with fresh
        cut streams (the same construction a counter overflow triggers)."""
        acc = _Acc()
        if self._points:
            self.root = self._rebuild_subtree(self.root, sorted(self._points),
                                              acc)
        return RequestResult(self.flatten(), acc.recourse, acc.touched,
                             acc.rebuild_fired)

    def process_request(self, request: Request) -> RequestResult:
        import time as _time

        t0 = _time.perf_counter_ns()
        if isinstance(request, InsertRequest):
            result = self.insert(np.asarray(request.coords, dtype=np.float64))
        else:
            result = self.delete(request.center_id)
        wall = _time.perf_counter_ns() - t0
        self.ledger.append({
            "request_index": len(self.ledger),
            "op": request.op,
            "recourse": result.recourse,
            "touched_nodes": result.touched,
            "rebuild_fired": result.rebuild_fired,
            "wall_nanos": wall,
        })
        return result

    # ------------------------------------------------------------------
    # rebuild

    def _rebuild_subtree(self, old: Optional[_Node], ids: list[int], acc: _Acc
                         ) -> _Node:
        acc.rebuild_fired = True
        if old is not None:
            acc.recourse += _flat_size(old)
        coords = np.stack([self._points[i] for i in ids])
        node = self._rebuild(np.asarray(ids, dtype=np.int64), coords)
        added = 2 * len(ids) - 1
        acc.recourse += added
        acc.touched += added
        return node

    def _rebuild(self, ids: np.ndarray, coords: np.ndarray) -> _Node:
        n = ids.size
        if n == 1:
            return _Leaf(int(ids[0]))
        j = (n - 1) // 2
        anchor = np.partition(coords, j, axis=0)[j].copy()
        index = EarliestCutIndex(anchor, self.p,
                                 self._rng.child(self._rebuild_seq),
                                 self.normalizer)
        self._rebuild_seq += 1
        main = np.arange(n)
        raw_links: list[tuple] = []
        while 2 * main.size > n:
            ev = _earliest_separating(index, coords[main])
            assert ev is not None, "distinct centers always admit a separating cut"
            ts, coord, sign, off = ev
            threshold = float(anchor[coord] + sign * off)
            left = coords[main, coord] < threshold
            off_local = ~left if sign == 1 else left
            off_rows = main[off_local]
            assert 0 < off_rows.size < main.size, "stream event must split the main part"
            raw_links.append((coord, sign, off, ts, threshold, off_rows))
            main = main[~off_local]
        links = [
            _Link(coord, sign, off, ts, threshold,
                  self._rebuild(ids[rows], coords[rows]))
            for coord, sign, off, ts, threshold, rows in raw_links
        ]
        rho_u = raw_links[-1][3]
        return _Call(anchor, rho_u, n, index, links,
                     self._rebuild(ids[main], coords[main]), n)

    # ------------------------------------------------------------------
    # insert

    def _insert_center(self, node: _Node, cid: int, pt: np.ndarray, acc: _Acc
                       ) -> _Node:
        acc.touched += 1
        if isinstance(node, _Leaf):
            # A one-center cell has rebuild size 1, so any update rebuilds it.
            return self._rebuild_subtree(node, [node.center_id, cid], acc)
        node.cnt += 1
        if node.cnt > node.k_u // 4:
            ids: list[int] = []
            _collect_ids(node, ids)
            ids.append(cid)
            return self._rebuild_subtree(node, ids, acc)
        event = node.index.earliest_event(pt)  # None iff pt equals the anchor
        rho = event[0] if event is not None else math.inf
        times = [link.time for link in node.links]
        pos = bisect_left(times, rho)
        acc.touched += max(1, len(node.links)).bit_length()
        node.n += 1
        if pos < len(times) and times[pos] == rho:
            link = node.links[pos]
            assert event is not None and (link.coordinate, link.sign, link.offset
                                          ) == (event[1], event[2], event[3])
            link.child = self._insert_center(link.child, cid, pt, acc)
        elif rho > node.rho_u:
            node.main = self._insert_center(node.main, cid, pt, acc)
        else:
            assert event is not None
            if node.promoted:
                event = self._resolve_orphaned(node, pos, event, pt)
            if event is None:
                node.main = self._insert_center(node.main, cid, pt, acc)
                return node
            ts, coord, sign, off = event
            threshold = float(node.anchor[coord] + sign * off)
            pos = bisect_left([link.time for link in node.links], ts)
            node.links.insert(pos, _Link(coord, sign, off, ts, threshold,
                                         _Leaf(cid)))
            acc.recourse += 2
            acc.touched += 2
        return node

    def _resolve_orphaned(self, node: _Call, pos: int, event, pt: np.ndarray):
        """Placement of an insert whose earliest separating event may be an
        orphan (a cut removed by a main-part promotion).

        Such an event still separates the new center from the anchor but
        no longer splits the level, so the static run would reject it.
        When every center at the event's chain position sits on its
        non-anchor side, rerun this level's partition on the current
        centers plus the new one and return the one accepted event that
        is not a used cut (the true new cut), or None when the new
        center simply stays in the main part.
        """
        ts, coord, sign, off = event
        threshold = float(node.anchor[coord] + sign * off)
        ids: list[int] = []
        for link in node.links[pos:]:
            _collect_ids(link.child, ids)
        _collect_ids(node.main, ids)
        coords = np.stack([self._points[i] for i in ids])
        col = coords[:, coord]
        far = col >= threshold if sign == 1 else col < threshold
        if not far.any():
            return event  # splits as usual: plain splice
        all_ids: list[int] = []
        _collect_ids(node, all_ids)
        coords = np.stack([self._points[i] for i in all_ids] + [pt])
        main = np.arange(coords.shape[0])
        cursor = 0
        while main.size > 1:
            ev = _next_splitting_event(node, coords[main])
            if ev is None:
                break
            if cursor < len(node.links) and node.links[cursor].time == ev[0]:
                cursor += 1
            else:
                assert ev[0] <= node.rho_u
                return ev  # the one cut the static run adds for the new center
            e_ts, e_coord, e_sign, e_off = ev
            thr = float(node.anchor[e_coord] + e_sign * e_off)
            left = coords[main, e_coord] < thr
            off_local = ~left if e_sign == 1 else left
            main = main[~off_local]
        assert cursor == len(node.links), "used cut vanished from the mirror"
        return None

    # ------------------------------------------------------------------
    # delete

    def _delete_center(self, node: Optional[_Node], cid: int, pt: np.ndarray,
                       acc: _Acc) -> Optional[_Node]:
        acc.touched += 1
        if isinstance(node, _Leaf):
            # Only reachable at the tree root (k = 1 -> 0).
            assert node.center_id == cid
            acc.recourse += 1
            return None
        assert isinstance(node, _Call)
        node.cnt += 1
        if node.cnt > node.k_u // 4:
            ids: list[int] = []
            _collect_ids(node, ids)
            ids.remove(cid)
            if not ids:
                acc.rebuild_fired = True
                acc.recourse += _flat_size(node)
                return None
            return self._rebuild_subtree(node, ids, acc)
        # Route to the part holding the center: first used cut separating it.
        part_idx = -1
        for idx, link in enumerate(node.links):
            acc.touched += 1
            v = pt[link.coordinate]
            separated = v >= link.threshold if link.sign == 1 else v < link.threshold
            if separated:
                part_idx = idx
                break
        node.n -= 1
        if part_idx >= 0:
            link = node.links[part_idx]
            if link.child.n == 1:
                acc.recourse += 1 + _flat_size(link.child)
                node.links.pop(part_idx)
            else:
                link.child = self._delete_center(link.child, cid, pt, acc)
        else:
            if node.main.n == 1:
                assert isinstance(node.main, _Leaf) and node.main.center_id == cid
                if node.links:
                    # Remove the main leaf and its parent cut; the last
                    # cut's part becomes the deepest cell of this level.
                    last = node.links.pop()
                    node.main = last.child
                    node.promoted = True
                    acc.recourse += 2
                else:
                    acc.recourse += 1
                    return None
            else:
                node.main = self._delete_center(node.main, cid, pt, acc)
        return node


# ---------------------------------------------------------------------------
# shared-tape replay (the dynamic/static coupling, checked structurally)


def replay_flatten(tree: DynamicTree) -> Optional[ThresholdTree]:
    """Rebuild the flattened tree from each level's recorded state.

    Runs the static partition procedure on the *current* centers using
    the anchors, stopping times and cut streams the dynamic maintenance
    recorded.  The result must equal ``tree.flatten()`` exactly; any
    divergence raises :class:`ReplayMismatch`.
    """
    if tree.root is None:
        return None
    ids: list[int] = []
    _collect_ids(tree.root, ids)
    coords = np.stack([tree._points[i] for i in ids])
    return ThresholdTree(
        _replay_node(tree.root, np.asarray(ids, dtype=np.int64), coords)
    )


def _next_splitting_event(call: _Call, main_coords: np.ndarray):
    """Earliest recorded-tape event splitting the given main part.

    Per substream the splitting offsets form the window
    (max(0, min signed offset), max signed offset]; scanning the
    realized atoms in those windows either pins the earliest splitting
    event, proves every window is clean past the stopping time, or
    leaves the order underdetermined (which a correctly maintained tree
    never does).  Returns (time, coordinate, sign, offset) or None when
    nothing at most rho_u can split.
    """
    index = call.index
    anchor = index.anchor
    best = None
    min_clean = math.inf
    for i in range(index.d):
        signed = main_coords[:, i] - anchor[i]
        for sign in (1, -1):
            offs = signed if sign == 1 else -signed
            hi = float(offs.max())
            lo = max(0.0, float(offs.min()))
            if hi <= lo:
                continue  # no threshold on this side splits the main part
            ev, clean = index.substreams[(i, sign)].window_scan(lo, hi,
                                                                index._gen)
            min_clean = min(min_clean, clean)
            if ev is not None:
                key = (ev[1], i, sign, ev[0])
                if best is None or key < best:
                    best = key
    if best is not None and best[0] <= call.rho_u and best[0] <= min_clean:
        return best
    if (best is None or best[0] > call.rho_u) and min_clean >= call.rho_u:
        return None
    raise ReplayMismatch("recorded tape leaves the next cut underdetermined")


def _replay_node(node: _Node, ids: np.ndarray, coords: np.ndarray) -> TreeNode:
    if ids.size == 1:
        return Leaf(int(ids[0]))
    if isinstance(node, _Leaf):
        raise ReplayMismatch(f"{ids.size} centers at a recorded leaf")
    main = np.arange(ids.size)
    accepted: list[tuple[tuple, np.ndarray]] = []
    while main.size > 1:
        ev = _next_splitting_event(node, coords[main])
        if ev is None:
            break
        ts, coord, sign, off = ev
        threshold = float(node.anchor[coord] + sign * off)
        left = coords[main, coord] < threshold
        off_local = ~left if sign == 1 else left
        off_rows = main[off_local]
        if not 0 < off_rows.size < main.size:
            raise ReplayMismatch("replayed event fails to split the main part")
        accepted.append(((ts, coord, sign, off, threshold), off_rows))
        main = main[~off_local]
    if len(accepted) != len(node.links):
        raise ReplayMismatch(
            f"replay accepted {len(accepted)} cuts, level holds {len(node.links)}")
    sub_main = _replay_node(node.main, ids[main], coords[main])
    folded = sub_main
    for ((ts, coord, sign, off, threshold), off_rows), link in zip(
            reversed(accepted), reversed(node.links)):
        if (ts, coord, sign, off) != (link.time, link.coordinate, link.sign,
                                      link.offset):
            raise ReplayMismatch("replayed cut differs from the recorded one")
        child = _replay_node(link.child, ids[off_rows], coords[off_rows])
        cut = Cut(coord, threshold, sign, ts)
        folded = Internal(cut, folded, child) if sign == 1 else Internal(cut, child, folded)
    return folded
