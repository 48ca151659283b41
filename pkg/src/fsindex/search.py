"""Range and k-nearest-neighbour search over the fragment index.

The implicit search tree is never materialized: the root is the bin
whose per-position cluster lower bounds are minimal, and each child
substitutes one cluster at one position, at strictly increasing
positions along any path, so every bin is reached exactly once.  A node
is pruned when its bound exceeds the radius; accepted bins are scanned
with shared-prefix (lcp) reuse and early rejection of partial sums.

Two traversals implement the same visit set: a vectorized breadth-first
sweep used for fixed-radius queries, and the literal depth-first
recursion (shallowest subtrees first) used for k-NN, where the radius
shrinks as the hit heap evolves, and for traced searches.

Scan counters (bins/fragments/residues scanned) follow the reference
scan's cost model exactly; the vectorized implementation may touch more
cells internally but reports what the sequential algorithm would do.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .core import FSIndex
from .ingest import FragmentRef
from .query import LowerBoundTable, NormalizedQuery, lower_bound_table

INF_RADIUS = int(np.iinfo(np.int64).max)


@dataclass
class SearchStats:
    """Work counters for one search."""

    nodes_visited: int = 0
    bins_scanned: int = 0
    fragments_scanned: int = 0
    residues_scanned: int = 0
    hits: int = 0
    elapsed: float = 0.0


@dataclass
class HitList:
    """Search results: (fragment reference, query value) pairs."""

    entries: list[tuple[FragmentRef, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def values(self) -> list[int]:
        return [v for _, v in self.entries]

    def sorted_by_value(self) -> "HitList":
        return HitList(sorted(self.entries, key=lambda e: (e[1], e[0])))

    def as_multiset(self) -> dict:
        out: dict = {}
        for ref, v in self.entries:
            key = (ref.seq_id, ref.offset, v)
            out[key] = out.get(key, 0) + 1
        return out


class Tracer:
    """Records which implicit-tree nodes a search scanned or pruned."""

    def __init__(self):
        self.scanned: list[tuple[tuple[int, ...], int]] = []
        self.pruned: list[tuple[tuple[int, ...], int]] = []

    def scan(self, digits: tuple[int, ...], bound: int) -> None:
        self.scanned.append((digits, bound))

    def prune(self, digits: tuple[int, ...], bound: int) -> None:
        self.pruned.append((digits, bound))

    def scanned_digits(self) -> set[tuple[int, ...]]:
        return {d for d, _ in self.scanned}

    def pruned_digits(self) -> set[tuple[int, ...]]:
        return {d for d, _ in self.pruned}


def _multi_arange(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Concatenation of arange(s, e) for each span, without a Python loop."""
    sizes = (ends - starts).astype(np.int64)
    keep = sizes > 0
    starts, ends, sizes = starts[keep], ends[keep], sizes[keep]
    total = int(sizes.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    out = np.ones(total, dtype=np.int64)
    out[0] = starts[0]
    brk = np.cumsum(sizes)[:-1]
    out[brk] = starts[1:] - ends[:-1] + 1
    return np.cumsum(out)


def _query_table(q: NormalizedQuery, pad_columns: int = 1) -> np.ndarray:
    """(m, |alphabet|+1) lookup with a zero column for the pad code."""
    t = q.base.tables
    return np.hstack([t, np.zeros((t.shape[0], pad_columns), dtype=np.int64)])


class _ScanContext:
    """Precomputed arrays one search needs to scan frag-array spans."""

    def __init__(self, index: FSIndex, q: NormalizedQuery):
        self.index = index
        self.q = q
        self.qtab = _query_table(q)
        self.eval_len = q.m
        self.width = min(q.m, index.m)  # positions resolvable from stored letters
        ds = index.dataset
        self.seq_lens = ds.seq_lengths

    def scan_spans(
        self, starts: np.ndarray, ends: np.ndarray, eps: int, stats: SearchStats
    ) -> tuple[np.ndarray, np.ndarray]:
        """Cost-model scan of frag-index spans at a fixed radius.

        Returns (frag indices, values) of hits and updates the fragment
        and residue counters exactly as the sequential bin scan would.
        """
        index, w, eval_len = self.index, self.width, self.eval_len
        idx = _multi_arange(starts, ends)
        cnt = idx.size
        stats.fragments_scanned += cnt
        if cnt == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)

        lcp_own = np.minimum(index.lcp[idx].astype(np.int64), eval_len)
        lcp_next = np.minimum(index.lcp[idx + 1].astype(np.int64), eval_len)
        step1 = np.maximum(lcp_next - lcp_own, 0)

        rows = index.letters[idx, :w]
        vals = self.qtab[np.arange(w)[None, :], rows]
        cum = np.cumsum(vals, axis=1)
        partial = np.where(lcp_next > 0, np.take_along_axis(
            cum, np.maximum(lcp_next - 1, 0)[:, None], axis=1
        ).ravel(), 0)

        if eval_len <= index.m:
            valid = index.key_len[idx] >= eval_len
            full = cum[:, eval_len - 1]
        else:
            ds = index.dataset
            sids = index.sids[idx].astype(np.int64)
            offs = index.offs[idx].astype(np.int64)
            long_enough = offs + eval_len <= self.seq_lens[sids]
            base = ds.starts[sids] + offs
            ext_pos = base[:, None] + np.arange(index.m, eval_len)[None, :]
            ext_codes = ds.codes[np.minimum(ext_pos, ds.codes.size - 1)]
            ext_codes = np.where(long_enough[:, None], ext_codes, len(index.alphabet))
            clean = (ext_codes < len(index.alphabet)).all(axis=1)
            valid = (index.key_len[idx] >= index.m) & long_enough & clean
            ext_vals = self.qtab[
                np.arange(index.m, eval_len)[None, :], ext_codes
            ]
            full = cum[:, index.m - 1] + ext_vals.sum(axis=1)

        accepted = valid & (partial <= eps)
        stats.residues_scanned += int(step1.sum())
        stats.residues_scanned += int((eval_len - lcp_next)[accepted].sum())
        hit = accepted & (full <= eps)
        return idx[hit], full[hit]

    def scan_arrays(
        self, lo: int, hi: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Per-fragment (step1, partial, full, valid) for one bin, for the
        sequential k-NN walk whose radius changes mid-bin."""
        index, w = self.index, self.width
        lcp_own = np.minimum(index.lcp[lo:hi].astype(np.int64), self.eval_len)
        lcp_next = np.minimum(index.lcp[lo + 1:hi + 1].astype(np.int64), self.eval_len)
        step1 = np.maximum(lcp_next - lcp_own, 0)
        rows = index.letters[lo:hi, :w]
        vals = self.qtab[np.arange(w)[None, :], rows]
        cum = np.cumsum(vals, axis=1)
        partial = np.where(lcp_next > 0, np.take_along_axis(
            cum, np.maximum(lcp_next - 1, 0)[:, None], axis=1
        ).ravel(), 0)
        valid = index.key_len[lo:hi] >= self.eval_len
        return step1, partial, cum[:, self.eval_len - 1], valid


def _candidate_arrays(lbt: LowerBoundTable, depth: int):
    """Non-root cluster bounds and rank deltas per position < depth."""
    cand_f, cand_d = [], []
    for j in range(depth):
        z = lbt.root_digits[j]
        cand_f.append(np.delete(lbt.bounds[j], z))
        cand_d.append(np.delete(lbt.rank_offsets[j], z))
    return cand_f, cand_d


def _collect_bfs(
    lbt: LowerBoundTable, depth: int, eps: int, stats: SearchStats
) -> np.ndarray:
    """Breadth-first enumeration of accepted node ranks at a fixed radius.

    ``depth`` limits substitutions to the first ``depth`` positions; the
    returned ranks are the nodes' low corners (trailing digits zero).
    """
    cand_f, cand_d = _candidate_arrays(lbt, depth)
    sec = lbt.second_min
    root = int(
        sum(lbt.root_digits[i] * int(lbt.scheme.radix_weights[i]) for i in range(depth))
    )
    stats.nodes_visited += 1
    root_bound = int(sum(int(lbt.bounds[i][lbt.root_digits[i]]) for i in range(depth)))
    if root_bound > eps:
        return np.zeros(0, dtype=np.int64)
    accepted = [np.array([root], dtype=np.int64)]
    level_u = np.array([root], dtype=np.int64)
    level_d = np.array([root_bound], dtype=np.int64)
    level_i = np.array([0], dtype=np.int64)
    while level_u.size:
        nxt_u, nxt_d, nxt_i = [], [], []
        for j in range(depth):
            elig = (level_i <= j) & (level_d + sec[j] <= eps)
            if not elig.any():
                continue
            e = level_d[elig, None] + cand_f[j][None, :]
            stats.nodes_visited += e.size
            keep = e <= eps
            if not keep.any():
                continue
            u = (level_u[elig, None] + cand_d[j][None, :])[keep]
            nxt_u.append(u)
            nxt_d.append(e[keep])
            nxt_i.append(np.full(u.size, j + 1, dtype=np.int64))
            accepted.append(u)
        if nxt_u:
            level_u = np.concatenate(nxt_u)
            level_d = np.concatenate(nxt_d)
            level_i = np.concatenate(nxt_i)
        else:
            break
    return np.concatenate(accepted)


def _traverse_recursive(
    lbt: LowerBoundTable,
    depth: int,
    eps_of,
    process,
    stats: SearchStats,
    trace: Tracer | None,
) -> None:
    """Depth-first traversal in the reference order: at each node, try
    substitution positions from the deepest (position depth-1, whose
    subtree is shallowest) down to the node's first free position."""
    sec = lbt.second_min
    bounds = lbt.bounds
    offsets = lbt.rank_offsets
    zdig = lbt.root_digits
    root = int(
        sum(zdig[i] * int(lbt.scheme.radix_weights[i]) for i in range(depth))
    )
    root_bound = int(sum(int(bounds[i][zdig[i]]) for i in range(depth)))
    stats.nodes_visited += 1
    if root_bound > eps_of():
        if trace is not None:
            trace.prune(tuple(zdig[:depth]), root_bound)
        return
    if trace is not None:
        trace.scan(tuple(zdig[:depth]), root_bound)
    process(root)

    def check_node(u: int, d: int, i: int, digits: tuple[int, ...]) -> None:
        for j in range(depth - 1, i - 1, -1):
            if d + sec[j] <= eps_of():
                fj, dj = bounds[j], offsets[j]
                for r in range(len(fj)):
                    if r == zdig[j]:
                        continue
                    e = d + int(fj[r])
                    stats.nodes_visited += 1
                    child = digits[:j] + (r,) + digits[j + 1:] if trace else digits
                    if e <= eps_of():
                        v = u + int(dj[r])
                        if trace is not None:
                            trace.scan(child, e)
                        process(v)
                        check_node(v, e, j + 1, child)
                    elif trace is not None:
                        trace.prune(child, e)
            elif trace is not None:
                fj = bounds[j]
                for r in range(len(fj)):
                    if r != zdig[j]:
                        trace.prune(digits[:j] + (r,) + digits[j + 1:], d + int(fj[r]))

    check_node(root, root_bound, 0, tuple(zdig[:depth]))


def _count_nonempty_bins(index: FSIndex, node_ranks: np.ndarray, span: int) -> int:
    if span == 1:
        return int((index.bins[node_ranks + 1] > index.bins[node_ranks]).sum())
    total = 0
    for u in node_ranks:
        total += int((np.diff(index.bins[u:u + span + 1]) > 0).sum())
    return total


def _check_query(index: FSIndex, q: NormalizedQuery) -> None:
    if q.alphabet != index.alphabet:
        raise ValueError("query and index alphabets differ")


def _finish(
    index: FSIndex, idx: np.ndarray, vals: np.ndarray, stats: SearchStats, t0: float
) -> tuple[HitList, SearchStats]:
    hits = HitList(
        [
            (FragmentRef(int(index.sids[j]), int(index.offs[j])), int(v))
            for j, v in zip(idx, vals)
        ]
    )
    stats.hits = len(hits)
    stats.elapsed = time.perf_counter() - t0
    return hits, stats


def _range_engine(
    index: FSIndex,
    q: NormalizedQuery,
    radius: int,
    depth: int,
    trace: Tracer | None,
) -> tuple[HitList, SearchStats]:
    t0 = time.perf_counter()
    stats = SearchStats()
    lbt = lower_bound_table(q, index.scheme, depth=depth)
    ctx = _ScanContext(index, q)
    span = 1 if depth == index.m else int(index.scheme.radix_weights[depth - 1])

    if trace is None:
        node_ranks = _collect_bfs(lbt, depth, radius, stats)
    else:
        collected: list[int] = []
        _traverse_recursive(lbt, depth, lambda: radius, collected.append, stats, trace)
        node_ranks = np.array(collected, dtype=np.int64)

    if node_ranks.size == 0:
        stats.elapsed = time.perf_counter() - t0
        return HitList(), stats
    stats.bins_scanned += _count_nonempty_bins(index, node_ranks, span)
    starts = index.bins[node_ranks]
    ends = index.bins[node_ranks + span]
    idx, vals = ctx.scan_spans(starts, ends, radius, stats)
    return _finish(index, idx, vals, stats, t0)


def process_bin(
    index: FSIndex, u: int, q: NormalizedQuery, radius: int
) -> tuple[HitList, SearchStats]:
    """Scan a single bin: shared-prefix reuse plus early rejection.

    The cumulative-value array is reused up to each fragment's shared
    prefix with its predecessor; a fragment is abandoned once the partial
    sum at the prefix shared with its successor exceeds the radius.
    """
    _check_query(index, q)
    t0 = time.perf_counter()
    stats = SearchStats()
    ctx = _ScanContext(index, q)
    lo, hi = index.bin_slice(u)
    if lo < hi:
        stats.bins_scanned = 1
    idx, vals = ctx.scan_spans(
        np.array([lo], dtype=np.int64), np.array([hi], dtype=np.int64), radius, stats
    )
    return _finish(index, idx, vals, stats, t0)


def range_search(
    index: FSIndex, q: NormalizedQuery, radius: int, trace: Tracer | None = None
) -> tuple[HitList, SearchStats]:
    """All occurrences whose (normalized) query value is <= ``radius``."""
    _check_query(index, q)
    if q.m != index.m:
        raise ValueError(f"query length {q.m} != index length {index.m}")
    return _range_engine(index, q, radius, index.m, trace)


def long_query_search(
    index: FSIndex, q: NormalizedQuery, radius: int
) -> tuple[HitList, SearchStats]:
    """Range search with a query longer than the index: the traversal
    prunes on the first ``index.m`` positions, the scan evaluates all
    query positions and skips occurrences with no full-length window."""
    _check_query(index, q)
    if q.m < index.m:
        raise ValueError(f"query length {q.m} shorter than index length {index.m}")
    if not index.suffix_mode:
        raise ValueError("longer-than-index queries need a suffix-mode index")
    return _range_engine(index, q, radius, index.m, None)


def short_query_search(
    index: FSIndex, q: NormalizedQuery, radius: int
) -> tuple[HitList, SearchStats]:
    """Range search with a query shorter than the index: the traversal
    stops at the query's depth and each accepted node's whole subtree is
    one contiguous frag-array span (high-order digits are fixed, so
    descendant bins have consecutive ranks)."""
    _check_query(index, q)
    if q.m > index.m:
        raise ValueError(f"query length {q.m} exceeds index length {index.m}")
    if not index.suffix_mode:
        raise ValueError("shorter-than-index queries need a suffix-mode index")
    return _range_engine(index, q, radius, q.m, None)


def knn_search(
    index: FSIndex, q: NormalizedQuery, k: int, all_ties: bool = False
) -> tuple[HitList, SearchStats]:
    """The ``k`` occurrences with smallest query values (branch and bound).

    The radius starts unbounded and shrinks to the largest value held by
    the bounded max-heap once it is full.  Ties at the final radius keep
    first-encountered occurrences; ``all_ties`` instead returns every
    occurrence at the boundary value via a follow-up range search.
    """
    _check_query(index, q)
    if q.m != index.m:
        raise ValueError(f"query length {q.m} != index length {index.m}")
    if k < 1:
        raise ValueError("k must be >= 1")
    t0 = time.perf_counter()
    stats = SearchStats()
    lbt = lower_bound_table(q, index.scheme)
    ctx = _ScanContext(index, q)

    heap: list[tuple[int, int, int, int]] = []  # (-value, -order, sid, off)
    counter = 0

    def eps_of() -> int:
        return -heap[0][0] if len(heap) >= k else INF_RADIUS

    def process(u: int) -> None:
        nonlocal counter
        lo, hi = index.bin_slice(u)
        if lo == hi:
            return
        stats.bins_scanned += 1
        stats.fragments_scanned += hi - lo
        step1, partial, full, valid = ctx.scan_arrays(lo, hi)
        eps = eps_of()
        for t in range(hi - lo):
            stats.residues_scanned += int(step1[t])
            if not valid[t]:
                continue
            if partial[t] <= eps:
                stats.residues_scanned += q.m - min(int(index.lcp[lo + t + 1]), q.m)
                value = int(full[t])
                if value <= eps:
                    counter += 1
                    entry = (-value, -counter, int(index.sids[lo + t]), int(index.offs[lo + t]))
                    if len(heap) < k:
                        heapq.heappush(heap, entry)
                    elif value < -heap[0][0]:
                        heapq.heapreplace(heap, entry)
                    eps = eps_of()

    _traverse_recursive(lbt, index.m, eps_of, process, stats, None)

    if all_ties and heap:
        radius = -heap[0][0] if len(heap) >= k else INF_RADIUS
        hits, _ = range_search(index, q, radius)
        stats.hits = len(hits)
        stats.elapsed = time.perf_counter() - t0
        return hits.sorted_by_value(), stats

    entries = sorted(((-nv, -no, s, o) for nv, no, s, o in heap))
    hits = HitList([(FragmentRef(s, o), v) for v, _, s, o in entries])
    stats.hits = len(hits)
    stats.elapsed = time.perf_counter() - t0
    return hits, stats
