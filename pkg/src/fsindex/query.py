"""Position-wise query functions and their per-cluster lower bounds.

A query is an additive function over fragment positions: ``f(x) = sum_i
f_i(x_i)`` with one integer table per position.  Distance-from-a-point
queries and position-specific score tables are both expressed this way.
Searches run against a normalized form whose per-position minimum is
zero, which keeps prefix partial sums monotone and early rejection
sound even for tables with negative entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .alphabet import Alphabet, DistanceMatrix, PartitionScheme, ScoreMatrix, weight


@dataclass(frozen=True)
class QueryFunction:
    """Additive position-wise query: one value per (position, letter)."""

    alphabet: Alphabet
    tables: np.ndarray  # (m, |alphabet|) int64, cost orientation (lower is better)
    provenance: str = "pssm"

    def __post_init__(self):
        t = np.asarray(self.tables, dtype=np.int64)
        if t.ndim != 2 or t.shape[1] != len(self.alphabet):
            raise ValueError(
                f"query table shape {t.shape} incompatible with alphabet size "
                f"{len(self.alphabet)}"
            )
        t.flags.writeable = False
        object.__setattr__(self, "tables", t)

    @property
    def m(self) -> int:
        return self.tables.shape[0]

    def evaluate(self, fragment: str) -> int:
        if len(fragment) != self.m:
            raise ValueError(f"fragment length {len(fragment)} != query length {self.m}")
        codes = self.alphabet.encode(fragment)
        return int(self.tables[np.arange(self.m), codes].sum())

    def evaluate_codes(self, codes: np.ndarray) -> np.ndarray:
        """Values for a batch of code rows, shape (k, m) -> (k,)."""
        return self.tables[np.arange(self.m), codes].sum(axis=1)


@dataclass(frozen=True)
class NormalizedQuery:
    """A query shifted so every position table has minimum zero.

    ``base(x) + shift == original(x)`` for every fragment ``x``; any
    radius converts the same way, so answer sets are unchanged.
    """

    base: QueryFunction
    shift: int

    @property
    def m(self) -> int:
        return self.base.m

    @property
    def alphabet(self) -> Alphabet:
        return self.base.alphabet


def distance_query(d: DistanceMatrix, omega: str) -> QueryFunction:
    """Query retrieving fragments by distance from ``omega``: f_i(a) = D(omega_i, a)."""
    codes = d.alphabet.encode(omega)
    return QueryFunction(d.alphabet, d.values[codes], provenance="distance")


def pssm_query(columns, alphabet: Alphabet) -> QueryFunction:
    """Query from a position-specific table in cost orientation (lower = better)."""
    return QueryFunction(alphabet, np.asarray(columns), provenance="pssm")


def pssm_from_scores(columns, alphabet: Alphabet) -> QueryFunction:
    """Convert a score-oriented position-specific table (higher = better)."""
    return QueryFunction(alphabet, -np.asarray(columns), provenance="pssm")


def parse_pssm(text: str, alphabet: Alphabet, orientation: str = "cost") -> QueryFunction:
    """Parse a position-specific table: a letter header row, then one
    whitespace-separated integer row per query position."""
    rows = [
        line.split()
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if len(rows) < 2:
        raise ValueError("position-specific table needs a header and at least one row")
    header = rows[0]
    if sorted(header) != sorted(alphabet.letters):
        raise ValueError("table header must list each alphabet letter exactly once")
    cols = [header.index(c) for c in alphabet.letters]
    try:
        body = np.array([[int(v) for v in row] for row in rows[1:]], dtype=np.int64)
    except ValueError:
        raise ValueError("non-integer entry in position-specific table") from None
    if body.shape[1] != len(header):
        raise ValueError("table row width does not match header")
    body = body[:, cols]
    if orientation == "cost":
        return pssm_query(body, alphabet)
    if orientation == "score":
        return pssm_from_scores(body, alphabet)
    raise ValueError(f"unknown orientation {orientation!r}")


def similarity_threshold_to_radius(s: ScoreMatrix, omega: str, threshold: int) -> int:
    """Distance radius equivalent to a similarity cutoff.

    Retrieving ``{x : s(omega, x) >= t}`` equals the radius
    ``weight(omega) - t`` ball of the derived distance query.
    """
    return weight(s, omega) - threshold


def normalize(f: QueryFunction) -> NormalizedQuery:
    """Subtract each position's minimum so tables are non-negative."""
    mins = f.tables.min(axis=1)
    base = QueryFunction(f.alphabet, f.tables - mins[:, None], provenance=f.provenance)
    return NormalizedQuery(base=base, shift=int(mins.sum()))


@dataclass(frozen=True)
class LowerBoundTable:
    """Per-position cluster minima of a normalized query, and the root bin.

    ``bounds[i][r]`` is the least value of position ``i``'s table over
    cluster ``r``.  ``root_digits`` picks the argmin cluster per position
    (ties to the lowest rank), so the root bin minimizes the bin lower
    bound globally.  ``second_min[i]`` is the least bound among the
    non-root clusters (the traversal's per-position short circuit) and
    ``rank_offsets[i][r]`` the bin-rank delta of substituting cluster
    ``r`` at position ``i`` into the root.
    """

    scheme: PartitionScheme
    bounds: tuple[np.ndarray, ...]
    root_digits: tuple[int, ...]
    second_min: tuple[int, ...]
    rank_offsets: tuple[np.ndarray, ...]

    @property
    def root_rank(self) -> int:
        return self.scheme.rank(self.root_digits)

    def bound_of(self, digits) -> int:
        """Lower bound for the query over the bin with the given digits."""
        return int(sum(self.bounds[i][r] for i, r in enumerate(digits)))


def lower_bound_table(
    q: NormalizedQuery, scheme: PartitionScheme, depth: int | None = None
) -> LowerBoundTable:
    """Cluster minima over the first ``depth`` positions (all, by default).

    A query longer than the scheme is bounded on the scheme's positions
    only; a shorter query restricts the table to its own length.
    """
    if depth is None:
        if q.m != scheme.m:
            raise ValueError(f"query length {q.m} != scheme length {scheme.m}")
        depth = scheme.m
    if not 1 <= depth <= min(q.m, scheme.m):
        raise ValueError(f"depth {depth} out of range for query {q.m} / scheme {scheme.m}")
    if q.alphabet != scheme.alphabet:
        raise ValueError("query and scheme alphabets differ")
    bounds: list[np.ndarray] = []
    root: list[int] = []
    second: list[int] = []
    offsets: list[np.ndarray] = []
    for i in range(depth):
        table = q.base.tables[i]
        per_cluster = np.array(
            [min(table[scheme.alphabet.ordinal(a)] for a in cluster)
             for cluster in scheme.clusters[i]],
            dtype=np.int64,
        )
        z = int(np.argmin(per_cluster))  # argmin ties break to the lowest rank
        others = np.delete(per_cluster, z)
        w = int(scheme.radix_weights[i])
        per_cluster.flags.writeable = False
        bounds.append(per_cluster)
        root.append(z)
        second.append(int(others.min()))
        delta = (np.arange(len(per_cluster), dtype=np.int64) - z) * w
        delta.flags.writeable = False
        offsets.append(delta)
    return LowerBoundTable(
        scheme=scheme,
        bounds=tuple(bounds),
        root_digits=tuple(root),
        second_min=tuple(second),
        rank_offsets=tuple(offsets),
    )
