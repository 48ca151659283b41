"""Sequence ingestion: FASTA parsing, window extraction, query sampling.

Windows containing any letter outside the working alphabet (ambiguity
codes such as X, B, Z, and anything else non-standard) are rejected; a
single bad letter invalidates exactly the windows covering it.  In
suffix mode every tail of a sequence down to a configurable floor is
kept, addressed by its first ``m`` letters.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .alphabet import Alphabet, STANDARD_ALPHABET


class FastaFormatError(ValueError):
    """Raised for malformed FASTA input."""


class FragmentRef(NamedTuple):
    """One fragment occurrence: sequence ordinal plus start offset."""

    seq_id: int
    offset: int


@dataclass(frozen=True)
class SequenceDB:
    """Parsed sequence records: (identifier, residue string) pairs."""

    records: tuple[tuple[str, str], ...]

    def __post_init__(self):
        seen = set()
        for ident, residues in self.records:
            if ident in seen:
                raise FastaFormatError(f"duplicate sequence identifier {ident!r}")
            seen.add(ident)
            if not residues:
                raise FastaFormatError(f"sequence {ident!r} is empty")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def total_residues(self) -> int:
        return sum(len(r) for _, r in self.records)

    def identifier(self, seq_id: int) -> str:
        return self.records[seq_id][0]

    def residues(self, seq_id: int) -> str:
        return self.records[seq_id][1]


def parse_fasta(source) -> SequenceDB:
    """Parse FASTA text (a string or text stream) into a SequenceDB.

    Header lines start with ``>``; the identifier is the first
    whitespace-delimited token.  Sequence lines are uppercased and
    whitespace-stripped.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    records: list[tuple[str, str]] = []
    ident: str | None = None
    parts: list[str] = []
    for raw in source:
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            if ident is not None:
                records.append((ident, "".join(parts)))
            header = line[1:].strip()
            if not header:
                raise FastaFormatError("empty FASTA header")
            ident = header.split()[0]
            parts = []
        else:
            if ident is None:
                raise FastaFormatError("sequence data before first FASTA header")
            parts.append("".join(line.split()).upper())
    if ident is None:
        raise FastaFormatError("no FASTA records found")
    records.append((ident, "".join(parts)))
    return SequenceDB(records=tuple(records))


@dataclass(frozen=True)
class FragmentDataset:
    """All valid fragment occurrences of a SequenceDB.

    In fixed mode each fragment is a clean width-``m`` window.  In suffix
    mode each fragment is a sequence tail of length >= ``floor`` whose
    first ``min(length, m)`` letters are clean; longer tails may extend
    past ``m`` (used by longer-than-index queries).
    """

    db: SequenceDB
    alphabet: Alphabet
    m: int
    suffix_mode: bool
    floor: int
    sids: np.ndarray  # (n,) uint32 sequence ordinals, extraction order
    offs: np.ndarray  # (n,) uint32 start offsets
    rejected: int
    codes: np.ndarray  # concatenated residue codes; invalid letters = len(alphabet)
    starts: np.ndarray  # (len(db)+1,) int64 offsets into codes

    @property
    def n(self) -> int:
        return int(self.sids.shape[0])

    @property
    def seq_lengths(self) -> np.ndarray:
        return np.diff(self.starts)

    def refs(self) -> list[FragmentRef]:
        return [FragmentRef(int(s), int(o)) for s, o in zip(self.sids, self.offs)]

    def fragment_text(self, seq_id: int, offset: int, length: int | None = None) -> str:
        seq = self.db.residues(seq_id)
        end = len(seq) if length is None else offset + length
        return seq[offset:min(end, len(seq))]

    def key_lengths(self) -> np.ndarray:
        """Per fragment: min(suffix length, m); always m in fixed mode."""
        if not self.suffix_mode:
            return np.full(self.n, self.m, dtype=np.int64)
        lens = self.seq_lengths[self.sids] - self.offs
        return np.minimum(lens, self.m).astype(np.int64)

    def letter_matrix(self) -> np.ndarray:
        """(n, m) codes in extraction order; positions past a short suffix
        hold the pad code len(alphabet)."""
        pad = len(self.alphabet)
        n, m = self.n, self.m
        out = np.full((n, m), pad, dtype=np.uint8)
        if n == 0:
            return out
        base = self.starts[self.sids] + self.offs
        klen = self.key_lengths()
        for j in range(m):
            live = klen > j
            out[live, j] = self.codes[base[live] + j]
        return out


def encode_db(db: SequenceDB, alphabet: Alphabet) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate residue codes; letters outside the alphabet map to
    the invalid code len(alphabet)."""
    lut = np.full(256, len(alphabet), dtype=np.uint8)
    for i, c in enumerate(alphabet.letters):
        lut[ord(c)] = i
    blobs = [np.frombuffer(res.encode("latin-1"), dtype=np.uint8) for _, res in db.records]
    starts = np.zeros(len(db) + 1, dtype=np.int64)
    np.cumsum([b.size for b in blobs], out=starts[1:])
    codes = lut[np.concatenate(blobs)] if blobs else np.zeros(0, dtype=np.uint8)
    return codes, starts


def extract_fragments(
    db: SequenceDB,
    m: int,
    alphabet: Alphabet = STANDARD_ALPHABET,
    suffix_mode: bool = False,
    floor: int = 1,
) -> FragmentDataset:
    """Slide a width-``m`` window (step 1) over every sequence.

    Fixed mode keeps windows whose ``m`` letters are all in the alphabet.
    Suffix mode keeps every tail of length >= ``floor`` whose first
    ``min(length, m)`` letters are valid, so short tails participate too.
    """
    if m < 1:
        raise ValueError("fragment length must be >= 1")
    if suffix_mode and not 1 <= floor <= m:
        raise ValueError("suffix floor must be in 1..m")
    codes, starts = encode_db(db, alphabet)
    bad = codes >= len(alphabet)
    # bad_cum[i] = number of invalid letters among codes[:i]
    bad_cum = np.zeros(codes.size + 1, dtype=np.int64)
    np.cumsum(bad, out=bad_cum[1:])

    sid_parts: list[np.ndarray] = []
    off_parts: list[np.ndarray] = []
    possible = 0
    min_len = floor if suffix_mode else m
    for sid in range(len(db)):
        lo, hi = int(starts[sid]), int(starts[sid + 1])
        length = hi - lo
        if length < min_len:
            continue
        last = length - min_len  # last admissible start offset
        offs = np.arange(0, last + 1, dtype=np.int64)
        possible += offs.size
        width = np.minimum(m, length - offs)
        clean = bad_cum[lo + offs + width] - bad_cum[lo + offs] == 0
        offs = offs[clean]
        sid_parts.append(np.full(offs.size, sid, dtype=np.uint32))
        off_parts.append(offs.astype(np.uint32))
    if sid_parts:
        sids = np.concatenate(sid_parts)
        offs = np.concatenate(off_parts)
    else:
        sids = np.zeros(0, dtype=np.uint32)
        offs = np.zeros(0, dtype=np.uint32)
    sids.flags.writeable = False
    offs.flags.writeable = False
    return FragmentDataset(
        db=db,
        alphabet=alphabet,
        m=m,
        suffix_mode=suffix_mode,
        floor=floor if suffix_mode else m,
        sids=sids,
        offs=offs,
        rejected=possible - sids.size,
        codes=codes,
        starts=starts,
    )


def dataset_manifest(ds: FragmentDataset) -> dict:
    return {
        "records": len(ds.db),
        "residues": ds.db.total_residues,
        "fragments": ds.n,
        "rejected": ds.rejected,
        "fragment_length": ds.m,
        "suffix_mode": ds.suffix_mode,
    }


def _lattice_cumulative(frequencies: np.ndarray) -> np.ndarray:
    total = float(frequencies.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"frequencies sum to {total}, expected 1 within 1e-9")
    if (frequencies < 0).any():
        raise ValueError("frequencies must be non-negative")
    # integer lattice keeps sampling exact and platform-independent
    cum = np.round(np.cumsum(frequencies) * (1 << 53)).astype(np.int64)
    cum[-1] = 1 << 53
    return cum


def sample_queries(
    m: int,
    count: int,
    seed: int,
    alphabet: Alphabet = STANDARD_ALPHABET,
    frequencies: Iterable[float] | None = None,
    db: SequenceDB | None = None,
) -> list[str]:
    """Deterministically sample query fragments.

    With ``db`` given, takes non-overlapping clean windows from its
    sequences (held-out-window mode) and errors if fewer than ``count``
    exist.  Otherwise draws letters i.i.d. from ``frequencies`` (uniform
    when omitted).
    """
    if count < 1:
        raise ValueError("query count must be >= 1")
    rng = np.random.default_rng(seed)
    if db is not None:
        pool: list[str] = []
        for _, residues in db.records:
            for start in range(0, len(residues) - m + 1, m):
                window = residues[start:start + m]
                if all(c in alphabet for c in window):
                    pool.append(window)
        if count > len(pool):
            raise ValueError(
                f"requested {count} held-out windows but only {len(pool)} available"
            )
        picks = rng.choice(len(pool), size=count, replace=False)
        return [pool[i] for i in picks]

    if frequencies is None:
        freq = np.full(len(alphabet), 1.0 / len(alphabet))
    else:
        freq = np.asarray(list(frequencies), dtype=float)
        if freq.shape != (len(alphabet),):
            raise ValueError("need one frequency per alphabet letter")
    cum = _lattice_cumulative(freq)
    draws = rng.integers(0, 1 << 53, size=(count, m), dtype=np.int64)
    codes = np.searchsorted(cum, draws, side="right")
    return [alphabet.decode(row) for row in codes]
