"""The fragment index: bin-bucketed, per-bin sorted fragment references.

Construction is counting sort over bin ranks followed by one stable
lexicographic sort and a shared-prefix (lcp) pass.  Three arrays result:

* ``frag`` - fragment references ordered by (bin rank, fragment letters);
* ``bin``  - N+1 offsets into ``frag``, one per bin rank plus a sentinel;
* ``lcp``  - n+1 shared-prefix lengths between neighbouring fragments,
  forced to 0 at every bin's first slot and after the last fragment, so
  a bin scan never reuses state it did not compute.

The index is immutable after construction and safe to share across
concurrent searches.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .alphabet import Alphabet, PartitionScheme, parse_partition
from .ingest import FragmentDataset, FragmentRef, SequenceDB, encode_db

MAGIC = b"FSIX"
FORMAT_VERSION = 1


class IndexFormatError(ValueError):
    """Raised when an index file is malformed or mismatched."""


def bin_of(scheme: PartitionScheme, fragment: str) -> int:
    """Bin rank of a fragment: the mixed-radix value of its cluster digits."""
    return scheme.rank(scheme.digits(fragment))


def _bin_ranks(scheme: PartitionScheme, letters: np.ndarray) -> np.ndarray:
    """Vectorized bin ranks for an (n, m) letter-code matrix (pad code ranks 0)."""
    table = scheme.digit_table()
    ranks = np.zeros(letters.shape[0], dtype=np.int64)
    for i in range(scheme.m):
        ranks += table[i, letters[:, i]].astype(np.int64) * int(scheme.radix_weights[i])
    return ranks


def _sort_keys(letters: np.ndarray, pad: int) -> np.ndarray:
    """Letter codes shifted so the pad code of short suffixes sorts first."""
    return np.where(letters == pad, 0, letters.astype(np.int16) + 1)


def _raw_lcp(sorted_letters: np.ndarray) -> np.ndarray:
    """Shared-prefix length of each row with its predecessor (row 0 -> 0)."""
    n, m = sorted_letters.shape
    out = np.zeros(n, dtype=np.int64)
    if n > 1:
        eq = sorted_letters[1:] == sorted_letters[:-1]
        out[1:] = np.cumprod(eq, axis=1, dtype=np.int64).sum(axis=1)
    return out


@dataclass(frozen=True)
class FSIndex:
    """Immutable search index over a fragment dataset."""

    dataset: FragmentDataset
    scheme: PartitionScheme
    bins: np.ndarray     # (N+1,) int64 offsets into the frag arrays
    sids: np.ndarray     # (n,) uint32, frag order
    offs: np.ndarray     # (n,) uint32, frag order
    lcp: np.ndarray      # (n+1,) uint8
    letters: np.ndarray  # (n, m) uint8 codes, frag order; pad = |alphabet|
    key_len: np.ndarray  # (n,) int64 = min(fragment length, m)

    @property
    def m(self) -> int:
        return self.scheme.m

    @property
    def n(self) -> int:
        return int(self.sids.shape[0])

    @property
    def n_bins(self) -> int:
        return self.scheme.n_bins

    @property
    def alphabet(self) -> Alphabet:
        return self.dataset.alphabet

    @property
    def suffix_mode(self) -> bool:
        return self.dataset.suffix_mode

    def bin_slice(self, u: int) -> tuple[int, int]:
        return int(self.bins[u]), int(self.bins[u + 1])

    def bin_size(self, u: int) -> int:
        return int(self.bins[u + 1] - self.bins[u])

    def empty_bins(self) -> int:
        return int((np.diff(self.bins) == 0).sum())

    def ref(self, j: int) -> FragmentRef:
        return FragmentRef(int(self.sids[j]), int(self.offs[j]))

    def audit(self) -> None:
        """Verify every structural invariant; raises AssertionError on failure."""
        n, m = self.n, self.m
        bins, lcp = self.bins, self.lcp
        assert bins.shape == (self.n_bins + 1,)
        assert bins[0] == 0 and bins[-1] == n, "bin offsets must span the frag array"
        assert (np.diff(bins) >= 0).all(), "bin offsets must be non-decreasing"
        assert lcp.shape == (n + 1,)
        assert lcp[0] == 0 and lcp[n] == 0
        if n == 0:
            return
        ranks = _bin_ranks(self.scheme, self.letters)
        # each fragment must sit inside the bin of its own rank
        expected = np.repeat(
            np.arange(self.n_bins), np.diff(bins).astype(np.int64)
        )
        assert np.array_equal(ranks, expected), "fragment in the wrong bin"
        keys = _sort_keys(self.letters, len(self.alphabet))
        raw = _raw_lcp(keys)
        capped = np.minimum(raw, np.minimum.reduce(
            [np.r_[self.key_len[:1], self.key_len[:-1]], self.key_len]
        ))
        bin_first = np.zeros(n, dtype=bool)
        starts = bins[:-1][np.diff(bins) > 0]
        bin_first[starts] = True
        # lexicographic order within each bin: rows either share a full
        # prefix and then grow, or differ first at a position where the
        # predecessor's key is smaller
        interior = ~bin_first
        idx = np.flatnonzero(interior)
        if idx.size:
            r = raw[idx]
            full = r >= np.minimum(self.key_len[idx - 1], self.key_len[idx])
            shorter_first = self.key_len[idx - 1] <= self.key_len[idx]
            ok_full = full & shorter_first
            pos = np.minimum(r, m - 1)
            ok_diff = ~full & (keys[idx - 1, pos] < keys[idx, pos])
            assert (ok_full | ok_diff).all(), "bin not in lexicographic order"
        expect_lcp = np.where(bin_first, 0, capped)
        assert np.array_equal(lcp[:n], expect_lcp), "lcp values incorrect"

    # -- serialization ----------------------------------------------------

    def save(self, path) -> int:
        """Write the index file; returns the byte count."""
        header = struct.pack(
            "<4sIIQQB",
            MAGIC,
            FORMAT_VERSION,
            self.m,
            self.n,
            self.n_bins,
            1 if self.suffix_mode else 0,
        )
        alpha = self.alphabet.letters.encode()
        spec = self.scheme.spec_string.encode()
        packed = (self.sids.astype(np.uint64) << np.uint64(32)) | self.offs.astype(
            np.uint64
        )
        blob = b"".join(
            [
                header,
                struct.pack("<I", len(alpha)), alpha,
                struct.pack("<I", len(spec)), spec,
                self.bins.astype("<i8").tobytes(),
                packed.astype("<u8").tobytes(),
                self.lcp.astype("<u1").tobytes(),
            ]
        )
        with open(path, "wb") as fh:
            fh.write(blob)
        return len(blob)


def build(dataset: FragmentDataset, scheme: PartitionScheme) -> FSIndex:
    """Construct the index: count bin sizes, place fragments, sort, lcp."""
    if scheme.alphabet != dataset.alphabet:
        raise ValueError("dataset and scheme alphabets differ")
    if scheme.m != dataset.m:
        raise ValueError(f"scheme length {scheme.m} != dataset length {dataset.m}")
    n, n_bins = dataset.n, scheme.n_bins
    # N int64 counters; refuse absurd schemes before allocating
    if n_bins > 1 << 34:
        raise MemoryError(f"{n_bins} bins exceed the in-memory budget")

    letters = dataset.letter_matrix()
    ranks = _bin_ranks(scheme, letters)
    counts = np.bincount(ranks, minlength=n_bins) if n else np.zeros(n_bins, np.int64)
    bins = np.zeros(n_bins + 1, dtype=np.int64)
    np.cumsum(counts, out=bins[1:])

    keys = _sort_keys(letters, len(dataset.alphabet))
    order = np.lexsort(tuple(keys[:, j] for j in range(scheme.m - 1, -1, -1)) + (ranks,))
    letters = letters[order]
    key_len = dataset.key_lengths()[order]

    lcp = np.zeros(n + 1, dtype=np.uint8)
    if n:
        raw = _raw_lcp(_sort_keys(letters, len(dataset.alphabet)))
        prev_len = np.r_[key_len[:1], key_len[:-1]]
        lcp[:n] = np.minimum(raw, np.minimum(prev_len, key_len))
        lcp[bins[:-1]] = 0  # every bin starts a fresh scan
    for arr in (bins, lcp, letters, key_len):
        arr.flags.writeable = False
    sids = dataset.sids[order]
    offs = dataset.offs[order]
    sids.flags.writeable = False
    offs.flags.writeable = False
    return FSIndex(
        dataset=dataset,
        scheme=scheme,
        bins=bins,
        sids=sids,
        offs=offs,
        lcp=lcp,
        letters=letters,
        key_len=key_len,
    )


def read_index_header(path) -> dict:
    """Header fields plus bin-occupancy numbers, without the sequence set."""
    with open(path, "rb") as fh:
        blob = fh.read()
    head_size = struct.calcsize("<4sIIQQB")
    if len(blob) < head_size:
        raise IndexFormatError("truncated index file")
    magic, version, m, n, n_bins, suffix_flag = struct.unpack_from("<4sIIQQB", blob)
    if magic != MAGIC:
        raise IndexFormatError("not an index file (bad magic)")
    pos = head_size
    (alpha_len,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    alpha = blob[pos:pos + alpha_len].decode()
    pos += alpha_len
    (spec_len,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    spec = blob[pos:pos + spec_len].decode()
    pos += spec_len
    bins = np.frombuffer(blob, dtype="<i8", count=n_bins + 1, offset=pos)
    sizes = np.diff(bins)
    return {
        "version": version,
        "fragment_length": m,
        "fragments": n,
        "bins": n_bins,
        "suffix_mode": bool(suffix_flag),
        "alphabet": alpha,
        "partition": spec,
        "empty_bins": int((sizes == 0).sum()),
        "largest_bin": int(sizes.max()) if sizes.size else 0,
        "mean_bin_size": float(n / n_bins) if n_bins else 0.0,
        "file_bytes": len(blob),
    }


def load(path, db: SequenceDB) -> FSIndex:
    """Load an index file; ``db`` must be the sequence set it was built from."""
    with open(path, "rb") as fh:
        blob = fh.read()
    head_size = struct.calcsize("<4sIIQQB")
    if len(blob) < head_size:
        raise IndexFormatError("truncated index file")
    magic, version, m, n, n_bins, suffix_flag = struct.unpack_from("<4sIIQQB", blob)
    if magic != MAGIC:
        raise IndexFormatError("not an index file (bad magic)")
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"unsupported index version {version}")
    pos = head_size
    (alpha_len,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    alpha = blob[pos:pos + alpha_len].decode()
    pos += alpha_len
    (spec_len,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    spec = blob[pos:pos + spec_len].decode()
    pos += spec_len

    alphabet = Alphabet(alpha)
    scheme = parse_partition(spec, alphabet, m)
    if scheme.n_bins != n_bins:
        raise IndexFormatError("bin count disagrees with partition spec")

    need = (n_bins + 1) * 8 + n * 8 + (n + 1)
    if len(blob) - pos != need:
        raise IndexFormatError("index arrays truncated or oversized")
    bins = np.frombuffer(blob, dtype="<i8", count=n_bins + 1, offset=pos).astype(np.int64)
    pos += (n_bins + 1) * 8
    packed = np.frombuffer(blob, dtype="<u8", count=n, offset=pos)
    pos += n * 8
    lcp = np.frombuffer(blob, dtype="<u1", count=n + 1, offset=pos).astype(np.uint8)
    sids = (packed >> np.uint64(32)).astype(np.uint32)
    offs = (packed & np.uint64(0xFFFFFFFF)).astype(np.uint32)

    codes, starts = encode_db(db, alphabet)
    seq_lens = np.diff(starts)
    if n and (sids >= len(db)).any():
        raise IndexFormatError("fragment reference outside the sequence set")
    if n and (offs.astype(np.int64) >= seq_lens[sids]).any():
        raise IndexFormatError("fragment offset outside its sequence")
    dataset = FragmentDataset(
        db=db,
        alphabet=alphabet,
        m=m,
        suffix_mode=bool(suffix_flag),
        floor=1 if suffix_flag else m,
        sids=sids,
        offs=offs,
        rejected=0,  # unknown post hoc; manifest comes from extraction
        codes=codes,
        starts=starts,
    )
    key_len = dataset.key_lengths()
    pad = len(alphabet)
    letters = np.full((n, m), pad, dtype=np.uint8)
    if n:
        base = starts[sids] + offs
        for j in range(m):
            live = key_len > j
            letters[live, j] = codes[base[live] + j]
    for arr in (bins, lcp, letters, key_len):
        arr.flags.writeable = False
    return FSIndex(
        dataset=dataset,
        scheme=scheme,
        bins=bins,
        sids=sids,
        offs=offs,
        lcp=lcp,
        letters=letters,
        key_len=key_len,
    )
