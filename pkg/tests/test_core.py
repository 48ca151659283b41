import itertools

import numpy as np
import pytest

import fsindex as fx
from conftest import all_fragments_db, random_db, random_partition


class TestRank:
    def test_all_zero_digits(self, toy_scheme):
        assert toy_scheme.rank((0, 0, 0)) == 0

    def test_mixed_radix_243(self):
        # cluster counts (2, 4, 3): the top bin ranks last
        alpha = fx.Alphabet("abcdefgh")
        scheme = fx.parse_partition("abcd,efgh;ab,cd,ef,gh;abc,def,gh", alpha, 3)
        assert scheme.sizes.tolist() == [2, 4, 3]
        assert scheme.n_bins == 24
        assert scheme.rank((1, 3, 2)) == 23
        # enumeration order is lexicographic in the digit tuples
        ordered = sorted(itertools.product(range(2), range(4), range(3)))
        assert [scheme.rank(d) for d in ordered] == list(range(24))

    def test_binary_scheme_enumeration(self, toy_scheme):
        ordered = list(itertools.product(range(2), repeat=3))
        assert [toy_scheme.rank(d) for d in ordered] == list(range(8))

    def test_rank_unrank_bijection(self, toy_scheme):
        for u in range(toy_scheme.n_bins):
            assert toy_scheme.rank(toy_scheme.unrank(u)) == u

    def test_out_of_range_digits(self, toy_scheme):
        with pytest.raises(ValueError):
            toy_scheme.rank((0, 2, 0))


class TestBinOf:
    def test_worked_example_centre_bin(self, toy_scheme):
        # abd -> (alpha, beta, beta) = digits (0, 1, 1)
        assert fx.bin_of(toy_scheme, "abd") == toy_scheme.rank((0, 1, 1))

    def test_cluster_collapse(self, toy_scheme):
        # fragments differing only inside clusters share a bin
        assert fx.bin_of(toy_scheme, "abd") == fx.bin_of(toy_scheme, "cbb")
        assert fx.bin_of(toy_scheme, "aaa") == fx.bin_of(toy_scheme, "ccc")

    def test_three_cluster_positional_scheme(self):
        # {A,B}->0, {C,D}->1, {E,F}->2 at each of 4 positions
        alpha = fx.Alphabet("ABCDEF")
        scheme = fx.parse_partition("AB,CD,EF", alpha, 4)
        assert fx.bin_of(scheme, "ACEF") == 0 * 27 + 1 * 9 + 2 * 3 + 2


class TestBuild:
    def test_empty_dataset(self, toy_alpha, toy_scheme):
        db = fx.SequenceDB(records=(("only", "ab"),))  # too short for m=3
        ds = fx.extract_fragments(db, 3, alphabet=toy_alpha)
        assert ds.n == 0
        index = fx.build(ds, toy_scheme)
        index.audit()
        assert index.bins.tolist() == [0] * 9
        assert index.lcp.tolist() == [0]

    def test_full_cube_fills_every_bin_evenly(self, toy_index):
        assert np.diff(toy_index.bins).tolist() == [8] * 8

    def test_duplicates_share_full_prefix(self, toy_alpha, toy_scheme):
        db = fx.SequenceDB(records=(("r", "aaaa"),))
        ds = fx.extract_fragments(db, 3, alphabet=toy_alpha)
        assert ds.n == 2  # windows at offsets 0 and 1, both "aaa"
        index = fx.build(ds, toy_scheme)
        index.audit()
        u = fx.bin_of(toy_scheme, "aaa")
        lo, hi = index.bin_slice(u)
        assert hi - lo == 2
        assert index.lcp[lo] == 0 and index.lcp[lo + 1] == 3

    def test_order_matches_reference_sort(self, toy_alpha):
        rng = np.random.default_rng(17)
        db = random_db(rng, toy_alpha, n_seqs=12, min_len=3, max_len=30)
        ds = fx.extract_fragments(db, 3, alphabet=toy_alpha)
        scheme = fx.parse_partition("ac,bd;ab,cd;ad,cb", toy_alpha, 3)
        index = fx.build(ds, scheme)
        index.audit()
        texts = [ds.fragment_text(int(s), int(o), 3) for s, o in zip(ds.sids, ds.offs)]
        ref = sorted(
            range(ds.n),
            key=lambda i: (fx.bin_of(scheme, texts[i]), texts[i], i),
        )
        got = list(zip(index.sids.tolist(), index.offs.tolist()))
        want = [(int(ds.sids[i]), int(ds.offs[i])) for i in ref]
        assert got == want

    def test_audit_random_schemes(self):
        rng = np.random.default_rng(23)
        for trial in range(8):
            alpha = fx.STANDARD_ALPHABET if trial % 2 else fx.Alphabet("abcd")
            m = int(rng.integers(2, 6))
            db = random_db(rng, alpha, n_seqs=20, min_len=1, max_len=40)
            suffix = bool(trial % 3 == 0)
            ds = fx.extract_fragments(db, m, alphabet=alpha, suffix_mode=suffix)
            scheme = random_partition(rng, alpha, m)
            index = fx.build(ds, scheme)
            index.audit()

    def test_mismatched_scheme_rejected(self, toy_cube):
        scheme = fx.parse_partition("ac,bd", toy_cube.alphabet, 4)
        with pytest.raises(ValueError):
            fx.build(toy_cube, scheme)

    def test_suffix_mode_places_short_tails_in_rank0_bins(self, toy_alpha):
        db = fx.SequenceDB(records=(("r", "dcba"),))
        ds = fx.extract_fragments(db, 3, alphabet=toy_alpha, suffix_mode=True)
        # suffixes: dcba, cba, ba, a
        assert ds.n == 4
        scheme = fx.parse_partition("ac,bd", toy_alpha, 3)
        index = fx.build(ds, scheme)
        index.audit()
        # tail "a": digits (0, 0, 0) via rank-0 padding; tail "ba": (1, 0, 0)
        a_bin = index.bins[0:2]
        assert a_bin[1] - a_bin[0] == 1
        u_ba = scheme.rank((1, 0, 0))
        assert index.bin_size(u_ba) == 1


class TestSerialization:
    def test_roundtrip_bitexact_and_equal_results(self, toy_index, toy_d, tmp_path):
        p1 = tmp_path / "a.fsi"
        p2 = tmp_path / "b.fsi"
        toy_index.save(p1)
        loaded = fx.load(p1, toy_index.dataset.db)
        loaded.audit()
        loaded.save(p2)
        assert p1.read_bytes() == p2.read_bytes()
        q = fx.normalize(fx.distance_query(toy_d, "abd"))
        h1, _ = fx.range_search(toy_index, q, 7)
        h2, _ = fx.range_search(loaded, q, 7)
        assert h1.as_multiset() == h2.as_multiset()

    def test_roundtrip_suffix_mode(self, toy_alpha, toy_d, tmp_path):
        rng = np.random.default_rng(9)
        db = random_db(rng, toy_alpha, n_seqs=10, min_len=1, max_len=25)
        ds = fx.extract_fragments(db, 3, alphabet=toy_alpha, suffix_mode=True)
        scheme = fx.parse_partition("ac,bd", toy_alpha, 3)
        index = fx.build(ds, scheme)
        path = tmp_path / "s.fsi"
        index.save(path)
        loaded = fx.load(path, db)
        loaded.audit()
        assert loaded.suffix_mode
        assert np.array_equal(loaded.letters, index.letters)
        assert np.array_equal(loaded.lcp, index.lcp)
        q = fx.normalize(fx.distance_query(toy_d, "abc"))
        assert (
            fx.range_search(index, q, 9)[0].as_multiset()
            == fx.range_search(loaded, q, 9)[0].as_multiset()
        )

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "junk.fsi"
        p.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(fx.IndexFormatError):
            fx.load(p, fx.SequenceDB(records=(("x", "AAA"),)))

    def test_truncated_rejected(self, toy_index, tmp_path):
        p = tmp_path / "t.fsi"
        toy_index.save(p)
        p.write_bytes(p.read_bytes()[:-3])
        with pytest.raises(fx.IndexFormatError):
            fx.load(p, toy_index.dataset.db)

    def test_header_stats(self, toy_index, tmp_path):
        p = tmp_path / "h.fsi"
        size = toy_index.save(p)
        info = fx.core.read_index_header(p)
        assert info["fragments"] == 64
        assert info["bins"] == 8
        assert info["empty_bins"] == 0
        assert info["largest_bin"] == 8
        assert info["file_bytes"] == size
        assert not info["suffix_mode"]


class TestImmutability:
    def test_arrays_read_only(self, toy_index):
        for arr in (toy_index.bins, toy_index.lcp, toy_index.letters, toy_index.sids):
            with pytest.raises(ValueError):
                arr[0] = 0
