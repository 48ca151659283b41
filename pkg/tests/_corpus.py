"""Synthetic protein-like corpus for the desk-scale benchmarks.

Sequences are generated from typical amino-acid background frequencies
with family structure: each family is an ancestor plus point-mutated
variants, mimicking the redundancy of curated protein databases.
"""

from __future__ import annotations

import numpy as np

from fsindex.alphabet import STANDARD_AA

# typical background frequencies of the 20 standard residues, ARNDCQEGHILKMFPSTWYV order
BACKGROUND = np.array([
    0.0787, 0.0512, 0.0448, 0.0536, 0.0157, 0.0395, 0.0636, 0.0723,
    0.0226, 0.0529, 0.0921, 0.0580, 0.0223, 0.0393, 0.0483, 0.0692,
    0.0584, 0.0131, 0.0321, 0.0723,
])
BACKGROUND = BACKGROUND / BACKGROUND.sum()


def protein_corpus_fasta(
    n_families: int = 130,
    members_per_family: int = 25,
    min_len: int = 260,
    max_len: int = 440,
    mutation_rate: float = 0.08,
    x_rate: float = 0.002,
    seed: int = 20040614,
) -> str:
    """FASTA text of a family-structured random protein corpus."""
    rng = np.random.default_rng(seed)
    letters = np.frombuffer(STANDARD_AA.encode(), dtype=np.uint8)
    records = []
    serial = 0
    for fam in range(n_families):
        length = int(rng.integers(min_len, max_len + 1))
        ancestor = rng.choice(20, size=length, p=BACKGROUND)
        for member in range(members_per_family):
            seq = ancestor.copy()
            if member:
                flips = rng.random(length) < mutation_rate
                seq[flips] = rng.choice(20, size=int(flips.sum()), p=BACKGROUND)
            chars = letters[seq].copy()
            xs = rng.random(length) < x_rate
            chars[xs] = ord("X")
            serial += 1
            records.append(f">f{fam:03d}m{member:02d}|g{serial}")
            records.append(chars.tobytes().decode("latin-1"))
    return "\n".join(records) + "\n"
