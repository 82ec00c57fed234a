"""Randomized MUB snapshots from the infinite-chain marginal of an MPS.

Snapshots are generated in fixed-size chunks.  Chunk ``k`` draws from its own
generator seeded by ``SeedSequence(seed, spawn_key=(k,))``, so a stream is
reproducible, independent of how many samples follow it, and chunks can be
produced in any order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .mps import MpsFamily, transfer_fixed_points
from .shadows import mub_set

SOURCES = ("synthetic", "experiment", "random")
CHUNK = 4096

# qubit-pair encoding of a spin-1 site: |00> -> o, |01> -> +, |10> -> -
PAIR_TO_OUTCOME = {"00": 1, "01": 0, "10": 2}
OUTCOME_TO_PAIR = {v: k for k, v in PAIR_TO_OUTCOME.items()}


@dataclass(frozen=True)
class MubSample:
    d: int
    basis: tuple[int, ...]
    outcome: tuple[int, ...]
    family: str | None = None
    g: float | None = None
    seed: int | None = None
    source: str = "synthetic"

    @property
    def L(self) -> int:
        return len(self.basis)


@dataclass(frozen=True)
class SampleSet:
    """A batch of snapshots sharing ``(d, L)`` and provenance, stored as int8 arrays."""

    d: int
    basis: np.ndarray  # (N, L)
    outcome: np.ndarray  # (N, L)
    family: str | None = None
    g: float | None = None
    seed: int | None = None
    source: str = "synthetic"
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"d must be 2 or 3, got {self.d}")
        if self.basis.shape != self.outcome.shape or self.basis.ndim != 2:
            raise ValueError("basis and outcome must be equal-shape (N, L) arrays")
        if self.basis.shape[1] < 1:
            raise ValueError("L must be at least 1")
        if self.basis.size and (self.basis.min() < 0 or self.basis.max() > self.d):
            raise ValueError("basis index out of range")
        if self.outcome.size and (self.outcome.min() < 0 or self.outcome.max() > self.d - 1):
            raise ValueError("outcome index out of range")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")

    @property
    def L(self) -> int:
        return self.basis.shape[1]

    def __len__(self) -> int:
        return self.basis.shape[0]

    def __getitem__(self, item):
        if isinstance(item, (int, np.integer)):
            return MubSample(
                self.d,
                tuple(int(x) for x in self.basis[item]),
                tuple(int(x) for x in self.outcome[item]),
                self.family,
                self.g,
                self.seed,
                self.source,
            )
        return SampleSet(
            self.d, self.basis[item], self.outcome[item], self.family, self.g, self.seed, self.source
        )

    def __iter__(self) -> Iterator[MubSample]:
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_samples(cls, samples: Sequence[MubSample]) -> "SampleSet":
        if not samples:
            raise ValueError("no samples")
        first = samples[0]
        if any(s.d != first.d or s.L != first.L for s in samples):
            raise ValueError("samples disagree on (d, L)")
        basis = np.array([s.basis for s in samples], dtype=np.int8)
        outcome = np.array([s.outcome for s in samples], dtype=np.int8)
        return cls(first.d, basis, outcome, first.family, first.g, first.seed, first.source)


def concat(sets: Sequence[SampleSet]) -> SampleSet:
    """Pool snapshot sets; refuses to mix local dimension or chain length."""
    first = sets[0]
    for s in sets[1:]:
        if (s.d, s.L) != (first.d, first.L):
            raise ValueError(f"cannot pool (d, L)={(s.d, s.L)} with {(first.d, first.L)}")
    same_g = all(s.g == first.g for s in sets)
    return SampleSet(
        first.d,
        np.concatenate([s.basis for s in sets]),
        np.concatenate([s.outcome for s in sets]),
        first.family if all(s.family == first.family for s in sets) else None,
        first.g if same_g else None,
        first.seed if len(sets) == 1 else None,
        first.source if all(s.source == first.source for s in sets) else "experiment",
    )


@dataclass(frozen=True)
class NoiseSpec:
    p_depolarize: float = 0.0
    p_discard_pair: float = 0.0

    def __post_init__(self):
        for name in ("p_depolarize", "p_discard_pair"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise ValueError(f"{name}={p} outside [0, 1]")


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def projected_tensors(fam: MpsFamily, tensors: np.ndarray | None = None) -> np.ndarray:
    """``A[b, k] = sum_s conj(v_{b,k}[s]) B_s`` for every MUB state, shape ``(d+1, d, D, D)``."""
    tensors = fam.tensors if tensors is None else tensors
    vecs = mub_set(fam.d).vectors
    return np.einsum("bks,sij->bkij", vecs.conj(), tensors)


class _Marginal:
    """Sequential conditional probabilities of the infinite-chain marginal."""

    def __init__(self, fam: MpsFamily):
        if not fam.canonical:
            raise ValueError("sampling requires right-canonical tensors (call right_canonicalize)")
        tm = transfer_fixed_points(fam)
        self.d = fam.d
        self.left = tm.left
        self.right = tm.right
        # A r A^dagger is reused for every left environment
        self.proj = projected_tensors(fam, tm.tensors)
        self.proj_r = np.einsum("bkij,jl->bkil", self.proj, self.right)

    def start(self, n: int) -> np.ndarray:
        return np.broadcast_to(self.left, (n, 2, 2)).copy()

    def probabilities(self, env: np.ndarray, basis: np.ndarray) -> np.ndarray:
        """``p[i, k] = Tr(env_i A_{b_i,k} r A_{b_i,k}^dagger)``, shape ``(n, d)``."""
        a = self.proj[basis]  # (n, d, 2, 2)
        ar = self.proj_r[basis]
        p = np.einsum("nij,nkjl,nkil->nk", env, ar, a.conj()).real
        return np.clip(p, 0, None)

    def update(self, env: np.ndarray, basis: np.ndarray, outcome: np.ndarray, p: np.ndarray) -> np.ndarray:
        a = self.proj[basis, outcome]  # (n, 2, 2)
        new = np.einsum("nji,njk,nkl->nil", a.conj(), env, a)
        return new / p[:, None, None]


def _draw_outcomes(p: np.ndarray, u: np.ndarray) -> np.ndarray:
    cum = np.cumsum(p, axis=1)
    cum /= cum[:, -1:]
    return np.minimum((u[:, None] > cum).sum(axis=1), p.shape[1] - 1)


def _stratified_bases(start: int, n: int, L: int, d: int) -> np.ndarray:
    idx = (np.arange(start, start + n) % (d + 1) ** L)[:, None]
    powers = (d + 1) ** np.arange(L - 1, -1, -1)
    return ((idx // powers) % (d + 1)).astype(np.int8)


def sample_mub(
    fam: MpsFamily,
    L: int,
    N: int,
    seed: int,
    noise: NoiseSpec | None = None,
    *,
    stratified: bool = False,
    basis: int | Sequence[int] | None = None,
) -> SampleSet:
    """Draw ``N`` snapshots of ``L`` consecutive sites of the infinite chain.

    Per site the MUB is uniform over the ``d + 1`` bases (or cycles through all
    ``(d+1)**L`` configurations with ``stratified``, or is fixed by ``basis``);
    outcomes follow the exact sequential conditionals.  Depolarizing noise
    replaces each recorded outcome by a uniform one with probability
    ``p_depolarize``.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    if N < 0:
        raise ValueError("N must be non-negative")
    noise = noise or NoiseSpec()
    marg = _Marginal(fam)
    d = fam.d
    bases_out = np.empty((N, L), dtype=np.int8)
    outs = np.empty((N, L), dtype=np.int8)
    fixed = None if basis is None else np.broadcast_to(np.asarray(basis, dtype=np.int8), (L,))
    for chunk, start in enumerate(range(0, N, CHUNK)):
        n = min(CHUNK, N - start)
        # full-size draws keep a chunk's values independent of where the stream ends
        rng = chunk_rng(seed, chunk)
        b = rng.integers(0, d + 1, size=(CHUNK, L), dtype=np.int8)[:n]
        u = rng.random((CHUNK, L))[:n]
        flip = rng.random((CHUNK, L))[:n] < noise.p_depolarize
        repl = rng.integers(0, d, size=(CHUNK, L), dtype=np.int8)[:n]
        if stratified:
            b = _stratified_bases(start, n, L, d)
        elif fixed is not None:
            b = np.broadcast_to(fixed, (n, L)).copy()
        env = marg.start(n)
        o = np.empty((n, L), dtype=np.int8)
        for site in range(L):
            p = marg.probabilities(env, b[:, site])
            o[:, site] = _draw_outcomes(p, u[:, site])
            chosen = p[np.arange(n), o[:, site]]
            env = marg.update(env, b[:, site], o[:, site], chosen)
        o = np.where(flip, repl, o)
        bases_out[start : start + n] = b
        outs[start : start + n] = o
    return SampleSet(d, bases_out, outs, fam.family, fam.g, seed, "synthetic")


def sample_random_uniform(d: int, L: int, N: int, seed: int) -> SampleSet:
    if d not in (2, 3):
        raise ValueError(f"d must be 2 or 3, got {d}")
    bases = np.empty((N, L), dtype=np.int8)
    outs = np.empty((N, L), dtype=np.int8)
    for chunk, start in enumerate(range(0, N, CHUNK)):
        n = min(CHUNK, N - start)
        rng = chunk_rng(seed, chunk)
        bases[start : start + n] = rng.integers(0, d + 1, size=(CHUNK, L), dtype=np.int8)[:n]
        outs[start : start + n] = rng.integers(0, d, size=(CHUNK, L), dtype=np.int8)[:n]
    return SampleSet(d, bases, outs, None, None, seed, "random")


def exact_distribution(fam: MpsFamily, L: int) -> np.ndarray:
    """Joint law of (basis configuration, outcome configuration), shape ``((d+1)**L, d**L)``.

    Uses the same sequential conditionals as :func:`sample_mub`, enumerated
    instead of sampled; rows and columns are in row-major configuration order.
    """
    marg = _Marginal(fam)
    d = fam.d
    configs = np.array(list(itertools.product(range(d + 1), repeat=L)), dtype=np.int64)
    outcomes = np.array(list(itertools.product(range(d), repeat=L)), dtype=np.int64)
    nb, no = len(configs), len(outcomes)
    b = np.repeat(configs, no, axis=0)
    o = np.tile(outcomes, (nb, 1))
    env = marg.start(len(b))
    prob = np.ones(len(b))
    for site in range(L):
        p = marg.probabilities(env, b[:, site])
        chosen = p[np.arange(len(b)), o[:, site]]
        prob *= chosen
        safe = np.where(chosen > 0, chosen, 1.0)
        env = marg.update(env, b[:, site], o[:, site], safe)
    return prob.reshape(nb, no) / nb


# ---------------------------------------------------------------------------
# qubit-pair records (spin-1 sites emulated by two qubits)


@dataclass(frozen=True)
class PairRecord:
    basis: tuple[int, ...]
    pairs: tuple[str, ...]


def _pair_str(p) -> str:
    s = p if isinstance(p, str) else "".join(str(int(x)) for x in p)
    if len(s) != 2 or s.strip("01"):
        raise ValueError(f"malformed qubit pair {p!r}")
    return s


def decode_qubit_pairs(
    records: Sequence[PairRecord | Sequence], *, family=None, g=None, seed=None, source="experiment"
) -> tuple[SampleSet | None, float]:
    """Map qubit-pair outcomes onto spin-1 outcomes and drop records containing ``|11>``.

    Records are :class:`PairRecord` or bare pair sequences (then measured in the
    computational basis).  Returns the kept snapshots (``None`` if nothing
    survives) and the discarded fraction.
    """
    kept_b, kept_o = [], []
    length = None
    for rec in records:
        if not isinstance(rec, PairRecord):
            rec = PairRecord((0,) * len(rec), tuple(rec))
        pairs = [_pair_str(p) for p in rec.pairs]
        if len(rec.basis) != len(pairs):
            raise ValueError("record basis and pair lists differ in length")
        if length is None:
            length = len(pairs)
        elif len(pairs) != length:
            raise ValueError(f"record length {len(pairs)} differs from {length}")
        if "11" in pairs:
            continue
        kept_b.append(rec.basis)
        kept_o.append([PAIR_TO_OUTCOME[p] for p in pairs])
    total = len(records)
    frac = (total - len(kept_b)) / total if total else 0.0
    if not kept_b:
        return None, frac
    ss = SampleSet(
        3, np.array(kept_b, dtype=np.int8), np.array(kept_o, dtype=np.int8), family, g, seed, source
    )
    return ss, frac


def encode_qubit_pairs(samples: SampleSet, p_discard: float = 0.0, seed: int = 0) -> list[PairRecord]:
    """Qubit-pair records of spin-1 snapshots; with ``p_discard`` a record gets one ``11`` pair.

    Emulates the invalid-pair leakage of a qubit implementation.
    """
    if samples.d != 3:
        raise ValueError("qubit-pair encoding only applies to spin-1 samples")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xD15CA4D,)))
    bad = rng.random(len(samples)) < p_discard
    where = rng.integers(0, samples.L, size=len(samples))
    out = []
    for i in range(len(samples)):
        pairs = [OUTCOME_TO_PAIR[int(x)] for x in samples.outcome[i]]
        if bad[i]:
            pairs[where[i]] = "11"
        out.append(PairRecord(tuple(int(x) for x in samples.basis[i]), tuple(pairs)))
    return out
