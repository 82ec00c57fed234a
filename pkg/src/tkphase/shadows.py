"""Mutually unbiased bases, the inverse single-site shadow channel, and monomial feature vectors."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from math import comb
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .mps import OperatorBasis

if TYPE_CHECKING:
    from .sampler import SampleSet

AVERAGING_MODES = ("overlapping", "disjoint", "single")
_CHUNK = 8192


@dataclass(frozen=True)
class MubSet:
    """``d + 1`` orthonormal bases; ``vectors[b, k]`` is outcome ``k`` of basis ``b``."""

    d: int
    vectors: np.ndarray  # (d+1, d, d)

    @property
    def projectors(self) -> np.ndarray:
        """All ``d(d+1)`` rank-1 projectors, flattened in (basis, outcome) order."""
        v = self.vectors.reshape(-1, self.d)
        return np.einsum("ki,kj->kij", v, v.conj())

    def rotation(self, basis: int) -> np.ndarray:
        """Unitary taking basis ``basis`` to the computational basis (rows are ``<v_k|``)."""
        return self.vectors[basis].conj()


def mub_set(d: int) -> MubSet:
    if d == 2:
        s = 1 / np.sqrt(2)
        vecs = [
            [[1, 0], [0, 1]],
            [[s, s], [s, -s]],
            [[s, 1j * s], [s, -1j * s]],
        ]
    elif d == 3:
        qp, qm = np.exp(2j * np.pi / 3), np.exp(-2j * np.pi / 3)
        vecs = [
            [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
            [[qm, 1, 1], [1, qm, 1], [qp, qp, 1]],
            [[qp, 1, 1], [1, qp, 1], [qm, qm, 1]],
            [[qp, qm, 1], [qm, qp, 1], [1, 1, 1]],
        ]
        vecs = [vecs[0]] + [list(np.array(b) / np.sqrt(3)) for b in vecs[1:]]
    else:
        raise ValueError(f"no MUB construction for d={d}")
    return MubSet(d, np.array(vecs, dtype=complex))


def shadow_channel(a: np.ndarray) -> np.ndarray:
    """Single-site measurement channel of a full MUB set, ``(A + Tr(A) I)/(d+1)``."""
    d = a.shape[0]
    return (a + np.trace(a) * np.eye(d)) / (d + 1)


def invert_channel(m: np.ndarray, d: int | None = None) -> np.ndarray:
    """Inverse channel applied to a measured projector: ``(d+1) M - I``."""
    m = np.asarray(m, dtype=complex)
    d = m.shape[0] if d is None else d
    if m.shape != (d, d):
        raise ValueError(f"projector shape {m.shape} does not match d={d}")
    if abs(np.trace(m) - 1) > 1e-10 or np.abs(m @ m - m).max() > 1e-10:
        raise ValueError("input is not a rank-1 projector")
    return (d + 1) * m - np.eye(d)


@dataclass(frozen=True)
class ShadowTable:
    """``table[a, b*d + k] = Tr(O^a ((d+1) M_{b,k} - I))``."""

    d: int
    basis: OperatorBasis
    table: np.ndarray  # (|B|, d(d+1)) real

    def lookup(self, bases: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
        """Per-site estimator values, shape ``bases.shape + (|B|,)``."""
        return self.table.T[np.asarray(bases) * self.d + np.asarray(outcomes)]


def build_table(basis: OperatorBasis, mubs: MubSet) -> ShadowTable:
    if basis.d != mubs.d:
        raise ValueError(f"operator basis d={basis.d} but MUB set d={mubs.d}")
    d = mubs.d
    inv = (d + 1) * mubs.projectors - np.eye(d)
    vals = np.einsum("aij,kji->ak", basis.matrices, inv)
    if np.abs(vals.imag).max() > 1e-12:
        raise ValueError("shadow table entries are not real; operators must be Hermitian")
    return ShadowTable(d, basis, vals.real.copy())


# ---------------------------------------------------------------------------
# feature vectors

_NAME_RE = re.compile(r"^([A-Za-z]+)(\d+)$")


def component_labels(n: int, r: int, n_ops: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """(site tuple, operator tuple) per component in lexicographic order."""
    return [
        (sites, ops)
        for sites in itertools.combinations(range(n), r)
        for ops in itertools.product(range(n_ops), repeat=r)
    ]


def component_names(n: int, r: int, basis: OperatorBasis) -> list[str]:
    """Component names such as ``"Z1.X2.Z3"`` (1-based sites within the cluster)."""
    return [
        ".".join(f"{basis.names[a]}{j + 1}" for j, a in zip(sites, ops))
        for sites, ops in component_labels(n, r, len(basis))
    ]


def parse_component_name(name: str, basis: OperatorBasis) -> tuple[tuple[int, ...], tuple[int, ...]]:
    sites, ops = [], []
    for tok in name.split("."):
        m = _NAME_RE.match(tok)
        if m is None or m.group(1) not in basis.names:
            raise ValueError(f"malformed component name {name!r}")
        ops.append(basis.index(m.group(1)))
        sites.append(int(m.group(2)) - 1)
    if any(b <= a for a, b in zip(sites, sites[1:])) or sites[0] < 0:
        raise ValueError(f"component sites must be increasing in {name!r}")
    return tuple(sites), tuple(ops)


def feature_dimension(n: int, r: int, n_ops: int) -> int:
    return comb(n, r) * n_ops**r


def cluster_offsets(L: int, n: int, averaging: str) -> list[int]:
    if n > L:
        raise ValueError(f"cluster size n={n} exceeds chain length L={L}")
    if averaging == "overlapping":
        return list(range(L - n + 1))
    if averaging == "disjoint":
        return list(range(0, (L // n) * n, n))
    if averaging == "single":
        return [0]
    raise ValueError(f"unknown averaging mode {averaging!r}; expected one of {AVERAGING_MODES}")


@dataclass(frozen=True)
class FeatureVector:
    n: int
    r: int
    basis_names: tuple[str, ...]
    values: np.ndarray
    n_samples: int
    stderr: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.values)


def _monomials(site_vals: np.ndarray, n: int, r: int, offsets: Sequence[int]) -> np.ndarray:
    """Per-snapshot monomial estimators averaged over cluster placements.

    ``site_vals`` has shape ``(N, L, |B|)``; returns ``(N, dim)``.
    """
    N, _, nb = site_vals.shape
    blocks = []
    for sites in itertools.combinations(range(n), r):
        acc = np.zeros((N, nb**r))
        for p in offsets:
            prod = site_vals[:, p + sites[0], :]
            for j in sites[1:]:
                prod = (prod[:, :, None] * site_vals[:, p + j, None, :]).reshape(N, -1)
            acc += prod
        blocks.append(acc / len(offsets))
    return np.concatenate(blocks, axis=1)


def snapshot_estimates(
    samples: "SampleSet", n: int, r: int, table: ShadowTable, averaging: str = "overlapping"
) -> np.ndarray:
    """Single-snapshot estimators for every component, shape ``(N, dim)``.

    Useful for variance estimates; :func:`feature_vector` is their mean.
    """
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    if samples.d != table.d:
        raise ValueError(f"samples have d={samples.d} but table has d={table.d}")
    offsets = cluster_offsets(samples.L, n, averaging)
    vals = table.lookup(samples.basis, samples.outcome)
    return _monomials(vals, n, r, offsets)


def feature_vector(
    samples: "SampleSet",
    n: int,
    r: int,
    table: ShadowTable,
    averaging: str = "overlapping",
    *,
    with_stderr: bool = False,
) -> FeatureVector:
    """Mean of the shadow estimators over snapshots and cluster placements."""
    N = len(samples)
    if N == 0:
        raise ValueError("empty sample set")
    offsets = cluster_offsets(samples.L, n, averaging)
    if not 1 <= r <= n:
        raise ValueError(f"need 1 <= r <= n, got r={r}, n={n}")
    if samples.d != table.d:
        raise ValueError(f"samples have d={samples.d} but table has d={table.d}")
    dim = feature_dimension(n, r, len(table.basis))
    total = np.zeros(dim)
    total_sq = np.zeros(dim) if with_stderr else None
    for start in range(0, N, _CHUNK):
        part = samples[start : start + _CHUNK]
        est = _monomials(table.lookup(part.basis, part.outcome), n, r, offsets)
        total += est.sum(axis=0)
        if with_stderr:
            total_sq += (est**2).sum(axis=0)
    mean = total / N
    stderr = None
    if with_stderr:
        var = (total_sq / N - mean**2) * N / max(N - 1, 1)
        stderr = np.sqrt(np.clip(var, 0, None) / N)
    return FeatureVector(n, r, table.basis.names, mean, N, stderr)


def batch_features(
    samples: "SampleSet",
    n_features: int,
    n: int,
    r: int,
    table: ShadowTable,
    averaging: str = "overlapping",
) -> list[FeatureVector]:
    """Split into ``n_features`` equal contiguous groups (remainder dropped), one vector each."""
    if n_features < 2:
        raise ValueError("need at least 2 feature vectors")
    per = len(samples) // n_features
    if per == 0:
        raise ValueError(f"{len(samples)} samples cannot fill {n_features} feature vectors")
    return [
        feature_vector(samples[k * per : (k + 1) * per], n, r, table, averaging) for k in range(n_features)
    ]


def stack(features: Sequence[FeatureVector]) -> np.ndarray:
    return np.stack([f.values for f in features])
