"""Pairwise-bias graphs over a parameter grid and their spectral bipartition."""

from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import svm

DEFAULT_GAMMA = 1.0
DEGENERACY_RTOL = 1e-10
WEIGHTINGS = ("one-sided", "two-sided")


class GraphDegeneracyError(ArithmeticError):
    def __init__(self, eigenvalues: np.ndarray):
        super().__init__(
            f"second Laplacian eigenvalue is not simple: {eigenvalues[1]:.6g} vs {eigenvalues[2]:.6g}"
        )
        self.eigenvalues = eigenvalues


@dataclass(frozen=True)
class BiasMatrix:
    """Symmetric ``|b|`` over grid pairs; ``failed[i, j]`` marks pairs whose training failed."""

    values: np.ndarray
    failed: np.ndarray
    notes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PhaseGraph:
    vertices: np.ndarray
    bias: np.ndarray
    weights: np.ndarray
    fiedler: np.ndarray | None = None
    fiedler_value: float | None = None
    errors: np.ndarray | None = None
    failed: np.ndarray | None = None

    @property
    def laplacian(self) -> np.ndarray:
        return laplacian(self.weights)


@dataclass(frozen=True)
class Partition:
    labels: np.ndarray  # +1 / -1 by sign of f
    ambiguous: np.ndarray  # |f_i| < error bar
    fiedler: np.ndarray
    fiedler_value: float


def _pair_bias(fa, fb, C, tol, loo=False):
    model = svm.train(fa, fb, C, tol)
    if not loo:
        return abs(model.bias)
    return abs(model.bias), np.abs(svm.leave_one_out_biases(model, tol))


def _run_pairs(sets, todo, C, tol, executor, loo=False) -> list:
    """Per pair: the result of :func:`_pair_bias`, or the ConvergenceError raised."""

    def one(i, j):
        try:
            return _pair_bias(sets[i], sets[j], C, tol, loo)
        except svm.ConvergenceError as exc:
            return exc

    if executor is None:
        return [one(i, j) for i, j in todo]
    return [f.result() for f in [executor.submit(one, i, j) for i, j in todo]]


def bias_matrix(
    feature_sets: Sequence[np.ndarray],
    C: float = svm.DEFAULT_C,
    tol: float = svm.DEFAULT_TOL,
    *,
    executor: Executor | None = None,
    pairs: Sequence[tuple[int, int]] | None = None,
    base: BiasMatrix | None = None,
) -> BiasMatrix:
    """Train every pair ``(i, j)``, ``i < j`` and collect ``|b|``.

    ``pairs`` restricts the work to a subset; the remaining entries come from
    ``base``.  Failed trainings are recorded in ``failed`` and given ``|b| = 1``
    (graph weight 0).
    """
    sets = [np.atleast_2d(np.asarray(s, dtype=float)) for s in feature_sets]
    n = len(sets)
    if n < 2:
        raise ValueError("need at least 2 grid points")
    if any(len(s) < 2 for s in sets):
        raise ValueError("each grid point needs at least 2 feature vectors")
    todo = list(pairs) if pairs is not None else list(itertools.combinations(range(n), 2))
    vals = base.values.copy() if base is not None else np.zeros((n, n))
    failed = base.failed.copy() if base is not None else np.zeros((n, n), bool)
    notes = dict(base.notes) if base is not None else {}
    results = _run_pairs(sets, todo, C, tol, executor)
    for (i, j), res in zip(todo, results):
        if isinstance(res, Exception):
            vals[i, j] = vals[j, i] = 1.0
            failed[i, j] = failed[j, i] = True
            notes[(i, j)] = str(res)
        else:
            vals[i, j] = vals[j, i] = res
            failed[i, j] = failed[j, i] = False
            notes.pop((i, j), None)
    return BiasMatrix(vals, failed, notes)


def lorentzian_weight(b, gamma: float = DEFAULT_GAMMA, weighting: str = "one-sided"):
    """``x^2 / (x^2 + gamma^2)``, zero at ``|b| = 1``.

    ``"one-sided"`` uses ``x = max(|b| - 1, 0)`` and is monotone in ``|b|``;
    ``"two-sided"`` uses ``x = |b| - 1``, so ``|b| << 1`` also reads as similar.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}; expected one of {WEIGHTINGS}")
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise ValueError("|b| must be non-negative")
    x = np.maximum(b - 1, 0.0) if weighting == "one-sided" else np.abs(b - 1)
    with np.errstate(invalid="ignore"):
        w = np.where(np.isinf(x), 1.0, x**2 / (x**2 + gamma**2))
    return float(w) if w.ndim == 0 else w


def weight_matrix(
    bias: BiasMatrix | np.ndarray, gamma: float = DEFAULT_GAMMA, weighting: str = "one-sided"
) -> np.ndarray:
    """Symmetrized edge weights; failed pairs (or non-finite entries) get weight 0."""
    vals = bias.values if isinstance(bias, BiasMatrix) else np.asarray(bias, dtype=float)
    failed = bias.failed if isinstance(bias, BiasMatrix) else np.zeros(vals.shape, bool)
    failed = failed | ~np.isfinite(vals)
    w = lorentzian_weight(np.abs(np.where(failed, 1.0, vals)), gamma, weighting)
    w = np.where(failed, 0.0, w)
    w = (w + w.T) / 2
    np.fill_diagonal(w, 0.0)
    return w


def laplacian(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    return np.diag(w.sum(axis=1)) - w


def _orient(f: np.ndarray) -> np.ndarray:
    """Fix the global sign: the first entry with magnitude above 1e-8 of the maximum is positive."""
    big = np.flatnonzero(np.abs(f) > 1e-8 * np.abs(f).max())
    return -f if big.size and f[big[0]] < 0 else f


def fiedler_vector(weights: np.ndarray, rtol: float = DEGENERACY_RTOL) -> tuple[np.ndarray, float]:
    """Unit eigenvector of the second-smallest Laplacian eigenvalue, orthogonal to ones.

    Raises :class:`GraphDegeneracyError` when that eigenvalue is not simple.
    """
    lap = laplacian(weights)
    n = len(lap)
    if n < 2:
        raise ValueError("graph needs at least 2 vertices")
    # deflate the constant vector so the Fiedler pair is the lowest of the shifted operator
    evals = np.linalg.eigvalsh(lap)
    shift = evals[-1] + 1.0
    vals, vecs = np.linalg.eigh(lap + shift * np.ones((n, n)) / n)
    lam = vals[0]
    if n > 2:
        scale = max(abs(shift), 1.0)
        if vals[1] - vals[0] <= rtol * scale:
            raise GraphDegeneracyError(np.concatenate([[0.0], vals[:2]]))
    f = vecs[:, 0]
    f = f - f.mean()
    f /= np.linalg.norm(f)
    return _orient(f), float(lam)


def jackknife_se(replicates: np.ndarray) -> np.ndarray:
    """``sqrt((n-1)/n * sum_k (f_k - mean)^2)`` along axis 0."""
    reps = np.asarray(replicates, dtype=float)
    n = len(reps)
    if n < 2:
        raise ValueError("jackknife needs at least 2 replicates")
    return np.sqrt((n - 1) / n * ((reps - reps.mean(axis=0)) ** 2).sum(axis=0))


def align_sign(f: np.ndarray, reference: np.ndarray) -> np.ndarray:
    return -f if float(f @ reference) < 0 else f


def jackknife_errors(
    feature_sets: Sequence[np.ndarray],
    pipeline: Callable[[Sequence[np.ndarray], int, int], np.ndarray],
    reference: np.ndarray,
) -> np.ndarray:
    """Leave-one-feature-vector-out standard errors of ``pipeline``'s Fiedler vector.

    ``pipeline(sets, g_index, vector_index)`` returns the Fiedler vector with
    vector ``vector_index`` removed from grid point ``g_index``.  Every grid point
    needs at least 3 vectors.  Replicates are sign-aligned to ``reference``.
    """
    if any(len(s) < 3 for s in feature_sets):
        raise ValueError("jackknife needs at least 3 feature vectors per grid point")
    reps = [
        align_sign(np.asarray(pipeline(feature_sets, i, k)), reference)
        for i, s in enumerate(feature_sets)
        for k in range(len(s))
    ]
    return jackknife_se(np.array(reps))


def _blocks(n_vectors: int, n_blocks: int | None) -> list[np.ndarray]:
    if n_blocks is None:
        return [np.array([k]) for k in range(n_vectors)]
    if not 2 <= n_blocks <= n_vectors:
        raise ValueError(f"need 2 <= jackknife blocks <= {n_vectors}, got {n_blocks}")
    return np.array_split(np.arange(n_vectors), n_blocks)


def build_graph(
    vertices: Sequence[float],
    feature_sets: Sequence[np.ndarray],
    C: float = svm.DEFAULT_C,
    gamma: float = DEFAULT_GAMMA,
    tol: float = svm.DEFAULT_TOL,
    *,
    weighting: str = "one-sided",
    jackknife: bool = True,
    jackknife_blocks: int | None = None,
    executor: Executor | None = None,
) -> PhaseGraph:
    """Bias matrix, weights, Fiedler vector and (optionally) jackknife errors in one pass.

    Each pair is trained once.  A replicate that drops data at grid point ``i``
    changes only the pairs touching ``i``.  With ``jackknife_blocks=None`` one
    feature vector is dropped per replicate and the touched biases come from
    exact leave-one-out re-solves of the base trainings.  An integer groups each
    grid point's vectors into that many contiguous blocks, drops one block per
    replicate and retrains the touched pairs.
    """
    sets = [np.atleast_2d(np.asarray(s, dtype=float)) for s in feature_sets]
    n = len(sets)
    if len(vertices) != n:
        raise ValueError("need one vertex per feature set")
    if n < 2 or any(len(s) < 2 for s in sets):
        raise ValueError("need at least 2 grid points with at least 2 feature vectors each")
    exact_loo = jackknife and jackknife_blocks is None
    todo = list(itertools.combinations(range(n), 2))
    results = _run_pairs(sets, todo, C, tol, executor, loo=exact_loo)
    vals, failed, notes = np.zeros((n, n)), np.zeros((n, n), bool), {}
    loo: dict[tuple[int, int], np.ndarray] = {}
    for (i, j), res in zip(todo, results):
        if isinstance(res, Exception):
            vals[i, j] = vals[j, i] = 1.0
            failed[i, j] = failed[j, i] = True
            notes[(i, j)] = str(res)
            loo[(i, j)] = np.full(len(sets[i]) + len(sets[j]), np.nan)
        elif exact_loo:
            vals[i, j] = vals[j, i] = res[0]
            loo[(i, j)] = res[1]
        else:
            vals[i, j] = vals[j, i] = res
    bm = BiasMatrix(vals, failed, notes)
    w = weight_matrix(bm, gamma, weighting)
    f, lam = fiedler_vector(w)
    errors = None
    if exact_loo:

        def replicate(fs, i, k):
            v = vals.copy()
            for j in range(n):
                if j != i:
                    a, c = min(i, j), max(i, j)
                    # pair (a, c) was trained with set a first
                    v[i, j] = v[j, i] = loo[(a, c)][k if i == a else len(sets[a]) + k]
            return fiedler_vector(weight_matrix(BiasMatrix(v, failed), gamma, weighting))[0]

        errors = jackknife_errors(sets, replicate, f)
    elif jackknife:
        blocks = [_blocks(len(s), jackknife_blocks) for s in sets]
        reps = []
        for i in range(n):
            touched = [(min(i, j), max(i, j)) for j in range(n) if j != i]
            for drop in blocks[i]:
                fs = list(sets)
                fs[i] = np.delete(sets[i], drop, axis=0)
                part = bias_matrix(fs, C, tol, executor=executor, pairs=touched, base=bm)
                reps.append(align_sign(fiedler_vector(weight_matrix(part, gamma, weighting))[0], f))
        errors = jackknife_se(np.array(reps))
    return PhaseGraph(np.asarray(vertices, float), bm.values, w, f, lam, errors, bm.failed)


def fiedler_partition(graph: PhaseGraph) -> Partition:
    """Sign labels of the Fiedler vector; ``|f_i|`` below its error bar is flagged ambiguous."""
    if graph.fiedler is None:
        f, lam = fiedler_vector(graph.weights)
    else:
        f, lam = graph.fiedler, graph.fiedler_value
    labels = np.where(f >= 0, 1, -1)
    err = graph.errors if graph.errors is not None else np.zeros_like(f)
    return Partition(labels, np.abs(f) < err, f, float(lam))


# ---------------------------------------------------------------------------
# serialization


def edges_csv(graph: PhaseGraph) -> str:
    out = io.StringIO()
    wr = csv.writer(out, lineterminator="\n")
    wr.writerow(["g_i", "g_j", "abs_b", "w", "failed"])
    n = len(graph.vertices)
    failed = graph.failed if graph.failed is not None else np.zeros((n, n), bool)
    for i, j in itertools.combinations(range(n), 2):
        wr.writerow(
            [
                repr(float(graph.vertices[i])),
                repr(float(graph.vertices[j])),
                repr(float(graph.bias[i, j])),
                repr(float(graph.weights[i, j])),
                int(failed[i, j]),
            ]
        )
    return out.getvalue()


def summary_json(graph: PhaseGraph, partition: Partition | None = None) -> str:
    part = partition if partition is not None else fiedler_partition(graph)
    doc = {
        "v": 1,
        "vertices": [float(g) for g in graph.vertices],
        "fiedler": [float(x) for x in part.fiedler],
        "fiedler_value": part.fiedler_value,
        "errors": None if graph.errors is None else [float(e) for e in graph.errors],
        "labels": [int(x) for x in part.labels],
        "ambiguous": [bool(x) for x in part.ambiguous],
    }
    return json.dumps(doc, indent=2)


def to_dot(graph: PhaseGraph, min_weight: float = 0.0) -> str:
    part = fiedler_partition(graph)
    lines = ["graph phases {"]
    for i, g in enumerate(graph.vertices):
        color = "red" if part.labels[i] > 0 else "blue"
        style = ',style="dashed"' if part.ambiguous[i] else ""
        lines.append(f'  v{i} [label="{g:g}",color={color}{style}];')
    for i, j in itertools.combinations(range(len(graph.vertices)), 2):
        w = graph.weights[i, j]
        if w > min_weight:
            lines.append(f"  v{i} -- v{j} [weight={w:.6g}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def read_edges_csv(text: str) -> PhaseGraph:
    rows = list(csv.DictReader(io.StringIO(text)))
    gs = sorted({float(r["g_i"]) for r in rows} | {float(r["g_j"]) for r in rows})
    idx = {g: i for i, g in enumerate(gs)}
    n = len(gs)
    b, w, failed = np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n), bool)
    for r in rows:
        i, j = idx[float(r["g_i"])], idx[float(r["g_j"])]
        b[i, j] = b[j, i] = float(r["abs_b"])
        w[i, j] = w[j, i] = float(r["w"])
        failed[i, j] = failed[j, i] = bool(int(r.get("failed", 0)))
    return PhaseGraph(np.array(gs), b, w, failed=failed)


__all__ = [
    "BiasMatrix",
    "GraphDegeneracyError",
    "WEIGHTINGS",
    "Partition",
    "PhaseGraph",
    "align_sign",
    "bias_matrix",
    "build_graph",
    "edges_csv",
    "fiedler_partition",
    "fiedler_vector",
    "jackknife_errors",
    "jackknife_se",
    "laplacian",
    "lorentzian_weight",
    "read_edges_csv",
    "summary_json",
    "to_dot",
    "weight_matrix",
]
