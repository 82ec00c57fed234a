"""Linear soft-margin SVM trained by sequential minimal optimization.

The decision function is ``D(phi) = sum_k lambda_k y_k phi_k . phi - b``; the
first training set is labelled ``y = -1`` and the second ``y = +1``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numba
import numpy as np

from .mps import OperatorBasis
from .shadows import FeatureVector, component_labels

DEFAULT_C = 1000.0
DEFAULT_TOL = 1e-6
MAX_UPDATES = 1_000_000


class ConvergenceError(ArithmeticError):
    def __init__(self, message: str, kkt_violation: float, iterations: int):
        super().__init__(f"{message}: KKT violation {kkt_violation:.3e} after {iterations} updates")
        self.kkt_violation = kkt_violation
        self.iterations = iterations


@dataclass(frozen=True)
class SvmModel:
    features: np.ndarray  # (N, dim) training vectors
    dual: np.ndarray  # lambda_k
    labels: np.ndarray  # y_k in {-1, +1}
    bias: float
    C: float
    iterations: int
    kkt_violation: float

    @property
    def weights(self) -> np.ndarray:
        return (self.dual * self.labels) @ self.features

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.dual > 0)

    @property
    def dim(self) -> int:
        return self.features.shape[1]


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, np.ndarray):
        return np.atleast_2d(np.asarray(x, dtype=float))
    rows = [f.values if isinstance(f, FeatureVector) else np.asarray(f, dtype=float) for f in x]
    return np.atleast_2d(np.array(rows, dtype=float))


@numba.njit(cache=True, nogil=True)
def _smo_loop(Q, y, ub, tol, max_updates, alpha, grad):  # pragma: no cover - compiled
    # ub[t] is the per-point box bound; ub = 0 pins a point out of the problem
    n = len(y)
    it = 0
    while True:
        gmax, gmin = -np.inf, np.inf
        i, j = -1, -1
        for t in range(n):
            s = -y[t] * grad[t]
            if (alpha[t] < ub[t]) if y[t] > 0 else (alpha[t] > 0):
                if s > gmax:
                    gmax, i = s, t
            if (alpha[t] > 0) if y[t] > 0 else (alpha[t] < ub[t]):
                if s < gmin:
                    gmin, j = s, t
        viol = gmax - gmin
        if i < 0 or j < 0 or viol < tol:
            return it, viol, True
        if it >= max_updates:
            return it, viol, False
        # two-variable subproblem along y_i e_i - y_j e_j
        quad = max(Q[i, i] + Q[j, j] - 2 * y[i] * y[j] * Q[i, j], 1e-12)
        step = viol / quad
        ti = (ub[i] - alpha[i]) if y[i] > 0 else alpha[i]
        tj = alpha[j] if y[j] > 0 else (ub[j] - alpha[j])
        step = min(step, ti, tj)
        dai = y[i] * step
        daj = -y[j] * step
        alpha[i] += dai
        alpha[j] += daj
        for t in range(n):
            grad[t] += Q[t, i] * dai + Q[t, j] * daj
        # snap to the box so the active sets stay exact
        for k in (i, j):
            if alpha[k] < 1e-12 * ub[k]:
                alpha[k] = 0.0
            elif alpha[k] > ub[k] * (1 - 1e-12):
                alpha[k] = ub[k]
        it += 1


def _bias(alpha: np.ndarray, grad: np.ndarray, y: np.ndarray, ub: np.ndarray) -> float:
    yg = y * grad
    live = ub > 0
    free = (alpha > 0) & (alpha < ub)
    if free.any():
        return float(yg[free].mean())
    # rho is only bracketed by the two bound sets; take the midpoint
    pos = y > 0
    up = live & np.where(pos, alpha < ub, alpha > 0)
    low = live & np.where(pos, alpha > 0, alpha < ub)
    hi = np.min(yg[up]) if up.any() else np.max(yg[low])
    lo = np.max(yg[low]) if low.any() else np.min(yg[up])
    return float((hi + lo) / 2)


def _solve_dual(
    K: np.ndarray,
    y: np.ndarray,
    C: float,
    tol: float,
    max_updates: int,
    alpha0: np.ndarray | None = None,
    *,
    Q: np.ndarray | None = None,
    ub: np.ndarray | None = None,
):
    """Maximal-violating-pair SMO on ``min 1/2 a^T Q a - sum a``, ``Q = y y^T K``.

    Working pair: ``i`` maximizes and ``j`` minimizes ``-y_t grad_t`` over the
    admissible sets, ties broken by lowest index.  ``alpha0`` warm-starts from a
    feasible point.  Returns ``(alpha, rho, iterations, violation)`` with ``rho``
    the bias of ``D = sum a y K - rho``.
    """
    if Q is None:
        Q = np.ascontiguousarray(K * np.outer(y, y))
    ub = np.full(len(y), float(C)) if ub is None else np.asarray(ub, dtype=float)
    alpha = np.zeros(len(y)) if alpha0 is None else np.array(alpha0, dtype=float)
    grad = Q @ alpha - 1.0
    it, viol, ok = _smo_loop(Q, np.ascontiguousarray(y, dtype=float), ub, float(tol), int(max_updates), alpha, grad)
    if not ok:
        raise ConvergenceError("SMO did not converge", float(viol), int(it))
    return alpha, _bias(alpha, grad, y, ub), int(it), float(max(viol, 0.0))


def _feasible_start(alpha: np.ndarray, y: np.ndarray, C) -> np.ndarray:
    """Repair ``sum a y = 0`` after entries were removed, spreading the excess in index order.

    ``C`` may be a scalar or a per-point bound vector.
    """
    C = np.broadcast_to(np.asarray(C, dtype=float), alpha.shape)
    alpha = np.clip(alpha, 0, C).copy()
    excess = float(alpha @ y)
    if abs(excess) < 1e-14:
        return alpha
    # excess > 0: lower positive-class or raise negative-class weights
    order = np.arange(len(y))
    for t in order:
        if abs(excess) < 1e-14:
            break
        if excess > 0:
            room = alpha[t] if y[t] > 0 else C[t] - alpha[t]
        else:
            room = alpha[t] if y[t] < 0 else C[t] - alpha[t]
        step = min(room, abs(excess))
        if step <= 0:
            continue
        alpha[t] += -np.sign(excess) * y[t] * step
        excess -= np.sign(excess) * step
    return alpha


def train(
    features_a,
    features_b,
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    *,
    max_updates: int = MAX_UPDATES,
    warm_start: np.ndarray | None = None,
) -> SvmModel:
    """Train a linear SVM separating ``features_a`` (``y=-1``) from ``features_b`` (``y=+1``).

    ``warm_start`` is an initial dual vector (stacked A then B); it is clipped
    and repaired to satisfy the equality constraint, so a solution of a
    slightly different problem is a valid seed.
    """
    xa, xb = _as_matrix(features_a), _as_matrix(features_b)
    if xa.size == 0 or xb.size == 0:
        raise ValueError("both training sets must be non-empty")
    if xa.shape[1] != xb.shape[1]:
        raise ValueError(f"dimension mismatch: {xa.shape[1]} vs {xb.shape[1]}")
    if C <= 0:
        raise ValueError("C must be positive")
    x = np.vstack([xa, xb])
    y = np.concatenate([-np.ones(len(xa)), np.ones(len(xb))])
    K = x @ x.T
    alpha0 = None
    if warm_start is not None:
        if len(warm_start) != len(y):
            raise ValueError("warm start has the wrong length")
        alpha0 = _feasible_start(np.asarray(warm_start, dtype=float), y, C)
    alpha, rho, it, viol = _solve_dual(K, y, C, tol, max_updates, alpha0)
    return SvmModel(x, alpha, y, rho, float(C), it, viol)


def leave_one_out_biases(
    model: SvmModel, tol: float = DEFAULT_TOL, *, max_updates: int = MAX_UPDATES
) -> np.ndarray:
    """Bias after dropping each training vector in turn, in training order.

    Dropping a vector with ``lambda_k = 0`` leaves the optimum unchanged, so only
    support vectors are re-solved, each warm-started from the full solution with
    that point pinned to zero.  Entries whose re-solve does not converge are NaN.
    """
    x, y, C = model.features, model.labels, model.C
    Q = np.ascontiguousarray((x @ x.T) * np.outer(y, y))
    out = np.full(len(y), model.bias)
    for k in model.support:
        ub = np.full(len(y), C)
        ub[k] = 0.0
        a0 = model.dual.copy()
        a0[k] = 0.0
        a0 = _feasible_start(a0, y, ub)
        try:
            out[k] = _solve_dual(None, y, C, tol, max_updates, a0, Q=Q, ub=ub)[1]
        except ConvergenceError:
            out[k] = np.nan
    return out


def decision(model: SvmModel, phi) -> np.ndarray | float:
    """``D(phi)``; accepts one vector or a stack of vectors."""
    phi = phi.values if isinstance(phi, FeatureVector) else np.asarray(phi, dtype=float)
    if phi.shape[-1] != model.dim:
        raise ValueError(f"dimension mismatch: {phi.shape[-1]} vs {model.dim}")
    k = model.features @ phi.T
    out = (model.dual * model.labels) @ k - model.bias
    return float(out) if np.ndim(out) == 0 else out


def predict(model: SvmModel, phi) -> np.ndarray:
    return np.where(np.atleast_1d(decision(model, phi)) >= 0, 1, -1)


def primal_objective(w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray, C: float) -> float:
    hinge = np.maximum(0.0, 1 - y * (x @ w - b))
    return float(0.5 * w @ w + C * hinge.sum())


def dual_objective(model: SvmModel) -> float:
    v = model.dual * model.labels
    return float(model.dual.sum() - 0.5 * v @ (model.features @ model.features.T) @ v)


MODEL_VERSION = 1


def model_to_json(model: SvmModel, n_a: int | None = None, feature_file: str | None = None) -> str:
    """Versioned JSON with support indices into the stacked (A then B) training file."""
    sv = model.support
    doc = {
        "v": MODEL_VERSION,
        "feature_file": feature_file,
        "n_train": len(model.labels),
        "n_a": int(np.sum(model.labels < 0)) if n_a is None else int(n_a),
        "support": [int(i) for i in sv],
        "dual": [float(model.dual[i]) for i in sv],
        "bias": float(model.bias),
        "C": model.C,
        "iterations": model.iterations,
        "kkt_violation": model.kkt_violation,
    }
    return json.dumps(doc, indent=2)


def model_from_json(text: str, features: np.ndarray) -> SvmModel:
    """Rebuild a model; ``features`` are the stacked training vectors the indices refer to."""
    doc = json.loads(text)
    if doc.get("v") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {doc.get('v')!r}")
    x = _as_matrix(features)
    if len(x) != doc["n_train"]:
        raise ValueError(f"model expects {doc['n_train']} training vectors, got {len(x)}")
    dual = np.zeros(len(x))
    dual[np.asarray(doc["support"], dtype=int)] = doc["dual"]
    y = np.concatenate([-np.ones(doc["n_a"]), np.ones(len(x) - doc["n_a"])])
    return SvmModel(x, dual, y, float(doc["bias"]), float(doc["C"]), int(doc["iterations"]), float(doc["kkt_violation"]))


# ---------------------------------------------------------------------------
# coefficient vectors


@dataclass(frozen=True)
class CoefficientVector:
    values: np.ndarray
    names: tuple[str, ...]
    labels: tuple  # (site tuple, operator tuple) per entry
    mask: np.ndarray = field(repr=False)

    def ranked(self, include_masked: bool = False) -> list[tuple[str, float]]:
        """Entries sorted by decreasing ``|C_mu|`` (masked entries dropped unless requested)."""
        order = np.argsort(-np.abs(self.values), kind="stable")
        return [
            (self.names[i], float(self.values[i])) for i in order if include_masked or not self.mask[i]
        ]


def coefficient_vector(model: SvmModel, names: Sequence[str] | None = None, labels=None) -> CoefficientVector:
    """``C_mu = sum_k lambda_k y_k phi_mu^(k)``, so that ``D(phi) = C . phi - b``."""
    vals = model.weights
    names = tuple(names) if names is not None else tuple(f"c{i}" for i in range(len(vals)))
    if len(names) != len(vals):
        raise ValueError("names do not match the coefficient dimension")
    return CoefficientVector(vals, names, tuple(labels) if labels is not None else (), np.zeros(len(vals), bool))


def coefficient_vector_for(model: SvmModel, n: int, r: int, basis: OperatorBasis) -> CoefficientVector:
    from .shadows import component_names

    return coefficient_vector(model, component_names(n, r, basis), component_labels(n, r, len(basis)))


def mask_redundant(coef: CoefficientVector, basis: OperatorBasis, rtol: float = 0.2) -> CoefficientVector:
    """Mask triples that only differ by which squared spin operator sits at one site.

    With ``(tau^x)^2 + (tau^y)^2 + (tau^z)^2 = 2`` such a triple of nearly equal
    coefficients is an identity insertion into a lower-rank monomial.  Values are
    kept; only the mask changes.  No-op for ``d = 2``.
    """
    sq = basis.squared
    if basis.d != 3 or len(sq) != 3 or not coef.labels:
        return coef
    index = {lab: i for i, lab in enumerate(coef.labels)}
    mask = coef.mask.copy()
    for (sites, ops), i in index.items():
        for pos, a in enumerate(ops):
            if a != sq[0]:
                continue
            trio = [index[(sites, ops[:pos] + (b,) + ops[pos + 1 :])] for b in sq]
            vals = coef.values[trio]
            scale = np.abs(vals).max()
            if scale == 0 or vals.max() - vals.min() <= rtol * scale:
                mask[trio] = True
    return replace(coef, mask=mask)
