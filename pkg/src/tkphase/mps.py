"""Bond-dimension-2 translation-invariant MPS families and exact infinite-chain contractions.

Tensors are stored as an array of shape ``(d, 2, 2)`` with ``tensors[s][a, b]``
the left-bond ``a``, right-bond ``b`` element of ``B_s``.  The (unnormalized)
ring amplitude of a configuration is ``Tr(B_{s_1} ... B_{s_L})``.

Physical index order:

* spin-half: computational ``|0>, |1>``
* spin-one: ``|+>, |o>, |->`` (``tau^z`` eigenvalues ``+1, 0, -1``)

Operators are ``d x d`` matrices with ``O[s', s] = <s'|O|s>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import mpmath
import numpy as np

SPIN_HALF = "spin-half"
SPIN_ONE = "spin-one"
FAMILIES = (SPIN_HALF, SPIN_ONE)

DEGENERACY_GAP = 1e-12
PSD_TOL = 1e-10
REFINE_GAP = 1e-2  # below this double-precision gap the dominant pair is recomputed with mpmath
CANONICAL_TOL = 1e-12


class DomainError(ValueError):
    """Raised when the family parameter lies outside ``[-1, 1]``."""


class DegeneracyError(ArithmeticError):
    """Raised when the dominant transfer eigenvalue is degenerate and cannot be resolved."""

    def __init__(self, message: str, gap: float):
        super().__init__(f"{message} (gap={gap:.3e})")
        self.gap = gap


class CanonicalizationError(ArithmeticError):
    pass


class ContractionError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# local operators

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

_S2 = 1 / np.sqrt(2)
TAU_X = _S2 * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
TAU_Y = _S2 * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex)
TAU_Z = np.diag([1.0, 0.0, -1.0]).astype(complex)
# exp(i pi tau^z) is diagonal: e^{+i pi}, 1, e^{-i pi}
STRING_PHASE = np.diag([-1.0, 1.0, -1.0]).astype(complex)


@dataclass(frozen=True)
class OperatorBasis:
    """Named Hermitian single-site operators used to build monomial features."""

    d: int
    names: tuple[str, ...]
    matrices: np.ndarray  # (|B|, d, d)

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def squared(self) -> tuple[int, ...]:
        """Indices of the squared spin operators (empty for d=2)."""
        return tuple(i for i, n in enumerate(self.names) if n.endswith(("xx", "yy", "zz")))


def operator_basis(d: int) -> OperatorBasis:
    if d == 2:
        return OperatorBasis(2, ("X", "Y", "Z"), np.stack([PAULI_X, PAULI_Y, PAULI_Z]))
    if d == 3:
        mats = [TAU_X, TAU_Y, TAU_Z, TAU_X @ TAU_X, TAU_Y @ TAU_Y, TAU_Z @ TAU_Z]
        return OperatorBasis(3, ("Tx", "Ty", "Tz", "Txx", "Tyy", "Tzz"), np.stack(mats))
    raise ValueError(f"unsupported local dimension d={d}")


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class MpsFamily:
    family: str
    g: float
    tensors: np.ndarray = field(repr=False)  # (d, 2, 2) complex
    canonical: bool = False
    # unitary W with canonical = W^-1 (raw gauge) W, when known
    gauge: np.ndarray | None = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.tensors.shape[0]

    @property
    def bond_dim(self) -> int:
        return self.tensors.shape[1]


def local_dim(family: str) -> int:
    if family == SPIN_HALF:
        return 2
    if family == SPIN_ONE:
        return 3
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def family_tensors(family: str, g: float) -> np.ndarray:
    """Raw site tensors of the two families, exactly as defined for parameter ``g``."""
    if family == SPIN_HALF:
        b0 = np.array([[0, 0], [1, 1]], dtype=complex)
        b1 = np.array([[1, g], [0, 0]], dtype=complex)
        return np.stack([b0, b1])
    if family == SPIN_ONE:
        bp = _S2 * np.array(
            [
                [(1 - g) / 2 + 1j * (1 + g) / 2, 1j * g],
                [-1j, (g - 1) / 2 - 1j * (1 + g) / 2],
            ]
        )
        bo = np.array([[(1 + g) / 2, g], [1, (1 + g) / 2]], dtype=complex)
        return np.stack([bp, bo, bp.conj()])
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def build_family(family: str, g: float) -> MpsFamily:
    if not np.isfinite(g) or g < -1 or g > 1:
        raise DomainError(f"g={g} outside [-1, 1]")
    return MpsFamily(family, float(g), family_tensors(family, float(g)))


# ---------------------------------------------------------------------------
# transfer matrices


def transfer_operator(tensors: np.ndarray, op: np.ndarray | None = None) -> np.ndarray:
    """Generalized transfer matrix acting on row-major vectorized bond matrices.

    ``vec(X) -> vec(sum_{s,s'} O[s',s] B_s X B_{s'}^dagger)``; identity ``op``
    gives the ordinary transfer matrix ``sum_s B_s (x) conj(B_s)``.
    """
    if op is None:
        return np.einsum("sab,scd->acbd", tensors, tensors.conj()).reshape(4, 4)
    return np.einsum("ts,sab,tcd->acbd", op, tensors, tensors.conj()).reshape(4, 4)


@dataclass(frozen=True)
class TransferMatrix:
    """Normalized transfer matrix with its left/right fixed points.

    ``tensors`` are the site tensors the fixed points refer to; these equal the
    family tensors unless the family had to be reduced to block-diagonal form
    (degenerate, reducible spectrum).  They are already divided by
    ``sqrt(scale)`` so the dominant eigenvalue of ``matrix`` is 1.
    """

    matrix: np.ndarray
    scale: float
    left: np.ndarray
    right: np.ndarray
    gap: float
    tensors: np.ndarray
    reduced: bool = False

    @property
    def eigenvalue(self) -> float:
        return 1.0


def _hermitian_psd(m: np.ndarray, what: str, cp_map=None) -> np.ndarray:
    tr = np.trace(m)
    if abs(tr) < 1e-300:
        raise ContractionError(f"{what} fixed point has vanishing trace")
    m = m / tr
    m = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(m)
    if w.min() < -1e-6:
        raise ContractionError(f"{what} fixed point not positive semidefinite (min eig {w.min():.3e})")
    m = (v * np.clip(w, 0, None)) @ v.conj().T
    if cp_map is not None:
        # dense eig loses ~sqrt(eps) on near-pure fixed points; the map is
        # completely positive, so iterating it polishes without leaving the cone
        for _ in range(2000):
            nxt = cp_map(m)
            nxt = nxt / np.trace(nxt)
            done = np.abs(nxt - m).max() < 1e-16
            m = (nxt + nxt.conj().T) / 2
            if done:
                break
    w = np.linalg.eigvalsh(m)
    if w.min() < -PSD_TOL:
        raise ContractionError(f"{what} fixed point not positive semidefinite (min eig {w.min():.3e})")
    return m


def _sorted_spectrum(t: np.ndarray):
    w, vr = np.linalg.eig(t)
    order = np.argsort(-np.abs(w), kind="stable")
    return w[order], vr[:, order]


def _spectral_gap(w: np.ndarray) -> float:
    return float(1 - abs(w[1]) / abs(w[0]))


def _common_eigvecs(tensors: np.ndarray, tol: float = 1e-9) -> list[np.ndarray]:
    """Right eigenvectors shared by every ``B_s`` (bond dimension 2)."""
    rng = np.random.default_rng(12345)
    coeffs = rng.normal(size=len(tensors)) + 1j * rng.normal(size=len(tensors))
    combo = np.tensordot(coeffs, tensors, axes=1)
    _, vecs = np.linalg.eig(combo)
    found = []
    for v in vecs.T:
        v = v / np.linalg.norm(v)
        if all(np.linalg.norm(b @ v - (v.conj() @ b @ v) * v) < tol for b in tensors):
            found.append(v)
    return found


def reduce_degenerate(tensors: np.ndarray) -> np.ndarray:
    """Block-diagonal form of a reducible bond-dimension-2 MPS.

    A shared invariant vector makes every ``B_s`` triangular in a unitary
    frame; dropping the off-diagonal entry leaves every ring trace unchanged.
    """
    vecs = _common_eigvecs(tensors)
    if not vecs:
        raise DegeneracyError("degenerate transfer spectrum of an irreducible MPS", 0.0)
    v = vecs[0]
    perp = np.array([-v[1].conj(), v[0].conj()])
    q = np.column_stack([v, perp])
    tri = np.einsum("ab,sbc,cd->sad", q.conj().T, tensors, q)
    return np.stack([np.diag(np.diag(b)) for b in tri])


def _dominant_mp(t: np.ndarray, dps: int = 50):
    """Dominant eigenvalue, gap and left/right eigenvectors in extended precision.

    Near ``g = 0`` the transfer matrix is close to defective and double-precision
    eig loses about ``sqrt(eps)`` in both eigenvalues and eigenvectors.
    """
    with mpmath.workdps(dps):
        m = mpmath.matrix([[mpmath.mpc(complex(x)) for x in row] for row in t])
        ev, vl, vr = mpmath.eig(m, left=True, right=True)
        order = sorted(range(len(ev)), key=lambda k: -abs(ev[k]))
        k0, k1 = order[0], order[1]
        gap = 1 - abs(ev[k1]) / abs(ev[k0])
        right = np.array([complex(vr[i, k0]) for i in range(4)])
        left = np.array([complex(vl[k0, i]) for i in range(4)])
        return float(mpmath.re(ev[k0])), float(gap), left, right


def _fixed_points(tensors: np.ndarray):
    t = transfer_operator(tensors)
    w, vr = _sorted_spectrum(t)
    scale = float(w[0].real)
    gap = _spectral_gap(w)
    if gap < REFINE_GAP:
        scale, gap, lvec, rvec = _dominant_mp(t)
    if gap >= DEGENERACY_GAP:
        if gap < REFINE_GAP:
            # power-map polishing would crawl at rate 1 - gap; the extended-precision vectors suffice
            right = _hermitian_psd(rvec.reshape(2, 2), "right")
            left = _hermitian_psd(lvec.reshape(2, 2).T, "left")
        else:
            wl, vl = _sorted_spectrum(t.T)
            right = _hermitian_psd(
                vr[:, 0].reshape(2, 2), "right", lambda x: np.einsum("sab,bc,sdc->ad", tensors, x, tensors.conj())
            )
            left = _hermitian_psd(
                vl[:, 0].reshape(2, 2).T, "left", lambda x: np.einsum("sba,bc,scd->ad", tensors.conj(), x, tensors)
            )
        if is_right_canonical(tensors, CANONICAL_TOL):
            # the identity is a fixed point to rounding; a tiny-gap eigensolve cannot do better
            scale, right = 1.0, np.eye(2) / 2
        return scale, gap, left, right
    # Degenerate: only resolved for block-diagonal tensors whose 1x1 blocks carry
    # equal weight; the ring limit is then the equal mixture of the two sectors.
    off = np.abs(tensors[:, 0, 1]).max() + np.abs(tensors[:, 1, 0]).max()
    if off > 1e-12:
        raise DegeneracyError("degenerate transfer spectrum", gap)
    weights = (np.abs(tensors[:, 0, 0]) ** 2).sum(), (np.abs(tensors[:, 1, 1]) ** 2).sum()
    if abs(weights[0] - weights[1]) > 1e-12 * max(weights):
        raise DegeneracyError("degenerate spectrum with unequal sector weights", gap)
    return scale, gap, np.eye(2) / 2, np.eye(2)


def transfer_fixed_points(fam: MpsFamily) -> TransferMatrix:
    """Dominant eigenpair of the transfer matrix and its left/right fixed points.

    The right fixed point solves ``sum_s B_s r B_s^dagger = r`` and is scaled to
    trace 2 (so it is the identity for right-canonical tensors); the left one
    solves ``sum_s B_s^dagger l B_s = l`` with ``Tr(l r) = 1``.  A degenerate
    dominant eigenvalue of a reducible family (the ``g = 0`` points) is resolved
    by :func:`reduce_degenerate`; any other degeneracy raises
    :class:`DegeneracyError`.
    """
    tensors = fam.tensors
    reduced = False
    t = transfer_operator(tensors)
    w, _ = _sorted_spectrum(t)
    gap = _spectral_gap(w)
    if gap < REFINE_GAP:
        gap = _dominant_mp(t)[1]
    if gap < DEGENERACY_GAP:
        off = np.abs(tensors[:, 0, 1]).max() + np.abs(tensors[:, 1, 0]).max()
        if off > 1e-12:
            tensors = reduce_degenerate(tensors)
            reduced = True
    scale, gap, left, right = _fixed_points(tensors)
    right = right * (2 / np.trace(right).real)
    left = left / np.trace(left @ right).real
    tensors = tensors / np.sqrt(scale)
    return TransferMatrix(
        matrix=transfer_operator(tensors),
        scale=scale,
        left=left,
        right=right,
        gap=gap,
        tensors=tensors,
        reduced=reduced,
    )


def _psd_sqrt(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(m)
    if w.min() <= 1e-14:
        raise CanonicalizationError(f"right fixed point is singular (min eig {w.min():.3e})")
    sq = (v * np.sqrt(w)) @ v.conj().T
    isq = (v / np.sqrt(w)) @ v.conj().T
    return sq, isq


def is_right_canonical(tensors: np.ndarray, tol: float = 1e-10) -> bool:
    gram = np.einsum("sab,scb->ac", tensors, tensors.conj())
    return bool(np.abs(gram - np.eye(tensors.shape[1])).max() < tol)


def right_canonicalize(fam: MpsFamily) -> MpsFamily:
    """Gauge to ``sum_s B_s B_s^dagger = I`` using the positive square root of ``r``.

    The returned family's ``gauge`` holds the bond matrix ``X`` such that the
    canonical tensors are ``X^-1 B_s X / sqrt(scale)``.  For reduced families the
    ``B_s`` here are the block-diagonal tensors, so ``X`` omits the unitary frame
    used to reach that form.
    """
    tm = transfer_fixed_points(fam)
    sq, isq = _psd_sqrt(tm.right)
    canon = np.einsum("ab,sbc,cd->sad", isq, tm.tensors, sq)
    if not is_right_canonical(canon):
        raise CanonicalizationError("canonical tensors fail the isometry check")
    return replace(fam, tensors=canon, canonical=True, gauge=sq)


# ---------------------------------------------------------------------------
# expectation values


def _check_hermitian(op: np.ndarray, d: int) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.shape != (d, d):
        raise ValueError(f"operator shape {op.shape} does not match d={d}")
    if np.abs(op - op.conj().T).max() > 1e-12:
        raise ValueError("operator is not Hermitian")
    return op


def expectation(
    fam: MpsFamily | TransferMatrix,
    ops: Sequence[tuple[int, np.ndarray]],
    *,
    transfer: TransferMatrix | None = None,
) -> float:
    """Infinite-chain expectation of a product of local operators.

    ``ops`` is a list of ``(site, matrix)`` with strictly increasing sites;
    identities fill the gaps and the chain ends are closed by the transfer
    fixed points.
    """
    tm = transfer if transfer is not None else (fam if isinstance(fam, TransferMatrix) else transfer_fixed_points(fam))
    tensors = tm.tensors
    d = tensors.shape[0]
    sites = [s for s, _ in ops]
    if any(b <= a for a, b in zip(sites, sites[1:])):
        raise ValueError("sites must be strictly increasing")
    vec = tm.right.reshape(-1)
    prev = None
    for site, op in reversed(list(ops)):
        if prev is not None:
            vec = np.linalg.matrix_power(tm.matrix, prev - site - 1) @ vec
        vec = transfer_operator(tensors, _check_hermitian(op, d)) @ vec
        prev = site
    val = tm.left.T.reshape(-1) @ vec
    if abs(val.imag) > 1e-8:
        raise ContractionError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def string_operator(family: str, length: int, kind: str = "phase") -> list[tuple[int, np.ndarray]]:
    """String order operator on ``length`` consecutive sites.

    spin-half: ``Z Y X ... X Y Z`` (``length >= 4``).
    spin-one: ``tau^z S ... S tau^z`` with ``S = exp(i pi tau^z)`` for
    ``kind="phase"`` or ``S = (3/2) (tau^z)^2`` for ``kind="squared"``.
    """
    if family == SPIN_HALF:
        if length < 4:
            raise ValueError("spin-half string needs at least 4 sites")
        mats = [PAULI_Z, PAULI_Y] + [PAULI_X] * (length - 4) + [PAULI_Y, PAULI_Z]
    elif family == SPIN_ONE:
        if length < 2:
            raise ValueError("spin-one string needs at least 2 sites")
        mid = {"phase": STRING_PHASE, "squared": 1.5 * TAU_Z @ TAU_Z}[kind]
        mats = [TAU_Z] + [mid] * (length - 2) + [TAU_Z]
    else:
        raise ValueError(f"unknown family {family!r}")
    return list(enumerate(mats))


def string_order_closed_form(family: str, g: float) -> float:
    if g >= 0:
        return 0.0
    if family == SPIN_HALF:
        return -4 * g / (1 - g) ** 2
    if family == SPIN_ONE:
        return -(16 / 9) * g / (1 - g) ** 2
    raise ValueError(f"unknown family {family!r}")


def ring_amplitudes(tensors: np.ndarray, length: int) -> np.ndarray:
    """All ``d**length`` periodic amplitudes ``Tr(B_{s_1} ... B_{s_L})`` (row-major configuration order)."""
    d = tensors.shape[0]
    acc = tensors.copy()  # (configs, D, D)
    for _ in range(length - 1):
        acc = np.einsum("kab,sbc->ksac", acc, tensors).reshape(-1, 2, 2)
    return np.einsum("kaa->k", acc) if length else np.ones(1)


def find_gauge(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, complex] | None:
    """Unitary ``W`` and phase ``c`` with ``b_s = c W a_s W^dagger`` for all ``s``, or ``None``.

    Tries the phases that leave all ring amplitudes invariant up to a global
    phase (``c`` chosen from the ratio of ``Tr(b_s)/Tr(a_s)`` candidates).
    """
    cands = [1.0, -1.0, 1j, -1j]
    for c in cands:
        # b W = c W a  <=>  (b (x) I - c I (x) a^T) vec(W) = 0
        rows = [np.kron(bs, np.eye(2)) - c * np.kron(np.eye(2), as_.T) for as_, bs in zip(a, b)]
        m = np.vstack(rows)
        _, sv, vh = np.linalg.svd(m)
        if sv[-1] > tol:
            continue
        w = vh[-1].conj().reshape(2, 2)
        # normalize to unitary if possible
        u, s, vh2 = np.linalg.svd(w)
        if s.min() < 1e-12 or s.max() / s.min() > 1 + 1e-8:
            continue
        w = u @ vh2
        if all(np.allclose(bs, c * w @ as_ @ w.conj().T, atol=1e-8) for as_, bs in zip(a, b)):
            return w, c
    return None
