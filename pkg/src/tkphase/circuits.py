"""Gates from right-canonical MPS tensors, a staircase statevector simulator, and list-level transpile passes.

Wire conventions.  A bulk gate acts on ``(fresh, bond)``: the fresh wire enters
in the dummy state and leaves carrying the next bond index, the bond wire
enters carrying ``alpha`` and leaves carrying the physical outcome.  Matrix
rows and columns are ordered with the fresh wire as the most significant
factor, so ``U[(beta, s), (dummy, alpha)] = B_s[alpha, beta]``.

Encodings
    ``two-qubit``    spin-half; dummy ``|0>``.
    ``three-qubit``  spin-one; the site is a qubit pair with ``|00>, |01>, |10>``
                     for ``o, +, -`` and ``|11>`` unused; dummy ``|00>``.
    ``two-qutrit``   spin-one; qutrit levels ``+, o, - = 0, 1, 2``; the bond is
                     embedded in levels ``{+, -}``; dummy ``|o>``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .mps import SPIN_HALF, SPIN_ONE, MpsFamily, is_right_canonical, transfer_fixed_points
from .sampler import OUTCOME_TO_PAIR, exact_distribution
from .shadows import mub_set

ENCODINGS = ("two-qubit", "three-qubit", "two-qutrit")
ROLES = ("bulk", "environment", "measurement-rotation")
ISOMETRY_TOL = 1e-8
NULL_TOL = 1e-8

# qubit-pair index (binary) of each spin-one outcome +, o, -
_PAIR_INDEX = np.array([int(OUTCOME_TO_PAIR[k], 2) for k in range(3)])
# embedding of a 2-dim bond into a qutrit
_QUTRIT_BOND = np.array([0, 2])
_QUTRIT_DUMMY = 1

# entangling-gate counts per reference circuit (counting only; no synthesis here)
GATE_BUDGET = {
    ("two-qubit", "bulk"): (2, 2),
    ("two-qubit", "environment"): (1, 2),
    ("three-qubit", "bulk"): (8, 9),
    ("three-qubit", "environment"): (1, 1),
    ("three-qubit", "measurement-rotation"): (3, 3),
    ("two-qutrit", "bulk"): (2, 3),
    ("two-qutrit", "environment"): (1, 1),
    ("two-qutrit", "measurement-rotation"): (0, 0),
}


class CircuitSizeError(ValueError):
    pass


@dataclass(frozen=True)
class GateUnitary:
    matrix: np.ndarray
    role: str
    encoding: str
    wire_dims: tuple[int, ...]
    designated: tuple[int, ...] = ()  # columns fixed by the construction

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def unitarity_error(self) -> float:
        m = self.matrix
        return float(np.abs(m.conj().T @ m - np.eye(len(m))).max())


def encoding_family(encoding: str) -> str:
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown encoding {encoding!r}; expected one of {ENCODINGS}")
    return SPIN_HALF if encoding == "two-qubit" else SPIN_ONE


def wire_dims(encoding: str) -> tuple[int, ...]:
    """Wire dimensions of a bulk gate, most significant first."""
    return {"two-qubit": (2, 2), "three-qubit": (2, 2, 2), "two-qutrit": (3, 3)}[encoding]


def complete_unitary(columns: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    """Place orthonormal ``columns`` at ``positions`` and fill the rest deterministically.

    Candidates are the canonical basis vectors in order, orthogonalized (twice)
    against everything accepted so far; candidates with residual norm below
    ``1e-8`` are skipped.  Each completed column gets its first entry above
    ``1e-12`` made real positive.
    """
    cols = np.asarray(columns, dtype=complex)
    dim, k = cols.shape
    if len(positions) != k or len(set(positions)) != k:
        raise ValueError("positions must be distinct, one per column")
    gram = cols.conj().T @ cols
    if np.abs(gram - np.eye(k)).max() > ISOMETRY_TOL:
        raise ValueError(f"columns are not orthonormal (residual {np.abs(gram - np.eye(k)).max():.2e})")
    basis = [c for c in cols.T]
    extra = []
    for e in np.eye(dim, dtype=complex):
        if len(basis) == dim:
            break
        v = e.copy()
        for _ in range(2):
            for b in basis:
                v -= (b.conj() @ v) * b
        nv = np.linalg.norm(v)
        if nv < NULL_TOL:
            continue
        v /= nv
        lead = np.flatnonzero(np.abs(v) > 1e-12)[0]
        v *= abs(v[lead]) / v[lead]
        basis.append(v)
        extra.append(v)
    out = np.zeros((dim, dim), dtype=complex)
    out[:, list(positions)] = cols
    rest = [i for i in range(dim) if i not in set(positions)]
    out[:, rest] = np.array(extra).T
    return out


def isometry_columns(tensors: np.ndarray, encoding: str) -> tuple[np.ndarray, tuple[int, ...]]:
    """Designated columns ``U[:, (dummy, alpha)]`` and their column indices."""
    d = tensors.shape[0]
    if encoding == "two-qubit":
        if d != 2:
            raise ValueError("two-qubit encoding needs d = 2")
        cols = np.zeros((4, 2), complex)
        for beta, s, alpha in itertools.product(range(2), range(2), range(2)):
            cols[2 * beta + s, alpha] = tensors[s, alpha, beta]
        return cols, (0, 1)
    if d != 3:
        raise ValueError(f"{encoding} encoding needs d = 3")
    if encoding == "three-qubit":
        cols = np.zeros((8, 2), complex)
        for beta, s, alpha in itertools.product(range(2), range(3), range(2)):
            cols[4 * beta + _PAIR_INDEX[s], alpha] = tensors[s, alpha, beta]
        return cols, (0, 1)
    if encoding == "two-qutrit":
        cols = np.zeros((9, 2), complex)
        for beta, s, alpha in itertools.product(range(2), range(3), range(2)):
            cols[3 * _QUTRIT_BOND[beta] + s, alpha] = tensors[s, alpha, beta]
        return cols, tuple(3 * _QUTRIT_DUMMY + int(a) for a in _QUTRIT_BOND)
    raise ValueError(f"unknown encoding {encoding!r}")


def unitarize(fam: MpsFamily, encoding: str) -> GateUnitary:
    """Bulk gate whose designated columns are the right-canonical isometry ``alpha -> (s, beta)``."""
    if encoding_family(encoding) != fam.family:
        raise ValueError(f"encoding {encoding!r} does not fit family {fam.family!r}")
    if not is_right_canonical(fam.tensors, ISOMETRY_TOL):
        raise ValueError("tensors are not right-canonical (isometry residual above 1e-8)")
    cols, pos = isometry_columns(fam.tensors, encoding)
    return GateUnitary(complete_unitary(cols, pos), "bulk", encoding, wire_dims(encoding), pos)


def purification(left: np.ndarray) -> np.ndarray:
    """``vec(l^{1/2}) / sqrt(Tr l)`` over (ancilla, bond); the ancilla marginal is ``l / Tr l``."""
    left = (left + left.conj().T) / 2
    w, v = np.linalg.eigh(left)
    if w.min() < -1e-10:
        raise ValueError(f"left fixed point is not positive semidefinite (min eig {w.min():.3e})")
    sq = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    vec = sq.reshape(-1)
    return vec / np.linalg.norm(vec)


def environment_unitary(tm, encoding: str) -> GateUnitary:
    """Gate on ``(ancilla, bond)`` whose designated column prepares the purification of ``l``."""
    left = tm.left if hasattr(tm, "left") else np.asarray(tm)
    psi = purification(left)
    if encoding in ("two-qubit", "three-qubit"):
        u = complete_unitary(psi[:, None], [0])
        return GateUnitary(u, "environment", encoding, (2, 2), (0,))
    if encoding == "two-qutrit":
        full = np.zeros(9, complex)
        for (a, b), amp in zip(itertools.product(range(2), range(2)), psi):
            full[3 * _QUTRIT_BOND[a] + _QUTRIT_BOND[b]] = amp
        col = 3 * _QUTRIT_DUMMY + _QUTRIT_DUMMY
        return GateUnitary(complete_unitary(full[:, None], [col]), "environment", encoding, (3, 3), (col,))
    raise ValueError(f"unknown encoding {encoding!r}")


# ---------------------------------------------------------------------------
# statevector simulation


class Statevector:
    """Dense state on mixed-dimension wires, all starting in level 0."""

    def __init__(self, dims: Sequence[int]):
        self.dims = tuple(dims)
        self.psi = np.zeros(self.dims, complex)
        self.psi[(0,) * len(dims)] = 1.0

    def set_level(self, wire: int, level: int) -> None:
        """Move wire ``wire`` from level 0 to ``level`` (only before it is touched)."""
        psi = np.moveaxis(self.psi, wire, 0)
        psi[[level, 0]] = psi[[0, level]]
        self.psi = np.moveaxis(psi, 0, wire)

    def apply(self, u: np.ndarray, wires: Sequence[int]) -> None:
        k = len(wires)
        dims = [self.dims[w] for w in wires]
        g = u.reshape(dims + dims)
        psi = np.tensordot(g, self.psi, axes=(list(range(k, 2 * k)), list(wires)))
        self.psi = np.moveaxis(psi, list(range(k)), list(wires))

    def reduced(self, keep: Sequence[int]) -> np.ndarray:
        keep = list(keep)
        rest = [w for w in range(len(self.dims)) if w not in keep]
        a = np.transpose(self.psi, keep + rest).reshape(int(np.prod([self.dims[w] for w in keep])), -1)
        return a @ a.conj().T


@dataclass(frozen=True)
class StaircaseLayout:
    dims: tuple[int, ...]
    env_wires: tuple[int, ...]
    bulk_wires: tuple[tuple[int, ...], ...]  # per site, wires of the gate
    site_wires: tuple[tuple[int, ...], ...]  # per site, wires holding the outcome
    dummy_levels: dict = field(default_factory=dict)


def staircase_layout(encoding: str, L: int) -> StaircaseLayout:
    """Wires: ancilla, bond/site wires, and one final bond wire (ancillas are never measured)."""
    if encoding == "two-qubit":
        # 0 ancilla, 1..L sites, L+1 final bond
        bulk = tuple((j + 1, j) for j in range(1, L + 1))
        sites = tuple((j,) for j in range(1, L + 1))
        return StaircaseLayout((2,) * (L + 2), (0, 1), bulk, sites)
    if encoding == "three-qubit":
        # 0 ancilla, 1 initial bond, then qubit pairs; site j's pair is (bond_j, fresh) of its gate
        dims = (2,) * (2 * L + 2)
        bulk, sites = [], []
        bond = 1
        for j in range(L):
            f1, f2 = 2 + 2 * j, 3 + 2 * j
            bulk.append((f1, f2, bond))
            sites.append((f2, bond))
            bond = f1
        return StaircaseLayout(dims, (0, 1), tuple(bulk), tuple(sites))
    if encoding == "two-qutrit":
        bulk = tuple((j + 1, j) for j in range(1, L + 1))
        sites = tuple((j,) for j in range(1, L + 1))
        dummies = {w: _QUTRIT_DUMMY for w in range(L + 2)}
        return StaircaseLayout((3,) * (L + 2), (0, 1), bulk, sites, dummies)
    raise ValueError(f"unknown encoding {encoding!r}")


_MAX_L = {"two-qubit": 8, "three-qubit": 5, "two-qutrit": 5}


def prepare_state(bulk: GateUnitary, env: GateUnitary, L: int) -> tuple[Statevector, StaircaseLayout]:
    enc = bulk.encoding
    if L < 1:
        raise ValueError("L must be positive")
    if L > _MAX_L[enc]:
        raise CircuitSizeError(f"L={L} exceeds the statevector limit {_MAX_L[enc]} for {enc}")
    lay = staircase_layout(enc, L)
    sv = Statevector(lay.dims)
    for w, lev in lay.dummy_levels.items():
        sv.set_level(w, lev)
    sv.apply(env.matrix, lay.env_wires)
    for wires in lay.bulk_wires:
        sv.apply(bulk.matrix, wires)
    return sv, lay


def _site_projector(encoding: str) -> np.ndarray:
    """Isometry from the encoded site space onto spin outcomes, rows in (+, o, -) order."""
    if encoding == "three-qubit":
        p = np.zeros((3, 4))
        p[np.arange(3), _PAIR_INDEX] = 1
        return p
    d = 2 if encoding == "two-qubit" else 3
    return np.eye(d)


def physical_density_matrix(sv: Statevector, lay: StaircaseLayout, encoding: str) -> tuple[np.ndarray, float]:
    """Reduced state of the measured sites in spin labels, and the weight lost outside the code space."""
    keep = [w for site in lay.site_wires for w in site]
    rho = sv.reduced(keep)
    p = _site_projector(encoding)
    big = p
    for _ in range(len(lay.site_wires) - 1):
        big = np.kron(big, p)
    out = big @ rho @ big.T
    return out, float(1 - np.trace(out).real)


def marginal_density_matrix(fam: MpsFamily, L: int) -> np.ndarray:
    """``rho[s, t] = Tr(l B_s r B_t^dagger)`` for the ``L``-site infinite-chain marginal."""
    tm = transfer_fixed_points(fam)
    b = tm.tensors
    d = b.shape[0]
    prods = np.array([np.eye(2, dtype=complex)])
    for _ in range(L):
        prods = np.einsum("xab,sbc->xsac", prods, b).reshape(-1, 2, 2)
    rho = np.einsum("ij,xjk,kl,yil->xy", tm.left, prods, tm.right, prods.conj())
    rho = (rho + rho.conj().T) / 2
    assert rho.shape == (d**L, d**L)
    return rho / np.trace(rho).real


def _psd_sqrtm(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity ``(Tr |sqrt(rho) sqrt(sigma)|)^2``."""
    s = np.linalg.svd(_psd_sqrtm(rho) @ _psd_sqrtm(sigma), compute_uv=False)
    return float(s.sum() ** 2)


def measured_distribution(rho: np.ndarray, d: int, L: int) -> np.ndarray:
    """Joint law of (uniform MUB configuration, outcome), shape ``((d+1)^L, d^L)``."""
    mubs = mub_set(d)
    out = np.empty(((d + 1) ** L, d**L))
    for idx, cfg in enumerate(itertools.product(range(d + 1), repeat=L)):
        u = np.array([[1.0]])
        for b in cfg:
            u = np.kron(u, mubs.rotation(b))
        out[idx] = np.einsum("ki,ij,kj->k", u, rho, u.conj()).real
    return out / len(out)


@dataclass(frozen=True)
class CircuitCheck:
    fidelity: float
    leakage: float
    circuit_distribution: np.ndarray
    marginal_distribution: np.ndarray | None = None

    @property
    def tv_distance(self) -> float:
        if self.marginal_distribution is None:
            return float("nan")
        return float(np.abs(self.circuit_distribution - self.marginal_distribution).sum() / 2)


def simulate_and_verify(
    fam: MpsFamily,
    L: int,
    encoding: str | None = None,
    bulk: GateUnitary | None = None,
    env: GateUnitary | None = None,
    *,
    distributions: bool = True,
) -> CircuitCheck:
    """Run the staircase circuit and compare with the transfer-contraction marginal.

    ``fam`` must be right-canonical unless both gates are given.
    """
    if encoding is None:
        encoding = bulk.encoding if bulk is not None else ("two-qubit" if fam.d == 2 else "two-qutrit")
    if bulk is None:
        bulk = unitarize(fam, encoding)
    if env is None:
        env = environment_unitary(transfer_fixed_points(fam), encoding)
    sv, lay = prepare_state(bulk, env, L)
    rho_c, leak = physical_density_matrix(sv, lay, encoding)
    rho_m = marginal_density_matrix(fam, L)
    f = fidelity(rho_c, rho_m)
    dist_c = measured_distribution(rho_c, fam.d, L) if distributions else np.zeros((0, 0))
    dist_m = exact_distribution(fam, L) if distributions else None
    return CircuitCheck(f, leak, dist_c, dist_m)


# ---------------------------------------------------------------------------
# gate lists


@dataclass(frozen=True)
class Gate:
    name: str  # R, RZ, XX, CINC
    wires: tuple[int, ...]
    params: tuple[float, ...] = ()


GATE_ARITY = {"R": (1, 2), "RZ": (1, 1), "XX": (2, 1), "CINC": (2, 0)}
ENTANGLING = ("XX", "CINC")


@dataclass(frozen=True)
class GateList:
    gates: tuple[Gate, ...]
    n_wires: int
    wire_dim: int = 2

    def __post_init__(self):
        for g in self.gates:
            if g.name not in GATE_ARITY:
                raise ValueError(f"unknown gate {g.name!r}")
            nw, npar = GATE_ARITY[g.name]
            if len(g.wires) != nw or len(g.params) != npar:
                raise ValueError(f"gate {g.name} needs {nw} wires and {npar} parameters")
            if any(not 0 <= w < self.n_wires for w in g.wires) or len(set(g.wires)) != nw:
                raise ValueError(f"invalid wires {g.wires} for {self.n_wires} wires")
            if not all(np.isfinite(g.params)):
                raise ValueError(f"non-finite angle in {g}")
            if (g.name == "CINC") != (self.wire_dim == 3):
                raise ValueError(f"gate {g.name} does not act on wires of dimension {self.wire_dim}")

    def __len__(self) -> int:
        return len(self.gates)


def r_matrix(theta: float, phi: float) -> np.ndarray:
    """``exp(-i theta/2 (X cos phi + Y sin phi))``."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s * np.exp(-1j * phi)], [-1j * s * np.exp(1j * phi), c]])


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def xx_matrix(theta: float) -> np.ndarray:
    xx = np.fliplr(np.eye(4))
    return np.cos(theta / 2) * np.eye(4) - 1j * np.sin(theta / 2) * xx


def cinc_matrix() -> np.ndarray:
    """``|q, k> -> |q, k+1 mod 3>`` if ``q = 2`` (control first)."""
    u = np.zeros((9, 9))
    for q, k in itertools.product(range(3), repeat=2):
        u[3 * q + ((k + 1) % 3 if q == 2 else k), 3 * q + k] = 1
    return u


def gate_matrix(g: Gate) -> np.ndarray:
    if g.name == "R":
        return r_matrix(*g.params)
    if g.name == "RZ":
        return rz_matrix(*g.params)
    if g.name == "XX":
        return xx_matrix(*g.params)
    return cinc_matrix()


def gatelist_unitary(gl: GateList) -> np.ndarray:
    dim = gl.wire_dim**gl.n_wires
    u = np.eye(dim, dtype=complex).reshape((gl.wire_dim,) * gl.n_wires + (dim,))
    for g in gl.gates:
        k = len(g.wires)
        m = gate_matrix(g).reshape((gl.wire_dim,) * (2 * k))
        u = np.tensordot(m, u, axes=(list(range(k, 2 * k)), list(g.wires)))
        u = np.moveaxis(u, list(range(k)), list(g.wires))
    return u.reshape(dim, dim)


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min_phi ||a - e^{i phi} b||_2``."""
    ov = np.vdot(b, a)
    ph = ov / abs(ov) if abs(ov) > 1e-300 else 1.0
    return float(np.linalg.norm(a - ph * b, 2))


def _decompose_su2(u: np.ndarray) -> tuple[float, float, float]:
    """``(theta, phi, lam)`` with ``u ~ R(theta, phi) RZ(lam)`` up to global phase, ``theta`` in ``[0, pi]``."""
    u = u / np.sqrt(np.linalg.det(u))
    c = abs(u[0, 0])
    # atan2 keeps small angles accurate where arccos loses half the digits
    theta = 2 * np.arctan2(abs(u[1, 0]), c)
    if c > 1e-12:
        lam = -2 * np.angle(u[0, 0])
    else:
        lam = 0.0
    phi = np.angle(u[1, 0]) + np.pi / 2 + lam / 2 if np.sin(theta / 2) > 1e-12 else 0.0
    return float(theta), float(np.angle(np.exp(1j * phi))), float(np.angle(np.exp(1j * lam)))


def _merge_run(run: list[Gate]) -> list[Gate]:
    if len(run) < 2:
        return run
    wire = run[0].wires
    if all(g.name == "R" for g in run) and len({g.params[1] for g in run}) == 1:
        return [Gate("R", wire, (float(sum(g.params[0] for g in run)), run[0].params[1]))]
    u = np.eye(2, dtype=complex)
    for g in run:
        u = gate_matrix(g) @ u
    theta, phi, lam = _decompose_su2(u)
    out = []
    if abs(lam) > 1e-12:
        out.append(Gate("RZ", wire, (lam,)))
    out.append(Gate("R", wire, (theta, phi)))
    return out


def merge_single_qubit(gl: GateList) -> GateList:
    """Pass 2: each maximal same-wire run of single-qubit gates becomes one RZ and one R."""
    if gl.wire_dim != 2:
        return gl
    out: list[Gate] = []
    pending: dict[int, list[Gate]] = {}

    def flush(w):
        out.extend(_merge_run(pending.pop(w, [])))

    for g in gl.gates:
        if len(g.wires) == 1:
            pending.setdefault(g.wires[0], []).append(g)
        else:
            for w in g.wires:
                flush(w)
            out.append(g)
    for w in sorted(pending):
        flush(w)
    return GateList(tuple(out), gl.n_wires, gl.wire_dim)


def drop_small_rotations(gl: GateList, threshold: float = 1e-3) -> GateList:
    """Pass 3: remove ``R(theta, phi)`` with ``|theta| < threshold``."""
    keep = tuple(g for g in gl.gates if not (g.name == "R" and abs(g.params[0]) < threshold))
    return GateList(keep, gl.n_wires, gl.wire_dim)


def split_short_pulses(gl: GateList, threshold: float = np.pi / 15) -> GateList:
    """Pass 4: ``R(theta, phi)`` with ``|theta| < threshold`` becomes ``R(theta + pi, phi), R(-pi, phi)``."""
    out: list[Gate] = []
    for g in gl.gates:
        if g.name == "R" and abs(g.params[0]) < threshold:
            th, ph = g.params
            out.append(Gate("R", g.wires, (th + np.pi, ph)))
            out.append(Gate("R", g.wires, (-np.pi, ph)))
        else:
            out.append(g)
    return GateList(tuple(out), gl.n_wires, gl.wire_dim)


def transpile(gl: GateList) -> GateList:
    """Passes 2, 3 and 4 in order; entangling gates are left in place."""
    return split_short_pulses(drop_small_rotations(merge_single_qubit(gl)))


def count_entangling(gl: GateList) -> int:
    return sum(g.name in ENTANGLING for g in gl.gates)


def gate_budget(encoding: str, role: str, g: float | None = None) -> tuple[int, int]:
    """Reference entangling-gate range for a gate role."""
    lo, hi = GATE_BUDGET[(encoding, role)]
    if g is not None and encoding == "two-qubit" and role == "environment":
        return (1, 1) if g <= 0 else (2, 2)
    if g is not None and encoding == "three-qubit" and role == "bulk":
        return (8, 8) if np.isclose(g, -1) else (9, 9)
    return lo, hi


def within_budget(gl: GateList, encoding: str, role: str, g: float | None = None) -> bool:
    lo, hi = gate_budget(encoding, role, g)
    return lo <= count_entangling(gl) <= hi


# ---------------------------------------------------------------------------
# serialization

GATELIST_VERSION = 1


def gatelist_to_json(gl: GateList) -> str:
    doc = {
        "v": GATELIST_VERSION,
        "n_wires": gl.n_wires,
        "wire_dim": gl.wire_dim,
        "gates": [{"name": g.name, "wires": list(g.wires), "params": list(g.params)} for g in gl.gates],
    }
    return json.dumps(doc, indent=2)


def gatelist_from_json(text: str) -> GateList:
    doc = json.loads(text)
    if doc.get("v") != GATELIST_VERSION:
        raise ValueError(f"unsupported gate list version {doc.get('v')!r}")
    gates = tuple(Gate(g["name"], tuple(g["wires"]), tuple(float(p) for p in g["params"])) for g in doc["gates"])
    return GateList(gates, int(doc["n_wires"]), int(doc.get("wire_dim", 2)))


def unitary_to_json(u: GateUnitary) -> str:
    cols = [[[float(z.real), float(z.imag)] for z in col] for col in u.matrix.T]
    doc = {
        "v": 1,
        "role": u.role,
        "encoding": u.encoding,
        "wire_dims": list(u.wire_dims),
        "designated": list(u.designated),
        "columns": cols,
    }
    return json.dumps(doc)


def unitary_from_json(text: str) -> GateUnitary:
    doc = json.loads(text)
    cols = np.array(doc["columns"], dtype=float)
    m = (cols[..., 0] + 1j * cols[..., 1]).T
    return GateUnitary(m, doc["role"], doc["encoding"], tuple(doc["wire_dims"]), tuple(doc["designated"]))
