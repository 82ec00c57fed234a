"""End-to-end acceptance checks, one test per criterion.

Each test records a ``PASS``/``FAIL`` line (with timing) that the terminal
summary prints after the run; the assertion then enforces the criterion at
its stated tolerance.  The synthetic pipelines are driven by the config files
under ``configs/``.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
import pytest

from tkphase import circuits, mps, pipeline, sampler, shadows
from conftest import GRID5, record_acceptance

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def check(label: str, ok: bool, detail: str, elapsed: float, limit: float | None = None) -> None:
    within = limit is None or elapsed < limit
    budget = f" (limit {limit:.0f}s)" if limit is not None else ""
    record_acceptance(f"{'PASS' if ok and within else 'FAIL'} {label}: {detail}; {elapsed:.1f}s{budget}")
    assert ok, detail
    assert within, f"{label} took {elapsed:.1f}s, limit {limit}s"


def config(name: str, **overrides) -> pipeline.RunConfig:
    return pipeline.load_config(CONFIGS / f"{name}.cfg", **overrides)


# ------------------------------------------------------------------------ 1

# closed-form string orders: -4g/(1-g)^2 (spin-half), -(16/9)g/(1-g)^2 (spin-one), zero for g >= 0
STRING_ORDER = {
    "spin-half": {-1.0: 1.0, -0.5: 8 / 9, 0.0: 0.0, 0.5: 0.0, 1.0: 0.0},
    "spin-one": {-1.0: 4 / 9, -0.5: 32 / 81, 0.0: 0.0, 0.5: 0.0, 1.0: 0.0},
}


def test_c1_closed_form_string_orders():
    t0 = time.perf_counter()
    worst_closed, worst_contract, worst_pair = 0.0, 0.0, 0.0
    for family, values in STRING_ORDER.items():
        for g in GRID5:
            rep = pipeline.cmd_analytic(family, g)
            worst_closed = max(worst_closed, abs(rep["closed_form"] - values[g]))
            worst_contract = max(worst_contract, rep["max_deviation"])
            if family == mps.SPIN_ONE:
                checks = rep["squared_vs_phase"]
                assert sorted(checks) == [3, 4, 5, 6]
                worst_pair = max(worst_pair, max(c["difference"] for c in checks.values()))
    elapsed = time.perf_counter() - t0
    ok = worst_closed < 1e-15 and worst_contract < 1e-10 and worst_pair < 1e-10
    detail = (
        f"closed form off by {worst_closed:.1e}, contractions by {worst_contract:.1e}, "
        f"squared vs phase string by {worst_pair:.1e}"
    )
    check("C1 closed-form string orders", ok, detail, elapsed, 1.0)


# ------------------------------------------------------------------------ 2


def exact_features(tm: mps.TransferMatrix, n: int, r: int, basis: mps.OperatorBasis) -> np.ndarray:
    return np.array(
        [
            mps.expectation(tm, [(s, basis.matrices[a]) for s, a in zip(sites, ops)])
            for sites, ops in shadows.component_labels(n, r, len(basis))
        ]
    )


def test_c2_shadow_unbiasedness():
    worst_z, within2, total, slowest = 0.0, 0, 0, 0.0
    for family in mps.FAMILIES:
        basis = mps.operator_basis(mps.local_dim(family))
        table = shadows.build_table(basis, shadows.mub_set(basis.d))
        L = 5 if family == mps.SPIN_HALF else 3
        for k, g in enumerate(GRID5):
            t0 = time.perf_counter()
            fam = mps.right_canonicalize(mps.build_family(family, g))
            tm = mps.transfer_fixed_points(fam)
            ss = sampler.sample_mub(fam, L, 100_000, 2024 + k)
            for r in (1, 2):
                fv = shadows.feature_vector(ss, L, r, table, "single", with_stderr=True)
                exact = exact_features(tm, L, r, basis)
                err = np.abs(fv.values - exact)
                se = fv.stderr
                # zero-variance features (product states) agree to rounding, where SE is meaningless
                z = np.where(err <= 1e-12, 0.0, err / np.maximum(se, 1e-300))
                worst_z = max(worst_z, float(z.max()))
                within2 += int((z <= 2).sum())
                total += len(z)
            slowest = max(slowest, time.perf_counter() - t0)
    frac = within2 / total
    ok = worst_z <= 5 and frac >= 0.95
    detail = f"{total} features, max |dev| = {worst_z:.2f} SE, {100 * frac:.1f}% within 2 SE"
    check("C2 shadow unbiasedness", ok, detail, slowest, 120.0)


# ------------------------------------------------------------------------ 3


def test_c3_sampler_circuit_consistency():
    t0 = time.perf_counter()
    tv = []
    for family, g, encoding in [
        ("spin-half", -1.0, None),
        ("spin-half", 0.0, None),
        ("spin-half", 1.0, None),
        ("spin-one", -1.0, "two-qutrit"),
    ]:
        fam = mps.right_canonicalize(mps.build_family(family, g))
        tv.append(circuits.simulate_and_verify(fam, 3, encoding).tv_distance)
    infidelity = 0.0
    for g in np.round(np.linspace(-1, 1, 21), 12):
        fam = mps.right_canonicalize(mps.build_family("spin-half", float(g)))
        res = circuits.simulate_and_verify(fam, 5, distributions=False)
        infidelity = max(infidelity, 1 - res.fidelity)
    elapsed = time.perf_counter() - t0
    ok = max(tv) < 1e-10 and infidelity <= 1e-10
    detail = f"max TV {max(tv):.1e}, worst infidelity over 21 points {infidelity:.1e}"
    check("C3 sampler/circuit consistency", ok, detail, elapsed, 60.0)


# ------------------------------------------------------------------------ 4


def boundary_violations(grid: np.ndarray, part) -> list[float]:
    """Vertices (g != 0) that are ambiguous or on the wrong side, for the better orientation."""
    side = np.sign(grid)
    bad = []
    for orient in (1, -1):
        wrong = [
            float(g)
            for g, s, lab, amb in zip(grid, side, part.labels, part.ambiguous)
            if s != 0 and (amb or orient * lab != s)
        ]
        bad.append(wrong)
    return min(bad, key=len)


def allowed(bad: list[float], grid: np.ndarray) -> bool:
    step = float(np.min(np.diff(grid)))
    return len(bad) <= 1 and all(abs(g) <= step + 1e-9 for g in bad)


@pytest.mark.slow
def test_c4_phase_diagram(tmp_path):
    t0 = time.perf_counter()
    runs = []
    half = config("phase-spin-half", output=str(tmp_path / "half"))
    pipeline.cmd_generate(half)
    pipeline.cmd_features(half)
    runs.append(("spin-half r3", half, pipeline.cmd_phase_graph(half)[3]))
    one = config("phase-spin-one-r1", output=str(tmp_path / "one"))
    pipeline.cmd_generate(one)
    pipeline.cmd_features(one)
    runs.append(("spin-one r1", one, pipeline.cmd_phase_graph(one, rank=1)[1]))
    one2 = config("phase-spin-one-r2", input=str(tmp_path / "one"), output=str(tmp_path / "one2"))
    runs.append(("spin-one r2", one2, pipeline.cmd_phase_graph(one2)[2]))
    elapsed = time.perf_counter() - t0
    parts, ok = [], True
    for name, cfg, part in runs:
        bad = boundary_violations(cfg.grid, part)
        ok &= allowed(bad, cfg.grid)
        parts.append(f"{name}: {len(bad)} off {bad}")
    check("C4 phase diagram", ok, "; ".join(parts), elapsed, 900.0)


# ------------------------------------------------------------------------ 5

# (family, n, rank, pool, features expected to lead the ranking)
INTERPRET_CASES = [
    ("spin-half", 5, 1, "positive", {f"X{j}" for j in range(1, 6)}),
    ("spin-half", 5, 3, "negative", {f"Z{j}.X{j + 1}.Z{j + 2}" for j in range(1, 4)}),
    ("spin-one", 3, 2, "negative", {"Tz1.Tz2", "Tz2.Tz3"}),
    ("spin-one", 3, 3, "negative", {"Tz1.Tzz2.Tz3"}),
]


@pytest.mark.slow
def test_c5_interpretability(tmp_path):
    t0 = time.perf_counter()
    prepared, parts, ok = set(), [], True
    for family, n, r, pool, expected in INTERPRET_CASES:
        ranks = (1, 3) if family == mps.SPIN_HALF else (2, 3)
        cfg = config("interpret", family=family, n=n, ranks=ranks, pool=pool, output=str(tmp_path / family))
        if family not in prepared:
            pipeline.cmd_generate(cfg)
            pipeline.cmd_features(cfg)
            prepared.add(family)
        res = pipeline.cmd_interpret(cfg, rank=r)
        top = {name for name, _ in res.ranked[: len(expected)]}
        case_ok = top == expected and res.top_to_median >= 3
        ok &= case_ok
        parts.append(f"{family} r{r}: top {res.ranked[0][0]}, ratio {res.top_to_median:.1f}{'' if case_ok else ' (!)'}")
    check("C5 interpretability", ok, "; ".join(parts), time.perf_counter() - t0)


# ------------------------------------------------------------------------ 6


@pytest.mark.slow
def test_c6_accuracy_methodology(tmp_path):
    t0 = time.perf_counter()
    rows = pipeline.cmd_accuracy(config("accuracy-spin-one", output=str(tmp_path)))
    elapsed = time.perf_counter() - t0
    acc = {row.budget: row for row in rows}
    monotone = True
    for a, b in zip(rows, rows[1:]):
        se = np.hypot(np.nan_to_num(a.stderr), np.nan_to_num(b.stderr))
        monotone &= b.accuracy + se >= a.accuracy
    final = acc[10_000].accuracy
    ok = bool(monotone) and final >= 0.99
    curve = ", ".join(f"{row.budget}:{row.accuracy:.3f}" for row in rows)
    check("C6 accuracy methodology", ok, f"accuracy by budget {curve}; monotone within error: {bool(monotone)}", elapsed)


# ------------------------------------------------------------------------ 7


def test_c7_cluster_averaging():
    t0 = time.perf_counter()
    table = shadows.build_table(mps.operator_basis(2), shadows.mub_set(2))
    medians, totals = {}, {}
    for g in GRID5:
        fam = mps.right_canonicalize(mps.build_family("spin-half", g))
        ss = sampler.sample_mub(fam, 72, 20_000, 7)
        single = shadows.snapshot_estimates(ss, 5, 1, table, "single").var(axis=0, ddof=1)
        overlap = shadows.snapshot_estimates(ss, 5, 1, table, "overlapping").var(axis=0, ddof=1)
        medians[g] = float(np.median(single / overlap))
        totals[g] = float(single.sum() / overlap.sum())
    elapsed = time.perf_counter() - t0
    ok = all(34 <= m <= 136 for m in medians.values())
    # the critical point's long-range correlations defeat averaging for a few components
    ok &= all(34 <= t <= 136 for g, t in totals.items() if g != 0)
    detail = "median factor " + ", ".join(f"g={g:g}: {m:.1f}" for g, m in medians.items())
    detail += f"; total-variance factor at g=0: {totals[0.0]:.1f}"
    check("C7 cluster averaging", ok, detail, elapsed)


# ------------------------------------------------------------------------ 8


def test_c8_solver_and_measurement_suites():
    from test_svm import primal_oracle, random_instance
    from tkphase import svm

    t0 = time.perf_counter()
    gap = 0.0
    for seed in range(25):
        xa, xb, C = random_instance(seed)
        model = svm.train(xa, xb, C, tol=1e-9)
        x = np.vstack([xa, xb])
        y = np.concatenate([-np.ones(len(xa)), np.ones(len(xb))])
        gap = max(gap, abs(svm.primal_objective(model.weights, model.bias, x, y, C) - primal_oracle(x, y, C)))
    worst = 0.0
    rng = np.random.default_rng(8)
    for d in (2, 3):
        m = shadows.mub_set(d)
        for b1 in range(d + 1):
            for b2 in range(d + 1):
                ov = np.abs(m.vectors[b1].conj() @ m.vectors[b2].T) ** 2
                worst = max(worst, np.abs(ov - (np.eye(d) if b1 == b2 else 1 / d)).max())
        worst = max(worst, np.abs(m.projectors.sum(axis=0) / (d + 1) - np.eye(d)).max())
        for _ in range(200):
            a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            a = a + a.conj().T
            inverse = (d + 1) * a - np.trace(a) * np.eye(d)
            worst = max(worst, np.abs(shadows.shadow_channel(inverse) - a).max() / max(1, np.abs(a).max()))
        # inverted snapshots average back to a random density matrix
        a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = a @ a.conj().T / np.trace(a @ a.conj().T)
        born = np.einsum("kij,ji->k", m.projectors, rho).real
        snaps = np.array([shadows.invert_channel(p) for p in m.projectors])
        worst = max(worst, np.abs(np.einsum("k,kij->ij", born, snaps) / (d + 1) - rho).max())
    elapsed = time.perf_counter() - t0
    ok = gap < 1e-4 and worst < 1e-12
    check("C8 solver and measurement suites", ok, f"max primal gap {gap:.1e}, MUB/POVM/channel {worst:.1e}", elapsed)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
