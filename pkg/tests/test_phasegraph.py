import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tkphase import phasegraph as pg
from tkphase import svm

# ------------------------------------------------------------------ weights


@given(st.floats(0, 50), st.floats(0, 50), st.floats(0.01, 10))
def test_one_sided_weight_monotone(b1, b2, gamma):
    lo, hi = sorted((b1, b2))
    assert pg.lorentzian_weight(lo, gamma) <= pg.lorentzian_weight(hi, gamma) + 1e-15


@pytest.mark.parametrize("weighting", pg.WEIGHTINGS)
def test_weight_reference_values(weighting):
    assert pg.lorentzian_weight(1.0, 0.7, weighting) == 0.0
    assert abs(pg.lorentzian_weight(1.7, 0.7, weighting) - 0.5) < 1e-15
    assert pg.lorentzian_weight(1e9, 0.7, weighting) > 1 - 1e-12
    assert pg.lorentzian_weight(np.inf, 0.7, weighting) == 1.0


def test_one_and_two_sided_differ_below_one():
    assert pg.lorentzian_weight(0.2, 1.0, "one-sided") == 0.0
    assert abs(pg.lorentzian_weight(0.2, 1.0, "two-sided") - 0.64 / 1.64) < 1e-15


def test_weight_errors():
    with pytest.raises(ValueError):
        pg.lorentzian_weight(2.0, 0.0)
    with pytest.raises(ValueError):
        pg.lorentzian_weight(2.0, 1.0, "cosine")
    with pytest.raises(ValueError):
        pg.lorentzian_weight(-0.1)


@given(st.integers(2, 12), st.integers(0, 10_000), st.sampled_from(pg.WEIGHTINGS))
def test_weight_matrix_properties(n, seed, weighting):
    rng = np.random.default_rng(seed)
    b = np.abs(rng.normal(scale=3, size=(n, n)))
    b = (b + b.T) / 2
    w = pg.weight_matrix(b, 0.5, weighting)
    assert np.array_equal(w, w.T)
    assert np.all(np.diag(w) == 0)
    assert np.all((w >= 0) & (w <= 1))
    lap = pg.laplacian(w)
    assert np.abs(lap.sum(axis=1)).max() < 1e-12
    assert abs(np.linalg.eigvalsh(lap)[0]) < 1e-10


def test_failed_pairs_have_zero_weight():
    b = np.full((3, 3), 10.0)
    failed = np.zeros((3, 3), bool)
    failed[0, 2] = failed[2, 0] = True
    w = pg.weight_matrix(pg.BiasMatrix(b, failed), 1.0)
    assert w[0, 2] == w[2, 0] == 0.0 and w[0, 1] > 0.9
    b[1, 2] = b[2, 1] = np.nan
    assert pg.weight_matrix(b)[1, 2] == 0.0


# ------------------------------------------------------------------ Fiedler


def two_cliques(eps=0.01):
    w = np.array([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], float)
    w[1, 2] = w[2, 1] = eps
    return w


def test_fiedler_two_cliques():
    f, lam = pg.fiedler_vector(two_cliques())
    assert np.sign(f).tolist() == [1, 1, -1, -1]
    assert lam > 0
    disconnected, lam0 = pg.fiedler_vector(two_cliques(0.0))
    np.testing.assert_allclose(disconnected, [0.5, 0.5, -0.5, -0.5], atol=1e-12)
    assert abs(lam0) < 1e-12


def test_fiedler_complete_graph_degenerate():
    w = np.ones((5, 5)) - np.eye(5)
    with pytest.raises(pg.GraphDegeneracyError) as exc:
        pg.fiedler_vector(w)
    assert isinstance(exc.value, ArithmeticError)


@given(st.integers(3, 12), st.integers(0, 10_000))
def test_fiedler_is_unit_and_orthogonal_to_ones(n, seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(size=(n, n))
    w = (w + w.T) / 2
    np.fill_diagonal(w, 0)
    f, lam = pg.fiedler_vector(w)
    assert abs(np.linalg.norm(f) - 1) < 1e-12 and abs(f.sum()) < 1e-10
    lap = pg.laplacian(w)
    assert np.abs(lap @ f - lam * f).max() < 1e-9
    assert abs(lam - np.linalg.eigvalsh(lap)[1]) < 1e-9


@given(st.integers(3, 10), st.integers(0, 10_000))
def test_fiedler_relabeling_invariance(n, seed):
    rng = np.random.default_rng(seed)
    w = rng.uniform(size=(n, n))
    w = (w + w.T) / 2
    np.fill_diagonal(w, 0)
    perm = rng.permutation(n)
    f, _ = pg.fiedler_vector(w)
    fp, _ = pg.fiedler_vector(w[np.ix_(perm, perm)])
    np.testing.assert_allclose(pg.align_sign(fp, f[perm]), f[perm], atol=1e-8)


# ---------------------------------------------------------------- jackknife


def test_jackknife_se_formula():
    assert np.all(pg.jackknife_se(np.ones((6, 3))) == 0)
    reps = np.array([[1.0], [2.0], [3.0]])
    assert abs(pg.jackknife_se(reps)[0] - np.sqrt(2 / 3 * 2)) < 1e-15
    with pytest.raises(ValueError):
        pg.jackknife_se(np.ones((1, 3)))


# nearby sets far from the origin give |b| >> 1 (same phase); the cross pairs stay near 1
PHASE_CENTRES = (1.0, 1.1, 6.0, 6.2)


def small_sets(seed=0, n_vec=4):
    rng = np.random.default_rng(seed)
    centres = [0.0, 0.2, 2.0, 2.3]
    return [rng.normal(size=(n_vec, 3)) * 0.3 + c for c in centres]


def brute_force_graph(sets, C, gamma, tol, weighting, drop=None):
    fs = list(sets)
    if drop is not None:
        i, k = drop
        fs[i] = np.delete(fs[i], k, axis=0)
    return pg.fiedler_vector(pg.weight_matrix(pg.bias_matrix(fs, C, tol), gamma, weighting))[0]


@pytest.mark.parametrize("weighting", pg.WEIGHTINGS)
def test_exact_jackknife_matches_full_retraining(weighting):
    sets = small_sets()
    C, gamma, tol = 2.0, 0.5, 1e-10
    graph = pg.build_graph(range(4), sets, C, gamma, tol, weighting=weighting)
    base = brute_force_graph(sets, C, gamma, tol, weighting)
    np.testing.assert_allclose(graph.fiedler, base, atol=1e-8)
    reps = [
        pg.align_sign(brute_force_graph(sets, C, gamma, tol, weighting, (i, k)), base)
        for i in range(4)
        for k in range(4)
    ]
    np.testing.assert_allclose(graph.errors, pg.jackknife_se(np.array(reps)), atol=1e-7)


def test_block_jackknife_with_singleton_blocks_equals_per_vector():
    sets = small_sets(1)
    per_vector = pg.build_graph(range(4), sets, 2.0, 0.5, 1e-10)
    blocks = pg.build_graph(range(4), sets, 2.0, 0.5, 1e-10, jackknife_blocks=4)
    np.testing.assert_allclose(blocks.errors, per_vector.errors, atol=1e-7)
    with pytest.raises(ValueError):
        pg.build_graph(range(4), sets, jackknife_blocks=5)


def test_identical_replicates_have_zero_error():
    # hard margin on repeated points: dropping a copy leaves the optimum unchanged
    sets = [np.repeat([[x, 0.0, 0.0]], 4, axis=0) for x in PHASE_CENTRES]
    graph = pg.build_graph(range(4), sets, 100.0, 0.5, 1e-10)
    assert np.sign(graph.fiedler).tolist() == [1, 1, -1, -1]
    assert np.abs(graph.errors).max() < 1e-8


def test_jackknife_errors_interface():
    sets = [np.zeros((3, 2))] * 2
    ref = np.array([1.0, -1.0]) / np.sqrt(2)
    err = pg.jackknife_errors(sets, lambda fs, i, k: -ref if k == 0 else ref, ref)
    assert np.all(err == 0)  # replicates are sign-aligned first
    err = pg.jackknife_errors(sets, lambda fs, i, k: ref * (1 + 0.1 * (i == 0 and k == 0)), ref)
    assert np.all(err > 0) and np.all(np.isfinite(err))
    with pytest.raises(ValueError):
        pg.jackknife_errors([np.zeros((2, 2))] * 2, lambda *a: ref, ref)


def test_partition_and_ambiguity():
    rng = np.random.default_rng(2)
    sets = [rng.normal(size=(6, 3)) * 0.01 + [x, 0, 0] for x in PHASE_CENTRES]
    graph = pg.build_graph([-1, -0.5, 0.5, 1], sets, 100.0, 0.5, 1e-8)
    part = pg.fiedler_partition(graph)
    assert part.labels[0] == part.labels[1] != part.labels[2] == part.labels[3]
    assert not part.ambiguous.any()
    fake = pg.PhaseGraph(graph.vertices, graph.bias, graph.weights, graph.fiedler, graph.fiedler_value,
                         np.full(4, 10.0))
    assert pg.fiedler_partition(fake).ambiguous.all()


def test_failed_training_recorded(monkeypatch):
    sets = small_sets(3)
    real = svm.train

    def flaky(fa, fb, C, tol, **kw):
        if np.allclose(fa, sets[0]) and np.allclose(fb, sets[3]):
            raise svm.ConvergenceError("forced", 1.0, 1)
        return real(fa, fb, C, tol, **kw)

    monkeypatch.setattr(svm, "train", flaky)
    bm = pg.bias_matrix(sets, 2.0, 1e-8)
    assert bm.failed[0, 3] and bm.failed[3, 0] and bm.failed.sum() == 2
    assert bm.values[0, 3] == 1.0 and (0, 3) in bm.notes
    assert pg.weight_matrix(bm)[0, 3] == 0.0


def test_bias_matrix_validation():
    with pytest.raises(ValueError):
        pg.bias_matrix([np.zeros((3, 2))])
    with pytest.raises(ValueError):
        pg.bias_matrix([np.zeros((3, 2)), np.zeros((1, 2))])


# ------------------------------------------------------------ serialization


def test_csv_round_trip_and_outputs():
    sets = small_sets(4)
    graph = pg.build_graph([-1.0, -0.5, 0.5, 1.0], sets, 2.0, 0.5, 1e-8)
    text = pg.edges_csv(graph)
    assert text.splitlines()[0] == "g_i,g_j,abs_b,w,failed"
    assert len(text.splitlines()) == 1 + 6
    back = pg.read_edges_csv(text)
    np.testing.assert_array_equal(back.vertices, graph.vertices)
    np.testing.assert_array_equal(back.bias, graph.bias)
    np.testing.assert_array_equal(back.weights, graph.weights)
    np.testing.assert_allclose(pg.fiedler_partition(back).fiedler, graph.fiedler, atol=1e-12)

    import json

    doc = json.loads(pg.summary_json(graph))
    assert doc["v"] == 1 and len(doc["fiedler"]) == 4 and len(doc["errors"]) == 4
    assert set(doc["labels"]) == {-1, 1}
    dot = pg.to_dot(graph)
    assert dot.startswith("graph phases {") and dot.count("--") == int((graph.weights[np.triu_indices(4, 1)] > 0).sum())
