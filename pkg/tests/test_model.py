import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gtagcdcf.ingest import DomainDataset
from gtagcdcf.model import (
    DivergenceError,
    FactorModel,
    Hyperparams,
    assemble_compact,
    compact_objective,
    gradients,
    load_model,
    objective,
    predict,
    predict_rating,
    save_model,
    stack_factors,
)
from gtagcdcf.sparse import SparseMatrix

from oracles import finite_difference, objective_loops, random_domains, random_model


def zero_model(domains, d=3, link="logistic"):
    return FactorModel([np.zeros((d, x.n_users)) for x in domains],
                       [np.zeros((d, x.n_items)) for x in domains],
                       np.zeros((d, domains[0].n_tags)), link)


def test_zero_factors_give_half_offsets(rng):
    doms = random_domains(rng, 2)
    h = Hyperparams(1.0, 1.0, 0.0)
    expected = 0.0
    for dom in doms:
        for m in (dom.R, dom.F_U, dom.F_V):
            expected += 0.5 * np.sum((m.values - 0.5) ** 2)
    assert objective(zero_model(doms), doms, h) == pytest.approx(expected, rel=1e-14)


def test_only_regularizer_without_entries(rng):
    doms = random_domains(rng, 2, empty=True)
    model = random_model(rng, doms, 3)
    S = sum(float((m ** 2).sum()) for m in (*model.U, *model.V, model.T))
    assert objective(model, doms, Hyperparams(0.3, 0.7, 1.0)) == pytest.approx(S / 2, rel=1e-14)


def test_matches_loop_oracle_on_spec_instance(rng):
    doms = []
    for k, (m, n) in enumerate([(3, 2), (2, 3)]):
        def rs(a, b):
            mask = rng.random((a, b)) < 0.7
            r, c = np.nonzero(mask)
            return SparseMatrix(r, c, rng.uniform(0.1, 1, r.size), (a, b))
        doms.append(DomainDataset(f"d{k}", rs(m, n), rs(m, 2), rs(n, 2),
                                  tuple(map(str, range(m))), tuple(map(str, range(n))), 5.0))
    model = random_model(rng, doms, 2)
    got = objective(model, doms, Hyperparams(0.5, 0.25, 0.01))
    assert abs(got - objective_loops(model, doms, 0.5, 0.25, 0.01)) < 1e-12


@pytest.mark.parametrize("seed", range(10))
def test_matches_loop_oracle_random(seed):
    rng = np.random.default_rng(seed)
    doms = random_domains(rng, int(rng.integers(1, 4)))
    link = ["logistic", "identity"][seed % 2]
    model = random_model(rng, doms, int(rng.integers(1, 5)), link)
    a, b, lam = rng.random(3)
    assert objective(model, doms, Hyperparams(a, b, lam)) == pytest.approx(
        objective_loops(model, doms, a, b, lam), rel=1e-12, abs=1e-12)


def check_gradients(model, doms, h):
    gUs, gVs, gT = gradients(model, doms, h)

    def f():
        return objective(model, doms, h)

    pairs = [(gU, U) for gU, U in zip(gUs, model.U)] + [(gV, V) for gV, V in zip(gVs, model.V)]
    pairs.append((gT, model.T))
    for analytic, param in pairs:
        numeric = finite_difference(f, param)
        err = np.abs(analytic - numeric)
        tol = np.maximum(1e-5 * np.abs(numeric), 1e-8)
        assert np.all(err <= tol), f"max error {err.max()}"


@pytest.mark.parametrize("seed", range(6))
def test_gradients_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    doms = random_domains(rng, int(rng.integers(1, 4)))
    model = random_model(rng, doms, int(rng.integers(1, 5)), ["logistic", "identity"][seed % 2], scale=0.5)
    check_gradients(model, doms, Hyperparams(*rng.random(3)))


def test_zero_weights_and_no_preferences_give_zero_gradients(rng):
    doms = random_domains(rng, 2, empty=True)
    gUs, gVs, gT = gradients(random_model(rng, doms, 3), doms, Hyperparams(0, 0, 0))
    for g in (*gUs, *gVs, gT):
        assert not g.any()


def test_identity_link_zero_factors_single_entry():
    R = SparseMatrix([0], [0], [1.0], (1, 1))
    dom = DomainDataset("d", R, SparseMatrix.empty((1, 1)), SparseMatrix.empty((1, 1)), ("u",), ("x",), 1.0)
    gUs, gVs, _ = gradients(zero_model([dom], d=2, link="identity"), [dom], Hyperparams(0, 0, 0))
    assert not gUs[0].any() and not gVs[0].any()


def test_zero_coupling_independence(rng):
    doms = random_domains(rng, 3)
    model = random_model(rng, doms, 3)
    h = Hyperparams(0.0, 0.0, 0.3)
    gUs, gVs, gT = gradients(model, doms, h)
    np.testing.assert_allclose(gT, 0.3 * model.T, rtol=0, atol=0)
    # domain 0's gradients do not change when the other domains lose their preferences
    swapped = [doms[0]] + [DomainDataset(d.name, SparseMatrix.empty(d.R.shape), d.F_U, d.F_V,
                                         d.user_ids, d.item_ids, 1.0) for d in doms[1:]]
    gUs2, gVs2, _ = gradients(model, swapped, h)
    np.testing.assert_array_equal(gUs[0], gUs2[0])
    np.testing.assert_array_equal(gVs[0], gVs2[0])


def test_objective_invariant_under_domain_permutation(rng):
    doms = random_domains(rng, 3)
    model = random_model(rng, doms, 2)
    h = Hyperparams(0.4, 0.6, 0.1)
    perm = [2, 0, 1]
    pm = FactorModel([model.U[p] for p in perm], [model.V[p] for p in perm], model.T, model.link)
    assert objective(pm, [doms[p] for p in perm], h) == pytest.approx(objective(model, doms, h), rel=1e-13)


def test_assemble_single_domain_is_identity(rng):
    doms = random_domains(rng, 1)
    R, FU, FV = assemble_compact(doms)
    assert R == doms[0].R and FU == doms[0].F_U and FV == doms[0].F_V


def test_assemble_block_offsets():
    R1 = SparseMatrix.from_triplets([(0, 0, 1.0), (1, 1, 0.5)], (2, 2))
    R2 = SparseMatrix.from_triplets([(0, 0, 0.2), (2, 0, 0.4)], (3, 1))
    e = SparseMatrix.empty

    def dom(R):
        return DomainDataset("d", R, e((R.n_rows, 1)), e((R.n_cols, 1)),
                             tuple(map(str, range(R.n_rows))), tuple(map(str, range(R.n_cols))), 1.0)

    R, FU, FV = assemble_compact([dom(R1), dom(R2)])
    assert R.shape == (5, 3) and FU.shape == (5, 1) and FV.shape == (3, 1)
    assert list(R.entries())[2:] == [(2, 2, 0.2), (4, 2, 0.4)]


@pytest.mark.parametrize("seed", range(5))
def test_compact_objective_equivalence(seed):
    rng = np.random.default_rng(seed)
    doms = random_domains(rng, int(rng.integers(1, 4)))
    model = random_model(rng, doms, 3)
    h = Hyperparams(*rng.random(3))
    U, V, T = stack_factors(model)
    assert abs(compact_objective(U, V, T, *assemble_compact(doms), h) - objective(model, doms, h)) < 1e-12


def one_user_item_model(u, v):
    return FactorModel([np.array(u, float).reshape(-1, 1)], [np.array(v, float).reshape(-1, 1)],
                       np.zeros((len(u), 1)))


@pytest.mark.parametrize("u,v,expected", [([0, 0], [0, 0], 0.0), ([1, 0], [0.5, 9], 0.5), ([2, 0], [1, 0], 1.0)])
def test_predict_raw_inner_product_clamped(u, v, expected):
    assert predict(one_user_item_model(u, v), 0, 0, 0) == expected


def test_predict_through_link():
    assert predict(one_user_item_model([0, 0], [0, 0]), 0, 0, 0, through_link=True) == 0.5


def test_predict_index_errors():
    with pytest.raises(IndexError):
        predict(one_user_item_model([1], [1]), 0, 1, 0)


@pytest.mark.parametrize("u,expected", [([0.5], 2.5), ([1.0], 5.0), ([0.0], 0.0)])
def test_predict_rating(u, expected):
    e = SparseMatrix.empty
    dom = DomainDataset("d", SparseMatrix([0], [0], [1.0], (1, 1)), e((1, 1)), e((1, 1)), ("u",), ("x",), 5.0)
    assert predict_rating(one_user_item_model(u, [1.0]), dom, 0, 0, 0) == expected
    implicit = DomainDataset("d", dom.R, dom.F_U, dom.F_V, ("u",), ("x",), 5.0, "implicit")
    with pytest.raises(ValueError):
        predict_rating(one_user_item_model(u, [1.0]), implicit, 0, 0, 0)


def test_divergence_detected(rng):
    doms = random_domains(rng, 1)
    model = random_model(rng, doms, 2, "identity")
    model.U[0][:] = 1e200
    with pytest.raises(DivergenceError):
        objective(model, doms, Hyperparams())


def test_shape_mismatch(rng):
    doms = random_domains(rng, 2)
    with pytest.raises(ValueError):
        objective(random_model(rng, doms[:1], 2), doms, Hyperparams())


def test_checkpoint_round_trip(tmp_path, rng):
    doms = random_domains(rng, 3)
    model = random_model(rng, doms, 4, "identity")
    path = tmp_path / "m.gtc"
    save_model(model, path)
    back = load_model(path)
    assert back.link == "identity"
    for a, b in zip((*model.U, *model.V, model.T), (*back.U, *back.V, back.T)):
        np.testing.assert_array_equal(a, b)
    raw = path.read_bytes()
    assert raw.startswith(b"GTAGCDCF/1\n")
    path.write_bytes(raw[:-8])
    with pytest.raises(ValueError, match="truncated"):
        load_model(path)
    path.write_bytes(raw + b"\0")
    with pytest.raises(ValueError, match="trailing"):
        load_model(path)
    path.write_bytes(b"nope")
    with pytest.raises(ValueError, match="not a model"):
        load_model(path)


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["logistic", "identity"]))
@settings(max_examples=25, deadline=None)
def test_objective_nonnegative_and_predictions_in_unit_interval(seed, link):
    rng = np.random.default_rng(seed)
    doms = random_domains(rng, int(rng.integers(1, 4)))
    model = random_model(rng, doms, 3, link)
    assert objective(model, doms, Hyperparams(*rng.random(3))) >= 0
    for k, dom in enumerate(doms):
        for i in range(dom.n_users):
            for j in range(dom.n_items):
                assert 0.0 <= predict(model, k, i, j) <= 1.0
