import numpy as np
import pytest
from scipy.optimize import minimize, minimize_scalar

from vtrack.errors import DimensionMismatch, NonFiniteGradient, SolverFailure, TrueBoxMissing
from vtrack.geometry import Box
from vtrack.observation import (LinearModel, LogisticRegression, ObservationConfig, ObservationKind,
                                OnlineSVM, RidgeRegression, RidgeStats, StructuredSVM, TrainingBatch,
                                hinge_objective, load_model, lr_gradient, lr_loss, lr_score, lr_update,
                                make_model, ridge_score, ridge_solve, ridge_update, sosvm_score,
                                sosvm_update, structured_loss, svm_score, svm_update)


def random_batch(rng, d=6, n_pos=8, n_neg=12, sep=1.0):
    return TrainingBatch(rng.normal(sep, 1.0, (n_pos, d)), rng.normal(-sep, 1.0, (n_neg, d)))


# ---------------------------------------------------------------- logistic

def test_lr_score_examples(rng):
    x = rng.normal(size=5)
    assert lr_score(LinearModel(np.zeros(5), 0.0), x) == 0.5
    assert lr_score(LinearModel(np.zeros(5), 20.0), x) > 0.999
    w, b = rng.normal(size=5), 0.3
    assert lr_score(LinearModel(w, b), x) == pytest.approx(1 / (1 + np.exp(-(w @ x + b))), abs=1e-12)
    with pytest.raises(DimensionMismatch):
        lr_score(LinearModel(w, b), np.ones(4))


def test_lr_single_step_example(rng):
    x = rng.normal(size=4)
    m = LogisticRegression(np.zeros(4), 0.0, lam=0.0, eta0=0.3)
    out = lr_update(m, TrainingBatch(x[None], np.zeros((0, 4))), 1)
    np.testing.assert_allclose(out.w, 0.5 * 0.3 * x, atol=1e-15)
    assert out.b == pytest.approx(0.5 * 0.3)
    assert m.t == 0 and out.t == 1  # lr_update leaves its input untouched


def test_lr_gradient_matches_finite_differences(rng):
    h = 1e-5
    for _ in range(100):
        d, n = rng.integers(2, 8), rng.integers(1, 12)
        w, b = rng.normal(size=d), rng.normal()
        X, y = rng.normal(size=(n, d)), rng.integers(0, 2, n).astype(float)
        gw, gb = lr_gradient(w, b, X, y, 0.1)
        num = np.array([(lr_loss(w + h * e, b, X, y, 0.1) - lr_loss(w - h * e, b, X, y, 0.1)) / (2 * h)
                        for e in np.eye(d)])
        num_b = (lr_loss(w, b + h, X, y, 0.1) - lr_loss(w, b - h, X, y, 0.1)) / (2 * h)
        g, ng = np.append(gw, gb), np.append(num, num_b)
        assert np.linalg.norm(g - ng) / max(np.linalg.norm(ng), 1e-12) < 1e-5


def test_lr_separable_toy_reaches_full_accuracy():
    rng = np.random.default_rng(0)
    pos = rng.uniform(0.5, 2.0, (20, 2))
    neg = -rng.uniform(0.5, 2.0, (20, 2))
    m = LogisticRegression(lam=1e-3, eta0=1.0).fit(TrainingBatch(pos, neg), 50)
    assert np.all(m.score(pos) > 0.5) and np.all(m.score(neg) < 0.5)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_lr_non_finite_rejected():
    m = LogisticRegression()
    with pytest.raises(NonFiniteGradient):
        m.fit(TrainingBatch(np.array([[np.inf, 1.0]]), np.array([[0.0, 1.0]])), 1)


def test_lr_minibatches_count_steps(rng):
    m = LogisticRegression(batch_size=10).fit(random_batch(rng, n_pos=15, n_neg=15), 2, rng)
    assert m.t == 6


# ---------------------------------------------------------------- ridge

def test_ridge_unit_example():
    stats = ridge_update(RidgeStats(lam=1.0, fit_intercept=False),
                         TrainingBatch(np.array([[1.0, 0.0, 0.0]]), np.zeros((0, 3))))
    np.testing.assert_allclose(ridge_solve(stats).w, [0.5, 0, 0])


def test_ridge_additivity_is_exact(rng):
    b1, b2 = random_batch(rng), random_batch(rng)
    seq = ridge_update(ridge_update(RidgeStats(), b1), b2)
    both = TrainingBatch(np.vstack([b1.positives, b2.positives]), np.vstack([b1.negatives, b2.negatives]))
    one = ridge_update(RidgeStats(), both)
    # same rows in a different order: equal up to summation order
    np.testing.assert_allclose(seq.A, one.A, rtol=0, atol=1e-12)
    np.testing.assert_allclose(seq.c, one.c, rtol=0, atol=1e-12)
    assert seq.n == one.n == 40
    assert np.allclose(seq.A, seq.A.T, atol=1e-9)
    assert np.linalg.eigvalsh(seq.A).min() > -1e-9


def test_ridge_online_equals_batch_closed_form(rng):
    d, lam = 10, 1.0
    X = rng.normal(size=(200, d))
    y = (rng.random(200) < 0.5).astype(float)
    model = RidgeRegression(lam)
    for k in range(0, 200, 20):
        sl = slice(k, k + 20)
        model.fit(TrainingBatch(X[sl][y[sl] == 1], X[sl][y[sl] == 0]))
    Xa = np.hstack([X, np.ones((200, 1))])
    coef = np.linalg.solve(Xa.T @ Xa + lam * np.eye(d + 1), Xa.T @ y)
    np.testing.assert_allclose(model.w, coef[:-1], atol=1e-8)
    assert model.b == pytest.approx(coef[-1], abs=1e-8)
    x = rng.normal(size=d)
    assert ridge_score(model.model, x) == pytest.approx(x @ coef[:-1] + coef[-1], abs=1e-8)


def test_ridge_singular_system_fails():
    stats = RidgeStats(np.zeros((2, 2)), np.ones(2), 1, lam=0.0, fit_intercept=False)
    with pytest.raises(SolverFailure):
        ridge_solve(stats)
    with pytest.raises(SolverFailure):
        ridge_solve(RidgeStats())


# ---------------------------------------------------------------- online SVM

def test_svm_first_step_example(rng):
    x = rng.normal(size=3)
    m = svm_update(OnlineSVM(np.zeros(3), 0.0, lam=0.1), TrainingBatch(x[None], np.zeros((0, 3))))
    np.testing.assert_allclose(m.w, x / 0.1)
    assert m.b == pytest.approx(1 / 0.1)


def test_svm_no_loss_branch_shrinks(rng):
    x = np.array([1.0, 0.0])
    m = OnlineSVM(np.array([5.0, 1.0]), 0.0, lam=0.1, t=9)
    out = svm_update(m, TrainingBatch(x[None], np.zeros((0, 2))))
    eta = 1 / (0.1 * 10)
    np.testing.assert_allclose(out.w, (1 - eta * 0.1) * m.w)
    assert out.b == 0.0
    assert svm_score(out, x) == pytest.approx(out.w @ x)


def test_svm_objective_decreases_over_passes():
    rng = np.random.default_rng(12345)
    batch = random_batch(rng, d=8, n_pos=10, n_neg=20)
    X, y = batch.xy(neg_label=-1.0)
    m = OnlineSVM(lam=1e-2)
    m.fit(batch, 1)
    first = hinge_objective(m.w, m.b, X, y, m.lam)
    m.fit(batch, 99)
    assert hinge_objective(m.w, m.b, X, y, m.lam) < first


# ---------------------------------------------------------------- structured SVM

def test_sosvm_empty_model_scores_zero(rng):
    assert np.all(sosvm_score(StructuredSVM(), rng.normal(size=(7, 3))) == 0)


def test_structured_loss_range(rng):
    boxes = np.column_stack([rng.uniform(0, 50, (30, 2)), rng.uniform(5, 30, (30, 2))])
    loss = structured_loss(boxes, 4)
    assert loss[4] == 0.0 and np.all((loss >= 0) & (loss <= 1))


def test_sosvm_single_step_matches_qp():
    X = np.array([[1.0, 0.5], [-0.5, 1.0]])
    boxes = np.array([[0, 0, 10, 10], [30, 30, 10, 10]], dtype=float)
    m = StructuredSVM(C=100.0)
    sosvm_update(m, X, boxes, Box(0, 0, 10, 10))
    p = m.patterns[0]
    assert p.beta[0] > 0 and p.beta[1] == pytest.approx(-p.beta[0], abs=1e-15)
    # the pattern's dual: max_b  Delta * b - 1/2 b^2 ||x* - x-||^2 over b in [0, C]
    k = float((X[0] - X[1]) @ (X[0] - X[1]))
    res = minimize_scalar(lambda b: -(1.0 * b - 0.5 * b * b * k), bounds=(0, 100), method="bounded",
                          options={"xatol": 1e-12})
    assert p.beta[0] == pytest.approx(res.x, abs=1e-6)


def test_sosvm_reprocessing_reaches_qp_optimum():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(5, 3))
    boxes = np.array([[0, 0, 10, 10], [2, 0, 10, 10], [5, 5, 10, 10], [20, 0, 10, 10], [0, 8, 10, 10]], float)
    m = StructuredSVM(C=1.0, n_reprocess=200, rng=rng)
    m.add_pattern(X, boxes, 0)
    loss = structured_loss(boxes, 0)

    def neg_dual(b):
        w = b @ X
        return loss @ b + 0.5 * w @ w

    cons = [{"type": "eq", "fun": lambda b: b.sum()}]
    bounds = [(0, 1.0)] + [(None, 0)] * 4
    ref = minimize(neg_dual, np.zeros(5), bounds=bounds, constraints=cons, method="SLSQP",
                   options={"ftol": 1e-14, "maxiter": 500})
    assert m.dual_objective() == pytest.approx(-ref.fun, abs=1e-6)


def test_sosvm_dual_feasible_and_monotone(rng):
    m = StructuredSVM(C=10.0, budget=5, n_reprocess=10, rng=rng)
    m.trace = []
    for _ in range(12):
        X = rng.normal(size=(15, 6))
        boxes = np.column_stack([rng.uniform(0, 40, (15, 2)), np.full((15, 2), 12.0)])
        m.add_pattern(X, boxes, 0)
        assert len(m.patterns) <= 5
        for p in m.patterns:
            assert abs(p.beta.sum()) < 1e-9
            assert 0 <= p.beta[p.y_star] <= m.C
            assert np.all(np.delete(p.beta, p.y_star) <= 0)
        np.testing.assert_allclose(m.w, m.recompute_w(), atol=1e-9)
    for (t0, v0), (t1, v1) in zip(m.trace, m.trace[1:]):
        if t1 != "new":  # the budget step may lower the dual; reprocessing may not
            assert v1 >= v0 - 1e-9


def test_sosvm_true_box_missing():
    with pytest.raises(TrueBoxMissing):
        sosvm_update(StructuredSVM(), np.ones((2, 2)), np.array([[0, 0, 5, 5], [1, 1, 5, 5]], float),
                     Box(9, 9, 5, 5))
    with pytest.raises(TrueBoxMissing):
        StructuredSVM().fit(TrainingBatch(np.ones((2, 2)), np.ones((2, 2))))


# ---------------------------------------------------------------- shared

@pytest.mark.parametrize("kind", list(ObservationKind))
def test_checkpoint_round_trip(kind, rng):
    d = 5
    pos, neg = rng.normal(1, 1, (6, d)), rng.normal(-1, 1, (9, d))
    batch = TrainingBatch(pos, neg, rng.uniform(0, 5, (6, 4)) + [0, 0, 10, 10],
                          rng.uniform(20, 40, (9, 4)) + [0, 0, 10, 10], pos[0], np.array([1.0, 1, 10, 10]))
    m = make_model(kind, ObservationConfig(), np.random.default_rng(0)).fit(batch, 3, rng)
    data = m.to_bytes()
    r = load_model(data)
    X = rng.normal(size=(4, d))
    np.testing.assert_array_equal(m.score(X), r.score(X))
    assert r.to_bytes() == data
    # deterministic scoring; updates stay finite
    np.testing.assert_array_equal(m.score(X), m.score(X))
    r.fit(batch, 2, rng)
    assert np.all(np.isfinite(r.score(X)))
    with pytest.raises(DimensionMismatch):
        m.score(np.ones((2, d + 1)))


def test_load_model_rejects_unknown():
    with pytest.raises(ValueError):
        load_model(b"XXXX" + bytes(16))
