import numpy as np
import pytest

import q3r


def test_scalar_penalty_values():
    assert q3r.f_eps(1.0, 2.0) == pytest.approx(0.5)
    assert q3r.f_eps(2.0, 2.0) == pytest.approx(2.0)
    assert q3r.f_eps(0.0, 1.0) == 0.0


def test_surrogate_collapses_to_frobenius_below_eps():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((6, 4))
    eps = np.linalg.norm(w, 2) * 1.5
    assert q3r.F_eps(w, eps) == pytest.approx(0.5 * np.sum(w * w), rel=1e-12)


def test_svd_truncated_reconstructs():
    rng = np.random.default_rng(2)
    w = rng.standard_normal((8, 5))
    u, s, v = q3r.svd_truncated(w, 5)
    assert np.allclose(u @ np.diag(s.ravel()) @ v.T, w, atol=1e-10)
    assert np.all(np.diff(s.ravel()) <= 1e-15)


def test_operator_gradient_identity():
    rng = np.random.default_rng(3)
    w = rng.standard_normal((7, 6))
    eps = q3r.singular_values(w).ravel()[2]
    op = q3r.ReweightingOperator.build(w, eps)
    lhs = op.apply(w)
    rhs = q3r.grad_F_eps(w, eps)
    assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_penalty_matches_half_inner_product():
    rng = np.random.default_rng(4)
    anchor = rng.standard_normal((6, 6))
    eps = q3r.singular_values(anchor).ravel()[3]
    op = q3r.ReweightingOperator.build(anchor, eps)
    w = rng.standard_normal((6, 6))
    assert op.q3r_value(w) == pytest.approx(
        0.5 * float(np.sum(w * op.apply(w))), rel=1e-12
    )


def test_update_operator_pins_eps_to_guide_value():
    w = np.diag([4.0, 0.5])
    state = q3r.SmoothingState(r_target=1)
    op, nxt = q3r.update_operator(w, state)
    assert nxt.eps == pytest.approx(0.5)
    assert op.rank_envelope == 1
    assert not state.is_set()
    assert nxt.is_set()


def test_tail_ratio_exact_for_planted_rank():
    rng = np.random.default_rng(5)
    w = rng.standard_normal((12, 3)) @ rng.standard_normal((3, 10))
    assert q3r.tail_ratio(w, 3) == 1.0
    assert q3r.tail_ratio(w, 2) < 1.0


def test_truncation_helpers():
    assert q3r.rank_for_retention(64, 64, 0.2) == 6
    w = np.diag([4.0, 3.0, 1.0])
    cut = q3r.truncate_matrix(w, 2)
    assert np.allclose(cut, np.diag([4.0, 3.0, 0.0]), atol=1e-12)
    with pytest.raises(ValueError):
        q3r.truncate_matrix(w, 9)


def test_optimizer_drives_tail_up_and_is_deterministic():
    rng = np.random.default_rng(6)
    target = rng.standard_normal((10, 4)) @ rng.standard_normal((4, 10))
    w0 = rng.standard_normal((10, 10))

    def run():
        opt = q3r.AdamQ3R(w0, r_target=4, lambda_=1e-2, alpha=0.05, period=5)
        for _ in range(300):
            opt.step(opt.w - target)
        return opt

    a, b = run(), run()
    assert np.array_equal(a.w, b.w)
    assert a.step_count == 300
    assert a.eps > 0.0
    assert q3r.tail_ratio(a.w, 4) > q3r.tail_ratio(w0, 4)


def test_recovery_report_shape():
    rep = q3r.run_matrix_recovery(
        10, 10, rank=2, oversampling=2.0, lambda_=1e-3, iters=300, seed=3
    )
    assert rep["measurements"] == 72
    assert rep["iters"] == 300
    assert 0.0 <= rep["tail"] <= 1.0
    again = q3r.run_matrix_recovery(
        10, 10, rank=2, oversampling=2.0, lambda_=1e-3, iters=300, seed=3
    )
    assert rep == again


def test_errors_surface_as_python_exceptions():
    with pytest.raises(ValueError):
        q3r.ReweightingOperator.build(np.zeros((0, 0)), 1.0)
    with pytest.raises(ValueError):
        q3r.rank_for_retention(8, 8, 2.0)
