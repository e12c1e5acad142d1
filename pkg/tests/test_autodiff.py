import numpy as np
import pytest

from cope.autodiff import (
    Node,
    Tape,
    backward,
    concat_rows,
    finite_diff_check,
    softplus,
    tanh,
)
from cope.models import init_chain, init_ccp, lift_model, product_compose


class TestOpValues:
    def test_duck_typed_expression_matches_numpy(self):
        rng = np.random.default_rng(50)
        a = rng.standard_normal((3, 4))
        b = rng.standard_normal((4, 2))
        c = rng.standard_normal((3, 1))

        def expr(a, b, c):
            h = tanh(a @ b + c)
            return (h * h).sum(axis=0, keepdims=True).reshape((2, 1)) - 0.5

        tape = Tape()
        got = expr(tape.param("a", a), tape.param("b", b), tape.param("c", c))
        np.testing.assert_array_equal(got.value, expr(a, b, c))

    def test_constant_operand_sides(self):
        tape = Tape()
        x = tape.param("x", np.array([[2.0]]))
        assert (1.0 - x).value == pytest.approx(-1.0)
        assert (x - 1.0).value == pytest.approx(1.0)
        assert (3.0 * x).value == pytest.approx(6.0)
        assert (x / 2.0).value == pytest.approx(1.0)
        assert (np.ones((1, 1)) @ x).value == pytest.approx(2.0)

    def test_softplus_is_stable(self):
        tape = Tape()
        x = tape.param("x", np.array([[800.0, -800.0]]))
        out = softplus(x)
        np.testing.assert_allclose(out.value, [[800.0, 0.0]], atol=1e-12)


class TestBackward:
    def test_matmul_chain_grads(self):
        rng = np.random.default_rng(51)
        a = rng.standard_normal((2, 3))
        b = rng.standard_normal((3, 2))
        tape = Tape()
        va, vb = tape.param("a", a), tape.param("b", b)
        out = (va @ vb).sum()
        grads = backward(tape, out)
        np.testing.assert_allclose(grads["a"], np.ones((2, 2)) @ b.T, atol=1e-12)
        np.testing.assert_allclose(grads["b"], a.T @ np.ones((2, 2)), atol=1e-12)

    def test_broadcast_bias_grad_sums_over_batch(self):
        tape = Tape()
        x = tape.param("x", np.zeros((3, 5)))
        b = tape.param("b", np.zeros((3, 1)))
        out = (x + b).sum()
        grads = backward(tape, out)
        np.testing.assert_array_equal(grads["b"], np.full((3, 1), 5.0))

    def test_unused_parameter_gets_zero_grad(self):
        tape = Tape()
        x = tape.param("x", np.ones((2, 2)))
        unused = tape.param("unused", np.ones((3, 3)))
        grads = backward(tape, (x * x).sum())
        np.testing.assert_array_equal(grads["unused"], np.zeros((3, 3)))
        assert grads["x"].shape == (2, 2)

    def test_gradient_is_linear_in_seed(self):
        rng = np.random.default_rng(52)
        tape = Tape()
        x = tape.param("x", rng.standard_normal((2, 3)))
        out = tanh(x) * x + x
        u = rng.standard_normal(out.value.shape)
        v = rng.standard_normal(out.value.shape)
        gu = backward(tape, out, u)["x"]
        gv = backward(tape, out, v)["x"]
        gboth = backward(tape, out, 2.0 * u - 3.0 * v)["x"]
        np.testing.assert_allclose(gboth, 2.0 * gu - 3.0 * gv, atol=1e-12)

    def test_seed_shape_checked(self):
        tape = Tape()
        x = tape.param("x", np.ones((2, 2)))
        with pytest.raises(ValueError, match="seed shape"):
            backward(tape, x.sum(), np.ones(3))

    def test_unregistered_op_named_in_error(self):
        tape = Tape()
        x = tape.param("x", np.ones((1, 1)))
        tape.nodes.append(Node("mystery_op", np.ones((1, 1)), (x.nid,)))
        from cope.autodiff import Var

        bad = Var(tape, len(tape.nodes) - 1)
        with pytest.raises(ValueError, match="no backward rule .* 'mystery_op'"):
            backward(tape, bad)

    def test_repeated_runs_are_bitwise_identical(self):
        rng = np.random.default_rng(53)
        p = init_ccp(rng, (3, 2), 4, 2, order=3)
        z = [rng.uniform(-1, 1, (3, 8)), rng.uniform(-1, 1, (2, 8))]

        def run():
            tape = Tape()
            lifted = lift_model(tape, p)
            from cope.models import ccp_forward_cols

            out = ccp_forward_cols(lifted, z)
            return backward(tape, (out * out).sum())

        g1, g2 = run(), run()
        assert g1.keys() == g2.keys()
        for k in g1:
            np.testing.assert_array_equal(g1[k], g2[k])

    def test_concat_rows_splits_gradient(self):
        tape = Tape()
        a = tape.param("a", np.ones((2, 3)))
        b = tape.param("b", np.ones((1, 3)))
        out = concat_rows([a, b])
        seed = np.arange(9.0).reshape(3, 3)
        grads = backward(tape, out, seed)
        np.testing.assert_array_equal(grads["a"], seed[:2])
        np.testing.assert_array_equal(grads["b"], seed[2:])

    def test_tape_param_names_unique(self):
        tape = Tape()
        tape.param("w", np.ones(1))
        with pytest.raises(ValueError, match="already registered"):
            tape.param("w", np.ones(1))


class TestFiniteDiffCheck:
    def test_linear_function_is_exact(self):
        rng = np.random.default_rng(54)
        c = rng.standard_normal((1, 4))

        def f(p):
            return (p["w"] * c).sum()

        err = finite_diff_check(f, {"w": rng.standard_normal((1, 4))}, h=1e-5)
        assert err < 1e-10

    def test_cubic_truncation_error(self):
        # central difference of x^3 at 1 is 3 + h^2
        def f(p):
            x = p["x"]
            return (x * x * x).sum()

        err = finite_diff_check(f, {"x": np.ones((1, 1))}, h=1e-4)
        assert err == pytest.approx(1e-8 / 3.0, rel=1e-2)

    def test_nonfinite_perturbation_names_coordinate(self):
        def f(p):
            x = p["x"]
            if not hasattr(x, "value"):
                bad = np.where(np.asarray(x) > 1.5, np.inf, 0.0)
                return np.sum(bad)
            return x.sum()

        with pytest.raises(ValueError, match=r"perturbing x\[1\]"):
            finite_diff_check(f, {"x": np.array([[1.0, 1.49999]])}, h=1e-4)

    def test_hadamard_heavy_chain_stays_finite(self):
        rng = np.random.default_rng(55)
        spec = init_chain(
            rng, (3, 2), (2, 3), rank=4, hidden_dim=3, out_dim=2,
        )
        z = [rng.uniform(-1, 1, (3, 16)), rng.uniform(-1, 1, (2, 16))]
        tape = Tape()
        lifted = lift_model(tape, spec)
        out = product_compose(lifted, z)
        loss = (out * out).mean()
        grads = backward(tape, loss)
        assert np.isfinite(loss.value)
        assert all(np.isfinite(g).all() for g in grads.values())
