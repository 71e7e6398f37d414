import numpy as np
import pytest
from numpy.polynomial import polynomial as P

from hepoly import ops
from hepoly.ckks import Ciphertext
from hepoly.errors import InputError


def negacyclic_oracle(a, b, N):
    """Reference product in C[X]/(X^N + 1) via polynomial long division."""
    prod = P.polymul(a, b)
    modulus = np.zeros(N + 1)
    modulus[0] = modulus[N] = 1
    _, rem = P.polydiv(prod, modulus)
    out = np.zeros(N, dtype=complex)
    out[: len(rem)] = rem
    return out


class TestAddSub:
    def test_reference_sum(self, E, D):
        assert D(ops.add(E(5.0), E(3.2))) == pytest.approx(8.2, abs=1e-6)

    def test_doubling(self, E, D):
        assert D(ops.add(E(42.0), E(42.0))) == pytest.approx(84.0, rel=1e-6)

    def test_additive_identity(self, E, D):
        assert D(ops.add(E(0.37), Ciphertext.zeros(8))) == pytest.approx(0.37, abs=1e-12)

    def test_sub(self, E, D):
        assert D(ops.sub(E(5.0), E(3.2))) == pytest.approx(5.0 - 3.2, abs=1e-6)

    def test_self_cancel(self, E, D):
        ct = E(0.9)
        assert abs(D(ops.sub(ct, ct))) < 1e-15

    def test_sub_is_add_of_negation(self, E):
        a, b = E(0.4), E(-0.7)
        assert np.array_equal(ops.sub(a, b).coeffs, ops.add(a, ops.mul_const(b, -1.0)).coeffs)

    def test_mismatch(self, E):
        with pytest.raises(InputError):
            ops.add(E(1.0), Ciphertext.zeros(4))

    def test_additive_homomorphism(self, E, D):
        rng = np.random.default_rng(3)
        a, b = rng.uniform(-10, 10, (2, 1000))
        out = D(ops.add(E(a), E(b)))
        assert np.all(np.abs(out - (a + b)) < 1e-6 * np.maximum(1, np.abs(a + b)))

    def test_level_is_max(self, E):
        a = Ciphertext(E(1.0).coeffs, 2)
        assert ops.add(a, E(1.0)).level == 2
        assert ops.sub(E(1.0), a).level == 2
        assert ops.mul_const(a, 3.0).level == 2


class TestConstants:
    def test_add_const(self, E, D):
        assert D(ops.add_const(E(1.0), 2.5)) == pytest.approx(3.5, abs=1e-9)

    def test_add_zero(self, E, D):
        ct = E(0.2)
        assert D(ops.add_const(ct, 0.0)) == D(ct)

    def test_add_const_then_add(self, E, D):
        assert D(ops.add(ops.add_const(E(1.0), 2.5), E(1.0))) == pytest.approx(4.5, abs=1e-9)

    def test_add_const_shifts_every_slot(self, E, enc_map):
        ct = ops.add_const(E(0.0), 2.0)
        assert np.allclose(enc_map.forward(ct.coeffs), 2.0, atol=1e-5)

    def test_mul_const(self, E, D):
        assert D(ops.mul_const(E(3.0), 1 / 3)) == pytest.approx(1.0, rel=1e-9)
        assert abs(D(ops.mul_const(E(0.8), 0.0))) == 0.0
        assert D(ops.mul_const(E(2.0), -1.6)) == pytest.approx(-3.2, rel=1e-9)

    @pytest.mark.parametrize("bad", [np.inf, np.nan])
    def test_non_finite(self, E, bad):
        with pytest.raises(InputError):
            ops.mul_const(E(1.0), bad)
        with pytest.raises(InputError):
            ops.add_const(E(1.0), bad)

    def test_per_cell_constants(self, E, D):
        out = ops.mul_const(E(np.array([1.0, 2.0])), np.array([3.0, -1.0]))
        assert np.allclose(D(out), [3.0, -2.0])


class TestReduction:
    def test_x_to_the_n(self):
        p = np.zeros(9)
        p[8] = 1
        out = ops.reduce_negacyclic(p, 8)
        assert np.array_equal(out, np.r_[-1.0, np.zeros(7)])

    def test_low_degree_unchanged(self):
        p = np.arange(1, 6, dtype=float)
        assert np.array_equal(ops.reduce_negacyclic(p, 8)[:5], p)

    def test_hand_fold(self):
        # 1 + X + X^2 with X^2 = -1  ->  0 + X
        assert np.array_equal(ops.reduce_negacyclic(np.array([1.0, 1.0, 1.0]), 2), [0.0, 1.0])

    def test_too_long(self):
        with pytest.raises(InputError):
            ops.reduce_negacyclic(np.zeros(16), 8)

    def test_evaluations_preserved(self, params):
        from hepoly.ckks import slot_roots

        rng = np.random.default_rng(0)
        roots = slot_roots(params)
        for _ in range(50):
            p = rng.normal(size=15) + 1j * rng.normal(size=15)
            r = ops.reduce_negacyclic(p, 8)
            for z in roots:
                assert abs(P.polyval(z, p) - P.polyval(z, r)) < 1e-10

    def test_matches_division_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b = rng.normal(size=(2, 8))
            got = ops.reduce_negacyclic(ops.convolve(a, b), 8)
            assert np.allclose(got, negacyclic_oracle(a, b, 8), atol=1e-12)

    def test_convolve_matches_numpy(self):
        rng = np.random.default_rng(2)
        a, b = rng.normal(size=(2, 8)) + 1j * rng.normal(size=(2, 8))
        assert np.allclose(ops.convolve(a, b), np.convolve(a, b))


class TestMulCt:
    def test_reference_pair(self, E, D):
        assert D(ops.mul_ct(E(5.5), E(-3.2))) == pytest.approx(-17.6, rel=1e-6)

    def test_annihilation(self, E, D):
        assert abs(D(ops.mul_ct(E(0.7), E(0.0)))) < 1e-12

    def test_squared_difference(self, E, D):
        diff = ops.sub(E(3.0), E(1.0))
        assert D(ops.mul_ct(diff, diff)) == pytest.approx(4.0, rel=1e-6)

    def test_level(self, E):
        a = ops.mul_ct(E(1.0), E(1.0))
        assert a.level == 1
        assert ops.mul_ct(a, a).level == 3

    def test_mismatch(self, E):
        with pytest.raises(InputError):
            ops.mul_ct(E(1.0), Ciphertext.zeros(4))

    def test_distributive(self, E, D):
        rng = np.random.default_rng(4)
        for a, b, c in rng.uniform(-5, 5, (100, 3)):
            ea, eb, ec = E(a), E(b), E(c)
            lhs = D(ops.mul_ct(ea, ops.add(eb, ec)))
            rhs = D(ops.add(ops.mul_ct(ea, eb), ops.mul_ct(ea, ec)))
            assert abs(lhs - rhs) <= 1e-6 * max(1.0, abs(rhs))

    def test_depth_two(self, E, D):
        rng = np.random.default_rng(5)
        a, b, c = rng.uniform(-1, 1, (3, 1000))
        out = D(ops.mul_ct(ops.mul_ct(E(a), E(b)), E(c)))
        expected = a * b * c
        rel = np.abs(out - expected) / np.abs(expected)
        assert rel.max() < 1e-6

    def test_batched_equals_single(self, E):
        xs, ys = E(np.array([0.1, 0.2, -0.3])), E(np.array([0.5, -0.4, 0.9]))
        batch = ops.mul_ct(xs, ys)
        for i in range(3):
            assert np.allclose(batch.coeffs[i], ops.mul_ct(xs[i], ys[i]).coeffs, atol=0)


class TestAggregates:
    def test_small_sum(self, E, D):
        assert D(ops.sum_many([E(1.0), E(2.0), E(3.0)])) == pytest.approx(6.0, rel=1e-9)

    def test_single(self, E):
        ct = E(0.5)
        assert ops.sum_many([ct]) is ct

    def test_hundred_cents(self, E, D):
        assert abs(D(ops.sum_many([E(0.01) for _ in range(100)])) - 1.0) < 1e-6

    def test_batch_axis_sum(self, E, D):
        vals = np.random.default_rng(6).uniform(-1, 1, 50)
        assert D(ops.sum_many(E(vals))) == pytest.approx(vals.sum(), abs=1e-9)

    def test_empty(self):
        with pytest.raises(InputError):
            ops.sum_many([])

    def test_dot(self, E, D):
        assert D(ops.dot_enc([E(1.0), E(2.0)], [E(3.0), E(4.0)])) == pytest.approx(11.0, rel=1e-9)

    def test_dot_zeros(self, E, D):
        assert abs(D(ops.dot_enc([E(1.0), E(2.0)], [E(0.0), E(0.0)]))) < 1e-12

    def test_dot_single(self, E, D):
        a, b = E(0.3), E(-0.6)
        assert D(ops.dot_enc([a], [b])) == pytest.approx(D(ops.mul_ct(a, b)), abs=1e-15)

    def test_dot_length_mismatch(self, E):
        with pytest.raises(InputError):
            ops.dot_enc([E(1.0)], [E(1.0), E(2.0)])
        with pytest.raises(InputError):
            ops.dot_enc([], [])

    def test_weighted_sum(self, E, D):
        W = np.array([[1.0, 2.0], [-1.0, 0.5]])
        x = np.array([0.3, -0.2])
        assert np.allclose(D(ops.weighted_sum(E(x), W)), W @ x, atol=1e-12)


class TestCounting:
    def test_counts_cells(self, E):
        with ops.count_ops() as c:
            ops.mul_ct(E(np.zeros((4, 3))), E(np.zeros((4, 3))))
            ops.mul_ct(E(1.0), E(1.0))
        assert c.ct_mul == 13

    def test_nested(self, E):
        with ops.count_ops() as outer:
            ops.mul_ct(E(1.0), E(1.0))
            with ops.count_ops() as inner:
                ops.mul_ct(E(1.0), E(1.0))
        assert (outer.ct_mul, inner.ct_mul) == (2, 1)
