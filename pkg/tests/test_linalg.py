import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from osgrf.linalg import (AnisotropyMatrix, DefectiveMatrix, DomainError, GenericBlock,
                          InvalidMatrix, JordanSpec, apply_mat_pow, expm, jordan_assemble,
                          jordan_decompose, lambda_min, mat_pow)


def taylor_expm(A, terms=80):
    out = np.eye(len(A))
    term = np.eye(len(A))
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def random_matrix(rng, d, scale=5.0):
    A = rng.normal(size=(d, d))
    return A * scale / max(np.linalg.norm(A, 2), 1e-12) * rng.uniform(0.1, 1)


def rel(A, B):
    return np.linalg.norm(A - B) / np.linalg.norm(B)


class TestExpm:
    def test_against_scipy(self):
        rng = np.random.default_rng(1)
        for d in (1, 2, 3, 5):
            for _ in range(20):
                A = random_matrix(rng, d, scale=rng.uniform(0.01, 10))
                assert rel(expm(A), scipy.linalg.expm(A)) < 1e-12

    def test_against_high_precision(self):
        mpmath = pytest.importorskip("mpmath")
        mpmath.mp.dps = 40
        rng = np.random.default_rng(11)
        for d in (2, 3):
            for scale in (0.5, 5.0, 20.0, 50.0):
                A = random_matrix(rng, d, scale=scale)
                exact = np.array(mpmath.expm(mpmath.matrix(A.tolist())).tolist(), dtype=float)
                assert rel(expm(A), exact) < 1e-12

    def test_against_series(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            A = random_matrix(rng, 3, scale=1.0)
            assert rel(expm(A), taylor_expm(A)) < 1e-13

    def test_stack_matches_single(self):
        rng = np.random.default_rng(3)
        As = rng.normal(size=(6, 3, 3)) * 4
        S = expm(As)
        for A, R in zip(As, S):
            assert_allclose(R, expm(A), rtol=0, atol=0)


class TestMatPow:
    def test_identity(self):
        assert_allclose(mat_pow(np.eye(2), 3.0), 3 * np.eye(2), rtol=1e-14)

    def test_diagonal(self):
        assert_allclose(mat_pow(np.diag([1, 0.5]), 4.0), [[4, 0], [0, 2]], rtol=1e-14)

    def test_nilpotent_closed_form(self):
        e = math.e
        R = mat_pow([[1, 1], [0, 1]], e)
        assert_allclose(R, [[e, e], [0, e]], rtol=1e-14)
        assert rel(R, taylor_expm(np.array([[1.0, 1], [0, 1]]))) < 1e-14

    def test_rotation_closed_form(self):
        alpha, beta, a = 0.7, 2.3, 5.0
        t = beta * math.log(a)
        want = a ** alpha * np.array([[math.cos(t), math.sin(t)], [-math.sin(t), math.cos(t)]])
        assert_allclose(mat_pow([[alpha, beta], [-beta, alpha]], a), want, rtol=1e-13)

    def test_large_argument(self):
        # ||ln(a) E|| close to 50
        E = np.array([[2.0, 1.0], [0.0, 3.0]])
        a = math.exp(50 / np.linalg.norm(E))
        assert rel(mat_pow(E, a), scipy.linalg.expm(math.log(a) * E)) < 1e-12

    @pytest.mark.parametrize("a", [0.0, -1.0, float("nan")])
    def test_domain(self, a):
        with pytest.raises(DomainError):
            mat_pow(np.eye(2), a)

    def test_array_of_scales(self):
        E = np.array([[1.0, -1.0], [1.0, 1.0]])
        a = np.array([[0.5, 2.0], [3.0, 7.0]])
        R = mat_pow(E, a)
        assert R.shape == (2, 2, 2, 2)
        assert_allclose(R[1, 0], mat_pow(E, 3.0), rtol=1e-15)

    def test_apply(self):
        E = np.array([[2.0, 1.0], [0.0, 1.0]])
        xi = np.array([[1.0, 2.0], [3.0, -1.0]])
        a = np.array([2.0, 0.3])
        out = apply_mat_pow(E, a, xi)
        assert_allclose(out[1], mat_pow(E, 0.3) @ xi[1], rtol=1e-15)


matrices = st.integers(1, 4).flatmap(
    lambda d: st.lists(st.floats(-1, 1), min_size=d * d, max_size=d * d).map(
        lambda v: np.array(v).reshape(d, d)))
scales = st.floats(0.1, 10)


@settings(max_examples=200, deadline=None)
@given(matrices, st.floats(0, 5), scales, scales)
def test_group_law(M, norm, a, b):
    E = M * norm / max(np.linalg.norm(M, 2), 1e-12)
    ab = mat_pow(E, a * b)
    assert np.linalg.norm(mat_pow(E, a) @ mat_pow(E, b) - ab) <= 1e-10 * np.linalg.norm(ab)


@settings(max_examples=200, deadline=None)
@given(matrices, st.floats(0, 5), scales)
def test_inverse_law(M, norm, a):
    # a product of two computed matrices is only accurate to eps * |P| |Q|
    E = M * norm / max(np.linalg.norm(M, 2), 1e-12)
    P, Q = mat_pow(E, a), mat_pow(E, 1 / a)
    err = np.linalg.norm(P @ Q - np.eye(len(E)))
    assert err <= 1e-10 * max(1.0, np.linalg.norm(P) * np.linalg.norm(Q) / len(E))


@settings(max_examples=200, deadline=None)
@given(matrices, st.floats(0, 2), st.floats(0.5, 2))
def test_inverse_law_absolute_well_conditioned(M, norm, a):
    E = M * norm / max(np.linalg.norm(M, 2), 1e-12)
    prod = mat_pow(E, a) @ mat_pow(E, 1 / a)
    assert np.max(np.abs(prod - np.eye(len(E)))) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(matrices, st.floats(0, 5), scales)
def test_transpose_law(M, norm, a):
    E = M * norm / max(np.linalg.norm(M, 2), 1e-12)
    P = mat_pow(E, a)
    assert np.max(np.abs(mat_pow(E.T, a) - P.T)) <= 1e-12 * max(1.0, np.abs(P).max())


class TestAnisotropyMatrix:
    def test_rejects_nonpositive_spectrum(self):
        with pytest.raises(InvalidMatrix):
            AnisotropyMatrix(np.array([[1.0, 0], [0, -0.5]]))
        with pytest.raises(InvalidMatrix):
            AnisotropyMatrix(np.array([[0.0, 1], [-1, 0]]))

    def test_frozen(self):
        E = AnisotropyMatrix(np.eye(2))
        with pytest.raises(ValueError):
            E.entries[0, 0] = 2

    def test_trace(self):
        assert AnisotropyMatrix(np.diag([1, 0.5])).trace() == 1.5


@pytest.mark.parametrize("E, want", [
    (np.diag([1, 0.5]), 0.5),
    (np.array([[1.0, -1], [1, 1]]), 1.0),
    (np.array([[2.0, 1], [0, 1]]), 1.0),
    (np.array([[3.0, 0, 0], [0, 1, -4], [0, 4, 1]]), 1.0),
])
def test_lambda_min(E, want):
    assert abs(lambda_min(E) - want) <= 1e-10


class TestBlocks:
    def test_invalid(self):
        with pytest.raises(InvalidMatrix):
            GenericBlock("scalar_diag", 1, lam=0.0)
        with pytest.raises(InvalidMatrix):
            GenericBlock("scalar_jordan", 1, lam=1.0)
        with pytest.raises(InvalidMatrix):
            GenericBlock("rotation_diag", 3, alpha=1.0, beta=1.0)
        with pytest.raises(InvalidMatrix):
            GenericBlock("rotation_jordan", 2, alpha=1.0, beta=1.0)
        with pytest.raises(InvalidMatrix):
            GenericBlock("shear", 2, lam=1.0)

    def test_shapes(self):
        assert_allclose(GenericBlock("scalar_jordan", 3, lam=2.0).matrix(),
                        [[2, 1, 0], [0, 2, 1], [0, 0, 2]])
        R = GenericBlock("rotation_jordan", 4, alpha=1.0, beta=2.0).matrix()
        assert_allclose(R[:2, :2], [[1, 2], [-2, 1]])
        assert_allclose(R[:2, 2:], np.eye(2))
        assert_allclose(R[2:, :2], 0)

    def test_json_round_trip(self):
        spec = JordanSpec(P=np.array([[1.0, -1], [0, 1]]),
                          blocks=(GenericBlock("scalar_diag", 1, lam=2.0),
                                  GenericBlock("scalar_diag", 1, lam=1.0)))
        again = JordanSpec.from_json(spec.to_json())
        assert_allclose(jordan_assemble(again).entries, jordan_assemble(spec).entries)


class TestAssemble:
    def test_identity(self):
        spec = JordanSpec(P=np.eye(2), blocks=(GenericBlock("scalar_diag", 2, lam=1.0),))
        assert_allclose(jordan_assemble(spec).entries, np.eye(2))

    def test_worked_example(self):
        spec = JordanSpec(P=np.array([[1.0, -1], [0, 1]]),
                          blocks=(GenericBlock("scalar_diag", 1, lam=2.0),
                                  GenericBlock("scalar_diag", 1, lam=1.0)))
        assert_allclose(jordan_assemble(spec).entries, [[2, 1], [0, 1]], atol=1e-15)

    def test_rotation_block(self):
        spec = JordanSpec(P=np.eye(2), blocks=(GenericBlock("rotation_diag", 2, alpha=1.0, beta=1.0),))
        assert_allclose(jordan_assemble(spec).entries, [[1, 1], [-1, 1]])

    def test_singular_P(self):
        with pytest.raises(InvalidMatrix):
            JordanSpec(P=np.array([[1.0, 2], [2, 4]]),
                       blocks=(GenericBlock("scalar_diag", 2, lam=1.0),))

    def test_sizes_must_sum(self):
        with pytest.raises(InvalidMatrix):
            JordanSpec(P=np.eye(3), blocks=(GenericBlock("scalar_diag", 2, lam=1.0),))


class TestDecompose:
    def test_diagonal(self):
        spec = jordan_decompose(np.diag([2.0, 1.0]))
        assert [b.kind for b in spec.blocks] == ["scalar_diag", "scalar_diag"]
        assert [b.lam for b in spec.blocks] == [2.0, 1.0]
        assert_allclose(jordan_assemble(spec).entries, np.diag([2.0, 1.0]), atol=1e-15)

    def test_rotation(self):
        E = np.array([[1.0, -1], [1, 1]])
        spec = jordan_decompose(E)
        (b,) = spec.blocks
        assert b.kind == "rotation_diag" and b.beta > 0
        assert abs(b.alpha - 1) < 1e-12 and abs(b.beta - 1) < 1e-12
        assert rel(jordan_assemble(spec).entries, E) <= 1e-9

    def test_defective(self):
        with pytest.raises(DefectiveMatrix):
            jordan_decompose(np.array([[1.0, 1], [0, 1]]))

    def test_repeated_non_defective(self):
        spec = jordan_decompose(np.eye(3))
        assert_allclose(jordan_assemble(spec).entries, np.eye(3), atol=1e-14)

    def test_random_round_trip(self):
        rng = np.random.default_rng(7)
        done = 0
        while done < 100:
            d = int(rng.integers(1, 6))
            E = rng.normal(size=(d, d))
            E += (abs(np.linalg.eigvals(E).real.min()) + 0.5) * np.eye(d)
            spec = jordan_decompose(E)
            assert rel(jordan_assemble(spec).entries, E) <= 1e-9
            done += 1
