import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_aloha import hankel
from robust_aloha.errors import EmptyInputError, InvalidShapeError
from robust_aloha.hankel import HankelShape
from robust_aloha.synthetic import exponential_modes

from oracles import block_hankel, brute_adjoint, brute_multiplicity


@st.composite
def shapes(draw, max_side=12):
    M = draw(st.integers(1, max_side))
    N = draw(st.integers(1, max_side))
    p = draw(st.integers(1, M))
    q = draw(st.integers(1, N))
    return HankelShape(M, N, p, q)


def test_column_example():
    shape = HankelShape(4, 1, 2, 1)
    out = hankel.lift(np.array([[1.0], [2.0], [3.0], [4.0]]), shape)
    np.testing.assert_array_equal(out.data, [[1, 2], [2, 3], [3, 4]])


@pytest.mark.parametrize("patch,filt,dims", [(25, 11, (225, 121)), (45, 13, (1089, 169)), (31, 13, (361, 169)), (25, 9, (289, 81))])
def test_lifted_dims_table(patch, filt, dims):
    shape = HankelShape.square(patch, filt)
    assert shape.lifted_dims == dims
    assert hankel.lift(np.zeros((patch, patch)), shape).data.shape == dims


@given(shapes(), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_lift_matches_block_hankel_definition(shape, seed):
    X = np.random.default_rng(seed).random(shape.patch_dims)
    np.testing.assert_array_equal(hankel.lift(X, shape).data, block_hankel(X, shape.filt_rows, shape.filt_cols))


def test_lift_rejects_wrong_patch():
    with pytest.raises(InvalidShapeError):
        hankel.lift(np.zeros((5, 5)), HankelShape.square(6, 3))


@pytest.mark.parametrize("args", [(3, 3, 4, 1), (3, 3, 1, 4), (0, 3, 1, 1), (3, 3, 0, 1)])
def test_invalid_shapes(args):
    with pytest.raises(InvalidShapeError):
        HankelShape(*args)


def test_adjoint_examples():
    shape = HankelShape(4, 1, 2, 1)
    ones = hankel.LiftedMatrix(np.ones(shape.lifted_dims), shape)
    np.testing.assert_array_equal(hankel.adjoint(ones).ravel(), [1, 2, 2, 1])
    zero = hankel.LiftedMatrix(np.zeros(shape.lifted_dims), shape)
    np.testing.assert_array_equal(hankel.adjoint(zero), np.zeros((4, 1)))


def test_adjoint_shape_mismatch():
    shape = HankelShape.square(5, 2)
    with pytest.raises(InvalidShapeError):
        hankel.LiftedMatrix(np.zeros((3, 3)), shape)


@given(shapes(), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_adjoint_matches_brute_force(shape, seed):
    A = np.random.default_rng(seed).standard_normal(shape.lifted_dims)
    got = hankel.adjoint(hankel.LiftedMatrix(A, shape))
    np.testing.assert_allclose(got, brute_adjoint(A, *shape.patch_dims, shape.filt_rows, shape.filt_cols), rtol=1e-12, atol=1e-12)


@given(shapes(), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_adjoint_identity(shape, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal(shape.patch_dims)
    B = rng.standard_normal(shape.lifted_dims)
    lhs = np.sum(hankel.lift(X, shape).data * B)
    rhs = np.sum(X * hankel.adjoint(hankel.LiftedMatrix(B, shape)))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs), np.abs(X).sum() * np.abs(B).max())


@given(shapes(), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_adjoint_of_lift_is_multiplicity_weighting(shape, seed):
    X = np.random.default_rng(seed).random(shape.patch_dims)
    np.testing.assert_allclose(hankel.adjoint(hankel.lift(X, shape)), hankel.multiplicity(shape) * X, rtol=1e-13)


def test_multiplicity_examples():
    np.testing.assert_array_equal(hankel.multiplicity(HankelShape(4, 1, 2, 1)).ravel(), [1, 2, 2, 1])
    np.testing.assert_array_equal(hankel.multiplicity(HankelShape(5, 7, 1, 1)), np.ones((5, 7)))
    m = hankel.multiplicity(HankelShape.square(25, 11))
    brute = brute_multiplicity(25, 25, 11, 11)
    assert brute[12, 12] == 121
    assert m[12, 12] == 121


@given(shapes())
@settings(max_examples=80, deadline=None)
def test_multiplicity_matches_window_count(shape):
    m = hankel.multiplicity(shape)
    np.testing.assert_array_equal(m, brute_multiplicity(*shape.patch_dims, shape.filt_rows, shape.filt_cols))
    assert m.min() >= 1


@given(shapes(), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_pseudo_inverse_is_left_inverse(shape, seed):
    rng = np.random.default_rng(seed)
    X = rng.random(shape.patch_dims)
    Y = rng.random(shape.patch_dims)
    np.testing.assert_allclose(hankel.pseudo_inverse(hankel.lift(X, shape)), X, rtol=1e-14, atol=0)
    both = hankel.LiftedMatrix(hankel.lift(X, shape).data + hankel.lift(Y, shape).data, shape)
    np.testing.assert_allclose(hankel.pseudo_inverse(both), X + Y, rtol=1e-14)


def test_pseudo_inverse_of_ones():
    shape = HankelShape(9, 7, 4, 3)
    out = hankel.pseudo_inverse(hankel.LiftedMatrix(np.ones(shape.lifted_dims), shape))
    np.testing.assert_allclose(out, np.ones(shape.patch_dims), rtol=1e-15)


def test_concat_and_split():
    shape = HankelShape.square(25, 11)
    rng = np.random.default_rng(0)
    blocks = [hankel.lift(rng.random((25, 25)), shape) for _ in range(3)]
    multi = hankel.concat_channels(blocks)
    assert multi.data.shape == (225, 363)
    assert multi.channel_count == 3
    for a, b in zip(hankel.split_channels(multi), blocks):
        np.testing.assert_array_equal(a.data, b.data)
    single = hankel.concat_channels(blocks[:1])
    np.testing.assert_array_equal(single.data, blocks[0].data)


def test_concat_errors():
    with pytest.raises(EmptyInputError):
        hankel.concat_channels([])
    a = hankel.lift(np.zeros((6, 6)), HankelShape.square(6, 3))
    b = hankel.lift(np.zeros((6, 6)), HankelShape.square(6, 2))
    with pytest.raises(InvalidShapeError):
        hankel.concat_channels([a, b])


def test_constant_patch_lifts_to_rank_one():
    s = np.linalg.svd(hankel.lift(np.full((25, 25), 0.37), HankelShape.square(25, 11)).data, compute_uv=False)
    assert np.all(s[1:] <= 1e-12 * s[0])


@pytest.mark.parametrize("k", [1, 2, 3])
def test_exponential_modes_lift_to_rank_k(k):
    X = exponential_modes(k, (25, 25), rng=k)
    s = np.linalg.svd(hankel.lift(X, HankelShape.square(25, 11)).data, compute_uv=False)
    assert s[k] <= 1e-8 * s[0]
    assert s[k - 1] > 1e-6 * s[0]
