import numpy as np
import pytest

from hymera.constituents import ParameterSet, build_Y
from hymera.errors import ConstraintViolation, SchemaError, ShapeError
from hymera.perfect import (
    ame43,
    bipartitions,
    load_tensor,
    perfect_check,
    push_operator,
    save_tensor,
    tensor_from_dict,
    tensor_to_dict,
)
from hymera.tensor import Tensor


def brute_force_balanced(t):
    # independent oracle: explicit loops over the three pairings of four legs
    out = []
    for a in ((0, 1), (0, 2), (0, 3)):
        b = tuple(x for x in range(4) if x not in a)
        m = np.transpose(t.data, b + a).reshape(9, 9)
        out.append(np.allclose(m.conj().T @ m, np.eye(9) * np.trace(m.conj().T @ m).real / 9, atol=1e-12))
    return out


def test_bipartition_enumeration():
    cuts = list(bipartitions("abcd"))
    assert len(cuts) == 4 + 3
    assert len(list(bipartitions("abcdef"))) == 6 + 15 + 10


def test_ame43_is_perfect():
    t = ame43()
    assert all(brute_force_balanced(t))
    r = perfect_check(t)
    assert r.is_perfect
    assert len(r.defects) == 7
    assert max(r.defects.values()) < 1e-14


def test_product_tensor_is_not_perfect():
    v = np.array([1.0, 0.5])
    t = Tensor(np.einsum("a,b,c,d->abcd", v, v, v, v), "abcd")
    assert not perfect_check(t).is_perfect


def test_random_qubit_tensor_is_not_perfect():
    rng = np.random.default_rng(0)
    for _ in range(20):
        t = Tensor(rng.normal(size=(2,) * 4) + 1j * rng.normal(size=(2,) * 4), "abcd")
        assert not perfect_check(t).is_perfect


def test_odd_legs_rejected():
    with pytest.raises(ShapeError):
        perfect_check(Tensor(np.ones((2, 2, 2)), "abc"))


def test_push_identity_is_identity():
    y = build_Y(ParameterSet({1: 0.7}))
    out = push_operator(np.eye(4), y, ("c", "d"), ("a", "b"))
    assert np.max(np.abs(out - np.eye(4))) < 1e-12


def test_push_preserves_spectrum_and_norm():
    y = build_Y(ParameterSet({1: 1.3}))
    z = np.diag([1.0, -1.0])
    op = np.kron(z, np.eye(2))
    out = push_operator(op, y, ("c", "d"), ("a", "b"))
    assert np.allclose(np.sort(np.linalg.eigvalsh(out)), np.sort(np.linalg.eigvalsh(op)), atol=1e-12)
    assert abs(np.linalg.norm(out) - np.linalg.norm(op)) < 1e-8


def test_push_rejects_non_isometry_and_bad_shape():
    t = Tensor(np.ones((2, 2, 2, 2)), "abcd")
    with pytest.raises(ConstraintViolation):
        push_operator(np.eye(4), t, ("c", "d"), ("a", "b"))
    y = build_Y(ParameterSet({1: 0.2}))
    with pytest.raises(ShapeError):
        push_operator(np.eye(2), y, ("c", "d"), ("a", "b"))


def test_tensor_json_round_trip(tmp_path):
    y = build_Y(ParameterSet({1: 0.4}))
    p = tmp_path / "y.json"
    save_tensor(y, p)
    back = load_tensor(p)
    assert back.legs == y.legs and np.array_equal(back.data, y.data)
    with pytest.raises(SchemaError):
        tensor_from_dict({"shape": [2, 2], "real": [1, 2, 3]})
    assert tensor_from_dict(tensor_to_dict(ame43())).shape == (3, 3, 3, 3)
