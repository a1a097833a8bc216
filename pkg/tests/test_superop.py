import math
from fractions import Fraction

import numpy as np
import pytest

from hymera.composition import ContractionSchema, load_decomposition, nontrivial_spectrum_check
from hymera.errors import ConstraintViolation, SchemaError, ShapeError, SolverError
from hymera.superop import (
    Cone,
    ScalingSpectrum,
    Superoperator,
    available_cones,
    average_superoperator,
    boundary_weights,
    build_ascending,
    build_descending,
    central_charge,
    correlation_exponent,
    dimensions_from_magnitudes,
    duality_defect,
    fixed_point,
    kac_dimension,
    load_cone,
    model_table,
    partial_trace,
    scaling_spectrum,
    von_neumann_entropy,
)
from hymera.tensor import Tensor
from hymera.tiling import load_grammar

S54 = 2 + math.sqrt(3)


def identity_cone():
    schema = ContractionSchema.from_dict({
        "nodes": [{"id": "u", "role": "U", "legs": ["o1", "o2", "i1", "i2"]}],
        "outputs": [["u", "o1", "f1"], ["u", "o2", "f2"], ["u", "i1", "c1"], ["u", "i2", "c2"]],
    })
    return Cone("id", schema, ("c1", "c2"), ("f1", "f2"), (), 2, 2)


def delta_delta():
    return Tensor(np.einsum("ac,bd->abcd", np.eye(2), np.eye(2)), ("o1", "o2", "i1", "i2"))


def random_state(rng, n):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    r = g @ g.conj().T
    return r / np.trace(r)


def test_trivial_cone_gives_identity():
    op = build_descending({"U": delta_delta()}, identity_cone())
    assert np.max(np.abs(op.matrix - np.eye(16))) < 1e-14
    asc = build_ascending({"U": delta_delta()}, identity_cone())
    assert np.max(np.abs(asc.matrix - np.eye(16))) < 1e-14


def test_cone_presets_load():
    assert available_cones() == ["a", "b", "c"]
    for c in ("a", "b", "c"):
        cone = load_cone(c)
        assert cone.sites == 2 and len(cone.env) == 4
    assert load_cone("cone-b").pattern == "aa"
    with pytest.raises(SchemaError):
        load_cone("zz")


def test_cone_partition_validation():
    schema = identity_cone().schema
    with pytest.raises(SchemaError):
        Cone("bad", schema, ("c1",), ("f1", "f2"), (), 2, 2)


def test_non_isometric_binding_is_rejected():
    d = load_decomposition("YQR").sample(np.random.default_rng(0))
    b = d.bindings()
    b["W"] = b["W"] * 1.5
    with pytest.raises(ConstraintViolation):
        build_descending(b, load_cone("a"))


@pytest.mark.parametrize("name", ["YQR", "YQT", "YQS"])
def test_cptp_and_duality_over_random_draws(name):
    rng = np.random.default_rng(11)
    dec = load_decomposition(name)
    for _ in range(20):
        d = dec.sample(rng)
        for c in ("a", "b", "c"):
            cone = load_cone(c)
            desc, asc = build_descending(d, cone), build_ascending(d, cone)
            assert desc.trace_defect() <= 1e-8
            assert asc.unital_defect() <= 1e-8
            assert desc.choi_min_eigenvalue() >= -1e-8
            assert desc.spectral_radius() <= 1 + 1e-8
            o = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            assert duality_defect(desc, asc, o + o.conj().T, random_state(rng, 4)) <= 1e-8


def test_descending_output_is_a_state():
    rng = np.random.default_rng(3)
    d = load_decomposition("YQR").sample(rng)
    op = build_descending(d, load_cone("a"))
    out = op.apply(random_state(rng, 4))
    assert abs(np.trace(out) - 1) < 1e-12
    assert np.max(np.abs(out - out.conj().T)) < 1e-12
    assert np.min(np.linalg.eigvalsh(out)) > -1e-12


def test_average_superoperator():
    d = load_decomposition("YQR").sample(np.random.default_rng(4))
    ops = [build_descending(d, load_cone(c)) for c in ("a", "b", "c")]
    avg = average_superoperator(ops)
    assert avg.trace_defect() < 1e-12
    assert np.allclose(avg.matrix, sum(o.matrix for o in ops) / 3)
    assert average_superoperator(ops[:1]) is ops[0]
    with pytest.raises(ValueError):
        average_superoperator(ops, [0.5, 0.5])
    with pytest.raises(ValueError):
        average_superoperator(ops, [1.2, -0.1, -0.1])
    with pytest.raises(ShapeError):
        average_superoperator([ops[0], Superoperator(1, 2, np.eye(4), "descending")])


def test_boundary_weights_sum_to_one():
    cones = [load_cone(c) for c in ("a", "b", "c")]
    w = boundary_weights(cones, load_grammar("54"))
    assert math.fsum(w) == pytest.approx(1.0)
    assert all(x > 0 for x in w)


def test_dimension_examples():
    assert dimensions_from_magnitudes([1 / S54], S54)[0] == pytest.approx(1.0, abs=1e-12)
    assert dimensions_from_magnitudes([0.1], 3.732)[0] == pytest.approx(math.log(10) / math.log(3.732), abs=1e-12)
    assert dimensions_from_magnitudes([0.0], S54)[0] == math.inf


def test_scaling_spectrum_of_diagonal_map():
    lam = [1.0, 1 / S54, S54 ** -2, 0.0]
    m = np.diag(lam + [0.0] * 12)
    spec = scaling_spectrum(Superoperator(2, 2, m, "descending"), S54, k=4)
    assert spec.dimensions[:3] == pytest.approx([0.0, 1.0, 2.0], abs=1e-12)
    assert spec.dimensions[3] == math.inf
    with pytest.raises(SolverError):
        scaling_spectrum(Superoperator(2, 2, 0.5 * np.eye(16), "descending"), S54)
    with pytest.raises(ValueError):
        scaling_spectrum(Superoperator(2, 2, np.eye(16), "descending"), 1.0)


def test_scaling_spectrum_of_real_draw():
    d = load_decomposition("YQR").sample(np.random.default_rng(0))
    spec = scaling_spectrum(build_descending(d, load_cone("a")), S54, k=8)
    assert len(spec.dimensions) == 8
    assert spec.dimensions[0] == pytest.approx(0.0, abs=1e-6)
    assert np.all(np.isreal(spec.dimensions))
    # order is by magnitude; below ~1e-12 the eigenvalues are rounding noise
    sig = spec.dimensions[spec.magnitudes > 1e-10]
    assert np.all(np.diff(sig) >= -1e-9)


@pytest.mark.parametrize("name", ["YQR", "YQT", "YQS"])
def test_fixed_point_of_average_map_is_nontrivial(name):
    rng = np.random.default_rng(7)
    dec = load_decomposition(name)
    cones = [load_cone(c) for c in available_cones()]
    for _ in range(20):
        d = dec.sample(rng)
        op = average_superoperator([build_descending(d, c) for c in cones])
        rho, ok = fixed_point(op)
        assert ok
        assert np.max(np.abs(op.apply(rho) - rho)) < 1e-9
        assert nontrivial_spectrum_check(rho)


def test_single_cone_a_map_is_unital():
    # every reduced leg of W is maximally mixed, so cone a alone fixes I/4
    d = load_decomposition("YQR").sample(np.random.default_rng(8))
    op = build_descending(d, load_cone("a"))
    assert op.unital_defect() < 1e-12
    assert not nontrivial_spectrum_check(fixed_point(op)[0])


def test_partial_trace_and_entropy():
    bell = np.zeros(4)
    bell[[0, 3]] = 1 / math.sqrt(2)
    rho = np.outer(bell, bell)
    red = partial_trace(rho, 2, [0])
    assert np.allclose(red, np.eye(2) / 2)
    assert von_neumann_entropy(red) == pytest.approx(math.log(2))
    assert von_neumann_entropy(rho) == pytest.approx(0.0, abs=1e-12)
    prod = np.kron(np.diag([1.0, 0.0]), np.eye(2) / 2)
    assert np.allclose(partial_trace(prod, 2, [1]), np.eye(2) / 2)


def test_kac_values():
    assert kac_dimension((4, 3), (1, 2)) == Fraction(1, 16)
    assert 2 * kac_dimension((4, 3), (1, 2)) == Fraction(1, 8)
    assert 2 * kac_dimension((4, 3), (2, 1)) == Fraction(1)
    assert model_table("ising").dimensions == [Fraction(1, 8), Fraction(1)]
    tci = model_table("tricritical-ising").weights
    assert tci == sorted(map(Fraction, ["0", "1/10", "3/5", "3/2", "3/80", "7/16"]))
    potts = model_table("potts3").weights
    assert potts == sorted(map(Fraction, ["0", "2/5", "7/5", "3", "1/15", "2/3"]))
    with pytest.raises(ValueError):
        kac_dimension((4, 2), (1, 1))
    with pytest.raises(ValueError):
        kac_dimension((4, 3), (3, 1))
    with pytest.raises(ValueError):
        model_table("xy")


def test_central_charge_inverts_cardy():
    c, const = 0.5, 0.3
    s = lambda n: c / 3 * math.log(n) + const
    assert central_charge(s(8), s(2), 8, 2) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValueError):
        central_charge(1.0, 1.0, 2, 2)


def test_correlation_exponent_matches_fit():
    spec = ScalingSpectrum(np.array([1.0, 0.5]), np.array([0.0, 0.125]), S54)
    p = correlation_exponent(spec, 1)
    r = np.geomspace(1, 1e3, 30)
    slope = np.polyfit(np.log(r), np.log(r ** -p), 1)[0]
    assert -slope == pytest.approx(0.25, abs=1e-10)
    with pytest.raises(IndexError):
        correlation_exponent(spec, 0)


@pytest.mark.parametrize("pq", [(4, 3), (5, 4), (6, 5), (7, 2)])
def test_kac_symmetry_is_exact(pq):
    p, q = pq
    for r in range(1, q):
        for s in range(1, p):
            assert kac_dimension(pq, (r, s)) == kac_dimension(pq, (q - r, p - s))


def test_correlation_exponent_matches_geometric_decay_of_sampled_spectrum():
    d = load_decomposition("YQR").sample(np.random.default_rng(9))
    spec = scaling_spectrum(build_descending(d, load_cone("a")), S54)
    lam = spec.magnitudes[1]
    L = np.arange(1, 7)
    # two-point function ~ |lambda_1|^(2L) at distance s^L
    slope = np.polyfit(L * math.log(S54), 2 * L * math.log(lam), 1)[0]
    p = correlation_exponent(spec, 1)
    assert abs(-slope - p) / p <= 1e-6


def test_averaging_identical_maps_returns_the_map():
    d = load_decomposition("YQT").sample(np.random.default_rng(12))
    op = build_descending(d, load_cone("b"))
    avg = average_superoperator([op, op], [0.5, 0.5])
    assert np.max(np.abs(avg.matrix - op.matrix)) < 1e-15
