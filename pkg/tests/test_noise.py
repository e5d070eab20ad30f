import math
import warnings

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from qemscope.errors import DimensionError
from qemscope.noise import (
    NoiseModel,
    RateClampWarning,
    SplGenerator,
    SplLayer,
    chain_layer,
    fidelity,
    forward_error_probability,
    gamma,
    gamma_total,
    inverse_quasiprobability,
    log_fidelities,
    model_from_dict,
    model_to_dict,
    perturb_model,
    purity_overhead_bound,
    sample_model,
    two_qubit_depolarizing,
)
from qemscope.pauli import PauliString, random_pauli

from .oracles import all_labels, pad_label, pauli_matrix, ptm, spl_superop, superop
from .strategies import spl_layers


def dense_fidelities(layer):
    gens = [(pad_label((g.sites, g.axis), layer.n), g.rate) for g in layer.generators]
    R = ptm(spl_superop(layer.n, gens), layer.n)
    assert np.allclose(R, np.diag(np.diag(R)), atol=1e-12)  # Pauli-diagonal channel
    return dict(zip(all_labels(layer.n), np.diag(R)))


def test_identity_and_single_generator():
    layer = SplLayer(2, (SplGenerator((0,), "Z", 0.07),))
    assert fidelity(layer, PauliString.identity(2)) == 1.0
    assert fidelity(layer, PauliString.from_label("XI")) == pytest.approx(math.exp(-0.14))
    assert fidelity(layer, PauliString.from_label("ZX")) == 1.0


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        fidelity(SplLayer(2), PauliString.from_label("X"))


@settings(max_examples=25, deadline=None)
@given(spl_layers(max_n=3))
def test_fidelity_matches_dense_ptm(layer):
    dense = dense_fidelities(layer)
    for label, f in dense.items():
        assert abs(fidelity(layer, PauliString.from_label(label)) - f) < 1e-12


@settings(max_examples=50, deadline=None)
@given(spl_layers(max_n=4))
def test_geometric_mean_identity(layer):
    strings = [PauliString.from_label(lb) for lb in all_labels(layer.n)]
    logf = log_fidelities(layer, [s.x for s in strings], [s.z for s in strings])
    assert abs(math.exp(logf.mean()) - gamma(layer) ** -0.5) < 1e-12


@settings(max_examples=50, deadline=None)
@given(spl_layers(max_n=4), st.data())
def test_fidelity_multiplicative_over_split(layer, data):
    k = data.draw(st.integers(0, len(layer.generators)))
    a = SplLayer(layer.n, layer.generators[:k])
    b = SplLayer(layer.n, layer.generators[k:])
    beta = PauliString.from_letters(data.draw(st.lists(st.integers(0, 3), min_size=layer.n,
                                                       max_size=layer.n)))
    assert abs(fidelity(a, beta) * fidelity(b, beta) - fidelity(layer, beta)) < 1e-12


def test_gamma_values():
    assert gamma(SplLayer(3)) == 1.0
    # eps = 0.16 %, N = L = 100: gamma = (1 + eps)**(N L), quoted as e**16 = 8.9e6
    n, L, eps = 100, 100, 0.0016
    lam = n * math.log1p(eps) / 2 / (3 * n)
    layer = SplLayer(n, tuple(SplGenerator((q,), a, lam) for q in range(n) for a in "XYZ"))
    model = NoiseModel((layer,) * L)
    assert gamma_total(model) == pytest.approx(8.9e6, rel=0.02)
    assert model.epsilon == pytest.approx(eps, rel=1e-9)


def test_depolarizing_gamma():
    p, n, L = 0.002, 20, 10
    layers = []
    for l in range(L):
        gens = []
        for q in range(l % 2, n - 1, 2):
            gens += two_qubit_depolarizing((q, q + 1), p)
        layers.append(SplLayer(n, tuple(gens)))
    count = sum(len(range(l % 2, n - 1, 2)) for l in range(L))
    got = gamma_total(NoiseModel(tuple(layers)))
    assert got == pytest.approx((1 - p) ** (-15 * count / 8), rel=1e-12)
    assert got == pytest.approx((1 + 15 * p / 8) ** count, rel=5e-3)
    # depolarizing fidelity of any nontrivial pair string is 1 - p
    one = SplLayer(2, tuple(two_qubit_depolarizing((0, 1), p)))
    for lb in all_labels(2)[1:]:
        assert fidelity(one, PauliString.from_label(lb)) == pytest.approx(1 - p, abs=1e-14)


def test_sample_model_zero():
    model = sample_model(4, 3, 0.0, np.random.default_rng(0))
    assert gamma_total(model) == 1.0
    assert not model.rates().any()


def test_sample_model_gamma_per_layer():
    rng = np.random.default_rng(1)
    model = sample_model(30, 100, 0.002, rng)
    mean_gamma = np.mean([gamma(layer) for layer in model.layers])
    assert mean_gamma == pytest.approx(1.002 ** 30, rel=0.10)


def test_sample_model_realized_epsilon():
    model = sample_model(30, 30, 0.022, np.random.default_rng(2))
    assert model.epsilon == pytest.approx(0.022, rel=0.10)


def test_perturb_theta_zero_is_identity():
    model = sample_model(4, 4, 0.01, np.random.default_rng(3))
    assert perturb_model(model, np.random.default_rng(4)) is model


def test_perturb_theta_statistics():
    n, eps, theta = 4, 0.01, 0.018
    base = NoiseModel((chain_layer(n, np.full(3 * n, eps / 12), np.full(9 * (n - 1), eps / 36)),)
                      * 10_000, theta)
    out = perturb_model(base, np.random.default_rng(5))
    e = base.epsilon
    thetas = np.array([(math.exp(2 * (b.rates.sum() - a.rates.sum()) / n) - 1) / e
                       for a, b in zip(base.layers, out.layers)])
    assert abs(thetas.mean()) <= 4 * theta / math.sqrt(thetas.size)
    assert thetas.std(ddof=1) == pytest.approx(theta, rel=0.05)


def test_perturb_bias_magnitude():
    # ideal PEC with the learned model on drifted noise returns prod (1 + theta eps)**(-N/2)
    n, L, eps, theta = 100, 100, 0.0016, 0.018
    # one lumped generator per layer carries the whole layer rate
    layer = SplLayer(n, (SplGenerator((0,), "X", n * math.log1p(eps) / 2),))
    model = NoiseModel((layer,) * L, theta)
    rng = np.random.default_rng(6)
    devs = []
    for _ in range(400):
        drift = perturb_model(model, rng)
        log_ratio = math.log(gamma_total(drift)) - math.log(gamma_total(model))
        devs.append(math.exp(-log_ratio / 2) - 1)
    assert np.std(devs) == pytest.approx(0.0144, rel=0.15)


def test_perturb_clamp_reports():
    layer = SplLayer(1, (SplGenerator((0,), "X", 1e-6),))
    model = NoiseModel((layer,) * 50, theta=50.0)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        out = perturb_model(model, np.random.default_rng(0))
    assert any(issubclass(w.category, RateClampWarning) for w in caught)
    assert (out.rates() >= 0).all()


def test_inverse_quasiprobability_values():
    assert inverse_quasiprobability(SplGenerator((0,), "X", 0.0)) == (1.0, 0.0, 1.0)
    q0, q1, g = inverse_quasiprobability(SplGenerator((0,), "X", 0.01))
    assert g == pytest.approx(math.exp(0.02))
    assert q0 + q1 == pytest.approx(1.0)
    assert abs(q0) + abs(q1) == pytest.approx(g)
    assert q1 <= 0


def test_inverse_composition_matches_dense_inverse():
    rng = np.random.default_rng(8)
    gens = [SplGenerator((0,), "X", 0.03), SplGenerator((1,), "Y", 0.05),
            SplGenerator((0, 1), "ZX", 0.02), SplGenerator((0, 1), "YY", 0.04)]
    forward = spl_superop(2, [(pad_label((g.sites, g.axis), 2), g.rate) for g in gens])
    inv = np.eye(16, dtype=complex)
    for g in gens:
        q0, q1, _ = inverse_quasiprobability(g)
        P = pauli_matrix(pad_label((g.sites, g.axis), 2))
        inv = superop([(q0, np.eye(4)), (q1, P)]) @ inv
    assert np.allclose(inv, np.linalg.inv(forward), atol=1e-12)
    assert np.allclose(inv @ forward, np.eye(16), atol=1e-12)
    del rng


def test_forward_error_probability():
    g = SplGenerator((0,), "Z", 0.05)
    assert forward_error_probability(g, 0.0) == 0.0
    assert forward_error_probability(SplGenerator((0,), "Z", 1e4), 1.0) == pytest.approx(0.5)
    # dense oracle: exp of the Lindbladian lam (P . P - .)
    P = pauli_matrix("Z")
    lind = 0.05 * (np.kron(P, P.conj()) - np.eye(4))
    sop = scipy.linalg.expm(lind)
    p = forward_error_probability(g, 1.0)
    assert np.allclose(sop, superop([(1 - p, np.eye(2)), (p, P)]), atol=1e-14)
    sop2 = scipy.linalg.expm(2.5 * lind)
    p2 = forward_error_probability(g, 2.5)
    assert np.allclose(sop2, superop([(1 - p2, np.eye(2)), (p2, P)]), atol=1e-14)
    with pytest.raises(ValueError):
        forward_error_probability(g, -1.0)


def test_purity_bound_single_qubit_formula():
    lx, ly, lz = 0.01, 0.02, 0.035
    layer = SplLayer(1, (SplGenerator((0,), "X", lx), SplGenerator((0,), "Y", ly),
                         SplGenerator((0,), "Z", lz)))
    expected = 0.25 * (1 + math.exp(4 * (ly + lz)) + math.exp(4 * (lx + lz))
                       + math.exp(4 * (lx + ly)))
    assert purity_overhead_bound(layer) == pytest.approx(expected, rel=1e-14)
    assert purity_overhead_bound(SplLayer(3)) == 1.0


def test_purity_bound_close_to_gamma():
    model = sample_model(8, 1, 0.002, np.random.default_rng(9))
    layer = model.layers[0]
    g = gamma(layer)
    assert abs(purity_overhead_bound(layer) - g) / g <= 3 * 0.002


@settings(max_examples=40, deadline=None)
@given(spl_layers(max_n=3))
def test_purity_bound_at_least_one(layer):
    nu = purity_overhead_bound(layer)
    assert nu >= 1.0
    if layer.rates.max(initial=0.0) > 1e-9:
        assert nu > 1.0


def test_log_fidelity_dispersion():
    rng = np.random.default_rng(10)
    layer = sample_model(10, 1, 0.01, rng).layers[0]
    strings = [random_pauli(10, rng) for _ in range(20_000)]
    strings = [s for s in strings if not s.is_identity]
    logf = log_fidelities(layer, [s.x for s in strings], [s.z for s in strings])
    assert logf.var() == pytest.approx(float(np.sum(layer.rates ** 2)), rel=0.25)


def test_json_round_trip_and_validation():
    model = sample_model(3, 2, 0.01, np.random.default_rng(12), theta=0.02)
    assert model_from_dict(model_to_dict(model)) == model
    with pytest.raises(ValueError):
        model_from_dict({"n": 3, "layers": [[{"sites": [0, 2], "axis": "XX", "rate": 0.1}]]})
    with pytest.raises(ValueError):
        model_from_dict({"n": 3, "layers": [[{"sites": [0], "axis": "X", "rate": -0.1}]]})
