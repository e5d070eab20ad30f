"""Sparse Pauli-Lindblad (SPL) noise: generators, layers, models and sampling.

A generator with Pauli ``P`` and rate ``lam`` acts as ``rho -> (1-p) rho + p P rho P``
with ``p = (1 - exp(-2 lam)) / 2``; every Pauli string is an eigenoperator with
eigenvalue ``exp(-2 lam)`` when it anticommutes with ``P`` and 1 otherwise.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from itertools import product as _cartesian
from pathlib import Path

import numpy as np

from .errors import DimensionError
from .pauli import LETTERS, PauliString, anticommute_matrix

AXES_1Q = ("X", "Y", "Z")
AXES_2Q = tuple(a + b for a, b in _cartesian("XYZ", repeat=2))


class RateClampWarning(UserWarning):
    """A perturbation asked for a negative total rate and was clamped at zero."""


@dataclass(frozen=True)
class SplGenerator:
    """Jump operator on one site or on two adjacent sites, with rate ``lam >= 0``."""

    sites: tuple[int, ...]
    axis: str
    rate: float

    def __post_init__(self) -> None:
        sites = tuple(int(s) for s in self.sites)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "axis", self.axis.upper())
        object.__setattr__(self, "rate", float(self.rate))
        if len(sites) not in (1, 2) or len(self.axis) != len(sites):
            raise ValueError(f"axis {self.axis!r} does not match sites {sites}")
        if any(ch not in "XYZ" for ch in self.axis):
            raise ValueError(f"axis letters must be X, Y or Z: {self.axis!r}")
        if len(sites) == 2 and abs(sites[0] - sites[1]) != 1:
            raise ValueError(f"two-qubit generators must act on adjacent sites: {sites}")
        if min(sites) < 0:
            raise ValueError("negative site index")
        if not self.rate >= 0.0:
            raise ValueError(f"rates must be non-negative, got {self.rate}")

    def pauli(self, n: int) -> PauliString:
        codes = [0] * n
        for s, ch in zip(self.sites, self.axis):
            codes[s] = LETTERS.index(ch)
        return PauliString.from_letters(codes)


@dataclass(frozen=True)
class SplLayer:
    """All generators of the noise channel preceding one circuit layer."""

    n: int
    generators: tuple[SplGenerator, ...] = ()

    def __post_init__(self) -> None:
        gens = tuple(self.generators)
        object.__setattr__(self, "generators", gens)
        for g in gens:
            if max(g.sites) >= self.n:
                raise DimensionError(f"generator on sites {g.sites} outside {self.n} qubits")

    @cached_property
    def rates(self) -> np.ndarray:
        return np.array([g.rate for g in self.generators], dtype=float)

    @cached_property
    def masks(self) -> tuple[np.ndarray, np.ndarray]:
        paulis = [g.pauli(self.n) for g in self.generators]
        return (np.array([p.x for p in paulis], dtype=np.uint64),
                np.array([p.z for p in paulis], dtype=np.uint64))

    def with_rates(self, rates) -> SplLayer:
        gens = tuple(SplGenerator(g.sites, g.axis, r) for g, r in zip(self.generators, rates))
        return SplLayer(self.n, gens)


@dataclass(frozen=True)
class NoiseModel:
    """One :class:`SplLayer` per circuit layer plus the instability ``theta``."""

    layers: tuple[SplLayer, ...]
    theta: float = 0.0

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValueError("a noise model needs at least one layer")
        if len({layer.n for layer in layers}) != 1:
            raise DimensionError("all layers must share the qubit count")
        if self.theta < 0:
            raise ValueError("theta must be non-negative")

    @property
    def n(self) -> int:
        return self.layers[0].n

    @property
    def L(self) -> int:
        return len(self.layers)

    def rates(self) -> np.ndarray:
        """All rates of all layers, concatenated in layer order."""
        return np.concatenate([layer.rates for layer in self.layers])

    @property
    def epsilon(self) -> float:
        """Density of errors, ``gamma**(1/(n L)) - 1``."""
        return math.expm1(2.0 * float(self.rates().sum()) / (self.n * self.L))


# -- fidelities and overhead factors ------------------------------------------

def _check(layer: SplLayer, beta: PauliString) -> None:
    if beta.n != layer.n:
        raise DimensionError(f"string on {beta.n} qubits, layer on {layer.n}")


def fidelity(layer: SplLayer, beta: PauliString) -> float:
    """Eigenvalue of the layer's channel on ``beta``."""
    _check(layer, beta)
    if not layer.generators:
        return 1.0
    gx, gz = layer.masks
    anti = anticommute_matrix([beta.x], [beta.z], gx, gz)[0]
    return math.exp(-2.0 * float(layer.rates[anti].sum()))


def log_fidelities(layer: SplLayer, xs, zs) -> np.ndarray:
    """``ln f`` for many strings given as uint64 mask arrays."""
    xs = np.asarray(xs, dtype=np.uint64)
    if not layer.generators:
        return np.zeros(xs.shape[0])
    gx, gz = layer.masks
    anti = anticommute_matrix(xs, zs, gx, gz)
    return -2.0 * (anti @ layer.rates)


def gamma(layer: SplLayer) -> float:
    return math.exp(2.0 * float(layer.rates.sum())) if layer.generators else 1.0


def gamma_total(model: NoiseModel) -> float:
    return math.exp(2.0 * float(model.rates().sum()))


def inverse_quasiprobability(g: SplGenerator) -> tuple[float, float, float]:
    """Quasiprobabilities of ``I`` and ``P`` in the inverse of one generator."""
    e = math.exp(2.0 * g.rate)
    return (1.0 + e) / 2.0, (1.0 - e) / 2.0, e


def forward_error_probability(g: SplGenerator, power: float = 1.0) -> float:
    """Probability of applying ``P`` when sampling the channel raised to ``power``."""
    if power < 0:
        raise ValueError("power must be non-negative")
    return -math.expm1(-2.0 * power * g.rate) / 2.0


def purity_overhead_bound(layer: SplLayer) -> float:
    """Product over supports of the purity parameter of each local inverse map.

    For a support of ``m`` qubits, ``nu = 4**-m * sum f**-2`` over the ``4**m``
    local strings, with ``f`` the fidelity of the generators living exactly on
    that support.
    """
    groups: dict[tuple[int, ...], list[SplGenerator]] = {}
    for g in layer.generators:
        groups.setdefault(tuple(sorted(g.sites)), []).append(g)
    total = 1.0
    for support, gens in groups.items():
        m = len(support)
        local = SplLayer(m, tuple(
            SplGenerator(tuple(support.index(s) for s in g.sites), g.axis, g.rate) for g in gens))
        codes = np.array(list(_cartesian(range(4), repeat=m)))
        strings = [PauliString.from_letters(c) for c in codes]
        logf = log_fidelities(local, [s.x for s in strings], [s.z for s in strings])
        total *= float(np.mean(np.exp(-2.0 * logf)))
    return total


# -- model construction -------------------------------------------------------

def chain_layer(n: int, rates_1q, rates_2q) -> SplLayer:
    """Linear-chain layer: 3 axes per qubit, then 9 axes per nearest-neighbour pair."""
    rates_1q = np.asarray(rates_1q, dtype=float).reshape(n, 3)
    rates_2q = np.asarray(rates_2q, dtype=float).reshape(max(n - 1, 0), 9)
    gens = [SplGenerator((q,), a, r) for q in range(n) for a, r in zip(AXES_1Q, rates_1q[q])]
    gens += [SplGenerator((q, q + 1), a, r)
             for q in range(n - 1) for a, r in zip(AXES_2Q, rates_2q[q])]
    return SplLayer(n, tuple(gens))


def sample_model(n: int, L: int, epsilon: float, rng: np.random.Generator,
                 theta: float = 0.0) -> NoiseModel:
    """Draw clipped-normal rates, ``N(eps/12, eps/12)`` and ``N(eps/36, eps/36)``."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    layers = []
    for _ in range(L):
        r1 = rng.normal(epsilon / 12, epsilon / 12, size=3 * n)
        r2 = rng.normal(epsilon / 36, epsilon / 36, size=9 * (n - 1))
        layers.append(chain_layer(n, np.clip(r1, 0, None), np.clip(r2, 0, None)))
    return NoiseModel(tuple(layers), theta)


def perturb_model(model: NoiseModel, rng: np.random.Generator) -> NoiseModel:
    """Scale each layer's rates so that ``gamma_l -> gamma_l (1 + theta_l eps)**n``.

    ``theta_l ~ N(0, model.theta)`` and ``eps`` is the model's nominal density.
    A request for a negative total rate is clamped at zero with a warning.
    """
    if model.theta == 0:
        return model
    eps, n = model.epsilon, model.n
    layers = []
    for layer, th in zip(model.layers, rng.normal(0.0, model.theta, size=model.L)):
        total = float(layer.rates.sum())
        if total == 0.0:
            layers.append(layer)
            continue
        base = 1.0 + th * eps
        target = total + 0.5 * n * math.log(base) if base > 0 else -math.inf
        if target < 0:
            warnings.warn(f"layer rate scale {target / total:.3g} clamped at 0", RateClampWarning)
            target = 0.0
        layers.append(layer.with_rates(layer.rates * (target / total)))
    return NoiseModel(tuple(layers), model.theta)


def two_qubit_depolarizing(pair: tuple[int, int], p: float) -> list[SplGenerator]:
    """Generators of ``rho -> (1-p) rho + p tr_pair(rho) I/4`` on an adjacent pair.

    All 15 nontrivial two-qubit Paulis share ``lam = -ln(1-p)/16``; the weight-one
    members become single-site generators.
    """
    lam = -math.log1p(-p) / 16.0
    a, b = pair
    gens = [SplGenerator((a,), ax, lam) for ax in AXES_1Q]
    gens += [SplGenerator((b,), ax, lam) for ax in AXES_1Q]
    gens += [SplGenerator((a, b), ax, lam) for ax in AXES_2Q]
    return gens


# -- JSON I/O -----------------------------------------------------------------

def model_to_dict(model: NoiseModel) -> dict:
    return {
        "n": model.n,
        "layers": [[{"sites": list(g.sites), "axis": g.axis, "rate": g.rate}
                    for g in layer.generators] for layer in model.layers],
        "theta": model.theta,
    }


def model_from_dict(obj: dict) -> NoiseModel:
    n = int(obj["n"])
    layers = [SplLayer(n, tuple(SplGenerator(tuple(g["sites"]), g["axis"], g["rate"])
                                for g in layer))
              for layer in obj["layers"]]
    return NoiseModel(tuple(layers), float(obj.get("theta", 0.0)))


def save_model(model: NoiseModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> NoiseModel:
    return model_from_dict(json.loads(Path(path).read_text()))
