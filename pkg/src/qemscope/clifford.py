"""Layered Clifford circuits and Heisenberg-picture propagation of Pauli strings.

A :class:`CliffordLayer` applies its single-qubit Cliffords first and then its
CNOTs, ``U = CNOTs @ SQ``.  Its dagger (``inverse=True``) applies the CNOTs first
and the inverse single-qubit gates afterwards.  Noise layer ``l`` acts right before
Clifford layer ``l``, so the trajectory string seen by noise layer ``l`` is
``U_{>=l}^dag O U_{>=l}``.

Batched routines work on uint64 masks and therefore need ``n <= 64``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CapacityError, DimensionError
from .noise import NoiseModel, log_fidelities
from .pauli import PauliString

# Single-qubit Clifford group: shortest words over {X, Y, Z, H, S}, gates listed
# in time order (the first letter acts first).
SQ_NAMES = (
    "I", "X", "Y", "Z", "H", "S", "XH", "XS", "YH", "YS", "ZH", "ZS",
    "HS", "SH", "XHS", "XSH", "YHS", "YSH", "ZHS", "ZSH", "HSH", "SHS", "YHSH", "YSHS",
)

# Forward conjugation g P g^dag of the generators: code -> (sign, code), codes X=1 Y=2 Z=3.
_GENERATOR_FWD = {
    "I": {1: (1, 1), 2: (1, 2), 3: (1, 3)},
    "X": {1: (1, 1), 2: (-1, 2), 3: (-1, 3)},
    "Y": {1: (-1, 1), 2: (1, 2), 3: (-1, 3)},
    "Z": {1: (-1, 1), 2: (-1, 2), 3: (1, 3)},
    "H": {1: (1, 3), 2: (-1, 2), 3: (1, 1)},
    "S": {1: (1, 2), 2: (-1, 1), 3: (1, 3)},
}


def _word_map(word: str) -> dict[int, tuple[int, int]]:
    out = dict(_GENERATOR_FWD["I"])
    for g in word.upper():
        if g not in _GENERATOR_FWD:
            raise ValueError(f"unknown single-qubit gate {g!r} in {word!r}")
        step = _GENERATOR_FWD[g]
        out = {p: (s * step[q][0], step[q][1]) for p, (s, q) in out.items()}
    return out


def _tables():
    fwd_sign = np.ones((24, 4), dtype=np.int8)
    fwd_code = np.tile(np.arange(4), (24, 1))
    back_sign = np.ones((24, 4), dtype=np.int8)
    back_code = np.tile(np.arange(4), (24, 1))
    for k, name in enumerate(SQ_NAMES):
        for p, (s, q) in _word_map(name).items():
            fwd_sign[k, p], fwd_code[k, p] = s, q
            back_sign[k, q], back_code[k, q] = s, p
    return fwd_sign, fwd_code, back_sign, back_code


SQ_FWD_SIGN, SQ_FWD_CODE, SQ_BACK_SIGN, SQ_BACK_CODE = _tables()
_KEY_TO_INDEX = {tuple(map(tuple, zip(SQ_FWD_SIGN[k], SQ_FWD_CODE[k]))): k for k in range(24)}


def clifford_index(name: str) -> int:
    """Table index of a single-qubit Clifford given as a name or any gate word."""
    m = _word_map(name)
    key = ((1, 0),) + tuple(m[p] for p in (1, 2, 3))
    return _KEY_TO_INDEX[key]


def clifford_inverse(index: int) -> int:
    key = ((1, 0),) + tuple((int(SQ_BACK_SIGN[index, p]), int(SQ_BACK_CODE[index, p]))
                            for p in (1, 2, 3))
    return _KEY_TO_INDEX[key]


@dataclass(frozen=True)
class CliffordLayer:
    """Single-qubit Cliffords on every qubit followed by disjoint adjacent CNOTs."""

    n: int
    cnots: tuple[tuple[int, int], ...] = ()
    sq: tuple[int, ...] = ()
    inverse: bool = False

    def __post_init__(self) -> None:
        cnots = tuple((int(c), int(t)) for c, t in self.cnots)
        sq = tuple(int(k) for k in self.sq) or (0,) * self.n
        object.__setattr__(self, "cnots", cnots)
        object.__setattr__(self, "sq", sq)
        if len(sq) != self.n:
            raise DimensionError(f"{len(sq)} single-qubit gates for {self.n} qubits")
        if any(not 0 <= k < 24 for k in sq):
            raise ValueError("single-qubit Clifford index out of range")
        used: set[int] = set()
        for c, t in cnots:
            if abs(c - t) != 1 or not (0 <= c < self.n and 0 <= t < self.n):
                raise ValueError(f"CNOT ({c}, {t}) is not an adjacent in-range pair")
            if c in used or t in used:
                raise ValueError("CNOT pairs overlap")
            used.update((c, t))

    def dagger(self) -> CliffordLayer:
        return CliffordLayer(self.n, self.cnots, self.sq, not self.inverse)


# -- batched conjugation -------------------------------------------------------

_ONE = np.uint64(1)


def _apply_cnots(layer: CliffordLayer, xs, zs, signs) -> None:
    for c, t in layer.cnots:
        c, t = np.uint64(c), np.uint64(t)
        xc, zc = (xs >> c) & _ONE, (zs >> c) & _ONE
        xt, zt = (xs >> t) & _ONE, (zs >> t) & _ONE
        flip = xc & zt & (xt ^ zc ^ _ONE)
        signs[flip.astype(bool)] *= -1
        xs ^= xc << t
        zs ^= zt << c


def _apply_sq(layer: CliffordLayer, xs, zs, signs, forward: bool) -> None:
    sign_table = SQ_FWD_SIGN if forward else SQ_BACK_SIGN
    code_table = SQ_FWD_CODE if forward else SQ_BACK_CODE
    for q, k in enumerate(layer.sq):
        if k == 0:
            continue
        sh = np.uint64(q)
        xb = ((xs >> sh) & _ONE).astype(np.int64)
        zb = ((zs >> sh) & _ONE).astype(np.int64)
        code = np.where(zb == 1, 3 - xb, xb)
        signs *= sign_table[k, code]
        new = code_table[k, code]
        nx = ((new == 1) | (new == 2)).astype(np.uint64)
        nz = ((new == 2) | (new == 3)).astype(np.uint64)
        mask = ~(_ONE << sh)
        xs &= mask
        zs &= mask
        xs |= nx << sh
        zs |= nz << sh


def conjugate_batch(layer: CliffordLayer, xs, zs, signs, heisenberg: bool = True) -> None:
    """In-place ``P -> U^dag P U`` (``heisenberg``) or ``P -> U P U^dag``."""
    # U = C S for a plain layer and U = S^dag C for a dagger layer.
    cnot_first = heisenberg != layer.inverse
    if cnot_first:
        _apply_cnots(layer, xs, zs, signs)
        _apply_sq(layer, xs, zs, signs, forward=False)
    else:
        _apply_sq(layer, xs, zs, signs, forward=True)
        _apply_cnots(layer, xs, zs, signs)


def _sign_of(p: PauliString) -> int:
    if p.phase % 2:
        raise ValueError(f"{p} is not Hermitian")
    return 1 if p.phase == 0 else -1


def conjugate(layer: CliffordLayer, p: PauliString, heisenberg: bool = True) -> PauliString:
    if p.n != layer.n:
        raise DimensionError(f"string on {p.n} qubits, layer on {layer.n}")
    xs = np.array([p.x], dtype=np.uint64)
    zs = np.array([p.z], dtype=np.uint64)
    signs = np.array([_sign_of(p)], dtype=np.int8)
    conjugate_batch(layer, xs, zs, signs, heisenberg)
    return PauliString(p.n, int(xs[0]), int(zs[0]), 0 if signs[0] > 0 else 2)


# -- circuits ------------------------------------------------------------------

@dataclass(frozen=True)
class NoisyCircuit:
    """Clifford layers with one noise layer preceding each of them."""

    cliffords: tuple[CliffordLayer, ...]
    noise: NoiseModel

    def __post_init__(self) -> None:
        cl = tuple(self.cliffords)
        object.__setattr__(self, "cliffords", cl)
        if len(cl) != self.noise.L:
            raise DimensionError(f"{len(cl)} Clifford layers but {self.noise.L} noise layers")
        if any(layer.n != self.noise.n for layer in cl):
            raise DimensionError("Clifford and noise layers disagree on n")
        if self.noise.n > 64:
            raise CapacityError("Pauli propagation supports at most 64 qubits")

    @property
    def n(self) -> int:
        return self.noise.n

    @property
    def L(self) -> int:
        return len(self.cliffords)


@dataclass(frozen=True)
class Propagation:
    """Heisenberg trajectory, damping ``K`` and accumulated Clifford sign."""

    trajectory: tuple[PauliString, ...]
    K: float
    sign: int

    @property
    def ideal_expectation(self) -> float:
        """``<0|U^dag O U|0>``: the sign when the initial-time string is Z-type, else 0."""
        return float(self.sign) if self.trajectory[0].is_z_type else 0.0


def propagate(circuit: NoisyCircuit, observable: PauliString) -> Propagation:
    if observable.n != circuit.n:
        raise DimensionError(f"observable on {observable.n} qubits, circuit on {circuit.n}")
    xs = np.array([observable.x], dtype=np.uint64)
    zs = np.array([observable.z], dtype=np.uint64)
    signs = np.array([_sign_of(observable)], dtype=np.int8)
    traj = [None] * circuit.L
    log_k = 0.0
    for l in range(circuit.L - 1, -1, -1):
        conjugate_batch(circuit.cliffords[l], xs, zs, signs)
        traj[l] = PauliString(circuit.n, int(xs[0]), int(zs[0]))
        log_k += float(log_fidelities(circuit.noise.layers[l], xs, zs)[0])
    return Propagation(tuple(traj), math.exp(log_k), int(signs[0]))


def log_damping_batch(circuit: NoisyCircuit, xs, zs, power: float = 1.0) -> np.ndarray:
    """``ln K`` of many observables (uint64 masks), optionally for noise ``**power``."""
    xs = np.array(xs, dtype=np.uint64)
    zs = np.array(zs, dtype=np.uint64)
    signs = np.ones(xs.shape[0], dtype=np.int8)
    out = np.zeros(xs.shape[0])
    for l in range(circuit.L - 1, -1, -1):
        conjugate_batch(circuit.cliffords[l], xs, zs, signs)
        out += log_fidelities(circuit.noise.layers[l], xs, zs)
    return power * out


def causal_area(circuit: NoisyCircuit, observable: PauliString) -> int:
    """Number of (qubit, layer) cells covered by the observable's trajectory."""
    return sum(p.weight for p in propagate(circuit, observable).trajectory)


def random_brickwork(n: int, L: int, rng: np.random.Generator) -> list[CliffordLayer]:
    """Alternating even/odd CNOT brickwork (control on the left) with random 1q Cliffords."""
    if n < 2:
        raise ValueError("brickwork needs at least two qubits")
    layers = []
    for l in range(L):
        pairs = tuple((q, q + 1) for q in range(l % 2, n - 1, 2))
        sq = tuple(int(k) for k in rng.integers(0, 24, size=n))
        layers.append(CliffordLayer(n, pairs, sq))
    return layers


def stabilizer_observables(circuit: NoisyCircuit, count: int,
                           rng: np.random.Generator) -> list[PauliString]:
    """``U G U^dag`` for distinct random Z-type ``G``, signed so that ``<O>_ideal = +1``.

    Non-identity ``G`` come first; the identity is included only when ``count == 2**n``.
    """
    n = circuit.n
    if not 1 <= count <= 2 ** n:
        raise ValueError(f"count must lie in [1, 2**{n}]")
    if 2 ** n <= 1 << 20:
        zmasks = rng.permutation(np.arange(1, 2 ** n, dtype=np.uint64))[:count]
    else:
        picked: set[int] = set()
        while len(picked) < count:
            z = int(rng.integers(1, 2 ** n, dtype=np.uint64))
            picked.add(z)
        zmasks = np.array(sorted(picked), dtype=np.uint64)
        zmasks = rng.permutation(zmasks)
    if count == 2 ** n:
        zmasks = np.concatenate([zmasks, np.zeros(1, dtype=np.uint64)])
    xs = np.zeros(count, dtype=np.uint64)
    zs = zmasks.astype(np.uint64).copy()
    signs = np.ones(count, dtype=np.int8)
    for layer in circuit.cliffords:
        conjugate_batch(layer, xs, zs, signs, heisenberg=False)
    return [PauliString(n, int(x), int(z), 0 if s > 0 else 2) for x, z, s in zip(xs, zs, signs)]


# -- mirrored non-Clifford model -----------------------------------------------

@dataclass(frozen=True)
class ExponentStatistics:
    mean: float
    variance: float


def exponent_statistics(noise: NoiseModel) -> ExponentStatistics:
    r = noise.rates()
    return ExponentStatistics(float(r.sum()), float(np.sum(r * r)))


@dataclass(frozen=True)
class MirroredCircuitSpec:
    """``H``, ``T`` on chosen qubits, Clifford core, its inverse, ``T^dag``, ``H``; observable ``Z^n``.

    ``noise`` has one layer per Clifford layer of the full mirrored depth ``2 * half_depth``.
    """

    n: int
    half_depth: int
    t_gate_positions: tuple[int, ...]
    clifford_core: tuple[CliffordLayer, ...]
    noise: NoiseModel

    def __post_init__(self) -> None:
        object.__setattr__(self, "t_gate_positions", tuple(sorted(set(self.t_gate_positions))))
        object.__setattr__(self, "clifford_core", tuple(self.clifford_core))
        if len(self.clifford_core) != self.half_depth:
            raise ValueError("clifford_core must have half_depth layers")
        if self.noise.L != 2 * self.half_depth or self.noise.n != self.n:
            raise DimensionError("noise must cover the full mirrored depth")
        if any(not 0 <= q < self.n for q in self.t_gate_positions):
            raise ValueError("T-gate position out of range")

    @property
    def L(self) -> int:
        return 2 * self.half_depth

    @property
    def n_t(self) -> int:
        return len(self.t_gate_positions)

    def circuit(self) -> NoisyCircuit:
        layers = self.clifford_core + tuple(layer.dagger() for layer in reversed(self.clifford_core))
        return NoisyCircuit(layers, self.noise)


MAX_EXACT_T_GATES = 20


def mirrored_fidelity_products(spec: MirroredCircuitSpec, mode: str = "exact",
                               samples: int | None = None,
                               rng: np.random.Generator | None = None,
                               chunk: int = 1 << 14) -> np.ndarray:
    """Damping ``K_a`` of each X/Y assignment ``a`` on the T-gate qubits.

    The noisy expectation at noise gain ``G`` is ``mean(K_a**G)`` over all
    ``2**n_t`` assignments; ``"monte-carlo"`` mode draws ``samples`` of them.
    """
    n, pos = spec.n, spec.t_gate_positions
    if mode == "exact":
        if spec.n_t > MAX_EXACT_T_GATES:
            raise CapacityError(f"exact mode supports at most {MAX_EXACT_T_GATES} T gates")
        assignments = np.arange(2 ** spec.n_t, dtype=np.uint64)
    elif mode == "monte-carlo":
        if samples is None or rng is None:
            raise ValueError("monte-carlo mode needs samples and rng")
        assignments = rng.integers(0, 2 ** spec.n_t, size=samples, dtype=np.uint64)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    circuit = spec.circuit()
    all_x = np.uint64((1 << n) - 1)
    out = np.empty(assignments.shape[0])
    for start in range(0, assignments.shape[0], chunk):
        a = assignments[start:start + chunk]
        zs = np.zeros(a.shape[0], dtype=np.uint64)
        for j, q in enumerate(pos):
            zs |= ((a >> np.uint64(j)) & _ONE) << np.uint64(q)
        xs = np.full(a.shape[0], all_x, dtype=np.uint64)
        out[start:start + chunk] = np.exp(log_damping_batch(circuit, xs, zs))
    return out


# -- JSON I/O ------------------------------------------------------------------

def circuit_to_dict(layers) -> dict:
    layers = list(layers)
    return {
        "n": layers[0].n,
        "layers": [{"cnots": [list(p) for p in layer.cnots],
                    "sq": [SQ_NAMES[k] for k in layer.sq],
                    **({"inverse": True} if layer.inverse else {})} for layer in layers],
    }


def circuit_from_dict(obj: dict) -> list[CliffordLayer]:
    n = int(obj["n"])
    out = []
    for layer in obj["layers"]:
        sq = tuple(clifford_index(name) for name in layer.get("sq", ["I"] * n))
        out.append(CliffordLayer(n, tuple(tuple(p) for p in layer.get("cnots", [])), sq,
                                 bool(layer.get("inverse", False))))
    return out


def save_circuit(layers, path) -> None:
    Path(path).write_text(json.dumps(circuit_to_dict(layers), indent=1) + "\n")


def load_circuit(path) -> list[CliffordLayer]:
    return circuit_from_dict(json.loads(Path(path).read_text()))
