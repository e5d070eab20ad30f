"""Kicked isotropic Heisenberg benchmark: circuit, dual-unitary oracles and a capped MPS."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.linalg import expm

from .budget import ResourceParams, budget, classical_mps_baseline
from .errors import CapacityError, DegenerateError
from .noise import NoiseModel
from .pauli import PauliString

MAX_MPS_QUBITS = 24
MAX_MPS_CHI = 1 << 12
MAX_STATEVECTOR_QUBITS = 20
ZERO_TOL = 1e-14

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)
_PAULI = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_S = np.diag([1, 1j])
_SX = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
_T = np.diag([1, np.exp(1j * math.pi / 4)])
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def _ry(a: float) -> np.ndarray:
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(a: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


# -- configuration and gates ------------------------------------------------------------

@dataclass(frozen=True)
class FloquetConfig:
    """``N = 4k + 2`` qubits on a ring, ``t`` Floquet steps, coupling ``J``, angles ``theta``, ``phi``."""

    N: int
    t: int
    J: float = math.pi / 4
    theta: float = 1.5
    phi: float = 2.63

    def __post_init__(self) -> None:
        if self.N < 6 or self.N % 4 != 2:
            raise ValueError(f"N must be 4k+2 with k >= 1, got {self.N}")
        if self.t < 0:
            raise ValueError("t must be non-negative")
        if not 0.0 < self.J <= math.pi / 2:
            raise ValueError("J must lie in (0, pi/2]")

    @property
    def L(self) -> int:
        """CNOT depth: one entangling layer plus three CNOTs per Floquet step."""
        return 3 * self.t + 1

    @property
    def center_pair(self) -> int:
        """Index ``n`` of the skewed pair ``(2n, 2n + 1) = (N/2 - 1, N/2)``."""
        return (self.N - 2) // 4

    @property
    def dual_unitary(self) -> bool:
        return abs(self.J - math.pi / 4) < 1e-12

    def to_dict(self) -> dict:
        return {"N": self.N, "t": self.t, "J": self.J, "theta": self.theta, "phi": self.phi}


@dataclass(frozen=True)
class Gate:
    name: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def matrix(self) -> np.ndarray:
        fixed = {"H": _H, "S": _S, "SDG": _S.conj().T, "SX": _SX, "T": _T, "CNOT": _CNOT}
        if self.name in fixed:
            return fixed[self.name]
        if self.name == "RY":
            return _ry(self.angle)
        if self.name == "RZ":
            return _rz(self.angle)
        raise ValueError(f"unknown gate {self.name!r}")


def partial_swap_decomposition(J: float, q1: int = 0, q2: int = 1) -> list[Gate]:
    """Three-CNOT sequence equal to ``exp[-iJ(XX + YY + ZZ)]`` up to a global phase.

    Rotations are ``R(a) = exp(-i a P / 2)``; in that convention the Z rotation on
    the second qubit is ``R_Z(pi/2 + 2J)``.
    """
    a = math.pi / 2 + 2 * J
    return [Gate("S", (q1,)), Gate("CNOT", (q1, q2)),
            Gate("RY", (q1,), a), Gate("RZ", (q2,), a),
            Gate("H", (q1,)), Gate("H", (q2,)), Gate("CNOT", (q1, q2)),
            Gate("H", (q1,)), Gate("H", (q2,)),
            Gate("RY", (q1,), -a), Gate("CNOT", (q1, q2)), Gate("SDG", (q2,))]


def floquet_block(J: float, q1: int, q2: int) -> list[Gate]:
    """``(sqrt(X) x T) exp[-iJ(XX + YY + ZZ)] (sqrt(X) x T)`` on ``(q1, q2)``."""
    kick = [Gate("SX", (q1,)), Gate("T", (q2,))]
    return kick + partial_swap_decomposition(J, q1, q2) + kick


def floquet_pairs(N: int, tau: int) -> list[tuple[int, int]]:
    """Pairs of step ``tau`` (1-based): odd steps start at qubit 1 and wrap ``(N-1, 0)``."""
    if tau % 2 == 0:
        return [(q, q + 1) for q in range(0, N, 2)]
    return [(q, (q + 1) % N) for q in range(1, N, 2)]


def initial_layer(config: FloquetConfig) -> list[Gate]:
    gates = []
    for n in range(config.N // 2):
        a, b = 2 * n, 2 * n + 1
        angle = config.theta if n == config.center_pair else math.pi / 2
        gates += [Gate("RY", (a,), angle), Gate("CNOT", (a, b)), Gate("H", (a,)), Gate("H", (b,)),
                  Gate("RZ", (a,), config.phi)]
    return gates


def build_circuit(config: FloquetConfig) -> list[list[Gate]]:
    """Initial entangling layer followed by ``t`` brickwork Floquet layers."""
    layers = [initial_layer(config)]
    for tau in range(1, config.t + 1):
        layer = []
        for q1, q2 in floquet_pairs(config.N, tau):
            layer += floquet_block(config.J, q1, q2)
        layers.append(layer)
    return layers


def gate_counts(config: FloquetConfig) -> dict:
    blocks = config.t * config.N // 2
    return {"two_qubit_blocks": blocks, "cnots": config.N // 2 + 3 * blocks,
            "cnot_depth": 1 + 3 * config.t, "L": config.L}


def block_unitary(J: float) -> np.ndarray:
    """Dense ``U`` on (q1, q2), q1 the more significant factor."""
    heis = expm(-1j * J * sum(np.kron(p, p) for p in (_X, _Y, _Z)))
    kick = np.kron(_SX, _T)
    return kick @ heis @ kick


# -- observables ----------------------------------------------------------------------------

@dataclass(frozen=True)
class FloquetObservable:
    """Product of single-qubit Paulis, or a connected two-point ``ZZ`` correlator."""

    letters: tuple[str, ...]
    connected: tuple[int, int] | None = None


def resolve_observable(config: FloquetConfig, obs) -> FloquetObservable:
    """``"parity"``, ``"edge-zz"``, ``"edge-zz-connected"``, an ``N``-letter label, an
    unsigned PauliString, a qubit pair ``(a, b)`` (connected ``ZZ``) or a FloquetObservable."""
    N = config.N
    if isinstance(obs, FloquetObservable):
        out = obs
    elif isinstance(obs, PauliString):
        if obs.phase != 0:
            raise ValueError("only unsigned Pauli strings are supported")
        out = FloquetObservable(tuple(obs.label))
    elif isinstance(obs, tuple) and len(obs) == 2:
        a, b = (int(q) for q in obs)
        if not (0 <= a < N and 0 <= b < N) or a == b:
            raise ValueError(f"invalid qubit pair {obs!r}")
        letters = ["I"] * N
        letters[a] = letters[b] = "Z"
        out = FloquetObservable(tuple(letters), (a, b))
    elif obs == "parity":
        out = FloquetObservable(("Z",) * N)
    elif obs in ("edge-zz", "edge-zz-connected"):
        a, b = (N // 2 - 1 - config.t) % N, (N // 2 + config.t) % N
        letters = ["I"] * N
        letters[a] = letters[b] = "Z"
        out = FloquetObservable(tuple(letters), (a, b) if obs.endswith("connected") else None)
    elif isinstance(obs, str) and len(obs) == N and set(obs) <= set("IXYZ"):
        out = FloquetObservable(tuple(obs))
    else:
        raise ValueError(f"unknown observable {obs!r}")
    if len(out.letters) != N:
        raise ValueError(f"observable acts on {len(out.letters)} qubits, config has {N}")
    return out


def _single_z(N: int, q: int) -> tuple[str, ...]:
    letters = ["I"] * N
    letters[q] = "Z"
    return tuple(letters)


def _evaluate(obs: FloquetObservable, product_expectation) -> float:
    value = product_expectation(obs.letters)
    if obs.connected is None:
        return value
    a, b = obs.connected
    n = len(obs.letters)
    return value - product_expectation(_single_z(n, a)) * product_expectation(_single_z(n, b))


# -- dual-unitary pair-factorized oracles ------------------------------------------------------

@dataclass(frozen=True)
class RainbowState:
    """Product of two-qubit states on ``pairs``; pair ``skewed`` carries the ``theta`` dressing."""

    N: int
    pairs: tuple[tuple[int, int], ...]
    states: tuple[np.ndarray, ...] = field(repr=False)
    skewed: int

    def expectation(self, letters) -> float:
        value = 1.0 + 0j
        for (a, b), psi in zip(self.pairs, self.states):
            op = np.kron(_PAULI[letters[a]], _PAULI[letters[b]])
            value *= np.vdot(psi, op @ psi)
        return float(value.real)


def _dressing(t: int) -> tuple[np.ndarray, np.ndarray]:
    """``(sqrt(X) T)^t`` for the left-moving member, ``(T sqrt(X))^t`` for the right-moving one."""
    return (np.linalg.matrix_power(_SX @ _T, t), np.linalg.matrix_power(_T @ _SX, t))


def _check_rainbow(config: FloquetConfig) -> None:
    if not config.dual_unitary:
        raise ValueError("the pair-factorized oracle needs J = pi/4")
    if config.t > config.N // 4:
        raise ValueError(f"t = {config.t} exceeds the rainbow range t <= N/4 = {config.N // 4}")


def rainbow_state(config: FloquetConfig, truncated: bool = False) -> RainbowState:
    """Pairs ``(2n - t, 2n + 1 + t) mod N`` after ``t`` SWAP-like steps.

    ``truncated`` replaces the skewed pair by its dominant Schmidt term, the state
    left after cutting the smaller half of the middle-link spectrum.
    """
    _check_rainbow(config)
    N, t = config.N, config.t
    ml, mr = _dressing(t)
    bell = np.array([1, 0, 0, np.exp(1j * config.phi)], dtype=complex) / math.sqrt(2)
    plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
    minus = np.array([1, -1], dtype=complex) / math.sqrt(2)
    c, s = math.cos(config.theta / 2), math.sin(config.theta / 2)
    if truncated:
        if abs(abs(c) - abs(s)) < 1e-12:
            raise DegenerateError("|cos(theta/2)| = |sin(theta/2)|: the truncation is not unique")
        keep = plus if abs(c) > abs(s) else minus
        skew = np.kron(keep, keep)
    else:
        skew = c * np.kron(plus, plus) + s * np.kron(minus, minus)
    skew = np.kron(_rz(config.phi), _I2) @ skew
    pairs, states = [], []
    for n in range(N // 2):
        pairs.append(((2 * n - t) % N, (2 * n + 1 + t) % N))
        psi = skew if n == config.center_pair else bell
        states.append(np.kron(ml, mr) @ psi)
    return RainbowState(N, tuple(pairs), tuple(states), config.center_pair)


def dual_unitary_exact(config: FloquetConfig, obs="parity") -> float:
    """Exact expectation at ``J = pi/4`` by factorizing over pairs; linear in ``N``."""
    o = resolve_observable(config, obs)
    return _evaluate(o, rainbow_state(config).expectation)


def dual_unitary_truncated(config: FloquetConfig, obs="parity") -> float:
    """Expectation on the renormalized state with the skewed pair's minor Schmidt term removed."""
    o = resolve_observable(config, obs)
    return _evaluate(o, rainbow_state(config, truncated=True).expectation)


# -- small-N statevector ---------------------------------------------------------------------------

def _apply_gate_sv(psi: np.ndarray, u: np.ndarray, qubits, N: int) -> np.ndarray:
    k = len(qubits)
    psi = np.moveaxis(psi.reshape((2,) * N), list(qubits), list(range(k)))
    shape = psi.shape
    psi = (u @ psi.reshape(2 ** k, -1)).reshape(shape)
    return np.moveaxis(psi, list(range(k)), list(qubits)).reshape(-1)


def statevector(config: FloquetConfig) -> np.ndarray:
    """Gate-by-gate statevector of ``build_circuit``; qubit 0 is the most significant bit."""
    if config.N > MAX_STATEVECTOR_QUBITS:
        raise CapacityError(f"statevector supports at most {MAX_STATEVECTOR_QUBITS} qubits")
    N = config.N
    psi = np.zeros(2 ** N, dtype=complex)
    psi[0] = 1.0
    for layer in build_circuit(config):
        for g in layer:
            psi = _apply_gate_sv(psi, g.matrix(), g.qubits, N)
    return psi


def statevector_expectation(config: FloquetConfig, obs="parity") -> float:
    o = resolve_observable(config, obs)
    psi = statevector(config)

    def product(letters) -> float:
        phi = psi
        for q, p in enumerate(letters):
            if p != "I":
                phi = _apply_gate_sv(phi, _PAULI[p], (q,), config.N)
        return float(np.vdot(psi, phi).real)

    return _evaluate(o, product)


# -- capped MPS ----------------------------------------------------------------------------------------

@dataclass
class MpsRun:
    """Final MPS sites ``(left, 2, right)`` plus bookkeeping of the evolution."""

    sites: list
    max_bond_per_layer: list[int]
    discarded_weight: float

    @property
    def bond_dims(self) -> list[int]:
        return [a.shape[2] for a in self.sites[:-1]]

    def expectation(self, letters) -> float:
        env = np.ones((1, 1), dtype=complex)
        for a, p in zip(self.sites, letters):
            op = _PAULI[p]
            env = np.einsum("ab,asc,st,btd->cd", env, a.conj(), op, a, optimize=True)
        return float(env[0, 0].real)


def _split(theta: np.ndarray, chi: int | None) -> tuple[np.ndarray, np.ndarray, float]:
    """SVD of ``(l s, t r)``; drops numerical zeros and, if ``chi``, caps the rank."""
    l, s1, s2, r = theta.shape
    try:
        u, s, vh = np.linalg.svd(theta.reshape(l * s1, s2 * r), full_matrices=False)
    except np.linalg.LinAlgError:
        u, s, vh = scipy.linalg.svd(theta.reshape(l * s1, s2 * r), full_matrices=False, lapack_driver="gesvd")
    keep = int(np.sum(s > ZERO_TOL * s[0])) if s.size and s[0] > 0 else 1
    keep = max(keep, 1)
    discarded = 0.0
    if chi is not None and keep > chi:
        discarded = float(np.sum(s[chi:keep] ** 2) / np.sum(s[:keep] ** 2))
        keep = chi
    u, s, vh = u[:, :keep], s[:keep], vh[:keep]
    return u.reshape(l, s1, keep), (s[:, None] * vh).reshape(keep, s2, r), discarded


def _apply_2q(sites: list, q: int, u: np.ndarray) -> None:
    """Gate ``u`` on adjacent sites ``(q, q+1)``; the orthogonality centre moves to ``q+1``."""
    theta = np.einsum("asb,btc->astc", sites[q], sites[q + 1])
    theta = np.einsum("xyst,astc->axyc", u.reshape(2, 2, 2, 2), theta)
    sites[q], sites[q + 1], _ = _split(theta, None)


def _apply_1q(sites: list, q: int, u: np.ndarray) -> None:
    sites[q] = np.einsum("xs,asb->axb", u, sites[q])


def _compress(sites: list, chi: int) -> float:
    """Right-canonicalize, then truncate every link to ``chi`` in a left-to-right sweep."""
    n = len(sites)
    for q in range(n - 1, 0, -1):
        l, s, r = sites[q].shape
        qm, rm = np.linalg.qr(sites[q].reshape(l, s * r).T)
        sites[q] = qm.T.reshape(-1, s, r)
        sites[q - 1] = np.einsum("asb,cb->asc", sites[q - 1], rm)
    total = 0.0
    for q in range(n - 1):
        theta = np.einsum("asb,btc->astc", sites[q], sites[q + 1])
        sites[q], sites[q + 1], d = _split(theta, chi)
        total += d
    norm = np.linalg.norm(sites[-1])
    sites[-1] = sites[-1] / norm
    return total


@lru_cache(maxsize=16)
def _blocks(J: float) -> tuple[np.ndarray, np.ndarray]:
    u = block_unitary(J)
    return u, _SWAP @ u @ _SWAP


def _initial_pair(config: FloquetConfig, n: int) -> np.ndarray:
    psi = np.zeros(4, dtype=complex)
    psi[0] = 1.0
    for g in initial_layer(config)[5 * n: 5 * n + 5]:
        u = g.matrix()
        if len(g.qubits) == 1:
            u = np.kron(u, _I2) if g.qubits[0] == 2 * n else np.kron(_I2, u)
        psi = u @ psi
    return psi


def mps_evolve(config: FloquetConfig, chi: int | None) -> MpsRun:
    """Open-chain MPS in qubit order; the ring gate ``(N-1, 0)`` is routed by SWAPs.

    Each layer is applied exactly, then the whole chain is compressed to ``chi``.
    """
    N = config.N
    if N > MAX_MPS_QUBITS:
        raise CapacityError(f"MPS simulation supports at most {MAX_MPS_QUBITS} qubits")
    if chi is not None and not 1 <= chi <= MAX_MPS_CHI:
        raise CapacityError(f"chi must lie in [1, {MAX_MPS_CHI}]")
    sites: list = []
    for n in range(N // 2):
        a, b, _ = _split(_initial_pair(config, n).reshape(1, 2, 2, 1), None)
        sites += [a, b]
    u, u_rev = _blocks(config.J)
    discarded = 0.0
    bonds = [max(a.shape[2] for a in sites[:-1])]
    for tau in range(1, config.t + 1):
        wrap = None
        for q1, q2 in floquet_pairs(N, tau):
            if q2 == q1 + 1:
                _apply_2q(sites, q1, u)
            else:
                wrap = (q1, q2)
        if wrap is not None:
            for q in range(N - 2, 0, -1):       # carry qubit N-1 down to site 1
                _apply_2q(sites, q, _SWAP)
            _apply_2q(sites, 0, u_rev)          # (site 0, site 1) = (qubit 0, qubit N-1)
            for q in range(1, N - 1):
                _apply_2q(sites, q, _SWAP)
        bonds.append(max(a.shape[2] for a in sites[:-1]))
        if chi is not None:
            discarded += _compress(sites, chi)
        else:
            _compress(sites, MAX_MPS_CHI)
    if config.t == 0 and chi is not None:
        discarded += _compress(sites, chi)
    return MpsRun(sites, bonds, discarded)


def mps_simulate(config: FloquetConfig, chi: int, obs="parity") -> float:
    """Expectation from the ``chi``-capped MPS evolution."""
    o = resolve_observable(config, obs)
    return _evaluate(o, mps_evolve(config, chi).expectation)


def mps_exact_bond_dimension(config: FloquetConfig) -> int:
    """Largest bond of the uncapped open-chain MPS after the final layer."""
    return max(mps_evolve(config, None).bond_dims)


# -- advantage comparison -------------------------------------------------------------------------------

def advantage_comparison(config: FloquetConfig, noise, params: ResourceParams | None = None) -> list[dict]:
    """Per step ``t``: conventional MPS errors (modest and world-class machines), unmitigated
    and TEM-mitigated quantum errors.  ``noise`` is an error density or a NoiseModel."""
    params = params or ResourceParams()
    eps = noise.epsilon if isinstance(noise, NoiseModel) else float(noise)
    modest = ResourceParams(**{**params.to_dict(), "P_classical": params.P})
    rows = []
    for t in range(config.t + 1):
        L = 3 * t + 1
        chi_c, err_c = classical_mps_baseline(config.N, t, modest)
        chi_C, err_C = classical_mps_baseline(config.N, t, params)
        q = -math.expm1(-eps * config.N * L / 2)
        qc = budget("tem", config.N, L, eps, None, params).delta_total
        rows.append({"t": t, "L": L, "chi_c": chi_c, "error_c": err_c, "chi_C": chi_C,
                     "error_C": err_C, "error_q": q, "error_qc": qc})
    return rows
