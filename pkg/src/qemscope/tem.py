"""Tensor-network error mitigation on Clifford circuits with Pauli-diagonal MPOs.

A Pauli-diagonal map ``M[.] = sum_phi r_phi s_phi . s_phi`` is stored as an MPS over
the coefficients ``r`` with physical dimension 4 (letters I, X, Y, Z = 0..3), one tensor
``(left, 4, right)`` per qubit. Tensors carry unit-norm centre data and the overall
norm lives in ``log_scale`` so deep circuits cannot overflow.

Building runs layer by layer: the inverse noise of layer ``l`` multiplies every
coefficient by ``1/f_l(phi)`` (a left-to-right sweep of two-site updates), then the
Clifford layer permutes coefficients ``r_phi -> r_{U^dag phi U}`` (a right-to-left sweep
over the CNOT pairs). After the last layer the coefficient at a Pauli ``O`` is ``1/K``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product as _cartesian
from pathlib import Path

import numpy as np
import scipy.linalg

from .clifford import CliffordLayer, NoisyCircuit, conjugate, conjugate_batch
from .errors import CapacityError, DimensionError
from .noise import SplLayer
from .pauli import PauliString, letters_array

ZERO_TOL = 1e-14
RANK_TOL = 1e-10
MAX_DENSE_QUBITS = 12

# anticommutation of single-qubit letters, indexed [a, b]
_ANTI_1Q = np.array([[0, 0, 0, 0], [0, 0, 1, 1], [0, 1, 0, 1], [0, 1, 1, 0]], dtype=np.int64)


@dataclass(frozen=True)
class DiagonalPauliMpo:
    """MPS over Pauli-diagonal coefficients; value = contraction * exp(log_scale)."""

    site_tensors: tuple[np.ndarray, ...]
    canonical_center: int | None = None
    log_scale: float = 0.0

    def __post_init__(self) -> None:
        tensors = tuple(np.asarray(t, dtype=float) for t in self.site_tensors)
        object.__setattr__(self, "site_tensors", tensors)
        if not tensors:
            raise DimensionError("an MPO needs at least one site")
        for k, t in enumerate(tensors):
            if t.ndim != 3 or t.shape[1] != 4:
                raise DimensionError(f"site {k} has shape {t.shape}, expected (Dl, 4, Dr)")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[2] != 1:
            raise DimensionError("boundary bonds must have dimension 1")
        for k in range(len(tensors) - 1):
            if tensors[k].shape[2] != tensors[k + 1].shape[0]:
                raise DimensionError(f"bond mismatch between sites {k} and {k + 1}")

    @property
    def n(self) -> int:
        return len(self.site_tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[2] for t in self.site_tensors[:-1]]


@dataclass(frozen=True)
class TemMap:
    """A noise-mitigation MPO with its bond cap and compression history."""

    mpo: DiagonalPauliMpo
    chi: int
    per_layer_truncation: tuple[float, ...] = ()
    layer_rates: tuple[np.ndarray, ...] = field(default=(), repr=False)

    @property
    def n(self) -> int:
        return self.mpo.n

    @property
    def estimator(self) -> float:
        """Data-driven compression error: root of summed squared relative discards."""
        return math.sqrt(sum(d * d for d in self.per_layer_truncation))


@dataclass(frozen=True)
class SingularSpectrum:
    link: int
    values: np.ndarray
    relative: np.ndarray
    lambda1: float
    lambda2: float


# -- mutable sweep state ------------------------------------------------------


class _Chain:
    """Working copy of an MPO with centre tracking and discard bookkeeping."""

    def __init__(self, mpo: DiagonalPauliMpo, chi: int) -> None:
        self.t = [a.copy() for a in mpo.site_tensors]
        self.center = mpo.canonical_center
        self.log_scale = mpo.log_scale
        self.chi = chi
        self.discard2 = 0.0
        if self.center is None:
            self._canonicalize()

    def freeze(self) -> DiagonalPauliMpo:
        return DiagonalPauliMpo(tuple(self.t), self.center, self.log_scale)

    def _normalize(self, q: int) -> None:
        nrm = float(np.linalg.norm(self.t[q]))
        if nrm == 0.0:
            raise ValueError("MPO collapsed to zero")
        self.t[q] /= nrm
        self.log_scale += math.log(nrm)

    def _canonicalize(self) -> None:
        # right-to-left QR sweep from the last site leaves the centre at 0
        self.center = len(self.t) - 1
        self._normalize(self.center)
        self.move_to(0)

    def _step_right(self, q: int) -> None:
        a = self.t[q]
        dl, _, dr = a.shape
        qm, r = np.linalg.qr(a.reshape(dl * 4, dr))
        self.t[q] = qm.reshape(dl, 4, -1)
        self.t[q + 1] = np.tensordot(r, self.t[q + 1], axes=(1, 0))
        self.center = q + 1
        self._normalize(q + 1)

    def _step_left(self, q: int) -> None:
        a = self.t[q]
        dl, _, dr = a.shape
        qm, r = np.linalg.qr(a.reshape(dl, 4 * dr).T)
        self.t[q] = qm.T.reshape(-1, 4, dr)
        self.t[q - 1] = np.tensordot(self.t[q - 1], r.T, axes=(2, 0))
        self.center = q - 1
        self._normalize(q - 1)

    def move_to(self, target: int) -> None:
        while self.center < target:
            self._step_right(self.center)
        while self.center > target:
            self._step_left(self.center)

    def two_site(self, q: int, op, to_right: bool) -> None:
        """Apply ``op`` to the merged (q, q+1) block, split by truncated SVD."""
        a, b = self.t[q], self.t[q + 1]
        dl, dr = a.shape[0], b.shape[2]
        theta = np.tensordot(a, b, axes=(2, 0))
        theta = op(theta)
        u, s, vh = _svd(theta.reshape(dl * 4, 4 * dr))
        keep, tail2 = _truncation(s, self.chi)
        u, s, vh = u[:, :keep], s[:keep], vh[:keep]
        kept = float(np.sqrt(np.sum(s * s)))
        self.discard2 += tail2 / (kept * kept)
        self.log_scale += math.log(kept)
        s = s / kept
        if to_right:
            self.t[q] = u.reshape(dl, 4, keep)
            self.t[q + 1] = (s[:, None] * vh).reshape(keep, 4, dr)
            self.center = q + 1
        else:
            self.t[q] = (u * s).reshape(dl, 4, keep)
            self.t[q + 1] = vh.reshape(keep, 4, dr)
            self.center = q

    def take_discard(self) -> float:
        d, self.discard2 = math.sqrt(self.discard2), 0.0
        return d


def _svd(mat: np.ndarray):
    try:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


def _truncation(s: np.ndarray, chi: int) -> tuple[int, float]:
    """Kept count and squared discarded weight; values below ZERO_TOL are exact zeros."""
    if s.size == 0 or s[0] == 0.0:
        return 1, 0.0
    nonzero = int(np.count_nonzero(s > ZERO_TOL * s[0]))
    keep = max(1, min(nonzero, chi))
    tail = s[keep:nonzero]
    return keep, float(np.sum(tail * tail))


# -- public construction --------------------------------------------------------


def identity_mpo(n: int) -> DiagonalPauliMpo:
    """The identity map: every coefficient equals 1, all bonds 1."""
    if n < 1:
        raise ValueError("n must be at least 1")
    # unit-norm ones per site; each site contributes log 2 to the scale
    site = np.full((1, 4, 1), 0.5)
    return DiagonalPauliMpo(tuple(site.copy() for _ in range(n)), 0, n * math.log(2.0))


def identity_map(n: int, chi: int) -> TemMap:
    if chi < 1:
        raise ValueError("chi must be at least 1")
    return TemMap(identity_mpo(n), int(chi))


def _noise_factors(layer: SplLayer):
    """Per-site log factors (n, 4) and per-link log factors {q: (4, 4)} of ``1/f``."""
    n = layer.n
    site = np.zeros((n, 4))
    pair: dict[int, np.ndarray] = {}
    for g in layer.generators:
        if g.rate == 0.0:
            continue
        codes = ["IXYZ".index(ch) for ch in g.axis]
        if len(g.sites) == 1:
            site[g.sites[0]] += 2.0 * g.rate * _ANTI_1Q[codes[0]]
        else:
            (s0, c0), (s1, c1) = sorted(zip(g.sites, codes))
            anti = (_ANTI_1Q[c0][:, None] + _ANTI_1Q[c1][None, :]) % 2
            pair.setdefault(s0, np.zeros((4, 4)))
            pair[s0] += 2.0 * g.rate * anti
    return site, pair


def apply_inverse_noise(m: TemMap, layer: SplLayer) -> TemMap:
    """Multiply every coefficient by ``1/f_layer(phi)`` and compress to ``m.chi``."""
    if layer.n != m.n:
        raise DimensionError(f"noise layer on {layer.n} qubits, map on {m.n}")
    site, pair = _noise_factors(layer)
    ch = _Chain(m.mpo, m.chi)
    ch.move_to(0)
    n = m.n
    done = np.zeros(n, dtype=bool)
    for q in range(n):
        if not done[q] and site[q].any():
            ch.t[q] = ch.t[q] * np.exp(site[q])[None, :, None]
            ch._normalize(q)
        if q == n - 1:
            break
        if q in pair:
            # fold the next site's factor in so the truncation sees the full update
            f = np.exp(pair[q] + site[q + 1][None, :])
            done[q + 1] = True
            ch.two_site(q, lambda th, f=f: th * f[None, :, :, None], to_right=True)
        else:
            ch._step_right(q)
    rates = m.layer_rates + (layer.rates.copy(),)
    return TemMap(ch.freeze(), m.chi, m.per_layer_truncation + (ch.take_discard(),), rates)


@lru_cache(maxsize=None)
def _block_permutation(cnot: tuple[int, int] | None, sq: tuple[int, ...], inverse: bool) -> np.ndarray:
    """Letter permutation ``phi -> U^dag phi U`` of a one- or two-qubit block."""
    width = len(sq)
    sub = CliffordLayer(width, (cnot,) if cnot else (), sq, inverse)
    perm = np.empty(4**width, dtype=np.int64)
    for idx, codes in enumerate(_cartesian(range(4), repeat=width)):
        img = conjugate(sub, PauliString.from_letters(codes)).letters()
        perm[idx] = int(np.ravel_multi_index(img, (4,) * width))
    return perm


def conjugate_clifford(m: TemMap, layer: CliffordLayer) -> TemMap:
    """Permute coefficients ``r_phi -> r_{U^dag phi U}`` and compress to ``m.chi``."""
    if layer.n != m.n:
        raise DimensionError(f"Clifford layer on {layer.n} qubits, map on {m.n}")
    ch = _Chain(m.mpo, m.chi)
    paired: dict[int, tuple[int, int]] = {}
    for c, t in layer.cnots:
        lo = min(c, t)
        paired[lo] = (c - lo, t - lo)
    covered = {q for lo in paired for q in (lo, lo + 1)}
    for q in range(m.n):
        if q not in covered:
            # permutations keep isometries, so single-qubit blocks need no sweep
            ch.t[q] = ch.t[q][:, _block_permutation(None, (layer.sq[q],), layer.inverse), :]
    for lo in sorted(paired, reverse=True):
        ch.move_to(lo + 1)
        perm = _block_permutation(paired[lo], (layer.sq[lo], layer.sq[lo + 1]), layer.inverse)

        def op(th, perm=perm):
            dl, _, _, dr = th.shape
            return th.reshape(dl, 16, dr)[:, perm, :].reshape(dl, 4, 4, dr)

        ch.two_site(lo, op, to_right=False)
    return TemMap(ch.freeze(), m.chi, m.per_layer_truncation + (ch.take_discard(),),
                  m.layer_rates)


def build_tem(circuit: NoisyCircuit, chi: int) -> TemMap:
    """Iterate inverse noise then Clifford conjugation over all layers."""
    m = identity_map(circuit.n, chi)
    for layer, cliff in zip(circuit.noise.layers, circuit.cliffords):
        m = apply_inverse_noise(m, layer)
        m = conjugate_clifford(m, cliff)
    return m


def exact_bond_dimension(n: int) -> int:
    return 4 ** (n // 2)


# -- evaluation ---------------------------------------------------------------------


def _mpo_of(m) -> DiagonalPauliMpo:
    return m.mpo if isinstance(m, TemMap) else m


def diagonal_elements(m, letters) -> np.ndarray:
    """Coefficients at many Pauli strings given as an ``(S, n)`` letter array."""
    mpo = _mpo_of(m)
    letters = np.atleast_2d(np.asarray(letters, dtype=np.int64))
    if letters.shape[1] != mpo.n:
        raise DimensionError(f"strings on {letters.shape[1]} qubits, map on {mpo.n}")
    vec = np.ones((letters.shape[0], 1))
    log_acc = np.zeros(letters.shape[0])
    for q, a in enumerate(mpo.site_tensors):
        vec = np.einsum("si,isj->sj", vec, a[:, letters[:, q], :])
        # rescale rows to keep long chains finite
        nrm = np.max(np.abs(vec), axis=1)
        nrm[nrm == 0.0] = 1.0
        vec /= nrm[:, None]
        log_acc += np.log(nrm)
    return vec[:, 0] * np.exp(log_acc + mpo.log_scale)


def diagonal_element(m, beta: PauliString) -> float:
    mpo = _mpo_of(m)
    if beta.n != mpo.n:
        raise DimensionError(f"string on {beta.n} qubits, map on {mpo.n}")
    return float(diagonal_elements(mpo, [beta.letters()])[0])


def diagonal_elements_masks(m, xs, zs) -> np.ndarray:
    mpo = _mpo_of(m)
    return diagonal_elements(mpo, letters_array(xs, zs, mpo.n))


def to_dense(m) -> np.ndarray:
    """All ``4**n`` coefficients, qubit 0 as the most significant letter."""
    mpo = _mpo_of(m)
    if mpo.n > MAX_DENSE_QUBITS:
        raise CapacityError(f"dense expansion limited to {MAX_DENSE_QUBITS} qubits")
    acc = mpo.site_tensors[0][0]
    for a in mpo.site_tensors[1:]:
        acc = np.tensordot(acc, a, axes=(1, 0)).reshape(-1, a.shape[2])
    return acc[:, 0] * math.exp(mpo.log_scale)


def _lambdas(layer_rates) -> tuple[float, float]:
    if not layer_rates:
        return 0.0, 0.0
    allr = np.concatenate(layer_rates)
    lam1 = float(np.median(allr)) if allr.size else 0.0
    lam2 = math.sqrt(float(np.sum(allr * allr)) / len(layer_rates))
    return lam1, lam2


def link_spectrum(m: TemMap, link: int) -> SingularSpectrum:
    """Descending Schmidt values across ``link`` (between sites link-1 and link)."""
    if not 1 <= link <= m.n - 1:
        raise ValueError(f"link must lie in [1, {m.n - 1}]")
    ch = _Chain(m.mpo, m.chi)
    ch.move_to(link - 1)
    a = ch.t[link - 1]
    s = scipy.linalg.svdvals(a.reshape(a.shape[0] * 4, a.shape[2]))
    s = s * math.exp(ch.log_scale)
    lam1, lam2 = _lambdas(m.layer_rates)
    return SingularSpectrum(link, s, s / s[0], lam1, lam2)


def compression_error_estimate(m: TemMap) -> float:
    return m.estimator


# -- first-order threshold ---------------------------------------------------------


def propagated_generators(circuit: NoisyCircuit):
    """Every noise generator pushed forward to the observable frame: ``(xs, zs, rates)``."""
    xs_all, zs_all, rates_all = [], [], []
    for l, layer in enumerate(circuit.noise.layers):
        keep = layer.rates > 0
        if not keep.any():
            continue
        xs, zs = (arr[keep].copy() for arr in layer.masks)
        signs = np.ones(xs.size, dtype=np.int8)
        for cliff in circuit.cliffords[l:]:
            conjugate_batch(cliff, xs, zs, signs, heisenberg=False)
        xs_all.append(xs)
        zs_all.append(zs)
        rates_all.append(layer.rates[keep])
    if not xs_all:
        empty = np.zeros(0, dtype=np.uint64)
        return empty, empty, np.zeros(0)
    return np.concatenate(xs_all), np.concatenate(zs_all), np.concatenate(rates_all)


def _matrix_rank(w: np.ndarray) -> int:
    # singular values, not Gram eigenvalues: squaring would hide values near 1e-6
    s = scipy.linalg.svdvals(w)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.count_nonzero(s > RANK_TOL * s[0]))


def threshold_link_ranks(circuit: NoisyCircuit) -> list[int]:
    """Rank of the first-order map ``T1`` across every link 1..n-1.

    ``T1 = (1 + sum lam) Id - sum lam chi_g`` with ``chi_g`` the character of a
    propagated generator; distinct characters are independent, so the link rank is
    the rank of the coefficient matrix over (left restriction, right restriction).
    """
    n = circuit.n
    xs, zs, rates = propagated_generators(circuit)
    xs = np.concatenate([[np.uint64(0)], xs])
    zs = np.concatenate([[np.uint64(0)], zs])
    coef = np.concatenate([[1.0 + rates.sum()], -rates])
    ranks = []
    for link in range(1, n):
        low = np.uint64((1 << link) - 1)
        sh = np.uint64(link)
        left = np.stack([xs & low, zs & low], axis=1)
        right = np.stack([xs >> sh, zs >> sh], axis=1)
        _, li = np.unique(left, axis=0, return_inverse=True)
        _, ri = np.unique(right, axis=0, return_inverse=True)
        li, ri = li.ravel(), ri.ravel()
        w = np.zeros((li.max() + 1, ri.max() + 1))
        np.add.at(w, (li, ri), coef)
        ranks.append(_matrix_rank(w))
    return ranks


def threshold_bond_dimension(circuit: NoisyCircuit) -> int:
    """Largest link rank of the first-order map; 1 for noiseless circuits."""
    if circuit.n == 1:
        return 1
    return max(threshold_link_ranks(circuit))


def below_threshold_extra(n: int, L: int, epsilon: float, chi: float) -> float:
    """Extra compression error when ``chi < L**2/2``; 0 at or above the threshold."""
    if chi < 1:
        raise ValueError("chi must be at least 1")
    if chi >= L * L / 2.0:
        return 0.0
    pref = epsilon**2 * L**2 / (72.0 * math.log(4.0 * math.sqrt(2.0 * n)))
    bracket = n * (1.0 / (32.0 * n)) ** (2.0 * chi / L**2) - 1.0 / 32.0
    return math.sqrt(max(pref * bracket, 0.0))


def below_threshold_error(n: int, L: int, epsilon: float, chi: float) -> float:
    """Analytic compression error for a dense ``n x L`` circuit at bond cap ``chi``."""
    base = n * L * epsilon**2 / 30.0
    return math.hypot(base, below_threshold_extra(n, L, epsilon, chi))


# -- checkpoints ----------------------------------------------------------------------

_MAGIC = "QEMSCOPE-MPO 1"


def save_checkpoint(m: TemMap, path) -> None:
    """Header line of JSON metadata followed by little-endian float64 site data."""
    header = {
        "n": m.n,
        "chi": m.chi,
        "center": m.mpo.canonical_center,
        "log_scale": m.mpo.log_scale,
        "shapes": [list(t.shape) for t in m.mpo.site_tensors],
        "per_layer_truncation": list(m.per_layer_truncation),
        "layer_rates": [r.tolist() for r in m.layer_rates],
    }
    with Path(path).open("wb") as fh:
        fh.write((_MAGIC + "\n").encode())
        fh.write((json.dumps(header) + "\n").encode())
        for t in m.mpo.site_tensors:
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_checkpoint(path) -> TemMap:
    with Path(path).open("rb") as fh:
        if fh.readline().decode().strip() != _MAGIC:
            raise ValueError(f"{path} is not an MPO checkpoint")
        header = json.loads(fh.readline().decode())
        tensors = []
        for shape in header["shapes"]:
            count = int(np.prod(shape))
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise ValueError(f"{path} is truncated")
            tensors.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
    mpo = DiagonalPauliMpo(tuple(tensors), header["center"], header["log_scale"])
    rates = tuple(np.array(r, dtype=float) for r in header["layer_rates"])
    return TemMap(mpo, header["chi"], tuple(header["per_layer_truncation"]), rates)
