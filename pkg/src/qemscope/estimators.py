"""Shot-level PEC, ZNE and TEM estimators plus the closed-form ZNE optimum."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .clifford import ExponentStatistics, MirroredCircuitSpec, NoisyCircuit, mirrored_fidelity_products, propagate
from .errors import DegenerateError, DimensionError, LogDomainError
from .pauli import PauliString, anticommute_matrix
from .tem import TemMap, diagonal_element

INV_E = math.exp(-1.0)
CHUNK_SHOTS = 1 << 15


# -- types --------------------------------------------------------------------

@dataclass(frozen=True)
class DampingFactor:
    """Noisy attenuation ``K`` of the target observable."""

    K: float

    def __post_init__(self) -> None:
        if not 0.0 < self.K <= 1.0:
            raise ValueError(f"K must lie in (0, 1], got {self.K}")

    @classmethod
    def typical(cls, eps_nl: float) -> DampingFactor:
        """``K = exp(-epsilon*N*L/2)``, the high-weight value ``gamma**-1/2``."""
        return cls(math.exp(-eps_nl / 2.0))

    @property
    def log_inverse(self) -> float:
        return -math.log(self.K)


def _k(K) -> float:
    return K.K if isinstance(K, DampingFactor) else DampingFactor(float(K)).K


@dataclass(frozen=True)
class ZneConfig:
    gains: tuple[float, ...]
    shots: tuple[int, ...]

    def __post_init__(self) -> None:
        gains = tuple(float(g) for g in self.gains)
        shots = tuple(int(s) for s in self.shots)
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "shots", shots)
        if len(gains) < 2:
            raise ValueError("ZNE needs at least two gains")
        if len(shots) != len(gains):
            raise DimensionError("one shot count per gain")
        if all(g == gains[0] for g in gains):
            raise DegenerateError("all gains equal: the log-linear fit is singular")
        if any(b <= a for a, b in zip(gains, gains[1:])):
            raise ValueError("gains must be strictly increasing")
        if gains[0] < 1.0:
            raise ValueError("gains must be >= 1")
        if any(s < 1 for s in shots):
            raise ValueError("shot counts must be positive")

    @property
    def R(self) -> int:
        return len(self.gains)

    @property
    def M(self) -> int:
        return sum(self.shots)

    @classmethod
    def optimal(cls, K, M: int) -> ZneConfig:
        gains = optimal_gains(K)
        return cls(gains, tuple(optimal_shot_allocation(gains, K, M)))


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    std_error: float
    shots_used: int

    def __post_init__(self) -> None:
        if not self.std_error >= 0.0:
            raise ValueError("std_error must be non-negative")

    @property
    def overhead(self) -> float:
        """Realized ``Gamma = std_error**2 * M``."""
        return self.std_error ** 2 * self.shots_used

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error,
                "shots_used": self.shots_used, "overhead": self.overhead}


# -- Lambert W ------------------------------------------------------------------

def lambert_w(x: float, tol: float = 1e-15, max_iter: int = 200) -> float:
    """Principal branch ``W0`` by Halley steps kept inside a shrinking bracket."""
    x = float(x)
    if math.isnan(x) or x < -INV_E - 1e-16:
        raise ValueError(f"lambert_w is real only for x >= -1/e, got {x}")
    if x <= -INV_E:
        return -1.0
    if x == 0.0:
        return 0.0
    if x > 0.0:
        lo, hi = 0.0, math.log1p(x)
        w = math.log1p(x) if x < 3.0 else math.log(x) - math.log(math.log(x))
    else:
        lo, hi = -1.0, x
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + p - p * p / 3.0 if x < -0.25 else x
    w = min(max(w, lo), hi)
    for _ in range(max_iter):
        ew = math.exp(w)
        f = w * ew - x
        if f == 0.0:
            return w
        if f > 0.0:
            hi = w
        else:
            lo = w
        d1 = ew * (w + 1.0)
        denom = d1 - (w + 2.0) * f / (2.0 * w + 2.0) if w != -1.0 else 0.0
        step = f / denom if denom != 0.0 else math.inf
        w_new = w - step
        if not lo < w_new < hi:
            w_new = 0.5 * (lo + hi)
        if abs(w_new - w) <= tol * (1.0 + abs(w)):
            return w_new
        w = w_new
    return w


W_INV_E = lambert_w(INV_E)


# -- closed-form ZNE ---------------------------------------------------------------

def optimal_gains(K) -> tuple[float, float]:
    """``G1 = 1`` and ``G2 = 1 + (1 + W(1/e)) / ln(1/K)``."""
    k = _k(K)
    if k == 1.0:
        raise DegenerateError("K = 1: without damping there is no finite optimal gain")
    return 1.0, 1.0 + (1.0 + W_INV_E) / -math.log(k)


def _moments(gains) -> tuple[np.ndarray, float, np.ndarray, float]:
    """Gains, ``R sum G^2 - (sum G)^2`` and the weights ``sum_i G_i (G_i - G_j)``.

    Written with centred moments (``S2 = sum (G - mean)^2``) to avoid cancellation
    when gains are close together.
    """
    g = np.asarray(gains, dtype=float)
    m = float(g.mean())
    d = g - m
    s2 = float(d @ d)
    if not s2 > 0.0:
        raise DegenerateError("gains do not span a line: the fit is singular")
    return g, g.size * s2, s2 - g.size * m * d, m


def allocation_weights(gains, K) -> np.ndarray:
    """``|sum_i G_i (G_i - G_j)| K**-G_j`` for each gain ``j``."""
    g, _, c, _ = _moments(gains)
    return np.abs(c) * np.exp(-g * math.log(_k(K)))


def optimal_shot_allocation(gains, K, M: int) -> list[int]:
    """Proportional allocation rounded by largest remainder; every gain keeps a shot."""
    R = len(gains)
    if M < R:
        raise ValueError(f"need at least one shot per gain (M={M} < R={R})")
    w = allocation_weights(gains, K)
    total = float(w.sum())
    ideal = M * (w / total if total > 0 else np.full(R, 1.0 / R))
    base = np.maximum(np.floor(ideal).astype(np.int64), 1)
    while base.sum() > M:
        j = int(np.argmax(np.where(base > 1, base - ideal, -np.inf)))
        base[j] -= 1
    rem = ideal - base
    for j in np.argsort(-rem, kind="stable")[: M - int(base.sum())]:
        base[j] += 1
    return [int(b) for b in base]


def zne_random_error(config: ZneConfig, K, binary_outcomes: bool = False) -> float:
    """Random extrapolation error at damping ``K``.

    Shots have unit variance by default. ``binary_outcomes`` uses the exact
    variance ``1 - K**(2G)`` of +-1 outcomes instead, which matters when ``K``
    is not small.
    """
    g, denom, c, _ = _moments(config.gains)
    k = _k(K)
    s = np.asarray(config.shots, dtype=float)
    rel = np.exp(-2.0 * g * math.log(k))
    if binary_outcomes:
        rel = rel - 1.0
    return math.sqrt(float(np.sum(c * c * rel / s))) / denom


def zne_min_random_error(K, M: int) -> float:
    """``(1 + ln(1/K) / W(1/e)) / (K sqrt(M))``, the optimum over gains and shots."""
    k = _k(K)
    return (1.0 - math.log(k) / W_INV_E) / (k * math.sqrt(M))


def zne_optimal_overhead(K) -> float:
    """``Gamma* = [1 + ln(1/K)/W(1/e)]**2 K**-2``."""
    k = _k(K)
    return (1.0 - math.log(k) / W_INV_E) ** 2 / (k * k)


def fit_exponential(points) -> tuple[float, float]:
    """Unweighted least squares of ``ln(mean)`` against gain; returns ``(e**b, e**b * db)``."""
    pts = [(float(G), float(m), float(s)) for G, m, s in points]
    if len(pts) < 2:
        raise ValueError("need at least two gains")
    bad = [G for G, m, _ in pts if not m > 0.0]
    if bad:
        raise LogDomainError(f"non-positive sample mean at gain(s) {bad}; increase shots at "
                             "those gains or lower the largest gain")
    g, denom, c, m = _moments([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    dy = np.array([p[2] / p[1] for p in pts])
    # b = sum_j c_j y_j / denom, the closed form of the intercept
    slope = float((g - m) @ (y - y.mean())) / float((g - m) @ (g - m))
    b = float(y.mean()) - slope * m
    db = math.sqrt(float(np.sum((c * dy) ** 2))) / denom
    f0 = math.exp(b)
    return f0, f0 * db


def gain_bias_factor(gains) -> float:
    """``((sum G^2)^2 - sum G sum G^3) / (R sum G^2 - (sum G)^2)``; equals ``-G1 G2`` at R = 2."""
    g, _, _, m = _moments(gains)
    d = g - m
    s2, s3 = float(d @ d), float(np.sum(d ** 3))
    return s2 / g.size - m * m - m * s3 / s2


def zne_extrapolation_bias(stats: ExponentStatistics, gains, n_t: int) -> float:
    """Magnitude ``(G1 G2 / 2)(1 - 2**-N_T) * variance`` of the (negative) bias."""
    if n_t < 0:
        raise ValueError("N_T must be non-negative")
    g1, g2 = float(gains[0]), float(gains[1])
    _moments((g1, g2))
    return 0.5 * g1 * g2 * (1.0 - 2.0 ** -n_t) * stats.variance


def mirrored_extrapolation(spec: MirroredCircuitSpec, gains, mode: str = "exact",
                           samples: int | None = None, rng=None) -> float:
    """Noise-free fit of the exact mirrored ``<O>(G)``; returns ``F0 - 1``."""
    k = mirrored_fidelity_products(spec, mode=mode, samples=samples, rng=rng)
    means = [float(np.mean(k ** G)) for G in gains]
    f0, _ = fit_exponential([(G, m, 0.0) for G, m in zip(gains, means)])
    return f0 - 1.0


# -- shot simulators --------------------------------------------------------------

@dataclass(frozen=True)
class _ShotModel:
    """Per-generator data along the observable's trajectory."""

    anti: np.ndarray        # generator anticommutes with the trajectory string
    rates: np.ndarray
    sign: int
    deterministic: bool     # initial-time string is Z-type

    @classmethod
    def build(cls, circuit: NoisyCircuit, observable: PauliString) -> _ShotModel:
        prop = propagate(circuit, observable)
        anti, rates = [], []
        for layer, beta in zip(circuit.noise.layers, prop.trajectory):
            if not layer.generators:
                continue
            xs, zs = layer.masks
            anti.append(anticommute_matrix(xs, zs, np.array([beta.x], dtype=np.uint64),
                                           np.array([beta.z], dtype=np.uint64))[:, 0])
            rates.append(layer.rates)
        anti = np.concatenate(anti).astype(bool) if anti else np.zeros(0, dtype=bool)
        rates = np.concatenate(rates) if rates else np.zeros(0)
        return cls(anti, rates, prop.sign, prop.trajectory[0].is_z_type)

    def flip_probability(self, power: float) -> np.ndarray:
        return -np.expm1(-2.0 * power * self.rates) / 2.0

    def outcomes(self, flips: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """``+-1`` per shot from the parity of anticommuting error draws."""
        parity = np.bitwise_xor.reduce(flips[:, self.anti], axis=1) if self.anti.any() \
            else np.zeros(flips.shape[0], dtype=bool)
        out = np.where(parity, -1.0, 1.0) * self.sign
        if not self.deterministic:
            out *= np.where(rng.random(flips.shape[0]) < 0.5, -1.0, 1.0)
        return out


def _draw(rng: np.random.Generator, shots: int, p: np.ndarray) -> np.ndarray:
    return rng.random((shots, p.size)) < p


def _run_chunks(kernel, M: int, seed, threads: int) -> tuple[float, float]:
    """Sum and sum of squares of ``kernel(rng, shots)`` over fixed-size chunks.

    Chunk ``c`` always gets the ``c``-th spawned stream, and partial sums are
    combined in chunk order, so ``threads`` never changes the result.
    """
    sizes = [min(CHUNK_SHOTS, M - s) for s in range(0, M, CHUNK_SHOTS)]
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = root.spawn(len(sizes))

    def one(i: int) -> tuple[float, float]:
        v = kernel(np.random.default_rng(streams[i]), sizes[i])
        return float(v.sum()), float(v @ v)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, range(len(sizes))))
    else:
        parts = [one(i) for i in range(len(sizes))]
    arr = np.array(parts).reshape(-1, 2)
    return float(np.sum(arr[:, 0])), float(np.sum(arr[:, 1]))


def _summary(total: float, total_sq: float, M: int) -> tuple[float, float]:
    mean = total / M
    if M < 2:
        return mean, 0.0
    var = max(total_sq - M * mean * mean, 0.0) / (M - 1)
    return mean, math.sqrt(var / M)


def _seed(rng) -> int | np.random.SeedSequence:
    """Accept an int seed, a ``SeedSequence`` or a ``Generator`` (consumed once)."""
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2 ** 63))
    return rng


def pec_simulate(circuit: NoisyCircuit, observable: PauliString, M: int, rng,
                 shots_per_circuit: int = 1, threads: int = 1) -> EstimatorResult:
    """Two-point per-generator PEC; each sampled correction circuit runs ``shots_per_circuit`` times."""
    if M < 1 or shots_per_circuit < 1:
        raise ValueError("M and shots_per_circuit must be positive")
    model = _ShotModel.build(circuit, observable)
    gamma = math.exp(2.0 * float(model.rates.sum()))
    p_hw = model.flip_probability(1.0)
    # |q_P| / gamma_g with q_P = (1 - e^{2 lambda}) / 2 and gamma_g = e^{2 lambda}
    p_corr = np.expm1(2.0 * model.rates) / 2.0 * np.exp(-2.0 * model.rates)

    def kernel(r: np.random.Generator, shots: int) -> np.ndarray:
        n_circ = -(-shots // shots_per_circuit)
        corr = np.repeat(_draw(r, n_circ, p_corr), shots_per_circuit, axis=0)[:shots]
        hw = _draw(r, shots, p_hw)
        sign = np.where(np.bitwise_xor.reduce(corr, axis=1), -1.0, 1.0) if corr.shape[1] \
            else np.ones(shots)
        return gamma * sign * model.outcomes(hw ^ corr, r)

    mean, err = _summary(*_run_chunks(kernel, M, _seed(rng), threads), M)
    return EstimatorResult(mean, err, M)


def _gain_samples(model: _ShotModel, gain: float, shots: int, seed, threads: int):
    p_hw = model.flip_probability(1.0)
    p_amp = model.flip_probability(gain - 1.0)

    def kernel(r: np.random.Generator, n: int) -> np.ndarray:
        return model.outcomes(_draw(r, n, p_hw) ^ _draw(r, n, p_amp), r)

    return _summary(*_run_chunks(kernel, shots, seed, threads), shots)


def zne_simulate(circuit: NoisyCircuit, observable: PauliString, config: ZneConfig, rng,
                 threads: int = 1) -> EstimatorResult:
    """Noise amplification by ``N**(G-1)`` at each gain, then the log-linear fit."""
    model = _ShotModel.build(circuit, observable)
    seed = _seed(rng)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = root.spawn(config.R)
    points = []
    for G, S, sd in zip(config.gains, config.shots, seeds):
        mean, err = _gain_samples(model, G, S, sd, threads)
        points.append((G, mean, err))
    f0, df0 = fit_exponential(points)
    return EstimatorResult(f0, df0, config.M)


def tem_simulate(circuit: NoisyCircuit, observable: PauliString, tem: TemMap, M: int, rng,
                 threads: int = 1) -> EstimatorResult:
    """Unmitigated shots rescaled by the TEM diagonal at the observable."""
    if tem.n != circuit.n:
        raise DimensionError(f"TEM on {tem.n} qubits, circuit on {circuit.n}")
    if M < 1:
        raise ValueError("M must be positive")
    model = _ShotModel.build(circuit, observable)
    d = diagonal_element(tem, observable.unsigned())
    p_hw = model.flip_probability(1.0)

    def kernel(r: np.random.Generator, shots: int) -> np.ndarray:
        return d * model.outcomes(_draw(r, shots, p_hw), r)

    mean, err = _summary(*_run_chunks(kernel, M, _seed(rng), threads), M)
    return EstimatorResult(mean, err, M)
