"""Closed-form error, overhead and wall-time budgets for PEC, ZNE and TEM."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .tem import below_threshold_extra

TECHNIQUES = ("pec", "zne", "tem")
ZNE_RANDOM_COEFF = 1.795
ZNE_GAIN_COEFF = 2.557
SECONDS_PER_YEAR = 365 * 24 * 3600
# state-vector memory of the largest cloud simulation referenced for the contour baseline
STATEVECTOR_BYTES = 562_950 * 2 ** 30
STATEVECTOR_BYTES_PER_AMPLITUDE = 16


@dataclass(frozen=True)
class ResourceParams:
    """Wall-time and hardware constants; times in seconds, ``P`` in FLOPS."""

    T: float = 86_400.0
    tau_layer: float = 0.6e-6
    tau_meas: float = 0.8e-6
    tau_delay: float = 0.5e-3
    P: float = 1e15
    c_b_inv: float = 3e5
    n_rec: int = 1
    theta: float = 0.018
    # machine assumed for conventional (non-mitigated) MPS simulation
    P_classical: float = 1.2e18

    def __post_init__(self) -> None:
        for name in ("T", "tau_layer", "tau_meas", "P", "c_b_inv", "P_classical"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.tau_delay < 0:
            raise ValueError("tau_delay must be non-negative")
        if self.theta < 0:
            raise ValueError("theta must be non-negative")
        if int(self.n_rec) != self.n_rec or self.n_rec < 1:
            raise ValueError("n_rec must be an integer >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CausalArea:
    """Error-accumulating area ``|A|`` of the circuit, at most ``N * L``."""

    area: float

    def __post_init__(self) -> None:
        if not self.area >= 0:
            raise ValueError("causal area must be non-negative")

    @classmethod
    def dense(cls, N: int, L: int) -> CausalArea:
        return cls(float(N * L))


@dataclass(frozen=True)
class ErrorBudget:
    technique: str
    delta_random: float
    delta_sys: tuple[tuple[str, float], ...]
    M: int
    chi_affordable: int | None = None
    delta_total: float = field(init=False)

    def __post_init__(self) -> None:
        total = math.sqrt(self.delta_random ** 2 + sum(v * v for _, v in self.delta_sys))
        object.__setattr__(self, "delta_total", total)

    def component(self, name: str) -> float:
        return dict(self.delta_sys)[name]

    def to_dict(self) -> dict:
        out = {"technique": self.technique, "delta_random": self.delta_random,
               "delta_sys": dict(self.delta_sys), "delta_total": self.delta_total, "M": self.M}
        if self.chi_affordable is not None:
            out["chi_affordable"] = self.chi_affordable
        return out


def shots_available(params: ResourceParams, L: int) -> int:
    """``M = floor(T / (L tau_l + tau_m + tau_delay))``."""
    if L < 0:
        raise ValueError("L must be non-negative")
    return int(math.floor(params.T / (L * params.tau_layer + params.tau_meas + params.tau_delay)))


def random_error(overhead: float, M: int) -> float:
    """``sqrt(Gamma / M)``."""
    return math.sqrt(overhead / M)


def _exp(x: float) -> float:
    """``exp`` that saturates to ``inf`` instead of raising."""
    return math.exp(x) if x < 709.0 else math.inf


def optimal_overheads(eps_area: float) -> dict[str, float]:
    """Optimal sampling overheads as functions of the total error count ``eps * |A|``."""
    return {"pec": _exp(2.0 * eps_area),
            "zne": (1.0 + ZNE_RANDOM_COEFF * eps_area) ** 2 * _exp(eps_area),
            "tem": _exp(eps_area)}


def tem_affordable_chi(N: int, L: int, params: ResourceParams) -> float:
    """Real root of ``chi**3 = c_b P T / (n_rec N L)``."""
    return (params.P * params.T / (params.c_b_inv * params.n_rec * N * L)) ** (1.0 / 3.0)


def instability_error(epsilon: float, N: int, L: int, theta: float, area: float | None = None) -> float:
    """``eps N sqrt(L) Theta / 2``, written as ``eps |A| Theta / (2 sqrt(L))``."""
    area = N * L if area is None else area
    return 0.5 * epsilon * area * theta / math.sqrt(L) if L > 0 else 0.0


def extrapolation_error(epsilon: float, area: float) -> float:
    """``(1 + 2.557 / (eps |A|)) eps^2 |A| / 36``, finite at ``eps |A| = 0``."""
    return (epsilon * epsilon * area + ZNE_GAIN_COEFF * epsilon) / 36.0


def budget(technique: str, N: int, L: int, epsilon: float, area: CausalArea | None = None,
           params: ResourceParams | None = None) -> ErrorBudget:
    """Random and systematic error of one technique on a dense ``N x L`` circuit."""
    technique = technique.lower()
    if technique not in TECHNIQUES:
        raise ValueError(f"technique must be one of {TECHNIQUES}")
    if N < 1 or L < 1:
        raise ValueError("N and L must be positive")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    params = params or ResourceParams()
    a = float(N * L) if area is None else area.area
    if a > N * L:
        raise ValueError(f"causal area {a} exceeds N*L = {N * L}")
    M = shots_available(params, L)
    ea = epsilon * a
    delta_random = random_error(optimal_overheads(ea)[technique], M)
    sys = [("instability", instability_error(epsilon, N, L, params.theta, a))]
    chi = None
    if technique == "zne":
        sys.append(("extrapolation", extrapolation_error(epsilon, a)))
    elif technique == "tem":
        chi_real = tem_affordable_chi(N, L, params)
        chi = int(math.floor(chi_real + 1e-9))
        sys.append(("compression", epsilon * ea / 30.0))
        sys.append(("compression_below_threshold",
                    below_threshold_extra(N, L, epsilon, max(chi_real, 1.0))))
    return ErrorBudget(technique, delta_random, tuple(sys), M, chi)


def overhead_curves(epsilon: float, nl_values) -> list[dict]:
    """Rows of ``NL``, ``eps NL`` and the optimal overheads; the lower bound equals TEM."""
    rows = []
    for nl in nl_values:
        o = optimal_overheads(epsilon * nl)
        rows.append({"NL": nl, "eps_NL": epsilon * nl, "pec": o["pec"], "zne": o["zne"],
                     "tem": o["tem"], "lower_bound": o["tem"]})
    return rows


def contour_grid(technique: str, epsilon: float, params: ResourceParams | None, n_values,
                 l_values) -> list[dict]:
    """``delta_total`` at every ``(N, L)`` of the grid, plus the random and systematic split."""
    rows = []
    for N in n_values:
        for L in l_values:
            b = budget(technique, N, L, epsilon, None, params)
            rows.append({"N": N, "L": L, "delta": b.delta_total, "delta_random": b.delta_random,
                         "delta_sys": math.sqrt(max(b.delta_total ** 2 - b.delta_random ** 2, 0.0))})
    return rows


# -- conventional MPS baseline ---------------------------------------------------------

def mps_chi_exact(N: int, t: int) -> int:
    """``2**min(t + 1, N / 2)`` for the brickwork Floquet benchmark."""
    return 2 ** min(t + 1, N // 2)


def mps_wall_time(N: int, chi: float, flops: float) -> float:
    """Seconds for the ``2 N chi**3`` contraction."""
    return 2.0 * N * float(chi) ** 3 / flops


def mps_relative_error(chi: float, chi_exact: float) -> float:
    """0 at or above ``chi_exact``, ``1 - chi/chi_exact`` above half of it, 1 below."""
    if chi >= chi_exact:
        return 0.0
    if chi > chi_exact / 2.0:
        return 1.0 - chi / chi_exact
    return 1.0


def classical_mps_baseline(N: int, t: int, params: ResourceParams | None = None) -> tuple[int, float]:
    """Affordable bond dimension ``(P T / 2N)**(1/3)`` capped at ``chi_exact``, and its error."""
    params = params or ResourceParams()
    chi_exact = mps_chi_exact(N, t)
    chi = min(int(math.floor((params.P_classical * params.T / (2.0 * N)) ** (1.0 / 3.0) + 1e-9)), chi_exact)
    return chi, mps_relative_error(chi, chi_exact)


def statevector_max_qubits() -> int:
    """Largest ``N`` whose complex128 state vector fits the referenced memory."""
    return int(math.floor(math.log2(STATEVECTOR_BYTES / STATEVECTOR_BYTES_PER_AMPLITUDE)))


def classical_series(n_values, params: ResourceParams | None = None) -> list[dict]:
    """Per ``N``: state-vector feasibility and the affordable conventional MPS bond dimension."""
    params = params or ResourceParams()
    nmax = statevector_max_qubits()
    return [{"N": N, "statevector_feasible": int(N <= nmax),
             "mps_chi_affordable": int(math.floor((params.P_classical * params.T / (2.0 * N)) ** (1 / 3) + 1e-9))}
            for N in n_values]
