"""Command-line entry point: ``qemscope <subcommand>``.

Exit status 0 on success, 2 on invalid input, 3 when a capacity guard trips.
With ``--out`` the result goes to that file and a ``<out>.manifest.json`` sits
beside it; otherwise the result is printed to stdout.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .budget import ResourceParams, CausalArea, budget as run_budget, contour_grid, overhead_curves
from .clifford import NoisyCircuit, load_circuit, propagate, stabilizer_observables
from .errors import CapacityError
from .estimators import ZneConfig, optimal_shot_allocation, pec_simulate, tem_simulate, zne_simulate
from .floquet import (MAX_MPS_QUBITS, FloquetConfig, advantage_comparison, dual_unitary_exact,
                      dual_unitary_truncated, mps_evolve, mps_simulate)
from .noise import load_model, model_to_dict, sample_model
from .pauli import PauliString
from .tem import build_tem, diagonal_element, exact_bond_dimension, link_spectrum, load_checkpoint, save_checkpoint

SEED_ENV = "QEMSCOPE_SEED"


class _Run:
    """Collects what the manifest needs while a subcommand runs."""

    def __init__(self, argv) -> None:
        self.argv = list(argv)
        self.started = time.time()
        self.seed: int | None = None
        self.inputs: dict[str, str] = {}

    def digest_input(self, path) -> None:
        self.inputs[str(path)] = hashlib.sha256(Path(path).read_bytes()).hexdigest()

    def manifest(self) -> dict:
        ctx = click.get_current_context()
        params = {k: v for k, v in ctx.find_root().params.items()}
        params.update(ctx.params)
        canon = json.dumps(params, sort_keys=True, default=str)
        return {"command": ["qemscope"] + self.argv, "seed": self.seed,
                "config_digests": {"arguments": hashlib.sha256(canon.encode()).hexdigest(), **self.inputs},
                "version": __version__, "timing": {"started_unix": self.started,
                                                   "elapsed_s": time.time() - self.started}}


def _run() -> _Run:
    return click.get_current_context().find_root().obj


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        env = os.environ.get(SEED_ENV)
        if env is None:
            seed = 0
        else:
            try:
                seed = int(env)
            except ValueError:
                raise click.BadParameter(f"{SEED_ENV}={env!r} is not an integer") from None
    if seed < 0:
        raise click.BadParameter("seed must be non-negative")
    _run().seed = seed
    return seed


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([_fmt(v) for v in r.values()])
    return buf.getvalue()


def _emit(text: str, out: str | None, summary: str) -> None:
    if out is None:
        click.echo(text, nl=not text.endswith("\n"))
        return
    Path(out).write_text(text)
    Path(str(out) + ".manifest.json").write_text(json.dumps(_run().manifest(), indent=2) + "\n")
    click.echo(summary)


def _emit_json(obj: dict, out: str | None, summary: str) -> None:
    _emit(json.dumps(obj, indent=2) + "\n", out, summary)


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from None


def _int_range(text: str) -> list[int]:
    """``a:b:step`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            parts = [int(x) for x in text.split(":")]
            if len(parts) != 3 or parts[2] < 1:
                raise ValueError
            return list(range(parts[0], parts[1] + 1, parts[2]))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter(f"expected a:b:step or a comma list of integers, got {text!r}") from None


out_option = click.option("--out", type=click.Path(dir_okay=False), default=None,
                          help="Output file; a <out>.manifest.json is written beside it.")
seed_option = click.option("--seed", type=int, default=None,
                           help=f"RNG seed; falls back to ${SEED_ENV}, then 0.")


def resource_options(f, theta_flag: str = "--theta"):
    d = ResourceParams()
    opts = [
        click.option(theta_flag, "theta", type=float, default=d.theta, show_default=True,
                     help="Noise instability (relative std of the error density, dimensionless)."),
        click.option("--wall-time", "T", type=float, default=d.T, show_default=True, help="Wall time T (seconds)."),
        click.option("--tau-layer", type=float, default=d.tau_layer, show_default=True, help="Layer time (seconds)."),
        click.option("--tau-meas", type=float, default=d.tau_meas, show_default=True, help="Readout time (seconds)."),
        click.option("--tau-delay", type=float, default=d.tau_delay, show_default=True,
                     help="Delay between shots (seconds)."),
        click.option("--flops", "P", type=float, default=d.P, show_default=True,
                     help="Classical FLOPS available to TEM."),
        click.option("--c-b-inv", type=float, default=d.c_b_inv, show_default=True,
                     help="Inverse contraction efficiency 1/c_b (dimensionless)."),
        click.option("--n-rec", type=int, default=d.n_rec, show_default=True, help="Noise re-learning rounds."),
        click.option("--flops-classical", "P_classical", type=float, default=d.P_classical, show_default=True,
                     help="FLOPS of the conventional MPS baseline machine."),
    ]
    for o in reversed(opts):
        f = o(f)
    return f


def _params(kw: dict) -> ResourceParams:
    keys = ("theta", "T", "tau_layer", "tau_meas", "tau_delay", "P", "c_b_inv", "n_rec", "P_classical")
    return ResourceParams(**{k: kw.pop(k) for k in keys})


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="qemscope")
@click.pass_context
def cli(ctx) -> None:
    """Cost models, estimators and benchmarks for error-mitigated Clifford circuits.

    Rates and error densities are dimensionless; times are seconds.
    """
    if ctx.obj is None:
        ctx.obj = _Run(sys.argv[1:])


# -- budget module -----------------------------------------------------------------

@cli.command("budget")
@click.option("--technique", type=click.Choice(["pec", "zne", "tem"]), required=True)
@click.option("--n", "N", type=int, required=True, help="Qubits.")
@click.option("--l", "L", type=int, required=True, help="Layers.")
@click.option("--eps", type=float, required=True, help="Error density per qubit per layer (dimensionless).")
@click.option("--area", type=float, default=None, help="Causal area |A| (qubit-layers, default N*L).")
@resource_options
@out_option
def budget_cmd(technique, N, L, eps, area, out, **kw):
    """Random plus systematic error of one technique (JSON; errors dimensionless, times in seconds)."""
    params = _params(kw)
    b = run_budget(technique, N, L, eps, None if area is None else CausalArea(area), params)
    obj = {**b.to_dict(), "N": N, "L": L, "epsilon": eps, "params": params.to_dict()}
    _emit_json(obj, out, f"{technique}: delta_total={b.delta_total:.6g} (random {b.delta_random:.6g}, M={b.M})")


@cli.command("overhead")
@click.option("--eps", type=float, required=True, help="Error density (dimensionless).")
@click.option("--nl", "nl", required=True, help="Comma list or a:b:step of circuit volumes N*L.")
@out_option
def overhead_cmd(eps, nl, out):
    """Optimal sampling overheads (CSV: NL, eps_NL, pec, zne, tem, lower_bound; all dimensionless)."""
    if eps < 0:
        raise click.BadParameter("eps must be non-negative")
    rows = overhead_curves(eps, _int_range(nl))
    last = rows[-1] if rows else {}
    _emit(_csv_text(rows), out, f"{len(rows)} rows; last TEM overhead {last.get('tem', float('nan')):.6g}")


@cli.command("contour")
@click.option("--technique", type=click.Choice(["pec", "zne", "tem"]), required=True)
@click.option("--eps", type=float, required=True, help="Error density (dimensionless).")
@click.option("--n-values", default="10:200:10", show_default=True, help="Qubit counts, a:b:step or list.")
@click.option("--l-values", default="10:200:10", show_default=True, help="Layer counts, a:b:step or list.")
@resource_options
@out_option
def contour_cmd(technique, eps, n_values, l_values, out, **kw):
    """Total error over an (N, L) grid (CSV: N, L, delta, delta_random, delta_sys; times in seconds)."""
    rows = contour_grid(technique, eps, _params(kw), _int_range(n_values), _int_range(l_values))
    below = sum(r["delta"] <= 0.1 for r in rows)
    _emit(_csv_text(rows), out, f"{len(rows)} grid points, {below} with delta <= 10%")


# -- estimators, TEM and noise -----------------------------------------------------------

def _load_circuit(circuit_path, noise_path) -> NoisyCircuit:
    run = _run()
    run.digest_input(circuit_path)
    run.digest_input(noise_path)
    return NoisyCircuit(tuple(load_circuit(circuit_path)), load_model(noise_path))


def _observable(circuit: NoisyCircuit, label: str | None, seed: int) -> PauliString:
    if label is None:
        return stabilizer_observables(circuit, 1, np.random.default_rng(seed))[0]
    return PauliString.from_label(label)


@cli.command("simulate")
@click.argument("technique", type=click.Choice(["pec", "zne", "tem"]))
@click.option("--circuit", "circuit_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--noise", "noise_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--obs", default=None, help="Pauli label (default: a seeded stabilizer observable).")
@click.option("--shots", type=int, required=True, help="Total shots M.")
@seed_option
@click.option("--gains", default=None, help="ZNE gains, comma list (default: optimal pair).")
@click.option("--chi", type=int, default=None, help="TEM bond cap (default: exact 4^floor(n/2)).")
@click.option("--threads", type=int, default=1, show_default=True, help="Worker threads; results do not depend on it.")
@out_option
def simulate_cmd(technique, circuit_path, noise_path, obs, shots, seed, gains, chi, threads, out):
    """Shot-level PEC, ZNE or TEM estimate (JSON: mean, std_error, overhead, config).

    Outcomes are dimensionless +-1 averages; overhead is std_error^2 * shots.
    """
    seed = _resolve_seed(seed)
    if threads < 1:
        raise click.BadParameter("threads must be positive")
    circuit = _load_circuit(circuit_path, noise_path)
    o = _observable(circuit, obs, seed)
    rng = np.random.default_rng(seed)
    config = {"technique": technique, "observable": str(o), "shots": shots, "seed": seed}
    if technique == "pec":
        res = pec_simulate(circuit, o, shots, rng, threads=threads)
    elif technique == "zne":
        K = propagate(circuit, o).K
        if gains is None:
            zc = ZneConfig.optimal(K, shots)
        else:
            g = tuple(_float_list(gains))
            zc = ZneConfig(g, tuple(optimal_shot_allocation(g, K, shots)))
        config.update(gains=list(zc.gains), shots_per_gain=list(zc.shots))
        res = zne_simulate(circuit, o, zc, rng, threads=threads)
    else:
        chi = exact_bond_dimension(circuit.n) if chi is None else chi
        tem = build_tem(circuit, chi)
        config.update(chi=chi, compression_estimate=tem.estimator)
        res = tem_simulate(circuit, o, tem, shots, rng, threads=threads)
    obj = {"mean": res.mean, "std_error": res.std_error, "overhead": res.overhead, "config": config}
    _emit_json(obj, out, f"{technique}: {res.mean:.6g} +/- {res.std_error:.3g}")


@cli.group("tem")
def tem_group():
    """Build and query TEM maps (dimensionless Pauli-diagonal coefficients)."""


@tem_group.command("build")
@click.option("--circuit", "circuit_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--noise", "noise_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--chi", type=int, required=True, help="Bond-dimension cap.")
@click.option("--checkpoint", type=click.Path(dir_okay=False), required=True, help="MPO checkpoint to write.")
@click.option("--obs", default=None, help="Also report the map's diagonal at this Pauli label.")
@out_option
def tem_build_cmd(circuit_path, noise_path, chi, checkpoint, obs, out):
    """Build the TEM map and write a checkpoint (JSON summary; estimates are dimensionless)."""
    if chi < 1:
        raise click.BadParameter("chi must be positive")
    circuit = _load_circuit(circuit_path, noise_path)
    tem = build_tem(circuit, chi)
    save_checkpoint(tem, checkpoint)
    obj = {"n": tem.n, "chi": chi, "bond_dims": tem.mpo.bond_dims, "compression_estimate": tem.estimator,
           "per_layer_truncation": list(tem.per_layer_truncation), "checkpoint": str(checkpoint)}
    if obs is not None:
        obj["diagonal"] = {"observable": obs, "value": diagonal_element(tem, PauliString.from_label(obs))}
    _emit_json(obj, out, f"TEM map n={tem.n} chi={chi}: estimate {tem.estimator:.3g} -> {checkpoint}")


@tem_group.command("diagonal")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--obs", required=True, help="Pauli label.")
@out_option
def tem_diagonal_cmd(checkpoint, obs, out):
    """Diagonal element of a checkpointed map at one Pauli string (JSON, dimensionless)."""
    _run().digest_input(checkpoint)
    value = diagonal_element(load_checkpoint(checkpoint), PauliString.from_label(obs))
    _emit_json({"observable": obs, "value": value}, out, f"{obs}: {value:.17g}")


@cli.command("spectrum")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--link", type=int, default=None, help="Single link 1..n-1 (default: all).")
@out_option
def spectrum_cmd(checkpoint, link, out):
    """Schmidt spectra of a checkpointed map (CSV: link, index, sigma, relative; all dimensionless)."""
    _run().digest_input(checkpoint)
    tem = load_checkpoint(checkpoint)
    links = range(1, tem.n) if link is None else [link]
    rows = []
    for k in links:
        s = link_spectrum(tem, k)
        rows += [{"link": k, "index": i, "sigma": float(v), "relative": float(r)}
                 for i, (v, r) in enumerate(zip(s.values, s.relative))]
    _emit(_csv_text(rows), out, f"{len(rows)} singular values over {len(links)} link(s)")


@cli.command("noise-gen")
@click.option("--n", "n", type=int, required=True, help="Qubits.")
@click.option("--l", "L", type=int, required=True, help="Layers.")
@click.option("--eps", type=float, required=True, help="Target error density (dimensionless).")
@click.option("--theta", type=float, default=0.0, show_default=True, help="Instability recorded in the model.")
@seed_option
@out_option
def noise_gen_cmd(n, L, eps, theta, seed, out):
    """Sample a nearest-neighbour SPL noise model (noise JSON; rates are dimensionless per layer)."""
    seed = _resolve_seed(seed)
    if n < 1 or L < 1:
        raise click.BadParameter("n and L must be positive")
    model = sample_model(n, L, eps, np.random.default_rng(seed), theta)
    _emit_json(model_to_dict(model), out, f"n={n} L={L} layers, realized eps={model.epsilon:.6g}")


# -- Floquet benchmark ------------------------------------------------------------------------------

def _parse_floquet_obs(obs: str):
    if "," in obs:
        a, b = obs.split(",")
        return (int(a), int(b))
    return obs


@cli.command("floquet")
@click.argument("mode", type=click.Choice(["exact", "truncated", "mps", "compare"]))
@click.option("--n", "N", type=int, required=True, help="Qubits, N = 4k + 2.")
@click.option("--t", "t", type=int, required=True, help="Floquet steps.")
@click.option("--j", "J", type=float, default=math.pi / 4, show_default=True, help="Coupling J (radians).")
@click.option("--theta", "skew", type=float, default=1.5, show_default=True, help="Skew angle (radians).")
@click.option("--phi", type=float, default=2.63, show_default=True, help="Local phase (radians).")
@click.option("--obs", default="parity", show_default=True,
              help="parity, edge-zz, edge-zz-connected, an N-letter label, or 'a,b' for a connected ZZ.")
@click.option("--chi", type=int, default=None, help="MPS bond cap (mps mode; default: measured exact).")
@click.option("--eps", type=float, default=0.0014, show_default=True, help="Error density for compare mode.")
@(lambda f: resource_options(f, "--instability"))
@out_option
def floquet_cmd(mode, N, t, J, skew, phi, obs, chi, eps, out, **kw):
    """Kicked Heisenberg benchmark values (JSON; angles in radians, expectations dimensionless)."""
    params = _params(kw)
    theta = skew
    c = FloquetConfig(N, t, J, theta, phi)
    o = _parse_floquet_obs(obs)
    obj = {"mode": mode, "config": c.to_dict(), "observable": obs}
    if mode == "exact":
        obj["value"] = dual_unitary_exact(c, o)
    elif mode == "truncated":
        obj["value"] = dual_unitary_truncated(c, o)
    elif mode == "mps":
        if N > MAX_MPS_QUBITS:
            raise CapacityError(f"MPS simulation supports at most {MAX_MPS_QUBITS} qubits")
        chi_exact = max(mps_evolve(c, None).bond_dims)
        obj["chi_exact"] = chi_exact
        obj["chi"] = chi = chi_exact if chi is None else chi
        obj["value"] = mps_simulate(c, chi, o)
    else:
        obj["exact"] = dual_unitary_exact(c, o)
        obj["truncated"] = dual_unitary_truncated(c, o)
        obj["epsilon"] = eps
        obj["advantage"] = advantage_comparison(c, eps, params)
    value = obj.get("value", obj.get("exact"))
    _emit_json(obj, out, f"floquet {mode}: {value:.6g}")


def main(argv=None) -> int:
    """Run the CLI and map errors to exit codes."""
    try:
        argv = sys.argv[1:] if argv is None else list(argv)
        cli.main(args=argv, prog_name="qemscope", standalone_mode=False, obj=_Run(argv))
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 2
    except CapacityError as e:
        click.echo(f"capacity error: {e}", err=True)
        return 3
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as e:
        click.echo(f"input error: {e}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
