"""Experiment configuration and scenario runners.

Subcommands::

    rcdsim simulate --config cfg.toml --out DIR   # time series + summary
    rcdsim validate --config cfg.toml --out DIR   # full/effective/analytic cross-check
    rcdsim optimize --config cfg.toml --out DIR   # coupling-efficiency sweep table
    rcdsim wigner   --config cfg.toml --out DIR   # postselected phase-space grids

Exit codes: 0 success, 1 validation thresholds exceeded, 2 configuration
error, 3 numerical failure.  All computations are deterministic (no RNG),
so rerunning a config reproduces its outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import optimize as opt
from .channel import (ChannelModel, epsilon_pulse, fidelity_lower_bound,
                      full_gate_channel, ideal_cd, p_spontaneous)
from .dynamics import CascadeConfig, IntegrationError, run_rcd
from .model import GateSpec, SystemParams
from .phasespace import negativity_volume, postselect_qubit, wigner
from .qop import (DensityMatrix, HilbertSpace, coherent_state, fidelity,
                  qubit_state, tensor_state)

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(ValueError):
    """Configuration file is missing, unparsable, or inconsistent."""


def _as_complex(value, path: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{path}: expected a number or [re, im] pair, got {value!r}")


@dataclass
class ExperimentConfig:
    """Validated view of a TOML experiment file."""

    system: SystemParams
    gate: GateSpec
    simulate: dict = field(default_factory=dict)
    validate: dict = field(default_factory=dict)
    optimize: dict = field(default_factory=dict)
    wigner: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        try:
            sys_kw = dict(data.get("system", {}))
            system = SystemParams(**sys_kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"system: {exc}") from None
        gate_raw = dict(data.get("gate", {}))
        try:
            for key in ("alpha", "beta"):
                if key in gate_raw:
                    gate_raw[key] = _as_complex(gate_raw[key], f"gate.{key}")
            gate = GateSpec(**gate_raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"gate: {exc}") from None
        return cls(system=system, gate=gate,
                   simulate=dict(data.get("simulate", {})),
                   validate=dict(data.get("validate", {})),
                   optimize=dict(data.get("optimize", {})),
                   wigner=dict(data.get("wigner", {})),
                   raw=data)

    @classmethod
    def load(cls, path: str | Path, overrides: list[str] = ()) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for item in overrides or ():
            key, _, value = item.partition("=")
            if not _:
                raise ConfigError(f"--override needs key=value, got {item!r}")
            try:
                parsed = tomllib.loads(f"v = {value}")["v"]
            except tomllib.TOMLDecodeError:
                raise ConfigError(f"--override {item!r}: unparsable value") from None
            node = data
            parts = key.strip().split(".")
            for p in parts[:-1]:
                node = node.setdefault(p, {})
                if not isinstance(node, dict):
                    raise ConfigError(f"--override {key!r}: {p} is not a table")
            node[parts[-1]] = parsed
        return cls.from_dict(data)

    def normalized(self) -> dict:
        """Canonical form with derived defaults filled in (for round-tripping)."""
        g = self.gate
        return {
            "system": {k: getattr(self.system, k)
                       for k in ("g", "delta", "kappa_ex", "kappa_in", "gamma",
                                 "r1", "r2")},
            "gate": {"alpha": [g.alpha.real, g.alpha.imag],
                     "beta": [g.beta.real, g.beta.imag],
                     "tau": g.tau, "t0": g.t0, "T": g.T},
            "simulate": dict(self.simulate),
            "validate": dict(self.validate),
            "optimize": dict(self.optimize),
            "wigner": dict(self.wigner),
        }

    def cascade_config(self, section: dict | None = None) -> CascadeConfig:
        s = self.simulate if section is None else section
        kw = {}
        for key in ("mode", "cavity_dim", "output_dim", "input_dim", "h",
                    "sample_every", "method", "clamp_epsilon"):
            if key in s:
                kw[key] = s[key]
        try:
            return CascadeConfig(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"simulate: {exc}") from None


# ---------------------------------------------------------------------------
# output helpers


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    if isinstance(x, complex):
        return f"{x.real:.17g}{x.imag:+.17g}j"
    return str(x)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    flat = [x for row in rows for x in row if isinstance(x, (int, float))]
    if any(not math.isfinite(float(x)) for x in flat):
        raise IntegrationError("non-finite value in output table")
    lines = [",".join(header)]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict) -> None:
    def guard(obj):
        if isinstance(obj, float) and not math.isfinite(obj):
            raise IntegrationError("non-finite value in JSON summary")
        if isinstance(obj, dict):
            for v in obj.values():
                guard(v)
        if isinstance(obj, list):
            for v in obj:
                guard(v)

    guard(payload)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _ideal_target(cfg: ExperimentConfig, qubit: str, out_dim: int,
                  out_label: str = "out"):
    psi = tensor_state(qubit_state(qubit),
                       coherent_state(cfg.gate.beta, out_dim, label=out_label))
    cd = ideal_cd(cfg.gate.alpha, (2, out_dim), labels=("q", out_label))
    from .qop import PureState
    return PureState(psi.space, cd.matrix @ psi.vector)


def _error_budget(cfg: ExperimentConfig) -> dict:
    params, gate = cfg.system, cfg.gate
    out = {"eps_pulse": epsilon_pulse(params.eta_ex, gate.n_in,
                                      params.kappa * gate.tau)}
    if params.gamma > 0 and 0 < params.eta_ex < 1:
        out["p_sp"] = p_spontaneous(gate, params, form="CLOSED")
    else:
        out["p_sp"] = 0.0
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    model = str(cfg.simulate.get("model", "EFFECTIVE")).upper()
    if model not in ("FULL", "EFFECTIVE"):
        raise ConfigError(f"simulate.model must be FULL or EFFECTIVE, got {model}")
    qubits = list(cfg.simulate.get("qubit_states", ["plus", "minus"]))
    ccfg = cfg.cascade_config()
    results = {}
    for q in qubits:
        results[q] = run_rcd(cfg.system, cfg.gate, model=model, config=ccfg, qubit=q)

    first = next(iter(results.values()))
    header = ["t"]
    columns = [first.times]
    for q, res in results.items():
        if res.I_out is not None:
            header.append(f"I_out_{q}")
            columns.append(res.I_out)
        header += [f"cavity_n_{q}", f"atom_exc_{q}"]
        columns += [res.cavity_n, res.atom_excitation]
    rows = [list(vals) for vals in zip(*columns)]
    _write_csv(out_dir / "timeseries.csv", header, rows)

    summary = {"model": model, "mode": ccfg.mode, "budget": _error_budget(cfg),
               "per_state": {}}
    for q, res in results.items():
        entry = {"trace_drift": res.trace_drift,
                 "corrections": res.corrections}
        if res.I_out is not None:
            entry["integrated_intensity"] = res.integrated_intensity()
        if ccfg.mode in ("COHERENT_SO", "FULL_IO") and model == "EFFECTIVE":
            target = _ideal_target(cfg, q, res.rho_final.space.dim_of("out"))
            entry["fidelity_vs_ideal"] = fidelity(res.rho_final, target)
        summary["per_state"][q] = entry
    _write_json(out_dir / "summary.json", summary)
    return EXIT_OK


def _rel_l2(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.linalg.norm(a))
    if scale == 0:
        return float(np.linalg.norm(b))
    return float(np.linalg.norm(a - b) / scale)


def cmd_validate(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    vcfg = cfg.validate
    qubits = list(cfg.simulate.get("qubit_states", ["plus", "minus"]))
    l2_threshold = float(vcfg.get("intensity_l2_threshold", 0.05))
    fid_threshold = float(vcfg.get("fidelity_threshold", 0.999))
    report = {"thresholds": {"intensity_l2": l2_threshold,
                             "fidelity": fid_threshold},
              "intensity_l2": {}, "state_fidelity": {}}
    ok = True

    s_cfg = dict(cfg.simulate)
    s_cfg["mode"] = "COHERENT_S"
    ccfg_s = cfg.cascade_config(s_cfg)
    for q in qubits:
        res_full = run_rcd(cfg.system, cfg.gate, model="FULL", config=ccfg_s, qubit=q)
        res_eff = run_rcd(cfg.system, cfg.gate, model="EFFECTIVE", config=ccfg_s, qubit=q)
        d = _rel_l2(res_full.I_out, res_eff.I_out)
        report["intensity_l2"][q] = d
        ok &= d <= l2_threshold

    if bool(vcfg.get("compare_analytic", True)):
        so_cfg = dict(cfg.simulate)
        so_cfg["mode"] = "COHERENT_SO"
        ccfg_so = cfg.cascade_config(so_cfg)
        for q in qubits:
            res = run_rcd(cfg.system, cfg.gate, model="EFFECTIVE", config=ccfg_so,
                          qubit=q)
            out_dim = res.rho_final.space.dim_of("out")
            psi0 = tensor_state(qubit_state(q),
                                coherent_state(cfg.gate.beta, out_dim, label="out"))
            rho_analytic = full_gate_channel(psi0.to_density_matrix(),
                                             ChannelModel(cfg.gate.alpha,
                                                          cfg.system.eta_ex))
            f = _dm_fidelity(res.rho_final, rho_analytic)
            report["state_fidelity"][q] = f
            ok &= f >= fid_threshold

    report["pass"] = bool(ok)
    _write_json(out_dir / "validate.json", report)
    return EXIT_OK if ok else EXIT_THRESHOLD


def _dm_fidelity(rho_a: DensityMatrix, rho_b: DensityMatrix) -> float:
    """Uhlmann fidelity between two density matrices (squared-overlap form)."""
    from scipy.linalg import sqrtm
    a = sqrtm(rho_a.matrix)
    inner = sqrtm(a @ rho_b.matrix @ a)
    return float(np.clip(np.trace(inner).real, 0.0, 1.0) ** 2)


def cmd_optimize(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    ocfg = cfg.optimize
    c_values = [float(c) for c in ocfg.get("c_in", [])]
    betas = [_as_complex(b, "optimize.beta") for b in ocfg.get("beta", [0.0])]
    alpha = _as_complex(ocfg.get("alpha", [0.0, 1.0]), "optimize.alpha")
    if not c_values:
        raise ConfigError("optimize.c_in grid is empty")
    kappa_in = float(ocfg.get("kappa_in", cfg.system.kappa_in))
    tau_g = ocfg.get("tau_g")
    grid = [{"c_in": c, "beta": b, "alpha": alpha} for b in betas for c in c_values]
    rows = opt.sweep(grid, lambda p: opt.performance_row(
        p, kappa_in=kappa_in, tau_g=tau_g), threads=threads)

    numeric = bool(ocfg.get("numeric", False))
    table = []
    for row in rows:
        if row.error is not None:
            table.append([row.inputs["c_in"], row.inputs["beta"], alpha,
                          "", "", "", "", "", row.error])
            continue
        inf_num = ""
        if numeric:
            inf_num = _numeric_infidelity(cfg, row, kappa_in, tau_g)
        table.append([row.inputs["c_in"], row.inputs["beta"], alpha,
                      row.eta_opt, row.eta_approx, row.infidelity_lb, row.p_sp,
                      inf_num, ""])
    _write_csv(out_dir / "optimize.csv",
               ["c_in", "beta", "alpha", "eta_opt", "eta_approx",
                "infidelity_lb", "p_sp", "infidelity_numeric", "error"], table)
    return EXIT_OK


def _numeric_infidelity(cfg: ExperimentConfig, row: opt.SweepRow,
                        kappa_in: float, tau_g: float | None) -> float:
    """Master-equation infidelity at the optimized efficiency (slow path)."""
    eta = row.eta_opt
    c_in = row.inputs["c_in"]
    beta = complex(row.inputs["beta"])
    alpha = complex(row.inputs["alpha"])
    gamma = cfg.system.g**2 / (2 * kappa_in * c_in)
    params = cfg.system.replace(kappa_in=kappa_in,
                                kappa_ex=kappa_in * eta / (1 - eta), gamma=gamma)
    tau = float(tau_g) / params.g if tau_g is not None else cfg.gate.tau
    spec = GateSpec(alpha=alpha, beta=beta, tau=tau)
    ccfg = cfg.cascade_config()
    if ccfg.mode != "COHERENT_SO":
        ccfg = cfg.cascade_config({**cfg.simulate, "mode": "COHERENT_SO"})
    res = run_rcd(params, spec, model="EFFECTIVE", config=ccfg, qubit="0")
    out_dim = res.rho_final.space.dim_of("out")
    psi0 = tensor_state(qubit_state("0"), coherent_state(beta, out_dim, label="out"))
    cd = ideal_cd(alpha, (2, out_dim), labels=("q", "out"))
    from .qop import PureState
    target = PureState(psi0.space, cd.matrix @ psi0.vector)
    return 1.0 - fidelity(res.rho_final, target)


def cmd_wigner(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    wcfg = cfg.wigner
    model = str(wcfg.get("model", "ANALYTIC")).upper()
    qubit = str(wcfg.get("qubit", "0"))
    mode_dim = int(wcfg.get("mode_dim", 24))
    x_range = tuple(wcfg.get("x_range", [-4.0, 4.0]))
    p_range = tuple(wcfg.get("p_range", [-4.0, 4.0]))
    resolution = int(wcfg.get("resolution", 161))

    if model == "ANALYTIC":
        psi0 = tensor_state(qubit_state(qubit),
                            coherent_state(cfg.gate.beta, mode_dim, label="m"))
        chan = ChannelModel.from_params(cfg.gate.alpha, cfg.system, cfg.gate)
        rho = full_gate_channel(psi0.to_density_matrix(), chan)
    elif model == "EFFECTIVE":
        ccfg = cfg.cascade_config({**cfg.simulate, "mode": "COHERENT_SO"})
        rho = run_rcd(cfg.system, cfg.gate, model="EFFECTIVE", config=ccfg,
                      qubit=qubit).rho_final
    else:
        raise ConfigError(f"wigner.model must be ANALYTIC or EFFECTIVE, got {model}")

    summary = {"model": model, "outcomes": {}}
    for outcome in (0, 1):
        try:
            mode_state, prob = postselect_qubit(rho, outcome)
        except ValueError as exc:
            summary["outcomes"][str(outcome)] = {"error": str(exc)}
            continue
        grid = wigner(mode_state, x_range=x_range, p_range=p_range,
                      resolution=resolution)
        rows = [[x, p, grid.values[i, j]]
                for i, p in enumerate(grid.ps) for j, x in enumerate(grid.xs)]
        _write_csv(out_dir / f"wigner_outcome{outcome}.csv", ["x", "p", "W"], rows)
        summary["outcomes"][str(outcome)] = {
            "probability": prob,
            "negativity_volume": negativity_volume(grid),
            "grid_integral": grid.integral(),
        }
    _write_json(out_dir / "wigner.json", summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="rcdsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "validate", "optimize", "wigner"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML experiment file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for sweeps (default: RCD_SIM_THREADS or 1)")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="config override, e.g. gate.tau=10")
    args = parser.parse_args(argv)

    try:
        cfg = ExperimentConfig.load(args.config, args.override)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        threads = args.threads or opt.default_thread_count()
        handler = {"simulate": cmd_simulate, "validate": cmd_validate,
                   "optimize": cmd_optimize, "wigner": cmd_wigner}[args.command]
        return handler(cfg, out_dir, threads)
    except ConfigError as exc:
        print(f"rcdsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, FloatingPointError) as exc:
        print(f"rcdsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
