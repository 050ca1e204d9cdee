"""Command-line entry point: ``evolve``, ``sweep``, ``verify`` and ``reference``.

Exit codes: 0 success, 1 invariant or strict-mode failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import __version__
from .dynamics import DEFAULT_DT, EvolutionSpec, evolve, write_trajectory_csv
from .fockspace import ConfigError, SpaceConfig, build_space, vacuum_state
from .observables import OBSERVABLE_COLUMNS, observe
from .operators import OperatorSet, build_hamiltonian
from .qubitstates import dv_witness, make_reference, separable_zcov_max, spin_moments, zcov_maximize
from .sweep import SweepGrid, compare_regimes, default_grid, run_sweep, write_sweep

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
REFERENCE_ALIASES = {"ghz": "ghz", "w": "w", "mimic": "mimic_ghz", "mimic_ghz": "mimic_ghz",
                     "dephased": "dephased_ghz", "dephased_ghz": "dephased_ghz", "mixed": "mixed"}


@dataclass
class RunConfig:
    """Every effective setting of one invocation."""

    cutoffs: tuple[int, int, int] = (6, 6, 6)
    mode_freqs: tuple[float, float, float] = (1.0, 2.0, 1.0)
    qubit_freqs: tuple[float, float, float] = (1.0, 2.0, 1.0)
    rabi_couplings: tuple[float, float, float] = (0.01, 0.01, 0.01)
    g0: float = 0.1
    drive_freq: float | None = None
    t_final: float = 25.0
    sample_step: float = 0.25
    method: str = "a"
    dt: float = DEFAULT_DT
    norm_tol: float = 1e-9
    grid_g0: tuple[float, ...] | None = None
    grid_t: tuple[float, ...] | None = None
    jobs: int = 1
    seed: int = 0
    samples: int = 100_000
    out: str = "."
    strict: bool = False
    use_literal_P: bool = False
    check_convergence: bool = False

    def space_config(self) -> SpaceConfig:
        return SpaceConfig(cutoffs=self.cutoffs, mode_freqs=self.mode_freqs,
                           qubit_freqs=self.qubit_freqs, rabi_couplings=self.rabi_couplings,
                           pump_coupling=self.g0, drive_freq=self.drive_freq)

    def effective(self) -> dict:
        d = asdict(self)
        d["drive_freq"] = self.space_config().drive_freq
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def provenance(self, command: str) -> dict:
        eff = self.effective()
        hashed = {k: v for k, v in eff.items() if k not in ("out", "jobs")}
        digest = hashlib.sha256(json.dumps(hashed, sort_keys=True).encode()).hexdigest()[:12]
        prov = {"command": command, "version": __version__, "config_hash": digest,
                "method": self.method, "dt": self.dt, "cutoffs": list(self.cutoffs)}
        prov.update({k: v for k, v in eff.items() if k not in prov})
        return prov


_TUPLE3 = {"cutoffs": int, "mode_freqs": float, "qubit_freqs": float, "rabi_couplings": float}
_LISTS = {"grid_g0", "grid_t"}
_SCALARS = {f.name: f.type for f in fields(RunConfig)}


def _parse_list(text: str, cast=float) -> tuple:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ConfigError(f"empty list {text!r}")
    try:
        return tuple(cast(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad list {text!r}: {exc}") from None


def _coerce(key: str, raw: str):
    if key in _TUPLE3:
        vals = _parse_list(raw, _TUPLE3[key])
        if len(vals) == 1:
            vals = vals * 3
        if len(vals) != 3:
            raise ConfigError(f"{key} needs 1 or 3 values, got {raw!r}")
        return vals
    if key in _LISTS:
        return _parse_list(raw)
    kind = _SCALARS[key]
    try:
        if "bool" in kind:
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if kind.startswith("int"):
            return int(raw)
        if key == "drive_freq" and raw.lower() in ("none", ""):
            return None
        if "float" in kind:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


_KEY_ALIASES = {"cutoff": "cutoffs", "pump_coupling": "g0", "omega": "mode_freqs",
                "Omega": "qubit_freqs", "g": "rabi_couplings", "t-final": "t_final"}


def read_config_file(path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    out = {}
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _KEY_ALIASES.get(key, key).replace("-", "_")
        if key not in _SCALARS:
            raise ConfigError(f"{p}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def build_run_config(args) -> RunConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    overrides = {
        "g0": args.g0, "t_final": args.t_final, "dt": args.dt, "method": args.method,
        "jobs": args.jobs, "seed": args.seed, "out": args.out, "samples": args.samples,
        "sample_step": args.sample_step,
    }
    if args.cutoff is not None:
        overrides["cutoffs"] = (args.cutoff,) * 3
    if args.grid_g0 is not None:
        overrides["grid_g0"] = _parse_list(args.grid_g0)
    if args.grid_t is not None:
        overrides["grid_t"] = _parse_list(args.grid_t)
    for flag in ("strict", "use_literal_P", "check_convergence"):
        if getattr(args, flag, False):
            overrides[flag] = True
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(**values)
    if cfg.method not in ("a", "b"):
        raise ConfigError(f"method must be 'a' or 'b', got {cfg.method!r}")
    if cfg.jobs < 1 or cfg.samples < 1 or cfg.sample_step <= 0:
        raise ConfigError("jobs, samples and sample_step must be positive")
    cfg.space_config()  # validates physics
    return cfg


def _sample_times(cfg: RunConfig) -> tuple[float, ...]:
    n = int(round(cfg.t_final / cfg.sample_step))
    times = [round(k * cfg.sample_step, 12) for k in range(n + 1)]
    times = [t for t in times if t <= cfg.t_final + 1e-12]
    if times[-1] < cfg.t_final - 1e-12:
        times.append(cfg.t_final)
    return tuple(times)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_evolve(cfg: RunConfig) -> int:
    config = cfg.space_config()
    space = build_space(config)
    ops = OperatorSet(space)
    ham = build_hamiltonian(space, config)
    spec = EvolutionSpec(cfg.t_final, _sample_times(cfg), cfg.method, cfg.dt, cfg.norm_tol)
    traj = evolve(space, ham, spec, vacuum_state(space),
                  observer=lambda t, psi: observe(ops, psi, t, cfg.g0).row())
    prov = cfg.provenance("evolve")
    path = _out_dir(cfg) / f"trajectory_{prov['config_hash']}.csv"
    write_trajectory_csv(path, traj, OBSERVABLE_COLUMNS, prov)
    print(f"wrote {path} ({len(traj.times)} samples)")
    for w in traj.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if traj.failed:
        print(f"error: {traj.diagnostic}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    base = default_grid()
    grid = SweepGrid(cfg.grid_g0 or base.g0_values, cfg.grid_t or base.times)
    result = run_sweep(grid, cfg.space_config(), jobs=cfg.jobs, method=cfg.method, dt=cfg.dt,
                       norm_tol=cfg.norm_tol, check_convergence=cfg.check_convergence)
    csv_path, json_path = write_sweep(result, _out_dir(cfg))
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    failed = [r for r in result.rows if r.failed]
    for r in failed:
        print(f"row g0={r.g0:g} failed: {r.diagnostic}", file=sys.stderr)
    if len(failed) < len(result.rows):
        summary = compare_regimes(result)
        print(f"G_CV>0 cells: {summary['cells_cv_positive']}  G_DV>0 cells: "
              f"{summary['cells_dv_positive']}  of {summary['cells_total']}")
    return EXIT_FAIL if failed and cfg.strict else EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import VerifySettings, format_report, note_lines, run_suite

    settings = VerifySettings(config=cfg.space_config(), t_final=cfg.t_final,
                              sample_step=cfg.sample_step, dt=cfg.dt, method=cfg.method,
                              literal_P=cfg.use_literal_P, seed=cfg.seed,
                              zbound_samples=cfg.samples)
    checks = run_suite(settings)
    prov = [f"# {k} = {v}" for k, v in cfg.provenance("verify").items()]
    report = format_report(checks, note_lines())
    text = "\n".join(prov) + "\n" + report
    sys.stdout.write(text)
    if cfg.out != ".":
        path = _out_dir(cfg) / "verify_report.txt"
        path.write_text(text)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def _moment_table(kind: str) -> list[str]:
    rho = make_reference(kind)
    flat = spin_moments(rho).flat()
    lines = [f"state {kind}"]
    lines += [f"{name} {value:.12g}" for name, value in flat.items()]
    lines.append(f"G_DV {dv_witness(rho):.12g}")
    return lines


def cmd_reference(cfg: RunConfig, kind: str) -> int:
    lines = [f"# {k} = {v}" for k, v in cfg.provenance(f"reference {kind}").items()
             if k in ("command", "version", "config_hash", "seed", "samples")]
    if kind == "zbound":
        value, arg = zcov_maximize(cfg.samples, cfg.seed)
        lines.append(f"zcov_max {value:.12g}")
        lines.append("argmax " + " ".join(f"{c.real:.6f}{c.imag:+.6f}j" for c in arg))
        lines.append("argmax_probabilities " + " ".join(f"{abs(c) ** 2:.6f}" for c in arg))
        lines.append(f"separable_max {separable_zcov_max(cfg.samples, cfg.seed):.12g}")
    else:
        lines += _moment_table(REFERENCE_ALIASES[kind])
    print("\n".join(lines))
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat 'key = value' config file")
    p.add_argument("--g0", type=float, help="pump coupling")
    p.add_argument("--t-final", type=float, dest="t_final")
    p.add_argument("--sample-step", type=float, dest="sample_step")
    p.add_argument("--dt", type=float, help="maximum integrator step")
    p.add_argument("--cutoff", type=int, help="Fock cutoff for all three modes")
    p.add_argument("--method", choices=("a", "b"), help="a: RK4, b: exponential midpoint")
    p.add_argument("--grid-g0", dest="grid_g0", metavar="LIST")
    p.add_argument("--grid-t", dest="grid_t", metavar="LIST")
    p.add_argument("--jobs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--use-literal-P", action="store_true", dest="use_literal_P")
    p.add_argument("--check-convergence", action="store_true", dest="check_convergence")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("-v", "--verbose", action="store_true")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spdcqubits",
                                     description="Three-mode down-conversion with qubit readout.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("evolve", "integrate one trajectory and write a CSV"),
                            ("sweep", "scan the (g0, t) grid"),
                            ("verify", "run the invariant suite")):
        _add_common(sub.add_parser(name, help=help_text))
    ref = sub.add_parser("reference", help="reference qubit states and the z-covariance bound")
    ref.add_argument("kind", choices=sorted(REFERENCE_ALIASES) + ["zbound"])
    _add_common(ref)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_run_config(args)
        if args.command == "evolve":
            return cmd_evolve(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        return cmd_reference(cfg, args.kind)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
