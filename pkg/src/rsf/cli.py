"""``rsf`` command-line front end.

Scenario files are JSON objects with a ``kind`` field:

* ``rke``          reduced kinetic equations, CSV trajectory
* ``fock``         truncated Fock-space master equation, CSV of the reduced trajectory
* ``compare``      both of the above plus a JSON deviation report
* ``thermal``      bath-built generator, CSV trajectory with analytic occupations, JSON rates/labels
* ``polarization`` device chain applied to an input Stokes state, JSON
* ``entropy``      entropy of a reduced or Stokes state, JSON

Exit codes: 0 success, 2 parse error, 3 validation error, 4 runtime failure
(including a failed comparison).
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fock, polarization as pol, thermal
from .dynamics import GeneratorSpec, Trajectory, evolve
from .errors import RSFError
from .integrate import IntegratorOptions
from .jsonio import decode_complex, encode_complex
from .linalg import DEFAULT_TOL, max_norm
from .state import ReducedState, particle_number, rsf_entropy

EXIT_OK, EXIT_PARSE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3, 4
KINDS = ("rke", "fock", "compare", "thermal", "polarization", "entropy")
COMPARE_THRESHOLD = 1e-6


class CLIError(Exception):
    exit_code = EXIT_RUNTIME


class ParseError(CLIError):
    exit_code = EXIT_PARSE


class ValidationError(CLIError):
    exit_code = EXIT_VALIDATION


class RuntimeFailure(CLIError):
    exit_code = EXIT_RUNTIME


@dataclass
class Scenario:
    kind: str
    raw: dict
    name: str = "scenario"
    hbar: float = 1.0
    k_b: float = 1.0
    tol: float = DEFAULT_TOL
    seed: int | None = None
    t_grid: np.ndarray | None = None
    options: IntegratorOptions = field(default_factory=IntegratorOptions)
    generator: GeneratorSpec | None = None
    initial: ReducedState | None = None
    fock_initial: fock.FockDensityMatrix | None = None
    bath: thermal.ThermalBathSpec | None = None
    scattering: list = field(default_factory=list)
    chain: list = field(default_factory=list)
    stokes_input: pol.StokesState | None = None
    state: object = None


# ---------------------------------------------------------------- parsing

def load_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc


def _require(obj: dict, *keys):
    missing = [k for k in keys if k not in obj]
    if missing:
        raise ParseError(f"missing required field(s): {', '.join(missing)}")


def parse_time_grid(obj) -> np.ndarray:
    """Either an explicit list of times or ``{"t_end": T, "n": N}`` (N+1 points from 0)."""
    if isinstance(obj, dict):
        _require(obj, "t_end", "n")
        n = int(obj["n"])
        if n < 1:
            raise ValidationError("time grid needs n >= 1")
        grid = np.linspace(0.0, float(obj["t_end"]), n + 1)
    elif isinstance(obj, list):
        grid = np.asarray(obj, dtype=float)
    else:
        raise ParseError("t_grid must be a list or an object with t_end and n")
    if grid.size == 0:
        raise ValidationError("empty time grid")
    if grid.ndim != 1 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise ValidationError("time grid must start at 0 and increase strictly")
    return grid


def _fock_initial(obj: dict, space: fock.FockSpace) -> fock.FockDensityMatrix:
    kind = obj.get("type", "vacuum")
    if kind == "vacuum":
        state = fock.vacuum(space)
    elif kind == "coherent":
        state = fock.coherent_state(space, decode_complex(obj["alpha"], 1))
    elif kind == "fock":
        state = fock.fock_state(space, [int(x) for x in obj["occupation"]])
    elif kind == "quasi_free":
        state = fock.quasi_free_state(space, decode_complex(obj["r"], 2))
    else:
        raise ParseError(f"unknown Fock initial-state type {kind!r}")
    if "displacement" in obj:
        state = fock.displace(state, decode_complex(obj["displacement"], 1))
    return state


def _build(sc: Scenario, obj: dict) -> None:
    kind = sc.kind
    if kind in ("rke", "fock", "compare", "thermal"):
        _require(obj, "t_grid")
        sc.t_grid = parse_time_grid(obj["t_grid"])
        sc.options = IntegratorOptions.from_json(obj.get("integrator"))

    if kind in ("rke", "fock", "compare"):
        _require(obj, "generator", "initial_state")
        sc.generator = GeneratorSpec.from_json(obj["generator"])
        init = obj["initial_state"]
        if kind == "rke":
            sc.initial = ReducedState.from_json(init)
            sc.initial.validate(sc.tol)
        else:
            _require(obj, "cutoff")
            space = fock.FockSpace(sc.generator.dim, int(obj["cutoff"]),
                                   int(obj.get("dim_limit", fock.DEFAULT_DIM_LIMIT)))
            sc.fock_initial = _fock_initial(init, space)
            sc.initial = fock.reduce(sc.fock_initial)
        if sc.initial.dim != sc.generator.dim:
            raise ValidationError(f"state is {sc.initial.dim}-dim, generator {sc.generator.dim}-dim")

    elif kind == "thermal":
        _require(obj, "bath")
        sc.bath = thermal.ThermalBathSpec.from_json(obj["bath"])
        sc.scattering = [(el["weight"], decode_complex(el["u"], 2)) for el in obj.get("scattering", [])]
        sc.generator = thermal.thermal_generator(sc.bath, sc.scattering, sc.hbar, sc.k_b)
        d = len(sc.bath.modes)
        if "initial_state" in obj:
            sc.initial = ReducedState.from_json(obj["initial_state"])
        else:
            sc.initial = ReducedState(np.zeros((d, d)), np.zeros(d))
        if sc.initial.dim != d:
            raise ValidationError(f"state is {sc.initial.dim}-dim, bath has {d} modes")

    elif kind == "polarization":
        _require(obj, "chain")
        sc.chain = parse_chain(obj["chain"], sc.tol)
        sc.stokes_input = pol.StokesState.from_json(obj.get("input", {"stokes": [1, 0, 0, 0]}))

    elif kind == "entropy":
        _require(obj, "state")
        sc.state = parse_state(obj["state"])


def parse_chain(entries, tol: float = DEFAULT_TOL) -> list[pol.MuellerJonesMap]:
    """Chain entries are device specs (``{"device": {...}}``) or literal maps (``{"map": {...}}``).

    Light traverses the entries in list order.
    """
    if not isinstance(entries, list):
        raise ParseError("device chain must be a list")
    out = []
    for i, el in enumerate(entries):
        if not isinstance(el, dict) or len(set(el) & {"device", "map"}) != 1:
            raise ParseError(f"chain entry {i} needs exactly one of 'device' or 'map'")
        if "device" in el:
            out.append(pol.PolarizationDeviceSpec.from_json(el["device"]))
        else:
            out.append(pol.MuellerJonesMap.from_json(el["map"], tol))
    return out


def parse_state(obj):
    if not isinstance(obj, dict):
        raise ParseError("state must be a JSON object")
    if "rho" in obj:
        return ReducedState.from_json(obj)
    if "S" in obj or "stokes" in obj:
        return pol.StokesState.from_json(obj)
    raise ParseError("state needs 'rho' (reduced state) or 'S'/'stokes' (Stokes state)")


def load_scenario(path, tol: float | None = None, seed: int | None = None) -> Scenario:
    obj = load_json(path)
    if isinstance(obj, list):
        obj = {"kind": "polarization", "chain": obj}
    if not isinstance(obj, dict):
        raise ParseError("scenario must be a JSON object")
    if "kind" not in obj:
        obj = {"kind": "entropy", "state": obj} if ("rho" in obj or "S" in obj or "stokes" in obj) else obj
    _require(obj, "kind")
    if obj["kind"] not in KINDS:
        raise ParseError(f"unknown scenario kind {obj['kind']!r}; expected one of {KINDS}")
    try:
        sc = Scenario(
            kind=obj["kind"], raw=obj, name=Path(path).stem,
            hbar=float(obj.get("hbar", 1.0)), k_b=float(obj.get("k_b", 1.0)),
            tol=float(tol if tol is not None else obj.get("tol", DEFAULT_TOL)),
            seed=seed if seed is not None else obj.get("seed"),
        )
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from exc
    try:
        _build(sc, obj)
    except CLIError:
        raise
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed scenario: {exc!r}") from exc
    except (ValueError, RSFError) as exc:
        raise ValidationError(f"{type(exc).__name__}: {exc}") from exc
    return sc


# ---------------------------------------------------------------- running

def fock_trajectory(sc: Scenario) -> tuple[Trajectory, list[float]]:
    states = fock.evolve_fock(sc.generator, sc.fock_initial, sc.t_grid, sc.options, sc.hbar)
    ops = sc.fock_initial.space.ops()
    reduced = [fock.reduce(s, ops) for s in states]
    vn = [fock.von_neumann_entropy(s, sc.k_b) for s in states]
    return Trajectory(sc.t_grid, reduced, clamp_tol=1e3 * sc.tol), vn


def compare_report(sc: Scenario, threshold: float = COMPARE_THRESHOLD) -> tuple[dict, Trajectory, Trajectory]:
    """Per-time max-norm deviations between the Fock oracle and the reduced equations."""
    ref, _ = fock_trajectory(sc)
    rke = evolve(sc.generator, sc.initial, sc.t_grid, sc.options, sc.hbar, sc.tol)
    d_rho = [max_norm(a.rho - b.rho) for a, b in zip(ref.states, rke.states)]
    d_alpha = [max_norm(a.alpha - b.alpha) for a, b in zip(ref.states, rke.states)]
    d_ent = np.abs(ref.entropy - rke.entropy).tolist()
    summary = max(max(d_rho), max(d_alpha))
    report = {
        "times": sc.t_grid.tolist(),
        "deviation_rho": d_rho,
        "deviation_alpha": d_alpha,
        "deviation_entropy": d_ent,
        "max_deviation": summary,
        "max_deviation_entropy": float(np.nanmax(d_ent)) if d_ent else 0.0,
        "threshold": threshold,
        "verdict": "PASS" if summary <= threshold else "FAIL",
    }
    return report, ref, rke


def _thermal_csv(sc: Scenario, traj: Trajectory) -> str:
    gu, gd = thermal.kms_rates(sc.bath, sc.hbar, sc.k_b)
    n0 = np.real(np.diag(sc.initial.rho))
    lines = traj.to_csv().splitlines()
    d = len(sc.bath.modes)
    lines[0] += "," + ",".join(f"n_analytic_{k}" for k in range(d))
    for i, t in enumerate(sc.t_grid, start=1):
        vals = [thermal.occupation_solution(n0[k], gu[k], gd[k], t) for k in range(d)]
        lines[i] += "," + ",".join(repr(float(v)) for v in vals)
    return "\n".join(lines) + "\n"


def compose_chain(chain) -> pol.MuellerJonesMap:
    total = pol.MuellerJonesMap.identity()
    for el in chain:
        m = pol.device_map(el) if isinstance(el, pol.PolarizationDeviceSpec) else el
        total = pol.compose(m, total)
    return total


def _state_summary(s) -> dict:
    if isinstance(s, pol.StokesState):
        return {"stokes": s.stokes.tolist(), "jones": encode_complex(s.alpha),
                "entropy": pol.polarization_entropy(s)}
    return {"particle_number": particle_number(s), "entropy": rsf_entropy(s),
            "correlation_eigenvalues": np.linalg.eigvalsh(s.correlation_matrix()).tolist()}


def run_polarization(sc: Scenario) -> dict:
    total = compose_chain(sc.chain)
    out_state = total.apply(sc.stokes_input)
    compat = total.compatibility(tol=sc.tol, seed=sc.seed)
    return {
        "input": _state_summary(sc.stokes_input),
        "output": _state_summary(out_state),
        "mueller": total.mueller.tolist(),
        "jones": encode_complex(total.jones),
        "kraus": [encode_complex(k) for k in total.kraus],
        "doubly_contracting": total.is_doubly_contracting(sc.tol),
        "compatibility": {"ok": compat.ok, "certificate": compat.certificate,
                          "min_eigenvalue": compat.min_eigenvalue},
        "metadata": {"seed": sc.seed, "n_samples": compat.n_samples},
    }


def execute(sc: Scenario, out_dir: Path) -> tuple[int, list[Path]]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    def write(suffix: str, text: str):
        p = out_dir / f"{sc.name}{suffix}"
        p.write_text(text, encoding="utf-8")
        written.append(p)

    def write_json(suffix: str, obj):
        write(suffix, json.dumps(obj, indent=2) + "\n")

    code = EXIT_OK
    if sc.kind == "rke":
        write(".csv", evolve(sc.generator, sc.initial, sc.t_grid, sc.options, sc.hbar, sc.tol).to_csv())
    elif sc.kind == "fock":
        traj, vn = fock_trajectory(sc)
        lines = traj.to_csv().splitlines()
        lines[0] += ",S_von_neumann"
        for i, v in enumerate(vn, start=1):
            lines[i] += "," + repr(float(v))
        write(".csv", "\n".join(lines) + "\n")
    elif sc.kind == "compare":
        threshold = float(sc.raw.get("threshold", COMPARE_THRESHOLD))
        report, _, rke = compare_report(sc, threshold)
        write(".csv", rke.to_csv())
        write_json(".report.json", report)
        if report["verdict"] != "PASS":
            code = EXIT_RUNTIME
    elif sc.kind == "thermal":
        traj = evolve(sc.generator, sc.initial, sc.t_grid, sc.options, sc.hbar, sc.tol)
        write(".csv", _thermal_csv(sc, traj))
        gu, gd = thermal.kms_rates(sc.bath, sc.hbar, sc.k_b)
        rates = [thermal.decoherence_rate(sc.scattering, k) for k in range(len(sc.bath.modes))]
        write_json(".result.json", {
            "gamma_up": gu.tolist(), "gamma_down": gd.tolist(),
            "gamma_dec": [r[0] for r in rates], "frequency_shift": [r[1] for r in rates],
            "labels": thermal.classify_modes(sc.bath, sc.scattering, sc.hbar, sc.k_b),
        })
    elif sc.kind == "polarization":
        write_json(".result.json", run_polarization(sc))
    elif sc.kind == "entropy":
        write_json(".result.json", _state_summary(sc.state))
    return code, written


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsf", description="Reduced-state-of-field kinetics toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("."), help="output directory (default: cwd)")
    common.add_argument("--tol", type=float, default=None, help="validation tolerance")
    common.add_argument("--seed", type=int, default=None, help="seed for compatibility sampling")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "run a scenario file of any kind"),
        ("compare", "compare the Fock oracle with the reduced equations"),
        ("validate", "parse and validate a scenario without running it"),
        ("device-chain", "apply a polarization device chain"),
        ("entropy", "entropy of a reduced or Stokes state file"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("file", type=Path)
    return parser


def _error_report(exc: Exception, code: int) -> None:
    report = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    cause = exc.__cause__
    if cause is not None:
        report["cause"] = type(cause).__name__
    time = getattr(exc, "time", None) or getattr(cause, "time", None)
    if time is not None:
        report["time"] = time
    print(json.dumps(report), file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        sc = load_scenario(args.file, args.tol, args.seed)
        expected = {"compare": ("compare",), "device-chain": ("polarization",), "entropy": ("entropy",)}
        if args.command in expected and sc.kind not in expected[args.command]:
            raise ValidationError(f"'{args.command}' needs a {expected[args.command][0]} file, got kind {sc.kind!r}")
        if args.command == "validate":
            print(json.dumps({"file": str(args.file), "kind": sc.kind, "valid": True}))
            return EXIT_OK
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("default")
                code, written = execute(sc, args.out)
        except RSFError as exc:
            raise RuntimeFailure(f"{type(exc).__name__}: {exc}") from exc
    except CLIError as exc:
        _error_report(exc, exc.exit_code)
        return exc.exit_code
    print(json.dumps({"kind": sc.kind, "exit_code": code, "outputs": [str(p) for p in written]}))
    return code


if __name__ == "__main__":
    sys.exit(main())
