"""Command-line front end.

Every run is described by one JSON config; results go to ``<out>/<command>.csv``
and ``<out>/report.json``.  Exit codes: 0 success, 1 unusable config, 2 failed
validation, 3 cutoff budget exceeded.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import analysis, companions, limits, phasediff
from .errors import (
    ConfigError,
    CovPhaseError,
    CutoffOverBudget,
    IoError,
    NonHermitianInput,
    NonUnitNorm,
    NonUnitVector,
    TailTooLarge,
    ValidationFailed,
)
from .fock import Cutoff, TwoModeState, hermitian_eigenvalues
from .phase1 import (
    PSD_TOL,
    IntervalSet,
    PhaseKernel,
    kernel_canonical,
    kernel_coherent_vacuum,
    kernel_from_json as phase_kernel_from_json,
)

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_BUDGET = 0, 1, 2, 3

COMMANDS = (
    "validate", "prob", "density", "moments", "factorize", "classical-limit",
    "dirac-limit", "ban", "spectrum", "barnett-pegg", "covariance",
)


# ----------------------------------------------------------------------- emission


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.15g}"
    return str(x)


def emit_plot_data(path: Path, columns: dict[str, list]) -> Path:
    """CSV with a header row, 15 significant digits and LF line endings."""
    lengths = {len(v) for v in columns.values()}
    if len(lengths) > 1:
        raise ValueError("columns differ in length")
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(columns))
            for row in zip(*columns.values()):
                w.writerow([_fmt(x) for x in row])
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


def _round(obj):
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        # A 15-digit decimal round-trips to a double whose shortest repr is no longer.
        return float(f"{float(obj):.15g}")
    if isinstance(obj, (complex, np.complexfloating)):
        return [_round(obj.real), _round(obj.imag)]
    return obj


def write_report(path: Path, report: dict) -> Path:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(json.dumps(_round(report), indent=2, sort_keys=True))
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return path


# ------------------------------------------------------------------ config parsing


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing {key!r}")
    return cfg[key]


def _complex(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, dict):
        return complex(v["abs"] * math.cos(v["arg"]), v["abs"] * math.sin(v["arg"]))
    re, im = v
    return complex(re, im)


def _resolve(spec, base: Path):
    """Inline JSON objects pass through; strings name JSON files next to the config."""
    if isinstance(spec, str):
        path = (base / spec).resolve()
        if not path.is_file():
            raise ConfigError(f"referenced file {spec!r} does not exist")
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    return spec


def _kernel(cfg: dict, base: Path, seed: int) -> phasediff.DiffKernel:
    # A bare kernel spec at the top level is accepted as well.
    if "kernel" not in cfg and ("construct" in cfg or "blocks" in cfg):
        spec = cfg
    else:
        spec = _resolve(_require(cfg, "kernel"), base)
    if spec.get("construct") == "random":
        rng = np.random.default_rng(spec.get("seed", seed))
        return phasediff.random_diff_kernel(int(spec["S"]), rng, int(spec.get("vector_dim", 3)))
    return phasediff.kernel_from_json(spec)


def _sets(cfg: dict) -> list[IntervalSet]:
    if "sets" in cfg:
        return [IntervalSet.from_json(x) for x in cfg["sets"]]
    return [IntervalSet.from_json(_require(cfg, "X"))]


def _state(cfg: dict, base: Path, cutoff: Cutoff) -> TwoModeState:
    spec = _resolve(_require(cfg, "state"), base)
    if "number" in spec:
        n, k = spec["number"]
        return TwoModeState.number(int(n), int(k), cutoff)
    if "amplitudes" in spec:
        amps = {tuple(a["label"]): _complex(a["value"]) for a in spec["amplitudes"]}
        return TwoModeState.from_amplitudes(amps, cutoff, normalize=spec.get("normalize", True))
    if "coherent" in spec:
        z1, z2 = (_complex(z) for z in spec["coherent"])
        st = TwoModeState.coherent(z1, z2, cutoff)
        return TwoModeState(cutoff, vector=st.vector / math.sqrt(st.trace))
    if "product" in spec:
        phi, psi = (analysis.FourierFunction.from_json(f) for f in spec["product"])
        return analysis.product_state(phi, psi, cutoff)
    raise ConfigError(f"unknown state specification {sorted(spec)}")


def _phase_source(spec: dict) -> limits.KernelSource:
    """A fixed kernel when ``dim`` is given, otherwise a family sized on demand."""
    if "dim" in spec:
        return phase_kernel_from_json(spec)
    factories: dict[str, Callable[[int], PhaseKernel]] = {
        "canonical": kernel_canonical,
        "coherent_vacuum": kernel_coherent_vacuum,
    }
    try:
        return factories[spec["type"]]
    except KeyError:
        raise ConfigError(f"phase kernel {spec!r} needs a dim or a known type") from None


def _tol(cfg: dict, key: str, default: float, override: float | None) -> float:
    if override is not None:
        return override
    return float(cfg.get("tolerances", {}).get(key, default))


def _validated(kernel: phasediff.DiffKernel, tol: float, workers: int) -> phasediff.ValidationReport:
    rep = phasediff.validate(kernel, tol, workers)
    if not rep.passed:
        raise ValidationFailed("; ".join(rep.violations))
    return rep


# -------------------------------------------------------------------- commands


class Run:
    """One configured invocation; each ``cmd_*`` returns (csv columns or None, report)."""

    def __init__(self, cfg: dict, base: Path, tol: float | None, threads: int, seed: int):
        self.cfg, self.base, self.tol, self.threads, self.seed = cfg, base, tol, threads, seed

    def kernel(self, check: bool = True) -> phasediff.DiffKernel:
        k = _kernel(self.cfg, self.base, self.seed)
        if check:
            _validated(k, _tol(self.cfg, "psd", PSD_TOL, self.tol), self.threads)
        return k

    def cmd_validate(self):
        k = self.kernel(check=False)
        rep = phasediff.validate(k, _tol(self.cfg, "psd", PSD_TOL, self.tol), self.threads)
        return None, {"S": k.S, **rep.to_json()}

    def cmd_prob(self):
        k = self.kernel()
        st = _state(self.cfg, self.base, Cutoff.total(k.S))
        sets = _sets(self.cfg)
        p = phasediff.probabilities(k, st, sets)
        labels = [json.dumps(X.to_json(), separators=(",", ":")) for X in sets]
        return {"set": labels, "probability": list(p)}, {"S": k.S, "probabilities": list(p)}

    def cmd_density(self):
        k = self.kernel()
        st = _state(self.cfg, self.base, Cutoff.total(k.S))
        nodes = int(self.cfg.get("nodes", 4 * k.S + 5))
        if nodes < 4 * k.S + 5:
            raise ConfigError(f"density needs at least {4 * k.S + 5} nodes")
        th = analysis.density_grid(k, nodes)
        g = analysis.density_diff(k, st, th)
        report = {
            "S": k.S,
            "nodes": nodes,
            "normalization": float(np.mean(g)),
            "trace": st.trace,
            "min_value": float(g.min()),
            "negative_flag": bool(g.min() < analysis.NEGATIVE_DENSITY_FLAG),
        }
        return {"theta": list(th), "value": list(g)}, report

    def cmd_moments(self):
        k = self.kernel()
        M = analysis.first_moment(k)
        back = analysis.reconstruct_from_first_moment(M)
        C1 = analysis.cyclic_moment(k, 1)
        vac = C1.apply((0, 0))
        rows = {"row_n": [], "row_k": [], "col_n": [], "col_k": [], "re": [], "im": []}
        labels = M.cutoff.labels
        for i, j in zip(*np.nonzero(M.matrix)):
            rows["row_n"].append(labels[i][0])
            rows["row_k"].append(labels[i][1])
            rows["col_n"].append(labels[j][0])
            rows["col_k"].append(labels[j][1])
            rows["re"].append(M.matrix[i, j].real)
            rows["im"].append(M.matrix[i, j].imag)
        report = {
            "S": k.S,
            "diagonal_deviation": float(np.max(np.abs(np.diag(M.matrix) - math.pi))),
            "hermiticity_residual": float(np.max(np.abs(M.matrix - M.matrix.conj().T))),
            "round_trip_residual": back.max_difference(k),
            "cyclic_moment_norm": float(np.linalg.norm(C1.matrix, 2)),
            "cyclic_moment_on_vacuum": float(np.linalg.norm(vac)),
        }
        return rows, report

    def cmd_factorize(self):
        k = self.kernel()
        res = phasediff.factorize(k, tol=_tol(self.cfg, "factorize", 1e-8, self.tol))
        return None, {"S": k.S, **res.to_json()}

    def _scan_args(self):
        c1 = _phase_source(_resolve(_require(self.cfg, "c1"), self.base))
        c2 = _phase_source(_resolve(_require(self.cfg, "c2"), self.base))
        amps = [float(a) for a in _require(self.cfg, "amplitudes")]
        budget = self.cfg.get("cutoff_budget")
        return c1, c2, amps, None if budget is None else int(budget)

    def cmd_classical_limit(self):
        c1, c2, amps, budget = self._scan_args()
        rep = limits.classical_scan(
            c1, c2, _complex(_require(self.cfg, "z1")), float(_require(self.cfg, "arg_z2")),
            amps, float(self.cfg.get("alpha", 0.0)), cells=int(self.cfg.get("cells", 16)),
            fixed_reference=bool(self.cfg.get("fixed_reference", False)),
            cutoff_budget=budget, workers=self.threads,
        )
        report = {**rep.to_json(), "strictly_decreasing": rep.strictly_decreasing}
        return {"amplitude": list(rep.amplitudes), "distance": list(rep.distances)}, report

    def cmd_dirac_limit(self):
        c1, c2, amps, budget = self._scan_args()
        mass = limits.dirac_scan(
            c1, c2, float(_require(self.cfg, "arg_z1")), float(_require(self.cfg, "arg_z2")),
            amps, float(self.cfg.get("alpha", 0.0)), float(self.cfg.get("alpha_prime", 0.0)),
            float(_require(self.cfg, "window")), cutoff_budget=budget, workers=self.threads,
        )
        report = {"amplitudes": amps, "window_mass": mass,
                  "increasing": all(b > a for a, b in zip(mass, mass[1:]))}
        return {"amplitude": amps, "window_mass": mass}, report

    def cmd_ban(self):
        S = int(_require(self.cfg, "S"))
        cutoff = Cutoff.total(S)
        X = IntervalSet.from_json(_require(self.cfg, "X"))
        beta = float(self.cfg.get("beta", math.pi / 4))
        margin = int(self.cfg.get("margin", 2))
        cov = companions.ban_covariance_residual(X, beta, cutoff)
        comm = companions.commutator_checks(phasediff.canonical_kernel(S), cutoff, margin)
        W = companions.factor2_projection_solution(cutoff)
        report = {
            "S": S,
            "covariance": cov.to_json(),
            "commutators": comm.to_json(),
            "factor2_intertwining": companions.intertwining_residual(W, beta, 2, margin),
        }
        if "T" in self.cfg:
            T = np.array([[_complex(x) for x in row] for row in self.cfg["T"]])
            two, one = companions.ban_vacuum_reduction(T, X, cutoff)
            report["vacuum_reduction"] = {"two_mode": two, "single_mode": one}
        return None, report

    def cmd_spectrum(self):
        sectors = self.cfg.get("sectors")
        if sectors is None:
            sectors = range(int(_require(self.cfg, "max_sector")) + 1)
        cols = {"sector": [], "r": [], "phase": []}
        for s in sectors:
            for r, ph in enumerate(companions.phi12_block_eigenphases(int(s))):
                cols["sector"].append(int(s))
                cols["r"].append(r)
                cols["phase"].append(ph)
        report: dict[str, Any] = {"sectors": [int(s) for s in sectors]}
        if "S" in self.cfg:
            S = int(self.cfg["S"])
            cos, sin = companions.sg_operators(S)
            ec, es = hermitian_eigenvalues(cos), hermitian_eigenvalues(sin)
            comm = cos.matrix @ sin.matrix - sin.matrix @ cos.matrix
            report.update({
                "S": S,
                "polar_residual": companions.ll_polar_check(S),
                "cos_range": [float(ec[0]), float(ec[-1])],
                "sin_range": [float(es[0]), float(es[-1])],
                "commutator_norm": float(np.linalg.norm(comm, 2)),
            })
        return cols, report

    def cmd_barnett_pegg(self):
        phi = analysis.FourierFunction.from_json(_resolve(_require(self.cfg, "phi"), self.base))
        psi = analysis.FourierFunction.from_json(_resolve(_require(self.cfg, "psi"), self.base))
        sets = _sets(self.cfg)
        S = len(phi.coefficients) + len(psi.coefficients) - 2
        state = analysis.product_state(phi, psi)
        direct = [analysis.barnett_pegg_prob(phi, psi, X) for X in sets]
        kernel_path = list(phasediff.probabilities(phasediff.canonical_kernel(S), state, sets))
        labels = [json.dumps(X.to_json(), separators=(",", ":")) for X in sets]
        report = {"max_difference": float(np.max(np.abs(np.subtract(direct, kernel_path))))}
        return {"set": labels, "barnett_pegg": direct, "kernel_path": kernel_path}, report

    def cmd_covariance(self):
        k = self.kernel()
        alpha = float(self.cfg.get("alpha", 0.0))
        beta = float(self.cfg.get("beta", math.pi / 4))
        out = [phasediff.covariance_residual(k, alpha, beta, X).to_json() for X in _sets(self.cfg)]
        return None, {"S": k.S, "alpha": alpha, "beta": beta, "residuals": out}


def run(config: dict, out_dir: Path, *, base: Path | None = None, tol: float | None = None,
        threads: int = 1, seed: int = 0) -> int:
    """Execute one config and write its artifacts; returns the exit code."""
    out_dir = Path(out_dir)
    base = Path.cwd() if base is None else Path(base)
    command = config.get("command")
    if command not in COMMANDS:
        print(f"error: unknown command {command!r}", file=sys.stderr)
        return EXIT_CONFIG
    runner = Run(config, base, tol, max(1, threads), seed)
    try:
        table, report = getattr(runner, "cmd_" + command.replace("-", "_"))()
    except (CutoffOverBudget, TailTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValidationFailed, NonHermitianInput, NonUnitNorm, NonUnitVector) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConfigError, CovPhaseError, KeyError, TypeError, ValueError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if table is not None:
            emit_plot_data(out_dir / f"{command}.csv", table)
        write_report(out_dir / "report.json", {"command": command, **report})
    except OSError as exc:  # includes IoError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if command == "validate" and not report["passed"]:
        return EXIT_VALIDATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="covphase", description=__doc__.splitlines()[0])
    p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--tol", type=float, default=None, help="override the main tolerance")
    p.add_argument("--threads", type=int, default=1, help="worker threads")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized constructions")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not isinstance(config, dict):
        print("error: config must be a JSON object", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or Path(config.get("output_path", "out"))
    return run(config, out, base=args.config.parent, tol=args.tol,
               threads=args.threads, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
