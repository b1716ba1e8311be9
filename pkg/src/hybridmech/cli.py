"""Configuration ingestion, experiment orchestration and data emission.

Experiments are described by a JSON document (or a previously emitted run
manifest, which embeds one).  All rates are normalised internally to units
of the emitter decay rate gamma; absolute units ("hz" or "rad_s") are
required when bath occupations are given as temperatures, which are
converted through the Bose law.  Every run writes CSV data files plus a JSON
manifest sufficient to reproduce the data byte for byte.

Exit codes: 0 success, 2 configuration error, 3 runtime failure,
4 validation-suite failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bloch import PhysParams
from .lindblad import (
    QuadratureDecomposition,
    classify_regime,
    eigenpairs,
    twisted_decomposition,
)
from .oracle import (
    coherent_density,
    integrate_master,
    kernel_form_rhs,
    lindblad_rhs,
    make_frozen_schedule,
    superoperator,
)
from .spectrum import NoiseKernels, spectrum_closed_form, spectrum_qrt
from .trajectory import TrajectoryOptions, run_ensemble, semiclassical_run

HBAR = 1.054571817e-34  # J s
KB = 1.380649e-23  # J / K

KINDS = ("semiclassical", "ensemble", "phase-diagram", "spectra", "validate")


class ConfigError(ValueError):
    """Invalid configuration; names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class ValidationFailure(RuntimeError):
    """The validation suite reported at least one failing check."""


def bose_occupation(omega_abs: float, temperature: float) -> float:
    """Thermal occupation (exp(hbar omega / kB T) - 1)^-1."""
    if temperature <= 0:
        return 0.0
    x = HBAR * omega_abs / (KB * temperature)
    return 1.0 / math.expm1(x)


@dataclass
class ExperimentConfig:
    """Validated, gamma-normalised experiment description."""

    kind: str
    params: PhysParams
    beta0: complex
    duration_periods: float
    trajectories: int
    seed: int
    steps_per_window: int
    record_stride: int
    full_bloch: bool
    workers: int
    histogram_bins: int
    histogram_periods: list[float] | None
    sweep: dict
    grid: dict
    out_dir: str = "."
    normalized: dict = field(default_factory=dict)

    def options(self) -> TrajectoryOptions:
        histogram_times = None
        if self.histogram_periods is not None:
            period = self.params.mechanical_period
            histogram_times = [p * period for p in self.histogram_periods]
        return TrajectoryOptions(
            steps_per_window=self.steps_per_window,
            record_stride=self.record_stride,
            full_bloch=self.full_bloch,
            workers=self.workers,
            histogram_bins=self.histogram_bins,
            histogram_times=histogram_times,
        )


_PARAM_FIELDS = ("gamma", "g", "delta0", "Omega", "g_m", "Gamma", "n_q", "n_m")
_RATE_FIELDS = ("gamma", "g", "delta0", "Omega", "g_m", "Gamma")


def _normalize_params(raw: dict, units: str) -> tuple[PhysParams, dict]:
    for required in ("g", "Omega", "g_m"):
        if required not in raw:
            raise ConfigError(f"params.{required}", "missing required field")
    unknown = set(raw) - set(_PARAM_FIELDS) - {"T_m", "T_q", "omega0"}
    if unknown:
        raise ConfigError(f"params.{sorted(unknown)[0]}", "unknown field")

    if units == "gamma":
        to_angular = None
    elif units == "hz":
        to_angular = 2.0 * math.pi
    elif units == "rad_s":
        to_angular = 1.0
    else:
        raise ConfigError("units", f"must be one of gamma/hz/rad_s, got {units!r}")

    gamma_in = float(raw.get("gamma", 1.0))
    if gamma_in <= 0:
        raise ConfigError("params.gamma", "must be positive")

    values = {}
    for name in _RATE_FIELDS:
        values[name] = float(raw.get(name, 1.0 if name == "gamma" else 0.0))

    for occ, temp in (("n_m", "T_m"), ("n_q", "T_q")):
        if occ in raw and temp in raw:
            raise ConfigError(
                f"params.{temp}", f"conflicts with params.{occ}; give exactly one"
            )
    occupations = {"n_m": float(raw.get("n_m", 0.0)), "n_q": float(raw.get("n_q", 0.0))}
    for occ, temp, freq in (("n_m", "T_m", "Omega"), ("n_q", "T_q", "omega0")):
        if temp in raw:
            if to_angular is None:
                raise ConfigError(
                    f"params.{temp}",
                    "temperatures need absolute units (units = hz or rad_s)",
                )
            if freq == "omega0":
                if "omega0" not in raw:
                    raise ConfigError(
                        "params.omega0", "required to convert T_q to an occupation"
                    )
                omega_abs = float(raw["omega0"]) * to_angular
            else:
                omega_abs = values["Omega"] * to_angular
            occupations[occ] = bose_occupation(omega_abs, float(raw[temp]))

    normalized = {name: values[name] / gamma_in for name in _RATE_FIELDS}
    normalized["gamma"] = 1.0
    normalized.update(occupations)
    params = PhysParams(**normalized)
    return params, normalized


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a configuration (or run-manifest) file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("config", f"file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    if isinstance(doc, dict) and doc.get("package") == "hybridmech" and "config" in doc:
        doc = doc["config"]
    if not isinstance(doc, dict):
        raise ConfigError("config", "top-level document must be an object")
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> ExperimentConfig:
    kind = doc.get("kind", "semiclassical")
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {KINDS}, got {kind!r}")
    units = doc.get("units", "gamma")
    raw_params = doc.get("params")
    if not isinstance(raw_params, dict):
        raise ConfigError("params", "missing params object")
    params, normalized_params = _normalize_params(raw_params, units)

    beta0_raw = doc.get("initial", {}).get("beta0", [0.0, 0.0])
    if isinstance(beta0_raw, (int, float)):
        beta0 = complex(float(beta0_raw), 0.0)
    elif isinstance(beta0_raw, (list, tuple)) and len(beta0_raw) == 2:
        beta0 = complex(float(beta0_raw[0]), float(beta0_raw[1]))
    else:
        raise ConfigError("initial.beta0", "expected a number or [re, im] pair")

    engine = doc.get("engine", {})
    duration = float(doc.get("duration_periods", 10.0))
    if duration <= 0:
        raise ConfigError("duration_periods", "must be positive")
    trajectories = int(doc.get("trajectories", 100))
    if trajectories < 1:
        raise ConfigError("trajectories", "must be at least 1")
    seed = int(doc.get("seed", 0))
    histogram_periods = engine.get("histogram_periods")
    if histogram_periods is not None:
        histogram_periods = [float(p) for p in histogram_periods]

    config = ExperimentConfig(
        kind=kind,
        params=params,
        beta0=beta0,
        duration_periods=duration,
        trajectories=trajectories,
        seed=seed,
        steps_per_window=int(engine.get("steps_per_window", 256)),
        record_stride=int(engine.get("record_stride", 4)),
        full_bloch=bool(engine.get("full_bloch", False)),
        workers=int(engine.get("workers", 1)),
        histogram_bins=int(engine.get("histogram_bins", 41)),
        histogram_periods=histogram_periods,
        sweep=dict(doc.get("sweep", {})),
        grid=dict(doc.get("grid", {})),
        out_dir=str(doc.get("output", {}).get("dir", ".")),
    )
    config.normalized = {
        "kind": kind,
        "units": "gamma",
        "params": normalized_params,
        "initial": {"beta0": [beta0.real, beta0.imag]},
        "duration_periods": duration,
        "trajectories": trajectories,
        "seed": seed,
        "engine": {
            "steps_per_window": config.steps_per_window,
            "record_stride": config.record_stride,
            "full_bloch": config.full_bloch,
            "workers": config.workers,
            "histogram_bins": config.histogram_bins,
            "histogram_periods": histogram_periods,
        },
        "sweep": config.sweep,
        "grid": config.grid,
        "output": {"dir": config.out_dir},
    }
    return config


# ---------------------------------------------------------------------------
# CSV emission.

def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# Experiment kinds.

def _run_semiclassical(config: ExperimentConfig, out: Path) -> list[str]:
    duration = config.duration_periods * config.params.mechanical_period
    record = semiclassical_run(config.params, config.beta0, duration, config.options())
    write_csv(
        out / "semiclassical.csv",
        ["t", "re_beta", "im_beta", "pe", "delta_m"],
        zip(record.times, record.beta.real, record.beta.imag, record.pe, record.delta_m),
    )
    return ["semiclassical.csv"]


def _run_ensemble(config: ExperimentConfig, out: Path) -> list[str]:
    duration = config.duration_periods * config.params.mechanical_period
    result = run_ensemble(
        config.params,
        config.beta0,
        duration,
        config.trajectories,
        config.seed,
        config.options(),
    )
    write_csv(
        out / "ensemble.csv",
        [
            "t",
            "mean_re_beta",
            "mean_im_beta",
            "var_dbeta_x",
            "var_dbeta_p",
            "lambda_plus",
            "lambda_minus",
            "theta",
            "pe_mean",
        ],
        zip(
            result.times,
            result.mean_beta.real,
            result.mean_beta.imag,
            result.var_dbeta_x,
            result.var_dbeta_p,
            result.mean_lambda_plus,
            result.mean_lambda_minus,
            result.mean_theta,
            result.mean_pe,
        ),
    )
    files = ["ensemble.csv"]
    for i, (t, edges, counts) in enumerate(result.histograms):
        name = f"histogram_{i:03d}.csv"
        write_csv(
            out / name,
            ["bin_lo", "bin_hi", "count"],
            zip(edges[:-1], edges[1:], counts),
        )
        files.append(name)
    return files


def _run_spectra(config: ExperimentConfig, out: Path) -> list[str]:
    sweep = config.sweep
    lo = float(sweep.get("delta_min", -20.0))
    hi = float(sweep.get("delta_max", 20.0))
    points = int(sweep.get("points", 201))
    if points < 2 or hi <= lo:
        raise ConfigError("sweep", "need delta_min < delta_max and points >= 2")
    deltas = np.linspace(lo, hi, points)
    values = spectrum_closed_form(config.params, deltas)
    write_csv(out / "spectra.csv", ["delta", "re_s0"], zip(deltas, values))
    return ["spectra.csv"]


def _run_phase_diagram(config: ExperimentConfig, out: Path) -> list[str]:
    grid = config.grid
    n_lo = float(grid.get("n_m_min", 1e-2))
    n_hi = float(grid.get("n_m_max", 1e4))
    r_lo = float(grid.get("ratio_min", 1e-3))
    r_hi = float(grid.get("ratio_max", 1e3))
    points = int(grid.get("points", 50))
    if points < 2 or n_lo <= 0 or r_lo <= 0:
        raise ConfigError("grid", "log grid needs positive bounds and points >= 2")
    n_ms = np.logspace(math.log10(n_lo), math.log10(n_hi), points)
    ratios = np.logspace(math.log10(r_lo), math.log10(r_hi), points)
    base = config.params
    tls_rate = base.tls_noise_rate
    rows = []
    for n_m in n_ms:
        for ratio in ratios:
            params = PhysParams(
                gamma=base.gamma,
                g=base.g,
                Omega=base.Omega,
                g_m=base.g_m,
                delta0=base.delta0,
                n_q=base.n_q,
                Gamma=ratio * tls_rate,
                n_m=float(n_m),
            )
            label = classify_regime(params).regime.value
            rows.append((float(n_m), float(ratio), label))
    write_csv(out / "phase_diagram.csv", ["n_m", "gamma_ratio", "label"], rows)
    return ["phase_diagram.csv"]


def _run_validate(config: ExperimentConfig, out: Path) -> list[str]:
    """Fast cross-validation suite: closed forms, eigenpairs, unraveling."""
    checks = []

    def check(name, passed, detail):
        checks.append({"name": name, "passed": bool(passed), "detail": detail})

    # Closed-form spectrum against the regression-theorem linear solve.
    worst = 0.0
    base = config.params
    for g in (0.1, 0.5, 1.0, 2.0, 10.0):
        for delta in (0.0, 0.25, 0.5, 1.0, 2.0, 5.0):
            p = PhysParams(gamma=1.0, g=g, Omega=base.Omega, g_m=base.g_m)
            cf = spectrum_closed_form(p, delta)
            qrt = spectrum_qrt(p, delta, 0.0).real
            worst = max(worst, abs(qrt - cf) / cf)
    check("spectrum_closed_form_vs_qrt", worst <= 1e-10, f"max rel diff {worst:.3e}")

    # Closed-form eigenpairs against a generic Hermitian eigensolver.
    rng = np.random.default_rng(config.seed + 1)
    worst_eig = 0.0
    min_lam = math.inf
    for _ in range(1000):
        s0 = 10.0 ** rng.uniform(-3, 3)
        s2 = s0 * rng.uniform(0, 1) * np.exp(2j * math.pi * rng.uniform())
        Gamma = 10.0 ** rng.uniform(-3, 3)
        n_m = 10.0 ** rng.uniform(-2, 3)
        h11 = Gamma * (n_m + 1) + s0
        h22 = Gamma * n_m + s0
        lam_p, lam_m, *_ = eigenpairs(Gamma, h11, h22, s2)
        ref = np.linalg.eigvalsh(np.array([[h11, s2], [np.conj(s2), h22]]))
        scale = max(h11, 1.0)
        worst_eig = max(
            worst_eig, abs(lam_p - ref[1]) / scale, abs(lam_m - ref[0]) / scale
        )
        min_lam = min(min_lam, lam_m)
    check(
        "eigenpairs_vs_eigh",
        worst_eig <= 1e-12 and min_lam >= 0.0,
        f"max scaled diff {worst_eig:.3e}, min lambda_minus {min_lam:.3e}",
    )

    # Generator equivalence of the two Lindblad forms on a small truncation.
    worst_gen = 0.0
    p10 = PhysParams(gamma=1.0, g=1.0, Omega=0.01, g_m=0.01)
    for _ in range(20):
        s0 = 10.0 ** rng.uniform(-2, 1)
        s2 = s0 * rng.uniform(0, 1) * np.exp(2j * math.pi * rng.uniform())
        Gamma = 10.0 ** rng.uniform(-2, 1)
        n_m = 10.0 ** rng.uniform(-1, 1)
        kernels = NoiseKernels(s0=s0, s2=s2)
        lam_p, lam_m, v_p, v_m, theta = eigenpairs(
            Gamma, Gamma * (n_m + 1) + s0, Gamma * n_m + s0, s2
        )
        decomp = QuadratureDecomposition(
            float(lam_p), float(lam_m), np.asarray(v_p), np.asarray(v_m), float(theta)
        )
        a = superoperator(lambda x: lindblad_rhs(x, 0.3, decomp, p10), 10)
        b = superoperator(
            lambda x: kernel_form_rhs(x, 0.3, Gamma, n_m, kernels, p10), 10
        )
        worst_gen = max(worst_gen, float(np.max(np.abs(a - b))))
    check("generator_equivalence_dim10", worst_gen <= 1e-10, f"max diff {worst_gen:.3e}")

    # Gaussian-moment ensemble against the master-equation oracle.
    p = PhysParams(gamma=1.0, g=1.0, Omega=0.05, g_m=0.001)
    decomp = twisted_decomposition(2e-3, 2e-4, 0.0)
    schedule = make_frozen_schedule(decomp, 0.0, 2)
    duration = 2 * p.mechanical_period
    opts = TrajectoryOptions(
        steps_per_window=256, record_stride=64, schedule=schedule, workers=1
    )
    ens = run_ensemble(p, 1.0 + 0.0j, duration, 300, config.seed, opts)
    master = integrate_master(
        p,
        coherent_density(24, 1.0 + 0.0j),
        duration,
        p.mechanical_period / 256,
        schedule,
        record_stride=64,
    )
    diff_n = np.abs(ens.mean_n - master.moments.n)
    bound = 4.0 * ens.se_n + 1e-9
    check(
        "gaussian_vs_master_moments",
        bool(np.all(diff_n <= bound)),
        f"max |diff|/bound {float(np.max(diff_n / bound)):.3f}",
    )

    payload = {"checks": checks, "passed": all(c["passed"] for c in checks)}
    (out / "validation.json").write_text(json.dumps(payload, indent=2) + "\n")
    if not payload["passed"]:
        raise ValidationFailure(
            "; ".join(c["name"] for c in checks if not c["passed"])
        )
    return ["validation.json"]


_RUNNERS = {
    "semiclassical": _run_semiclassical,
    "ensemble": _run_ensemble,
    "spectra": _run_spectra,
    "phase-diagram": _run_phase_diagram,
    "validate": _run_validate,
}


def run_experiment(config: ExperimentConfig, out_dir: str | Path) -> list[str]:
    """Dispatch an experiment and write its data files plus a manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.monotonic()
    files = _RUNNERS[config.kind](config, out)
    manifest = {
        "package": "hybridmech",
        "version": __version__,
        "kind": config.kind,
        "seed": config.seed,
        "config": config.normalized,
        "outputs": files,
        "wall_time_s": time.monotonic() - started,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return files + ["manifest.json"]


def _error_json(code: int, kind: str, message: str) -> str:
    return json.dumps({"error": {"code": code, "kind": kind, "message": message}})


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hybridmech",
        description="Hybrid emitter-oscillator noise simulator",
    )
    parser.add_argument("--config", required=True, help="JSON config or run manifest")
    parser.add_argument(
        "--out", default=None, help="output directory (overrides config output.dir)"
    )
    parser.add_argument("--seed", type=int, default=None, help="override master seed")
    parser.add_argument(
        "--trajectories", type=int, default=None, help="override trajectory count"
    )
    parser.add_argument("--kind", default=None, choices=KINDS, help="override kind")
    parser.add_argument(
        "--workers", type=int, default=None, help="override worker (chunk) count"
    )
    parser.add_argument(
        "--full-bloch",
        action="store_true",
        help="integrate the full Bloch equations instead of the adiabatic shortcut",
    )
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
            config.normalized["seed"] = args.seed
        if args.trajectories is not None:
            config.trajectories = args.trajectories
            config.normalized["trajectories"] = args.trajectories
        if args.kind is not None:
            config.kind = args.kind
            config.normalized["kind"] = args.kind
        if args.workers is not None:
            config.workers = args.workers
            config.normalized["engine"]["workers"] = args.workers
        if args.full_bloch:
            config.full_bloch = True
            config.normalized["engine"]["full_bloch"] = True
    except ConfigError as exc:
        print(_error_json(2, "config", str(exc)), file=sys.stderr)
        return 2

    try:
        run_experiment(config, args.out if args.out is not None else config.out_dir)
    except ConfigError as exc:
        print(_error_json(2, "config", str(exc)), file=sys.stderr)
        return 2
    except ValidationFailure as exc:
        print(_error_json(4, "validation", str(exc)), file=sys.stderr)
        return 4
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(_error_json(3, "runtime", str(exc)), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
