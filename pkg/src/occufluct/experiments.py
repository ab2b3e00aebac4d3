"""Config-driven experiment orchestration.

Each experiment kind parses a strict JSON document (unknown keys are
rejected), dispatches to the owning module, and writes CSV artifacts plus
a run manifest into its output directory.  Identical (config, seed) give
byte-identical CSVs regardless of worker count; the manifest carries wall
times and is excluded from that contract.
"""
from __future__ import annotations

import hashlib
import json
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .branching import (FarmConfig, InitialFieldSpec, MeasureForm,
                        default_truncation_radius, mean_occupation, run_farm)
from .fluctuations import (center_scale_array, estimate_selfsim_index,
                           estimate_stability_index, extinction_fraction, mad)
from .loglaplace import (SpaceTimeGrid, lattice_observable, laplace_functional,
                         make_grid, solve_ergodic_v, solve_particle_v,
                         solve_superprocess_u)
from .observables import BallIndicator, GaussianBump, Observable
from .regimes import (ModelParams, RegimeCase, classify_regime,
                      extinction_classification, norming_factor)
from .rng import stream

KINDS = ("classify", "simulate", "limit-sample", "validate-laplace",
         "extinction-scan", "selfsim-scan", "lrd-scan", "ergodic")


class ConfigError(ValueError):
    pass


class PartialFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_COMMON_KEYS = {"kind", "params", "seed", "out"}
_KIND_KEYS = {
    "classify": {"sweep"},
    "simulate": {"T", "t_max", "n_steps", "replicates", "truncation_radius",
                 "measure_form", "observables", "h_t", "workers",
                 "explosion_cap", "store_series"},
    "limit-sample": {"process", "times", "n_paths", "n_r", "n_x"},
    "validate-laplace": {"T_phys", "observable", "lattice", "replicates",
                         "n_steps", "truncation_radius", "h_t", "workers",
                         "superprocess"},
    "extinction-scan": {"horizons", "replicates", "observable", "n_steps",
                        "truncation_radius", "h_t", "workers"},
    "selfsim-scan": {"T_grid", "replicates", "h_exponent", "h_log_exponent",
                     "n_steps", "observable", "workers", "truncation_radius",
                     "conditional_centering"},
    "lrd-scan": {"T_grid", "z1", "z2", "increments"},
    "ergodic": {"thetas", "t_ks", "tau", "lattice"},
}


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    params: ModelParams
    seed: int
    out: str
    extra: dict = field(default_factory=dict)

    def canonical(self) -> str:
        payload = {
            "kind": self.kind, "seed": self.seed,
            "params": {"d": self.params.d, "alpha": self.params.alpha,
                       "beta": self.params.beta, "gamma": self.params.gamma,
                       "v_rate": self.params.v_rate},
            **{k: self.extra[k] for k in sorted(self.extra)},
        }
        return json.dumps(payload, sort_keys=True)

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def parse_config(path) -> ExperimentSpec:
    """Load, validate, and regime-preflight an experiment document."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {p}: {e}") from e
    return parse_config_dict(doc)


def parse_config_dict(doc: dict) -> ExperimentSpec:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    allowed = _COMMON_KEYS | _KIND_KEYS[kind]
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys for kind {kind!r}: {sorted(unknown)}")
    raw = doc.get("params")
    if not isinstance(raw, dict):
        raise ConfigError("params object is required")
    bad = set(raw) - {"d", "alpha", "beta", "gamma", "v_rate"}
    if bad:
        raise ConfigError(f"unknown params keys: {sorted(bad)}")
    try:
        params = ModelParams(**raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e
    extra = {k: v for k, v in doc.items() if k not in _COMMON_KEYS}
    spec = ExperimentSpec(kind, params, int(doc.get("seed", 1)),
                          str(doc.get("out", "out")), extra)
    _preflight(spec)
    return spec


def _preflight(spec: ExperimentSpec):
    report = classify_regime(spec.params)
    if spec.kind == "limit-sample":
        proc = spec.extra.get("process", "xi")
        if proc == "xi" and report.case_id is not RegimeCase.LOWDIM_GAMMA_LT_D:
            raise ConfigError(
                f"xi sampling requires the low-dimension gamma < d case; "
                f"these parameters classify as {report.case_id.value}")
        p = spec.params
        if proc == "zeta" and p.d >= p.alpha * (2 + p.beta) / (1 + p.beta):
            raise ConfigError("zeta requires d < alpha(2+beta)/(1+beta)")
        if proc == "eta" and report.case_id is not RegimeCase.CRIT_A:
            raise ConfigError("eta is the critical-A limit; parameters "
                              f"classify as {report.case_id.value}")
    if spec.kind == "lrd-scan":
        if report.case_id is not RegimeCase.LOWDIM_GAMMA_LT_D:
            raise ConfigError("lrd-scan needs the low-dimension gamma < d case")
    if spec.kind in ("simulate", "validate-laplace", "extinction-scan",
                     "selfsim-scan") and not spec.params.simulateable:
        raise ConfigError(f"d = {spec.params.d} is not simulateable")
    if spec.kind == "ergodic":
        p = spec.params
        if not (p.gamma < p.alpha):
            raise ConfigError("ergodic case requires gamma < alpha")


def _observable_from(doc: dict, d: int) -> Observable:
    kind = doc.get("type", "ball")
    center = tuple(doc.get("center", [0.0] * d))
    if kind == "ball":
        return BallIndicator(center, float(doc.get("radius", 1.0)),
                             doc.get("id", "ball"))
    if kind == "bump":
        return GaussianBump(center, float(doc.get("width", 1.0)),
                            doc.get("id", "bump"))
    raise ConfigError(f"unknown observable type {kind!r}")


# ---------------------------------------------------------------------------
# Manifest and CSV plumbing
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    spec_sha256: str
    version: str
    seed: int
    stages: dict = field(default_factory=dict)
    excluded_replicates: int = 0
    truncation: dict = field(default_factory=dict)
    environment: dict = field(default_factory=dict)

    def write(self, out_dir: Path):
        payload = self.__dict__.copy()
        tmp = out_dir / ".manifest.tmp"
        tmp.write_text(json.dumps(payload, indent=2, sort_keys=True))
        tmp.replace(out_dir / "manifest.json")


def _env_capture() -> dict:
    return {"python": platform.python_version(),
            "numpy": np.__version__,
            "platform": platform.platform()}


def write_csv(path: Path, header: list, rows, spec_hash: str):
    with open(path, "w") as f:
        f.write(f"# manifest: spec_sha256={spec_hash}\n")
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


# ---------------------------------------------------------------------------
# Kind runners
# ---------------------------------------------------------------------------

def _run_classify(spec: ExperimentSpec, out: Path) -> dict:
    sweep = spec.extra.get("sweep")
    base = spec.params
    report = classify_regime(base)
    ext = extinction_classification(base)
    single = {
        "case_id": report.case_id.value,
        "d_crit": report.d_crit,
        "d_crit_finite_measure": report.d_crit_finite_measure,
        "f_t_exponents": {"t_power": report.f_t_exponents.t_power,
                          "log_power": report.f_t_exponents.log_power,
                          "h_power": report.f_t_exponents.h_power},
        "hd_required": report.hd_required,
        "density_condition": report.density_condition.text,
        "limit_process": report.limit_process_id.value,
        "selfsim_index": report.selfsim_index,
        "dependence_exponent": report.dependence_exponent,
        "extinction_kind": ext.kind.value,
        "extinction_threshold": ext.threshold,
        "notes": list(report.notes),
    }
    (out / "report.json").write_text(json.dumps(single, indent=2))
    if sweep:
        ds = sweep.get("d", [base.d])
        gammas = sweep.get("gamma", [base.gamma])
        alphas = sweep.get("alpha", [base.alpha])
        betas = sweep.get("beta", [base.beta])
        rows = []
        for d in ds:
            for a in alphas:
                for b in betas:
                    for g in gammas:
                        p = ModelParams(d, a, b, g, base.v_rate)
                        r = classify_regime(p)
                        e = extinction_classification(p)
                        rows.append([
                            d, a, b, g, r.case_id.value, r.d_crit,
                            r.f_t_exponents.t_power, r.f_t_exponents.log_power,
                            int(r.hd_required), e.kind.value,
                            "" if r.selfsim_index is None else r.selfsim_index,
                            "" if r.dependence_exponent is None
                            else r.dependence_exponent,
                        ])
        write_csv(out / "sweep.csv",
                  ["d", "alpha", "beta", "gamma", "case_id", "d_crit", "a",
                   "b", "hd_required", "extinction_kind", "selfsim_index",
                   "dep_exponent"], rows, spec.sha256())
        single["sweep_rows"] = len(rows)
    return single


def _field_spec(spec: ExperimentSpec, horizon: float,
                obs_radius: float) -> InitialFieldSpec:
    R = spec.extra.get("truncation_radius")
    if R is None:
        R = default_truncation_radius(spec.params, horizon, obs_radius)
    form = MeasureForm(spec.extra.get("measure_form", "Smoothed"))
    return InitialFieldSpec(spec.params, float(spec.extra.get("h_t", 1.0)),
                            float(R), form)


def _run_simulate(spec: ExperimentSpec, out: Path) -> dict:
    T = float(spec.extra["T"])
    t_max = float(spec.extra.get("t_max", 1.0))
    horizon = T * t_max
    n_steps = int(spec.extra.get("n_steps", 2048))
    reps = int(spec.extra.get("replicates", 100))
    d = int(spec.params.d)
    obs = tuple(_observable_from(o, d)
                for o in spec.extra.get("observables",
                                        [{"type": "ball", "radius": 1.0}]))
    fs = _field_spec(spec, horizon, max(o.support_radius for o in obs))
    cfg = FarmConfig(fs, obs, horizon, n_steps, reps, spec.seed,
                     checkpoints=tuple(np.linspace(1 / 8, 1.0, 8)),
                     store_series=bool(spec.extra.get("store_series", True)),
                     explosion_cap=int(spec.extra.get("explosion_cap", 10 ** 7)))
    res = run_farm(cfg, workers=spec.extra.get("workers"))
    rows = []
    if res.series is not None:
        grid = np.linspace(0.0, horizon, n_steps + 1)
        # occupation column: cumulative trapezoid per series
        dt = horizon / n_steps
        for rep in range(reps):
            for i, ob in enumerate(obs):
                vals = res.series[rep, :, i]
                occ = np.concatenate([[0.0], np.cumsum(
                    0.5 * dt * (vals[1:] + vals[:-1]))])
                for j in range(0, n_steps + 1):
                    rows.append([rep, ob.observable_id, j, grid[j],
                                 vals[j], occ[j]])
    write_csv(out / "series.csv",
              ["replicate", "observable_id", "t_index", "t", "value",
               "occupation"], rows, spec.sha256())
    return {"replicates": reps, "excluded": res.n_excluded,
            "truncation_radius": fs.truncation_radius}


def _run_validate_laplace(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.params
    T_phys = float(spec.extra.get("T_phys", 2.0))
    obs = _observable_from(spec.extra.get("observable",
                                          {"type": "bump", "width": 1.0}), 1)
    lat = spec.extra.get("lattice", {})
    length = float(lat.get("length", 40.0))
    n_x = int(lat.get("n_x", 2048))
    n_t = int(lat.get("n_t", 512))
    reps = int(spec.extra.get("replicates", 20000))
    n_steps = int(spec.extra.get("n_steps", 1024))
    superprocess = bool(spec.extra.get("superprocess", False))
    if superprocess:
        raise ConfigError("validate-laplace compares the particle system; "
                          "the superprocess has no direct simulation here")
    fs = _field_spec(spec, T_phys, obs.support_radius)

    grid = make_grid(p, length, n_x, T_phys, n_t)
    phi = lattice_observable(obs, grid)
    t0 = time.time()
    sol = solve_particle_v(grid, phi)
    solver_value = laplace_functional(fs, sol)
    t_solve = time.time() - t0
    # truncation sensitivity: double the lattice length
    wide = make_grid(p, 2 * length, 2 * n_x, T_phys, n_t)
    sol_w = solve_particle_v(wide, lattice_observable(obs, wide))
    sens = abs(laplace_functional(fs, sol_w) - solver_value)

    t0 = time.time()
    cfg = FarmConfig(fs, (obs,), T_phys, n_steps, reps, spec.seed,
                     checkpoints=(1.0,), store_series=False)
    res = run_farm(cfg, workers=spec.extra.get("workers"))
    keep = ~res.exploded
    vals = np.exp(-res.occupation[keep, -1, 0])
    mc_mean = float(np.mean(vals))
    mc_se = float(np.std(vals) / np.sqrt(vals.size))
    t_mc = time.time() - t0
    z = (mc_mean - solver_value) / mc_se if mc_se > 0 else np.inf
    write_csv(out / "laplace.csv",
              ["mc_mean", "mc_se", "solver_value", "z_score"],
              [[mc_mean, mc_se, solver_value, z]], spec.sha256())
    return {"mc_mean": mc_mean, "mc_se": mc_se, "solver_value": solver_value,
            "z_score": z, "solver_seconds": t_solve, "mc_seconds": t_mc,
            "truncation_sensitivity": sens, "excluded": res.n_excluded}


def _run_extinction_scan(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.params
    horizons = [float(h) for h in spec.extra["horizons"]]
    reps = int(spec.extra.get("replicates", 500))
    n_steps = int(spec.extra.get("n_steps", 1024))
    d = int(p.d)
    obs = _observable_from(spec.extra.get("observable",
                                          {"type": "ball", "radius": 1.0}), d)
    rows, excluded = [], 0
    for h in horizons:
        fs = _field_spec(spec, h, obs.support_radius)
        cfg = FarmConfig(fs, (obs,), h, n_steps, reps,
                         stream_seed(spec.seed, h), checkpoints=(1.0,))
        res = run_farm(cfg, workers=spec.extra.get("workers"))
        keep = ~res.exploded
        frac = extinction_fraction(res.extinction_time[keep, 0], h)
        mean_occ = float(np.mean(res.occupation[keep, -1, 0]))
        rows.append([h, frac, mean_occ])
        excluded += res.n_excluded
    write_csv(out / "extinction.csv",
              ["horizon", "extinct_fraction", "mean_ball_occupation"],
              rows, spec.sha256())
    return {"rows": rows, "excluded": excluded}


def stream_seed(seed: int, value: float) -> int:
    return (seed * 1000003 + int(round(value * 16))) % (2 ** 31)


def _run_selfsim_scan(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.params
    T_grid = [float(t) for t in spec.extra["T_grid"]]
    reps = int(spec.extra.get("replicates", 2000))
    n_steps = int(spec.extra.get("n_steps", 512))
    h_exp = float(spec.extra.get("h_exponent", 0.0))
    d = int(p.d)
    obs = _observable_from(spec.extra.get("observable",
                                          {"type": "ball", "radius": 1.0}), d)
    cond = bool(spec.extra.get("conditional_centering", True))
    samples, rows, excluded = {}, [], 0
    for T in T_grid:
        h_t = max(T ** h_exp, 1.0)
        R = spec.extra.get("truncation_radius")
        R = (2.85 * T ** (1.0 / p.alpha) + obs.support_radius
             if R is None else float(R))
        fs = InitialFieldSpec(p, h_t, R, MeasureForm.SMOOTHED)
        cfg = FarmConfig(fs, (obs,), T, n_steps, reps,
                         stream_seed(spec.seed, T), checkpoints=(1.0,),
                         conditional_centering=cond)
        res = run_farm(cfg, workers=spec.extra.get("workers"))
        keep = ~res.exploded
        x = res.occupation[keep, -1, 0]
        if cond:
            x = x - res.cond_mean[keep, -1, 0]
        else:
            x = x - mean_occupation(fs, obs, T, 1.0)
        samples[T] = x
        rows.append([T, mad(x), float(np.std(x) / np.sqrt(x.size))])
        excluded += res.n_excluded
    fit = estimate_selfsim_index(samples)
    report = classify_regime(p)
    write_csv(out / "selfsim.csv", ["T", "statistic", "se"], rows,
              spec.sha256())
    return {"slope": fit.slope, "slope_se": fit.slope_se,
            "predicted": report.selfsim_index, "excluded": excluded,
            "flagged": fit.flagged}


def _run_lrd_scan(spec: ExperimentSpec, out: Path) -> dict:
    from .limits.dependence import fit_dependence_exponent
    T_grid = spec.extra.get("T_grid")
    inc = spec.extra.get("increments", [0.0, 1.0, 2.0, 3.0])
    fit = fit_dependence_exponent(
        spec.params,
        T_grid=None if T_grid is None else np.asarray(T_grid, dtype=float),
        z1=float(spec.extra.get("z1", 1.0)),
        z2=float(spec.extra.get("z2", 1.0)),
        u=inc[0], v=inc[1], s=inc[2], t=inc[3])
    write_csv(out / "lrd.csv", ["T", "D_T"],
              [[T, D] for T, D in zip(fit.T_grid, fit.D_values)],
              spec.sha256())
    return {"kappa_hat": fit.kappa_hat, "kappa_ols": fit.kappa_ols,
            "kappa_predicted": fit.kappa_predicted, "regime": fit.regime}


def _run_limit_sample(spec: ExperimentSpec, out: Path) -> dict:
    from .limits.sampling import (sample_eta_increments, sample_vartheta,
                                  sample_xi_path, sample_zeta_path)
    proc = spec.extra.get("process", "xi")
    times = [float(t) for t in spec.extra.get("times", [0.25, 0.5, 0.75, 1.0])]
    n_paths = int(spec.extra.get("n_paths", 1000))
    rng = stream(spec.seed, 0x11)
    kw = {}
    if "n_r" in spec.extra:
        kw["n_r"] = int(spec.extra["n_r"])
    if "n_x" in spec.extra:
        kw["n_x"] = int(spec.extra["n_x"])
    if proc == "xi":
        path = sample_xi_path(spec.params, times, rng, n_paths, **kw)
    elif proc == "zeta":
        path = sample_zeta_path(spec.params, times, rng, n_paths, **kw)
    elif proc == "eta":
        path = sample_eta_increments(spec.params, times, rng, n_paths)
    elif proc == "vartheta":
        path = sample_vartheta(spec.params, rng, n_paths, times)
    else:
        raise ConfigError(f"unknown process {proc!r}")
    rows = []
    for pid in range(path.values.shape[0]):
        for t, v in zip(path.times, path.values[pid]):
            rows.append([t, pid, v])
    write_csv(out / "paths.csv", ["t", "path_id", "value"], rows,
              spec.sha256())
    return {"process": proc, "n_paths": n_paths, "n_times": len(path.times)}


def _run_ergodic(spec: ExperimentSpec, out: Path) -> dict:
    p = spec.params
    lat = spec.extra.get("lattice", {})
    grid = SpaceTimeGrid(float(lat.get("length", 30.0)),
                         int(lat.get("n_x", 2048)),
                         float(spec.extra.get("tau", 1.0)),
                         int(lat.get("n_t", 512)), p.alpha, p.v_rate, p.beta)
    thetas = [float(v) for v in spec.extra.get("thetas", [1.0])]
    t_ks = [float(v) for v in spec.extra.get("t_ks", [1.0])]
    tau = float(spec.extra.get("tau", 1.0))
    sol, transform = solve_ergodic_v(grid, thetas, t_ks, tau, p.gamma, p.beta)
    write_csv(out / "ergodic.csv",
              ["tau", "laplace_transform", "picard_iterations", "residual"],
              [[tau, transform, sol.picard_iterations, sol.final_residual]],
              spec.sha256())
    return {"laplace_transform": transform,
            "picard_iterations": sol.picard_iterations}


_RUNNERS = {
    "classify": _run_classify,
    "simulate": _run_simulate,
    "validate-laplace": _run_validate_laplace,
    "extinction-scan": _run_extinction_scan,
    "selfsim-scan": _run_selfsim_scan,
    "lrd-scan": _run_lrd_scan,
    "limit-sample": _run_limit_sample,
    "ergodic": _run_ergodic,
}


def run_experiment(spec: ExperimentSpec, out_dir=None,
                   workers: Optional[int] = None) -> dict:
    out = Path(out_dir if out_dir is not None else spec.out)
    out.mkdir(parents=True, exist_ok=True)
    if workers is not None and spec.kind in ("simulate", "validate-laplace",
                                             "extinction-scan", "selfsim-scan"):
        spec.extra.setdefault("workers", workers)
    manifest = RunManifest(spec.sha256(), __version__, spec.seed,
                           environment=_env_capture())
    t0 = time.time()
    summary = _RUNNERS[spec.kind](spec, out)
    manifest.stages[spec.kind] = time.time() - t0
    manifest.excluded_replicates = int(summary.get("excluded", 0))
    if "truncation_sensitivity" in summary:
        manifest.truncation = {
            "sensitivity": summary["truncation_sensitivity"]}
    if "truncation_radius" in summary:
        manifest.truncation["radius"] = summary["truncation_radius"]
    manifest.write(out)
    return summary
