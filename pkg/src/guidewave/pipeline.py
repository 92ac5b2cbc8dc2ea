"""Experiment runner: builds module objects from a config and emits artifacts.

Every output file embeds the artifact version and the config hash; writes are
atomic (temp file + rename).  Scans parallelize across probe points with a
thread pool capped by GUIDEWAVE_THREADS; each point draws from its own
index-seeded generator, so results do not depend on scheduling.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import (ExperimentConfig, canonical_json, config_hash, parse_scan_z)
from .discretize import DampingProfile, Grid1D
from .errors import ConfigError
from .evolve import (KLEIN_GORDON, WAVE_DIRICHLET, WAVE_EUCLIDEAN, WAVE_NEUMANN,
                     assemble_initial_state, gaussian_envelope,
                     powerlaw_envelope, run, smooth_initial_data)
from .fit import compare_models, fit_exponential, fit_power, predict_exponent
from .heat import HeatSolution, compare, p0_heat_data
from .resolvent import (EnergyNormResolvent, norm_scan, pure_laplacian_control,
                        semiclassical_scan, spectral_gap_probe, theta_probe)
from .transverse import DIRICHLET, NEUMANN, TransverseBasis


def max_threads() -> int:
    env = os.environ.get("GUIDEWAVE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"GUIDEWAVE_THREADS must be an integer, got {env!r}") from exc
    return min(4, os.cpu_count() or 1)


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_csv(columns: dict, header_comments: list[str]) -> str:
    names = list(columns)
    n = len(columns[names[0]])
    lines = [f"# {c}" for c in header_comments]
    lines.append(",".join(names))
    for i in range(n):
        lines.append(",".join("%.17g" % float(columns[name][i]) for name in names))
    return "\n".join(lines) + "\n"


def read_csv(path: str) -> dict[str, np.ndarray]:
    names = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if names is None:
                names = line.split(",")
                continue
            parts = line.split(",")
            if len(parts) != len(names):
                raise ConfigError(f"{path}: malformed CSV row {line!r}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ConfigError(f"{path}: malformed CSV value in {line!r}") from exc
    if names is None or not rows:
        raise ConfigError(f"{path}: empty CSV")
    data = np.array(rows)
    return {name: data[:, j] for j, name in enumerate(names)}


def _header(cfg: ExperimentConfig) -> list[str]:
    return [f"guidewave {__version__}", f"config {config_hash(cfg)}",
            f"experiment {cfg.experiment_id}"]


def _json_report(cfg: ExperimentConfig, payload: dict) -> str:
    body = {"artifact_version": __version__, "config_hash": config_hash(cfg),
            "experiment_id": cfg.experiment_id}
    body.update(payload)
    return json.dumps(body, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


# ---------------------------------------------------------------------------
# config -> module objects


def build_grid(cfg: ExperimentConfig) -> Grid1D:
    return Grid1D(X=cfg.grid.X, N=cfg.grid.N)


def build_damping(cfg: ExperimentConfig, grid: Grid1D) -> DampingProfile:
    d = cfg.damping
    return DampingProfile.build(grid, kind=d.kind, rho=d.rho, r=d.r, c0=d.c0, level=d.level)


def build_basis(cfg: ExperimentConfig):
    """Transverse basis, mode eigenvalues and the mode-0 normalization factor."""
    if cfg.flavor == WAVE_NEUMANN:
        basis = TransverseBasis.build(NEUMANN, L=cfg.domain.L, K=cfg.domain.K)
        return basis, basis.lambdas, math.sqrt(cfg.domain.L)
    if cfg.flavor == WAVE_DIRICHLET:
        basis = TransverseBasis.build(DIRICHLET, L=cfg.domain.L, K=cfg.domain.K)
        return basis, basis.lambdas, math.sqrt(cfg.domain.L)
    return None, np.array([0.0]), 1.0


def build_envelope(cfg: ExperimentConfig, grid: Grid1D) -> np.ndarray:
    p = cfg.init.params
    if cfg.init.family == "gaussian":
        return gaussian_envelope(grid, sigma=p.get("sigma", 4.0),
                                 center=p.get("center", 0.0),
                                 amplitude=p.get("amplitude", 1.0))
    return powerlaw_envelope(grid, q=p.get("q", 0.5), amplitude=p.get("amplitude", 1.0))


def build_initial_state(cfg: ExperimentConfig, grid: Grid1D, lambdas, damping: DampingProfile):
    env = build_envelope(cfg, grid)
    n_modes = len(lambdas)
    u0 = {int(k): float(v) for k, v in cfg.init.u0_modes.items()}
    u1 = {int(k): float(v) for k, v in cfg.init.u1_modes.items()}
    mass = cfg.mass if cfg.flavor == KLEIN_GORDON else 0.0
    state = assemble_initial_state(grid, n_modes, env, u0, u1, flavor=cfg.flavor, mass=mass)
    if cfg.init.smoothing_k > 0:
        modes, vmodes = smooth_initial_data(state.modes, state.vmodes, grid, lambdas,
                                            damping, cfg.init.smoothing_k,
                                            order=cfg.grid.order, mass=mass)
        state = assemble_initial_state(grid, n_modes, np.zeros(grid.N), {}, {},
                                       flavor=cfg.flavor, mass=mass)
        state = type(state)(t=0.0, modes=modes, vmodes=vmodes, flavor=cfg.flavor, mass=mass)
    return state


def _rho_for_fit(cfg: ExperimentConfig) -> float:
    return math.inf if cfg.damping.kind == "constant" else cfg.damping.rho


def _informative(cfg: ExperimentConfig) -> bool:
    return cfg.damping.kind == "hole" or cfg.flavor == WAVE_DIRICHLET


# ---------------------------------------------------------------------------
# subcommands


def cmd_evolve(cfg: ExperimentConfig, out_base: str, keep_snapshots: bool = False) -> dict:
    grid = build_grid(cfg)
    damping = build_damping(cfg, grid)
    _, lambdas, _ = build_basis(cfg)
    state0 = build_initial_state(cfg, grid, lambdas, damping)
    result = run(state0, grid, lambdas, damping, dt=cfg.time.dt, t_end=cfg.time.t_end,
                 order=cfg.grid.order, t0=cfg.time.t0, sample_ratio=cfg.time.sample_ratio,
                 delta1=cfg.weights["delta1"], R=cfg.local_radius,
                 keep_snapshots=keep_snapshots)
    series = result.series()

    window = tuple(cfg.fit_window)
    informative = _informative(cfg)
    spec = cfg.weight_spec()
    rho = _rho_for_fit(cfg)
    fits = []

    def add_fit(series_name, y, model, track=None, k=1, fit_window=window):
        predicted = None
        if track is not None:
            try:
                predicted = predict_exponent(track, spec, k=k, d=1, rho=rho)
            except ValueError:
                predicted = None
        try:
            f = (fit_power if model == "power" else fit_exponential)(
                series["t"], y, window=fit_window, predicted=predicted)
        except ValueError as exc:
            fits.append({"series": series_name, "model": model, "error": str(exc)})
            return
        fits.append({"series": series_name, "model": model, "exponent": f.exponent,
                     "stderr": f.stderr, "predicted": predicted,
                     "verdict": "informative" if informative else f.verdict(),
                     "window": list(f.window), "curvature": f.curvature})

    if cfg.flavor == WAVE_DIRICHLET:
        add_fit("state_norm", np.sqrt(series["E_total"]), "power",
                track="dirichlet_highfreq", k=max(cfg.init.smoothing_k, 1))
    elif cfg.flavor == KLEIN_GORDON:
        add_fit("E_total", series["E_total"], "exponential")
    else:
        add_fit("grad_w", series["grad_w"], "power", track="energy_decay_grad")
        add_fit("dtu_w", series["dtu_w"], "power", track="energy_decay_dt")
        if cfg.flavor == WAVE_NEUMANN and np.any(series["E_p0perp"] > 0):
            p0_window = (cfg.time.t0 * 2, min(60.0, cfg.time.t_end))
            try:
                cm = compare_models(series["t"], series["E_p0perp"], window=p0_window)
                ex = cm["exponential"]
                fits.append({"series": "E_p0perp", "model": "exponential",
                             "exponent": ex.exponent, "stderr": ex.stderr,
                             "predicted": None, "verdict": "informative",
                             "window": list(ex.window), "curvature": ex.curvature,
                             "better_model": cm["better"]})
            except ValueError as exc:
                fits.append({"series": "E_p0perp", "model": "exponential", "error": str(exc)})

    outdir = os.path.join(out_base, config_hash(cfg))
    atomic_write(os.path.join(outdir, "series.csv"), format_csv(series, _header(cfg)))
    atomic_write(os.path.join(outdir, "fits.json"), _json_report(cfg, {
        "command": "evolve",
        "fits": fits,
        "E0": result.E0,
        "identity_max_step_residual": result.identity_max_step_residual,
        "identity_cumulative_residual": result.identity_cumulative_residual,
        "damping_hypothesis_constants": damping.hypothesis_constants(grid),
    }))
    atomic_write(os.path.join(outdir, "config.json"), canonical_json(cfg) + "\n")
    return {"outdir": outdir, "result": result, "series": series, "fits": fits,
            "grid": grid, "damping": damping, "lambdas": lambdas}


def cmd_heat_compare(cfg: ExperimentConfig, out_base: str) -> dict:
    if cfg.flavor not in (WAVE_NEUMANN, WAVE_EUCLIDEAN):
        raise ConfigError(f"flavor: heat comparison needs wave_neumann or wave_euclidean, got {cfg.flavor!r}")
    evolved = cmd_evolve(cfg, out_base, keep_snapshots=True)
    grid, damping, lambdas = evolved["grid"], evolved["damping"], evolved["lambdas"]
    _, _, yfactor = build_basis(cfg)
    state0 = evolved["result"].snapshots[0]
    w0 = p0_heat_data(state0.modes, state0.vmodes, damping.samples, yfactor)
    heat = HeatSolution(grid=grid, w0=w0)
    table = compare(evolved["result"].snapshots, heat, grid, lambdas, yfactor,
                    delta1=cfg.weights["delta1"], order=cfg.grid.order)

    spec = cfg.weight_spec()
    rho = _rho_for_fit(cfg)
    fits = []
    zero_heat = float(np.max(np.abs(w0))) == 0.0
    for name, track in (("norm_grad_diff", "heat_compare_grad_diff"),
                        ("norm_dt_diff", "heat_compare_dt_diff")):
        try:
            predicted = predict_exponent(track, spec, d=1, rho=rho)
        except ValueError:
            predicted = None
        try:
            f = fit_power(table["t"], table[name], window=tuple(cfg.fit_window),
                          predicted=predicted)
            fits.append({"series": name, "model": "power", "exponent": f.exponent,
                         "stderr": f.stderr, "predicted": predicted,
                         "verdict": "informative" if _informative(cfg) else f.verdict(),
                         "window": list(f.window), "curvature": f.curvature})
        except ValueError as exc:
            fits.append({"series": name, "model": "power", "error": str(exc)})

    finite = np.isfinite(table["ratio_dt"])
    payload = {"command": "heat-compare", "fits": fits, "zero_heat_data": zero_heat,
               "heat_mass": heat.mass()}
    if np.any(finite):
        ts = table["t"][finite]
        ratios = table["ratio_dt"][finite]
        payload["ratio_dt_final"] = float(ratios[-1])
        tail = ratios[ts >= 50.0]
        payload["ratio_dt_monotone_tail"] = bool(np.all(np.diff(tail) < 0)) if tail.size > 1 else False

    outdir = evolved["outdir"]
    atomic_write(os.path.join(outdir, "compare.csv"), format_csv(table, _header(cfg)))
    atomic_write(os.path.join(outdir, "compare_fits.json"), _json_report(cfg, payload))
    return {"outdir": outdir, "table": table, "fits": fits, "heat": heat,
            "payload": payload, "evolved": evolved}


def _fit_loglog_slope(xs, ys):
    return float(np.polyfit(np.log(np.asarray(xs, dtype=float)),
                            np.log(np.asarray(ys, dtype=float)), 1)[0])


def cmd_resolvent(cfg: ExperimentConfig, out_base: str) -> dict:
    grid = build_grid(cfg)
    damping = build_damping(cfg, grid)
    _, lambdas, _ = build_basis(cfg)
    kind = cfg.scan.kind
    outdir = os.path.join(out_base, config_hash(cfg))

    if kind == "theta":
        zs = parse_scan_z(cfg.scan.z_list)
        rows = theta_probe(zs, damping, grid, lambdas,
                           delta1=cfg.weights["delta1"], delta2=cfg.weights["delta2"],
                           order=cfg.grid.order)
        cols = {"re_z": [r["z"].real for r in rows], "im_z": [r["z"].imag for r in rows]}
        for j in (1, 2, 3, 4):
            cols[f"theta{j}"] = [r[f"theta{j}"] for r in rows]
        cols["structure_residual"] = [r["structure_residual"] for r in rows]
        variation = {f"theta{j}": (max(c) / min(c) if min(c := cols[f"theta{j}"]) > 0 else math.inf)
                     for j in (1, 2, 3, 4)}
        payload = {"command": "resolvent-scan", "kind": kind, "variation": variation,
                   "max_structure_residual": max(cols["structure_residual"])}
        atomic_write(os.path.join(outdir, "scan.csv"), format_csv(cols, _header(cfg)))
        atomic_write(os.path.join(outdir, "scan.json"), _json_report(cfg, payload))
        atomic_write(os.path.join(outdir, "config.json"), canonical_json(cfg) + "\n")
        return {"outdir": outdir, "rows": rows, "payload": payload}

    if kind == "gap":
        taus = [abs(complex(z)) for z in parse_scan_z(cfg.scan.z_list)]
        probes = spectral_gap_probe(taus, cfg.scan.gamma, damping, grid, lambdas,
                                    order=cfg.grid.order,
                                    rng=np.random.default_rng(cfg.seed))
        cols = {"tau": [p.tau for p in probes], "re_z": [p.z.real for p in probes],
                "im_z": [p.z.imag for p in probes],
                "spectrum_free": [1.0 if p.spectrum_free else 0.0 for p in probes],
                "norm_est": [p.norm_est for p in probes],
                "bound_constant": [p.bound_constant for p in probes]}
        payload = {"command": "resolvent-scan", "kind": kind, "gamma": cfg.scan.gamma,
                   "empirical_C": max(c for c in cols["bound_constant"] if math.isfinite(c))}
        atomic_write(os.path.join(outdir, "scan.csv"), format_csv(cols, _header(cfg)))
        atomic_write(os.path.join(outdir, "scan.json"), _json_report(cfg, payload))
        atomic_write(os.path.join(outdir, "config.json"), canonical_json(cfg) + "\n")
        return {"outdir": outdir, "probes": probes, "payload": payload}

    if kind == "realaxis":
        taus = [complex(z).real for z in parse_scan_z(cfg.scan.z_list)]
        helpers = [EnergyNormResolvent(grid, lam, damping, order=cfg.grid.order)
                   for lam in lambdas]

        def work(i):
            rng = np.random.default_rng([cfg.seed, i])
            return max(h.op_norm(taus[i], rng) for h in helpers)

        with ThreadPoolExecutor(max_workers=max_threads()) as pool:
            norms = list(pool.map(work, range(len(taus))))
        brackets = [(1.0 + t * t) for t in taus]
        c_emp = max(n / b for n, b in zip(norms, brackets))
        cols = {"re_z": taus, "im_z": [0.0] * len(taus),
                "beta1": [0.0] * len(taus), "beta2": [0.0] * len(taus),
                "norm_est": norms, "bound_constant": [n / b for n, b in zip(norms, brackets)]}
        payload = {"command": "resolvent-scan", "kind": kind, "empirical_C": c_emp,
                   "all_finite": bool(np.all(np.isfinite(norms)))}
        atomic_write(os.path.join(outdir, "scan.csv"), format_csv(cols, _header(cfg)))
        atomic_write(os.path.join(outdir, "scan.json"), _json_report(cfg, payload))
        atomic_write(os.path.join(outdir, "config.json"), canonical_json(cfg) + "\n")
        return {"outdir": outdir, "norms": norms, "payload": payload}

    # default: high/intermediate frequency norm scan, max over modes per point
    zs = parse_scan_z(cfg.scan.z_list)
    select = np.random.default_rng(cfg.seed).random(len(zs)) < 0.1

    def work(i):
        rng = np.random.default_rng([cfg.seed, i])
        return norm_scan([zs[i]], cfg.scan.beta1, cfg.scan.beta2, damping, grid, lambdas,
                         order=cfg.grid.order, rng=rng,
                         oracle_fraction=1.0 if select[i] else 0.0,
                         truncation_guard=cfg.scan.truncation_guard)[0]

    with ThreadPoolExecutor(max_workers=max_threads()) as pool:
        points = list(pool.map(work, range(len(zs))))

    cols = {"re_z": [p.z.real for p in points], "im_z": [p.z.imag for p in points],
            "beta1": [float(p.beta1) for p in points], "beta2": [float(p.beta2) for p in points],
            "norm_est": [p.norm_est for p in points],
            "method": [0.0 if p.method == "power_iteration" else 1.0 for p in points],
            "flag": [1.0 if p.flag == "truncation-limited" else 0.0 for p in points],
            "k_argmax": [float(p.k_argmax) for p in points]}
    ok = [p for p in points if p.flag != "truncation-limited" and abs(p.z.real) > 0]
    payload = {"command": "resolvent-scan", "kind": kind,
               "n_points": len(points),
               "n_truncation_limited": sum(p.flag == "truncation-limited" for p in points)}
    if len(ok) >= 2:
        payload["slope"] = _fit_loglog_slope([abs(p.z.real) for p in ok],
                                             [p.norm_est for p in ok])
        power = 1 + cfg.scan.beta1 + cfg.scan.beta2
        payload["bound_power"] = power
        payload["bound_constant"] = max(p.norm_est / abs(p.z.real) ** power for p in ok)
    atomic_write(os.path.join(outdir, "scan.csv"), format_csv(cols, _header(cfg)))
    atomic_write(os.path.join(outdir, "scan.json"), _json_report(cfg, payload))
    atomic_write(os.path.join(outdir, "config.json"), canonical_json(cfg) + "\n")
    return {"outdir": outdir, "points": points, "payload": payload}


def cmd_semiclassical(cfg: ExperimentConfig, out_base: str) -> dict:
    grid = build_grid(cfg)
    damping = build_damping(cfg, grid)
    hs = [float(h) for h in cfg.scan.h_list]
    if not hs:
        raise ConfigError("scan.h_list: semiclassical scan needs at least one h")

    def work(i):
        rng = np.random.default_rng([cfg.seed, i])
        return semiclassical_scan([hs[i]], damping, grid, order=cfg.grid.order, rng=rng)[0]

    with ThreadPoolExecutor(max_workers=max_threads()) as pool:
        rows = list(pool.map(work, range(len(hs))))
    control = pure_laplacian_control(hs, X=grid.X)
    hnorms = [r["h_norm"] for r in rows]
    payload = {"command": "semiclassical", "points": rows, "control": control,
               "max_h_norm": max(hnorms), "variation": max(hnorms) / min(hnorms),
               "control_growth": max(c["norm"] for c in control) / min(c["norm"] for c in control)}
    outdir = os.path.join(out_base, config_hash(cfg))
    atomic_write(os.path.join(outdir, "semiclassical.json"), _json_report(cfg, payload))
    atomic_write(os.path.join(outdir, "config.json"), canonical_json(cfg) + "\n")
    return {"outdir": outdir, "payload": payload}


def cmd_fit(csv_path: str, column: str, model: str, window: tuple[float, float],
            predicted: float | None, out_path: str | None) -> dict:
    data = read_csv(csv_path)
    if column not in data:
        raise ConfigError(f"{csv_path}: no column {column!r} (have {sorted(data)})")
    if "t" not in data:
        raise ConfigError(f"{csv_path}: no t column")
    fitter = fit_power if model == "power" else fit_exponential
    f = fitter(data["t"], data[column], window=window, predicted=predicted)
    report = {"experiment_id": os.path.basename(csv_path), "series": column,
              "model": f.model, "exponent": f.exponent, "stderr": f.stderr,
              "predicted": predicted, "verdict": f.verdict(),
              "window": list(f.window), "curvature": f.curvature,
              "artifact_version": __version__}
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if out_path:
        atomic_write(out_path, text)
    return report
