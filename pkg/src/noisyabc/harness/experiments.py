"""Config-driven experiment runner.

Every replicate gets its own deterministic seeds (data, noise, algorithm)
spawned from the config seed, so outputs depend only on the config. Files
are written per replicate, then a single summary JSON is written last.
"""

from __future__ import annotations

import json
import logging
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import kstwo

from .. import __version__, smc
from ..core import corrupt_observations, psi_transform
from ..errors import ConfigError, NoisyABCError
from ..iid import gradient_histogram, histogram_bins, running_variance
from ..mle import RunRecord, batch_gradient_ascent, online_gradient_ascent
from .config import ExperimentConfig
from .data import ar1_residuals, ingest_csv, preprocess_log_returns

log = logging.getLogger(__name__)

KS_CRIT_1PCT = 1.63


def version_string() -> str:
    """``<version>`` or ``<version>+g<describe>`` when run from a git checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True, text=True, timeout=5, check=True,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        out = ""
    return f"{__version__}+g{out}" if out else __version__


def provenance(cfg: ExperimentConfig) -> str:
    return f"noisyabc {version_string()} config {cfg.hash()}"


@dataclass
class ReplicateSeeds:
    data: int
    noise: int
    algo: int


def replicate_seeds(seed: int, replicate: int) -> ReplicateSeeds:
    ss = np.random.SeedSequence([seed, replicate])
    d, n, a = (int(c.generate_state(1, dtype=np.uint64)[0]) for c in ss.spawn(3))
    return ReplicateSeeds(d, n, a)


def seeds_for(cfg: ExperimentConfig, replicate: int) -> ReplicateSeeds:
    """Per-replicate seeds; with ``shared_data`` every replicate reuses replicate 0's dataset."""
    seeds = replicate_seeds(cfg.seed, replicate)
    if cfg.shared_data:
        seeds.data = replicate_seeds(cfg.seed, 0).data
    return seeds


# -- data ----------------------------------------------------------------------
def load_raw(cfg: ExperimentConfig, model, seeds: ReplicateSeeds) -> np.ndarray:
    """Raw observations: simulated from theta_true, or read and preprocessed."""
    if cfg.data_path is not None:
        values = ingest_csv(cfg.data_path).values
        if cfg.preprocess in ("log_returns", "ar1_residuals"):
            values = preprocess_log_returns(values)
        if cfg.preprocess == "ar1_residuals":
            values = ar1_residuals(values)
        if cfg.n is not None:
            values = values[: cfg.n]
        return values
    raw = model.simulate(cfg.theta_true, cfg.n, np.random.default_rng(seeds.data))
    return np.asarray(raw, dtype=float).reshape(-1)


def _use_psi(cfg, model):
    return model.uses_psi if cfg.use_psi is None else cfg.use_psi


def observations(cfg, model, raw, seeds):
    """What the filter sees: corrupted (noisy ABC) or just transformed (plain ABC) data."""
    use_psi = _use_psi(cfg, model)
    if cfg.corrupt_data:
        return corrupt_observations(raw, cfg.epsilon, use_psi, seeds.noise).values
    return psi_transform(raw) if use_psi else np.array(raw, dtype=float)


def precenter(cfg, model, raw):
    if not cfg.precenter:
        return raw, 0.0, None
    from ..models.gandk import heuristic_location

    shift = heuristic_location(raw, cfg.precenter_head)
    return raw - shift, shift, model.domain.index(model.location_param)


# -- modes ---------------------------------------------------------------------
def _fit_replicate(cfg: ExperimentConfig, r: int, out: Path) -> dict:
    model = cfg.build_model()
    seeds = seeds_for(cfg, r)
    raw = load_raw(cfg, model, seeds)
    raw, shift, loc = precenter(cfg, model, raw)
    y = observations(cfg, model, raw, seeds)
    # with pre-centering the location entry of theta0 is an offset from the heuristic
    theta0 = np.array(cfg.theta0, dtype=float)
    rng = np.random.default_rng(seeds.algo)
    kwargs = dict(schedule=cfg.schedule_obj(), rng=rng, use_psi=_use_psi(cfg, model), record_time=cfg.record_time)
    result = {"replicate": r}
    try:
        if cfg.mode == "batch":
            rec = batch_gradient_ascent(y, model, theta0, cfg.epsilon, cfg.n_particles,
                                        score_method=cfg.score_method, iterations=cfg.iterations, **kwargs)
        else:
            rec = online_gradient_ascent(y, model, theta0, cfg.epsilon, cfg.n_particles, thin=cfg.thin,
                                         score_method=cfg.score_method, **kwargs)
    except NoisyABCError as exc:
        rec = getattr(exc, "record", None)
        result["error"] = f"{type(exc).__name__}: {exc}"
    if rec is not None:
        if loc is not None:
            rec.theta0[loc] += shift
            rec.theta[:, loc] += shift
        rec.to_csv(out / f"replicate_{r:03d}.csv", provenance(cfg))
        result["rows"] = len(rec)
        if len(rec):
            result["final_estimate"] = rec.final_estimate(cfg.average_last).tolist()
    result["location_shift"] = shift
    return result


def _summarise_estimates(results, names) -> dict:
    ests = np.array([r["final_estimate"] for r in results if "final_estimate" in r and "error" not in r])
    if ests.size == 0:
        return {}
    out = {"n_converged": int(ests.shape[0]), "mean": dict(zip(names, ests.mean(axis=0).tolist()))}
    if ests.shape[0] > 1:
        out["variance"] = dict(zip(names, ests.var(axis=0, ddof=1).tolist()))
    return out


def summary_from_files(out_dir, average_last: int) -> dict:
    """Recompute the cross-replicate summary from the replicate CSVs on disk."""
    recs = [RunRecord.from_csv(p) for p in sorted(Path(out_dir).glob("replicate_*.csv"))]
    res = [{"final_estimate": r.final_estimate(average_last).tolist()} for r in recs if len(r)]
    return _summarise_estimates(res, recs[0].names if recs else ())


def pit_model_check(y, model, theta, epsilon, n_particles, seed, cdf_at=None, use_psi=None) -> dict:
    """Filter ``y`` once at ``theta`` and return sorted PIT values with KS diagnostics.

    ``cdf_at`` are the values whose conditional CDFs are collected (defaults to
    ``y`` itself, i.e. the corrupted observations).
    """
    y = np.asarray(y, dtype=float)
    cdf_at = y if cdf_at is None else np.asarray(cdf_at, dtype=float)
    res = smc.run_filter(y, model, theta, epsilon, n_particles, np.random.default_rng(seed),
                         use_psi=use_psi, cdf_values=cdf_at)
    u = np.sort(res.cdf)
    n = u.size
    q = np.arange(1, n + 1) / (n + 1)
    grid = np.arange(1, n + 1) / n
    ks = float(max(np.max(grid - u), np.max(u - (grid - 1.0 / n))))
    crit = KS_CRIT_1PCT / np.sqrt(n)
    return {
        "quantiles": q,
        "pit": u,
        "ks": ks,
        "critical_1pct": float(crit),
        "p_value": float(kstwo.sf(ks, n)),
        "log_likelihood": res.log_likelihood,
    }


def _pit_replicate(cfg, r, out):
    model = cfg.build_model()
    seeds = seeds_for(cfg, r)
    raw = load_raw(cfg, model, seeds)
    y = observations(cfg, model, raw, seeds)
    use_psi = _use_psi(cfg, model)
    at = None
    if cfg.pit_evaluate == "raw":
        at = psi_transform(raw) if use_psi else raw
    theta = cfg.theta if cfg.theta is not None else cfg.theta_true
    result = {"replicate": r}
    try:
        chk = pit_model_check(y, model, theta, cfg.epsilon, cfg.n_particles, seeds.algo, at, use_psi)
    except NoisyABCError as exc:
        result["error"] = f"{type(exc).__name__}: {exc}"
        return result
    _write_columns(out / f"pit_{r:03d}.csv", ("uniform_quantile", "pit"), (chk["quantiles"], chk["pit"]), provenance(cfg))
    result.update({k: chk[k] for k in ("ks", "critical_1pct", "p_value", "log_likelihood")})
    result["uniform_rejected"] = chk["ks"] > chk["critical_1pct"]
    return result


def _histogram_replicate(cfg, r, out):
    model = cfg.build_model()
    seeds = seeds_for(cfg, r)
    raw = load_raw(cfg, model, seeds)
    theta = cfg.theta if cfg.theta is not None else cfg.theta_true
    use_psi = _use_psi(cfg, model)
    result = {"replicate": r}
    try:
        scores = gradient_histogram(raw, model, theta, cfg.epsilon, cfg.n_particles, use_psi,
                                    np.random.default_rng(seeds.algo), noise_seed=seeds.noise)
    except NoisyABCError as exc:
        result["error"] = f"{type(exc).__name__}: {exc}"
        return result
    names = model.param_names
    for name, (counts, edges) in zip(names, histogram_bins(scores, cfg.histogram_bins)):
        _write_columns(out / f"hist_{r:03d}_{name}.csv", ("left", "right", "count"), (edges[:-1], edges[1:], counts), provenance(cfg))
    rv = running_variance(scores)
    m = scores.shape[0]
    checkpoints = sorted({k for k in np.unique(np.geomspace(2, m, 50).astype(int))} | {m // 2, m})
    checkpoints = [k for k in checkpoints if k >= 2]
    _write_columns(out / f"running_variance_{r:03d}.csv", ("m",) + tuple(names),
                   (np.array(checkpoints),) + tuple(rv[np.array(checkpoints) - 1, j] for j in range(len(names))), provenance(cfg))
    if cfg.write_samples:
        _write_columns(out / f"scores_{r:03d}.csv", names, tuple(scores[:, j] for j in range(len(names))), provenance(cfg))
    half, full = rv[m // 2 - 1], rv[m - 1]
    change = np.abs(full - half) / np.abs(half)
    result["variance_half"] = dict(zip(names, half.tolist()))
    result["variance_full"] = dict(zip(names, full.tolist()))
    result["relative_change"] = dict(zip(names, change.tolist()))
    result["stabilised"] = dict(zip(names, (change < 0.1).tolist()))
    return result


def _likelihood_eval(cfg, out):
    model = cfg.build_model()
    seeds = replicate_seeds(cfg.seed, 0)
    raw = load_raw(cfg, model, seeds)
    y = observations(cfg, model, raw, seeds)
    use_psi = _use_psi(cfg, model)
    rows, per_theta = [], []
    for i, th in enumerate(cfg.thetas):
        vals = []
        for s in range(cfg.n_evals):
            ss = np.random.SeedSequence([cfg.seed, 1, i, s])
            try:
                ll = smc.estimate_log_likelihood(y, model, th, cfg.epsilon, cfg.n_particles,
                                                 np.random.default_rng(ss), use_psi)
            except NoisyABCError as exc:
                log.warning("theta %d eval %d failed: %s", i, s, exc)
                ll = float("nan")
            vals.append(ll)
            rows.append((i, s, ll))
        v = np.array(vals)
        per_theta.append({"theta": list(th), "mean": float(np.nanmean(v)),
                          "std": float(np.nanstd(v, ddof=1)) if v.size > 1 else 0.0,
                          "n_failed": int(np.isnan(v).sum())})
    arr = np.array(rows, dtype=float)
    _write_columns(out / "likelihood_eval.csv", ("theta_index", "eval", "log_likelihood"),
                   (arr[:, 0].astype(int), arr[:, 1].astype(int), arr[:, 2]), provenance(cfg))
    return {"likelihood": per_theta}


def _write_columns(path, header, cols, provenance=None):
    lines = [f"# {provenance}"] if provenance else []
    lines.append(",".join(header))
    for row in zip(*cols):
        lines.append(",".join(str(v) if isinstance(v, (int, np.integer)) else repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


_REPLICATE_FN = {
    "batch": _fit_replicate,
    "online": _fit_replicate,
    "pit-check": _pit_replicate,
    "gradient-histogram": _histogram_replicate,
}


def _run_one(args):
    cfg_dict, r, out = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    return _REPLICATE_FN[cfg.mode](cfg, r, Path(out))


def run_experiment(cfg: ExperimentConfig, force: bool = False) -> dict:
    """Run every replicate of ``cfg``; returns the summary that is written as JSON."""
    if not cfg.enabled and not force:
        raise ConfigError(f"experiment {cfg.name!r} is disabled (set enabled or pass force)")
    out = cfg.output_path()
    out.mkdir(parents=True, exist_ok=True)
    summary = {
        "name": cfg.name,
        "mode": cfg.mode,
        "config_hash": cfg.hash(),
        "version": version_string(),
        "config": cfg.to_dict(),
    }
    if cfg.mode == "likelihood-eval":
        summary.update(_likelihood_eval(cfg, out))
        results = []
    else:
        jobs = [(cfg.to_dict(), r, str(out)) for r in range(cfg.replicates)]
        if cfg.workers > 1 and cfg.replicates > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(_run_one, jobs))
        else:
            results = [_REPLICATE_FN[cfg.mode](cfg, r, out) for r in range(cfg.replicates)]
        summary["replicates"] = results
        if cfg.mode in ("batch", "online"):
            summary["estimates"] = _summarise_estimates(results, cfg.build_model().param_names)
    summary["n_failed"] = sum("error" in r for r in results)
    text = json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n"
    (out / "summary.json").write_text(text)
    return summary


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
