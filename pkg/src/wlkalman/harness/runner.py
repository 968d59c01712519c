"""Monte-Carlo orchestration.

Trials are processed in fixed chunks of :data:`CHUNK` trials.  Trial ``t``
always draws from stream ``t`` of the master seed, chunk results are reduced
in chunk order, and the chunking does not depend on the worker count, so the
output is identical for any level of parallelism.  The same stream is used
at every sweep point (common random numbers), and every variant filters the
same simulated observations.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..analysis import BiasEstimate, MseReport, Propagation, node_bounds, propagate_covariance, stationary_covariance
from ..errors import ConfigurationError, NumericalFailure
from ..filters import FilterModel, run_batch
from ..model import simulate_batch
from ..stats import RngStream
from .config import ScenarioConfig

CHUNK = 50


@dataclass
class MseSeries:
    """Monte-Carlo squared-error statistics of one variant at one sweep point.

    ``curve[n, i]`` is the trial-mean squared error of node ``i`` at step
    ``n + 1``; ``steady[t, i]`` is trial ``t``'s mean over the steady window;
    ``bias`` holds the trial-mean of the window-averaged error.
    """

    variant: str
    eta: float
    curve: np.ndarray
    steady: np.ndarray
    bias: BiasEstimate

    @property
    def trials(self):
        return self.steady.shape[0]

    @property
    def steady_state_mse(self):
        return self.steady.mean(axis=0)

    @property
    def steady_se(self):
        if self.trials < 2:
            return np.full(self.steady.shape[1], np.nan)
        return self.steady.std(axis=0, ddof=1) / np.sqrt(self.trials)

    @property
    def network_steady(self):
        return float(self.steady.mean())

    @property
    def network_steady_se(self):
        if self.trials < 2:
            return float("nan")
        per_trial = self.steady.mean(axis=1)
        return float(per_trial.std(ddof=1) / np.sqrt(self.trials))

    @property
    def mean_mse(self):
        return self.curve.mean(axis=0)

    @property
    def network_curve(self):
        return self.curve.mean(axis=1)

    @property
    def bias_norm(self):
        m = self.bias.mean
        return np.sqrt(np.sum(m ** 2, axis=tuple(range(1, m.ndim))))


@dataclass
class EtaPoint:
    eta: float
    series: dict
    reports: dict = field(default_factory=dict)
    propagations: dict = field(default_factory=dict)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    points: list
    diagnostics: list = field(default_factory=list)

    def get(self, variant, eta):
        for p in self.points:
            if np.isclose(p.eta, eta, rtol=0, atol=1e-12):
                return p.series[variant]
        raise KeyError(f"no sweep point eta={eta}")

    def report(self, variant, eta):
        for p in self.points:
            if np.isclose(p.eta, eta, rtol=0, atol=1e-12):
                return p.reports[variant]
        raise KeyError(f"no sweep point eta={eta}")


@dataclass
class _Job:
    config: ScenarioConfig
    model: object
    filters: list
    schedules: list


_JOB = None


def _init_worker(job):
    global _JOB
    _JOB = job


def _run_chunk(bounds, job=None):
    job = job or _JOB
    cfg = job.config
    start, stop = bounds
    streams = [RngStream(cfg.seed, t) for t in range(start, stop)]
    x, y = simulate_batch(job.model, cfg.horizon, streams, burn_in=cfg.burn_in)
    w = cfg.window
    out = []
    for fm, sched in zip(job.filters, job.schedules):
        with np.errstate(all="ignore"):
            est = fm.estimate(run_batch(fm, y, sched))
            err = x[:, :, None, :] - est
            sq = np.sum(np.abs(err) ** 2, axis=-1)
        ok = np.all(np.isfinite(sq), axis=(1, 2))
        out.append(dict(
            sum_sq=sq[ok].sum(axis=0),
            steady=sq[ok, -w:].mean(axis=1),
            bias=err[ok, -w:].mean(axis=1),
            failed=[start + int(t) for t in np.flatnonzero(~ok)],
        ))
    return out


def _chunks(trials):
    return [(s, min(s + CHUNK, trials)) for s in range(0, trials, CHUNK)]


def _bias(errors):
    e = np.stack([errors.real, errors.imag], axis=-1)
    t = e.shape[0]
    mean = e.mean(axis=0)
    if t < 2:
        return BiasEstimate(mean, np.full_like(mean, np.nan), t)
    return BiasEstimate(mean, e.std(axis=0, ddof=1) / np.sqrt(t), t)


def _theory(cfg, fm, model):
    steps = cfg.horizon
    if cfg.burn_in > 0:
        prop = propagate_covariance(fm, steps, init_cov=stationary_covariance(model),
                                    init_error=np.zeros(model.L))
    else:
        prop = propagate_covariance(fm, steps)
    return prop


def run_point(cfg: ScenarioConfig, eta, topology=None, workers=1, theory=True):
    """Monte-Carlo run of every configured variant at one sweep point."""
    topology = topology or cfg.build_topology()
    weights = cfg.build_weights(topology)
    model = cfg.build_model(topology.n_nodes, eta)
    filters = [FilterModel(v, model, topology, weights, delta=cfg.delta) for v in cfg.variants]
    schedules = [fm.schedule(cfg.horizon) for fm in filters]
    job = _Job(cfg, model, filters, schedules)

    chunks = _chunks(cfg.trials)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(job,)) as ex:
            parts = list(ex.map(_run_chunk, chunks))
    else:
        parts = [_run_chunk(c, job) for c in chunks]

    point = EtaPoint(float(eta), {})
    diagnostics = []
    for j, fm in enumerate(filters):
        name = cfg.variants[j]
        steady = np.concatenate([p[j]["steady"] for p in parts])
        failed = [t for p in parts for t in p[j]["failed"]]
        if failed:
            diagnostics.append(f"{name} eta={eta:g}: non-finite estimates in trials {failed}")
        if steady.shape[0] == 0:
            raise NumericalFailure(f"{name} eta={eta:g}: every trial failed")
        total = parts[0][j]["sum_sq"].copy()
        for p in parts[1:]:
            total += p[j]["sum_sq"]
        series = MseSeries(name, float(eta), total / steady.shape[0], steady,
                           _bias(np.concatenate([p[j]["bias"] for p in parts])))
        point.series[name] = series
        if theory:
            try:
                prop = _theory(cfg, fm, model)
            except ConfigurationError as exc:
                diagnostics.append(f"{name} eta={eta:g}: no theoretical analysis ({exc})")
                continue
            point.propagations[name] = prop
            point.reports[name] = _report(name, prop, series, fm.hoods, cfg.window)
    return point, diagnostics


def _report(name, prop: Propagation, series: MseSeries, hoods, window):
    return MseReport(name, prop.mse[-window:].mean(axis=0), series.steady_state_mse,
                     node_bounds(prop, hoods), prop.settling_index)


def run_scenario(cfg: ScenarioConfig, workers=None, theory=True, progress=None) -> ScenarioResult:
    """Run the whole sweep; deterministic given the config (worker count aside)."""
    cfg.validate()
    workers = cfg.workers if workers is None else int(workers)
    topology = cfg.build_topology()
    result = ScenarioResult(cfg, [])
    for eta in cfg.eta_sweep:
        point, diag = run_point(cfg, eta, topology, workers, theory)
        result.points.append(point)
        result.diagnostics.extend(diag)
        if progress is not None:
            progress(point)
    return result
