"""Monte Carlo experiment runners, CSV output and SVG plots.

Every trial index owns its random substreams, and the same trial index is
reused at every sweep value (common random numbers).  Trials may run in a
process pool; results are reduced in trial order, so output does not
depend on scheduling.
"""

from __future__ import annotations

import csv
import dataclasses
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from iaps.config import ConfigError, ScenarioConfig
from iaps.fusion import (
    StackedModel,
    draw_symbols,
    fusion_threshold,
    glrt_statistic,
    simulate_observation,
    stack,
)
from iaps.local import local_decision, local_glrt, local_rhos, matched_filter, node_covariances, simulate_node
from iaps.optimize.power import (
    algorithm1_rows,
    build_qos_rows,
    grid_upper_bound,
    objective_gains,
    solve_p2,
    solve_pa,
)
from iaps.precoding import DegenerateGeometryError, build_precoders
from iaps.scenario import TrialStreams, draw_channels, draw_rcs, generate_layout
from iaps.stats import pd_from_rho, threshold_from_pfa
from iaps.vote import fuse, vote_outcome

SCHEMES = ("iaps", "iaps_nos0", "active", "active_nos0", "passive", "passive_nos0", "min_ptotal")
SWEEPS = ("sigma_rcs_db", "p_max_dbm", "R", "K", "gamma_db", "p0", "delta_p", "comm_share")
REGIMES = ("unlimited", "limited")
CSV_COLUMNS = ("figure", "scheme", "regime", "x", "mean", "stderr", "trials", "infeasible_count")

# scheme -> (allocation, receiving nodes); "all" and "rap" resolve per R
_SCHEME_PARTS = {
    "iaps": ("s0", "all"),
    "iaps_nos0": ("nos0", "all"),
    "active": ("s0", "bs"),
    "active_nos0": ("nos0", "bs"),
    "passive": ("s0", "rap"),
    "passive_nos0": ("nos0", "rap"),
    "min_ptotal": ("min", "all"),
    "algorithm1": ("s0", "all"),
}


@dataclass(frozen=True)
class ExperimentSpec:
    figure: str
    sweep: str
    values: tuple
    schemes: tuple
    regime: str = "unlimited"
    trials: int = 200
    seed: int = 2024
    config: ScenarioConfig = field(default_factory=ScenarioConfig)
    mode: str = "analytic"
    label: str = ""  # appended to scheme names in the output
    grid_points: int | None = None  # upper-bound grid; None uses the heuristic's step

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if self.sweep not in SWEEPS:
            raise ConfigError(f"unknown sweep variable {self.sweep!r}")
        if self.regime not in REGIMES:
            raise ConfigError(f"unknown regime {self.regime!r}")
        if self.mode not in ("analytic", "empirical"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        diffs = np.diff(self.values)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ConfigError("sweep values must be strictly monotone")
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError("trials must be an integer >= 1")
        if not self.schemes:
            raise ConfigError("at least one scheme is required")

    def config_at(self, x: float) -> ScenarioConfig:
        if self.sweep in ("R", "K"):
            return self.config.replace(**{self.sweep: int(round(x))})
        if self.sweep in ("sigma_rcs_db", "p_max_dbm", "gamma_db"):
            return self.config.replace(**{self.sweep: float(x)})
        if self.sweep == "delta_p":
            return self.config.replace(delta_p_frac=float(x))
        return self.config

    @classmethod
    def from_dict(cls, data: dict, config: ScenarioConfig) -> "ExperimentSpec":
        known = {f.name for f in dataclasses.fields(cls)} - {"config"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown experiment keys: {', '.join(unknown)}")
        try:
            return cls(config=config, **data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class CurvePoint:
    figure: str
    scheme: str
    regime: str
    x: float
    mean: float
    stderr: float
    trials: int
    infeasible_count: int


# per-trial preparation ----------------------------------------------------------

@dataclass
class _Prepared:
    channels: object
    precoders: object
    rows: list
    allocs: dict  # name -> AllocationResult or None


def _prepare(cfg: ScenarioConfig, streams: TrialStreams, regime: str, needed: set) -> _Prepared | None:
    layout = generate_layout(cfg, streams)
    channels = draw_channels(layout, cfg, streams)
    try:
        precoders = build_precoders(channels, cfg)
    except (DegenerateGeometryError, np.linalg.LinAlgError):
        return None
    rows = build_qos_rows(channels.H, precoders, cfg.gamma_db, cfg.sigma_nc2)
    c = objective_gains(channels, precoders)
    allocs = {}
    if "s0" in needed:
        if regime == "unlimited":
            allocs["s0"] = solve_p2(rows, c, cfg.p_max_mw, sensing=True)
        else:
            allocs["s0"] = algorithm1_rows(rows, cfg.p_max_mw, cfg.delta_p_mw)
    if "nos0" in needed:
        allocs["nos0"] = solve_p2(rows, c, cfg.p_max_mw, sensing=False)
    if "min" in needed:
        res = solve_pa(rows, 0.0)
        if res.ok and res.p.sum() > cfg.p_max_mw * (1 + 1e-12):
            res = dataclasses.replace(res, status="infeasible")
        allocs["min"] = res
    return _Prepared(channels, precoders, rows, allocs)


def _nodes(which: str, R: int) -> list[int]:
    if which == "all":
        return list(range(R + 1))
    if which == "bs":
        return [0]
    return list(range(1, R + 1))


def _node_energy(prep: _Prepared, p) -> np.ndarray:
    """tr(B_r W_hat B_r^H) for every node."""
    prec = prep.precoders.with_power(p)
    W = prec.W
    ch = prep.channels
    return np.array([float(np.sum(np.abs(ch.response(r) @ W) ** 2)) for r in range(ch.R + 1)])


def _analytic_value(prep: _Prepared, cfg: ScenarioConfig, scheme: str, regime: str, cache: dict) -> float:
    alloc_name, which = _SCHEME_PARTS[scheme]
    alloc = prep.allocs[alloc_name]
    nodes = _nodes(which, prep.channels.R)
    if not nodes:
        return math.nan
    if regime == "unlimited":
        key = ("energy", alloc_name)
        if key not in cache:
            cache[key] = _node_energy(prep, alloc.p)
        rho = 2.0 * cfg.L * cfg.sigma_rcs2 * cache[key][nodes].sum() / cfg.sigma_ns2
        return float(pd_from_rho(rho, cfg.pfa))
    key = ("rho_unit", alloc_name)
    if key not in cache:
        cache[key] = local_rhos(prep.channels, prep.precoders.with_power(alloc.p), cfg.L, 1.0, cfg.sigma_ns2)
    rhos = cfg.sigma_rcs2 * cache[key][nodes]
    pds = np.atleast_1d(pd_from_rho(rhos, cfg.pfa))
    return vote_outcome(pds, cfg.pfa).fused_pd


def _empirical_value(prep: _Prepared, cfg: ScenarioConfig, scheme: str, regime: str,
                     streams: TrialStreams) -> float:
    """One detection outcome (0 or 1) from a simulated coherent interval."""
    alloc_name, which = _SCHEME_PARTS[scheme]
    alloc = prep.allocs[alloc_name]
    nodes = _nodes(which, prep.channels.R)
    if not nodes:
        return math.nan
    ch = prep.channels
    prec = prep.precoders.with_power(alloc.p)
    alpha = math.sqrt(cfg.sigma_rcs2) * draw_rcs(cfg.replace(sigma_rcs_db=0.0), streams)
    S = draw_symbols(ch.K + 1, cfg.L, streams.stream("symbols"))
    rng = streams.stream("noise")
    if regime == "unlimited":
        obs = simulate_observation(ch, prec, alpha, S, cfg.sigma_ns2, rng)
        model = StackedModel.build(ch, prec, S)
        sub = StackedModel([model.responses[r] for r in nodes], model.X)
        z = stack([obs[r] for r in nodes])
        stat = glrt_statistic(z, sub.A(), cfg.sigma_ns2)
        return float(stat >= fusion_threshold(cfg.pfa, len(nodes)))
    covs = node_covariances(ch, prec, cfg.sigma_ns2)
    zeta = threshold_from_pfa(cfg.pfa)
    bits = []
    for r in range(ch.R + 1):
        z = simulate_node(ch, prec, r, alpha[r], S, cfg.sigma_ns2, rng)
        if r in nodes:
            stat = local_glrt(matched_filter(z, S), prec, ch.response(r), covs[r])
            bits.append(local_decision(stat, zeta))
    rhos = local_rhos(ch, prec, cfg.L, cfg.sigma_rcs2, cfg.sigma_ns2)[nodes]
    kappa = vote_outcome(np.atleast_1d(pd_from_rho(rhos, cfg.pfa)), cfg.pfa).kappa
    return float(fuse(bits, kappa))


def _standard_trial(spec: ExperimentSpec, t: int) -> dict:
    streams = TrialStreams(spec.seed, t)
    needed = {_SCHEME_PARTS[s][0] for s in spec.schemes if s in _SCHEME_PARTS}
    preps: dict = {}
    out = {}
    for i, x in enumerate(spec.values):
        cfg = spec.config_at(x)
        # allocations do not depend on the target gain variance
        key = cfg.replace(sigma_rcs_db=0.0)
        if key not in preps:
            preps[key] = (_prepare(cfg, streams, spec.regime, needed), {})
        prep, cache = preps[key]
        for scheme in spec.schemes:
            if prep is None:
                out[(i, scheme)] = None
                continue
            if scheme == "upper_bound":
                points = spec.grid_points or int(round(1.0 / cfg.delta_p_frac)) + 1
                ub = grid_upper_bound(prep.channels, prep.precoders, cfg, points)[1]
                out[(i, scheme)] = None if math.isnan(ub) else ub
                continue
            alloc = prep.allocs[_SCHEME_PARTS[scheme][0]]
            if not alloc.ok:
                out[(i, scheme)] = None
            elif spec.mode == "empirical":
                out[(i, scheme)] = _empirical_value(prep, cfg, scheme, spec.regime, streams)
            else:
                out[(i, scheme)] = _analytic_value(prep, cfg, scheme, spec.regime, cache)
    return out


# special sweeps -------------------------------------------------------------

def _pd_vs_p0_trial(spec: ExperimentSpec, t: int) -> dict:
    cfg = spec.config
    streams = TrialStreams(spec.seed, t)
    prep = _prepare(cfg, streams, "limited", set())
    out = {}
    for i, frac in enumerate(spec.values):
        for scheme in spec.schemes:
            out[(i, scheme)] = None
        if prep is None:
            continue
        p0 = frac * cfg.p_max_mw
        inner = solve_pa(prep.rows, p0)
        if not inner.ok or inner.p.sum() > cfg.p_max_mw * (1 + 1e-12):
            continue
        rhos = local_rhos(prep.channels, prep.precoders.with_power(inner.p), cfg.L, cfg.sigma_rcs2,
                          cfg.sigma_ns2)
        outcome = vote_outcome(np.atleast_1d(pd_from_rho(rhos, cfg.pfa)), cfg.pfa)
        for scheme in spec.schemes:
            out[(i, scheme)] = outcome.pd_hat if scheme == "pd_hat" else outcome.fused_pd
    return out


def max_gamma(rows, p0: float, budget_mw: float, rel_tol: float = 1e-6) -> tuple[float, object]:
    """Largest common SINR target meetable with comm power <= budget (bisection)."""
    if budget_mw <= 0:
        return 0.0, None
    hi = min(budget_mw * row.own ** 2 / row.sigma_nc2 for row in rows)
    if hi <= 0:
        return 0.0, None

    def attempt(gamma):
        trial_rows = [dataclasses.replace(r, gamma=gamma) for r in rows]
        res = solve_pa(trial_rows, p0)
        return res if res.ok and res.p[1:].sum() <= budget_mw * (1 + 1e-12) else None

    lo, best = 0.0, None
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        res = attempt(mid)
        if res is None:
            hi = mid
        else:
            lo, best = mid, res
    return lo, best


def _tradeoff_trial(spec: ExperimentSpec, t: int) -> dict:
    cfg = spec.config
    streams = TrialStreams(spec.seed, t)
    prep = _prepare(cfg, streams, "unlimited", set())
    out = {}
    for i, share in enumerate(spec.values):
        if prep is None:
            for scheme in spec.schemes:
                out[(i, scheme)] = None
            continue
        p0 = (1.0 - share) * cfg.p_max_mw
        gamma, res = max_gamma(prep.rows, p0, share * cfg.p_max_mw)
        p = np.zeros(cfg.K + 1)
        p[0] = p0
        if res is not None:
            p[1:] = res.p[1:]
        energy = _node_energy(prep, p).sum()
        rho = 2.0 * cfg.L * cfg.sigma_rcs2 * energy / cfg.sigma_ns2
        for scheme in spec.schemes:
            out[(i, scheme)] = gamma if scheme == "max_gamma" else rho
    return out


def _stepsize_trial(spec: ExperimentSpec, t: int) -> dict:
    streams = TrialStreams(spec.seed, t)
    prep = _prepare(spec.config, streams, "limited", set())
    out = {}
    for i, step in enumerate(spec.values):
        cfg = spec.config.replace(delta_p_frac=float(step))
        for scheme in spec.schemes:
            out[(i, scheme)] = None
        if prep is None:
            continue
        t0 = time.perf_counter()
        res = algorithm1_rows(prep.rows, cfg.p_max_mw, cfg.delta_p_mw)
        elapsed = time.perf_counter() - t0
        if not res.ok:
            continue
        rhos = local_rhos(prep.channels, prep.precoders.with_power(res.p), cfg.L, cfg.sigma_rcs2,
                          cfg.sigma_ns2)
        vals = {"runtime_ms": 1e3 * elapsed, "iterations": float(res.iterations),
                "total_rho_db": 10.0 * math.log10(rhos.sum()) if rhos.sum() > 0 else math.nan}
        for scheme in spec.schemes:
            out[(i, scheme)] = vals[scheme]
    return out


def _trial_function(spec: ExperimentSpec):
    if spec.sweep == "p0":
        return _pd_vs_p0_trial
    if spec.sweep == "comm_share":
        return _tradeoff_trial
    if spec.sweep == "delta_p":
        return _stepsize_trial
    return _standard_trial


def _call(args):
    func, spec, t = args
    return func(spec, t)


def _collect(spec: ExperimentSpec, threads: int = 1) -> list[dict]:
    func = _trial_function(spec)
    jobs = [(func, spec, t) for t in range(spec.trials)]
    if threads > 1 and spec.trials > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_call, jobs, chunksize=max(1, spec.trials // (4 * threads))))
    return [_call(j) for j in jobs]


def _reduce(spec: ExperimentSpec, results: list[dict]) -> list[CurvePoint]:
    points = []
    for scheme in spec.schemes:
        name = scheme + spec.label
        for i, x in enumerate(spec.values):
            vals = [r[(i, scheme)] for r in results]
            infeasible = sum(v is None for v in vals)
            good = np.array([v for v in vals if v is not None and not math.isnan(v)], dtype=float)
            if good.size:
                mean = float(good.mean())
                se = float(good.std(ddof=1) / math.sqrt(good.size)) if good.size > 1 else 0.0
            else:
                mean, se = math.nan, math.nan
            points.append(CurvePoint(spec.figure, name, spec.regime, float(x), mean, se,
                                     int(good.size), infeasible))
    return points


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> list[CurvePoint]:
    """Average every scheme at every sweep value over the spec's trials."""
    if spec.sweep == "p0" and spec.regime != "limited":
        raise ConfigError("the p0 sweep is defined for the limited regime")
    return _reduce(spec, _collect(spec, threads))


def run_pd_vs_p0(spec: ExperimentSpec, threads: int = 1) -> list[CurvePoint]:
    if spec.sweep != "p0":
        raise ConfigError("run_pd_vs_p0 needs a p0 sweep")
    return run_experiment(spec, threads)


def run_tradeoff(spec: ExperimentSpec, threads: int = 1) -> list[CurvePoint]:
    if spec.sweep != "comm_share":
        raise ConfigError("run_tradeoff needs a comm_share sweep")
    return run_experiment(spec, threads)


# figure registry --------------------------------------------------------------

FIGURE_AXES = {
    "fig2": ("p0 / P_max", "average local P_D"),
    "fig3": ("P_max (dBm)", "P_D"),
    "fig4": ("step / P_max", "value"),
    "fig5": ("communication share of P_max", "value"),
    "fig6": ("sigma_rcs^2 (dB)", "P_D"),
    "fig7": ("P_max (dBm)", "P_D"),
    "fig8": ("R", "P_D"),
    "fig9": ("K", "P_D"),
    "fig10": ("sigma_rcs^2 (dB)", "P_D"),
    "fig11": ("R", "P_D"),
}
FIGURES = tuple(FIGURE_AXES)


def figure_specs(figure: str, config: ScenarioConfig, trials: int | None = None,
                 seed: int | None = None) -> list[ExperimentSpec]:
    """Experiment specs that regenerate one figure."""
    if figure not in FIGURE_AXES:
        raise ConfigError(f"unknown figure {figure!r}; choose from {', '.join(FIGURES)}")
    n = config.trials if trials is None else trials
    s = config.seed if seed is None else seed
    sig = tuple(range(-22, -15))

    def make(**kw):
        return ExperimentSpec(figure=figure, trials=n, seed=s, config=kw.pop("config", config), **kw)

    if figure == "fig2":
        step = config.delta_p_frac
        values = tuple(np.round(np.arange(0.0, 1.0 + step / 2, step), 12))
        return [make(sweep="p0", values=values, schemes=("pd_hat",), regime="limited")]
    if figure == "fig3":
        return [make(sweep="p_max_dbm", values=tuple(range(24, 37, 2)),
                     schemes=("algorithm1", "upper_bound"), regime="limited")]
    if figure == "fig4":
        return [make(sweep="delta_p", values=(0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1),
                     schemes=("runtime_ms", "iterations", "total_rho_db"), regime="limited")]
    if figure == "fig5":
        return [make(sweep="comm_share", values=tuple(np.round(np.linspace(0, 1, 11), 12)),
                     schemes=("max_gamma", "rho"))]
    if figure == "fig6":
        return [make(sweep="sigma_rcs_db", values=sig, schemes=SCHEMES)]
    if figure == "fig7":
        return [make(sweep="p_max_dbm", values=tuple(range(24, 37, 2)), schemes=SCHEMES)]
    if figure == "fig8":
        return [make(sweep="R", values=tuple(range(1, 11)), schemes=SCHEMES)]
    if figure == "fig9":
        return [make(sweep="K", values=tuple(range(2, 15, 2)), schemes=SCHEMES,
                     config=config.replace(p_max_dbm=33.0))]
    if figure == "fig10":
        schemes = ("iaps", "active", "passive")
        return [make(sweep="sigma_rcs_db", values=sig, schemes=schemes, regime=reg) for reg in REGIMES]
    # fig11
    return [make(sweep="R", values=tuple(range(1, 11)), schemes=("iaps", "active", "passive"),
                 regime="limited", config=config.replace(sigma_rcs_db=float(v)),
                 label=f"[sigma_rcs_db={v}]") for v in (-20, -19, -18)]


def run_figure(figure: str, config: ScenarioConfig, trials: int | None = None, seed: int | None = None,
               threads: int = 1) -> list[CurvePoint]:
    points = []
    for spec in figure_specs(figure, config, trials, seed):
        points += run_experiment(spec, threads)
    return points


# output -------------------------------------------------------------------------

def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def emit_csv(curves: list[CurvePoint], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for pt in curves:
            w.writerow([_fmt(getattr(pt, c)) for c in CSV_COLUMNS])


def read_csv(path: str | Path) -> list[CurvePoint]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError("CSV header does not match the curve schema")
    out = []
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_COLUMNS):
            raise ValueError(f"line {n}: expected {len(CSV_COLUMNS)} columns")
        try:
            out.append(CurvePoint(row[0], row[1], row[2], float(row[3]), float(row[4]), float(row[5]),
                                  int(row[6]), int(row[7])))
        except ValueError as exc:
            raise ValueError(f"line {n}: {exc}") from exc
    return out


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
            "#7f7f7f", "#bcbd22", "#17becf")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def emit_plot(csv_path: str | Path, out_path: str | Path) -> None:
    """Render the curves of a CSV file as a standalone SVG line chart."""
    points = read_csv(csv_path)
    series: dict[str, list[CurvePoint]] = {}
    regimes = {p.regime for p in points}
    for p in points:
        name = p.scheme if len(regimes) == 1 else f"{p.scheme} ({p.regime})"
        series.setdefault(name, []).append(p)
    figure = points[0].figure if points else ""
    xlabel, ylabel = FIGURE_AXES.get(figure, ("x", "value"))

    W, H, left, right, top, bottom = 720, 440, 70, 200, 30, 50
    pw, ph = W - left - right, H - top - bottom
    xs = [p.x for p in points if math.isfinite(p.x)]
    ys = [p.mean for p in points if math.isfinite(p.mean)]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.2f}" y1="{top + ph}" x2="{sx(t):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 5}" y1="{sy(t):.2f}" x2="{left}" y2="{sy(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{sy(t) + 4:.2f}" font-size="11" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{H - 10}" font-size="13" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="15" y="{top + ph / 2:.2f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2:.2f})">{ylabel}</text>')
    for n, (name, pts) in enumerate(series.items()):
        color = _PALETTE[n % len(_PALETTE)]
        good = sorted((p.x, p.mean) for p in pts if math.isfinite(p.mean))
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in good)
        if len(good) > 1:
            out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in good:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        ly = top + 15 + 18 * n
        out.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 35}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text class="legend" x="{left + pw + 40}" y="{ly + 4}" font-size="11">{_escape(name)}</text>')
    out.append("</svg>")
    Path(out_path).write_text("\n".join(out) + "\n", encoding="utf-8")


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
