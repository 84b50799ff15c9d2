"""Command-line entry point: ``iaps <verb> [flags]``.

Exit codes: 0 success, 1 configuration or usage error (and failed
self-test), 2 when more than half of the Monte Carlo trials were
infeasible.  Errors go to standard error prefixed with ``iaps-error:``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from iaps import __version__
from iaps.config import ConfigError, ScenarioConfig, apply_overrides
from iaps.experiments import (
    FIGURES,
    ExperimentSpec,
    emit_csv,
    emit_plot,
    run_experiment,
    run_figure,
)

PREFIX = "iaps-error:"
DEFAULT_OUT = "iaps-out"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{PREFIX} usage: {message}", file=sys.stderr)
        raise SystemExit(1)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON scenario config (flat, or with 'scenario'/'experiment' keys)")
    p.add_argument("--out", help="output directory (default: $IAPS_OUT or ./iaps-out)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config field; repeatable")
    p.add_argument("--trials", type=int, help="Monte Carlo trials")
    p.add_argument("--seed", type=int, help="master RNG seed")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker processes")
    p.add_argument("--figure", help=f"figure id ({', '.join(FIGURES)}) or 'all'")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iaps", description="Integrated active and passive sensing simulator")
    parser.add_argument("--version", action="version", version=f"iaps {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    for verb, text in (("gen-scenario", "export layouts and channels as CSV"),
                       ("run", "run figure experiments and write curve CSVs"),
                       ("plot", "render curve CSVs as SVG"),
                       ("selftest", "run the built-in property suite"),
                       ("oracle", "write independent reference tables")):
        _common(sub.add_parser(verb, help=text, description=text))
    return parser


def _load(args) -> tuple[ScenarioConfig, dict | None]:
    experiment = None
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if isinstance(data, dict) and ("scenario" in data or "experiment" in data):
            extra = sorted(set(data) - {"scenario", "experiment"})
            if extra:
                raise ConfigError(f"unknown top-level keys: {', '.join(extra)}")
            config = ScenarioConfig.from_dict(data.get("scenario", {}))
            experiment = data.get("experiment")
            if experiment is not None and not isinstance(experiment, dict):
                raise ConfigError("'experiment' must be a JSON object")
        else:
            config = ScenarioConfig.from_dict(data)
    else:
        config = ScenarioConfig()
    config = apply_overrides(config, args.overrides)
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["seed"] = args.seed
    if changes:
        try:
            config = config.replace(**changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return config, experiment


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("IAPS_OUT") or DEFAULT_OUT)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, verb: str, config: ScenarioConfig, argv: list[str], outputs: list[Path],
                    extra: dict | None = None) -> None:
    manifest = {
        "verb": verb,
        "argv": argv,
        "config": config.to_dict(),
        "config_sha256": config.digest(),
        "seed": config.seed,
        "trials": config.trials,
        "versions": {"iaps": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "outputs": {p.name: _sha(p) for p in outputs},
    }
    if extra:
        manifest.update(extra)
    name = "manifest.json" if verb != "run" else f"manifest-{extra.get('name', 'run')}.json"
    (out / name).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _figures(arg: str | None) -> list[str]:
    if arg is None:
        raise ConfigError("--figure is required")
    if arg == "all":
        return list(FIGURES)
    if arg not in FIGURES:
        raise ConfigError(f"unknown figure {arg!r}; choose from {', '.join(FIGURES)} or all")
    return [arg]


def _cmd_run(args, config, experiment, argv) -> int:
    out = _out_dir(args)
    worst = 0.0
    jobs = []
    if experiment is not None and args.figure is None:
        spec_data = dict(experiment)
        spec_data.setdefault("trials", config.trials)
        spec_data.setdefault("seed", config.seed)
        if args.trials is not None:
            spec_data["trials"] = args.trials
        if args.seed is not None:
            spec_data["seed"] = args.seed
        spec = ExperimentSpec.from_dict(spec_data, config)
        jobs.append((spec.figure, lambda s=spec: run_experiment(s, args.threads)))
    else:
        for fig in _figures(args.figure):
            jobs.append((fig, lambda f=fig: run_figure(f, config, threads=args.threads)))
    for name, job in jobs:
        points = job()
        path = out / f"{name}.csv"
        emit_csv(points, path)
        used = sum(p.trials for p in points)
        bad = sum(p.infeasible_count for p in points)
        frac = bad / (used + bad) if used + bad else 0.0
        worst = max(worst, frac)
        _write_manifest(out, "run", config, argv, [path], {"name": name, "figure": name,
                                                           "infeasible_fraction": frac})
        print(f"wrote {path} ({len(points)} points, infeasible fraction {frac:.3f})")
    if worst > 0.5:
        print(f"{PREFIX} infeasible: {worst:.1%} of trials had no feasible allocation", file=sys.stderr)
        return 2
    return 0


def _cmd_plot(args, config, argv) -> int:
    out = _out_dir(args)
    if args.figure is None:
        csvs = sorted(out.glob("fig*.csv"))
        if not csvs:
            raise ConfigError(f"no figure CSVs in {out}")
    else:
        csvs = [out / f"{f}.csv" for f in _figures(args.figure)]
    written = []
    for path in csvs:
        if not path.exists():
            raise ConfigError(f"missing {path}; run the figure first")
        target = path.with_suffix(".svg")
        try:
            emit_plot(path, target)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        written.append(target)
        print(f"wrote {target}")
    return 0


def _cmd_gen(args, config, argv) -> int:
    from iaps.scenario import TrialStreams, draw_channels, export_channels_csv, export_layout_csv, generate_layout

    out = _out_dir(args) / "scenario"
    out.mkdir(parents=True, exist_ok=True)
    n = args.trials if args.trials is not None else 1
    written = []
    for t in range(n):
        streams = TrialStreams(config.seed, t)
        layout = generate_layout(config, streams)
        channels = draw_channels(layout, config, streams)
        lp = out / f"trial{t:04d}_layout.csv"
        cp = out / f"trial{t:04d}_channels.csv"
        export_layout_csv(layout, lp)
        export_channels_csv(channels, cp)
        written += [lp, cp]
    _write_manifest(out, "gen-scenario", config, argv, written)
    print(f"wrote {len(written)} files to {out}")
    return 0


def _cmd_selftest() -> int:
    from iaps.checks import run_checks

    failed = 0
    for res in run_checks():
        print(f"{'PASS' if res.passed else 'FAIL'} {res.name}: {res.detail}")
        failed += not res.passed
    if failed:
        print(f"{PREFIX} selftest: {failed} check(s) failed", file=sys.stderr)
        return 1
    return 0


def _cmd_oracle(args, config, argv) -> int:
    from iaps.oracles import write_all

    out = _out_dir(args) / "oracles"
    sums = write_all(out)
    for name, digest in sorted(sums.items()):
        print(f"{digest}  {name}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        config, experiment = _load(args)
        if args.verb == "run":
            return _cmd_run(args, config, experiment, argv)
        if args.verb == "plot":
            return _cmd_plot(args, config, argv)
        if args.verb == "gen-scenario":
            return _cmd_gen(args, config, argv)
        if args.verb == "selftest":
            return _cmd_selftest()
        return _cmd_oracle(args, config, argv)
    except ConfigError as exc:
        print(f"{PREFIX} config: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{PREFIX} io: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
