"""Steering delay analysis, TDNN error prediction and compensated path-tracking runs.

Subcommands: analyze, generate, train, simulate, compare, replay.
Data goes to stdout or ``--out``; diagnostics go to stderr.  Every command
that writes a file also writes ``<out>.manifest`` recording the resolved
arguments, seed and input hashes; ``steercomp replay`` re-runs it.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import predictor as tdnn
from .config import dump_scenario, load_scenario
from .errors import ConfigurationError, SteercompError
from .features import (
    CANDIDATE_FEATURES,
    build_feature_matrix,
    center_and_covariance,
    estimate_delay,
    pca,
    segment_rmse,
)
from .metrics import improvement, tracking_metrics
from .plant import EXCITATIONS, ScenarioConfig, export_simlog, read_simlog, run_simulation, simulate_training_log
from .telemetry import export_csv, ingest_csv

SEED_ENV = "STEERCOMP_SEED"
MANIFEST_SUFFIX = ".manifest"


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def resolve_seed(cli_seed: int | None, default: int = 0) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ConfigurationError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return default if cli_seed is None else cli_seed


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(v: float) -> str:
    return format(v, ".12g")


def write_manifest(out: str, argv: list[str], seed: int | None, inputs: dict[str, str],
                   scenario: ScenarioConfig | None = None, extra: dict | None = None) -> Path:
    run = {
        "version": __version__,
        "argv": json.dumps(argv),
        "seed": "" if seed is None else str(seed),
        "output": Path(out).name,
        "output_sha256": _sha256(out),
    }
    for name, path in inputs.items():
        run[f"input.{name}"] = str(path)
        run[f"input.{name}.sha256"] = _sha256(path)
    run.update(extra or {})
    path = Path(out + MANIFEST_SUFFIX)
    if scenario is not None:
        path.write_text(dump_scenario(scenario, {"run": run}))
    else:
        parser = configparser.ConfigParser(interpolation=None)
        parser["run"] = run
        buf = io.StringIO()
        parser.write(buf)
        path.write_text(buf.getvalue())
    return path


# --- analyze -----------------------------------------------------------------------


def cmd_analyze(args) -> int:
    log = ingest_csv(args.input, args.sample_period)
    if args.what == "pca":
        names = args.features or [
            n for n in CANDIDATE_FEATURES if np.all(np.isfinite(log.column(n)))
        ]
        fm = build_feature_matrix(log, names)
        _, cov = center_and_covariance(fm)
        res = pca(cov, args.top_k, names)
        rows = []
        for i, (lam, cr) in enumerate(zip(res.eigenvalues, res.contribution_rates)):
            lead = names[int(np.argmax(np.abs(res.eigenvectors[:, i])))]
            rows.append(["component", i + 1, lead, _g(lam), f"{100 * cr:.2f}", "", ""])
        for rank, j in enumerate(np.argsort(-res.feature_scores, kind="stable")):
            rows.append(["feature", rank + 1, names[j], "", "", f"{100 * res.feature_scores[j]:.2f}",
                         "yes" if j in res.selected else "no"])
        text = _csv_text(["table", "rank", "feature", "eigenvalue", "contribution_pct",
                          "feature_score_pct", "selected"], rows)
        _emit(text, args.out)
        print("selected=" + ",".join(res.selected_names()), file=sys.stderr)
    elif args.what == "delay":
        step = args.step if args.step is not None else log.sample_period
        scan = estimate_delay(log.column("steer_cmd"), log.column("steer_meas"),
                              args.max_shift, step, log.sample_period)
        text = _csv_text(["shift", "rmse"], [[f"{s:.3f}", _g(r)] for s, r in zip(scan.shifts, scan.rmse_at_shift)])
        summary = (f"best_shift={scan.best_shift:.3f}\nbest_rmse={_g(scan.best_rmse)}\n"
                   f"rmse_at_zero={_g(scan.rmse_at_zero)}\nratio={scan.ratio:.4f}\n")
        if args.out:
            _emit(text, args.out)
            sys.stdout.write(summary)
        else:
            sys.stdout.write(text + summary)
    else:
        seg = segment_rmse(log.column("steer_cmd"), log.column("steer_meas"), args.threshold)

        def na(v):
            return "NA" if v is None else _g(v)

        text = (f"rmse_straight={na(seg.straight)}\nrmse_curve={na(seg.curve)}\n"
                f"rmse_total={_g(seg.total)}\ncount_straight={seg.count_straight}\n"
                f"count_curve={seg.count_curve}\n")
        _emit(text, args.out)
    if args.out:
        write_manifest(args.out, args.argv, None, {"log": args.input})
    return 0


# --- generate / train ----------------------------------------------------------------


def _scenario_from_args(args) -> ScenarioConfig:
    config = load_scenario(args.config) if args.config else ScenarioConfig()
    seed = resolve_seed(args.seed, config.seed)
    return replace(config, seed=seed)


def cmd_generate(args) -> int:
    config = _scenario_from_args(args)
    log = simulate_training_log(config, args.excitation, args.min_samples)
    export_csv(log, args.out)
    write_manifest(args.out, args.argv, config.seed, {}, scenario=config)
    return 0


def cmd_train(args) -> int:
    log = ingest_csv(args.input, args.sample_period)
    seed = resolve_seed(args.seed)
    features = tuple(args.features) if args.features else tdnn.DEFAULT_FEATURES
    config = tdnn.TdnnConfig(
        taps=args.taps, tap_spacing=log.sample_period, horizon_steps=args.horizon,
        feature_count=len(features), learning_rate=args.lr, epochs=args.epochs, seed=seed,
    )
    dataset = tdnn.assemble_dataset(log, features, config)
    ensemble, reports = tdnn.train_ensemble(dataset, config, args.restarts)
    predictor = ensemble if args.restarts > 1 else ensemble.members[0]
    tdnn.save(predictor, args.out)

    report = args.report or args.out + ".report.csv"
    rows = []
    for i, (m, r) in enumerate(zip(ensemble.members, reports)):
        rows.append([str(i), str(m.config.seed), _g(r.final_loss), _g(r.train_cc), _g(r.train_ce),
                     _g(r.holdout_cc), _g(r.holdout_ce), "yes" if r.converged else "no"])
    tcc, tce = tdnn.evaluate(ensemble, dataset, "train")
    hcc, hce = tdnn.evaluate(ensemble, dataset, "holdout")
    rows.append(["ensemble", "", "", _g(tcc), _g(tce), _g(hcc), _g(hce), ""])
    Path(report).write_text(_csv_text(
        ["member", "seed", "final_loss", "train_cc", "train_ce", "holdout_cc", "holdout_ce", "converged"], rows))
    curves = np.array([r.loss_curve for r in reports]).T
    loss_path = report[: -len(".csv")] + ".loss.csv" if report.endswith(".csv") else report + ".loss.csv"
    Path(loss_path).write_text(_csv_text(
        ["epoch", *[f"member_{i}" for i in range(len(reports))]],
        ([str(e), *(_g(v) for v in row)] for e, row in enumerate(curves))))
    write_manifest(args.out, args.argv, seed, {"log": args.input},
                   extra={"report": Path(report).name, "report_sha256": _sha256(report)})
    print(f"ensemble holdout cc={hcc:.4f} ce={hce:.4f} ({len(dataset)} samples, "
          f"{dataset.train_count} train)", file=sys.stderr)
    return 0


# --- simulate / compare ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    config = _scenario_from_args(args)
    if args.compensator is not None:
        config = replace(config, compensator_enabled=args.compensator == "on")
    if args.model:
        config = replace(config, model_path=args.model)
    if args.duration is not None:
        config = replace(config, duration=args.duration)
    if config.compensator_enabled and not config.model_path:
        raise ConfigurationError("--compensator on requires --model (or [compensator] model)")
    if not config.compensator_enabled:
        config = replace(config, model_path=None)
    log = run_simulation(config)
    export_simlog(log, args.out)
    inputs = {"model": config.model_path} if config.model_path else {}
    write_manifest(args.out, args.argv, config.seed, inputs, scenario=config,
                   extra={"path_fingerprint": log.path_fingerprint,
                          "completed": "true" if log.completed else "false"})
    return 0


def _read_manifest(log_path: str) -> configparser.ConfigParser | None:
    path = Path(log_path + MANIFEST_SUFFIX)
    if not path.exists():
        return None
    parser = configparser.ConfigParser(interpolation=None)
    parser.read(path)
    return parser


def cmd_compare(args) -> int:
    fps = []
    for p in (args.baseline, args.optimized):
        if not Path(p).exists():
            raise FileNotFoundError(f"no such file: {p}")
        man = _read_manifest(p)
        if man is not None and man.has_option("run", "path_fingerprint"):
            fps.append(man.get("run", "path_fingerprint"))
    if len(fps) == 2 and fps[0] != fps[1]:
        raise ConfigurationError("logs were recorded on different paths (path fingerprints differ)")
    a = tracking_metrics(read_simlog(args.baseline))
    b = tracking_metrics(read_simlog(args.optimized))
    rows = []
    for key in ("max_tracking_error", "oscillation_index", "rmse"):
        va, vb = getattr(a, key), getattr(b, key)
        rows.append([key, _g(va), _g(vb), f"{100 * improvement(va, vb):.1f}"])
    rows.append(["sample_count", str(a.sample_count), str(b.sample_count), ""])
    rows.append(["steer_reversals", str(a.steer_reversals), str(b.steer_reversals), ""])
    text = _csv_text(["metric", "baseline", "optimized", "improvement_pct"], rows)
    human = "\n".join(
        f"{r[0]:<20} {r[1]:>14} {r[2]:>14}" + (f"  {r[3]:>6}%" if r[3] else "") for r in rows
    ) + "\n"
    if args.out:
        _emit(text, args.out)
        sys.stdout.write(human)
        write_manifest(args.out, args.argv, None, {"baseline": args.baseline, "optimized": args.optimized})
    else:
        sys.stdout.write(text)
        sys.stderr.write(human)
    return 0


# --- replay ------------------------------------------------------------------------------


def cmd_replay(args) -> int:
    parser = configparser.ConfigParser(interpolation=None)
    if not Path(args.manifest).exists():
        raise FileNotFoundError(f"no such manifest: {args.manifest}")
    parser.read(args.manifest)
    if not parser.has_section("run"):
        raise ConfigurationError(f"{args.manifest}: no [run] section")
    run = parser["run"]
    for key, value in run.items():
        if key.startswith("input.") and key.endswith(".sha256"):
            src = run[key[: -len(".sha256")]]
            if not Path(src).exists() or _sha256(src) != value:
                raise ConfigurationError(f"input {src} is missing or changed since the recorded run")
    argv = json.loads(run["argv"])
    argv = _replace_flag(argv, "--out", args.out)
    if argv and argv[0] in ("simulate", "generate"):
        # the manifest embeds the fully resolved scenario
        argv = _replace_flag(argv, "--config", args.manifest)
    if run.get("seed"):
        argv = _replace_flag(argv, "--seed", run["seed"])
    env_seed = os.environ.pop(SEED_ENV, None)
    try:
        return main(argv)
    finally:
        if env_seed is not None:
            os.environ[SEED_ENV] = env_seed


def _replace_flag(argv: list[str], flag: str, value: str) -> list[str]:
    out = list(argv)
    if flag in out:
        out[out.index(flag) + 1] = value
    elif flag == "--out" or out[0] in ("simulate", "generate", "train"):
        out += [flag, value]
    return out


# --- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="steercomp", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="PCA, delay scan or straight/curve split of a telemetry CSV")
    asub = a.add_subparsers(dest="what", required=True)
    for name in ("pca", "delay", "segment"):
        s = asub.add_parser(name)
        s.add_argument("--input", required=True)
        s.add_argument("--out")
        s.add_argument("--sample-period", type=float, default=0.05)
        if name == "pca":
            s.add_argument("--top-k", type=int, default=3)
            s.add_argument("--features", nargs="+")
        elif name == "delay":
            s.add_argument("--max-shift", type=float, default=0.4)
            s.add_argument("--step", type=float, default=None,
                           help="shift increment (default: the log's sample period)")
        else:
            s.add_argument("--threshold", type=float, default=0.2)
        s.set_defaults(func=cmd_analyze)

    g = sub.add_parser("generate", help="simulate a compensator-off training log")
    g.add_argument("--excitation", choices=EXCITATIONS, default="mixed")
    g.add_argument("--config")
    g.add_argument("--seed", type=int)
    g.add_argument("--min-samples", type=int, default=6000)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a TDNN ensemble on a telemetry CSV")
    t.add_argument("--input", required=True)
    t.add_argument("--taps", type=int, default=5)
    t.add_argument("--horizon", type=int, default=4)
    t.add_argument("--restarts", type=int, default=10)
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--features", nargs="+")
    t.add_argument("--seed", type=int)
    t.add_argument("--sample-period", type=float, default=0.05)
    t.add_argument("--report")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("simulate", help="closed-loop double-lane-change run")
    s.add_argument("--config")
    s.add_argument("--compensator", choices=("on", "off"))
    s.add_argument("--model")
    s.add_argument("--seed", type=int)
    s.add_argument("--duration", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="tracking metrics of a baseline vs an optimized run")
    c.add_argument("baseline")
    c.add_argument("optimized")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    r = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    r.add_argument("manifest")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except (SteercompError, OSError) as exc:
        print(f"steercomp: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
