"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Settings resolve as command-line flags > ``--config`` JSON file > defaults, and
the effective settings are written to ``config.json`` in the output directory.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

from . import __version__
from .classification import LDA_RIDGE, format_report, save_model
from .dataset import read_feature_csv
from .errors import DataError, FeatureExtractionError, GaitError, NumericalError
from .features import FEATURE_NAMES
from .filtering import CUTOFF_HZ, ORDER
from .grading import SCHEMES, correlation_summary, grade_svg, grades_csv, save_grading
from .io import load_manifest, load_trial, write_json_atomic, write_text_atomic
from .kalman import KalmanConfig
from .kinematics import KinematicsConfig
from .pipeline import extract_manifest, grade_cohort, train_and_evaluate, windowed_csv, windowed_rows
from .selection import DEFAULT_ALPHA, DEFAULT_K, load_selection, save_selection, select_features
from .synthetic import FIXTURES, fixture_plans, write_cohort

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    jobs: int = 1
    output: str = "out"
    # preprocessing
    filter_cutoff: float = CUTOFF_HZ
    filter_order: int = ORDER
    orientation_gain: float = 0.1
    kf_q_angle: float = 1e-4
    kf_q_bias: float = 1e-6
    kf_r: float = 0.5
    # statistics
    alpha: float = DEFAULT_ALPHA
    k: int = DEFAULT_K
    pca_m: Optional[int] = None
    lda_ridge: float = LDA_RIDGE
    per_trial: bool = False
    scheme: str = "all"
    # extraction mode
    mode: str = "batch"
    window_s: float = 4.0
    hop_s: float = 2.0
    # fixtures
    cohort: str = "easy"
    duration: float = 10.0
    trials: int = 7

    def validate(self) -> None:
        checks = [
            (self.jobs >= 1, "jobs must be >= 1"),
            (0.0 < self.filter_cutoff < 50.0, "filter_cutoff must lie in (0, 50) Hz for 100 Hz data"),
            (1 <= self.filter_order <= 10, "filter_order must lie in 1..10"),
            (self.orientation_gain > 0.0, "orientation_gain must be positive"),
            (min(self.kf_q_angle, self.kf_q_bias, self.kf_r) > 0.0, "Kalman noise terms must be positive"),
            (0.0 < self.alpha < 1.0, "alpha must lie in (0, 1)"),
            (self.k >= 1, "k must be >= 1"),
            (self.pca_m is None or self.pca_m >= 1, "pca_m must be >= 1"),
            (self.lda_ridge > 0.0, "lda_ridge must be positive"),
            (self.scheme in SCHEMES + ("all",), f"scheme must be one of {', '.join(SCHEMES)}, all"),
            (self.mode in ("batch", "windowed"), "mode must be batch or windowed"),
            (self.window_s > 0.0 and self.hop_s > 0.0, "window_s and hop_s must be positive"),
            (self.cohort in tuple(FIXTURES) + ("all",), f"cohort must be one of {', '.join(FIXTURES)}, all"),
            (self.duration >= 5.0, "duration must be >= 5 s"),
            (self.trials >= 1, "trials must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise UsageError(msg)

    def kinematics(self) -> KinematicsConfig:
        return KinematicsConfig(
            orientation_gain=self.orientation_gain,
            kalman=KalmanConfig(q_angle=self.kf_q_angle, q_bias=self.kf_q_bias, r=self.kf_r),
            filter_cutoff=self.filter_cutoff, filter_order=self.filter_order,
        )

    @property
    def schemes(self) -> tuple:
        return SCHEMES if self.scheme == "all" else (self.scheme,)


CONFIG_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(name: str, value):
    default = getattr(RunConfig, name, None)
    if value is None:
        return None
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int) or name == "pca_m":
            if isinstance(value, bool) or int(value) != value:
                raise TypeError
            return int(value)
        if isinstance(default, float):
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise UsageError(f"config value for {name!r} has the wrong type: {value!r}") from None


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = sorted(set(raw) - set(CONFIG_FIELDS))
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    return {k: _coerce(k, v) for k, v in raw.items()}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = replace(cfg, **load_config_file(args.config))
    flags = {k: v for k, v in vars(args).items() if k in CONFIG_FIELDS and v is not None}
    cfg = replace(cfg, **flags)
    cfg.validate()
    return cfg


# --- commands ----------------------------------------------------------------------------

def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg: RunConfig, out: Path, command: str) -> None:
    write_json_atomic(out / "config.json", {"command": command, "version": __version__, **asdict(cfg)})


def cmd_fixtures(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    kinds = tuple(FIXTURES) if cfg.cohort == "all" else (cfg.cohort,)
    for kind in kinds:
        plans = fixture_plans(kind, cfg.seed, trials_per_subject=cfg.trials)
        _, path = write_cohort(out / kind, plans, cfg.duration)
        print(path.as_posix())
    _echo_config(cfg, out, "fixtures")
    return EXIT_OK


def _report_failures(failures, out: Path) -> None:
    write_json_atomic(out / "failures.json", [f.to_dict() for f in failures])
    for f in failures:
        print(f"error: trial {f.trial_id} ({f.path}): {f.error}: {f.message}", file=sys.stderr)


def cmd_extract(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    manifest = load_manifest(args.manifest)
    manifest.validate()
    _echo_config(cfg, out, "extract")
    if cfg.mode == "windowed":
        rows = []
        for e in manifest:
            trial = load_trial(e.trial, e.sidecar)
            rows.extend(windowed_rows(trial, e.split, cfg.window_s, cfg.hop_s, cfg.kinematics()))
        path = out / "features_windowed.csv"
        write_text_atomic(path, windowed_csv(rows))
        print(path.as_posix())
        return EXIT_OK
    result = extract_manifest(manifest, cfg.kinematics(), cfg.jobs)
    path = out / "features.csv"
    if result.failures:
        _report_failures(result.failures, out)
        if not args.allow_failures:
            return result.exit_code
    write_text_atomic(path, result.table.to_csv())
    print(path.as_posix())
    return EXIT_OK


def _selection(cfg: RunConfig, args, table):
    if getattr(args, "selection", None):
        return load_selection(args.selection)
    return select_features(table.split("train").subject_matrix(), cfg.alpha, cfg.k)


def cmd_select(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    table = read_feature_csv(args.features)
    sel = _selection(cfg, args, table)
    _echo_config(cfg, out, "select")
    save_selection(sel, out / "selection.json")
    print(f"{len(sel)} feature(s) selected")
    for f in sel.features:
        print(f"  {f.name:<32} p={f.p:.3g} snr={f.snr:+.3f}")
    return EXIT_OK


def cmd_train_eval(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    table = read_feature_csv(args.features)
    sel = _selection(cfg, args, table)
    res = train_and_evaluate(table, cfg.alpha, cfg.k, cfg.pca_m, cfg.per_trial, cfg.lda_ridge, sel)
    _echo_config(cfg, out, "train-eval")
    save_selection(res.selection, out / "selection.json")
    for kind, model in res.models.items():
        save_model(model, out / "models" / f"{kind.lower()}.json")
    report = {kind: r.to_dict() for kind, r in res.reports.items()}
    report["n_train"], report["n_test"] = len(res.train), len(res.test)
    write_json_atomic(out / "evaluation.json", report)
    table_txt = format_report(res.reports)
    write_text_atomic(out / "evaluation.txt", table_txt)
    print(table_txt, end="")
    return EXIT_OK


def _grade(cfg: RunConfig, args, table, sel, out: Path) -> dict:
    split = None if args.split == "all" else args.split
    graded = grade_cohort(table, sel, cfg.schemes, grade_split=split, ridge=cfg.lda_ridge)
    records, summary = [], {}
    for scheme, (model, recs) in graded.items():
        save_grading(model, out / "grading" / f"{scheme.lower()}.json")
        records.extend(recs)
        summary[scheme] = {"g_min": model.g_min, "g_avg": model.g_avg, "g_max": model.g_max,
                           **correlation_summary(recs)}
        if args.svg:
            write_text_atomic(out / f"grades_{scheme.lower()}.svg", grade_svg(recs, model))
    write_text_atomic(out / "grades.csv", grades_csv(records))
    write_json_atomic(out / "grading_summary.json", summary)
    return summary


def cmd_grade(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    table = read_feature_csv(args.features)
    sel = _selection(cfg, args, table)
    _echo_config(cfg, out, "grade")
    summary = _grade(cfg, args, table, sel, out)
    for scheme, s in summary.items():
        r = "n/a" if s["pearson_r"] is None else f"{s['pearson_r']:.3f}"
        print(f"{scheme:<4} r={r}  band=[{s['g_min']:.3f}, {s['g_max']:.3f}]")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args) -> int:
    """Extraction, selection, classification and grading in one go."""
    out = _out(cfg)
    manifest = load_manifest(args.manifest)
    manifest.validate()
    result = extract_manifest(manifest, cfg.kinematics(), cfg.jobs)
    if result.failures:
        _report_failures(result.failures, out)
        if not args.allow_failures:
            return result.exit_code
    write_text_atomic(out / "features.csv", result.table.to_csv())
    args.features = str(out / "features.csv")
    args.selection = None
    code = cmd_train_eval(cfg, args)
    cmd_grade(cfg, args)
    _echo_config(cfg, out, "report")
    return code


COMMANDS = {
    "fixtures": cmd_fixtures, "extract": cmd_extract, "select": cmd_select,
    "train-eval": cmd_train_eval, "grade": cmd_grade, "report": cmd_report,
}


# --- argument parsing -------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="JSON file of settings (overridden by flags)")
    p.add_argument("--seed", type=int, default=d, help="random seed for fixtures (default 0)")
    p.add_argument("--jobs", type=int, default=d, help="parallel trial workers (default 1)")
    p.add_argument("--output", default=d, help="output directory (default ./out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gaitrehab", description="Gait rehabilitation analysis from body-worn IMUs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        _global_flags(p, suppress=True)
        return p

    def stats_flags(p):
        p.add_argument("--features", required=True, help="feature CSV from 'extract'")
        p.add_argument("--selection", help="reuse a selection.json instead of selecting again")
        p.add_argument("--alpha", type=float, help="significance level (default 0.05)")
        p.add_argument("--k", type=int, help="number of features kept (default 26)")
        p.add_argument("--lda-ridge", dest="lda_ridge", type=float, help="relative LDA scatter ridge")

    def extract_flags(p):
        p.add_argument("--manifest", required=True, help="cohort manifest.json")
        p.add_argument("--allow-failures", action="store_true",
                       help="write rows for the trials that worked and exit 0")
        p.add_argument("--filter-cutoff", dest="filter_cutoff", type=float, help="low-pass cutoff in Hz (default 7)")
        p.add_argument("--filter-order", dest="filter_order", type=int, help="Butterworth order (default 4)")

    p = add("fixtures", "write the standard synthetic cohorts")
    p.add_argument("--cohort", choices=tuple(FIXTURES) + ("all",), help="which cohort (default easy)")
    p.add_argument("--duration", type=float, help="trial length in seconds (default 10)")
    p.add_argument("--trials", type=int, help="trials per subject (default 7)")

    p = add("extract", f"compute the {len(FEATURE_NAMES)}-feature table of a cohort")
    extract_flags(p)
    p.add_argument("--mode", choices=("batch", "windowed"), help="one row per trial or per window")
    p.add_argument("--window", dest="window_s", type=float, help="window length in seconds (windowed mode)")
    p.add_argument("--hop", dest="hop_s", type=float, help="window hop in seconds (windowed mode)")

    p = add("select", "rank features by t-test and SNR on the training subjects")
    stats_flags(p)

    p = add("train-eval", "train LDA, PCA and NB and evaluate them on the test split")
    stats_flags(p)
    p.add_argument("--pca-m", dest="pca_m", type=int, help="retained PCA components (default: 95%% variance)")
    p.add_argument("--per-trial", dest="per_trial", action="store_const", const=True,
                   help="train on trial rows instead of subject averages")

    def grade_flags(p):
        p.add_argument("--scheme", choices=SCHEMES + ("all",), help="weighting scheme (default all)")
        p.add_argument("--split", choices=("train", "test", "all"), default="all",
                       help="which subjects to grade (default all)")
        p.add_argument("--svg", action="store_true", help="also write grade-vs-days SVG plots")

    p = add("grade", "grade subjects and correlate grades with days after operation")
    stats_flags(p)
    grade_flags(p)

    p = add("report", "extract, train-eval and grade in one run")
    extract_flags(p)
    p.add_argument("--alpha", type=float, help="significance level (default 0.05)")
    p.add_argument("--k", type=int, help="number of features kept (default 26)")
    p.add_argument("--lda-ridge", dest="lda_ridge", type=float, help="relative LDA scatter ridge")
    p.add_argument("--pca-m", dest="pca_m", type=int, help="retained PCA components")
    p.add_argument("--per-trial", dest="per_trial", action="store_const", const=True,
                   help="train on trial rows instead of subject averages")
    grade_flags(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"gaitrehab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FeatureExtractionError as exc:
        print(f"gaitrehab: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except NumericalError as exc:
        print(f"gaitrehab: numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError) as exc:
        print(f"gaitrehab: data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GaitError as exc:
        print(f"gaitrehab: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
