"""Command-line front end: aggregate, evaluate, sweep, pr-curve, gen-fixtures, bounds."""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from tabulate import tabulate

from .aggregation import aggregate
from .config import Settings, settings
from .exceptions import ConfigError, EvaluationError
from .fixtures import dense_group_scenario, random_dataset, write_fixture_set
from .formats import (
    DETECTION_FORMATS,
    REPORT_FORMATS,
    detection_format_for,
    load_annotation_dir,
    load_detections,
    write_detections,
    write_report,
    write_source_lines,
)
from .geometry import max_pred_width, max_safe_inflation, max_tp_area_width, pixels_to_ground
from .matching import match_dataset, scheme_from_name
from .metrics import (
    average_precision,
    interpolated_curve,
    parse_threshold_grid,
    pr_curve,
    threshold_sweep,
)
from .processing import aggregate_images, evaluate_dataset, labels_from_annotations
from .reporting import box_count_table, log_metrics_summary, save_report, sweep_table
from .schemas import (
    AnnotationFile,
    BbaConfig,
    BbaMethod,
    Detection,
    DetectionFile,
    MergeStrategy,
    MetricsReport,
    MobConfig,
    PrPoint,
    SchemeParams,
    SweepRow,
)
from .setup import setup_logging
from .utils import parse_unbounded_float, parse_unbounded_int

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_MOB_FLAGS = ("mob_iou", "mob_iters", "mob_inflation", "mob_top_k", "mob_strategy")
_CUSTOM_FLAGS = ("eps", "gmax", "amin")


class RunConfig(BaseModel):
    """Resolved options of one CLI run."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    gt_dir: Optional[Path] = None
    det_file: Optional[Path] = None
    det_format: Optional[str] = None
    scheme_name: str = "sar-apd"
    scheme: SchemeParams = Field(default_factory=SchemeParams.sar_apd)
    bba: BbaConfig = Field(default_factory=BbaConfig)
    score_threshold: float = Field(0.0, ge=0.0, le=1.0)
    thresholds: List[float] = Field(default_factory=list)
    report_format: str = "json"
    output: Optional[Path] = None
    jobs: int = Field(1, ge=1)
    interpolated: bool = False
    timing: bool = True
    show_progress: bool = False


def _default_score_threshold(method: BbaMethod, cfg: Settings) -> float:
    if method == BbaMethod.NMS:
        return cfg.NMS_SCORE_THRESHOLD
    if method == BbaMethod.MOB:
        return cfg.MOB_SCORE_THRESHOLD
    return 0.0


def build_run_config(args: argparse.Namespace, cfg: Settings = settings) -> RunConfig:
    """Turn parsed arguments into a RunConfig, rejecting contradictory flags."""
    method = BbaMethod(args.bba)

    given_mob = [f for f in _MOB_FLAGS if getattr(args, f, None) is not None]
    if getattr(args, "mob_fixed_bound", False):
        given_mob.append("mob_fixed_bound")
    if given_mob and method != BbaMethod.MOB:
        flags = ", ".join("--" + f.replace("_", "-") for f in given_mob)
        raise ConfigError(f"{flags} require --bba mob")
    if getattr(args, "nms_iou", None) is not None and method != BbaMethod.NMS:
        raise ConfigError("--nms-iou requires --bba nms")

    given_custom = [f for f in _CUSTOM_FLAGS if getattr(args, f, None) is not None]
    try:
        if args.scheme == "custom":
            if args.eps is None:
                raise ConfigError("--scheme custom requires --eps")
            scheme = SchemeParams.custom(
                epsilon=args.eps,
                g_max=parse_unbounded_int(args.gmax) if args.gmax is not None else None,
                a_min=args.amin if args.amin is not None else 0.0,
            )
        else:
            if given_custom:
                flags = ", ".join("--" + f for f in given_custom)
                raise ConfigError(f"{flags} require --scheme custom")
            scheme = scheme_from_name(args.scheme)

        mob_config = MobConfig(
            omega=args.mob_iou if args.mob_iou is not None else cfg.MOB_IOU,
            m_max=args.mob_iters if args.mob_iters is not None else cfg.MOB_MAX_ITERATIONS,
            i_max=(
                parse_unbounded_float(args.mob_inflation)
                if args.mob_inflation is not None
                else cfg.MOB_MAX_INFLATION
            ),
            top_k=args.mob_top_k,
            merge_strategy=MergeStrategy(args.mob_strategy or MergeStrategy.ENCLOSE.value),
            fixed_area_bound=args.mob_fixed_bound,
        )
        bba = BbaConfig(
            method=method,
            nms_iou=args.nms_iou if args.nms_iou is not None else cfg.NMS_IOU,
            mob=mob_config,
        )
        thresholds = parse_threshold_grid(
            args.thresholds if getattr(args, "thresholds", None) else cfg.SWEEP_THRESHOLDS
        )
        return RunConfig(
            gt_dir=getattr(args, "gt_dir", None),
            det_file=args.detections,
            det_format=args.det_format,
            scheme_name=args.scheme,
            scheme=scheme,
            bba=bba,
            score_threshold=(
                args.score_threshold
                if args.score_threshold is not None
                else _default_score_threshold(method, cfg)
            ),
            thresholds=thresholds,
            report_format=args.format,
            output=args.output,
            jobs=args.jobs if args.jobs is not None else cfg.DEFAULT_JOBS,
            interpolated=getattr(args, "interpolated", False),
            timing=not getattr(args, "no_timing", False),
            show_progress=not args.quiet and sys.stderr.isatty(),
        )
    except (ValidationError, ValueError) as e:
        raise ConfigError(f"invalid option value: {e}") from e


def _pipeline_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--detections", type=Path, required=True, help="Detection dump (JSON lines or CSV)")
    parent.add_argument("--det-format", choices=DETECTION_FORMATS, help="Dump format (default: from suffix)")
    parent.add_argument("--bba", choices=[m.value for m in BbaMethod], default=BbaMethod.MOB.value,
                        help="Bounding box aggregation (default: mob)")
    parent.add_argument("--score-threshold", type=float,
                        help="Score threshold t_s (default: 0.25 for nms, 0.05 for mob, 0 for none)")
    parent.add_argument("--nms-iou", type=float, help="NMS IoU threshold (default: 0.5)")
    parent.add_argument("--mob-iou", type=float, help="MOB link IoU threshold omega (default: 0)")
    parent.add_argument("--mob-iters", type=int, help="Maximum MOB iterations (default: 3)")
    parent.add_argument("--mob-inflation", help="Maximum inflation factor, or 'inf' (default: 100)")
    parent.add_argument("--mob-top-k", type=int, help="Keep k best boxes per cluster")
    parent.add_argument("--mob-strategy", choices=[s.value for s in MergeStrategy], help="Merge strategy")
    parent.add_argument("--mob-fixed-bound", action="store_true",
                        help="Keep the area bound of the first MOB iteration")
    parent.add_argument("--output", type=Path, help="Output file (default: stdout)")
    parent.add_argument("--jobs", type=int, help="Parallel images (default: 1)")
    return parent


def _evaluation_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--gt-dir", type=Path, required=True, help="Directory of VOC XML annotations")
    parent.add_argument("--scheme", choices=["voc2012", "sar-apd", "custom"], default="sar-apd",
                        help="Evaluation scheme (default: sar-apd)")
    parent.add_argument("--eps", type=float, help="Custom scheme IoU threshold")
    parent.add_argument("--gmax", help="Custom scheme max labels per prediction, or 'inf'")
    parent.add_argument("--amin", type=float, help="Custom scheme minimum area ratio")
    parent.add_argument("--format", choices=REPORT_FORMATS, default="json", help="Report format")
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sar-apd-eval",
        description="Aggregate detector boxes (NMS, MOB) and evaluate them under VOC2012 or SAR-APD.",
    )
    parser.add_argument("--log-level", help="Log level (default: from settings)")
    parser.add_argument("--quiet", action="store_true", help="Hide progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    pipeline, evaluation = _pipeline_parent(), _evaluation_parent()

    agg = sub.add_parser("aggregate", parents=[pipeline], help="Aggregate a detection dump")
    agg.set_defaults(scheme="sar-apd", eps=None, gmax=None, amin=None, format="json")

    ev = sub.add_parser("evaluate", parents=[pipeline, evaluation], help="Compute PRC, RCL, AP")
    ev.add_argument("--no-timing", action="store_true", help="Omit the time per image")

    sw = sub.add_parser("sweep", parents=[pipeline, evaluation], help="Score threshold calibration")
    sw.add_argument("--thresholds", help="Grid lo:hi:step (default: 0.05:0.50:0.05)")

    pr = sub.add_parser("pr-curve", parents=[pipeline, evaluation], help="Precision-recall curve")
    pr.add_argument("--interpolated", action="store_true", help="Emit the monotone envelope")

    gen = sub.add_parser("gen-fixtures", help="Write a synthetic dataset")
    gen.add_argument("--output-dir", type=Path, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--images", type=int, default=101)
    gen.add_argument("--dets-per-image", type=int, default=10)
    gen.add_argument("--scenario", choices=["random", "group"], default="random")
    gen.add_argument("--det-format", choices=DETECTION_FORMATS, default="jsonl")

    bounds = sub.add_parser("bounds", help="Localization bounds for an IoU threshold")
    bounds.add_argument("--eps", type=float, default=SchemeParams.sar_apd().epsilon)
    bounds.add_argument("--w-avg", type=float, help="Average object width in pixels (default: 60)")
    bounds.add_argument("--ground-resolution", type=float, help="Meters per pixel (default: 0.02)")
    return parser


def _error_line(code: int, error: BaseException) -> str:
    message = str(error).replace("\n", " ")
    return f"error: code={code} kind={type(error).__name__} message={message}"


class EvaluationApp:
    """Runs one CLI command and maps failures to exit codes."""

    def __init__(self, cfg: Settings = settings):
        self.settings = cfg
        self.logger: logging.Logger = logging.getLogger(__name__)

    # --- Inputs --- #

    def _load_dump(self, config: RunConfig) -> DetectionFile:
        try:
            return load_detections(config.det_file, config.det_format)
        except OSError as e:
            raise ConfigError(f"cannot read detections {config.det_file}: {e}") from e

    def _load_detections(self, config: RunConfig) -> List[Detection]:
        return self._load_dump(config).records

    def _load_annotations(self, config: RunConfig) -> List[AnnotationFile]:
        try:
            annotations = load_annotation_dir(config.gt_dir)
        except OSError as e:
            raise ConfigError(str(e)) from e
        if not annotations:
            raise ConfigError(f"no VOC XML annotations in {config.gt_dir}")
        return annotations

    # --- Commands --- #

    def cmd_aggregate(self, config: RunConfig) -> str:
        dump = self._load_dump(config)
        aggregated, counts = aggregate_images(
            dump.records, config.bba, config.score_threshold, config.jobs, config.show_progress
        )
        self.logger.info(f"Box counts per image ({config.bba.method.value}):\n{box_count_table(counts)}")
        if config.bba.method == BbaMethod.NONE:
            text = write_source_lines(dump, config.score_threshold)
        else:
            text = write_detections(aggregated, detection_format_for(config.det_file, config.det_format))
        save_report(text, config.output)
        return text

    def cmd_evaluate(self, config: RunConfig) -> MetricsReport:
        dets = self._load_detections(config)
        annotations = self._load_annotations(config)
        result = evaluate_dataset(
            dets,
            annotations,
            config.scheme,
            config.bba,
            config.score_threshold,
            config.jobs,
            config.show_progress,
        )
        report = result.report
        log_metrics_summary(report, self.logger)
        if not config.timing:
            report = report.model_copy(update={"avg_time_per_image_s": None})
        save_report(write_report(report, config.report_format), config.output)
        return report

    def cmd_sweep(self, config: RunConfig) -> List[SweepRow]:
        dets = self._load_detections(config)
        labels = labels_from_annotations(self._load_annotations(config))
        rows = threshold_sweep(dets, labels, config.scheme, config.bba, config.thresholds)
        self.logger.info(f"Calibration sweep ({config.scheme_name}, {config.bba.method.value}):\n{sweep_table(rows)}")
        save_report(write_report(rows, config.report_format, kind="sweep"), config.output)
        return rows

    def cmd_pr_curve(self, config: RunConfig) -> List[PrPoint]:
        dets = self._load_detections(config)
        labels = labels_from_annotations(self._load_annotations(config))
        aggregated = aggregate(dets, config.bba, config.score_threshold)
        curve = pr_curve(match_dataset(aggregated, labels, config.scheme))
        self.logger.info(f"PR curve with {len(curve)} points, AP={average_precision(curve):.4f}")
        if config.interpolated:
            curve = interpolated_curve(curve)
        save_report(write_report(curve, config.report_format, kind="curve"), config.output)
        return curve

    def cmd_gen_fixtures(self, args: argparse.Namespace) -> None:
        if args.scenario == "group":
            annotations, dets = dense_group_scenario()
        else:
            annotations, dets = random_dataset(args.seed, args.images, args.dets_per_image)
        write_fixture_set(args.output_dir, annotations, dets, args.det_format)

    def cmd_bounds(self, args: argparse.Namespace) -> None:
        w_avg = args.w_avg if args.w_avg is not None else self.settings.AVG_OBJECT_WIDTH_PX
        resolution = (
            args.ground_resolution
            if args.ground_resolution is not None
            else self.settings.GROUND_RESOLUTION_M
        )
        try:
            pred_w = max_pred_width(args.eps, w_avg)
            tp_w = max_tp_area_width(args.eps, w_avg)
            inflation = max_safe_inflation(args.eps)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        rows = [
            ["max prediction width", pred_w, pixels_to_ground(pred_w, resolution)],
            ["max TP area width", tp_w, pixels_to_ground(tp_w, resolution)],
            ["average object width", w_avg, pixels_to_ground(w_avg, resolution)],
        ]
        table = tabulate(rows, headers=["bound", "pixels", "meters"], tablefmt="github", floatfmt=".6g")
        save_report(f"{table}\n\nmax safe MOB inflation factor: {inflation:.6g}\n")

    # --- Dispatch --- #

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:
            return int(e.code) if e.code is not None else EXIT_OK

        try:
            setup_logging(args.log_level.upper() if args.log_level else None)
        except ValueError as e:
            print(_error_line(EXIT_USAGE, ConfigError(f"invalid log level: {e}")), file=sys.stderr)
            return EXIT_USAGE
        self.logger.debug(f"Command: {args.command}")

        try:
            if args.command == "gen-fixtures":
                self.cmd_gen_fixtures(args)
                return EXIT_OK
            if args.command == "bounds":
                self.cmd_bounds(args)
                return EXIT_OK

            config = build_run_config(args, self.settings)
            commands = {
                "aggregate": self.cmd_aggregate,
                "evaluate": self.cmd_evaluate,
                "sweep": self.cmd_sweep,
                "pr-curve": self.cmd_pr_curve,
            }
            commands[args.command](config)
            return EXIT_OK
        except ConfigError as e:
            print(_error_line(EXIT_USAGE, e), file=sys.stderr)
            return EXIT_USAGE
        except EvaluationError as e:
            print(_error_line(EXIT_RUNTIME, e), file=sys.stderr)
            return EXIT_RUNTIME
        except Exception as e:
            self.logger.error(f"Unexpected failure: {e}", exc_info=True)
            print(_error_line(EXIT_RUNTIME, e), file=sys.stderr)
            return EXIT_RUNTIME


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Console entry point."""
    sys.exit(EvaluationApp().run(argv))
