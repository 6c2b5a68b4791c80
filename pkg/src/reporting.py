import logging
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

from tabulate import tabulate

from .schemas import MetricsReport, SweepRow
from .utils import format_duration

logger = logging.getLogger(__name__)


def log_metrics_summary(report: MetricsReport, log: Optional[logging.Logger] = None) -> None:
    """Log the headline metrics of an evaluation run."""
    log = log or logger
    log.info("--- Evaluation Metrics Summary ---")
    log.info(f"Precision (PRC): {report.precision:.4f}")
    log.info(f"Recall (RCL): {report.recall:.4f}")
    log.info(f"Average precision (AP): {report.average_precision:.4f}")
    log.info(
        f"TP: {report.true_positives}  FP: {report.false_positives}  "
        f"FN: {report.false_negatives}"
    )
    if report.avg_time_per_image_s is not None:
        log.info(
            f"Average time per image: {format_duration(report.avg_time_per_image_s)} "
            f"({report.avg_time_per_image_s * 1000:.2f} ms)"
        )
    log.info("--- End Metrics Summary ---")


def sweep_table(rows: Sequence[SweepRow]) -> str:
    return tabulate(
        [[r.score_threshold, r.precision, r.recall, r.average_precision] for r in rows],
        headers=["t_s", "PRC", "RCL", "AP"],
        tablefmt="github",
        floatfmt=".4f",
    )


def box_count_table(counts: Dict[str, Tuple[int, int]]) -> str:
    """Per-image box counts before and after aggregation."""
    rows = [[image_id, before, after] for image_id, (before, after) in sorted(counts.items())]
    total_before = sum(before for before, _ in counts.values())
    total_after = sum(after for _, after in counts.values())
    rows.append(["TOTAL", total_before, total_after])
    return tabulate(rows, headers=["image_id", "before", "after"], tablefmt="github")


def save_report(text: str, output: Optional[Union[str, Path]] = None) -> None:
    """Write report text to ``output``, or to stdout when no path is given."""
    if output is None or str(output) == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(output)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info(f"Saved output to {path}")
