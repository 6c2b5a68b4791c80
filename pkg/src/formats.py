"""Annotation, detection dump and report formats.

VOC XML coordinates are used as-is with the continuous area convention (no -1
adjustment). Detection dumps are JSON lines or CSV with the columns
image_id,class,score,xmin,ymin,xmax,ymax.
"""

import io
import json
import logging
import math
import xml.etree.ElementTree as ET
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Union

import pandas as pd
from pydantic import ValidationError

from .exceptions import (
    AnnotationFieldError,
    AnnotationParseError,
    ConfigError,
    DegenerateBoxError,
    DetectionFormatError,
)
from .schemas import (
    AnnotationFile,
    BBox,
    Detection,
    DetectionFile,
    GroundTruth,
    MetricsReport,
    PrPoint,
    SweepRow,
)

logger = logging.getLogger(__name__)

DETECTION_FIELDS = ["image_id", "class", "score", "xmin", "ymin", "xmax", "ymax"]
DETECTION_FORMATS = ("jsonl", "csv")
REPORT_FORMATS = ("json", "csv")

REPORT_COLUMNS: Dict[str, List[str]] = {
    "report": list(MetricsReport.model_fields),
    "sweep": list(SweepRow.model_fields),
    "curve": list(PrPoint.model_fields),
}
_REPORT_MODELS = {"report": MetricsReport, "sweep": SweepRow, "curve": PrPoint}

_OBJECT_FIELDS = {"name", "bndbox"}
_warned_fields: Set[str] = set()

Report = Union[MetricsReport, Sequence[SweepRow], Sequence[PrPoint]]


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ConfigError(f"cannot decode {path} as UTF-8: {e.reason} at byte {e.start}") from e


# --- VOC XML --- #


def _number(parent: ET.Element, tag: str, element: str) -> float:
    text = parent.findtext(tag)
    if text is None or not text.strip():
        raise AnnotationFieldError("missing field", f"{element}/{tag}")
    try:
        value = float(text.strip())
    except ValueError:
        raise AnnotationFieldError(f"non-numeric value '{text.strip()}'", f"{element}/{tag}")
    if not math.isfinite(value):
        raise AnnotationFieldError(f"non-finite value '{text.strip()}'", f"{element}/{tag}")
    return value


def _size(parent: ET.Element, tag: str) -> int:
    value = _number(parent, tag, "size")
    if not value.is_integer() or value <= 0:
        raise AnnotationFieldError(f"invalid image size {value}", f"size/{tag}")
    return int(value)


def _warn_ignored(fields: Iterable[str], image_id: str) -> None:
    new = sorted(set(fields) - _warned_fields)
    if new:
        _warned_fields.update(new)
        logger.warning(f"Ignoring VOC object fields {', '.join(new)} (first seen in {image_id})")


def parse_voc_xml(content: str, image_id: Optional[str] = None) -> AnnotationFile:
    """Parse one PASCAL VOC annotation.

    ``image_id`` defaults to the stem of the ``<filename>`` element.
    """
    try:
        root = ET.fromstring(content)
    except ET.ParseError as e:
        line, column = e.position
        raise AnnotationParseError(f"malformed XML: {e}", line, column) from e

    if image_id is None:
        filename = root.findtext("filename")
        if filename is None or not filename.strip():
            raise AnnotationFieldError("missing field", "filename")
        image_id = Path(filename.strip()).stem

    size = root.find("size")
    if size is None:
        raise AnnotationFieldError("missing field", "size")
    width, height = _size(size, "width"), _size(size, "height")

    objects: List[GroundTruth] = []
    ignored: Set[str] = set()
    for index, obj in enumerate(root.findall("object")):
        element = f"object[{index}]"
        name = obj.findtext("name")
        if name is None or not name.strip():
            raise AnnotationFieldError("missing field", f"{element}/name")
        bndbox = obj.find("bndbox")
        if bndbox is None:
            raise AnnotationFieldError("missing field", f"{element}/bndbox")
        coords = [_number(bndbox, tag, f"{element}/bndbox") for tag in ("xmin", "ymin", "xmax", "ymax")]
        xmin, ymin, xmax, ymax = coords
        if xmin >= xmax or ymin >= ymax:
            raise DegenerateBoxError(f"{image_id} {element}: degenerate box {tuple(coords)}")
        if xmin < 0 or ymin < 0 or xmax > width or ymax > height:
            raise AnnotationFieldError(
                f"box {tuple(coords)} outside image {width}x{height}", f"{element}/bndbox"
            )
        ignored.update(child.tag for child in obj if child.tag not in _OBJECT_FIELDS)
        objects.append(
            GroundTruth(box=BBox.from_xyxy(*coords), class_label=name.strip(), image_id=image_id)
        )

    if ignored:
        _warn_ignored(ignored, image_id)
    return AnnotationFile(image_id=image_id, image_width=width, image_height=height, objects=objects)


def _coord_text(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def write_voc_xml(annotation: AnnotationFile) -> str:
    """Serialize an annotation as VOC XML (only the fields this toolkit reads)."""
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = f"{annotation.image_id}.jpg"
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = str(annotation.image_width)
    ET.SubElement(size, "height").text = str(annotation.image_height)
    ET.SubElement(size, "depth").text = "3"
    for gt in annotation.objects:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = gt.class_label
        bndbox = ET.SubElement(obj, "bndbox")
        for tag, value in zip(("xmin", "ymin", "xmax", "ymax"), gt.box.as_tuple()):
            ET.SubElement(bndbox, tag).text = _coord_text(value)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


def load_annotation(path: Union[str, Path]) -> AnnotationFile:
    path = Path(path)
    return parse_voc_xml(_read_text(path), image_id=path.stem)


def load_annotation_dir(gt_dir: Union[str, Path]) -> List[AnnotationFile]:
    """Parse every ``*.xml`` in ``gt_dir`` in filename order."""
    gt_dir = Path(gt_dir)
    if not gt_dir.is_dir():
        raise FileNotFoundError(f"annotation directory not found: {gt_dir}")
    annotations = [load_annotation(p) for p in sorted(gt_dir.glob("*.xml"))]
    logger.info(
        f"Loaded {len(annotations)} annotations with "
        f"{sum(len(a.objects) for a in annotations)} objects from {gt_dir}"
    )
    return annotations


# --- Detection dumps --- #


def _to_detection(record: Dict[str, Any], line: int) -> Detection:
    missing = [f for f in DETECTION_FIELDS if record.get(f) in (None, "")]
    if missing:
        raise DetectionFormatError(f"missing field(s) {', '.join(missing)}", line)
    try:
        score = float(record["score"])
        coords = [float(record[f]) for f in ("xmin", "ymin", "xmax", "ymax")]
    except (TypeError, ValueError) as e:
        raise DetectionFormatError(f"non-numeric value: {e}", line) from e
    if not 0.0 <= score <= 1.0:
        raise DetectionFormatError(f"score {score} outside [0, 1]", line)
    if not all(math.isfinite(c) for c in coords):
        raise DetectionFormatError(f"non-finite coordinate in {tuple(coords)}", line)
    if coords[0] >= coords[2] or coords[1] >= coords[3]:
        raise DegenerateBoxError(f"record {line}: degenerate box {tuple(coords)}")
    try:
        return Detection(
            box=BBox.from_xyxy(*coords),
            score=score,
            class_label=str(record["class"]),
            image_id=str(record["image_id"]),
        )
    except ValidationError as e:
        raise DetectionFormatError(str(e), line) from e


def _warn_unknown(keys: Iterable[str]) -> None:
    unknown = sorted(set(keys) - set(DETECTION_FIELDS))
    if unknown:
        logger.warning(f"Ignoring unknown detection field(s): {', '.join(unknown)}")


def _blank(value: Any) -> bool:
    return pd.isna(value) or not str(value).strip()


def read_detections(content: str, fmt: str = "jsonl") -> DetectionFile:
    """Parse a detection dump; record order is preserved."""
    records: List[Detection] = []
    source_lines: List[str] = []
    header: Optional[str] = None
    if fmt == "jsonl":
        seen_keys: Set[str] = set()
        for line_no, line in enumerate(content.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DetectionFormatError(f"invalid JSON: {e.msg}", line_no) from e
            if not isinstance(record, dict):
                raise DetectionFormatError("record is not a JSON object", line_no)
            seen_keys.update(record)
            records.append(_to_detection(record, line_no))
            source_lines.append(line)
        _warn_unknown(seen_keys)
    elif fmt == "csv":
        if not content.strip():
            return DetectionFile(records=[])
        lines = content.splitlines()
        header = lines[0]
        # Blank rows are kept so that row offsets map onto physical lines.
        frame = pd.read_csv(io.StringIO(content), dtype=str, keep_default_na=False, skip_blank_lines=False)
        absent = [f for f in DETECTION_FIELDS if f not in frame.columns]
        if absent:
            raise DetectionFormatError(f"missing column(s) {', '.join(absent)}", 1)
        _warn_unknown(frame.columns)
        for offset, row in enumerate(frame.to_dict(orient="records")):
            if all(_blank(v) for v in row.values()):
                continue
            # Header is line 1.
            line_no = offset + 2
            row = {k: ("" if pd.isna(v) else v) for k, v in row.items()}
            records.append(_to_detection(row, line_no))
            source_lines.append(lines[line_no - 1])
    else:
        raise ValueError(f"unknown detection format '{fmt}'")
    return DetectionFile(records=records, source_lines=source_lines, header=header)


def write_source_lines(dump: DetectionFile, score_threshold: float = 0.0) -> str:
    """The dump's own text for every record scoring at least ``score_threshold``.

    Kept lines are written back unchanged, CSV header included.
    """
    kept = [line for d, line in zip(dump.records, dump.source_lines) if d.score >= score_threshold]
    if dump.header is not None:
        kept.insert(0, dump.header)
    return "".join(line + "\n" for line in kept)


def write_detections(dets: Sequence[Detection], fmt: str = "jsonl") -> str:
    rows = [
        {
            "image_id": d.image_id,
            "class": d.class_label,
            "score": d.score,
            "xmin": d.box.xmin,
            "ymin": d.box.ymin,
            "xmax": d.box.xmax,
            "ymax": d.box.ymax,
        }
        for d in dets
    ]
    if fmt == "jsonl":
        return "".join(json.dumps(row) + "\n" for row in rows)
    if fmt == "csv":
        return pd.DataFrame(rows, columns=DETECTION_FIELDS).to_csv(index=False, lineterminator="\n")
    raise ValueError(f"unknown detection format '{fmt}'")


def detection_format_for(path: Union[str, Path], fmt: Optional[str] = None) -> str:
    """Explicit format, or one inferred from the file suffix."""
    if fmt is not None:
        return fmt
    return "csv" if Path(path).suffix.lower() == ".csv" else "jsonl"


def load_detections(path: Union[str, Path], fmt: Optional[str] = None) -> DetectionFile:
    path = Path(path)
    dump = read_detections(_read_text(path), detection_format_for(path, fmt))
    logger.info(f"Loaded {len(dump.records)} detections from {path}")
    return dump


# --- Reports --- #


def _report_kind(report: Report, kind: Optional[str]) -> str:
    if kind is not None:
        return kind
    if isinstance(report, MetricsReport):
        return "report"
    if len(report) > 0 and isinstance(report[0], SweepRow):
        return "sweep"
    return "curve"


def _sig6(value: Any) -> Any:
    if isinstance(value, float):
        return float(f"{value:.6g}")
    return value


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_report(report: Report, fmt: str = "json", kind: Optional[str] = None) -> str:
    """Serialize a metrics report, sweep table or PR curve.

    Field order is fixed, reals carry 6 significant digits, CSV output starts
    with a header row.
    """
    kind = _report_kind(report, kind)
    columns = REPORT_COLUMNS[kind]
    rows = [report.model_dump()] if isinstance(report, MetricsReport) else [r.model_dump() for r in report]

    if fmt == "json":
        payload = [{c: _sig6(row[c]) for c in columns} for row in rows]
        return json.dumps(payload[0] if kind == "report" else payload, indent=2) + "\n"
    if fmt == "csv":
        cells = [[_csv_cell(row[c]) for c in columns] for row in rows]
        return pd.DataFrame(cells, columns=columns).to_csv(index=False, lineterminator="\n")
    raise ValueError(f"unknown report format '{fmt}'")


def read_report(text: str, fmt: str, kind: str) -> Report:
    """Inverse of :func:`write_report`."""
    model = _REPORT_MODELS[kind]
    if fmt == "json":
        payload = json.loads(text)
        rows = [payload] if kind == "report" else payload
    elif fmt == "csv":
        frame = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False)
        rows = [{k: (None if v == "" else v) for k, v in r.items()} for r in frame.to_dict(orient="records")]
    else:
        raise ValueError(f"unknown report format '{fmt}'")
    parsed = [model.model_validate(r) for r in rows]
    return parsed[0] if kind == "report" else parsed
