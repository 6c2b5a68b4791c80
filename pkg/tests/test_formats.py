import logging

import pytest

from src import formats
from src.exceptions import (
    AnnotationFieldError,
    AnnotationParseError,
    ConfigError,
    DegenerateBoxError,
    DetectionFormatError,
)
from src.fixtures import random_dataset
from src.formats import (
    detection_format_for,
    load_annotation_dir,
    load_detections,
    parse_voc_xml,
    read_detections,
    read_report,
    write_detections,
    write_report,
    write_source_lines,
    write_voc_xml,
)
from src.metrics import build_report, pr_curve
from src.schemas import MatchSequence, MetricsReport, PrPoint, SweepRow

VOC_PERSON = """<annotation>
  <folder>train</folder>
  <filename>IMG_0042.JPG</filename>
  <size><width>4000</width><height>3000</height><depth>3</depth></size>
  <object>
    <name>person</name>
    <pose>Unspecified</pose>
    <truncated>0</truncated>
    <bndbox><xmin>10</xmin><ymin>20.5</ymin><xmax>70</xmax><ymax>80</ymax></bndbox>
  </object>
</annotation>
"""


def voc(objects: str = "", size: str = "<size><width>100</width><height>100</height></size>") -> str:
    return f"<annotation><filename>a.jpg</filename>{size}{objects}</annotation>"


@pytest.fixture(autouse=True)
def reset_warned_fields():
    formats._warned_fields.clear()
    yield
    formats._warned_fields.clear()


class TestVocXml:
    def test_person_object(self):
        annotation = parse_voc_xml(VOC_PERSON)
        assert annotation.image_id == "IMG_0042"
        assert (annotation.image_width, annotation.image_height) == (4000, 3000)
        (obj,) = annotation.objects
        assert obj.class_label == "person"
        assert obj.box.as_tuple() == (10, 20.5, 70, 80)
        assert obj.image_id == "IMG_0042"

    def test_explicit_image_id(self):
        assert parse_voc_xml(VOC_PERSON, image_id="other").objects[0].image_id == "other"

    def test_zero_objects(self):
        assert parse_voc_xml(voc()).objects == []

    def test_ignored_fields_warn_once(self, caplog):
        with caplog.at_level(logging.WARNING, logger="src.formats"):
            parse_voc_xml(VOC_PERSON)
            parse_voc_xml(VOC_PERSON)
        warnings = [r for r in caplog.records if "Ignoring VOC object fields" in r.getMessage()]
        assert len(warnings) == 1
        assert "pose" in warnings[0].getMessage()

    def test_malformed_xml_reports_position(self):
        with pytest.raises(AnnotationParseError) as exc:
            parse_voc_xml("<annotation>\n<size>\n</annotation>")
        assert exc.value.line is not None

    @pytest.mark.parametrize(
        "objects, element",
        [
            ("<object><bndbox><xmin>1</xmin><ymin>1</ymin><xmax>5</xmax><ymax>5</ymax></bndbox></object>", "object[0]/name"),
            ("<object><name>person</name></object>", "object[0]/bndbox"),
            ("<object><name>person</name><bndbox><ymin>1</ymin><xmax>5</xmax><ymax>5</ymax></bndbox></object>", "object[0]/bndbox/xmin"),
            ("<object><name>person</name><bndbox><xmin>x</xmin><ymin>1</ymin><xmax>5</xmax><ymax>5</ymax></bndbox></object>", "object[0]/bndbox/xmin"),
            ("<object><name>person</name><bndbox><xmin>-1</xmin><ymin>1</ymin><xmax>5</xmax><ymax>5</ymax></bndbox></object>", "object[0]/bndbox"),
            ("<object><name>person</name><bndbox><xmin>1</xmin><ymin>1</ymin><xmax>500</xmax><ymax>5</ymax></bndbox></object>", "object[0]/bndbox"),
        ],
    )
    def test_field_errors_name_the_element(self, objects, element):
        with pytest.raises(AnnotationFieldError) as exc:
            parse_voc_xml(voc(objects))
        assert exc.value.element == element

    def test_missing_size(self):
        with pytest.raises(AnnotationFieldError, match="size"):
            parse_voc_xml(voc(size=""))

    def test_degenerate_box(self):
        obj = "<object><name>person</name><bndbox><xmin>5</xmin><ymin>1</ymin><xmax>5</xmax><ymax>9</ymax></bndbox></object>"
        with pytest.raises(DegenerateBoxError):
            parse_voc_xml(voc(obj))

    def test_generated_corpus_parses(self, tmp_path):
        annotations, _ = random_dataset(seed=3, n_images=20)
        for annotation in annotations:
            (tmp_path / f"{annotation.image_id}.xml").write_text(write_voc_xml(annotation), encoding="utf-8")
        loaded = load_annotation_dir(tmp_path)
        assert loaded == annotations

    def test_corrupted_corpus_never_defaults(self, rng):
        annotations, _ = random_dataset(seed=4, n_images=20)
        for annotation in annotations:
            text = write_voc_xml(annotation)
            tag = str(rng.choice(["xmin", "ymin", "xmax", "ymax", "name"]))
            start, end = text.index(f"<{tag}>"), text.index(f"</{tag}>") + len(tag) + 3
            with pytest.raises(AnnotationFieldError):
                parse_voc_xml(text[:start] + text[end:])
            negative = text.replace("<xmin>", "<xmin>-", 1)
            with pytest.raises(AnnotationFieldError):
                parse_voc_xml(negative)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_annotation_dir(tmp_path / "absent")


class TestDetections:
    LINE = '{"image_id": "a", "class": "person", "score": 0.9, "xmin": 1, "ymin": 2, "xmax": 3, "ymax": 4}\n'

    def test_one_line(self):
        (d,) = read_detections(self.LINE).records
        assert (d.image_id, d.class_label, d.score, d.box.as_tuple()) == ("a", "person", 0.9, (1, 2, 3, 4))

    def test_score_out_of_range(self):
        with pytest.raises(DetectionFormatError) as exc:
            read_detections(self.LINE + self.LINE.replace("0.9", "1.5"))
        assert exc.value.line == 2

    def test_degenerate_box(self):
        with pytest.raises(DegenerateBoxError):
            read_detections(self.LINE.replace('"xmax": 3', '"xmax": 1'))

    def test_missing_field(self):
        with pytest.raises(DetectionFormatError, match="class"):
            read_detections(self.LINE.replace('"class": "person", ', ""))

    def test_invalid_json(self):
        with pytest.raises(DetectionFormatError, match="record 1"):
            read_detections("{not json}\n")

    def test_unknown_field_warns(self, caplog):
        line = self.LINE.replace("}", ', "camera": "drone"}')
        with caplog.at_level(logging.WARNING, logger="src.formats"):
            (d,) = read_detections(line).records
        assert d.score == 0.9
        assert "camera" in caplog.text

    def test_csv(self):
        text = "image_id,class,score,xmin,ymin,xmax,ymax\na,person,0.5,1,2,3,4\nb,person,0.25,0,0,10,10\n"
        dump = read_detections(text, "csv")
        assert [d.image_id for d in dump.records] == ["a", "b"]
        assert write_detections(dump.records, "csv") == text.replace(",1,2,3,4", ",1.0,2.0,3.0,4.0").replace(
            ",0,0,10,10", ",0.0,0.0,10.0,10.0"
        )

    def test_csv_bad_record_line_number(self):
        text = "image_id,class,score,xmin,ymin,xmax,ymax\na,person,0.5,1,2,3,4\na,person,2,1,2,3,4\n"
        with pytest.raises(DetectionFormatError) as exc:
            read_detections(text, "csv")
        assert exc.value.line == 3

    def test_csv_blank_rows_keep_physical_line_numbers(self):
        text = "image_id,class,score,xmin,ymin,xmax,ymax\na,person,0.5,1,2,3,4\n\na,person,2,1,2,3,4\n"
        with pytest.raises(DetectionFormatError) as exc:
            read_detections(text, "csv")
        assert exc.value.line == 4
        dump = read_detections(text.replace(",2,1,2,3,4", ",0.2,1,2,3,4"), "csv")
        assert [d.score for d in dump.records] == [0.5, 0.2]

    @pytest.mark.parametrize(
        "fmt, text",
        [
            ("jsonl", '{"image_id":"a","class":"person","score":0.9,"xmin":10,"ymin":10,"xmax":20,"ymax":20}\n'
                      '{"score": 0.1, "image_id": "b", "class": "person", "xmin": 0, "ymin": 0, "xmax": 5, "ymax": 5}\n'),
            ("csv", "image_id,class,score,xmin,ymin,xmax,ymax\na,person,0.9,10,10,20,20\n\nb,person,.1,0,0,5,5\n"),
        ],
    )
    def test_source_lines_are_kept_verbatim(self, fmt, text):
        dump = read_detections(text, fmt)
        lines = [line for line in text.splitlines() if line]
        assert write_source_lines(dump) == "".join(line + "\n" for line in lines)
        assert write_source_lines(dump, 0.5) == "".join(line + "\n" for line in lines[:-1])

    def test_undecodable_dump(self, tmp_path):
        path = tmp_path / "dets.jsonl"
        path.write_bytes(b"\xff\xfe\x00bad")
        with pytest.raises(ConfigError, match="dets.jsonl"):
            load_detections(path)

    def test_undecodable_annotation(self, tmp_path):
        (tmp_path / "img.xml").write_bytes(b"\xff\xfe<annotation/>")
        with pytest.raises(ConfigError, match="img.xml"):
            load_annotation_dir(tmp_path)

    def test_csv_missing_column(self):
        with pytest.raises(DetectionFormatError, match="score"):
            read_detections("image_id,class,xmin,ymin,xmax,ymax\na,person,1,2,3,4\n", "csv")

    @pytest.mark.parametrize("fmt", ["jsonl", "csv"])
    def test_large_dump_round_trip(self, fmt):
        _, dets = random_dataset(seed=11, n_images=1000, dets_per_image=10)
        text = write_detections(dets, fmt)
        assert read_detections(text, fmt).records == dets
        assert write_detections(read_detections(text, fmt).records, fmt) == text

    def test_format_from_suffix(self, tmp_path):
        assert detection_format_for("dets.csv") == "csv"
        assert detection_format_for("dets.jsonl") == "jsonl"
        assert detection_format_for("dets.txt", "csv") == "csv"
        path = tmp_path / "dets.jsonl"
        path.write_text(self.LINE, encoding="utf-8")
        assert len(load_detections(path).records) == 1


class TestReports:
    REPORT = MetricsReport(
        precision=2 / 3,
        recall=0.5,
        average_precision=0.4166666666,
        true_positives=2,
        false_positives=1,
        false_negatives=2,
        avg_time_per_image_s=0.0123456789,
    )

    def test_json_report_fields(self):
        text = write_report(self.REPORT)
        assert '"precision": 0.666667' in text
        assert '"recall": 0.5' in text
        assert '"average_precision": 0.416667' in text
        assert text.index("precision") < text.index("recall") < text.index("average_precision")

    def test_csv_report_header(self):
        header, row, *rest = write_report(self.REPORT, "csv").splitlines()
        assert header.split(",")[:3] == ["precision", "recall", "average_precision"]
        assert row.startswith("0.666667,0.5,0.416667,2,1,2,")
        assert rest == []

    def test_empty_curve(self):
        assert write_report([], "csv", kind="curve") == "recall,precision,score_cutoff\n"
        assert write_report([], "json", kind="curve") == "[]\n"

    def test_missing_timing_serialises_empty(self):
        report = self.REPORT.model_copy(update={"avg_time_per_image_s": None})
        assert write_report(report, "csv").splitlines()[1].endswith(",")
        assert '"avg_time_per_image_s": null' in write_report(report)

    @pytest.mark.parametrize("fmt", ["json", "csv"])
    def test_round_trip_is_byte_identical(self, fmt, rng):
        outcomes = rng.integers(0, 2, size=40).tolist()
        scores = sorted(rng.uniform(0, 1, size=40).tolist(), reverse=True)
        m = MatchSequence(outcomes=outcomes, scores=scores, n_ground_truth=sum(outcomes) + 3)
        curve = pr_curve(m)
        sweep = [SweepRow(score_threshold=t, precision=1 / 3, recall=t / 2, average_precision=0.25) for t in (0.05, 0.1)]
        for report, kind in ((build_report(m, 0.001), "report"), (sweep, "sweep"), (curve, "curve")):
            text = write_report(report, fmt, kind)
            assert write_report(read_report(text, fmt, kind), fmt, kind) == text

    def test_curve_kind_is_inferred(self):
        point = PrPoint(recall=0.5, precision=1.0, score_cutoff=0.9)
        assert write_report([point], "csv").startswith("recall,precision,score_cutoff\n")

    def test_six_significant_digits(self):
        rows = [SweepRow(score_threshold=0.05, precision=1 / 7, recall=0.123456789, average_precision=1.0)]
        text = write_report(rows, "csv")
        assert text.splitlines()[1] == "0.05,0.142857,0.123457,1"
