"""Tests for the two-file CSV format."""

import pytest

from src.data_model import validate
from src.exceptions import DataValidationError, IngestError
from src.io.panel_csv import export_csv, ingest_csv


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_export_then_ingest(small_panel, tmp_path):
    """Exported files read back into an equal panel."""
    b, e = str(tmp_path / "baselines.csv"), str(tmp_path / "events.csv")
    export_csv(small_panel, b, e)
    assert ingest_csv(b, e) == small_panel


def test_export_is_byte_identical(small_panel, tmp_path):
    first = (str(tmp_path / "b1.csv"), str(tmp_path / "e1.csv"))
    second = (str(tmp_path / "b2.csv"), str(tmp_path / "e2.csv"))
    export_csv(small_panel, *first)
    export_csv(small_panel, *second)
    for one, two in zip(first, second):
        with open(one, "rb") as f1, open(two, "rb") as f2:
            assert f1.read() == f2.read()


def test_exported_layout(small_panel, tmp_path):
    """Headers, 0/1 flags and empty outcomes at unrecorded visits."""
    b, e = tmp_path / "baselines.csv", tmp_path / "events.csv"
    export_csv(small_panel, str(b), str(e))
    lines = e.read_text(encoding="utf-8").split("\n")
    assert lines[0] == "subject_id,time,recorded,outcome"
    assert lines[2] == "s1,5.0,0,"
    assert b.read_text(encoding="utf-8").startswith("subject_id,censoring_time,A,Z\n")


def test_ingest_rejects_bad_header(tmp_path):
    b = _write(tmp_path / "b.csv", "id,censoring_time\n1,5\n")
    e = _write(tmp_path / "e.csv", "subject_id,time,recorded,outcome\n")
    with pytest.raises(IngestError):
        ingest_csv(b, e)


def test_ingest_reports_line_number(tmp_path):
    """Parse errors name the offending line, counting the header as line 1."""
    b = _write(tmp_path / "b.csv", "subject_id,censoring_time,A\n1,5,0\n")
    e = _write(tmp_path / "e.csv",
               "subject_id,time,recorded,outcome\n1,1.0,1,2.5\n1,2.0,yes,\n")
    with pytest.raises(IngestError, match="line 3"):
        ingest_csv(b, e)


def test_ingest_validates(tmp_path):
    """An event of an unknown subject fails validation after parsing."""
    b = _write(tmp_path / "b.csv", "subject_id,censoring_time,A\n1,5,0\n")
    e = _write(tmp_path / "e.csv", "subject_id,time,recorded,outcome\n2,1.0,1,2.5\n")
    with pytest.raises(DataValidationError) as excinfo:
        ingest_csv(b, e)
    assert excinfo.value.report.codes() == ["unknown-subject"]


def test_ingest_empty_file(tmp_path):
    b = _write(tmp_path / "b.csv", "")
    e = _write(tmp_path / "e.csv", "subject_id,time,recorded,outcome\n")
    with pytest.raises(IngestError):
        ingest_csv(b, e)


def test_ingest_header_only_events(tmp_path):
    """A header-only events file is a panel of subjects who never visited."""
    b = _write(tmp_path / "b.csv", "subject_id,censoring_time,A\n1,5,0\n2,7,1\n")
    e = _write(tmp_path / "e.csv", "subject_id,time,recorded,outcome\n")
    panel = ingest_csv(b, e)
    assert panel.n_subjects == 2
    assert panel.n_events == 0
    assert validate(panel).passed


def test_ingest_requires_events_header(tmp_path):
    """A zero-byte events file has no header, which is a format error."""
    b = _write(tmp_path / "b.csv", "subject_id,censoring_time,A\n1,5,0\n")
    e = _write(tmp_path / "e.csv", "")
    with pytest.raises(IngestError, match="header"):
        ingest_csv(b, e)
