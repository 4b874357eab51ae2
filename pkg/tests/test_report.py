import io
import json
from collections import namedtuple

import numpy as np
import pytest

from lib.core.errors import InputError
from lib.ui.alarm import EXIT_FALSIFIED, EXIT_OK, FalsificationAlarm
from lib.ui.report import ReportWriter, dumps, load_manifest, manifest_path, plain


def test_plain_values():
    Pair = namedtuple("Pair", ["a", "b"])
    data = {"x": np.arange(3), "y": np.float64(np.inf), "z": Pair(np.int64(1), float("nan")),
            1: np.bool_(True), "w": -np.inf}
    assert plain(data) == {"x": [0, 1, 2], "y": "inf", "z": {"a": 1, "b": "nan"}, "1": True,
                           "w": "-inf"}
    assert dumps([1]).endswith("\n")


def test_stdout_writer_has_no_manifest():
    stream = io.StringIO()
    writer = ReportWriter(stream=stream)
    writer.emit_json({"a": 1})
    assert json.loads(stream.getvalue()) == {"a": 1}
    assert writer.write_manifest("gen", ["gen"], {}) == []


def test_file_writer_and_manifest(tmp_path):
    out = str(tmp_path / "sub" / "r.json")
    writer = ReportWriter(out)
    writer.emit_json({"a": 1})
    writer.emit_text("x\n", path=str(tmp_path / "t.txt"))
    paths = writer.write_manifest("audit", ["audit", "-i", "m.json"], {"seed": None}, [3],
                                  ["m.json"], "1.0", 0.5)
    assert paths == [manifest_path(out), manifest_path(str(tmp_path / "t.txt"))]
    manifest = load_manifest(paths[0])
    assert manifest["argv"] == ["audit", "-i", "m.json"]
    assert manifest["outputs"] == [out, str(tmp_path / "t.txt")]
    assert manifest["seeds"] == [3]


def test_manifest_without_argv(tmp_path):
    path = tmp_path / "x.manifest.json"
    path.write_text("{}")
    with pytest.raises(InputError):
        load_manifest(str(path))


def test_alarm_lifecycle():
    alarm = FalsificationAlarm()
    assert alarm.check_violations("audit", [])
    assert alarm.check_report("distortion", {"holds": True, "violations": 0})
    assert alarm.exit_code() == EXIT_OK
    assert not alarm.check_report("mts", {"holds": False, "violations": ["pull_back"]})
    assert not alarm.check_report("gst", {"violations": 2})
    assert alarm.alarm_type == "mts"
    assert len(alarm.events) == 2
    assert alarm.exit_code() == EXIT_FALSIFIED
    alarm.stop_alarm()
    assert not alarm.is_alarm_active
    assert alarm.exit_code() == EXIT_OK
