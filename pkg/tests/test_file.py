import json

from services.file import dump_json, read_csv_rows, read_file, save_csv, save_file, save_json
from services.run_logger import LogCategory, run_logger


def test_save_file_creates_parents(tmp_path):
    path = save_file(tmp_path / "nested" / "out.txt", "hello\n")
    assert read_file(path) == "hello\n"
    assert [p.name for p in path.parent.iterdir()] == ["out.txt"]


def test_dump_json_is_deterministic():
    assert dump_json({"b": 1, "a": [1, 2]}) == dump_json({"a": [1, 2], "b": 1})
    assert dump_json({}).endswith("\n")


def test_save_json(tmp_path):
    path = save_json(tmp_path / "summary.json", {"passed": True})
    assert json.loads(path.read_text()) == {"passed": True}


def test_csv_round_trip(tmp_path):
    rows = [{"spin": "Ca", "amplitude": 1.0}, {"spin": "Cb"}]
    path = save_csv(tmp_path / "lines.csv", rows, ["spin", "amplitude"])
    assert path.read_text() == "spin,amplitude\nCa,1.0\nCb,\n"
    assert read_csv_rows(path) == [["spin", "amplitude"], ["Ca", "1.0"], ["Cb", ""]]


def test_read_csv_skips_comments(tmp_path):
    path = tmp_path / "f.csv"
    path.write_text("# header\n\n 0 , 1 \n")
    assert read_csv_rows(path) == [["0", "1"]]


def test_run_logger_formats_details():
    assert run_logger._format_details({"a": 1, "b": None, "c": "two words"}) == 'a=1 c="two words"'


def test_run_logger_writes_period_estimates():
    run_logger.log_period_estimate(3, 12, 5, 2, 0.5, expected=2)
    for handler in run_logger.loggers[LogCategory.PERIOD_FINDING].handlers:
        handler.flush()
    content = run_logger.get_log_file_path(LogCategory.PERIOD_FINDING).read_text()
    assert "r_hat=2 confidence=0.5000 expected=2" in content.splitlines()[-1]


def test_run_logger_paths():
    paths = run_logger.get_all_log_paths()
    assert set(paths) == {"experiments", "compiler", "period_finding"}
