"""
Result file helpers: text, JSON and CSV reading and atomic writing.
"""
import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

PathLike = Union[str, Path]


def read_file(file_path: PathLike) -> str:
    """
    Read a file's content.

    Args:
        file_path: Path to the file to read

    Returns:
        File content as string
    """
    with open(os.path.expanduser(str(file_path)), "r") as f:
        return f.read()


def save_file(file_path: PathLike, content: str) -> Path:
    """
    Save content to a file atomically.

    Args:
        file_path: Path to the file to write
        content: Content to write

    Returns:
        The written path
    """
    path = Path(os.path.expanduser(str(file_path)))
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = tempfile.mkstemp(dir=str(path.parent), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(content)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
    return path


def dump_json(data: Any) -> str:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def save_json(file_path: PathLike, data: Any) -> Path:
    return save_file(file_path, dump_json(data))


def save_csv(file_path: PathLike, rows: Sequence[Dict[str, Any]], fieldnames: Sequence[str]) -> Path:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({name: row.get(name, "") for name in fieldnames})
    return save_file(file_path, buffer.getvalue())


def read_csv_rows(file_path: PathLike) -> List[List[str]]:
    """Non-empty CSV rows with surrounding whitespace stripped; '#' lines skipped."""
    rows: List[List[str]] = []
    for row in csv.reader(io.StringIO(read_file(file_path))):
        cells = [cell.strip() for cell in row]
        if not any(cells) or cells[0].startswith("#"):
            continue
        rows.append(cells)
    return rows
