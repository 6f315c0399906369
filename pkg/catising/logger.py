import json
import platform
import sys
from datetime import datetime
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
from PySide6.QtCore import QObject, QtMsgType, Signal, qInstallMessageHandler

from catising.config import RESULT_SCHEMA_VERSION
from catising.runner import ResultRecord


_LEVELS = {
    QtMsgType.QtDebugMsg: "debug",
    QtMsgType.QtInfoMsg: "info",
    QtMsgType.QtWarningMsg: "warning",
    QtMsgType.QtCriticalMsg: "critical",
    QtMsgType.QtFatalMsg: "fatal",
}


def install_message_handler(verbose: bool = False):
    """Route qDebug/qInfo/qWarning to stderr as `timestamp level message`."""

    def handler(mode, context, message):
        if mode == QtMsgType.QtDebugMsg and not verbose:
            return
        timestamp = datetime.now().isoformat(timespec="seconds")
        print(f"{timestamp} {_LEVELS.get(mode, 'info')} {message}", file=sys.stderr)

    qInstallMessageHandler(handler)


def _package_versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for package in ("CatIsing", "numpy", "scipy", "numba", "PySide6", "PyYAML"):
        try:
            versions[package] = version(package)
        except PackageNotFoundError:
            versions[package] = "unknown"
    return versions


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))  # shortest round-trip representation
    return str(value)


def parse_value(text: str):
    if text in ("true", "false"):
        return text == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_csv(path: str | Path) -> tuple[tuple[str, ...], list[tuple]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    columns = tuple(lines[0].split(","))
    rows = [tuple(parse_value(cell) for cell in line.split(",")) for line in lines[1:]]
    return columns, rows


class Logger(QObject):
    status_update = Signal(str)

    def __init__(self):
        super().__init__()

    def save(self, record: ResultRecord, path: str | Path | None = None) -> Path:
        path = Path(path) if path is not None else record.spec.output_path
        if record.spec.format == "json":
            self.write_json(record, path)
        else:
            self.write_csv(record, path)
        self.write_metadata(record, path)
        self.status_update.emit(f"Saved {len(record.rows)} rows at {path}.")
        return path

    def write_csv(self, record: ResultRecord, path: Path):
        with open(path, "w", encoding="utf-8", newline="\n") as file:
            file.write(",".join(record.columns) + "\n")  # header
            for row in record.rows:
                file.write(",".join(format_value(value) for value in row) + "\n")

    def write_json(self, record: ResultRecord, path: Path):
        data = {
            "columns": list(record.columns),
            "rows": [list(row) for row in record.rows],
        }
        with open(path, "w", encoding="utf-8") as file:
            json.dump(data, file, indent=1, default=float)

    def write_metadata(self, record: ResultRecord, path: Path):
        metadata = {
            "schema_version": RESULT_SCHEMA_VERSION,
            "spec": record.spec.echo(),
            "columns": list(record.columns),
            "versions": _package_versions(),
            "code_version": record.version,
            "wall_time": record.wall_time,
            "created": datetime.now().isoformat(),
            "extras": record.extras,
        }
        with open(metadata_path(path), "w", encoding="utf-8") as file:
            json.dump(metadata, file, indent=2, default=float)


def metadata_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")
