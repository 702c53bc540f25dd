"""Output writer for deterministic result files."""

import json
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Sequence

import pandas as pd
from loguru import logger
from pydantic import BaseModel

from .errors import InputFileError


def dumps_record(record: Any) -> str:
    """One canonical JSON line: sorted keys, no spaces, ints as strings where the schema says so."""
    if isinstance(record, BaseModel):
        record = record.model_dump(mode="json")
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class OutputWriter:
    """Writes results under one output directory; same inputs give the same bytes."""

    def __init__(self, output_dir: Path):
        self.output_dir = Path(output_dir)
        try:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InputFileError(f"cannot create output directory {self.output_dir}: {exc}") from exc

    def _write_text(self, name: str, text: str) -> Path:
        path = self.output_dir / name
        try:
            path.write_text(text, encoding="utf-8", newline="\n")
        except OSError as exc:
            raise InputFileError(f"cannot write {path}: {exc}") from exc
        logger.info(f"Wrote {path}")
        return path

    def write_jsonl(self, name: str, records: Iterable[Any]) -> Path:
        lines = [dumps_record(record) for record in records]
        return self._write_text(name, "".join(line + "\n" for line in lines))

    def write_json(self, name: str, document: Mapping[str, Any]) -> Path:
        return self._write_text(name, json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n")

    def write_csv(self, name: str, rows: Sequence[Mapping[str, Any]], columns: List[str]) -> Path:
        """CSV with a header row; an empty row list still writes the header."""
        frame = pd.DataFrame(list(rows), columns=columns)
        return self._write_text(name, frame.to_csv(index=False, lineterminator="\n"))

    def write_text(self, name: str, text: str) -> Path:
        return self._write_text(name, text)
