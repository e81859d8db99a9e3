"""
crud/game_files.py - Run Directory Persistence

RESPONSIBILITY:
- Know where things live in an output directory
- Read and write the claim / verdict sidecars (JSON lines)
- The extraction cache that makes model-channel verification repeatable
- Per-game report files

Layout of an output directory:

    <out>/<seed>.log                 event log (tools/eventlog)
    <out>/<seed>.claims              one Claim per line
    <out>/<seed>.verdicts            one Verdict per line
    <out>/<seed>.report.json         per-game metrics
    <out>/extraction_cache.jsonl     model-channel replies, keyed
    <out>/summary.<fmt>              aggregated table

Endpoints / commands never open these files themselves.
"""

import json
import logging
from pathlib import Path
from typing import Iterable, Optional, Type, TypeVar

from pydantic import BaseModel, ValidationError

from tools.eventlog.event_log import LogParseError

logger = logging.getLogger("game_files")

CLAIMS_SUFFIX = ".claims"
VERDICTS_SUFFIX = ".verdicts"
REPORT_SUFFIX = ".report.json"
CACHE_NAME = "extraction_cache.jsonl"

Model = TypeVar("Model", bound=BaseModel)


def claims_path(log_path: str | Path) -> Path:
    return Path(log_path).with_suffix(CLAIMS_SUFFIX)


def verdicts_path(log_path: str | Path) -> Path:
    return Path(log_path).with_suffix(VERDICTS_SUFFIX)


def report_path(log_path: str | Path) -> Path:
    path = Path(log_path)
    return path.with_name(path.stem + REPORT_SUFFIX)


def cache_path(log_path: str | Path) -> Path:
    return Path(log_path).parent / CACHE_NAME


def log_path_for_seed(out_dir: str | Path, seed: int) -> Path:
    return Path(out_dir) / f"{seed}.log"


def list_logs(directory: str | Path) -> list[Path]:
    """Every *.log in the directory, by numeric seed where the stem is one."""
    paths = [p for p in Path(directory).glob("*.log") if p.is_file()]
    return sorted(paths, key=lambda p: (0, int(p.stem), "") if p.stem.isdigit() else (1, 0, p.stem))


# =============================================================================
# JSON LINES
# =============================================================================

def write_jsonl(path: str | Path, records: Iterable[BaseModel]) -> None:
    lines = [json.dumps(r.model_dump(mode="json"), sort_keys=True, ensure_ascii=False) for r in records]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def read_jsonl(path: str | Path, model: Type[Model]) -> list[Model]:
    """
    Raises:
        FileNotFoundError: no such sidecar
        LogParseError: a line that is not a valid record (with line number)
    """
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(model.model_validate(json.loads(line)))
            except (json.JSONDecodeError, ValidationError) as e:
                raise LogParseError(line_number, f"{path}: {e}") from e
    return records


def write_report(path: str | Path, report: BaseModel) -> None:
    Path(path).write_text(
        json.dumps(report.model_dump(mode="json"), sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )


def read_report(path: str | Path, model: Type[Model]) -> Model:
    return model.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))


# =============================================================================
# EXTRACTION CACHE
# =============================================================================

class ExtractionCache:
    """
    Raw model replies for the claim extractor, one JSON object per line:
    {"key": <sha256>, "items": [...]}. Later lines win on a repeated key.
    """

    def __init__(self, path: Optional[str | Path] = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, list] = {}
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, "r", encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                    self._entries[entry["key"]] = entry["items"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    logger.warning("Skipping unreadable cache line %d in %s", line_number, self.path)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Optional[list]:
        return self._entries.get(key)

    def put(self, key: str, items: list) -> None:
        self._entries[key] = items
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps({"key": key, "items": items}, sort_keys=True, ensure_ascii=False) + "\n")
