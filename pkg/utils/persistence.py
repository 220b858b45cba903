"""
Result persistence: record.json (full record) and data.csv (long-form rows)
"""

import csv
import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)

RECORD_FILE = 'record.json'
DATA_FILE = 'data.csv'

# fixed columns; parameter columns are inserted after 'stat'
CSV_LEAD_COLUMNS = ['experiment', 'stat']
CSV_TAIL_COLUMNS = ['value', 'se', 'n', 'seed', 'verdict', 'tolerance']


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays, enums and tuples into plain JSON types"""
    if isinstance(obj, dict):
        return {str(key): to_jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(value) for value in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(value) for value in obj.tolist()]
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if hasattr(obj, 'to_dict'):
        return to_jsonable(obj.to_dict())
    return obj


def write_json(path: Path, obj: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8') as f:
        json.dump(to_jsonable(obj), f, indent=2, sort_keys=True)
        f.write('\n')


def read_json(path: Path) -> Any:
    with Path(path).open('r', encoding='utf-8') as f:
        return json.load(f)


def _cell(value: Any) -> Any:
    if value is None:
        return ''
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else str(value)
    return value


def csv_columns(rows: Sequence[Dict[str, Any]]) -> List[str]:
    """Lead columns, then the sorted union of parameter keys, then value columns"""
    fixed = set(CSV_LEAD_COLUMNS) | set(CSV_TAIL_COLUMNS)
    params = sorted({key for row in rows for key in row if key not in fixed})
    return CSV_LEAD_COLUMNS + params + CSV_TAIL_COLUMNS


def write_csv(path: Path, rows: Iterable[Dict[str, Any]]) -> None:
    """
    Write long-form rows, one per (statistic, parameter point)

    Floats are written with repr so the file is byte-identical for identical
    numbers.
    """
    rows = list(rows)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = csv_columns(rows)
    with path.open('w', encoding='utf-8', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, extrasaction='ignore', lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(row.get(key)) for key in fieldnames})


def read_csv(path: Path) -> List[Dict[str, str]]:
    with Path(path).open('r', encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))


def write_outputs(out_dir: Path, record: Dict[str, Any], rows: Iterable[Dict[str, Any]]) -> Dict[str, Path]:
    """Write record.json and data.csv under out_dir"""
    out_dir = Path(out_dir)
    record_path, data_path = out_dir / RECORD_FILE, out_dir / DATA_FILE
    write_json(record_path, record)
    write_csv(data_path, rows)
    logger.info(f"💾 Results written to {out_dir}")
    return {'record': record_path, 'data': data_path}
