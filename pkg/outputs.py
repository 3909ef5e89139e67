"""
CSV and JSON result files.

Every CSV starts with a schema tag line

    # schema=<name>/v1 config_hash=<hash>

followed by a pandas table with the fixed column order listed in SCHEMAS. Floats are
written with 15 significant digits and nothing time-dependent goes into a CSV, so a
rerun of the same config reproduces the files byte for byte. Timestamps live in the
provenance JSON only.
"""
import json
import logging
import os
import re
from datetime import datetime
from pathlib import Path

import pandas as pd

from core.errors import ProvenanceError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.15g"

SCHEMAS = {
    "trace": ["t", "Pb", "Gamma_inst"],
    "rates": [
        "alpha", "F0", "gamma", "t1", "t2", "r2",
        "Ip", "P0", "measurable", "T_total", "x_c", "status", "message",
    ],
    "slopes": ["alpha", "m_alpha", "intercept", "r2", "C_alpha_predicted", "Ip", "n_points"],
    "ratios": ["alpha", "F0", "gamma", "gamma_model", "ratio"],
    "calibration": ["alpha", "Z", "a_star", "achieved_Ip", "iterations", "a_lo", "a_hi", "status", "message"],
    "ground_states": ["alpha", "Z", "a", "E0", "Ip", "iterations", "half_width", "F_bsi", "F_bsi_1d"],
    "densities": ["alpha", "x", "density"],
    "fadk_curves": ["alpha", "Ip", "inv_F0", "minus_ln_gamma"],
    "model_curves": ["alpha", "F0", "inv_F0", "minus_ln_gamma", "minus_ln_gamma_model"],
    "robustness": ["variant", "gamma", "gamma_reference", "relative_change", "status", "message"],
}

_TAG = re.compile(r"^# schema=(?P<name>[a-z_]+)/v(?P<version>\d+) config_hash=(?P<hash>[0-9a-f]+)\s*$")


def write_table(path: Path | str, schema: str, rows, config_hash: str) -> Path:
    """Write rows (list of dicts or a DataFrame) under the given schema"""
    if schema not in SCHEMAS:
        raise ValueError(f"Unknown table schema: {schema}")
    columns = SCHEMAS[schema]
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    frame = frame.reindex(columns=columns)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# schema={schema}/v{SCHEMA_VERSION} config_hash={config_hash}\n")
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {schema} table with {len(frame)} rows to {path}")
    return path


def read_table(path: Path | str, schema: str | None = None) -> tuple[pd.DataFrame, str]:
    """Read a tagged CSV; returns the table and its config hash"""
    path = Path(path)
    with open(path, encoding="utf-8") as f:
        first = f.readline()
    match = _TAG.match(first)
    if match is None:
        raise ProvenanceError(f"{path} has no schema tag line")
    if schema is not None and match["name"] != schema:
        raise ProvenanceError(f"{path} holds a {match['name']} table, expected {schema}")
    if int(match["version"]) != SCHEMA_VERSION:
        raise ProvenanceError(f"{path} uses schema version {match['version']}, expected {SCHEMA_VERSION}")
    frame = pd.read_csv(path, skiprows=1)
    return frame, match["hash"]


def read_tables_same_config(paths: list[Path | str], schema: str) -> tuple[pd.DataFrame, str]:
    """Concatenate tables produced by one config; mixing configs raises ProvenanceError"""
    if not paths:
        raise ProvenanceError("No tables given")
    frames = []
    hashes = set()
    for path in paths:
        frame, config_hash = read_table(path, schema)
        frames.append(frame)
        hashes.add(config_hash)
    if len(hashes) > 1:
        raise ProvenanceError(f"Tables come from different configs (hashes {sorted(hashes)})")
    return pd.concat(frames, ignore_index=True), hashes.pop()


def write_json(path: Path | str, data: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_suffix(path.suffix + ".tmp")
    with open(temp_file, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
        f.flush()
        os.fsync(f.fileno())
    temp_file.replace(path)
    return path


def write_provenance(
    out_dir: Path | str, command: str, config_hash: str, config_json: dict, started: datetime, files: list[Path]
) -> Path:
    out_dir = Path(out_dir)
    return write_json(
        out_dir / f"{command}.provenance.json",
        {
            "command": command,
            "config_hash": config_hash,
            "config": config_json,
            "started": started.isoformat(timespec="seconds"),
            "finished": datetime.now().isoformat(timespec="seconds"),
            "files": sorted(str(Path(p).relative_to(out_dir)) if Path(p).is_relative_to(out_dir) else str(p) for p in files),
        },
    )


def _json_default(value):
    if hasattr(value, "item"):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
