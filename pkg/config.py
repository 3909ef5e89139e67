"""
Run configuration loading, overriding, saving and hashing.

A run is described by a single JSON document validated into core.models.RunConfig.
Command-line flags are applied on top as dotted-path overrides ("grid.N": 8192).
The config hash identifies the physics of a run: execution-only fields (out_dir,
workers) are left out so moving the output or changing parallelism keeps the hash.
"""
import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from core.errors import ConfigurationError
from core.models import RunConfig

logger = logging.getLogger(__name__)

HASH_EXCLUDED_FIELDS = {"out_dir", "workers"}
EXAMPLE_CONFIG_FILE = Path(__file__).parent / "run_config.example.json"


def _read_config_file(path: Path) -> dict:
    """Read a JSON config document; an empty file means defaults"""
    try:
        content = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"Cannot read config file {path}: {e}") from e

    if not content.strip():
        return {}
    try:
        data = json.loads(content)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must hold a JSON object")
    return data


def apply_overrides(data: dict, overrides: dict[str, Any]) -> dict:
    """Set dotted-path keys (e.g. "propagation.dt") in a nested config dict; None values are skipped"""
    merged = json.loads(json.dumps(data))
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = merged
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigurationError(f"Cannot override {dotted}: {key} is not a section")
        node[leaf] = value
    return merged


def build_run_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid run configuration:\n{e}") from e


def load_run_config(path: Path | str | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Load a RunConfig from JSON (defaults only when path is None) and apply overrides"""
    data = _read_config_file(Path(path)) if path is not None else {}
    if overrides:
        data = apply_overrides(data, overrides)
    cfg = build_run_config(data)
    logger.debug(f"Run config loaded (hash {config_hash(cfg)}) from {path or 'defaults'}")
    return cfg


def save_run_config(cfg: RunConfig, path: Path | str) -> Path:
    """Write the config as JSON atomically: temp file, fsync, rename"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_suffix(path.suffix + '.tmp')
    try:
        with open(temp_file, 'w', encoding='utf-8') as f:
            json.dump(cfg.model_dump(mode="json"), f, indent=2, sort_keys=True)
            f.write("\n")
            f.flush()
            os.fsync(f.fileno())
        temp_file.replace(path)
    except Exception as e:
        logger.error(f"Error writing {path}: {e}")
        if temp_file.exists():
            try:
                temp_file.unlink()
            except Exception:
                pass
        raise
    return path


def canonical_json(cfg: RunConfig) -> str:
    """Sorted, whitespace-free JSON of the physics-relevant config fields"""
    payload = cfg.model_dump(mode="json", exclude=HASH_EXCLUDED_FIELDS)
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()[:16]


def config_reference_markdown() -> str:
    """Markdown table of every config field with its type, default and description"""
    lines = [
        "# Run Configuration Reference",
        "",
        "Generated by `python cli.py config-reference` from `core/models.py`. Do not edit by hand.",
        "",
        "A run config is one JSON document; every field is optional. See `run_config.example.json`.",
        "",
    ]
    sections = []
    top_level = []
    for name, info in RunConfig.model_fields.items():
        annotation = info.annotation
        if isinstance(annotation, type) and hasattr(annotation, "model_fields"):
            sections.append((name, annotation))
        else:
            top_level.append((name, info))

    lines += ["## Top level", "", "| Field | Type | Default | Description |", "| --- | --- | --- | --- |"]
    lines += [_reference_row(name, info) for name, info in top_level]
    for name, model in sections:
        lines += ["", f"## `{name}`", "", "| Field | Type | Default | Description |", "| --- | --- | --- | --- |"]
        lines += [_reference_row(f"{name}.{field_name}", info) for field_name, info in model.model_fields.items()]
    lines.append("")
    return "\n".join(lines)


def _reference_row(name: str, info) -> str:
    if info.default_factory is not None:
        default = info.default_factory()
    else:
        default = info.default
    default = getattr(default, "value", default)
    type_name = getattr(info.annotation, "__name__", None) or str(info.annotation).replace("typing.", "")
    return f"| `{name}` | `{type_name}` | `{json.dumps(default)}` | {info.description or ''} |"
