"""Schema validation and atomic file output."""
from __future__ import annotations

import json
import os
import tempfile
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

SCHEMA_FILE = "medpath.schema.json"


@lru_cache(maxsize=1)
def schema_document() -> dict:
    text = resources.files("medpath").joinpath("schemas", SCHEMA_FILE).read_text("utf-8")
    return json.loads(text)


def schema_names() -> list:
    return sorted(schema_document()["$defs"])


def validate(obj, name: str) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``obj`` matches ``$defs/name``."""
    doc = schema_document()
    if name not in doc["$defs"]:
        raise KeyError(f"no schema named {name!r}")
    schema = {"$ref": f"#/$defs/{name}", "$defs": doc["$defs"]}
    jsonschema.validate(obj, schema, cls=jsonschema.Draft202012Validator)


def dumps(obj) -> str:
    # repr-exact floats; NaN is never valid output
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write_text(path, text: str) -> Path:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def write_json(path, obj, schema: str | None = None) -> Path:
    if schema is not None:
        validate(obj, schema)
    return atomic_write_text(path, dumps(obj))


def read_json(path, schema: str | None = None):
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if schema is not None:
        validate(obj, schema)
    return obj
