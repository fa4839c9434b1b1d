"""Versioned JSON container for trained models.

Floats are written with ``repr`` precision, so weights round-trip exactly.
The recurrent state is not stored; a loaded model starts from zero state.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ArtifactError, ConfigError
from .esn import EchoStateNetwork
from .lstm import LstmModel

FORMAT_NAME = "rescast-model"
FORMAT_VERSION = 1
KINDS = {"esn": EchoStateNetwork, "lstm": LstmModel}


def dumps(model, metadata=None) -> str:
    kind = "esn" if isinstance(model, EchoStateNetwork) else "lstm"
    doc = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "model": model.to_dict(),
        "metadata": metadata or {},
    }
    return json.dumps(doc, indent=1) + "\n"


def loads(text):
    """Return ``(model, metadata)`` from an artifact document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"artifact is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise ArtifactError("not a rescast model artifact")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ArtifactError(
            f"artifact format version {doc.get('format_version')!r} unsupported (expected {FORMAT_VERSION})"
        )
    cls = KINDS.get(doc.get("kind"))
    if cls is None:
        raise ArtifactError(f"unknown model kind {doc.get('kind')!r}")
    try:
        model = cls.from_dict(doc["model"])
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        raise ArtifactError(f"malformed {doc['kind']} artifact: {exc}") from None
    return model, doc.get("metadata", {})


def save(path, model, metadata=None):
    Path(path).write_text(dumps(model, metadata), encoding="utf-8")


def load(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ArtifactError(f"cannot read artifact {path}: {exc}") from None
    return loads(text)
