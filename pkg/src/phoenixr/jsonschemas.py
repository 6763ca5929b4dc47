"""JSON Schemas describing every file the command line writes."""

from __future__ import annotations

import json
from importlib import resources

NAMES = ("model", "series", "peaks", "fit", "summary", "characterize", "forecast", "truth")


def load(name: str) -> dict:
    """Schema ``name`` (e.g. ``"fit"``); ``$ref`` targets are other schema ids."""
    if name not in NAMES:
        raise KeyError(f"no schema named {name!r}")
    text = resources.files("phoenixr").joinpath("schemas", f"{name}.schema.json").read_text("utf-8")
    return json.loads(text)


def all_schemas() -> dict[str, dict]:
    """Every schema keyed by its ``$id``."""
    return {s["$id"]: s for s in map(load, NAMES)}
