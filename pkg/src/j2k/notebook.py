"""Reading notebook documents and extracting step markers."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace

from j2k.errors import InvalidMarker, MalformedDocument, UnsupportedFormat

MARKER_RE = re.compile(r"^# j2k: step(?:[ \t]+(?P<name>.*))?$")
SLUG_MAX = 40


@dataclass(frozen=True)
class Cell:
    index: int
    source: str
    marker: str | None = None


@dataclass(frozen=True)
class Notebook:
    format_version: str
    cells: tuple[Cell, ...] = ()
    kernel_language: str = ""
    skipped_count: int = 0


def _join_source(value, where: str) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, list) and all(isinstance(line, str) for line in value):
        return "".join(value)
    raise MalformedDocument(f"{where}: 'source' must be a string or a list of strings")


def parse_notebook(raw: bytes) -> Notebook:
    """Parse raw ``.ipynb`` bytes into a :class:`Notebook` of code cells.

    Markdown and raw cells are dropped and counted in ``skipped_count``.
    Only major format version 4 is accepted.
    """
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedDocument(f"notebook is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"notebook is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedDocument("notebook root must be a JSON object")
    if "cells" not in doc:
        raise MalformedDocument("notebook has no 'cells' field")
    cells = doc["cells"]
    if not isinstance(cells, list):
        raise MalformedDocument("'cells' must be a list")

    major = doc.get("nbformat")
    minor = doc.get("nbformat_minor", 0)
    if not isinstance(major, int) or not isinstance(minor, int):
        raise MalformedDocument("'nbformat' and 'nbformat_minor' must be integers")
    if major != 4:
        raise UnsupportedFormat(f"unsupported notebook format version {major} (only 4 is supported)")

    metadata = doc.get("metadata") or {}
    language = ""
    if isinstance(metadata, dict):
        info = metadata.get("language_info") or {}
        kernelspec = metadata.get("kernelspec") or {}
        if isinstance(info, dict):
            language = str(info.get("name", "") or "")
        if not language and isinstance(kernelspec, dict):
            language = str(kernelspec.get("language", "") or "")

    code_cells: list[Cell] = []
    skipped = 0
    for position, raw_cell in enumerate(cells):
        if not isinstance(raw_cell, dict) or "cell_type" not in raw_cell:
            raise MalformedDocument(f"cell {position} is not a notebook cell object")
        if raw_cell["cell_type"] != "code":
            skipped += 1
            continue
        source = _join_source(raw_cell.get("source", ""), f"cell {position}")
        code_cells.append(Cell(index=len(code_cells), source=source))

    return Notebook(
        format_version=f"{major}.{minor}",
        cells=tuple(code_cells),
        kernel_language=language,
        skipped_count=skipped,
    )


def slugify(name: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", name.lower()).strip("-")
    return slug[:SLUG_MAX].rstrip("-")


def _split_marker(source: str) -> tuple[str | None, str]:
    """Return (raw marker name, source without the marker line) or (None, source)."""
    lines = source.splitlines(keepends=True)
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        match = MARKER_RE.match(stripped)
        if match is None:
            return None, source
        return (match.group("name") or "").strip(), "".join(lines[:i] + lines[i + 1 :])
    return None, source


def extract_markers(notebook: Notebook) -> Notebook:
    """Move ``# j2k: step <name>`` lines out of cell sources into ``Cell.marker``.

    Cells that already carry a marker are left alone, which makes the
    operation idempotent. Duplicate slugs get ``-2``, ``-3`` suffixes.
    """
    taken: set[str] = {c.marker for c in notebook.cells if c.marker}
    cells: list[Cell] = []
    for cell in notebook.cells:
        if cell.marker:
            cells.append(cell)
            continue
        raw_name, source = _split_marker(cell.source)
        if raw_name is None:
            cells.append(cell)
            continue
        slug = slugify(raw_name)
        if not slug:
            raise InvalidMarker(f"step marker has an empty or invalid name {raw_name!r}", cell=cell.index)
        unique = slug
        n = 2
        while unique in taken:
            unique = f"{slug}-{n}"
            n += 1
        taken.add(unique)
        cells.append(replace(cell, marker=unique, source=source))
    return replace(notebook, cells=tuple(cells))
