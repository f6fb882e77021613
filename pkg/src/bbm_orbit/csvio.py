"""Small deterministic CSV writer shared by the exporters.

Floats are rendered with repr (shortest round-trip form) so identical runs
produce byte-identical files; an optional trailing comment line carries
provenance such as the config hash.
"""

from __future__ import annotations

from typing import Iterable, Sequence


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int,)):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return value
    try:
        return repr(float(value))
    except (TypeError, ValueError):
        return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], trailer: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")
        if trailer is not None:
            fh.write(f"# {trailer}\n")
