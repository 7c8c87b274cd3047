"""Viewer-style trace records shared by the text and jsonl renderers."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TraceLine:
    """One activation change or termination, as the execution viewer shows it."""

    time_ms: int
    behavior: str
    priority: int
    change: str  # '+' for activation, '-' for deactivation or termination
    success: bool
    cause: str | None = None


def format_text(line: TraceLine) -> str:
    cause = f"  {line.cause}" if line.cause else ""
    return (
        f"{line.time_ms / 1000.0:9.3f}  {line.behavior:<42} "
        f"P={line.priority} T={line.change} S={'Y' if line.success else 'N'}{cause}"
    )


def to_record(line: TraceLine) -> dict:
    return {
        "time_ms": line.time_ms,
        "behavior": line.behavior,
        "P": line.priority,
        "T": line.change,
        "S": "Y" if line.success else "N",
        "cause": line.cause,
    }
