from __future__ import annotations

import argparse
from typing import Any, Tuple


def build_parser(description: str) -> argparse.ArgumentParser:
    """Create an ArgumentParser with consistent defaults across subcommands."""
    return argparse.ArgumentParser(
        description=description,
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )


def count(value: str) -> int:
    """Shot or worker count: a whole number of at least one."""
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a whole number, got {value!r}") from exc
    if parsed < 1:
        raise argparse.ArgumentTypeError(f"count must be at least 1, got {parsed}")
    return parsed


def seed_value(value: str) -> int:
    """Master seed, accepted in decimal or 0x-prefixed hex; must fit in 64 unsigned bits."""
    try:
        parsed = int(value, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {value!r}") from exc
    if not 0 <= parsed < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return parsed


def _scalar(text: str) -> Any:
    lowered = text.strip().lower()
    if lowered in ("inf", "+inf", "infinity"):
        return float("inf")
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text.strip()


def key_value(value: str) -> Tuple[str, Any]:
    """Parse ``key=value``; numbers become int/float, everything else stays a string."""
    key, sep, raw = value.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError("expected key=value")
    if not raw.strip():
        raise argparse.ArgumentTypeError(f"missing value for {key.strip()!r}")
    return key.strip(), _scalar(raw)
