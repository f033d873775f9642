# biaslab/utils.py
# Small helpers shared by the command handlers: query-syntax parsers,
# comma-separated name lists and duration formatting.

import re
from typing import Optional, Tuple

from biaslab.errors import UsageError

_NAME = r"[A-Za-z_]\w*"


# Formats a duration in seconds into a human-readable string (e.g., "95.0 seconds (approx. 1.6 minutes)").
def format_duration(seconds: float) -> str:
    if seconds < 120:
        return f"{seconds:.1f} seconds"

    minutes = seconds / 60
    if minutes < 120:
        return f"{seconds:.0f} seconds (approx. {minutes:.1f} minutes)"

    hours = minutes / 60
    return f"{seconds:.0f} seconds (approx. {hours:.1f} hours)"


def parse_names(text: Optional[str]) -> Tuple[str, ...]:
    # "Z, U1,U2" -> ("Z", "U1", "U2"); None or "" -> ()
    if not text:
        return ()
    names = tuple(part.strip() for part in text.split(",") if part.strip())
    for name in names:
        if not re.fullmatch(_NAME, name):
            raise UsageError(f"'{name}' is not a valid variable name")
    return names


def parse_point(text: str) -> Tuple[float, float]:
    # "1,0.5" -> (1.0, 0.5)
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise UsageError(f"expected an evaluation point 'x,z', got '{text}'")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise UsageError(f"evaluation point '{text}' is not numeric") from None


class QueryParser:
    """Parser for the dsep and taxonomy query syntax."""

    SEPARATION_PATTERN = re.compile(rf"^\s*({_NAME})\s*_\|\|_\s*({_NAME})\s*(?:\|\s*(.*?))?\s*$")
    EFFECT_PATTERN = re.compile(rf"^\s*({_NAME})\s*->\s*({_NAME})\s*(?:\|\s*(.*?))?\s*$")

    @staticmethod
    def parse_separation(text: str) -> Tuple[str, str, Tuple[str, ...]]:
        """
        Parses 'A _||_ B | C,D'. The conditioning part is optional.
        Returns (a, b, given).
        """
        match = QueryParser.SEPARATION_PATTERN.match(text)
        if not match:
            raise UsageError(f"cannot parse separation query '{text}' (expected 'A _||_ B | C,D')")
        return match.group(1), match.group(2), parse_names(match.group(3))

    @staticmethod
    def parse_effect(text: str) -> Tuple[str, str, Tuple[str, ...]]:
        """
        Parses 'X -> Y | S1,S2'. The conditioning part is optional.
        Returns (treatment, outcome, conditioned).
        """
        match = QueryParser.EFFECT_PATTERN.match(text)
        if not match:
            raise UsageError(f"cannot parse taxonomy query '{text}' (expected 'X -> Y | S1')")
        return match.group(1), match.group(2), parse_names(match.group(3))
