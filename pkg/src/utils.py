import math
from typing import Optional


def format_duration(seconds: float) -> str:
    """Formats a duration in seconds into a human-readable string."""
    if seconds < 0:
        return "0s"

    total_seconds = int(seconds)
    milliseconds = int((seconds - total_seconds) * 1000)

    days, remainder = divmod(total_seconds, 86400)
    hours, remainder = divmod(remainder, 3600)
    minutes, secs = divmod(remainder, 60)

    parts = []
    if days > 0:
        parts.append(f"{days}d")
    if hours > 0:
        parts.append(f"{hours}h")
    if minutes > 0:
        parts.append(f"{minutes}m")
    if secs > 0:
        parts.append(f"{secs}s")
    if milliseconds > 0 and not parts:
        # Only show ms when the duration is below one second
        parts.append(f"{milliseconds}ms")
    elif not parts:
        return "0s"

    return " ".join(parts)


def parse_unbounded_int(text: str) -> Optional[int]:
    """Parse a positive integer, where 'inf' / 'none' mean unbounded (None)."""
    if text.strip().lower() in ("inf", "none", "unbounded"):
        return None
    value = int(text)
    if value < 1:
        raise ValueError(f"expected a positive integer, got {value}")
    return value


def parse_unbounded_float(text: str) -> Optional[float]:
    """Parse a positive real, where 'inf' / 'none' mean unbounded (None)."""
    if text.strip().lower() in ("inf", "none", "unbounded"):
        return None
    value = float(text)
    if not math.isfinite(value) or value <= 0:
        raise ValueError(f"expected a positive number, got {value}")
    return value
