"""Object-count group estimation from previous detection output.

The gateway never inspects the current frame. It reuses the object count
returned by the previous detection on the same stream, exploiting temporal
continuity in video, and maps that count to a group. The optional miscount
knob perturbs the stored count by one to study robustness.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .profiles import NUM_GROUPS


@dataclass(frozen=True)
class StreamState:
    """Per-stream memory: the object count seen in the stream's last response."""

    stream_id: int | str
    last_detected_count: int | None = None


def count_to_group(count: int) -> int:
    """Map an object count to its group: 0..3 map directly, 4+ collapses to group 4."""
    if count < 0:
        raise ValueError(f"object count must be >= 0, got {count}")
    return min(count, NUM_GROUPS - 1)


def estimate_group(state: StreamState, default_count: int) -> int:
    """Estimated group for the stream's next frame.

    Uses the previous detection's count when present; otherwise falls back
    to default_count (the caller's first-frame rule).
    """
    if state.last_detected_count is not None:
        return count_to_group(state.last_detected_count)
    return count_to_group(default_count)


def update_after_response(
    state: StreamState,
    detected_count: int,
    miscount_prob: float = 0.0,
    rng=None,
) -> StreamState:
    """Record the detection output of the frame that just completed.

    With probability miscount_prob the stored count is off by one (sign
    uniform, clamped at zero). rng must provide random() and integers()
    (a numpy Generator does) and is only consulted when miscount_prob > 0.
    """
    if detected_count < 0:
        raise ValueError(f"detected_count must be >= 0, got {detected_count}")
    if not 0.0 <= miscount_prob <= 1.0:
        raise ValueError(f"miscount_prob must be in [0, 1], got {miscount_prob}")
    count = detected_count
    if miscount_prob > 0.0:
        if rng is None:
            raise ValueError("rng is required when miscount_prob > 0")
        if rng.random() < miscount_prob:
            sign = 1 if int(rng.integers(0, 2)) == 1 else -1
            count = max(0, detected_count + sign)
    return replace(state, last_detected_count=count)
