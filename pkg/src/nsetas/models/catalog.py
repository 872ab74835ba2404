"""
Pydantic models for event catalogs.

A catalog is an ordered sequence of (time, magnitude) events together with
the observation window [S, T] and the threshold magnitude Mz that every
downstream fit uses. Events before S may be kept as history-only events:
they enter triggering sums but not the likelihood's summation term.

Catalogs are immutable after construction; the numpy views used by the
kernels are computed once and cached.
"""

from __future__ import annotations

from functools import cached_property
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from nsetas.core.exceptions import ValidationError


class Event(BaseModel):
    """A single catalog entry."""

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    time: float = Field(..., ge=0, description="Days elapsed since the origin epoch")
    magnitude: float = Field(..., description="Event magnitude")
    history: bool = Field(
        default=False,
        description="True for events before the window start (triggering history only)",
    )


def event_sort_key(index: int, event: Event) -> tuple[float, float, int]:
    """Stable ordering for simultaneous events: time, larger magnitude first, input order."""
    return (event.time, -event.magnitude, index)


class Catalog(BaseModel):
    """
    Ordered event sequence with an observation window and threshold magnitude.

    Invariants:
        - events are sorted by time (ties in the deterministic parse order)
        - in-window events satisfy window_start <= time <= window_end
        - history events satisfy time < window_start
        - every event satisfies magnitude >= threshold
    """

    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)

    events: tuple[Event, ...] = Field(default_factory=tuple)
    window_start: float = Field(..., description="S, start of the observation window (days)")
    window_end: float = Field(..., description="T, end of the observation window (days)")
    threshold: float = Field(..., description="Mz, threshold magnitude")
    origin_epoch: Optional[str] = Field(
        default=None, description="ISO-8601 origin of the time axis (metadata only)"
    )

    @model_validator(mode="after")
    def check_invariants(self) -> "Catalog":
        """Enforce ordering, window membership and threshold."""
        if self.window_start > self.window_end:
            raise ValueError(
                f"window_start {self.window_start} exceeds window_end {self.window_end}"
            )
        previous = -np.inf
        for i, event in enumerate(self.events):
            if event.time < previous:
                raise ValueError(f"events are not sorted by time at position {i}")
            previous = event.time
            if event.history:
                if event.time >= self.window_start:
                    raise ValueError(
                        f"history event at t={event.time} is not before the window start"
                    )
            elif not self.window_start <= event.time <= self.window_end:
                raise ValueError(
                    f"event at t={event.time} lies outside "
                    f"[{self.window_start}, {self.window_end}]"
                )
            if event.magnitude < self.threshold:
                raise ValueError(
                    f"event at t={event.time} has magnitude {event.magnitude} "
                    f"below the threshold {self.threshold}"
                )
        return self

    # ==================== Array views ====================

    @cached_property
    def times(self) -> np.ndarray:
        """Occurrence times of all events, history included."""
        return np.array([e.time for e in self.events], dtype=float)

    @cached_property
    def magnitudes(self) -> np.ndarray:
        """Magnitudes of all events, history included."""
        return np.array([e.magnitude for e in self.events], dtype=float)

    @cached_property
    def is_history(self) -> np.ndarray:
        """Boolean mask of history-only events."""
        return np.array([e.history for e in self.events], dtype=bool)

    @cached_property
    def excess_magnitudes(self) -> np.ndarray:
        """M_i - Mz for all events."""
        return self.magnitudes - self.threshold

    @cached_property
    def target_index(self) -> np.ndarray:
        """Positions of the in-window events within ``events``."""
        return np.flatnonzero(~self.is_history)

    @property
    def target_times(self) -> np.ndarray:
        """Occurrence times of in-window events."""
        return self.times[self.target_index]

    @property
    def n_events(self) -> int:
        """N, the number of in-window events."""
        return int(self.target_index.size)

    @property
    def n_history(self) -> int:
        """Number of history-only events."""
        return len(self.events) - self.n_events

    @property
    def window(self) -> tuple[float, float]:
        """The observation window (S, T)."""
        return (self.window_start, self.window_end)

    @property
    def duration(self) -> float:
        """T - S in days."""
        return self.window_end - self.window_start

    # ==================== Derived catalogs ====================

    def filter(
        self,
        threshold: Optional[float] = None,
        window: Optional[tuple[float, float]] = None,
        history_start: Optional[float] = None,
    ) -> "Catalog":
        """
        Apply a threshold, an observation window and a history window.

        Events with magnitude below the threshold are removed, events in
        [history_start, S) are tagged history-only, and events outside
        [history_start, T] are dropped. The default history_start is S.

        Args:
            threshold: New threshold magnitude (default: keep current)
            window: New (S, T) (default: keep current)
            history_start: Start of the history window (default: S)

        Returns:
            The filtered catalog

        Raises:
            ValidationError: If history_start <= S <= T does not hold
        """
        mz = self.threshold if threshold is None else float(threshold)
        start, end = self.window if window is None else (float(window[0]), float(window[1]))
        hist = start if history_start is None else float(history_start)
        if not hist <= start <= end:
            raise ValidationError(
                "history_start <= window start <= window end must hold",
                field="window",
                value=(hist, start, end),
            )

        kept = []
        for event in self.events:
            if event.magnitude < mz or event.time < hist or event.time > end:
                continue
            history = event.time < start
            if history != event.history:
                event = event.model_copy(update={"history": history})
            kept.append(event)

        return Catalog(
            events=tuple(kept),
            window_start=start,
            window_end=end,
            threshold=mz,
            origin_epoch=self.origin_epoch,
        )

    def sub_window(
        self,
        start: float,
        end: float,
        *,
        keep_history: bool = True,
        right_open: bool = False,
    ) -> "Catalog":
        """
        Restrict the catalog to [start, end] keeping earlier events as history.

        Args:
            start: New window start
            end: New window end
            keep_history: If False, events before ``start`` are dropped
            right_open: If True, an event exactly at ``end`` is excluded

        Returns:
            Catalog over the new window with the same threshold
        """
        kept = []
        for event in self.events:
            if event.time > end or (right_open and event.time >= end):
                continue
            history = event.time < start
            if history and not keep_history:
                continue
            if history != event.history:
                event = event.model_copy(update={"history": history})
            kept.append(event)
        return Catalog(
            events=tuple(kept),
            window_start=start,
            window_end=end,
            threshold=self.threshold,
            origin_epoch=self.origin_epoch,
        )

    def summary(self) -> dict[str, float | int | str | None]:
        """Short description used by CLI headers and manifests."""
        return {
            "events": self.n_events,
            "history_events": self.n_history,
            "window_start": self.window_start,
            "window_end": self.window_end,
            "threshold": self.threshold,
            "origin_epoch": self.origin_epoch,
        }
