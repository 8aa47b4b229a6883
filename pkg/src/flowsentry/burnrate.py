"""Multi-window burn-rate escalation of threshold-crossing events.

Every budget event feeds one shared event stream; alert levels differ only in
their window pair and burn threshold. A level fires only when BOTH its long and
short windows burn strictly above its threshold, which suppresses transient
bursts that clear the short window without sustained budget consumption.

Windows operate on stream event time (minutes), not wall clock, so replays are
deterministic. An event with timestamp t is counted by a window of length w at
query time `now` iff t in (now - w, now]; eviction is lazy at each update.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .exceptions import DataError


@dataclass(frozen=True)
class BudgetConfig:
    """Allowed threshold-crossing events per SLO period (minutes)."""

    events: float
    period_minutes: float

    def __post_init__(self):
        if self.events <= 0 or self.period_minutes <= 0:
            raise ValueError("budget events and period must be positive")

    @property
    def sustainable_rate(self) -> float:
        return self.events / self.period_minutes


@dataclass(frozen=True)
class AlertLevel:
    """One escalation level: paired long/short windows (minutes) and burn threshold."""

    name: str
    long_window: float
    short_window: float
    burn_threshold: float

    def __post_init__(self):
        if not self.short_window < self.long_window:
            raise ValueError("short window must be shorter than the long window")
        if self.burn_threshold <= 0:
            raise ValueError("burn threshold must be positive")


DEFAULT_ALERT_LEVELS = (
    AlertLevel("page-fast", long_window=60.0, short_window=5.0, burn_threshold=14.4),
    AlertLevel("page-slow", long_window=360.0, short_window=30.0, burn_threshold=6.0),
    AlertLevel("ticket", long_window=4320.0, short_window=360.0, burn_threshold=1.0),
)

NO_ALERT = "none"


def burn_rate(event_count: float, window_minutes: float, budget: BudgetConfig) -> float:
    """Observed event rate in the window relative to the sustainable budget rate."""
    if window_minutes <= 0:
        raise ValueError("window length must be positive")
    return (event_count / window_minutes) / budget.sustainable_rate


@dataclass(frozen=True)
class LevelBurn:
    name: str
    b_short: float
    b_long: float
    fired: bool


class BurnRateMonitor:
    """Sliding-window event counters for all levels plus the escalation rule.

    Single-writer: record_event calls must be sequential per stream. Memory is
    bounded by the number of events inside the longest configured window.
    """

    def __init__(self, budget: BudgetConfig, levels=DEFAULT_ALERT_LEVELS):
        self.budget = budget
        self.levels = tuple(levels)
        if not self.levels:
            raise ValueError("need at least one alert level")
        windows = set()
        for level in self.levels:
            windows.add(level.long_window)
            windows.add(level.short_window)
        self._queues: dict[float, deque[float]] = {w: deque() for w in sorted(windows)}
        self._now: float | None = None

    @property
    def current_time(self) -> float | None:
        return self._now

    def _evict(self, now: float) -> None:
        for window, queue in self._queues.items():
            cutoff = now - window
            while queue and queue[0] <= cutoff:
                queue.popleft()

    def record_event(self, timestamp: float, crossed: int) -> None:
        """Advance stream time; append the event to every window when crossed is 1."""
        if self._now is not None and timestamp < self._now:
            raise DataError(f"event time regresses: {timestamp} after {self._now}")
        self._now = timestamp
        self._evict(timestamp)
        if crossed:
            for queue in self._queues.values():
                queue.append(timestamp)

    def window_count(self, window_minutes: float) -> int:
        if self._now is not None:
            self._evict(self._now)
        return len(self._queues[window_minutes])

    def level_burns(self) -> list[LevelBurn]:
        """Current burn rates per level, in escalation order."""
        burns = []
        for level in self.levels:
            b_long = burn_rate(self.window_count(level.long_window), level.long_window, self.budget)
            b_short = burn_rate(self.window_count(level.short_window), level.short_window, self.budget)
            fired = b_long > level.burn_threshold and b_short > level.burn_threshold
            burns.append(LevelBurn(level.name, b_short, b_long, fired))
        return burns

    def escalate(self) -> str:
        """First level (most severe first) whose long AND short burns strictly exceed its threshold."""
        for entry in self.level_burns():
            if entry.fired:
                return entry.name
        return NO_ALERT
