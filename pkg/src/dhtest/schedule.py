"""Epoch schedules: the start times t_0 = 0 < t_1 < ... partitioning time."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class EpochSchedule:
    """Epoch start times generated up to (and one past) ``horizon``.

    ``starts`` always includes the first start strictly after ``horizon`` when
    one exists, so ``is_start(t + 1)`` is meaningful for every round t < horizon.
    An explicit schedule has no starts beyond its list; its last epoch is open.
    """

    kind: str
    param: int | None
    horizon: int
    starts: tuple[int, ...] = field(repr=False)

    def __post_init__(self):
        s = self.starts
        if not s or s[0] != 0:
            raise ScheduleError("epoch schedule must start at t_0 = 0")
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ScheduleError(f"epoch start times must be strictly increasing: {list(s)}")
        lengths = [b - a for a, b in zip(s, s[1:])]
        for k, (a, b) in enumerate(zip(lengths, lengths[1:])):
            if b < a:
                raise ScheduleError(
                    f"epoch lengths must be nondecreasing: "
                    f"epoch {k + 1} has length {b} after length {a}"
                )

    @cached_property
    def _start_set(self) -> frozenset[int]:
        return frozenset(self.starts)

    def is_start(self, t: int) -> bool:
        return t in self._start_set

    def __contains__(self, t: int) -> bool:
        return t in self._start_set

    @property
    def lengths(self) -> tuple[int, ...]:
        """Lengths of the closed epochs (those with a known successor start)."""
        s = self.starts
        return tuple(b - a for a, b in zip(s, s[1:]))

    def completed_lengths(self, horizon: int | None = None) -> tuple[int, ...]:
        """Lengths of epochs whose end commit happens at or before ``horizon``."""
        horizon = self.horizon if horizon is None else horizon
        s = self.starts
        return tuple(b - a for a, b in zip(s, s[1:]) if b <= horizon)

    def epoch_ends(self, horizon: int | None = None) -> list[int]:
        horizon = self.horizon if horizon is None else horizon
        return [t for t in self.starts[1:] if t <= horizon]

    def spec(self) -> str:
        if self.kind == "explicit":
            return "explicit:" + ",".join(map(str, self.starts))
        if self.param is None:
            return self.kind
        return f"{self.kind}:{self.param}"


def _until(horizon: int, step) -> tuple[int, ...]:
    starts = [0]
    k = 0
    while starts[-1] <= horizon:
        starts.append(starts[-1] + step(k))
        k += 1
    return tuple(starts)


def make_schedule(kind: str, param=None, horizon: int = 0) -> EpochSchedule:
    """Build a schedule covering [0, horizon].

    constant L    -> t_k = k L
    linear        -> lengths 1, 2, 3, ...
    exponential a -> t_1 = 1, t_{k+1} = t_k + a^k
    explicit list -> the given start times, validated
    """
    if horizon < 0:
        raise ScheduleError("horizon must be nonnegative")
    if kind == "constant":
        L = int(param)
        if L < 1:
            raise ScheduleError("constant epoch length must be >= 1")
        return EpochSchedule(kind, L, horizon, _until(horizon, lambda k: L))
    if kind == "linear":
        return EpochSchedule(kind, None, horizon, _until(horizon, lambda k: k + 1))
    if kind == "exponential":
        a = int(param)
        if a < 1 or a != param:
            raise ScheduleError("exponential base must be an integer >= 1")
        # first epoch is [0, 1); afterwards t_{k+1} - t_k = a^k for k >= 1
        return EpochSchedule(kind, a, horizon, _until(horizon, lambda k: 1 if k == 0 else a ** k))
    if kind == "explicit":
        starts = tuple(int(t) for t in param)
        return EpochSchedule(kind, None, horizon, starts)
    raise ScheduleError(f"unknown schedule kind {kind!r}")


def parse_schedule(text: str | Sequence[int], horizon: int) -> EpochSchedule:
    """Parse ``constant:L``, ``linear``, ``exponential:a`` or ``explicit:0,2,4``."""
    if not isinstance(text, str):
        return make_schedule("explicit", list(text), horizon)
    kind, _, arg = text.strip().partition(":")
    kind = kind.strip()
    if kind == "linear":
        return make_schedule("linear", None, horizon)
    if kind == "explicit":
        arg = arg.strip().strip("[]")
        return make_schedule("explicit", [int(x) for x in arg.split(",") if x.strip()], horizon)
    if kind in ("constant", "exponential"):
        if not arg:
            raise ScheduleError(f"schedule {kind!r} needs a parameter, e.g. {kind}:2")
        try:
            value = int(arg)
        except ValueError:
            raise ScheduleError(f"bad {kind} schedule parameter {arg!r}") from None
        return make_schedule(kind, value, horizon)
    raise ScheduleError(f"unknown schedule kind {kind!r}")
