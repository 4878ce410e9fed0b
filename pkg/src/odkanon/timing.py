"""Cooperative wall-clock deadlines for long loops."""

from __future__ import annotations

import time

from .errors import DeadlineExceeded


class Deadline:
    """Checked by long-running loops; raises :class:`DeadlineExceeded` once past due."""

    def __init__(self, seconds: float | None):
        self.seconds = seconds
        self.start = time.perf_counter()
        self.at = None if seconds is None else self.start + seconds

    def expired(self) -> bool:
        return self.at is not None and time.perf_counter() >= self.at

    def check(self) -> None:
        if self.expired():
            raise DeadlineExceeded(f"time limit of {self.seconds} s exceeded")

    def elapsed(self) -> float:
        return time.perf_counter() - self.start
