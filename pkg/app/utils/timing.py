"""Stage timing for pipeline runs."""

import time
from contextlib import contextmanager
from typing import Iterator

from app.utils.constants import SLOW_STAGE_THRESHOLD_S
from app.utils.logger import logger


class StageTimer:
    """Measure and log the wall time of named pipeline stages.

    Features:
    - Accumulates per-stage durations (a stage may run several times)
    - Logs slow stages (> threshold) with a warning
    - Keeps timings out of the session report so reports stay byte-identical
    """

    def __init__(self, slow_threshold_s: float = SLOW_STAGE_THRESHOLD_S):
        self.slow_threshold_s = slow_threshold_s
        self.durations: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        start_time = time.perf_counter()
        try:
            yield
        finally:
            process_time = time.perf_counter() - start_time
            self.durations[name] = self.durations.get(name, 0.0) + process_time

            if process_time >= self.slow_threshold_s:
                logger.warning(f"[SLOW STAGE] {name} - {process_time:.3f}s")
            else:
                logger.debug(f"[STAGE] {name} - {process_time:.3f}s")

    def as_dict(self) -> dict[str, float]:
        return {name: round(value, 6) for name, value in sorted(self.durations.items())}
