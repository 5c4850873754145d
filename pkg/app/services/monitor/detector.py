"""Object-motion detection from a stream of segmentation masks."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Literal

from app.services.monitor.mask import Mask, dice_coefficient
from app.utils.constants import DICE_THRESHOLD
from app.utils.errors import InvalidArgumentError, UndefinedDiceError
from app.utils.logger import get_logger

logger = get_logger("monitor")

DetectionMode = Literal["reference", "sliding"]


@dataclass(frozen=True)
class MotionEvent:
    frame: int
    dice: float
    reference_frame: int


class MotionDetector:
    """Compares every incoming mask with a reference and flags the first drop below the threshold.

    In ``reference`` mode the comparison is the last confirmed-stationary mask;
    in ``sliding`` mode it is the mask ``lag`` frames back. After an event the
    detector stays latched until :meth:`reset` (compensation finished).
    One instance per scan session; not thread-safe.
    """

    def __init__(self, threshold: float = DICE_THRESHOLD, mode: DetectionMode = "reference", lag: int = 1):
        if not 0.0 < threshold < 1.0:
            raise InvalidArgumentError(f"Dice threshold must lie in (0, 1), got {threshold}")
        if mode not in ("reference", "sliding"):
            raise InvalidArgumentError(f"unknown detection mode {mode!r}")
        if lag < 1:
            raise InvalidArgumentError("sliding lag must be at least 1")
        self.threshold = threshold
        self.mode = mode
        self.lag = lag
        self.frame = -1
        self.latched = False
        self._reference: tuple[int, Mask] | None = None
        self._history: deque[tuple[int, Mask]] = deque(maxlen=lag)

    @property
    def reference_frame(self) -> int | None:
        return None if self._reference is None else self._reference[0]

    def reset(self, mask: Mask | None = None) -> None:
        """Unlatch; the next mask (or ``mask``) becomes the stationary reference."""
        self.latched = False
        self._history.clear()
        self._reference = None if mask is None else (self.frame, mask)
        if mask is not None:
            self._history.append((self.frame, mask))
        logger.debug(f"[MOTION] detector reset at frame {self.frame}")

    def _comparison(self) -> tuple[int, Mask] | None:
        if self.mode == "reference":
            return self._reference
        if len(self._history) < self.lag:
            return None
        return self._history[0]

    def observe(self, mask: Mask) -> MotionEvent | None:
        """Feed the next frame; returns an event on the first frame that fails the dice test."""
        self.frame += 1
        comparison = self._comparison()
        event = None

        if comparison is not None and not self.latched:
            reference_frame, reference = comparison
            try:
                dice = dice_coefficient(mask, reference)
            except UndefinedDiceError:
                logger.warning(f"[MOTION] frame {self.frame}: both masks empty, treating as motion")
                dice = 0.0
            if dice < self.threshold:
                event = MotionEvent(frame=self.frame, dice=dice, reference_frame=reference_frame)
                self.latched = True
                logger.info(
                    f"[MOTION] detected at frame {self.frame}: dice={dice:.4f} vs frame {reference_frame}"
                )

        if self.mode == "reference" and self._reference is None:
            self._reference = (self.frame, mask)
        self._history.append((self.frame, mask))
        return event


def detect_motion(
    masks: Iterable[Mask],
    threshold: float = DICE_THRESHOLD,
    mode: DetectionMode = "reference",
    lag: int = 1,
    reset_after_event: bool = True,
) -> list[MotionEvent | None]:
    """Run a detector over a finished stream, one entry per frame.

    With ``reset_after_event`` the frame that raised an event becomes the new
    reference, as if compensation completed immediately.
    """
    detector = MotionDetector(threshold, mode, lag)
    events: list[MotionEvent | None] = []
    for mask in masks:
        event = detector.observe(mask)
        if event is not None and reset_after_event:
            detector.reset(mask)
        events.append(event)
    return events
