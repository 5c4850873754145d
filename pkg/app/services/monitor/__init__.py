"""Camera-side motion monitoring: masks, motion detection and cloud extraction."""

from app.services.monitor.camera import CameraModel
from app.services.monitor.detector import MotionDetector, MotionEvent, detect_motion
from app.services.monitor.extraction import mask_to_cloud
from app.services.monitor.mask import Mask, dice_coefficient
from app.services.monitor.plane import Plane, fit_plane, plane_through

__all__ = [
    "CameraModel",
    "MotionDetector",
    "MotionEvent",
    "detect_motion",
    "mask_to_cloud",
    "Mask",
    "dice_coefficient",
    "Plane",
    "fit_plane",
    "plane_through",
]
