"""Ensemble Kalman filter calibration of computer models."""

from ._enkfcal import *  # noqa: F401,F403
from ._enkfcal import __doc__  # noqa: F401

__version__ = "0.1.0"
