"""ERP analysis for inhibition and set-shifting paradigms, with a dipole simulator
and spherical-head sLORETA source localization."""

from .signal_core import (Epoch, ErpAverage, Event, Montage, Recording, read_recording,
                          select_channels, write_recording)

__all__ = ["Epoch", "ErpAverage", "Event", "Montage", "Recording", "read_recording",
           "select_channels", "write_recording"]
__version__ = "0.1.0"
