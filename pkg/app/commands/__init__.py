from . import fringes, noise, recording, srt

MODULES = (fringes, noise, recording, srt)

__all__ = ["MODULES", "fringes", "noise", "recording", "srt"]
