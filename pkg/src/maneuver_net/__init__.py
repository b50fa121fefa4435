"""Lane-change classification and prediction from vehicle-centred video clips."""

__version__ = "0.1.0"

# Bumped whenever an on-disk layout changes (recording, cache container,
# manifest, checkpoint).
FORMAT_VERSION = 1

CLASSES = ("NLC", "LLC", "RLC")
