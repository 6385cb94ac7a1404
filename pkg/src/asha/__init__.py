"""Assistive teleoperation via autonomous skill pre-training and
human-in-the-loop interface learning, at desk scale."""

__version__ = "0.1.0"
