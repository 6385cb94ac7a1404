from .core import DEFAULT_TICK_HZ, SessionCore, frame_geometry, replay_log
from .features import DEFAULT_FEATURE_DIM, FeatureProjection
from .protocol import (
    MESSAGE_TYPES,
    PHASES,
    ProtocolError,
    WireMessage,
    validate_input_frame,
)
from .server import DEFAULT_PORT, create_app, main_port

__all__ = [
    "DEFAULT_TICK_HZ",
    "SessionCore",
    "frame_geometry",
    "replay_log",
    "DEFAULT_FEATURE_DIM",
    "FeatureProjection",
    "MESSAGE_TYPES",
    "PHASES",
    "ProtocolError",
    "WireMessage",
    "validate_input_frame",
    "DEFAULT_PORT",
    "create_app",
    "main_port",
]
