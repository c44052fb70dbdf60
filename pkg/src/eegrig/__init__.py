"""eegrig: hardware-free 8-channel EEG acquisition and streaming DSP rig.

Device-protocol emulation, causal filtering, artifact and alpha detection,
electrode impedance checks, session recording/replay, and a live control +
data streaming service.
"""

__version__ = "0.1.0"

from .protocol import (
    DEFAULT_MONTAGE, DeviceCommand, DeviceConfig, Opcode, RegisterMap,
    SampleFrame, decode_frame, encode_command, encode_frame,
    microvolts_to_raw, raw_to_microvolts,
)
from .chunk import SignalChunk
from .emulator import EmulatedDevice, Scenario
from .session import Marker, SessionMetadata, read_session, replay
