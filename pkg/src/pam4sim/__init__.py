"""PAM-4 IM/DD optical link simulator with receiver DSP and BER sweeps."""

from .channel import LinkConfig, transmit
from .exceptions import AliasingError, DivergenceError, SyncError
from .framing import FrameLayout, build_frame, demap_pam4, generate_msequence, map_bits_to_pam4
from .harness import SimConfig, SweepSpec, emit_csv, run_single, run_sweep
from .link import DspConfig, simulate_frame
from .metrics import FEC_THRESHOLDS, BerReport, count_ber, fading_profile, net_rate, optical_spectrum

__version__ = "0.1.0"

__all__ = [
    "AliasingError", "BerReport", "DivergenceError", "DspConfig", "FEC_THRESHOLDS", "FrameLayout",
    "LinkConfig", "SimConfig", "SweepSpec", "SyncError", "build_frame", "count_ber", "demap_pam4",
    "emit_csv", "fading_profile", "generate_msequence", "map_bits_to_pam4", "net_rate",
    "optical_spectrum", "run_single", "run_sweep", "simulate_frame", "transmit",
]
