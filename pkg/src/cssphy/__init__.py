"""Chirp-spread-spectrum baseband PHY library.

Modulation and demodulation of chirp symbols, the bit-domain coding chain,
frame assembly and parsing, receiver synchronization with carrier- and
sampling-offset compensation, a channel impairment simulator, and a
Monte-Carlo BER harness with two built-in offset experiments.
"""

from .ber import (
    BerRecord,
    StopRule,
    SweepSpec,
    replicate_fig2,
    replicate_fig3,
    run_point,
    run_sweep,
)
from .channel import (
    ChannelImpairments,
    apply_awgn,
    apply_cfo,
    apply_channel,
    apply_delay,
    apply_fading,
    receiver_rate,
    synthesize_with_sfo,
)
from .codec import (
    deinterleave,
    dewhiten,
    gray_deindex,
    gray_index,
    hamming_decode,
    hamming_encode,
    interleave,
    rx_chain,
    tx_chain,
    whiten,
)
from .demod import DemodResult, dechirp, demod_dft, demod_matched_filter
from .errors import ConfigError, CssPhyError, FramingError, IqFormatError, SyncError
from .framing import (
    Frame,
    FrameConfig,
    build_frame,
    crc16,
    frame_sample_count,
    frame_symbol_count,
    parse_frame,
)
from .iqfile import read_iq, write_iq
from .modulate import IqBuffer, gen_downchirp, gen_symbol, gen_upchirp, modulate_symbols
from .params import LoraParams, make_params
from .receiver import decode_frame, receive_symbols
from .sync import (
    CfoEstimate,
    SfoTracker,
    SyncState,
    compensate_cfo,
    detect_preamble,
    estimate_residual_cfo,
    realign_stream,
    sfo_next_drift,
    synchronize,
)

__version__ = "0.1.0"

__all__ = [
    "BerRecord", "StopRule", "SweepSpec", "replicate_fig2", "replicate_fig3",
    "run_point", "run_sweep",
    "ChannelImpairments", "apply_awgn", "apply_cfo", "apply_channel",
    "apply_delay", "apply_fading", "receiver_rate", "synthesize_with_sfo",
    "deinterleave", "dewhiten", "gray_deindex", "gray_index",
    "hamming_decode", "hamming_encode", "interleave", "rx_chain", "tx_chain", "whiten",
    "DemodResult", "dechirp", "demod_dft", "demod_matched_filter",
    "ConfigError", "CssPhyError", "FramingError", "IqFormatError", "SyncError",
    "Frame", "FrameConfig", "build_frame", "crc16",
    "frame_sample_count", "frame_symbol_count", "parse_frame",
    "read_iq", "write_iq",
    "IqBuffer", "gen_downchirp", "gen_symbol", "gen_upchirp", "modulate_symbols",
    "LoraParams", "make_params",
    "decode_frame", "receive_symbols",
    "CfoEstimate", "SfoTracker", "SyncState", "compensate_cfo", "detect_preamble",
    "estimate_residual_cfo", "realign_stream", "sfo_next_drift", "synchronize",
]
