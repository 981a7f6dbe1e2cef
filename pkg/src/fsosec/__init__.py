"""Physical-layer-security toolkit for intensity-modulated optical links.

Simulates a quasi-static fading wiretap channel, recovers symbols from
sampled waveforms, and estimates secrecy metrics: hard/soft mutual
information, instantaneous / long-span / ergodic secrecy rates, outage
curves, turbulence statistics, and finite-length leakage bounds.
"""

from .atmosphere import AtmosStats, cn2_from_rytov, compute_atmos, scintillation_index
from .errors import (
    ConfigError,
    EstimationError,
    FsosecError,
    InfeasibleRateError,
    PrbsError,
    SyncError,
)
from .fading import (
    ChannelParams,
    GroundTruth,
    PrbsSpec,
    SimConfig,
    WaveformRecord,
    gen_prbs15,
    sample_gains,
    synthesize_waveform,
    wiretap_run,
)
from .finite_length import (
    CodeParams,
    ExponentCurve,
    exponent_curve,
    gallager_cumulant,
    leakage_bound,
    rate_split_curve,
    repetition_curve,
    required_length,
    secrecy_exponent,
)
from .metrics import (
    BinWidthChoice,
    InputDist,
    SecrecyReport,
    SlotMetrics,
    TransitionTable,
    bin_width_sweep,
    ergodic_rate,
    hard_transition,
    long_span_rate,
    mutual_info_hard,
    mutual_info_soft,
    optimize_threshold,
    outage_curve,
    select_bin_width,
    slot_metrics,
    soft_transition,
)
from .recovery import (
    SymbolFrame,
    SyncResult,
    build_frame,
    frame_sync,
    low_pass,
    recover_frame,
    symbol_timing,
)
from .waveio import read_waveform, write_waveform

__version__ = "0.1.0"
