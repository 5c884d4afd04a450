"""ionclock: a desk-scale simulator of a cavity-stabilized laser locked
to a trapped-ion optical clock, plus the metrology used to analyze it."""

from .bench import Bench, BenchConfig, ClockConfig, ProbePulse, TimingConfig, preset_bench, quiet_bench
from .chain import (
    COIL_REFERENCE,
    DriftProcess,
    LockTarget,
    ServoConfig,
    TempScenario,
    apply_cavity_lock,
    apply_sbs_stage,
    coil_drift,
    pump_coil_locked_model,
    pump_free_model,
    resolve_preset,
    sbs_coil_locked_model,
    sbs_free_model,
)
from .clock import (
    ClockRun,
    ClockServoState,
    DriftInjection,
    DualClockRun,
    clock_cycle,
    dual_clock_run,
    recover_drift,
    run_clock,
)
from .errors import (
    ClockUnlockError,
    ConfigError,
    CoverageError,
    DegenerateDataError,
    DomainError,
    InsufficientDataError,
    IonClockError,
    SelectionRuleError,
)
from .experiments import (
    InterleaveSchedule,
    RamseyResult,
    ScanPlan,
    ScanResult,
    SpamResult,
    min_shelve_pulses,
    rabi_scan,
    ramsey_scan,
    run_interleaved,
    spam_experiment,
    waterfall_spectroscopy,
)
from .ion import (
    DetectionConfig,
    IonState,
    MotionalConfig,
    PumpConfig,
    ShotRecord,
    TransitionTable,
    detect,
    evolve_pulse,
    optical_pump,
    shelve_multi,
    zeeman_table,
)
from .metrology import (
    AdevResult,
    CoherenceFit,
    LineshapeFit,
    LinewidthReport,
    allan_deviation,
    coherence_linewidth,
    coherence_time,
    fit_contrast_decay,
    fit_lineshape,
    ilw_beta_separation,
    ilw_reverse_one_over_pi,
    linewidth_report,
    white_fm_adev,
)
from .noise import (
    Bump,
    FrequencyTrace,
    NoiseModel,
    PsdEstimate,
    StagePreset,
    estimate_psd,
    evaluate_psd,
    fundamental_linewidth_hz,
    synthesize_trace,
)

__version__ = "0.1.0"
