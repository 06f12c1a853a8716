"""Tools for making simulated room impulse responses sound like measured
ones: waveform-domain translation, sub-band gain equalization, acoustic
parameter estimation, and far-field speech augmentation.
"""

from .audio import (
    Domain,
    ImpulseResponse,
    Spectrogram,
    load_waveform,
    magnitude_response,
    normalize_rir,
    resample,
    spectrogram,
    write_waveform,
)
from .acoustics import (
    AcousticParams,
    DecayCurve,
    acoustic_params,
    estimate_cte,
    estimate_drr,
    estimate_edt,
    estimate_t60,
    schroeder_curve,
)
from .equalization import (
    BAND_CENTERS_HZ,
    FirFilter,
    GainMixture,
    RelativeGainVector,
    SubBandEqualizer,
    design_fir,
    equalize,
    fit_gmm,
    load_gmm,
    relative_gains,
    sample_gains,
    save_gmm,
    spectrum_band_gains,
)
from .tsrirgan import (
    Checkpoint,
    DiscriminatorConfig,
    GeneratorConfig,
    RirTranslator,
    Trainer,
    TrainingConfig,
    TsRirGan,
    adversarial_loss,
    cycle_loss,
    full_objective,
    identity_loss,
    load_checkpoint,
    models_from_checkpoint,
    save_checkpoint,
    trainer_from_checkpoint,
    translate,
)
from .augment import (
    FarFieldUtterance,
    NoiseSpec,
    augment,
    compute_lambda,
    convolve_full,
    generate_corpus,
    loop_noise,
)
from .datasets import DatasetManifest, ManifestEntry, build_manifest, load_manifest, save_manifest, split_counts
from .pipeline import Combination, PipelinePlan, export_spectrograms, report_params, run_pipeline
from .errors import (
    AllZeroInputError,
    AudioFileError,
    CheckpointCorruptError,
    CheckpointError,
    CheckpointVersionError,
    DegenerateDataError,
    EmptyCorpusError,
    InsufficientDecayError,
    NaNLossError,
    RirPostError,
    ZeroEnergyError,
)

__version__ = "1.0.0"

__all__ = [
    "AcousticParams",
    "AllZeroInputError",
    "AudioFileError",
    "BAND_CENTERS_HZ",
    "Checkpoint",
    "CheckpointCorruptError",
    "CheckpointError",
    "CheckpointVersionError",
    "Combination",
    "DatasetManifest",
    "DecayCurve",
    "DegenerateDataError",
    "DiscriminatorConfig",
    "Domain",
    "EmptyCorpusError",
    "FarFieldUtterance",
    "FirFilter",
    "GainMixture",
    "GeneratorConfig",
    "ImpulseResponse",
    "InsufficientDecayError",
    "ManifestEntry",
    "NaNLossError",
    "NoiseSpec",
    "PipelinePlan",
    "RelativeGainVector",
    "RirPostError",
    "RirTranslator",
    "Spectrogram",
    "SubBandEqualizer",
    "Trainer",
    "TrainingConfig",
    "TsRirGan",
    "ZeroEnergyError",
    "acoustic_params",
    "adversarial_loss",
    "augment",
    "build_manifest",
    "compute_lambda",
    "convolve_full",
    "cycle_loss",
    "design_fir",
    "equalize",
    "estimate_cte",
    "estimate_drr",
    "estimate_edt",
    "estimate_t60",
    "export_spectrograms",
    "fit_gmm",
    "full_objective",
    "generate_corpus",
    "identity_loss",
    "load_checkpoint",
    "load_gmm",
    "load_manifest",
    "load_waveform",
    "loop_noise",
    "magnitude_response",
    "models_from_checkpoint",
    "normalize_rir",
    "relative_gains",
    "report_params",
    "resample",
    "run_pipeline",
    "sample_gains",
    "save_checkpoint",
    "save_gmm",
    "save_manifest",
    "schroeder_curve",
    "spectrogram",
    "spectrum_band_gains",
    "split_counts",
    "translate",
    "trainer_from_checkpoint",
    "write_waveform",
]
