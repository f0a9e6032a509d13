"""Security workbench for EEG speller pipelines.

Two victim decoders (a covariance-geometry matrix speller and a
correlation-based frequency speller), perturbation template crafting
against both, and an evaluation layer producing attacker/user scores,
transfer rates and energy-ratio reports.
"""

from . import dataio, evaluation, kernels, synth
from .attack_p300 import (
    P300Template,
    craft_template,
    gaussian_template,
    inject,
    plan_injection,
)
from .attack_ssvep import (
    SsvepTemplate,
    compound_periodic_noise,
    craft_delta,
    gaussian_noise,
    inject_window,
    single_periodic_noise,
)
from .dsp import (
    Signal,
    amplitude_spectrum,
    apply_filter,
    band_project,
    design_bandpass,
    extract_epoch,
    znorm_channels,
)
from .errors import (
    BoundsError,
    ConvergenceError,
    DegenerateInputError,
    FormatError,
    ParameterError,
    SpellersecError,
)
from .evaluation import (
    AttackReport,
    CleanReport,
    DelaySweep,
    NoiseReport,
    clean_score_p300,
    clean_score_ssvep,
    crafting_windows,
    delay_sweep_p300,
    delay_sweep_ssvep,
    itr,
    p300_gaussian_baseline,
    score_p300_attack,
    score_ssvep_attack,
    spr_db,
    ssvep_noise_baseline,
    transfer_matrix,
)
from .p300 import (
    P300_GRID,
    P300Trial,
    P300TrainConfig,
    P300Victim,
    collect_epochs,
    decode_character,
    epoch_probs,
    train_victim,
)
from .ssvep import (
    FilterBankConfig,
    FrequencyGrid,
    SsvepTrial,
    SsvepVictim,
    cca_rho,
    decode_frequency,
    decode_trial,
    default_grid,
    fbcca_decode,
    reference_signal,
)
from .synth import (
    SynthP300Config,
    SynthSsvepConfig,
    synth_p300_subject,
    synth_ssvep_subject,
)

__version__ = "0.1.0"

__all__ = [
    "AttackReport",
    "BoundsError",
    "CleanReport",
    "ConvergenceError",
    "DegenerateInputError",
    "DelaySweep",
    "FilterBankConfig",
    "FormatError",
    "FrequencyGrid",
    "NoiseReport",
    "P300_GRID",
    "P300Template",
    "P300TrainConfig",
    "P300Trial",
    "P300Victim",
    "ParameterError",
    "Signal",
    "SpellersecError",
    "SsvepTemplate",
    "SsvepTrial",
    "SsvepVictim",
    "SynthP300Config",
    "SynthSsvepConfig",
    "amplitude_spectrum",
    "apply_filter",
    "band_project",
    "cca_rho",
    "clean_score_p300",
    "clean_score_ssvep",
    "collect_epochs",
    "compound_periodic_noise",
    "craft_delta",
    "craft_template",
    "crafting_windows",
    "dataio",
    "decode_character",
    "decode_frequency",
    "decode_trial",
    "default_grid",
    "delay_sweep_p300",
    "delay_sweep_ssvep",
    "design_bandpass",
    "epoch_probs",
    "evaluation",
    "extract_epoch",
    "fbcca_decode",
    "gaussian_noise",
    "gaussian_template",
    "inject",
    "inject_window",
    "itr",
    "kernels",
    "p300_gaussian_baseline",
    "plan_injection",
    "reference_signal",
    "score_p300_attack",
    "score_ssvep_attack",
    "single_periodic_noise",
    "spr_db",
    "ssvep_noise_baseline",
    "synth",
    "synth_p300_subject",
    "synth_ssvep_subject",
    "train_victim",
    "transfer_matrix",
    "znorm_channels",
]
