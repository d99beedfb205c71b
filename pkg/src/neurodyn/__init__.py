"""Analysis toolkit for neuromechanical imitation studies.

EMG envelope extraction, imitation reward metrics, PCA of network
activations and simplex-projection forecasting, with a synthetic
two-link arm as ground truth.
"""

__version__ = "0.1.0"

from .trialdata import ChannelKind, ChannelSpec, TrialSet, load_trialset, save_trialset, select_channels
from .dsp import EnvelopeConfig, design_butterworth, extract_envelopes, filter_zero_phase
from .reward import RewardWeights, aggregate_sweep, high_freq_power, joint_reward, total_reward
from .edm import EmbeddingConfig, cross_predict, delay_embed, param_search, simplex_forecast, spearman_rho
from .pca import fit_pca, project_top3
from .armsim import ArmParams, ArmState, ReachScript, generate_reaches, synth_raw_emg

__all__ = [
    "ArmParams",
    "ArmState",
    "ChannelKind",
    "ChannelSpec",
    "EmbeddingConfig",
    "EnvelopeConfig",
    "ReachScript",
    "RewardWeights",
    "TrialSet",
    "aggregate_sweep",
    "cross_predict",
    "delay_embed",
    "design_butterworth",
    "extract_envelopes",
    "filter_zero_phase",
    "fit_pca",
    "generate_reaches",
    "high_freq_power",
    "joint_reward",
    "load_trialset",
    "param_search",
    "project_top3",
    "save_trialset",
    "select_channels",
    "simplex_forecast",
    "spearman_rho",
    "synth_raw_emg",
    "total_reward",
]
