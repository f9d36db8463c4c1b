from .plots import FIGURES, emit_plot_data
from .presets import ExperimentPreset, load_preset
from .run import RunTable, run_preset, trial_seeds
from .trial import ALGORITHMS, TrialResult, run_trial

__all__ = [
    "ALGORITHMS", "FIGURES", "ExperimentPreset", "RunTable", "TrialResult", "emit_plot_data", "load_preset",
    "run_preset", "run_trial", "trial_seeds",
]
