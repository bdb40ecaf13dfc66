"""Partial discharge detection from STL residual features and a kernel SVM."""
from .errors import ConfigError, DegenerateNeighborhoodError, FormatError, PdstlError
from .evaluation import ClassMetrics, ConfusionMatrix, EvalReport, evaluate, format_table
from .features import (DEFAULT_WINDOWS, FeatureVector, ResidualFeatures, ScalerParams,
                       apply_scaler, extract_features, fit_scaler, residual_features)
from .sampler import oversample_duplicate
from .stl import LoessConfig, StlConfig, StlDecomposition, StlTemplate, loess_smooth, stl_decompose
from .svm import (ConvergenceError, KernelSpec, SvmModel, TrainConfig, decision_function,
                  kernel_eval, load_model, predict, save_model, train)
from .waveform_io import (SynthParams, Waveform, read_waveform_binary, read_waveforms_csv,
                          synth_waveform, write_waveform_binary, write_waveforms_csv)

__version__ = "0.1.0"
