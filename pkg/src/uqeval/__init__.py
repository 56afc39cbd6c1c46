"""Evaluation metrics for uncertainty estimates of classifiers.

Selective prediction is scored with ROC, precision-recall and risk-coverage
curves (AUROC, AUPR, AURC); confidence calibration with binned ECE/MCE under
equal-range, equal-size or adaptive binning.
"""

from .core import EvaluationSet, PredictionRecord, accuracy, validate
from .selective import (Curve, CurveKind, Dominance, SelectiveReport, aupr, auroc, aurc,
                        brier, dominates, is_perfect, nll, perturb_m, pr_curve, rc_curve,
                        roc_curve, selective_report)
from .calibration import (AdaptiveBinning, Bin, CalibrationReport, EqualRangeBinning,
                          EqualSizeBinning, adaptive_bins, bin_partition, calibration_report,
                          ece, mce, parse_scheme, reliability_data, true_ece_discrete, z_score)
from .temperature import TemperatureScaling, apply_temperature, fit_temperature
from . import exceptions, synth

__version__ = "0.1.0"
