from ._gen_utils import (logger, set_log_level, LoadError, EvaluationError, ConstructionError,
                         TrainingSetupError, NumericError, ExperimentError)
from ._data import (LabelMatrix, FeatureMatrix, Dataset, SplitSpec, load_dense, load_sparse, save_dense,
                    load_matrix, save_matrix, synth_quadrant, quadrant_labels, split)
from ._measures import (ScoreMatrix, PredictionMatrix, MeasureReport, MEASURES, rank_of, hamming_loss,
                        ranking_loss, one_error, coverage, average_precision, macro_f1, instance_f1, micro_f1,
                        macro_auc, instance_auc, micro_auc, evaluate_all, optimized_measures)
from ._margins import (MarginProfile, ThresholdErrorCase, margin_profile, label_wise_margin, instance_wise_margin,
                       is_label_wise_effective, is_instance_wise_effective, is_double_effective, threshold_error,
                       cut_errors, instance_f1_bound, macro_f1_bound, micro_f1_bound, hamming_bound,
                       make_effective_oracle, make_theorem3_scores)
from ._thresholding import (PerLabelThresholds, InstanceThresholder, calibrate_per_label, fit_instance_thresholder,
                            induce_classifier, optimal_cuts)
from .opt import (TrainConfig, LinearModel, LIMO, sampling_weights, objective_value, full_subgradient, train,
                  predict_scores, add_bias_column)
from ._experiment import (VariantSpec, ExperimentPlan, ExperimentReport, run_experiment, rescale_relative,
                          average_ranks, average_ranks_table, emit_report)

__version__ = '0.1.0'
