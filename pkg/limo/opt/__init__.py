from .objective import objective_terms, objective_value, subgradient_terms, full_subgradient
from .sgd import SamplingWeights, TripletSampler, sampling_weights, run_sgd
from .opt import TrainConfig, LinearModel, LIMO, VARIANTS, add_bias_column, train, predict_scores
