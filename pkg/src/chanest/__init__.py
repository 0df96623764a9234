"""chanest: sparse beamspace MIMO channel estimation.

A turbo estimator (coarse least squares, Bernoulli-Gaussian message-passing
support detection, support-restricted least squares), baseline estimators,
estimator covariance lower bounds, and a Monte-Carlo sweep harness.
"""

from .channel import (BlockTrainingOperator, Observation, PathParams,
                      SystemDims, TrainingDesign, VirtualBasis, VirtualChannel,
                      array_response, beam_angle, build_observation_operator,
                      dft_basis, gen_sparse_channel, geometric_channel,
                      load_instance, make_training, observe, round_half_up,
                      save_instance, snr_to_noise_var, virtual_map,
                      virtual_unmap)
from .crlb import FimResult, crlb_lse, crlb_lse_smp, fim_sparse, nmse_bound_db
from .estimators import (EstimationResult, TurboConfig, coarse_lse, fine_lse,
                         genie_lse, lasso, lse_smp, nmse, nmse_db,
                         select_lambda)
from .harness import (ConfigError, ExperimentConfig, ResultRecord, emit_csv,
                      emit_gnuplot, load_config, preset_config, read_csv,
                      run_experiment, summarize)
from .numerics import (EPS_PROB, LsSolution, bernoulli_from_lr, gaussian_pdf,
                       log_gaussian_pdf, solve_ls)
from .smp import (ChannelBelief, MessageState, SmpPrior, init_messages,
                  posterior, smp_detect, sum_node_update, sum_to_var_prob,
                  var_node_update)

__version__ = "0.1.0"
