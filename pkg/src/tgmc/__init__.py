"""Temporal graph-based collaborative filtering.

Time-stamped ratings are split into fixed-length windows; each window gets
its own graph-convolutional encoder and bilinear softmax decoder; recurrent
models fitted on the per-window embedding and decoder-weight trajectories
extrapolate both into future windows, where ratings are predicted as the
expectation of the decoded distribution.
"""

from .decoder import (DecoderParams, decode_probs, decode_probs_batch,
                      expected_rating, expected_rating_batch,
                      init_decoder_params, nll_loss, rating_logits)
from .encoder import (EncoderParams, encoder_backward, encoder_forward,
                      init_encoder_params)
from .graph import (ITEM_TO_USER, USER_TO_ITEM, NormalizationSpec,
                    RatingWindow, build_rating_window, normalization)
from .ingest import (DatasetStats, IdMap, IdMaps, ParseError, RatingEvent,
                     RatingTable, ValidationError, WindowedDataset,
                     WindowingConfig, build_windows, load_dataset,
                     parse_ratings, save_dataset, train_test_split)
from .numerics import (AdamState, DropoutSpec, adam_step, dropout_apply,
                       glorot_uniform, gradient_check, make_rng, softmax_rowwise,
                       spawn_rngs)
from .pipeline import (EvalReport, PredictionRecord, RunResult,
                       TemporalTrainConfig, TrainedState, WindowModel,
                       WindowTrainConfig, aggregate_reports, evaluate,
                       pmf_baseline, predict_test_windows, predict_window,
                       run_experiment, static_state_from, train_temporal,
                       train_window_models)
from .seqmodel import (SeqModel, SeqModelConfig, decoder_weight_model,
                       predict_next, seq_forward, seq_train)
from .synth import DriftConfig, drift_table, generate_drift_events, write_drift_file

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
