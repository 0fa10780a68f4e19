from .hmm import (
    VARIANCE_FLOOR,
    HmmModel,
    emission_logpdf,
    forward_backward,
    forward_backward_batch,
    mean_shift_recenter,
    path_log_prob,
    viterbi_batch,
    viterbi_path,
)
from .kalman import KalmanParams, kalman_smooth
from .model import DEFAULT_INTENT_FEATURES, IMSKHMM, baum_welch, fit_imsk_hmm, initialize_hmm
from .scoring import align_and_score, decoded_frame, hungarian_alignment


def viterbi(model, obs):
    """Decoded path for one (K, F) sequence as ``{"states", "log_likelihood"}``."""
    states, lp = viterbi_path(model, obs)
    return {"states": states, "log_likelihood": lp}


__all__ = [
    "VARIANCE_FLOOR",
    "HmmModel",
    "emission_logpdf",
    "forward_backward",
    "forward_backward_batch",
    "mean_shift_recenter",
    "path_log_prob",
    "viterbi",
    "viterbi_batch",
    "viterbi_path",
    "KalmanParams",
    "kalman_smooth",
    "DEFAULT_INTENT_FEATURES",
    "IMSKHMM",
    "baum_welch",
    "fit_imsk_hmm",
    "initialize_hmm",
    "align_and_score",
    "decoded_frame",
    "hungarian_alignment",
]
