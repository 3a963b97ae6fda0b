"""Function-secret-sharing primitives: DCF and MIC gates."""

from .dcf import LAMBDA, DcfKey, dcf_eval, dcf_eval_full, dcf_gen
from .icbatch import IcBatchKey, ic_eval_batch, ic_gen_batch
from .mic import MicKey, mic_eval, mic_eval_full, mic_gen, segment_intervals

__all__ = [
    "LAMBDA",
    "DcfKey",
    "dcf_gen",
    "dcf_eval",
    "dcf_eval_full",
    "MicKey",
    "mic_gen",
    "mic_eval",
    "mic_eval_full",
    "segment_intervals",
    "IcBatchKey",
    "ic_gen_batch",
    "ic_eval_batch",
]
