"""Two-party secure logistic regression in the trusted-dealer model.

Online protocols: a one-round Taylor gate and a two-round segmented gate
built on function secret sharing, plus a Beaver-triple baseline, all over
fixed-point arithmetic in Z_{2^ell} with exact byte/round accounting.
"""

from .ring import FixedPointConfig, RingMatrix, encode, decode, mat_mul, truncate

__version__ = "0.1.0"

__all__ = [
    "FixedPointConfig",
    "RingMatrix",
    "encode",
    "decode",
    "mat_mul",
    "truncate",
]
