"""Fixed-point matrices over the ring Z_{2^ell}.

All protocol values are ell-bit words (32 or 64) interpreted as two's-complement
fixed-point numbers with f fractional bits. Arithmetic wraps silently modulo
2^ell; range discipline is enforced at encode time only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_UNSIGNED = {32: np.dtype("<u4"), 64: np.dtype("<u8")}
_SIGNED = {32: np.dtype("<i4"), 64: np.dtype("<i8")}


class RangeError(ValueError):
    """A real value falls outside the representable fixed-point range."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


@dataclass(frozen=True)
class FixedPointConfig:
    """Ring and fixed-point parameters: ell total bits, f fractional bits."""

    ell: int = 64
    f: int = 16

    def __post_init__(self):
        if self.ell not in _UNSIGNED:
            raise ValueError(f"ell must be 32 or 64, got {self.ell}")
        if not 0 < self.f < self.ell:
            raise ValueError(f"need 0 < f < ell, got f={self.f}, ell={self.ell}")

    @property
    def dtype(self) -> np.dtype:
        return _UNSIGNED[self.ell]

    @property
    def signed_dtype(self) -> np.dtype:
        return _SIGNED[self.ell]

    @property
    def modulus(self) -> int:
        return 1 << self.ell

    @property
    def mask(self) -> int:
        return (1 << self.ell) - 1

    @property
    def half(self) -> int:
        return 1 << (self.ell - 1)

    @property
    def scale(self) -> int:
        return 1 << self.f

    @property
    def max_encodable(self) -> float:
        """Strict upper bound on |v| for encode: 2^(ell-f-1)."""
        return float(1 << (self.ell - self.f - 1))


DEFAULT_CONFIG = FixedPointConfig()


class RingMatrix:
    """A rows x cols matrix of ell-bit words, row-major.

    Thin wrapper over a 2-D numpy array of the ring's unsigned dtype. All
    operators wrap modulo 2^ell. Instances are treated as immutable values;
    operations return fresh matrices.
    """

    __slots__ = ("data", "cfg")

    def __init__(self, data: np.ndarray, cfg: FixedPointConfig = DEFAULT_CONFIG):
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise DimensionError(f"RingMatrix needs a 2-D array, got ndim={arr.ndim}")
        if arr.dtype != cfg.dtype:
            arr = arr.astype(cfg.dtype)
        self.data = np.ascontiguousarray(arr)
        self.cfg = cfg

    # -- construction -------------------------------------------------------

    @classmethod
    def zeros(cls, rows: int, cols: int, cfg: FixedPointConfig = DEFAULT_CONFIG) -> "RingMatrix":
        return cls(np.zeros((rows, cols), dtype=cfg.dtype), cfg)

    @classmethod
    def from_ints(cls, values, cfg: FixedPointConfig = DEFAULT_CONFIG) -> "RingMatrix":
        """Build from raw (already ring-reduced or python) integers."""
        arr = np.atleast_2d(np.asarray(values, dtype=object))
        reduced = np.vectorize(lambda v: int(v) & cfg.mask, otypes=[object])(arr)
        return cls(reduced.astype(np.uint64).astype(cfg.dtype), cfg)

    @classmethod
    def ones_row(cls, cols: int, cfg: FixedPointConfig = DEFAULT_CONFIG) -> "RingMatrix":
        """The raw all-ones 1 x cols row vector (integer ones, not encode(1))."""
        return cls(np.ones((1, cols), dtype=cfg.dtype), cfg)

    # -- shape --------------------------------------------------------------

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def T(self) -> "RingMatrix":
        return RingMatrix(self.data.T.copy(), self.cfg)

    def _check(self, other: "RingMatrix"):
        if not isinstance(other, RingMatrix):
            raise TypeError(f"expected RingMatrix, got {type(other).__name__}")
        if other.cfg != self.cfg:
            raise ValueError("mixed FixedPointConfig")

    # -- ring arithmetic ----------------------------------------------------

    def __add__(self, other: "RingMatrix") -> "RingMatrix":
        self._check(other)
        if other.shape != self.shape:
            raise DimensionError(f"add shape mismatch {self.shape} vs {other.shape}")
        return RingMatrix(self.data + other.data, self.cfg)

    def __sub__(self, other: "RingMatrix") -> "RingMatrix":
        self._check(other)
        if other.shape != self.shape:
            raise DimensionError(f"sub shape mismatch {self.shape} vs {other.shape}")
        return RingMatrix(self.data - other.data, self.cfg)

    def __neg__(self) -> "RingMatrix":
        return RingMatrix(-self.data, self.cfg)

    def __matmul__(self, other: "RingMatrix") -> "RingMatrix":
        return mat_mul(self, other)

    def __mul__(self, scalar: int) -> "RingMatrix":
        if not isinstance(scalar, (int, np.integer)):
            raise TypeError("RingMatrix scalar multiply takes an int")
        c = self.cfg.dtype.type(int(scalar) & self.cfg.mask)
        return RingMatrix(self.data * c, self.cfg)

    __rmul__ = __mul__

    def mul_elementwise(self, other: "RingMatrix") -> "RingMatrix":
        self._check(other)
        if other.shape != self.shape:
            raise DimensionError(f"elementwise shape mismatch {self.shape} vs {other.shape}")
        return RingMatrix(self.data * other.data, self.cfg)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RingMatrix)
            and self.cfg == other.cfg
            and self.shape == other.shape
            and bool(np.array_equal(self.data, other.data))
        )

    def __repr__(self) -> str:
        return f"RingMatrix({self.rows}x{self.cols}, ell={self.cfg.ell})"

    # -- serialization ------------------------------------------------------

    def to_bytes(self) -> bytes:
        """Row-major little-endian ell-bit words."""
        return self.data.astype(self.cfg.dtype, copy=False).tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes, rows: int, cols: int,
                   cfg: FixedPointConfig = DEFAULT_CONFIG) -> "RingMatrix":
        expected = rows * cols * (cfg.ell // 8)
        if len(raw) != expected:
            raise DimensionError(f"expected {expected} bytes for {rows}x{cols}, got {len(raw)}")
        arr = np.frombuffer(raw, dtype=cfg.dtype).reshape(rows, cols)
        return cls(arr.copy(), cfg)


def encode(values, cfg: FixedPointConfig = DEFAULT_CONFIG) -> RingMatrix:
    """Embed reals as round(v * 2^f) mod 2^ell.

    Raises RangeError if any |v| >= 2^(ell-f-1).
    """
    arr = np.atleast_2d(np.asarray(values, dtype=np.float64))
    bound = cfg.max_encodable
    if np.any(~np.isfinite(arr)) or np.any(np.abs(arr) >= bound):
        raise RangeError(f"value outside representable range (-{bound}, {bound})")
    scaled = np.round(arr * cfg.scale).astype(np.int64)
    return RingMatrix(scaled.astype(np.uint64).astype(cfg.dtype), cfg)


def encode_scalar(value: float, cfg: FixedPointConfig = DEFAULT_CONFIG) -> int:
    """encode() for a single value, returned as a ring word."""
    return int(encode([[value]], cfg).data[0, 0])


def decode(m: RingMatrix, cfg: FixedPointConfig | None = None) -> np.ndarray:
    """Interpret words as signed two's complement and divide by 2^f."""
    cfg = cfg or m.cfg
    signed = m.data.view(cfg.signed_dtype)
    return signed.astype(np.float64) / cfg.scale


def mat_mul(a: RingMatrix, b: RingMatrix) -> RingMatrix:
    """Matrix product with all sums and products modulo 2^ell.

    When both inputs carry scale 2^f the result carries scale 2^(2f); the
    caller is responsible for truncating.
    """
    a._check(b)
    if a.cols != b.rows:
        raise DimensionError(f"mat_mul inner dims {a.cols} vs {b.rows}")
    return RingMatrix(a.data @ b.data, a.cfg)


def truncate(m: RingMatrix, f: int) -> RingMatrix:
    """Arithmetic right shift of the signed interpretation by f bits.

    Wraparound of out-of-range magnitudes is undefined behavior by contract.
    """
    cfg = m.cfg
    if not 0 <= f < cfg.ell:
        raise ValueError(f"shift amount {f} out of range for ell={cfg.ell}")
    shifted = m.data.view(cfg.signed_dtype) >> np.int64(f).astype(cfg.signed_dtype)
    return RingMatrix(shifted.view(cfg.dtype), cfg)
