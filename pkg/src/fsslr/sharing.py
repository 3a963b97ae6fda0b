"""Two-party additive secret sharing over Z_{2^ell}.

A value x is split as s0 + s1 = x mod 2^ell. Linear algebra on shares is
local; reveals are symmetric one-round exchanges; truncation is share-wise
(party 0 shifts its share, party 1 negate-shift-negates) so that shares of
an exact zero truncate to an exact zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prg import PrgSeed, expand_matrix
from .ring import DimensionError, FixedPointConfig, RingMatrix, mat_mul, truncate
from .transport import Channel, Tag


class ShareAlgebraError(TypeError):
    """A share-times-share product was requested without correlated randomness."""


@dataclass(frozen=True)
class ShareMatrix:
    """One party's additive share of a RingMatrix."""

    party: int
    payload: RingMatrix

    def __post_init__(self):
        if self.party not in (0, 1):
            raise ValueError("party must be 0 or 1")

    @property
    def shape(self) -> tuple:
        return self.payload.shape

    @property
    def cfg(self) -> FixedPointConfig:
        return self.payload.cfg

    @property
    def T(self) -> "ShareMatrix":
        return ShareMatrix(self.party, self.payload.T)

    def _check_peer(self, other: "ShareMatrix"):
        if not isinstance(other, ShareMatrix):
            raise TypeError(f"expected ShareMatrix, got {type(other).__name__}")
        if other.party != self.party:
            raise ValueError("cannot combine shares held by different parties")

    def __add__(self, other: "ShareMatrix") -> "ShareMatrix":
        self._check_peer(other)
        return ShareMatrix(self.party, self.payload + other.payload)

    def __sub__(self, other: "ShareMatrix") -> "ShareMatrix":
        self._check_peer(other)
        return ShareMatrix(self.party, self.payload - other.payload)

    def __neg__(self) -> "ShareMatrix":
        return ShareMatrix(self.party, -self.payload)

    def __matmul__(self, other) -> "ShareMatrix":
        if isinstance(other, ShareMatrix):
            raise ShareAlgebraError(
                "share @ share requires correlated randomness; use a gate")
        return ShareMatrix(self.party, mat_mul(self.payload, other))

    def __rmatmul__(self, public: RingMatrix) -> "ShareMatrix":
        return ShareMatrix(self.party, mat_mul(public, self.payload))

    def __mul__(self, scalar: int) -> "ShareMatrix":
        return ShareMatrix(self.party, self.payload * scalar)

    __rmul__ = __mul__

    def add_public(self, public: RingMatrix) -> "ShareMatrix":
        """Add a public constant; party 0 alone applies it so reconstruction
        counts it exactly once."""
        if self.party == 0:
            return ShareMatrix(self.party, self.payload + public)
        return self


def share(x: RingMatrix, seed: PrgSeed) -> tuple:
    """Split x into (s0, s1): s0 is a PRG expansion, s1 = x - s0 mod 2^ell."""
    s0 = expand_matrix(seed, x.rows, x.cols, x.cfg)
    s1 = x - s0
    return ShareMatrix(0, s0), ShareMatrix(1, s1)


def reconstruct(s0: ShareMatrix, s1: ShareMatrix) -> RingMatrix:
    if s0.party == s1.party:
        raise ValueError("reconstruct needs one share from each party")
    if s0.shape != s1.shape:
        raise DimensionError(f"share shapes differ: {s0.shape} vs {s1.shape}")
    return s0.payload + s1.payload


def reveal(my: ShareMatrix, channel: Channel, tag: Tag = Tag.REVEAL) -> RingMatrix:
    """Symmetric one-round opening of a single shared matrix."""
    return reveal_many([my], channel, tag)[0]


def reveal_many(shares: list, channel: Channel, tag: Tag = Tag.REVEAL) -> list:
    """Open several shared matrices in one frame (one round).

    Both parties must pass shares of the same logical values in the same
    order. Counts one round, the concatenated body bytes, and one opened
    element per ring word per party.
    """
    cfg = shares[0].cfg
    body = b"".join(s.payload.to_bytes() for s in shares)
    peer_body = channel.exchange(tag, body)
    if len(peer_body) != len(body):
        raise DimensionError(
            f"peer frame has {len(peer_body)} bytes, expected {len(body)}")
    out = []
    offset = 0
    word = cfg.ell // 8
    for s in shares:
        n = s.payload.rows * s.payload.cols * word
        peer = RingMatrix.from_bytes(peer_body[offset:offset + n],
                                     s.payload.rows, s.payload.cols, cfg)
        out.append(s.payload + peer)
        offset += n
        channel.stats.add_opened(s.payload.rows * s.payload.cols)
    return out


def trunc_shares(s: ShareMatrix, f: int) -> ShareMatrix:
    """Share-wise fixed-point truncation by f bits.

    Party 0 arithmetic-shifts its share; party 1 computes -((-share) >> f).
    Reconstruction equals the true truncation plus at most one unit in the
    last place, provided |value| < 2^(ell-f-2); shares of exactly zero come
    back as exactly zero.
    """
    if s.party == 0:
        return ShareMatrix(0, truncate(s.payload, f))
    return ShareMatrix(1, -truncate(-s.payload, f))


# -- affine share programs ---------------------------------------------------
#
# Operand references: "s<i>" (share input i), "p<j>" (public input j), each
# optionally suffixed ".T". A term is a left-to-right matrix-product chain of
# operands times an integer coefficient; at most one operand per term may be
# a share (a product of two shares needs correlated randomness and is
# rejected). Terms with no share operand are public and get added by party 0
# alone, so reconstruction counts them exactly once.


@dataclass(frozen=True)
class AffineTerm:
    ops: tuple
    coef: int = 1


def _resolve(ref: str, shares: list, publics: list):
    """Returns (matrix, is_share)."""
    name = ref[:-2] if ref.endswith(".T") else ref
    kind, idx = name[0], int(name[1:])
    if kind == "s":
        mat, is_share = shares[idx].payload, True
    elif kind == "p":
        mat, is_share = publics[idx], False
    else:
        raise ValueError(f"bad operand reference {ref!r}")
    if ref.endswith(".T"):
        mat = mat.T
    return mat, is_share


def local_affine(shares: list, publics: list, program: list) -> ShareMatrix:
    """Evaluate an affine combination of shares and publics, locally.

    The resulting shares reconstruct to the same combination applied to the
    reconstructed inputs. Never touches the channel.
    """
    if not shares:
        raise ValueError("local_affine needs at least one share input")
    party = shares[0].party
    for s in shares:
        if s.party != party:
            raise ValueError("all share inputs must belong to one party")
    acc = None
    out_shape = None
    for term in program:
        value = None
        share_ops = 0
        for ref in term.ops:
            mat, is_share = _resolve(ref, shares, publics)
            share_ops += int(is_share)
            if share_ops > 1:
                raise ShareAlgebraError(
                    f"term {term.ops} multiplies two shares; needs correlated randomness")
            value = mat if value is None else mat_mul(value, mat)
        if value is None:
            raise ValueError("empty term")
        if out_shape is None:
            out_shape = value.shape
        elif value.shape != out_shape:
            raise DimensionError(f"term shape {value.shape} vs program shape {out_shape}")
        if share_ops == 0 and party != 0:
            continue  # public terms belong to party 0 alone
        value = value * term.coef
        acc = value if acc is None else acc + value
    if out_shape is None:
        raise ValueError("empty affine program")
    if acc is None:
        acc = RingMatrix.zeros(out_shape[0], out_shape[1], shares[0].cfg)
    return ShareMatrix(party, acc)
