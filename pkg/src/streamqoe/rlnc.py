"""Random linear network coding over GF(2^k), one block at a time.

A block is W source packets of equal length (symbols in [0, q)). Each coded
packet carries W uniformly random coefficients and the matching linear
combination of the source packets. The decoder keeps its rows in reduced
row-echelon form so that rank tests and decoding need no extra pass.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from .gf import GF, field


class Ingest(enum.Enum):
    INNOVATIVE = "innovative"
    REDUNDANT = "redundant"


class NotDecodableError(RuntimeError):
    pass


@dataclass
class CodedPacket:
    coeffs: np.ndarray
    payload: np.ndarray
    block_id: int = 0


def _as_block(block: Sequence, gf: GF) -> np.ndarray:
    lengths = {len(p) for p in block}
    if len(lengths) > 1:
        raise ValueError(f"ragged block: packet lengths {sorted(lengths)}")
    arr = np.asarray(block, dtype=np.int64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("block must be a non-empty sequence of packets")
    if arr.min(initial=0) < 0 or arr.max(initial=0) >= gf.q:
        raise ValueError(f"payload symbols must lie in [0, {gf.q})")
    return arr.astype(np.uint8)


def combine(gf: GF, coeffs: np.ndarray, block: np.ndarray) -> np.ndarray:
    """Symbol-wise sum of ``coeffs[i] * block[i]``."""
    return np.bitwise_xor.reduce(gf.mul(coeffs[:, None], block), axis=0)


def encode(block: Sequence, rng: np.random.Generator, q: int = 256, block_id: int = 0) -> CodedPacket:
    """One coded packet with coefficients drawn uniformly from GF(q).

    The all-zero coefficient vector is a legitimate (useless) draw.
    """
    gf = field(q)
    src = _as_block(block, gf)
    coeffs = gf.random(rng, src.shape[0])
    return CodedPacket(coeffs=coeffs, payload=combine(gf, coeffs, src), block_id=block_id)


def _reduce_insert(gf: GF, basis: np.ndarray, pivots: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-reduce ``v`` against each decoder and insert it where it adds rank.

    Shapes: ``basis`` (B, W, M), ``pivots`` (B, W) bool, ``v`` (B, M), where
    the first W columns are coefficients and the rest ride along. Row ``c``
    of a basis is either zero or the RREF row whose pivot sits in column
    ``c``. Both arrays are updated in place; returns the innovative mask.
    """
    W = pivots.shape[1]
    lead = np.where(pivots, v[:, :W], 0)
    v = v ^ np.bitwise_xor.reduce(gf.mul(lead[:, :, None], basis), axis=1)
    nz = v[:, :W] != 0
    innovative = nz.any(axis=1)
    idx = np.flatnonzero(innovative)
    if idx.size:
        p = nz[idx].argmax(axis=1)
        row = gf.mul(gf.inv(v[idx, p])[:, None], v[idx])
        col = basis[idx[:, None], np.arange(W)[None, :], p[:, None]]
        basis[idx] ^= gf.mul(col[:, :, None], row[:, None, :])
        basis[idx, p] = row
        pivots[idx, p] = True
    return innovative


@dataclass
class DecoderState:
    """Decoder for a single block; not safe for concurrent ingestion."""

    W: int
    q: int = 256
    block_id: int = 0
    payload_len: int | None = None
    _basis: np.ndarray | None = dc_field(default=None, repr=False)
    _pivots: np.ndarray | None = dc_field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.W < 1:
            raise ValueError("W must be positive")
        self.gf = field(self.q)
        self._pivots = np.zeros((1, self.W), dtype=bool)

    @property
    def rank(self) -> int:
        return int(self._pivots.sum())

    @property
    def decodable(self) -> bool:
        return self.rank == self.W

    @property
    def rows(self) -> np.ndarray:
        """Nonzero rows of the augmented matrix, ordered by pivot column."""
        if self._basis is None:
            return np.zeros((0, self.W), dtype=np.uint8)
        return self._basis[0][self._pivots[0]]

    def ingest(self, pkt: CodedPacket) -> Ingest:
        if pkt.block_id != self.block_id:
            raise ValueError(f"packet for block {pkt.block_id} sent to decoder of block {self.block_id}")
        coeffs = np.asarray(pkt.coeffs, dtype=np.uint8)
        payload = np.asarray(pkt.payload, dtype=np.uint8)
        if coeffs.shape != (self.W,):
            raise ValueError(f"expected {self.W} coefficients, got {coeffs.shape}")
        if self._basis is None:
            self.payload_len = len(payload)
            self._basis = np.zeros((1, self.W, self.W + self.payload_len), dtype=np.uint8)
        elif len(payload) != self.payload_len:
            raise ValueError(f"payload length {len(payload)} != {self.payload_len}")
        v = np.concatenate([coeffs, payload])[None, :]
        innovative = _reduce_insert(self.gf, self._basis, self._pivots, v)
        return Ingest.INNOVATIVE if innovative[0] else Ingest.REDUNDANT

    def decode(self) -> list[np.ndarray]:
        if not self.decodable:
            raise NotDecodableError(f"rank {self.rank} < W={self.W}")
        # full-rank RREF: coefficient part is the identity, payloads are the sources
        return [row[self.W:].copy() for row in self._basis[0]]


@dataclass
class DeltaReport:
    q: int
    W: int
    trials: int
    received: int
    redundant: int
    delta_hat: float
    std_error: float
    theory: float
    expected_redundant_per_block: float
    rank_profile: list[dict]
    extra_packets_histogram: dict[int, int]

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["extra_packets_histogram"] = {str(k): v for k, v in self.extra_packets_histogram.items()}
        return d


def redundancy_probability(q: int, W: int, rank: int) -> float:
    """Chance that a uniform coefficient vector lies in a rank-``rank`` span."""
    return float(q) ** (rank - W)


def expected_redundant_per_block(q: int, W: int) -> float:
    total = 0.0
    for j in range(W):
        p = redundancy_probability(q, W, j)
        total += p / (1 - p)
    return total


def theoretical_delta(q: int, W: int) -> float:
    """Long-run fraction of received packets that are redundant."""
    e = expected_redundant_per_block(q, W)
    return e / (W + e)


def estimate_delta(q: int, W: int, trials: int, rng: np.random.Generator, batch: int = 4096) -> DeltaReport:
    """Fill ``trials`` fresh decoders with uniform random packets and count waste.

    Only coefficients are drawn: redundancy does not depend on payloads.
    Decoders are filled in vectorised batches.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    gf = field(q)
    ingested = np.zeros(W, dtype=np.int64)
    wasted = np.zeros(W, dtype=np.int64)
    extra_all = []
    done = 0
    while done < trials:
        B = min(batch, trials - done)
        basis = np.zeros((B, W, W), dtype=np.uint8)
        pivots = np.zeros((B, W), dtype=bool)
        extra = np.zeros(B, dtype=np.int64)
        live = np.arange(B)
        while live.size:
            ranks = pivots[live].sum(axis=1)
            v = gf.random(rng, (live.size, W))
            sub_b, sub_p = basis[live], pivots[live]
            innov = _reduce_insert(gf, sub_b, sub_p, v)
            basis[live], pivots[live] = sub_b, sub_p
            np.add.at(ingested, ranks, 1)
            np.add.at(wasted, ranks[~innov], 1)
            extra[live[~innov]] += 1
            live = live[pivots[live].sum(axis=1) < W]
        extra_all.append(extra)
        done += B

    extra = np.concatenate(extra_all)
    received = int(ingested.sum())
    redundant = int(wasted.sum())
    mean_r = extra.mean()
    sd_r = extra.std(ddof=1) if trials > 1 else 0.0
    # delta method for the ratio mean_r / (W + mean_r)
    se = W / (W + mean_r) ** 2 * sd_r / math.sqrt(trials)
    profile = [
        {
            "rank": j,
            "ingested": int(ingested[j]),
            "redundant": int(wasted[j]),
            "frequency": float(wasted[j] / ingested[j]) if ingested[j] else None,
            "theory": redundancy_probability(q, W, j),
        }
        for j in range(W)
    ]
    values, counts = np.unique(extra, return_counts=True)
    return DeltaReport(
        q=q,
        W=W,
        trials=trials,
        received=received,
        redundant=redundant,
        delta_hat=redundant / received,
        std_error=float(se),
        theory=theoretical_delta(q, W),
        expected_redundant_per_block=expected_redundant_per_block(q, W),
        rank_profile=profile,
        extra_packets_histogram={int(v): int(c) for v, c in zip(values, counts)},
    )
