"""Simulated node/coordinator exchange.

Each node fits its own data and uploads exactly one binary message; the
coordinator only ever sees decoded :class:`LocalSummary` objects.  Message
layout, little-endian::

    offset  size    field
    0       4       node_id      uint32
    4       4       d            uint32  (length of both vectors)
    8       8       sample_size  uint64
    16      8       noise_sd     float64
    24      8*d     lasso_coef   float64[d]
    24+8d   8*d     debiased     float64[d]

so a message is ``2 * 8 * d + 24`` bytes whatever the node's sample size.
"""
from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .local import PipelineConfig, local_fit
from .model import Dataset, DomainError, LocalSummary

HEADER = struct.Struct("<IIQd")
HEADER_BYTES = HEADER.size
MESSAGE_FIELDS = ("node_id", "d", "sample_size", "noise_sd", "lasso_coef", "debiased_coef")


def message_size(d: int) -> int:
    return 2 * 8 * d + HEADER_BYTES


def encode(node_id: int, s: LocalSummary) -> bytes:
    head = HEADER.pack(node_id, s.d, s.sample_size, s.noise_sd)
    return head + s.lasso_coef.astype("<f8").tobytes() + s.debiased_coef.astype("<f8").tobytes()


def decode(buf: bytes):
    """Inverse of :func:`encode`; returns ``(node_id, LocalSummary)``."""
    if len(buf) < HEADER_BYTES:
        raise DomainError("truncated message header")
    node_id, d, n, sigma = HEADER.unpack_from(buf, 0)
    if len(buf) != message_size(d):
        raise DomainError(f"message length {len(buf)} != {message_size(d)} for d={d}")
    body = np.frombuffer(buf, dtype="<f8", offset=HEADER_BYTES).astype(np.float64)
    return node_id, LocalSummary(lasso_coef=body[:d], debiased_coef=body[d:], sample_size=n,
                                 noise_sd=sigma)


@dataclass(frozen=True)
class SummaryMessage:
    node_id: int
    payload: LocalSummary = field(repr=False)
    byte_size: int


@dataclass
class CommLog:
    messages: list = field(default_factory=list)
    rounds: int = 0

    @property
    def total_bytes(self) -> int:
        return sum(m.byte_size for m in self.messages)


def comm_bytes(log: CommLog) -> int:
    return log.total_bytes


class Node:
    def __init__(self, ds: Dataset):
        self._ds = ds
        self.node_id = ds.node_id
        self.diagnostics = None

    def run(self, cfg: PipelineConfig) -> bytes:
        try:
            summary, self.diagnostics = local_fit(self._ds, cfg)
        except Exception as exc:
            raise NodeFailure(self.node_id, exc) from exc
        return encode(self.node_id, summary)


class NodeFailure(RuntimeError):
    def __init__(self, node_id, exc):
        super().__init__(f"node {node_id} failed: {exc}")
        self.node_id = node_id


@dataclass
class RoundResult:
    summaries: list  # LocalSummary in node_id order
    node_ids: tuple
    log: CommLog
    diagnostics: list


def check_node_ids(datasets: Sequence[Dataset]) -> None:
    ids = [ds.node_id for ds in datasets]
    if len(set(ids)) != len(ids):
        raise DomainError("duplicate node_id")
    ds0 = datasets[0]
    if any(ds.d != ds0.d for ds in datasets):
        raise DomainError("datasets disagree on the number of features")


def execute_round(datasets: Sequence[Dataset], cfg: PipelineConfig, threads: int = 1,
                  dump_dir: Optional[Path] = None) -> RoundResult:
    """One-shot protocol: every node uploads one message, the coordinator
    decodes them in node_id order."""
    if not datasets:
        raise DomainError("no datasets")
    check_node_ids(datasets)
    nodes = [Node(ds) for ds in datasets]
    if threads > 1 and len(nodes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            uploads = list(pool.map(lambda nd: nd.run(cfg), nodes))
    else:
        uploads = [nd.run(cfg) for nd in nodes]

    log = CommLog(rounds=1)
    received = {}
    for buf in uploads:
        node_id, summary = decode(buf)
        received[node_id] = summary
        log.messages.append(SummaryMessage(node_id, summary, len(buf)))
        if dump_dir is not None:
            Path(dump_dir).mkdir(parents=True, exist_ok=True)
            (Path(dump_dir) / f"node_{node_id}.msg").write_bytes(buf)
    ids = tuple(sorted(received))
    log.messages.sort(key=lambda msg: msg.node_id)
    diags = sorted((nd.diagnostics for nd in nodes), key=lambda dg: dg.node_id)
    return RoundResult([received[i] for i in ids], ids, log, diags)
