"""Prompt sketch serialization.

A sketch is the only payload eligible to reach a generation backend.  It
is a deterministic byte rendering of four ordered blocks:

    [Context]   site id, window timestamp, modality bits, structured fields
    [Semantics] code sequence, confidence, optional compressed latents
    [Evidence]  retrieved snippets (id, type, text), possibly empty
    [Task]      explain / advise / abstain

Free-text fields are percent-escaped so distinct (codes, evidence ids,
task) inputs always yield distinct bytes.  The token estimate is a fixed
backend-independent proxy, ceil(bytes / 4), counted without the Evidence
block when no evidence is attached.
"""

from __future__ import annotations

import base64
import math
from dataclasses import dataclass, field, replace
from urllib.parse import quote

import numpy as np

from ..errors import OversizeSketch
from .codebook import CodeSequence

TASKS = ("explain", "advise", "abstain")


@dataclass(frozen=True)
class SketchConfig:
    byte_cap: int = 4096          # hard cap on the full serialized form
    pre_retrieval_cap: int = 512  # cap on context + semantics + task
    max_salient: int = 4


@dataclass(frozen=True)
class PromptSketch:
    body: bytes
    blocks: tuple[tuple[str, str], ...]   # (name, rendered text) in order
    token_estimate: int
    codes: tuple[int, ...]
    doc_ids: tuple[str, ...]
    site_id: str
    task: str
    raw_attachment_requests: int = 0
    redacted: bool = False
    entity_aliases: tuple[str, ...] = ()

    @property
    def text(self) -> str:
        return self.body.decode("utf-8")

    def block(self, name: str) -> str:
        for n, rendered in self.blocks:
            if n == name:
                return rendered
        raise KeyError(name)

    def with_body(self, blocks: tuple[tuple[str, str], ...], **changes) -> "PromptSketch":
        """Rebuild the byte body after a block rewrite (used by redaction)."""
        body = "\n".join(rendered for _, rendered in blocks).encode("utf-8")
        token_estimate = _token_estimate(blocks, body)
        return replace(self, body=body, blocks=blocks, token_estimate=token_estimate, **changes)


def _q(text: str) -> str:
    return quote(str(text), safe=" ")


def _token_estimate(blocks, body: bytes) -> int:
    counted = len(body)
    for name, rendered in blocks:
        if name == "evidence" and rendered == "[Evidence]":
            counted -= len(rendered.encode("utf-8")) + 1   # block plus joining newline
    return math.ceil(max(counted, 0) / 4)


def serialize_sketch(
    z: CodeSequence,
    salient: list[np.ndarray] | None = None,
    evidence: list | None = None,
    task: str = "explain",
    config: SketchConfig = SketchConfig(),
    context_fields: dict[str, str] | None = None,
    raw_attachment_requests: int = 0,
) -> PromptSketch:
    """Render a code sequence (plus optional evidence) into sketch bytes.

    ``evidence`` items need ``doc_id``, ``doc_type`` and ``text``
    attributes.  Raises OversizeSketch when either byte cap is exceeded.
    """
    salient = salient or []
    evidence = evidence or []
    if task not in TASKS:
        raise ValueError(f"task {task!r} not one of {TASKS}")
    if len(salient) > config.max_salient:
        raise OversizeSketch(f"{len(salient)} salient vectors exceed cap {config.max_salient}")

    mods = "".join("1" if b else "0" for b in z.modality_presence)
    ctx_parts = [f"site={_q(z.site_id)}", f"t={z.timestamp_ms}", f"mods={mods}"]
    for key in sorted(context_fields or {}):
        ctx_parts.append(f"{_q(key)}={_q((context_fields or {})[key])}")
    context = "[Context] " + "; ".join(ctx_parts)

    sem_parts = [
        "codes=" + ",".join(str(c) for c in z.codes),
        f"conf={z.confidence:.4f}",
    ]
    if salient:
        encoded = [
            base64.b64encode(np.asarray(v, dtype="<f4").tobytes()).decode("ascii")
            for v in salient
        ]
        sem_parts.append("salient=" + ";".join(encoded))
    semantics = "[Semantics] " + " ".join(sem_parts)

    if evidence:
        rows = [
            f"id={_q(s.doc_id)} type={_q(s.doc_type)} text={_q(s.text)}"
            for s in evidence
        ]
        evidence_block = "[Evidence] " + " | ".join(rows)
    else:
        evidence_block = "[Evidence]"

    task_block = f"[Task] {_q(task)}"

    blocks = (
        ("context", context),
        ("semantics", semantics),
        ("evidence", evidence_block),
        ("task", task_block),
    )
    body = "\n".join(rendered for _, rendered in blocks).encode("utf-8")

    pre_retrieval = len(body) - len(evidence_block.encode("utf-8")) - 1
    if pre_retrieval >= config.pre_retrieval_cap:
        raise OversizeSketch(
            f"pre-retrieval size {pre_retrieval} B exceeds cap {config.pre_retrieval_cap} B"
        )
    if len(body) > config.byte_cap:
        raise OversizeSketch(f"sketch size {len(body)} B exceeds cap {config.byte_cap} B")

    return PromptSketch(
        body=body,
        blocks=blocks,
        token_estimate=_token_estimate(blocks, body),
        codes=z.codes,
        doc_ids=tuple(s.doc_id for s in evidence),
        site_id=z.site_id,
        task=task,
        raw_attachment_requests=raw_attachment_requests,
    )
