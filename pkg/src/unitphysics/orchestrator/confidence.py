"""Answer-span confidence and pruning."""

from __future__ import annotations

from typing import Sequence

from .types import CandidateChain, ChainStatus, TokenTrace


class UndefinedConfidenceError(ValueError):
    pass


def confidence_score(trace: TokenTrace, answer_span: tuple[int, int] | None = None) -> float:
    """Mean ``p_top1 - p_top2`` over the answer-span tokens."""
    span = trace.answer_span if answer_span is None else answer_span
    if span is None or span[1] <= span[0]:
        raise UndefinedConfidenceError("answer span is empty")
    margins = [a - b for a, b in trace.probs[span[0]:span[1]]]
    if len(margins) != span[1] - span[0]:
        raise UndefinedConfidenceError(f"answer span {span} exceeds the trace")
    return sum(margins) / len(margins)


def score_chains(chains: Sequence[CandidateChain]) -> None:
    for c in chains:
        c.confidence = confidence_score(c.trace) if c.trace.has_answer else None


def prune(chains: Sequence[CandidateChain], threshold: float = 0.4) -> list[CandidateChain]:
    """Mark chains under ``threshold`` as pruned; return the retained ones.

    The highest-confidence chain always survives, and chains without a
    defined confidence survive only when nothing else would.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    live = [c for c in chains if c.status == ChainStatus.GENERATED]
    scored = [c for c in live if c.confidence is not None]
    keep = {id(c) for c in scored if c.confidence >= threshold}
    if not keep:
        if scored:
            best = max(scored, key=lambda c: (c.confidence, -c.index))
            keep = {id(best)}
        else:
            keep = {id(c) for c in live}
    for c in live:
        if id(c) not in keep:
            c.transition(ChainStatus.PRUNED)
    return [c for c in live if id(c) in keep]
