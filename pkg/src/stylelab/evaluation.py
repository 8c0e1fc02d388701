"""Retrieval metrics, standardized partial AUC, and detection protocols.

Attribution is ranked retrieval by cosine similarity with deterministic
tie breaking (ascending candidate id).  Detection scores a query by its
maximum cosine similarity to a few reference documents; the partial AUC
over a low false-positive band is standardized so chance sits at 0.5 and
perfect separation at 1.0.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .util import write_text_atomic

MACHINE = "machine"
HUMAN = "human"


def _unit(v: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ContractError(f"zero vector: {what}")
    return v / n


@dataclass
class ScoredRanking:
    query_id: int
    candidate_ids: list[int]
    scores: list[float]
    gold_id: int

    def gold_rank(self) -> int:
        return self.candidate_ids.index(self.gold_id) + 1


@dataclass
class DetectionScores:
    scores: list[float]
    labels: list[str]
    protocol: str
    k: int = 0


def rank(query_id: int, query_emb, candidate_ids: list[int],
         candidate_embs, gold_id: int) -> ScoredRanking:
    """Candidates ordered by descending cosine; ties favor lower ids."""
    if len(candidate_ids) != len(candidate_embs):
        raise ContractError("candidate ids and embeddings disagree in length")
    if gold_id not in candidate_ids:
        raise ContractError(f"gold id {gold_id} missing from candidates")
    q = _unit(query_emb, f"query {query_id}")
    pairs = []
    for cid, emb in zip(candidate_ids, candidate_embs):
        c = _unit(emb, f"candidate {cid}")
        pairs.append((-float(np.dot(q, c)), cid))
    pairs.sort()
    return ScoredRanking(
        query_id=query_id,
        candidate_ids=[cid for _, cid in pairs],
        scores=[-s for s, _ in pairs],
        gold_id=gold_id,
    )


def mrr(rankings: list[ScoredRanking]) -> float:
    if not rankings:
        raise ContractError("mrr over an empty ranking set")
    return sum(1.0 / r.gold_rank() for r in rankings) / len(rankings)


def recall_at_k(rankings: list[ScoredRanking], k: int = 8) -> float:
    if not rankings:
        raise ContractError("recall over an empty ranking set")
    for r in rankings:
        if len(r.candidate_ids) < k:
            raise ContractError(f"query {r.query_id} has only "
                                f"{len(r.candidate_ids)} candidates, k={k}")
    return sum(1.0 for r in rankings if r.gold_rank() <= k) / len(rankings)


def aggregate_author(doc_embeddings) -> np.ndarray:
    """Mean of the L2-normalized doc embeddings, re-normalized."""
    if len(doc_embeddings) == 0:
        raise ContractError("aggregate over zero documents")
    units = [_unit(e, f"doc embedding {i}") for i, e in enumerate(doc_embeddings)]
    mean = np.mean(units, axis=0)
    n = np.linalg.norm(mean)
    if n == 0.0:
        raise ContractError("aggregated embedding has zero norm")
    return mean / n


def roc_points(scores: DetectionScores) -> list[tuple[float, float]]:
    """(FPR, TPR) points from the exhaustive threshold set, ascending FPR."""
    pos = [s for s, l in zip(scores.scores, scores.labels) if l == MACHINE]
    neg = [s for s, l in zip(scores.scores, scores.labels) if l == HUMAN]
    if not pos or not neg:
        raise ContractError("both classes must be present for a ROC curve")
    for s in scores.scores:
        if not np.isfinite(s):
            raise ContractError(f"non-finite detection score {s}")
    points = [(0.0, 0.0)]
    for thr in sorted(set(scores.scores), reverse=True):
        tpr = sum(1 for s in pos if s >= thr) / len(pos)
        fpr = sum(1 for s in neg if s >= thr) / len(neg)
        points.append((fpr, tpr))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    return points


def pauc(scores: DetectionScores, max_fpr: float = 0.01) -> float:
    """Trapezoidal area over FPR in [0, max_fpr], McClish-standardized
    onto [0, 1] so 0.5 is chance and 1.0 is perfect."""
    if not 0.0 < max_fpr <= 1.0:
        raise ContractError(f"max_fpr must be in (0, 1], got {max_fpr}")
    points = roc_points(scores)
    p = max_fpr
    area = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if x1 <= x0:
            continue
        lo, hi = x0, min(x1, p)
        if hi <= lo:
            continue

        def ytr(x):
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

        area += (hi - lo) * (ytr(lo) + ytr(hi)) / 2.0
        if x1 >= p:
            break
    lower = p * p / 2.0
    upper = p
    return 0.5 * (1.0 + (area - lower) / (upper - lower))


def _max_cosine(query_emb, reference_embs) -> float:
    q = _unit(query_emb, "detection query")
    return max(float(np.dot(q, _unit(r, "reference"))) for r in reference_embs)


def _mean_cosine(query_emb, reference_embs) -> float:
    q = _unit(query_emb, "detection query")
    vals = [float(np.dot(q, _unit(r, "reference"))) for r in reference_embs]
    return sum(vals) / len(vals)


def detect_single_target(query_embs, query_labels: list[str], reference_embs,
                         aggregate: str = "max") -> DetectionScores:
    """Score each query by its max (or mean) cosine to one generator's
    references; labels pass through."""
    if len(reference_embs) < 1:
        raise ContractError("need at least one reference document")
    if len(query_embs) != len(query_labels):
        raise ContractError("queries and labels disagree in length")
    agg = {"max": _max_cosine, "mean": _mean_cosine}.get(aggregate)
    if agg is None:
        raise ContractError(f"unknown aggregation {aggregate!r}")
    scores = [agg(q, reference_embs) for q in query_embs]
    return DetectionScores(scores=scores, labels=list(query_labels),
                           protocol="single-target", k=len(reference_embs))


def detect_multi_target(query_embs, query_labels: list[str],
                        references_per_generator: list,
                        aggregate: str = "max") -> DetectionScores:
    """Max over generators of the single-target score."""
    if len(references_per_generator) < 2:
        raise ContractError("multi-target needs at least two generators")
    per_gen = [detect_single_target(query_embs, query_labels, refs, aggregate)
               for refs in references_per_generator]
    scores = [max(d.scores[i] for d in per_gen) for i in range(len(query_embs))]
    return DetectionScores(scores=scores, labels=list(query_labels),
                           protocol="multi-target",
                           k=len(references_per_generator[0]))


# ---------------------------------------------------------------------------
# report writers
# ---------------------------------------------------------------------------


def author_rankings(query_ids, query_embs, query_authors,
                    author_ids, author_embs) -> list[ScoredRanking]:
    """Rank aggregated author embeddings against each query document."""
    out = []
    for qid, emb, gold in zip(query_ids, query_embs, query_authors):
        out.append(rank(qid, emb, list(author_ids), author_embs, gold))
    return out


@dataclass
class MetricsReport:
    dataset: str
    split: str
    mrr: float
    recall_at_8: float
    per_domain: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "split": self.split,
            "mrr": self.mrr,
            "recall_at_8": self.recall_at_8,
            "per_domain": self.per_domain,
        }


def write_metrics_report(report: MetricsReport, json_path, csv_path) -> None:
    write_text_atomic(json_path, json.dumps(report.to_json(), sort_keys=True,
                                            indent=2) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["metric", "domain", "value"])
    w.writerow(["mrr", "all", repr(report.mrr)])
    w.writerow(["recall_at_8", "all", repr(report.recall_at_8)])
    for domain in sorted(report.per_domain):
        for metric in sorted(report.per_domain[domain]):
            w.writerow([metric, domain, repr(report.per_domain[domain][metric])])
    write_text_atomic(csv_path, buf.getvalue())


def write_detection_report(scores: DetectionScores, fpr_caps, json_path) -> None:
    payload = {
        "protocol": scores.protocol,
        "k": scores.k,
        "pauc": {f"pauc@{int(round(cap * 100))}": pauc(scores, cap)
                 for cap in fpr_caps},
    }
    write_text_atomic(json_path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_scores_csv(scores: DetectionScores, path) -> None:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["query_id", "score", "label"])
    for i, (s, l) in enumerate(zip(scores.scores, scores.labels)):
        w.writerow([i, repr(s), l])
    write_text_atomic(path, buf.getvalue())
