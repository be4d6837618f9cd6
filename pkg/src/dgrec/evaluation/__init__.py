"""Ranking metrics, evaluation, attention analysis and synthetic data."""

from .attention import VarianceReport, attention_report, collect_traces, eligible_users, variance_report
from .evaluate import EvalResult, evaluate, evaluate_static, popularity_baseline
from .metrics import RankResult, ndcg, rank_items, ranks_from_scores, recall_at_k
from .synth import synth_social_data

__all__ = [
    "EvalResult",
    "RankResult",
    "VarianceReport",
    "attention_report",
    "collect_traces",
    "eligible_users",
    "evaluate",
    "evaluate_static",
    "ndcg",
    "popularity_baseline",
    "rank_items",
    "ranks_from_scores",
    "recall_at_k",
    "synth_social_data",
    "variance_report",
]
