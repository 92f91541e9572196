from .cyclic import CyclicTaskConfig, run_cyclic_benchmark
from .movielens import (
    RatingsTable,
    RerankDataset,
    RerankExample,
    build_rerank_dataset,
    fixture_ratings_path,
    ingest_ratings,
    run_movielens_eval,
    train_rerank_model,
)
from .reporting import run_manifest, write_csv, write_jsonl, write_report
from .unscramble import UnscrambleConfig, run_unscramble_benchmark

__all__ = [
    "CyclicTaskConfig",
    "run_cyclic_benchmark",
    "UnscrambleConfig",
    "run_unscramble_benchmark",
    "RatingsTable",
    "RerankExample",
    "RerankDataset",
    "ingest_ratings",
    "build_rerank_dataset",
    "train_rerank_model",
    "run_movielens_eval",
    "fixture_ratings_path",
    "write_jsonl",
    "write_csv",
    "write_report",
    "run_manifest",
]
