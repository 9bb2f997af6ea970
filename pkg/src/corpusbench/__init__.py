"""corpusbench: build synthetic eval datasets from a markdown corpus, run chat
endpoints (plain or retrieval-augmented) against them, score responses through
four evaluation layers, and rank systems with tie-aware bootstrap leaderboards."""

__version__ = "0.1.0"

from .corpus import (
    Chapter,
    Chunk,
    ChunkStrategy,
    CorpusDocument,
    chunk_document,
    clean_document,
    load_corpus,
    split_chapters,
)
from .datagen import (
    MCQItem,
    QAPair,
    dedup,
    flesch_reading_ease,
    generate_mcq,
    generate_qa,
    profile_dataset,
    split_dataset,
)
from .evaluation import (
    EvalRecord,
    SystemUnderTest,
    ingest_human_labels,
    run_judge,
    run_mcq,
    run_text_sim,
)
from .metrics import SimilarityReport, bertscore, bleu, rouge_l, rouge_n, similarity_report
from .providers import ChatRequest, ChatResponse, EmbeddingEndpoint, ModelEndpoint, chat, embed, faithfulness
from .rag import (
    RetrievalConfig,
    VectorStore,
    answer_with_rag,
    augment_prompt,
    build_index,
    default_config_grid,
    retrieve,
)
from .ranking import (
    Leaderboard,
    PairwiseResult,
    ScoreVector,
    bootstrap_pair,
    median_rank,
    rank_with_ties,
)
from .tokens import estimate_tokens

__all__ = [name for name in dir() if not name.startswith("_")]
