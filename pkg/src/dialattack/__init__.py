"""dialattack: black-box synonym-substitution attacks on answer-ranking dialog models."""

from .attack import (
    AttackConfig,
    AttackResult,
    AttackTools,
    Substitution,
    attack_history,
    attack_question,
    random_word_attack,
    word_importance,
)
from .constraints import ConstraintConfig, Decision, GrammarChecker, admissible, grammar_check
from .corpus import (
    AttackInstance,
    Dialog,
    DialogRound,
    flatten_instances,
    load_corpus,
    save_corpus,
    segment_history,
)
from .encoder import SimilarityScorer, encode_sentence, semantic_similarity
from .fixtures import make_fixture_corpus
from .lexsub import (
    EmbeddingTable,
    SynonymCandidate,
    Token,
    embedding_candidates,
    is_stopword,
    mlm_candidates,
    pos_tag,
    tokenize,
)
from .metrics import (
    RobustnessReport,
    attack_aggregates,
    build_report,
    mrr,
    ndcg,
    perplexity,
    recall_at_k,
)
from .oracle import (
    CandidateScores,
    Oracle,
    OverlapRanker,
    ProtocolVictim,
    QueryCounter,
    RankerConfig,
    rank_of,
    softmax_probs,
)
from .protocol import ProtocolError, TransportError
from .runner import (
    AttackTypeClassifier,
    ExperimentConfig,
    ablation_sweep,
    aggregate_annotations,
    classify_attack_type,
    export_annotation_batch,
    run_experiment,
)

__version__ = "0.1.0"
