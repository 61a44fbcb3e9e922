"""Zero-shot machine-generated text detection and topic-shift evaluation."""

__version__ = "0.1.0"

from .corpus import (Document, TopicSpec, build_counterparts, default_topic_specs,
                     load_dataset, synth_topics, train_evaluation_backend, write_dataset)
from .detectors import (DetectorConfig, DocumentScore, detectgpt_statistic, entropy_statistic,
                        logp_statistic, logrank_statistic, perturb_spans, rank_statistic,
                        score_documents)
from .harness import (EvaluationReport, auroc, evaluate_pairing, export_score_distribution,
                      fpr_at_tpr, mixture_eval, transfer_matrix)
from .ngram import NGramModel, train_ngram
from .remote import RemoteBackend, RemoteEndpoint
from .scoring import SequenceScoring, TokenScore
from .tokenizer import Vocabulary, tokenize
from .topic_metrics import entropy_performance_correlation, topic_entropy
