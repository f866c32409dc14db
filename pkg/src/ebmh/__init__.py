"""Block Metropolis-Hastings sampling and evaluation for energy-based
sequence models."""

__version__ = "0.1.0"

from .seq import Vocab, TokenSeq, tokenize, detokenize, build_vocab
from .ngram import NgramModel, Sample
from .energy import (EnergyError, EnergySpec, EnergyTerm, SimilarityScorer,
                     StyleClassifier, disc_energy, load_energy_spec, sim_energy,
                     total_energy, train_classifier)
from .proposal import (AdapterBlockProposal, AncestralProposal, ProposalError,
                       ProposalRecord, SpanBlockProposal, SpanCfg,
                       TokenMaskProposal, ngram_masked_conditional,
                       propose_adapter_block, propose_span_block,
                       propose_token_mask)
from .engine import (BatchResult, ChainState, MHConfig, TraceEntry, accept_prob,
                     run_batch, stationary_check, step, write_trace_ndjson)
from .evaluate import (EvalRecord, IntrinsicReport, SamplerStats,
                       calibrate_fluency_tau, intrinsic_eval, j_score, judge,
                       make_fluency_judge, paired_bootstrap)
from .adapter import (AdapterClient, AdapterError, AdapterHTTPError,
                      AdapterSchemaError, AdapterTimeoutError, AdapterValueError,
                      ConformanceReport, client_call, conformance_suite)

__all__ = [
    "Vocab", "TokenSeq", "tokenize", "detokenize", "build_vocab",
    "NgramModel", "Sample",
    "EnergyError", "EnergySpec", "EnergyTerm", "SimilarityScorer",
    "StyleClassifier", "disc_energy", "load_energy_spec", "sim_energy",
    "total_energy", "train_classifier",
    "AdapterBlockProposal", "AncestralProposal", "ProposalError",
    "ProposalRecord", "SpanBlockProposal", "SpanCfg", "TokenMaskProposal",
    "ngram_masked_conditional", "propose_adapter_block", "propose_span_block",
    "propose_token_mask",
    "BatchResult", "ChainState", "MHConfig", "TraceEntry", "accept_prob",
    "run_batch", "stationary_check", "step", "write_trace_ndjson",
    "EvalRecord", "IntrinsicReport", "SamplerStats", "calibrate_fluency_tau",
    "intrinsic_eval", "j_score", "judge", "make_fluency_judge",
    "paired_bootstrap",
    "AdapterClient", "AdapterError", "AdapterHTTPError", "AdapterSchemaError",
    "AdapterTimeoutError", "AdapterValueError", "ConformanceReport",
    "client_call", "conformance_suite",
]
