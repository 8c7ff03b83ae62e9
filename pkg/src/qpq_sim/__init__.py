"""Simulator for quantum private queries built on oblivious keys."""

from .gf2 import (
    ContradictionError,
    InconsistentKeyError,
    LinearSpanOracle,
    ObliviousKey,
    ParityKnowledge,
    ParityUnionFind,
    combine_xor,
    concat_keys,
    cyclic_shift,
    knowledge_from_constraints,
)
from .sources import SourceParams, block_key_from_measurement, gen_generic_raw_key, gen_train, measure
from .lsa import block_sift, discard_probability, double_run_failure, jprotocol_stats, lsa_honest, lsa_malicious_greedy
from .protocol import Database, ProtocolTranscript, SessionConfig, run_session
from .attack import run_recovery
from .experiments import ExperimentConfig, RunStats

__all__ = [
    "ContradictionError", "InconsistentKeyError", "LinearSpanOracle", "ObliviousKey", "ParityKnowledge",
    "ParityUnionFind", "combine_xor", "concat_keys", "cyclic_shift", "knowledge_from_constraints",
    "SourceParams", "block_key_from_measurement", "gen_generic_raw_key", "gen_train", "measure",
    "block_sift", "discard_probability", "double_run_failure", "jprotocol_stats", "lsa_honest",
    "lsa_malicious_greedy", "Database", "ProtocolTranscript", "SessionConfig", "run_session",
    "run_recovery", "ExperimentConfig", "RunStats",
]

__version__ = "0.1.0"
