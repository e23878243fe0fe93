"""Statistically validated co-occurrence networks of investors.

Daily trading records are encoded as buy / sell / balanced states, every
investor pair and state pair is tested for excess co-occurrence, the links
surviving a multiple-testing correction form a network, and map-equation
communities in that network are characterised by attribute enrichment.
"""

__version__ = "0.1.0"

from .community import Partition, WeightedGraph, detect_communities, map_equation, nmi
from .enrichment import attribute_pvalues, characterize_clusters, link_combination_enrichment
from .market_data import Dataset, filter_active, load_trades
from .network import ValidatedNetwork, assemble_network, strip_opposite_links
from .states import TradeState, build_state_matrix, encode_day
from .synth import GroupSpec, SynthSpec, generate
from .validation import (TestConfig, bonferroni_threshold, cooccurrence_pvalue,
                         enumerate_tests, fdr_threshold, validate)

__all__ = [
    "Dataset", "GroupSpec", "Partition", "SynthSpec", "TestConfig", "TradeState",
    "ValidatedNetwork", "WeightedGraph", "assemble_network", "attribute_pvalues",
    "bonferroni_threshold", "build_state_matrix", "characterize_clusters",
    "cooccurrence_pvalue", "detect_communities", "encode_day", "enumerate_tests",
    "fdr_threshold", "filter_active", "generate", "link_combination_enrichment",
    "load_trades", "map_equation", "nmi", "strip_opposite_links", "validate",
]
