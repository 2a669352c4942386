"""Event-centric generative document retrieval.

Documents are represented by extracted events and causal relations, indexed
under semantically structured identifiers, and retrieved by trie-constrained
autoregressive decoding.
"""

__version__ = "0.1.0"
