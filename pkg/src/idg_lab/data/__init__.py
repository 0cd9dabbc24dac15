"""Embedding datasets, synthetic generation and linear probes."""
