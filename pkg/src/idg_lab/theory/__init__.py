"""Exact finite-world theory: distributions, worlds, risks and oracles."""
