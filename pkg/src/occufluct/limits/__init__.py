"""Samplers and numeric evaluators for the limit processes."""
