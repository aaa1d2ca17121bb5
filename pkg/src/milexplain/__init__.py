"""Attention-based and black-box token explanations for sentence-pair classifiers."""
