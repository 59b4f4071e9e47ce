"""Hybrid BiLSTM+CNN intent classifier with hand-written backpropagation."""

__version__ = "0.1.0"
