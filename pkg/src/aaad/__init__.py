"""Attention allocation aid engine for sequential visual search.

Consumes a gaze-event stream, maintains time / eye-movement /
detectability performance estimates against fitted perceptual
performance curves, and raises a latching "Move On" recommendation once
probabilistic search-satisfaction criteria are met. Ships with fitting
tools, a deterministic replay harness, synthetic observers, a CLI, and
a live session service.
"""

__version__ = "0.1.0"
