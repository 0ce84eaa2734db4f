"""Two-stage manipulation policy stack: flow-matching base policy with
progress/motion lookahead heads, plus an online residual refinement stage
trained with SAC on self-derived dense rewards."""

__version__ = "0.1.0"
