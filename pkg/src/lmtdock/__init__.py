"""lmtdock: linear model tree surrogates and live explanations for docking controllers."""

__version__ = "0.1.0"
