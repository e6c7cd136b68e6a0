"""Clinical-trial NLI pipeline: premise shortening, classification, evaluation."""

__version__ = "0.1.0"
