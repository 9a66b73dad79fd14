"""ECG-aware chat modelling toolkit: records, encoder, fusion, training, evaluation."""

__version__ = "0.1.0"
