"""Reservoir-computing and LSTM forecasters for daily price series."""

__version__ = "0.1.0"
