"""LSTM-chain clustering policy and its training engine."""
