"""Physical-layer model of the cell-free network."""
