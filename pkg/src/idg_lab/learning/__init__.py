"""Networks, objectives and training over embedding datasets."""
