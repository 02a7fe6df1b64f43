"""Text augmentation engine: iterative mask filling, EDA-style baselines,
loss-based filtering of augmented sentences, and a benchmark harness."""

__version__ = "0.1.0"
