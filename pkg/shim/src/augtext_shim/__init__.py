"""Model sidecar: pretrained (or toy) models behind the augtext HTTP protocol."""

__version__ = "0.1.0"
