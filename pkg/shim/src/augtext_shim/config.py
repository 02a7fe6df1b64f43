"""Sidecar configuration and the model-size registry.

The toy family mirrors the layer counts of the pretrained family it stands
in for (12/6/2 transformer-style blocks) at a reduced width, so the three
sizes keep a strict compute ordering while staying loadable anywhere. Real
checkpoints are selected by passing their hub names instead of toy-*.
"""

from __future__ import annotations

from dataclasses import dataclass

ENCODER_DIM = 384

# Engine-reserved sentinel arriving in /fill_mask token lists.
MASK_SENTINEL = "<mask>"

# name -> (layers, hidden width); parameter counts are derived from the
# actual arrays and reported by /health.
TOY_MLM_FAMILY = {
    "toy-base": (12, 768),
    "toy-distilled": (6, 768),
    "toy-tiny": (2, 384),
}

# Hub checkpoints for the corresponding real models.
REAL_MLM_ALIASES = {
    "base": "bert-base-uncased",
    "distilled": "distilbert-base-uncased",
    "tiny": "prajjwal1/bert-tiny",
}


@dataclass(frozen=True)
class ShimConfig:
    """Which models to serve and where.

    mlm_model: a toy-* name or a fill-mask checkpoint name.
    encoder_model: "toy" or a sentence-encoder checkpoint (must emit 384-dim).
    translator_model: "toy" or a translation checkpoint pair prefix.
    """

    mlm_model: str = "toy-tiny"
    encoder_model: str = "toy"
    translator_model: str = "toy"
    src_lang: str = "en"
    tgt_lang: str = "tr"
    host: str = "127.0.0.1"
    port: int = 8401

    def __post_init__(self):
        if self.src_lang == self.tgt_lang:
            raise ValueError("translator pair must use two distinct languages")
