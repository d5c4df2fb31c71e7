"""Contextual token encoders: a tiny offline stand-in and a pretrained adapter.

The stand-in is a small randomly initialized transformer trained from
scratch, so the full pipeline and test suite run without downloading
weights. Real pretrained encoders plug in through the same interface when
the ``transformers`` extra is installed.
"""

from __future__ import annotations

import torch
from torch import nn

from .align import FeatureSpace
from .errors import ConfigError


class TinyEncoder(nn.Module):
    """Small trainable transformer over corpus-built token ids."""

    def __init__(
        self,
        vocab_size: int,
        d_model: int = 64,
        n_layers: int = 2,
        n_heads: int = 4,
        ffn_dim: int = 128,
        dropout: float = 0.1,
        max_len: int = 512,
    ):
        super().__init__()
        self.output_dim = d_model
        self.token_embedding = nn.Embedding(vocab_size, d_model)
        self.position_embedding = nn.Embedding(max_len, d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=d_model,
            nhead=n_heads,
            dim_feedforward=ffn_dim,
            dropout=dropout,
            batch_first=True,
        )
        self.transformer = nn.TransformerEncoder(layer, num_layers=n_layers, enable_nested_tensor=False)

    def forward(self, token_ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(token_ids.shape[1], device=token_ids.device)
        hidden = self.token_embedding(token_ids) + self.position_embedding(positions)
        return self.transformer(hidden, src_key_padding_mask=pad_mask)


class PretrainedEncoder(nn.Module):
    """Fine-tunable wrapper around a ``transformers`` masked-LM backbone."""

    def __init__(self, model_name: str):
        super().__init__()
        try:
            from transformers import AutoModel
        except ImportError as exc:
            raise ConfigError(
                f"encoder {model_name!r} needs the 'transformers' extra (pip install synee[hf])"
            ) from exc
        self.backbone = AutoModel.from_pretrained(model_name)
        self.output_dim = self.backbone.config.hidden_size

    def forward(self, token_ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        attention_mask = (~pad_mask).long()
        return self.backbone(input_ids=token_ids, attention_mask=attention_mask).last_hidden_state


def build_encoder(
    feature_space: FeatureSpace,
    d_model: int = 64,
    n_layers: int = 2,
    n_heads: int = 4,
    ffn_dim: int = 128,
    dropout: float = 0.1,
) -> nn.Module:
    if feature_space.encoder_name == "tiny":
        if feature_space.token_vocab is None:
            raise ConfigError("feature space has no token vocabulary for the stand-in encoder")
        return TinyEncoder(
            vocab_size=len(feature_space.token_vocab),
            d_model=d_model,
            n_layers=n_layers,
            n_heads=n_heads,
            ffn_dim=ffn_dim,
            dropout=dropout,
            max_len=feature_space.max_tokens,
        )
    return PretrainedEncoder(feature_space.encoder_name)
