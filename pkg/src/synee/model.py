"""Multi-channel sequence taggers and their training loop.

Five variants share one skeleton: a contextual encoder, optionally a POS
embedding channel, optionally a dependency channel (relation embeddings run
through stacked graph convolutions, or through an LSTM for the recurrent
variant), concatenated per token and fed to fully connected layers that
predict BIOE label logits. The trigger and role subtasks are trained as two
independent taggers (pipelined).
"""

from __future__ import annotations

import copy
import json
import logging
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from sklearn.base import BaseEstimator
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .align import EncodedRecord, FeatureSpace, decode_label_ids
from .encoders import build_encoder
from .errors import ConfigError, TrainingError
from .graph import GcnLayer, build_graph, pad_adjacency
from .metrics import MatchCounts, prf

logger = logging.getLogger(__name__)


class ModelVariant(str, Enum):
    """The five ablation variants, from encoder-only to both syntax channels."""

    ENCODER_ONLY = "encoder_only"
    POS_DP_RECURRENT = "pos_dp_recurrent"
    POS_EMBEDDING = "pos_embedding"
    DP_GCN = "dp_gcn"
    POS_DP_GCN = "pos_dp_gcn"

    @property
    def uses_pos(self) -> bool:
        return self in (self.POS_DP_RECURRENT, self.POS_EMBEDDING, self.POS_DP_GCN)

    @property
    def uses_dp(self) -> bool:
        return self in (self.POS_DP_RECURRENT, self.DP_GCN, self.POS_DP_GCN)

    @property
    def uses_gcn(self) -> bool:
        return self in (self.DP_GCN, self.POS_DP_GCN)


VARIANT_ORDER = (
    ModelVariant.ENCODER_ONLY,
    ModelVariant.POS_DP_RECURRENT,
    ModelVariant.POS_EMBEDDING,
    ModelVariant.DP_GCN,
    ModelVariant.POS_DP_GCN,
)


def collate(
    records: Sequence[EncodedRecord],
    subtask: str,
    need_graph: bool,
    pad_to: int | None = None,
) -> dict[str, torch.Tensor]:
    """Pad a batch of records into tensors; padded label positions get -100."""
    length = max(len(r) for r in records)
    if pad_to is not None:
        length = max(length, pad_to)
    batch_size = len(records)
    token_ids = torch.zeros(batch_size, length, dtype=torch.long)
    pos_ids = torch.zeros(batch_size, length, dtype=torch.long)
    dep_rel_ids = torch.zeros(batch_size, length, dtype=torch.long)
    pad_mask = torch.ones(batch_size, length, dtype=torch.bool)
    content_mask = torch.zeros(batch_size, length, dtype=torch.bool)
    labels = torch.full((batch_size, length), -100, dtype=torch.long)
    for b, record in enumerate(records):
        n = len(record)
        token_ids[b, :n] = torch.tensor(record.token_ids)
        pos_ids[b, :n] = torch.tensor(record.pos_ids)
        dep_rel_ids[b, :n] = torch.tensor(record.dep_rel_ids)
        pad_mask[b, :n] = False
        content_mask[b, :n] = ~torch.tensor(record.special_mask)
        gold = record.trigger_labels if subtask == "trigger" else record.role_labels
        labels[b, :n] = torch.tensor(gold)
    batch = {
        "token_ids": token_ids,
        "pos_ids": pos_ids,
        "dep_rel_ids": dep_rel_ids,
        "pad_mask": pad_mask,
        "content_mask": content_mask,
        "labels": labels,
        "lengths": (~pad_mask).sum(dim=1),
    }
    if need_graph:
        graphs = [build_graph(record.aligned_features) for record in records]
        batch["adjacency"] = pad_adjacency(graphs, length)
    return batch


class TaggerNet(nn.Module):
    """The multi-channel network behind one subtask tagger."""

    def __init__(
        self,
        variant: ModelVariant,
        feature_space: FeatureSpace,
        scheme_size: int,
        encoder_dim: int = 64,
        encoder_layers: int = 2,
        encoder_heads: int = 4,
        encoder_ffn: int = 128,
        pos_dim: int = 32,
        dp_dim: int = 32,
        gcn_layers: int = 2,
        gcn_hidden: int = 64,
        gcn_out: int = 64,
        recurrent_hidden: int = 64,
        fusion_hidden: Sequence[int] = (128,),
        dropout: float = 0.1,
    ):
        super().__init__()
        self.variant = variant
        self.encoder = build_encoder(
            feature_space,
            d_model=encoder_dim,
            n_layers=encoder_layers,
            n_heads=encoder_heads,
            ffn_dim=encoder_ffn,
            dropout=dropout,
        )
        fusion_input = self.encoder.output_dim

        if variant.uses_pos:
            if len(feature_space.pos_vocab) <= 1:
                raise ConfigError(f"variant {variant.value} needs POS features, vocab is empty")
            self.pos_embedding = nn.Embedding(len(feature_space.pos_vocab), pos_dim)
        if variant.uses_dp:
            if len(feature_space.dep_vocab) <= 1:
                raise ConfigError(f"variant {variant.value} needs DP features, vocab is empty")
            self.dp_embedding = nn.Embedding(len(feature_space.dep_vocab), dp_dim)

        if variant.uses_gcn:
            dims = [dp_dim] + [gcn_hidden] * max(gcn_layers - 1, 0) + [gcn_out]
            if gcn_layers == 0:
                dims = [dp_dim]
            self.gcn = nn.ModuleList(
                GcnLayer(dims[i], dims[i + 1]) for i in range(len(dims) - 1)
            )
            fusion_input += dims[-1]
        if variant == ModelVariant.POS_DP_RECURRENT:
            self.pos_lstm = nn.LSTM(pos_dim, recurrent_hidden, batch_first=True)
            self.dp_lstm = nn.LSTM(dp_dim, recurrent_hidden, batch_first=True)
            fusion_input += 2 * recurrent_hidden
        elif variant.uses_pos:
            fusion_input += pos_dim

        layers: list[nn.Module] = []
        previous = fusion_input
        for hidden in fusion_hidden:
            layers += [nn.Linear(previous, hidden), nn.ReLU(), nn.Dropout(dropout)]
            previous = hidden
        layers.append(nn.Linear(previous, scheme_size))
        self.fusion = nn.Sequential(*layers)

    def forward(self, batch: dict[str, torch.Tensor]) -> torch.Tensor:
        pieces = [self.encoder(batch["token_ids"], batch["pad_mask"])]
        if self.variant == ModelVariant.POS_DP_RECURRENT:
            pieces.append(self._run_lstm(self.pos_lstm, self.pos_embedding(batch["pos_ids"]), batch))
            pieces.append(self._run_lstm(self.dp_lstm, self.dp_embedding(batch["dep_rel_ids"]), batch))
        else:
            if self.variant.uses_pos:
                pieces.append(self.pos_embedding(batch["pos_ids"]))
            if self.variant.uses_gcn:
                hidden = self.dp_embedding(batch["dep_rel_ids"])
                for layer in self.gcn:
                    hidden = layer(hidden, batch["adjacency"])
                pieces.append(hidden)
        return self.fusion(torch.cat(pieces, dim=-1))

    @staticmethod
    def _run_lstm(lstm: nn.LSTM, inputs: torch.Tensor, batch: dict[str, torch.Tensor]) -> torch.Tensor:
        packed = pack_padded_sequence(
            inputs, batch["lengths"].cpu(), batch_first=True, enforce_sorted=False
        )
        output, _ = lstm(packed)
        unpacked, _ = pad_packed_sequence(
            output, batch_first=True, total_length=inputs.shape[1]
        )
        return unpacked

    def parameter_groups(self) -> dict[str, list[nn.Parameter]]:
        """Named parameter groups, for per-group learning rates and probes."""
        groups: dict[str, list[nn.Parameter]] = {
            "encoder": list(self.encoder.parameters()),
            "fusion": list(self.fusion.parameters()),
        }
        if hasattr(self, "pos_embedding"):
            groups["pos_embedding"] = list(self.pos_embedding.parameters())
        if hasattr(self, "dp_embedding"):
            groups["dp_embedding"] = list(self.dp_embedding.parameters())
        if hasattr(self, "gcn"):
            groups["gcn"] = list(self.gcn.parameters())
        if hasattr(self, "pos_lstm"):
            groups["pos_lstm"] = list(self.pos_lstm.parameters())
            groups["dp_lstm"] = list(self.dp_lstm.parameters())
        return groups


def token_f1(
    predicted: Sequence[Sequence[int]],
    gold: Sequence[Sequence[int]],
    content_masks: Sequence[Sequence[bool]],
) -> tuple[float, float, float]:
    """Token-level P/R/F1 over non-O labels, micro-averaged across sentences."""
    counts = MatchCounts()
    for pred_row, gold_row, mask_row in zip(predicted, gold, content_masks):
        for p, g, keep in zip(pred_row, gold_row, mask_row):
            if not keep:
                continue
            if g != 0 and p == g:
                counts += MatchCounts(tp=1)
            else:
                if p != 0:
                    counts += MatchCounts(fp=1)
                if g != 0:
                    counts += MatchCounts(fn=1)
    return prf(counts)


def best_epoch(validation_f1: Sequence[float]) -> int:
    """1-based index of the first maximum of the validation trace."""
    if not validation_f1:
        raise ValueError("empty validation trace")
    best = max(validation_f1)
    return validation_f1.index(best) + 1


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_precision: float | None = None
    val_recall: float | None = None
    val_f1: float | None = None

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_precision": self.val_precision,
            "val_recall": self.val_recall,
            "val_f1": self.val_f1,
        }


class EventTagger(BaseEstimator):
    """One subtask tagger with a scikit-learn-style fit/predict surface.

    ``fit`` minimizes mean per-token cross-entropy over non-padding tokens
    and keeps the epoch checkpoint with the best validation F1; ``predict``
    returns per-token label ids and ``predict_spans`` decoded character
    spans. All construction arguments are plain hyperparameters, so
    ``get_params``/``set_params`` compose with the wider ecosystem.
    """

    def __init__(
        self,
        subtask: str = "trigger",
        variant: str = "pos_dp_gcn",
        encoder_dim: int = 64,
        encoder_layers: int = 2,
        encoder_heads: int = 4,
        encoder_ffn: int = 128,
        pos_dim: int = 32,
        dp_dim: int = 32,
        gcn_layers: int = 2,
        gcn_hidden: int = 64,
        gcn_out: int = 64,
        recurrent_hidden: int = 64,
        fusion_hidden: tuple[int, ...] = (128,),
        dropout: float = 0.1,
        lr: float = 1e-2,
        encoder_lr: float | None = None,
        epochs: int = 20,
        batch_size: int = 16,
        patience: int | None = None,
        max_grad_norm: float = 5.0,
        seed: int = 13,
        device: str = "cpu",
    ):
        self.subtask = subtask
        self.variant = variant
        self.encoder_dim = encoder_dim
        self.encoder_layers = encoder_layers
        self.encoder_heads = encoder_heads
        self.encoder_ffn = encoder_ffn
        self.pos_dim = pos_dim
        self.dp_dim = dp_dim
        self.gcn_layers = gcn_layers
        self.gcn_hidden = gcn_hidden
        self.gcn_out = gcn_out
        self.recurrent_hidden = recurrent_hidden
        self.fusion_hidden = fusion_hidden
        self.dropout = dropout
        self.lr = lr
        self.encoder_lr = encoder_lr
        self.epochs = epochs
        self.batch_size = batch_size
        self.patience = patience
        self.max_grad_norm = max_grad_norm
        self.seed = seed
        self.device = device

    # -- construction -----------------------------------------------------

    def build_net(self, feature_space: FeatureSpace) -> TaggerNet:
        variant = ModelVariant(self.variant)
        scheme = feature_space.scheme_for(self.subtask)
        return TaggerNet(
            variant,
            feature_space,
            scheme_size=len(scheme),
            encoder_dim=self.encoder_dim,
            encoder_layers=self.encoder_layers,
            encoder_heads=self.encoder_heads,
            encoder_ffn=self.encoder_ffn,
            pos_dim=self.pos_dim,
            dp_dim=self.dp_dim,
            gcn_layers=self.gcn_layers,
            gcn_hidden=self.gcn_hidden,
            gcn_out=self.gcn_out,
            recurrent_hidden=self.recurrent_hidden,
            fusion_hidden=tuple(self.fusion_hidden),
            dropout=self.dropout,
        ).to(self.device)

    def _seed_everything(self) -> None:
        torch.manual_seed(self.seed)
        np.random.seed(self.seed % (2**32))
        random.seed(self.seed)

    @property
    def _needs_graph(self) -> bool:
        return ModelVariant(self.variant).uses_gcn

    # -- training ---------------------------------------------------------

    def fit(
        self,
        records: Sequence[EncodedRecord],
        feature_space: FeatureSpace,
        validation: Sequence[EncodedRecord] | None = None,
    ) -> "EventTagger":
        if not records:
            raise ConfigError("cannot fit on an empty record list")
        self._seed_everything()
        self.feature_space_ = feature_space
        self.net_ = self.build_net(feature_space)
        encoder_lr = self.encoder_lr if self.encoder_lr is not None else self.lr / 10.0
        groups = self.net_.parameter_groups()
        channel_params = [p for name, params in groups.items() if name != "encoder" for p in params]
        optimizer = torch.optim.Adam(
            [
                {"params": groups["encoder"], "lr": encoder_lr},
                {"params": channel_params, "lr": self.lr},
            ]
        )

        self.history_: list[EpochStats] = []
        best_f1 = -1.0
        best_state: dict | None = None
        self.best_epoch_ = 0
        indices = list(range(len(records)))
        for epoch in range(1, self.epochs + 1):
            self.net_.train()
            random.Random(self.seed * 7919 + epoch).shuffle(indices)
            total_loss, total_tokens = 0.0, 0
            for start in range(0, len(indices), self.batch_size):
                chunk = [records[i] for i in indices[start : start + self.batch_size]]
                batch = collate(chunk, self.subtask, self._needs_graph)
                batch = {k: v.to(self.device) for k, v in batch.items()}
                logits = self.net_(batch)
                loss = nn.functional.cross_entropy(
                    logits.reshape(-1, logits.shape[-1]),
                    batch["labels"].reshape(-1),
                    ignore_index=-100,
                )
                if not torch.isfinite(loss):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch} (subtask={self.subtask}, "
                        f"variant={self.variant}, lr={self.lr})"
                    )
                optimizer.zero_grad()
                loss.backward()
                if self.max_grad_norm:
                    nn.utils.clip_grad_norm_(self.net_.parameters(), self.max_grad_norm)
                optimizer.step()
                n_tokens = int((batch["labels"] != -100).sum())
                total_loss += float(loss) * n_tokens
                total_tokens += n_tokens

            stats = EpochStats(epoch=epoch, train_loss=total_loss / max(total_tokens, 1))
            if validation:
                stats.val_precision, stats.val_recall, stats.val_f1 = self.score(validation)
            self.history_.append(stats)
            logger.info(
                "epoch %d: loss/token %.4f%s",
                epoch,
                stats.train_loss,
                "" if stats.val_f1 is None else f", val F1 {stats.val_f1:.4f}",
            )
            if validation:
                if stats.val_f1 > best_f1:
                    best_f1 = stats.val_f1
                    best_state = copy.deepcopy(self.net_.state_dict())
                    self.best_epoch_ = epoch
                elif self.patience is not None and epoch - self.best_epoch_ >= self.patience:
                    logger.info("early stop at epoch %d (best was %d)", epoch, self.best_epoch_)
                    break

        if best_state is not None:
            self.net_.load_state_dict(best_state)
            self.best_val_f1_ = best_f1
        else:
            self.best_epoch_ = len(self.history_)
            self.best_val_f1_ = None
        return self

    # -- inference ---------------------------------------------------------

    def predict(self, records: Sequence[EncodedRecord]) -> list[list[int]]:
        """Per-token label ids for each record (its full token length)."""
        self._check_fitted()
        self.net_.eval()
        outputs: list[list[int]] = []
        with torch.no_grad():
            for start in range(0, len(records), self.batch_size):
                chunk = records[start : start + self.batch_size]
                batch = collate(chunk, self.subtask, self._needs_graph)
                batch = {k: v.to(self.device) for k, v in batch.items()}
                predicted = self.net_(batch).argmax(dim=-1)
                for row, record in zip(predicted, chunk):
                    outputs.append(row[: len(record)].tolist())
        return outputs

    def predict_spans(self, records: Sequence[EncodedRecord]) -> list[list[tuple[str, int, int]]]:
        """Decoded (class, start_char, end_char) spans for each record."""
        scheme = self.feature_space_.scheme_for(self.subtask)
        return [
            decode_label_ids(label_ids, record.token_sequence, scheme)
            for label_ids, record in zip(self.predict(records), records)
        ]

    def score(self, records: Sequence[EncodedRecord]) -> tuple[float, float, float]:
        """Token-level P/R/F1 of predictions against the records' gold labels."""
        predicted = self.predict(records)
        gold = [
            record.trigger_labels if self.subtask == "trigger" else record.role_labels
            for record in records
        ]
        masks = [[not s for s in record.special_mask] for record in records]
        return token_f1(predicted, gold, masks)

    def _check_fitted(self) -> None:
        if not hasattr(self, "net_"):
            raise ConfigError("tagger is not fitted; call fit() or load()")

    # -- persistence --------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Write a self-describing checkpoint directory."""
        self._check_fitted()
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        config = {
            "format_version": 1,
            "params": {**self.get_params(), "fusion_hidden": list(self.fusion_hidden)},
            "best_epoch": self.best_epoch_,
            "best_val_f1": self.best_val_f1_,
        }
        (path / "config.json").write_text(json.dumps(config, indent=2), encoding="utf-8")
        self.feature_space_.save(path / "feature_space.json")
        torch.save(self.net_.state_dict(), path / "weights.pt")
        with open(path / "history.jsonl", "w", encoding="utf-8") as handle:
            for stats in self.history_:
                handle.write(json.dumps(stats.to_dict()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "EventTagger":
        path = Path(path)
        config = json.loads((path / "config.json").read_text(encoding="utf-8"))
        params = dict(config["params"])
        params["fusion_hidden"] = tuple(params["fusion_hidden"])
        tagger = cls(**params)
        tagger.feature_space_ = FeatureSpace.load(path / "feature_space.json")
        tagger.net_ = tagger.build_net(tagger.feature_space_)
        tagger.net_.load_state_dict(torch.load(path / "weights.pt", weights_only=True))
        tagger.best_epoch_ = config["best_epoch"]
        tagger.best_val_f1_ = config["best_val_f1"]
        tagger.history_ = []
        history_path = path / "history.jsonl"
        if history_path.exists():
            with open(history_path, encoding="utf-8") as handle:
                for line in handle:
                    if line.strip():
                        tagger.history_.append(EpochStats(**json.loads(line)))
        return tagger

    @property
    def best_train_loss(self) -> float | None:
        """Training loss/token at the selected epoch, for report tables."""
        if not getattr(self, "history_", None):
            return None
        return self.history_[self.best_epoch_ - 1].train_loss
