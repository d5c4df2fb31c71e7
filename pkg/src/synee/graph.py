"""Token-level dependency graphs and the graph-convolution channel.

The graph is undirected with self-loops: head edges from the aligned feature
table plus chain edges between consecutive tokens of one word, normalized
symmetrically (D^-1/2 (A+I) D^-1/2). One convolution step is
ReLU(norm_adjacency @ H @ weight + bias).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .align import AlignedFeatures


@dataclass
class DependencyGraph:
    """Normalized token adjacency plus per-token incoming-relation ids."""

    n: int
    norm_adjacency: np.ndarray
    rel_ids: tuple[int, ...]


def normalize_adjacency(adjacency: np.ndarray) -> np.ndarray:
    """Symmetric normalization with self-loops: D^-1/2 (A+I) D^-1/2."""
    a_hat = adjacency.astype(np.float64) + np.eye(adjacency.shape[0])
    inv_sqrt_degree = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * inv_sqrt_degree[:, None] * inv_sqrt_degree[None, :]


def build_graph(feat: AlignedFeatures) -> DependencyGraph:
    """Build the token graph from aligned features.

    Edges: every non-special, non-root token to the first token of its head
    word, plus a chain over consecutive tokens of the same word. Special
    tokens keep only their self-loop.
    """
    n = len(feat.word_index)
    adjacency = np.zeros((n, n), dtype=np.float64)
    for t in range(n):
        if feat.word_index[t] < 0:
            continue
        head = feat.head_token[t]
        if head >= 0 and head != t:
            adjacency[t, head] = adjacency[head, t] = 1.0
        if t + 1 < n and feat.word_index[t + 1] == feat.word_index[t]:
            adjacency[t, t + 1] = adjacency[t + 1, t] = 1.0
    return DependencyGraph(
        n=n,
        norm_adjacency=normalize_adjacency(adjacency),
        rel_ids=tuple(feat.dep_rel_ids),
    )


def gcn_layer(
    H: torch.Tensor,
    adjacency: torch.Tensor | np.ndarray,
    weight: torch.Tensor,
    bias: torch.Tensor,
) -> torch.Tensor:
    """One graph-convolution step: ReLU(adjacency @ H @ weight + bias)."""
    if isinstance(adjacency, np.ndarray):
        adjacency = torch.from_numpy(adjacency).to(H.dtype)
    if H.shape[-1] != weight.shape[0]:
        raise ValueError(
            f"feature dim {H.shape[-1]} does not match weight rows {weight.shape[0]}"
        )
    if adjacency.shape[-1] != H.shape[-2]:
        raise ValueError(
            f"adjacency size {tuple(adjacency.shape)} does not match {H.shape[-2]} rows"
        )
    return torch.relu(adjacency @ H @ weight + bias)


class GcnLayer(nn.Module):
    """Trainable graph-convolution layer over a batched padded adjacency."""

    def __init__(self, d_in: int, d_out: int):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(d_in, d_out))
        self.bias = nn.Parameter(torch.zeros(d_out))
        nn.init.xavier_uniform_(self.weight)

    def forward(self, H: torch.Tensor, adjacency: torch.Tensor) -> torch.Tensor:
        return gcn_layer(H, adjacency, self.weight, self.bias)


def dp_channel_forward(
    graph: DependencyGraph,
    rel_embedding_table: torch.Tensor,
    layer_stack: list[tuple[torch.Tensor, torch.Tensor]],
) -> torch.Tensor:
    """Relation embeddings propagated through the layer stack for one graph.

    Out-of-range relation ids fall back to the unknown embedding (row 0).
    An empty stack returns the raw relation embeddings.
    """
    vocab_size = rel_embedding_table.shape[0]
    ids = torch.tensor(
        [i if 0 <= i < vocab_size else 0 for i in graph.rel_ids], dtype=torch.long
    )
    H = rel_embedding_table[ids]
    adjacency = torch.from_numpy(graph.norm_adjacency).to(H.dtype)
    for weight, bias in layer_stack:
        H = gcn_layer(H, adjacency, weight, bias)
    return H


def pad_adjacency(graphs: list[DependencyGraph], length: int) -> torch.Tensor:
    """Stack per-sentence normalized adjacencies into a (batch, L, L) tensor.

    Padding rows and columns stay zero, so padded positions neither receive
    nor contribute convolution mass.
    """
    batch = torch.zeros(len(graphs), length, length, dtype=torch.float32)
    for b, graph in enumerate(graphs):
        batch[b, : graph.n, : graph.n] = torch.from_numpy(graph.norm_adjacency).float()
    return batch
