"""Compact vision transformer with prunable MLP fc1 channels.

Two built-in geometries: "tiny" (2 blocks x 128 hidden channels, for tests)
and "small" (12 blocks x 1536, the full-scale layout). Each block's MLP is
fc1 -> GELU -> fc2; channel pruning zeroes fc1 rows (weight + bias) and the
matching fc2 columns.
"""
from __future__ import annotations

import torch
from torch import nn

GEOMETRIES = {
    "tiny": dict(dim=64, depth=2, heads=2, hidden=128, patch=8, image=32, classes=10),
    "small": dict(dim=384, depth=12, heads=6, hidden=1536, patch=4, image=32, classes=10),
}


class Block(nn.Module):
    def __init__(self, dim: int, heads: int, hidden: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.norm1(x)
        attn, _ = self.attn(h, h, h, need_weights=False)
        x = x + attn
        h = self.norm2(x)
        x = x + self.fc2(self.act(self.fc1(h)))
        return x


class VisionTransformer(nn.Module):
    def __init__(self, dim: int, depth: int, heads: int, hidden: int,
                 patch: int, image: int, classes: int):
        super().__init__()
        self.patch_embed = nn.Conv2d(3, dim, kernel_size=patch, stride=patch)
        tokens = (image // patch) ** 2
        self.cls_token = nn.Parameter(torch.zeros(1, 1, dim))
        self.pos_embed = nn.Parameter(torch.zeros(1, tokens + 1, dim))
        self.blocks = nn.ModuleList(Block(dim, heads, hidden) for _ in range(depth))
        self.norm = nn.LayerNorm(dim)
        self.head = nn.Linear(dim, classes)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        x = self.patch_embed(images).flatten(2).transpose(1, 2)
        cls = self.cls_token.expand(x.shape[0], -1, -1)
        x = torch.cat([cls, x], dim=1) + self.pos_embed
        for block in self.blocks:
            x = block(x)
        return self.head(self.norm(x[:, 0]))


def build_model(identifier: str, seed: int) -> VisionTransformer:
    if identifier not in GEOMETRIES:
        raise ValueError(
            f"unknown model {identifier!r}; choose from {sorted(GEOMETRIES)}"
        )
    torch.manual_seed(seed)
    model = VisionTransformer(**GEOMETRIES[identifier])
    nn.init.trunc_normal_(model.pos_embed, std=0.02)
    nn.init.trunc_normal_(model.cls_token, std=0.02)
    model.eval()
    return model
