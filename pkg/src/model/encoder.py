"""
Miniature ViT encoder: patch embedding, class token, learned position
embedding and pre-norm transformer blocks. Attention keeps q, k, v and o as
separate nn.Linear projections so LoRA adapters can be attached to each.
"""
from typing import List

import torch
import torch.nn as nn
from pydantic import BaseModel, ConfigDict, model_validator

from src.utils.errors import ShapeError


class EncoderConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    blocks: int = 12
    embed_dim: int = 96
    heads: int = 4
    patch_size: int = 8
    mlp_ratio: float = 4.0
    image_height: int = 64
    image_width: int = 64
    class_token: bool = True

    @model_validator(mode="after")
    def _check(self):
        if self.blocks < 1:
            raise ValueError(f"blocks must be >= 1, got {self.blocks}")
        if self.heads < 1 or self.embed_dim % self.heads != 0:
            raise ValueError(f"embed_dim {self.embed_dim} must be divisible by heads {self.heads}")
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")
        divisor = self.patch_size * 8
        if self.image_height % divisor or self.image_width % divisor:
            raise ValueError(
                f"image size {self.image_height}x{self.image_width} must be divisible by patch_size*8 = {divisor}"
            )
        if self.mlp_ratio <= 0:
            raise ValueError("mlp_ratio must be > 0")
        return self

    @property
    def grid(self):
        return self.image_height // self.patch_size, self.image_width // self.patch_size

    @property
    def num_tokens(self) -> int:
        gh, gw = self.grid
        return gh * gw + (1 if self.class_token else 0)


class Attention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.scale = self.head_dim ** -0.5
        self.q = nn.Linear(dim, dim)
        self.k = nn.Linear(dim, dim)
        self.v = nn.Linear(dim, dim)
        self.o = nn.Linear(dim, dim)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        B, N, _ = x.shape
        return x.reshape(B, N, self.heads, self.head_dim).transpose(1, 2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        B, N, C = x.shape
        q, k, v = self._split(self.q(x)), self._split(self.k(x)), self._split(self.v(x))
        attn = ((q * self.scale) @ k.transpose(-2, -1)).softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(B, N, C)
        return self.o(out)


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class Block(nn.Module):
    def __init__(self, dim: int, heads: int, mlp_ratio: float):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))

    def forward(self, x):
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class TransformerEncoder(nn.Module):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        self.cfg = cfg
        dim = cfg.embed_dim
        self.patch_embed = nn.Conv2d(3, dim, kernel_size=cfg.patch_size, stride=cfg.patch_size)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, dim)) if cfg.class_token else None
        self.pos_embed = nn.Parameter(torch.zeros(1, cfg.num_tokens, dim))
        self.blocks = nn.ModuleList([Block(dim, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.blocks)])
        self.norm = nn.LayerNorm(dim)

        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        if self.cls_token is not None:
            nn.init.trunc_normal_(self.cls_token, std=0.02)

    def forward(self, image: torch.Tensor) -> List[torch.Tensor]:
        """Returns the token features (B, N, D) after every block."""
        expected = (self.cfg.image_height, self.cfg.image_width)
        if tuple(image.shape[-2:]) != expected:
            raise ShapeError(f"encoder built for {expected} inputs, got {tuple(image.shape[-2:])}")
        x = self.patch_embed(image).flatten(2).transpose(1, 2)
        if self.cls_token is not None:
            x = torch.cat([self.cls_token.expand(x.shape[0], -1, -1), x], dim=1)
        assert x.shape[1] == self.cfg.num_tokens, f"token count {x.shape[1]} != {self.cfg.num_tokens}"
        x = x + self.pos_embed

        features = []
        for i, block in enumerate(self.blocks):
            x = block(x)
            features.append(self.norm(x) if i == len(self.blocks) - 1 else x)
        return features
