"""Causal language model wrapper with on-device grid snapping.

Only grid-snapped integer logits ever leave this module: the snap
(round half to even onto the 10^-k decimal lattice) happens on the
model's output tensor before anything crosses the wire, so transport
can never reintroduce float ambiguity.

The default model is a small byte-vocabulary transformer built from a
seeded configuration, so the full stack runs deterministically on CPU;
any Hugging Face causal LM identifier is accepted as a drop-in.
"""

from __future__ import annotations

import hashlib

import numpy as np
import torch

from .protocol import KIND_EXTERNAL, Identity
from .tokenizer import VOCAB_SIZE

DEFAULT_MODEL = "tiny-byte-lm"
_TINY_SEED_PREFIX = "tiny-byte-lm:"


def _build_tiny(seed: int):
    from transformers import GPT2Config, GPT2LMHeadModel

    torch.manual_seed(seed)
    config = GPT2Config(
        vocab_size=VOCAB_SIZE,
        n_positions=512,
        n_embd=64,
        n_layer=2,
        n_head=2,
        bos_token_id=0,
        eos_token_id=0,
    )
    return GPT2LMHeadModel(config)


class CausalLogitModel:
    """next_logits(context) -> int32 scaled logits on the 10^-k grid."""

    def __init__(self, model_id: str = DEFAULT_MODEL, grid_k: int = 3,
                 device: str = "cpu"):
        if not 1 <= grid_k <= 6:
            raise ValueError("grid_k must be in [1, 6]")
        self.model_id = model_id
        self.grid_k = grid_k
        self.device = torch.device(device)
        if model_id == DEFAULT_MODEL:
            self._model = _build_tiny(0)
        elif model_id.startswith(_TINY_SEED_PREFIX):
            self._model = _build_tiny(int(model_id[len(_TINY_SEED_PREFIX):]))
        else:
            from transformers import AutoModelForCausalLM

            self._model = AutoModelForCausalLM.from_pretrained(model_id)
        self._model.to(self.device)
        self._model.eval()
        self.vocab_size = int(self._model.config.vocab_size)
        self.max_context = int(self._model.config.n_positions) - 1

    @property
    def identity(self) -> Identity:
        digest = hashlib.sha256(
            f"{self.model_id}\x1f{self.grid_k}\x1f{self.vocab_size}".encode()
        ).digest()
        return Identity(KIND_EXTERNAL, digest, self.vocab_size)

    @torch.no_grad()
    def next_logits(self, context_ids: list[int]) -> np.ndarray:
        """Grid-snapped next-token logits; empty context uses a BOS of 0."""
        if len(context_ids) > self.max_context:
            raise ValueError(
                f"context of {len(context_ids)} exceeds model window "
                f"{self.max_context}"
            )
        ids = list(context_ids) or [0]
        x = torch.tensor([ids], dtype=torch.long, device=self.device)
        logits = self._model(x).logits[0, -1].double()
        step = 10.0 ** self.grid_k
        scaled = torch.round(logits * step)  # round half to even
        return scaled.cpu().numpy().astype(np.int32)
