"""Reference forward pass of gated cross-modal fusion.

out = LN(H + sigmoid(g) * softmax(H Wq (E Wk)^T / sqrt(D)) E Wv)

Single head, no output projection, every weight passed in explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, softmax

from tsagent.errors import ScorerError

LN_EPS = 1e-5
GATE_INIT = -2.197


@dataclass(frozen=True)
class FusionInputs:
    hidden: np.ndarray  # (n, D)
    prior: np.ndarray  # (M, D)
    gate: np.ndarray  # (D,)
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    ln_gain: np.ndarray
    ln_bias: np.ndarray

    def check(self) -> int:
        if self.hidden.ndim != 2 or self.prior.ndim != 2:
            raise ScorerError("SHAPE", "hidden and prior must be matrices")
        d = self.hidden.shape[1]
        if self.prior.shape[1] != d or self.prior.shape[0] < 1:
            raise ScorerError("SHAPE", "prior must be M x D with M >= 1")
        for name in ("w_q", "w_k", "w_v"):
            if getattr(self, name).shape != (d, d):
                raise ScorerError("SHAPE", f"{name} must be {d} x {d}")
        for name in ("gate", "ln_gain", "ln_bias"):
            if getattr(self, name).shape != (d,):
                raise ScorerError("SHAPE", f"{name} must have length {d}")
        return d

    @classmethod
    def random(cls, n: int, m: int, d: int, rng: np.random.Generator, gate: float = GATE_INIT) -> "FusionInputs":
        s = 1.0 / np.sqrt(d)
        return cls(
            hidden=rng.normal(size=(n, d)),
            prior=rng.normal(size=(m, d)),
            gate=np.full(d, gate),
            w_q=rng.normal(scale=s, size=(d, d)),
            w_k=rng.normal(scale=s, size=(d, d)),
            w_v=rng.normal(scale=s, size=(d, d)),
            ln_gain=np.ones(d),
            ln_bias=np.zeros(d),
        )


def layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = LN_EPS) -> np.ndarray:
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gain + bias


def cross_attention(h, e, w_q, w_k, w_v) -> tuple[np.ndarray, np.ndarray]:
    """Returns (readout, attention weights); weight rows sum to one."""
    d = h.shape[1]
    scores = (h @ w_q) @ (e @ w_k).T / np.sqrt(d)
    attn = softmax(scores, axis=1)
    return attn @ (e @ w_v), attn


def gated_fusion_forward(inp: FusionInputs) -> np.ndarray:
    inp.check()
    readout, _ = cross_attention(inp.hidden, inp.prior, inp.w_q, inp.w_k, inp.w_v)
    return layer_norm(inp.hidden + expit(inp.gate) * readout, inp.ln_gain, inp.ln_bias)
