"""Miniature decoder-only transformer with an LM head.

Pre-norm blocks (RMSNorm), causal multi-head attention, GELU MLP, learned
absolute positions. Every forward pass pads to ``max_seq_len`` so that the
arithmetic applied to a given row never depends on how long the sequence is;
together with the exact-zero masked softmax this makes hidden rows of a
prefix bit-identical whatever follows it.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numkernel as nk
from . import tape as T
from .errors import ConfigError, DegenerateError, InputError, ShapeError
from .tokenizer import PAD, Vocab

CHECKPOINT_MAGIC = b"SFPC"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d: int = 64
    heads: int = 4
    layers: int = 2
    max_seq_len: int = 64
    dropout_rate: float = 0.1

    def __post_init__(self):
        if self.vocab_size < 4:
            raise ConfigError("vocab_size must cover the reserved tokens")
        if self.d <= 0 or self.heads <= 0 or self.d % self.heads:
            raise ConfigError(f"d={self.d} must be a positive multiple of heads={self.heads}")
        if self.layers < 1 or self.max_seq_len < 1:
            raise ConfigError("layers and max_seq_len must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")

    @property
    def d_k(self) -> int:
        return self.d // self.heads


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    d = cfg.d
    shapes: dict[str, tuple[int, ...]] = {
        "tok_emb": (cfg.vocab_size, d),
        "pos_emb": (cfg.max_seq_len, d),
    }
    for i in range(cfg.layers):
        p = f"layers.{i}."
        shapes[p + "attn_norm"] = (d,)
        for w in ("wq", "wk", "wv", "wo"):
            shapes[p + w] = (d, d)
        shapes[p + "mlp_norm"] = (d,)
        shapes[p + "w_up"] = (d, 4 * d)
        shapes[p + "w_down"] = (4 * d, d)
    shapes["final_norm"] = (d,)
    shapes["w_out"] = (d, cfg.vocab_size)
    return shapes


def init_params(cfg: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    params = {}
    for idx, (name, shape) in enumerate(param_shapes(cfg).items()):
        if len(shape) == 1:
            params[name] = nk.seeded_init(shape, None, "ones")
        else:
            # keeps initial logits near zero so the LM starts close to uniform
            gain = 0.5 if name == "w_out" else 1.0
            params[name] = nk.seeded_init(shape, [seed, idx], "xavier-uniform", gain=gain)
    return params


def check_params(params: dict[str, np.ndarray], cfg: ModelConfig):
    shapes = param_shapes(cfg)
    if set(params) != set(shapes):
        raise ShapeError(f"parameter names differ from config: {sorted(set(params) ^ set(shapes))}")
    for name, shape in shapes.items():
        if params[name].shape != shape:
            raise ShapeError(f"{name}: expected {shape}, got {params[name].shape}")


def on_tape(tape: T.GradTape, params: dict[str, np.ndarray]) -> dict[str, T.Var]:
    return {name: tape.param(name, value) for name, value in params.items()}


def pad_batch(cfg: ModelConfig, seqs: Sequence[Sequence[int]]) -> np.ndarray:
    ids = np.full((len(seqs), cfg.max_seq_len), PAD, dtype=np.int64)
    for i, s in enumerate(seqs):
        if len(s) == 0:
            raise InputError("cannot run the model on an empty sequence")
        if len(s) > cfg.max_seq_len:
            raise InputError(f"sequence of length {len(s)} exceeds max_seq_len={cfg.max_seq_len}")
        if max(s) >= cfg.vocab_size or min(s) < 0:
            raise InputError("token id outside the model vocabulary")
        ids[i, : len(s)] = s
    return ids


def _dropout(x: T.Var, rate: float, rng) -> T.Var:
    keep = rng.random(x.shape) >= rate
    return T.mul(x, keep / (1.0 - rate))


def forward_tape(pv: dict[str, T.Var], cfg: ModelConfig, seqs: Sequence[Sequence[int]],
                 dropout_seed=None) -> T.Var:
    """Final-layer hidden states ``(N, max_seq_len, d)`` for a batch of id sequences.

    Rows past each sequence's length hold padding and are meaningless.
    ``dropout_seed`` of None disables dropout.
    """
    ids = pad_batch(cfg, seqs)
    n, t = ids.shape
    h, dk = cfg.heads, cfg.d_k
    rng = None
    if dropout_seed is not None and cfg.dropout_rate > 0.0:
        rng = np.random.default_rng(dropout_seed)
    mask = nk.causal_mask(t)
    x = T.take_rows(pv["tok_emb"], ids) + pv["pos_emb"]
    for i in range(cfg.layers):
        p = f"layers.{i}."
        a = T.rms_norm(x, pv[p + "attn_norm"])
        q = T.transpose(T.reshape(a @ pv[p + "wq"], (n, t, h, dk)), (0, 2, 1, 3))
        k = T.transpose(T.reshape(a @ pv[p + "wk"], (n, t, h, dk)), (0, 2, 3, 1))
        v = T.transpose(T.reshape(a @ pv[p + "wv"], (n, t, h, dk)), (0, 2, 1, 3))
        weights = T.masked_softmax(T.scale(q @ k, 1.0 / math.sqrt(dk)), mask)
        o = T.reshape(T.transpose(weights @ v, (0, 2, 1, 3)), (n, t, cfg.d))
        o = o @ pv[p + "wo"]
        if rng is not None:
            o = _dropout(o, cfg.dropout_rate, rng)
        x = x + o
        m = T.rms_norm(x, pv[p + "mlp_norm"])
        m = T.gelu(m @ pv[p + "w_up"]) @ pv[p + "w_down"]
        if rng is not None:
            m = _dropout(m, cfg.dropout_rate, rng)
        x = x + m
    return T.rms_norm(x, pv["final_norm"])


def forward(params: dict[str, np.ndarray], cfg: ModelConfig, ids: Sequence[int], dropout_seed=None) -> np.ndarray:
    """Hidden states ``(len(ids), d)`` of one sequence."""
    tape = T.GradTape()
    out = forward_tape(on_tape(tape, params), cfg, [ids], dropout_seed).value
    tape.clear()
    return out[0, : len(ids)].copy()


def forward_many(params: dict[str, np.ndarray], cfg: ModelConfig, seqs: Sequence[Sequence[int]],
                 batch_size: int = 64) -> list[np.ndarray]:
    """Inference over many sequences; returns one ``(len, d)`` array each."""
    out = []
    for start in range(0, len(seqs), batch_size):
        chunk = seqs[start : start + batch_size]
        tape = T.GradTape()
        hid = forward_tape(on_tape(tape, params), cfg, chunk).value
        tape.clear()
        out.extend(hid[i, : len(s)].copy() for i, s in enumerate(chunk))
    return out


def extract(hidden: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    """Rows of ``hidden`` at ``positions``, in order, unmodified."""
    hidden = np.asarray(hidden)
    positions = [int(p) for p in positions]
    for p in positions:
        if not 0 <= p < hidden.shape[0]:
            raise InputError(f"position {p} outside hidden states with {hidden.shape[0]} rows")
    return hidden[positions].copy()


def lm_logits(hidden, w_out) -> np.ndarray:
    return nk.matmul(hidden, w_out)


def lm_loss(logits, targets) -> float:
    """Mean next-token cross-entropy (nats) over positions whose target is not PAD."""
    logits = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(f"logits {logits.shape} do not match targets {targets.shape}")
    keep = targets != PAD
    if not keep.any():
        raise DegenerateError("every target position is padding")
    logp = T.log_softmax_rows(logits[keep])
    return float(-np.mean(logp[np.arange(logp.shape[0]), targets[keep]]))


# ---------------------------------------------------------------- checkpoints

def save_checkpoint(path, params: dict[str, np.ndarray], cfg: ModelConfig, vocab: Vocab | None = None,
                    extra: dict | None = None):
    """Write the binary tensor file plus a ``<path>.json`` manifest."""
    path = Path(path)
    buf = bytearray(CHECKPOINT_MAGIC)
    buf += struct.pack("<II", CHECKPOINT_VERSION, len(params))
    for name, value in params.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(value, dtype="<f4")
        buf += struct.pack("<H", len(raw)) + raw
        buf += struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
        buf += arr.tobytes()
    path.write_bytes(bytes(buf))
    manifest = {"model_config": asdict(cfg)}
    if vocab is not None:
        manifest["vocab"] = list(vocab.itos)
    if extra:
        manifest.update(extra)
    manifest_path(path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def read_tensors(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise InputError(f"{path}: not a checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", data, 4)
    if version != CHECKPOINT_VERSION:
        raise InputError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off : off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<B", data, off)
        off += 1
        dims = struct.unpack_from(f"<{ndim}I", data, off)
        off += 4 * ndim
        size = int(np.prod(dims)) if ndim else 1
        arr = np.frombuffer(data, dtype="<f4", count=size, offset=off).reshape(dims)
        off += 4 * size
        out[name] = arr.astype(np.float64)
    if off != len(data):
        raise InputError(f"{path}: {len(data) - off} trailing bytes")
    return out


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], ModelConfig, Vocab | None, dict]:
    params = read_tensors(path)
    manifest = json.loads(manifest_path(path).read_text(encoding="utf-8"))
    cfg = ModelConfig(**manifest["model_config"])
    check_params(params, cfg)
    vocab = Vocab(tuple(manifest["vocab"])) if "vocab" in manifest else None
    return params, cfg, vocab, manifest
