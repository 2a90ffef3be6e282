"""Discrete pose tokenizer: causal transformer VQ autoencoder.

Frames are z-scored per dimension, encoded causally into latents, quantized
against ``num_books`` independent codebooks (product quantization: the latent
splits into equal sub-vectors, one per book), and decoded back to frames. The
straight-through estimator passes decoder gradients to the encoder; codebooks
learn from the quantization loss and dead codes are re-seeded from recent
encoder outputs at epoch boundaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import nn
from .motion import MotionClip
from .validation import check_clips


@dataclass
class TokenSequence:
    """Per-frame code indices (T, num_books) for one clip."""

    tokens: np.ndarray
    clip_id: str = ""

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        if self.tokens.ndim != 2:
            raise ValueError(f"tokens must be (T, num_books), got shape {self.tokens.shape}")
        if self.tokens.min(initial=0) < 0:
            raise ValueError("token indices must be non-negative")

    @property
    def num_frames(self) -> int:
        return self.tokens.shape[0]

    @property
    def num_books(self) -> int:
        return self.tokens.shape[1]

    def to_json(self) -> str:
        return json.dumps({"clip_id": self.clip_id, "tokens": self.tokens.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "TokenSequence":
        doc = json.loads(text)
        return cls(np.array(doc["tokens"], dtype=np.int64), doc.get("clip_id", ""))


def nearest_codes(z: np.ndarray, codebook: np.ndarray) -> np.ndarray:
    """Index of the nearest code per row; ties break to the lowest index."""
    z = np.asarray(z)
    # ||z - e||^2 = ||z||^2 - 2 z.e + ||e||^2; the z term is constant per row.
    dists = -2.0 * (z @ codebook.T) + (codebook * codebook).sum(axis=1)
    return np.argmin(dists, axis=-1)


def vq_loss(
    x: nn.Tensor,
    x_hat: nn.Tensor,
    z: nn.Tensor,
    e: nn.Tensor,
    beta: float,
) -> tuple[nn.Tensor, nn.Tensor, nn.Tensor, nn.Tensor]:
    """Reconstruction + codebook + beta * commitment, each summed over frames
    and features and averaged over the batch. Returns (total, recon, codebook,
    commitment)."""
    batch = x.shape[0] if x.ndim == 3 else 1
    scale = 1.0 / batch
    diff = x_hat - x
    recon = (diff * diff).sum() * scale
    cb_diff = e - z.detach()
    codebook = (cb_diff * cb_diff).sum() * scale
    cm_diff = z - e.detach()
    commitment = (cm_diff * cm_diff).sum() * scale
    total = recon + codebook + commitment * beta
    return total, recon, codebook, commitment


class _TokenizerNet(nn.Module):
    def __init__(self, feature_dim, cfg_enc, cfg_dec, latent_dim, num_books, codes_per_book, rng):
        super().__init__()
        if latent_dim % num_books != 0:
            raise ValueError(f"latent_dim {latent_dim} must divide into {num_books} books")
        self.code_dim = latent_dim // num_books
        self.num_books = num_books
        self.lin_in = nn.Linear(feature_dim, cfg_enc.model_dim, rng)
        self.pos_enc = nn.PositionEmbedding(cfg_enc.max_seq_len, cfg_enc.model_dim, rng)
        self.encoder = nn.TransformerStack(cfg_enc, rng)
        self.lin_latent = nn.Linear(cfg_enc.model_dim, latent_dim, rng)
        self.codebooks = [
            nn.Parameter(nn.init_normal(rng, (codes_per_book, self.code_dim), np.float32))
            for _ in range(num_books)
        ]
        self.lin_dec = nn.Linear(latent_dim, cfg_dec.model_dim, rng)
        self.pos_dec = nn.PositionEmbedding(cfg_dec.max_seq_len, cfg_dec.model_dim, rng)
        self.decoder = nn.TransformerStack(cfg_dec, rng)
        self.lin_out = nn.Linear(cfg_dec.model_dim, feature_dim, rng)

    def encode(self, x: nn.Tensor) -> nn.Tensor:
        t_len = x.shape[1]
        h = self.lin_in(x) + self.pos_enc(t_len)
        return self.lin_latent(self.encoder(h))

    def quantize(self, z_data: np.ndarray) -> np.ndarray:
        """Nearest-code indices (..., num_books) for latents (..., latent_dim)."""
        parts = []
        for b, book in enumerate(self.codebooks):
            sub = z_data[..., b * self.code_dim : (b + 1) * self.code_dim]
            parts.append(nearest_codes(sub.reshape(-1, self.code_dim), book.data))
        idx = np.stack(parts, axis=-1)
        return idx.reshape(z_data.shape[:-1] + (self.num_books,))

    def lookup(self, indices: np.ndarray) -> nn.Tensor:
        """Selected code vectors (..., latent_dim) as a differentiable tensor."""
        parts = [nn.embedding(book, indices[..., b]) for b, book in enumerate(self.codebooks)]
        return nn.concat(parts, axis=-1)

    def decode(self, z_q: nn.Tensor) -> nn.Tensor:
        t_len = z_q.shape[1]
        h = self.lin_dec(z_q) + self.pos_dec(t_len)
        return self.lin_out(self.decoder(h))


class PoseTokenizer(BaseEstimator):
    """Causal VQ autoencoder over pose frames.

    Parameters follow the published configuration by default: 2 codebooks of
    256 codes over a 256-d latent, 6-layer encoder/decoder, width 384. Desk
    runs shrink these through the run config.

    After ``fit`` the estimator exposes ``transform`` (clips to token
    sequences), ``inverse_transform`` (tokens to denormalized feature
    matrices), and ``save``/``load`` for checkpointing.
    """

    def __init__(
        self,
        num_books: int = 2,
        codes_per_book: int = 256,
        latent_dim: int = 256,
        num_layers: int = 6,
        num_heads: int = 4,
        model_dim: int = 384,
        ffn_dim: int | None = None,
        dropout: float = 0.1,
        causal_decoder: bool = True,
        max_seq_len: int = 512,
        commitment_weight: float = 0.25,
        learning_rate: float = 5e-5,
        lr_schedule: str = "cosine",
        batch_size: int = 64,
        epochs: int = 60,
        seed: int = 0,
        technique: str | None = None,
    ):
        self.num_books = num_books
        self.codes_per_book = codes_per_book
        self.latent_dim = latent_dim
        self.num_layers = num_layers
        self.num_heads = num_heads
        self.model_dim = model_dim
        self.ffn_dim = ffn_dim
        self.dropout = dropout
        self.causal_decoder = causal_decoder
        self.max_seq_len = max_seq_len
        self.commitment_weight = commitment_weight
        self.learning_rate = learning_rate
        self.lr_schedule = lr_schedule
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.technique = technique

    # -- construction helpers ------------------------------------------------

    def _configs(self) -> tuple[nn.TransformerConfig, nn.TransformerConfig]:
        ffn = self.ffn_dim if self.ffn_dim is not None else 4 * self.model_dim
        common = dict(
            layers=self.num_layers,
            heads=self.num_heads,
            model_dim=self.model_dim,
            hidden_dim=ffn,
            max_seq_len=self.max_seq_len,
            dropout=self.dropout,
        )
        return (
            nn.TransformerConfig(causal=True, **common),
            nn.TransformerConfig(causal=self.causal_decoder, **common),
        )

    def _build(self, feature_dim: int, rng: np.random.Generator) -> _TokenizerNet:
        cfg_enc, cfg_dec = self._configs()
        return _TokenizerNet(
            feature_dim, cfg_enc, cfg_dec, self.latent_dim, self.num_books, self.codes_per_book, rng
        )

    def _normalize(self, data: np.ndarray) -> np.ndarray:
        return ((data - self.feature_mean_) / self.feature_std_).astype(np.float32)

    def _denormalize(self, data: np.ndarray) -> np.ndarray:
        return data.astype(np.float64) * self.feature_std_ + self.feature_mean_

    # -- training ------------------------------------------------------------

    def fit(self, clips: list[MotionClip], y=None, verbose: bool = False) -> "PoseTokenizer":
        clips = check_clips(clips, same_joints=True, same_length=True)
        t_len = clips[0].num_frames
        if t_len > self.max_seq_len:
            raise ValueError(f"clip length {t_len} exceeds max_seq_len {self.max_seq_len}")
        stacked = np.stack([c.data for c in clips])  # (N, T, F)
        feature_dim = stacked.shape[2]

        mean = stacked.reshape(-1, feature_dim).mean(axis=0)
        std = stacked.reshape(-1, feature_dim).std(axis=0)
        self.feature_mean_ = mean.astype(np.float32).astype(np.float64)
        self.feature_std_ = np.maximum(std, 1e-6).astype(np.float32).astype(np.float64)

        rng = np.random.default_rng(self.seed)
        net = self._build(feature_dim, rng)
        optimizer = nn.Adam(net.parameters(), lr=self.learning_rate)
        data = self._normalize(stacked)

        n = data.shape[0]
        batch = min(self.batch_size, n)
        self.training_log_ = []
        net.train()
        for epoch in range(1, self.epochs + 1):
            optimizer.lr = self.learning_rate * nn.epoch_lr_factor(
                self.lr_schedule, epoch, self.epochs
            )
            order = rng.permutation(n)
            sums = np.zeros(4)
            steps = 0
            usage = [np.zeros(self.codes_per_book, dtype=np.int64) for _ in range(self.num_books)]
            reservoir = None
            for start in range(0, n, batch):
                rows = order[start : start + batch]
                x = nn.Tensor(data[rows])
                z = net.encode(x)
                idx = net.quantize(z.data)
                e = net.lookup(idx)
                z_st = z + (e - z).detach()
                x_hat = net.decode(z_st)
                total, recon, codebook, commitment = vq_loss(
                    x, x_hat, z, e, self.commitment_weight
                )
                optimizer.zero_grad()
                total.backward()
                optimizer.step()

                sums += [total.item(), recon.item(), codebook.item(), commitment.item()]
                steps += 1
                for b in range(self.num_books):
                    usage[b] += np.bincount(idx[..., b].ravel(), minlength=self.codes_per_book)
                reservoir = z.data.reshape(-1, self.latent_dim)

            self._reseed_dead_codes(net, usage, reservoir, rng)
            entry = {
                "epoch": epoch,
                "loss": sums[0] / steps,
                "recon": sums[1] / steps,
                "codebook": sums[2] / steps,
                "commitment": sums[3] / steps,
                "utilization": [float((u > 0).mean()) for u in usage],
            }
            self.training_log_.append(entry)
            if verbose:
                print(
                    f"epoch {epoch:4d}  loss {entry['loss']:.4f}  recon {entry['recon']:.4f}  "
                    f"util {entry['utilization']}"
                )

        net.eval()
        self.net_ = net
        self.n_features_ = feature_dim
        self.num_frames_ = t_len
        return self

    def _reseed_dead_codes(self, net, usage, reservoir, rng):
        if reservoir is None:
            return
        for b in range(self.num_books):
            dead = np.flatnonzero(usage[b] == 0)
            if dead.size == 0:
                continue
            sub = reservoir[:, b * net.code_dim : (b + 1) * net.code_dim]
            picks = rng.integers(0, sub.shape[0], size=dead.size)
            net.codebooks[b].data[dead] = sub[picks]

    # -- inference -----------------------------------------------------------

    def _check_clip_shape(self, clip: MotionClip):
        if clip.feature_dim != self.n_features_:
            raise ValueError(
                f"clip has {clip.feature_dim} features but tokenizer was fit with {self.n_features_}"
            )
        if clip.num_frames > self.max_seq_len:
            raise ValueError(f"clip length {clip.num_frames} exceeds max_seq_len {self.max_seq_len}")

    def encode(self, clip: MotionClip) -> np.ndarray:
        """Continuous causal latents (T, latent_dim) for one clip."""
        check_is_fitted(self, "net_")
        self._check_clip_shape(clip)
        with nn.no_grad():
            z = self.net_.encode(nn.Tensor(self._normalize(clip.data)[None]))
        return z.data[0]

    def quantize(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-code indices (T, num_books) and quantized latents (T, latent_dim)."""
        check_is_fitted(self, "net_")
        z = np.asarray(z, dtype=np.float32)
        idx = self.net_.quantize(z)
        with nn.no_grad():
            z_q = self.net_.lookup(idx)
        return idx, z_q.data

    def decode(self, tokens: np.ndarray | TokenSequence) -> np.ndarray:
        """Decode token indices (T, num_books) to a denormalized (T, F) matrix."""
        check_is_fitted(self, "net_")
        idx = tokens.tokens if isinstance(tokens, TokenSequence) else np.asarray(tokens)
        if idx.ndim != 2 or idx.shape[1] != self.num_books:
            raise ValueError(f"tokens must be (T, {self.num_books}), got {idx.shape}")
        if idx.min() < 0 or idx.max() >= self.codes_per_book:
            raise ValueError("token index out of codebook range")
        with nn.no_grad():
            z_q = self.net_.lookup(idx[None])
            x_hat = self.net_.decode(z_q)
        return self._denormalize(x_hat.data[0])

    def transform(self, clips: list[MotionClip]) -> list[TokenSequence]:
        check_is_fitted(self, "net_")
        out = []
        for i, clip in enumerate(clips):
            z = self.encode(clip)
            idx, _ = self.quantize(z)
            out.append(TokenSequence(idx, clip.metadata.get("name", f"clip{i:04d}")))
        return out

    def inverse_transform(self, token_seqs: list[TokenSequence]) -> list[np.ndarray]:
        return [self.decode(ts) for ts in token_seqs]

    def reconstruct(self, clip: MotionClip) -> MotionClip:
        """Round-trip a clip through encode/quantize/decode."""
        features = self.decode(self.quantize(self.encode(clip))[0])
        return clip.with_data(features)

    # -- persistence -----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        check_is_fitted(self, "net_")
        tensors = {f"net/{k}": v.astype(np.float32) for k, v in self.net_.state_dict().items()}
        tensors["norm/mean"] = self.feature_mean_.astype(np.float32)
        tensors["norm/std"] = self.feature_std_.astype(np.float32)
        meta = dict(self.get_params())
        meta.update(
            kind="pose_tokenizer",
            n_features=self.n_features_,
            num_frames=self.num_frames_,
        )
        tensors["meta/json"] = nn.encode_json(meta)
        nn.save_checkpoint(path, tensors)

    @classmethod
    def load(cls, path: str | Path) -> "PoseTokenizer":
        tensors = nn.load_checkpoint(path)
        meta = nn.decode_json(tensors["meta/json"])
        if meta.get("kind") != "pose_tokenizer":
            raise ValueError(f"{path}: checkpoint is not a pose tokenizer")
        n_features = meta.pop("n_features")
        num_frames = meta.pop("num_frames")
        meta.pop("kind")
        est = cls(**meta)
        rng = np.random.default_rng(est.seed)
        net = est._build(n_features, rng)
        net.load_state_dict(
            {k[len("net/") :]: v for k, v in tensors.items() if k.startswith("net/")}
        )
        net.eval()
        est.net_ = net
        est.feature_mean_ = tensors["norm/mean"].astype(np.float64)
        est.feature_std_ = tensors["norm/std"].astype(np.float64)
        est.n_features_ = n_features
        est.num_frames_ = num_frames
        est.training_log_ = []
        return est
