"""Masked-span infilling transformer over pose token sequences.

Token embeddings (one table per codebook, summed) plus learned position
embeddings feed a bidirectional transformer; positions inside the mask span
are replaced by a learned mask embedding before the first block. One output
head per codebook scores the codes, so the mask embedding itself is never a
predictable output. Training masks a span of random length centered on each
clip's kinematic peak; the loss is cross-entropy summed over masked positions
and books, averaged over the batch.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import nn
from .kinematics import MaskSpan, span_from_halfwidth
from .tokenizer import TokenSequence


class _InfillerNet(nn.Module):
    def __init__(self, cfg, num_books, codes_per_book, rng):
        super().__init__()
        self.num_books = num_books
        self.embeddings = [
            nn.Embedding(codes_per_book, cfg.model_dim, rng) for _ in range(num_books)
        ]
        self.mask_embedding = nn.Parameter(nn.init_normal(rng, (cfg.model_dim,), np.float32))
        self.pos = nn.PositionEmbedding(cfg.max_seq_len, cfg.model_dim, rng)
        self.stack = nn.TransformerStack(cfg, rng)
        self.heads = [nn.Linear(cfg.model_dim, codes_per_book, rng) for _ in range(num_books)]

    def embed(self, tokens: np.ndarray, mask: np.ndarray) -> nn.Tensor:
        """Summed token embeddings with masked positions swapped for the mask
        vector; ``tokens`` is (B, T, books), ``mask`` (B, T) boolean."""
        emb = self.embeddings[0](tokens[..., 0])
        for b in range(1, self.num_books):
            emb = emb + self.embeddings[b](tokens[..., b])
        keep = nn.Tensor((~mask)[..., None].astype(emb.dtype))
        fill = nn.Tensor(mask[..., None].astype(emb.dtype))
        emb = emb * keep + self.mask_embedding * fill
        return emb + self.pos(tokens.shape[1])

    def logits(self, tokens: np.ndarray, mask: np.ndarray) -> list[nn.Tensor]:
        h = self.stack(self.embed(tokens, mask))
        return [head(h) for head in self.heads]


class MotionInfiller(BaseEstimator):
    """Expert-prior span infiller over tokenized motion.

    Defaults match the published configuration (12 layers, width 256, 8
    heads); desk runs shrink them through the run config. ``fit`` takes token
    sequences plus each clip's kinematic peak frame; spans of random width up
    to ``alpha_train * T`` are masked during training.
    """

    def __init__(
        self,
        num_books: int = 2,
        codes_per_book: int = 256,
        num_layers: int = 12,
        num_heads: int = 8,
        model_dim: int = 256,
        ffn_dim: int | None = None,
        dropout: float = 0.1,
        max_seq_len: int = 512,
        alpha_train: float = 0.3,
        learning_rate: float = 1e-4,
        lr_schedule: str = "cosine",
        batch_size: int = 16,
        epochs: int = 40,
        seed: int = 0,
        technique: str | None = None,
    ):
        self.num_books = num_books
        self.codes_per_book = codes_per_book
        self.num_layers = num_layers
        self.num_heads = num_heads
        self.model_dim = model_dim
        self.ffn_dim = ffn_dim
        self.dropout = dropout
        self.max_seq_len = max_seq_len
        self.alpha_train = alpha_train
        self.learning_rate = learning_rate
        self.lr_schedule = lr_schedule
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.technique = technique

    def _config(self) -> nn.TransformerConfig:
        ffn = self.ffn_dim if self.ffn_dim is not None else 4 * self.model_dim
        return nn.TransformerConfig(
            layers=self.num_layers,
            heads=self.num_heads,
            model_dim=self.model_dim,
            hidden_dim=ffn,
            causal=False,
            max_seq_len=self.max_seq_len,
            dropout=self.dropout,
        )

    def _build(self, rng: np.random.Generator) -> _InfillerNet:
        return _InfillerNet(self._config(), self.num_books, self.codes_per_book, rng)

    @staticmethod
    def _stack_tokens(token_seqs: list[TokenSequence]) -> np.ndarray:
        lengths = {ts.num_frames for ts in token_seqs}
        if len(lengths) > 1:
            raise ValueError(f"token sequences mix lengths {sorted(lengths)}")
        return np.stack([ts.tokens for ts in token_seqs])

    def _sample_spans(
        self, t_stars: np.ndarray, t_len: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Boolean (N, T) masks with random widths around each peak."""
        max_len = max(2, int(np.floor(self.alpha_train * t_len)))
        lengths = rng.integers(2, max_len + 1, size=t_stars.shape[0])
        mask = np.zeros((t_stars.shape[0], t_len), dtype=bool)
        for i, (t_star, length) in enumerate(zip(t_stars, lengths)):
            span = span_from_halfwidth(int(t_star), max(1, int(length) // 2), t_len)
            mask[i, span.lo : span.hi + 1] = True
        return mask

    def fit(
        self,
        token_seqs: list[TokenSequence],
        t_stars: list[int],
        verbose: bool = False,
    ) -> "MotionInfiller":
        if len(token_seqs) != len(t_stars):
            raise ValueError(
                f"{len(token_seqs)} token sequences but {len(t_stars)} peak frames"
            )
        tokens = self._stack_tokens(token_seqs)  # (N, T, books)
        n, t_len, books = tokens.shape
        if books != self.num_books:
            raise ValueError(f"sequences have {books} books, expected {self.num_books}")
        if tokens.max() >= self.codes_per_book:
            raise ValueError("token index out of codebook range")
        if t_len > self.max_seq_len:
            raise ValueError(f"sequence length {t_len} exceeds max_seq_len {self.max_seq_len}")
        t_stars = np.asarray(t_stars, dtype=np.int64)
        if t_stars.min() < 0 or t_stars.max() >= t_len:
            raise ValueError("peak frame out of range")

        rng = np.random.default_rng(self.seed)
        net = self._build(rng)
        optimizer = nn.Adam(net.parameters(), lr=self.learning_rate)

        batch = min(self.batch_size, n)
        self.training_log_ = []
        net.train()
        for epoch in range(1, self.epochs + 1):
            optimizer.lr = self.learning_rate * nn.epoch_lr_factor(
                self.lr_schedule, epoch, self.epochs
            )
            order = rng.permutation(n)
            loss_sum = 0.0
            steps = 0
            for start in range(0, n, batch):
                rows = order[start : start + batch]
                mask = self._sample_spans(t_stars[rows], t_len, rng)
                logit_list = net.logits(tokens[rows], mask)
                loss = None
                for b, logits in enumerate(logit_list):
                    term = nn.cross_entropy(logits, tokens[rows][..., b], mask, reduction="sum")
                    loss = term if loss is None else loss + term
                loss = loss * (1.0 / rows.shape[0])
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                loss_sum += loss.item()
                steps += 1
            entry = {"epoch": epoch, "loss": loss_sum / steps}
            self.training_log_.append(entry)
            if verbose:
                print(f"epoch {epoch:4d}  loss {entry['loss']:.4f}")

        net.eval()
        self.net_ = net
        self.num_frames_ = t_len
        return self

    # -- inference -----------------------------------------------------------

    def _span_mask(self, span: MaskSpan, t_len: int) -> np.ndarray:
        if span.hi >= t_len:
            raise ValueError(f"span end {span.hi} exceeds sequence length {t_len}")
        mask = np.zeros(t_len, dtype=bool)
        mask[span.lo : span.hi + 1] = True
        return mask

    def apply_span_mask(self, tokens: np.ndarray, span: MaskSpan) -> np.ndarray:
        """Embedded input (T, model_dim) with the span replaced by the mask
        vector; exposed for inspection and tests."""
        check_is_fitted(self, "net_")
        tokens = np.asarray(tokens)
        mask = self._span_mask(span, tokens.shape[0])
        with nn.no_grad():
            emb = self.net_.embed(tokens[None], mask[None])
        return emb.data[0]

    def infill(
        self,
        tokens: np.ndarray | TokenSequence,
        span: MaskSpan,
        mode: str = "greedy",
        temperature: float = 1.0,
        rng: np.random.Generator | None = None,
    ) -> np.ndarray:
        """One-shot infilling of the span. Tokens outside the span are
        returned unchanged; masked positions take the head argmax (greedy) or
        a temperature sample per position and book."""
        check_is_fitted(self, "net_")
        idx = tokens.tokens if isinstance(tokens, TokenSequence) else np.asarray(tokens)
        if idx.ndim != 2 or idx.shape[1] != self.num_books:
            raise ValueError(f"tokens must be (T, {self.num_books}), got {idx.shape}")
        if mode not in ("greedy", "sample"):
            raise ValueError(f"mode must be 'greedy' or 'sample', got {mode!r}")
        if mode == "sample":
            if temperature <= 0:
                raise ValueError(f"temperature must be positive, got {temperature}")
            if rng is None:
                raise ValueError("sampling mode requires an rng")

        mask = self._span_mask(span, idx.shape[0])
        with nn.no_grad():
            logit_list = self.net_.logits(idx[None], mask[None])
        out = idx.copy()
        positions = np.flatnonzero(mask)
        for b, logits in enumerate(logit_list):
            rows = logits.data[0][positions]  # (S, K)
            if mode == "greedy":
                out[positions, b] = np.argmax(rows, axis=-1)
            else:
                scaled = rows / temperature
                scaled -= scaled.max(axis=-1, keepdims=True)
                probs = np.exp(scaled)
                probs /= probs.sum(axis=-1, keepdims=True)
                cdf = np.cumsum(probs, axis=-1)
                draws = rng.random(positions.shape[0])
                out[positions, b] = np.minimum(
                    (draws[:, None] > cdf).sum(axis=-1), self.codes_per_book - 1
                )
        return out

    def predict(self, token_seqs: list[TokenSequence], spans: list[MaskSpan]) -> list[TokenSequence]:
        """Greedy infilling of each sequence's span."""
        if len(token_seqs) != len(spans):
            raise ValueError("token_seqs and spans differ in length")
        return [
            TokenSequence(self.infill(ts, span), ts.clip_id)
            for ts, span in zip(token_seqs, spans)
        ]

    def mlm_loss(self, tokens: np.ndarray | TokenSequence, span: MaskSpan) -> float:
        """Cross-entropy summed over the span and books for one sequence."""
        check_is_fitted(self, "net_")
        idx = tokens.tokens if isinstance(tokens, TokenSequence) else np.asarray(tokens)
        mask = self._span_mask(span, idx.shape[0])
        with nn.no_grad():
            logit_list = self.net_.logits(idx[None], mask[None])
            total = 0.0
            for b, logits in enumerate(logit_list):
                total += nn.cross_entropy(logits, idx[None, :, b], mask[None], reduction="sum").item()
        return total

    def masked_accuracy(
        self, token_seqs: list[TokenSequence], spans: list[MaskSpan]
    ) -> np.ndarray:
        """Greedy top-1 recovery rate of masked tokens, one value per book."""
        hits = np.zeros(self.num_books)
        totals = 0
        for ts, span in zip(token_seqs, spans):
            recovered = self.infill(ts, span)
            sel = slice(span.lo, span.hi + 1)
            hits += (recovered[sel] == ts.tokens[sel]).sum(axis=0)
            totals += span.width
        if totals == 0:
            raise ValueError("no masked positions to score")
        return hits / totals

    # -- persistence -----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        check_is_fitted(self, "net_")
        tensors = {f"net/{k}": v.astype(np.float32) for k, v in self.net_.state_dict().items()}
        meta = dict(self.get_params())
        meta.update(kind="motion_infiller", num_frames=self.num_frames_)
        tensors["meta/json"] = nn.encode_json(meta)
        nn.save_checkpoint(path, tensors)

    @classmethod
    def load(cls, path: str | Path) -> "MotionInfiller":
        tensors = nn.load_checkpoint(path)
        meta = nn.decode_json(tensors["meta/json"])
        if meta.get("kind") != "motion_infiller":
            raise ValueError(f"{path}: checkpoint is not a motion infiller")
        num_frames = meta.pop("num_frames")
        meta.pop("kind")
        est = cls(**meta)
        net = est._build(np.random.default_rng(est.seed))
        net.load_state_dict(
            {k[len("net/") :]: v for k, v in tensors.items() if k.startswith("net/")}
        )
        net.eval()
        est.net_ = net
        est.num_frames_ = num_frames
        est.training_log_ = []
        return est
