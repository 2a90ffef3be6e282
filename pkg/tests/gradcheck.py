"""Finite-difference gradient oracle shared by the unit and acceptance tests.

Each case builds a scalar loss from 64-bit tensors; the analytic gradients
from ``backward`` are compared against central finite differences evaluated
by re-running the forward closure with perturbed inputs.
"""

import numpy as np

from motiontune import nn
from motiontune.nn import Tensor


def fd_gradient(loss_fn, arr: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``loss_fn()`` w.r.t. the array in place."""
    grad = np.zeros_like(arr, dtype=np.float64)
    it = np.nditer(arr, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = arr[idx]
        arr[idx] = orig + eps
        f_plus = loss_fn()
        arr[idx] = orig - eps
        f_minus = loss_fn()
        arr[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * eps)
        it.iternext()
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return float(diff / scale)


def run_case(make_case, seed: int = 0) -> float:
    """Build one case, backprop, and return the worst relative error."""
    rng = np.random.default_rng(seed)
    tensors, loss_fn = make_case(rng)
    loss = loss_fn()
    loss.backward()
    worst = 0.0
    for t in tensors:
        assert t.grad is not None, "no gradient reached an input"
        analytic = t.grad.astype(np.float64).copy()
        numeric = fd_gradient(lambda: loss_fn().item(), t.data)
        worst = max(worst, relative_error(analytic, numeric))
    return worst


def _t(rng, *shape, lo=-1.0, hi=1.0, away_from=None, margin=0.1):
    data = rng.uniform(lo, hi, size=shape)
    if away_from is not None:
        data = np.where(np.abs(data - away_from) < margin, data + 2 * margin, data)
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)


def _weighted_sum(rng, out: Tensor) -> Tensor:
    w = Tensor(rng.normal(size=out.shape))
    return (out * w).sum()


# -- elementwise and structural ops -------------------------------------------


def case_add_broadcast(rng):
    a, b = _t(rng, 3, 4), _t(rng, 4)
    return [a, b], lambda: _weighted_sum(rng_fixed(rng), a + b)


def case_sub_broadcast(rng):
    a, b = _t(rng, 2, 1, 4), _t(rng, 3, 4)
    return [a, b], lambda: _weighted_sum(rng_fixed(rng), a - b)


def case_mul_broadcast(rng):
    a, b = _t(rng, 3, 4), _t(rng, 3, 1)
    return [a, b], lambda: _weighted_sum(rng_fixed(rng), a * b)


def case_div(rng):
    a = _t(rng, 3, 4)
    b = _t(rng, 4, lo=0.5, hi=1.5)
    return [a, b], lambda: _weighted_sum(rng_fixed(rng), a / b)


def case_rdiv(rng):
    a = _t(rng, 2, 3, lo=0.5, hi=1.5)
    return [a], lambda: _weighted_sum(rng_fixed(rng), 2.0 / a)


def case_pow(rng):
    a = _t(rng, 3, 3, lo=0.3, hi=1.2)
    return [a], lambda: _weighted_sum(rng_fixed(rng), a**3.0)


def case_exp(rng):
    a = _t(rng, 2, 5)
    return [a], lambda: _weighted_sum(rng_fixed(rng), a.exp())


def case_log(rng):
    a = _t(rng, 4, 2, lo=0.3, hi=2.0)
    return [a], lambda: _weighted_sum(rng_fixed(rng), a.log())


def case_sqrt(rng):
    a = _t(rng, 3, 2, lo=0.3, hi=2.0)
    return [a], lambda: _weighted_sum(rng_fixed(rng), a.sqrt())


def case_tanh(rng):
    a = _t(rng, 2, 6)
    return [a], lambda: _weighted_sum(rng_fixed(rng), a.tanh())


def case_relu(rng):
    a = _t(rng, 4, 4, away_from=0.0, margin=0.05)
    return [a], lambda: _weighted_sum(rng_fixed(rng), a.relu())


def case_gelu(rng):
    a = _t(rng, 3, 5)
    return [a], lambda: _weighted_sum(rng_fixed(rng), nn.gelu(a))


def case_matmul(rng):
    a, b = _t(rng, 3, 4), _t(rng, 4, 2)
    return [a, b], lambda: _weighted_sum(rng_fixed(rng), a @ b)


def case_matmul_batched(rng):
    a, b = _t(rng, 2, 3, 4), _t(rng, 2, 4, 5)
    return [a, b], lambda: _weighted_sum(rng_fixed(rng), a @ b)


def case_sum_axis(rng):
    a = _t(rng, 3, 4, 2)
    return [a], lambda: _weighted_sum(rng_fixed(rng), a.sum(axis=1))


def case_sum_keepdims(rng):
    a = _t(rng, 2, 5)
    return [a], lambda: _weighted_sum(rng_fixed(rng), a.sum(axis=-1, keepdims=True))


def case_mean(rng):
    a = _t(rng, 4, 3)
    return [a], lambda: _weighted_sum(rng_fixed(rng), a.mean(axis=-1))


def case_reshape_transpose(rng):
    a = _t(rng, 2, 3, 4)
    return [a], lambda: _weighted_sum(
        rng_fixed(rng), a.reshape(2, 12).transpose(1, 0)
    )


def case_swapaxes(rng):
    a = _t(rng, 2, 3, 4)
    return [a], lambda: _weighted_sum(rng_fixed(rng), a.swapaxes(-1, -2))


def case_getitem_fancy(rng):
    a = _t(rng, 5, 3)
    idx = np.array([0, 2, 1, 0])  # duplicate rows exercise scatter-add
    return [a], lambda: _weighted_sum(rng_fixed(rng), a[idx])


def case_getitem_slice(rng):
    a = _t(rng, 6, 4)
    return [a], lambda: _weighted_sum(rng_fixed(rng), a[1:5:2])


def case_concat(rng):
    parts = [_t(rng, 2, k) for k in (2, 3, 1)]
    return parts, lambda: _weighted_sum(rng_fixed(rng), nn.concat(parts, axis=1))


def case_embedding(rng):
    table = _t(rng, 6, 3)
    idx = np.array([[0, 5, 2], [2, 2, 1]])
    return [table], lambda: _weighted_sum(rng_fixed(rng), nn.embedding(table, idx))


def case_softmax(rng):
    a = _t(rng, 3, 5)
    return [a], lambda: _weighted_sum(rng_fixed(rng), nn.softmax(a))


def case_log_softmax(rng):
    a = _t(rng, 4, 3)
    return [a], lambda: _weighted_sum(rng_fixed(rng), nn.log_softmax(a))


def case_cross_entropy_masked(rng):
    logits = _t(rng, 2, 5, 4)
    targets = rng.integers(0, 4, size=(2, 5))
    mask = np.zeros((2, 5), dtype=bool)
    mask[0, 1:4] = True
    mask[1, 0] = True
    return [logits], lambda: nn.cross_entropy(logits, targets, mask)


def case_cross_entropy_sum(rng):
    logits = _t(rng, 3, 4)
    targets = rng.integers(0, 4, size=3)
    return [logits], lambda: nn.cross_entropy(logits, targets, reduction="sum")


# -- modules -------------------------------------------------------------------


def case_linear(rng):
    lin = nn.Linear(4, 3, rng, dtype=np.float64)
    x = _t(rng, 2, 4)
    params = [x, lin.weight, lin.bias]
    return params, lambda: _weighted_sum(rng_fixed(rng), lin(x))


def case_layer_norm(rng):
    ln = nn.LayerNorm(5, dtype=np.float64)
    x = _t(rng, 3, 5)
    return [x, ln.gamma, ln.beta], lambda: _weighted_sum(rng_fixed(rng), ln(x))


def case_attention_causal(rng):
    attn = nn.MultiHeadSelfAttention(6, 2, rng, dtype=np.float64)
    x = _t(rng, 1, 3, 6)
    params = [x] + attn.parameters()
    mask = nn.causal_mask(3)
    return params, lambda: _weighted_sum(rng_fixed(rng), attn(x, mask))


def case_attention_bidirectional(rng):
    attn = nn.MultiHeadSelfAttention(4, 2, rng, dtype=np.float64)
    x = _t(rng, 2, 3, 4)
    params = [x] + attn.parameters()
    return params, lambda: _weighted_sum(rng_fixed(rng), attn(x))


def case_transformer_block(rng):
    cfg = nn.TransformerConfig(
        layers=1, heads=2, model_dim=4, hidden_dim=8, causal=True, max_seq_len=8, dropout=0.0
    )
    block = nn.TransformerBlock(cfg, rng, dtype=np.float64)
    x = _t(rng, 1, 3, 4)
    params = [x] + block.parameters()
    mask = nn.causal_mask(3)
    return params, lambda: _weighted_sum(rng_fixed(rng), block(x, mask))


def case_transformer_stack(rng):
    cfg = nn.TransformerConfig(
        layers=2, heads=2, model_dim=4, hidden_dim=6, causal=True, max_seq_len=8, dropout=0.0
    )
    stack = nn.TransformerStack(cfg, rng, dtype=np.float64)
    x = _t(rng, 1, 3, 4)
    params = [x] + stack.parameters()
    return params, lambda: _weighted_sum(rng_fixed(rng), stack(x))


def case_position_embedding(rng):
    pe = nn.PositionEmbedding(8, 3, rng, dtype=np.float64)
    return [pe.table], lambda: _weighted_sum(rng_fixed(rng), pe(5))


def rng_fixed(rng):
    """Weights for the scalar loss must not change between FD evaluations."""
    return np.random.default_rng(12345)


GRAD_CASES = [
    ("add_broadcast", case_add_broadcast),
    ("sub_broadcast", case_sub_broadcast),
    ("mul_broadcast", case_mul_broadcast),
    ("div", case_div),
    ("rdiv", case_rdiv),
    ("pow", case_pow),
    ("exp", case_exp),
    ("log", case_log),
    ("sqrt", case_sqrt),
    ("tanh", case_tanh),
    ("relu", case_relu),
    ("gelu", case_gelu),
    ("matmul", case_matmul),
    ("matmul_batched", case_matmul_batched),
    ("sum_axis", case_sum_axis),
    ("sum_keepdims", case_sum_keepdims),
    ("mean", case_mean),
    ("reshape_transpose", case_reshape_transpose),
    ("swapaxes", case_swapaxes),
    ("getitem_fancy", case_getitem_fancy),
    ("getitem_slice", case_getitem_slice),
    ("concat", case_concat),
    ("embedding", case_embedding),
    ("softmax", case_softmax),
    ("log_softmax", case_log_softmax),
    ("cross_entropy_masked", case_cross_entropy_masked),
    ("cross_entropy_sum", case_cross_entropy_sum),
    ("linear", case_linear),
    ("layer_norm", case_layer_norm),
    ("attention_causal", case_attention_causal),
    ("attention_bidirectional", case_attention_bidirectional),
    ("transformer_block", case_transformer_block),
    ("transformer_stack", case_transformer_stack),
    ("position_embedding", case_position_embedding),
]
