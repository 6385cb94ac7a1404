"""Dense ReLU multilayer perceptrons with hand-written reverse-mode gradients.

Weights may carry a leading ensemble axis (e.g. twin critics run as one
(2, in, out) parameter set); forward/backward broadcast over it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray


class ShapeError(ValueError):
    pass


@dataclass
class MlpParams:
    """Layer list [(W, b), ...]; hidden layers are ReLU, output layer is linear."""

    weights: list[Array]
    biases: list[Array]

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases):
            raise ShapeError("weights/biases length mismatch")
        for i in range(len(self.weights) - 1):
            if self.weights[i].shape[-1] != self.weights[i + 1].shape[-2]:
                raise ShapeError(
                    f"layer {i} out dim {self.weights[i].shape[-1]} != "
                    f"layer {i + 1} in dim {self.weights[i + 1].shape[-2]}"
                )

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[-2]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[-1]

    def arrays(self) -> list[Array]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def replace_arrays(self, arrays: list[Array]) -> "MlpParams":
        ws, bs = arrays[0::2], arrays[1::2]
        return MlpParams(list(ws), list(bs))

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def all_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())


def mlp_init(
    sizes: list[int],
    rng: np.random.Generator,
    dtype=np.float32,
    ensemble: int | None = None,
    final_scale: float = 3e-3,
) -> MlpParams:
    """He-normal hidden layers, small-uniform final layer (keeps initial heads near zero)."""
    ws, bs = [], []
    lead = () if ensemble is None else (ensemble,)
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if i == len(sizes) - 2:
            w = rng.uniform(-final_scale, final_scale, size=lead + (n_in, n_out))
            b = rng.uniform(-final_scale, final_scale, size=lead + (n_out,))
        else:
            w = rng.normal(0.0, np.sqrt(2.0 / n_in), size=lead + (n_in, n_out))
            b = np.zeros(lead + (n_out,))
        ws.append(w.astype(dtype))
        bs.append(b.astype(dtype))
    return MlpParams(ws, bs)


def _bias_view(b: Array) -> Array:
    # (E, out) biases broadcast against (E, B, out) activations
    return b[..., None, :] if b.ndim == 2 else b


def _check_input(params: MlpParams, x: Array) -> None:
    if x.shape[-1] != params.in_dim:
        raise ShapeError(f"input dim {x.shape[-1]} != net in dim {params.in_dim}")


def mlp_forward(params: MlpParams, x: Array) -> Array:
    _check_input(params, x)
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + _bias_view(b)
        if i < last:
            np.maximum(h, 0.0, out=h)
    return h


def mlp_forward_cached(params: MlpParams, x: Array) -> tuple[Array, list[Array]]:
    """Forward pass keeping each layer's input (post-ReLU) for the backward pass."""
    _check_input(params, x)
    cache = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + _bias_view(b)
        if i < last:
            np.maximum(h, 0.0, out=h)
            cache.append(h)
    return h, cache


def mlp_backward(
    params: MlpParams, cache: list[Array], upstream: Array,
    need_param_grads: bool = True,
) -> tuple[MlpParams | None, Array]:
    """Gradients of sum(output * upstream) w.r.t. parameters and input.

    Pass need_param_grads=False when only the input gradient matters (e.g.
    differentiating through a frozen network); it skips the weight-grad matmuls.
    """
    n = len(params.weights)
    gws: list[Array] = [None] * n  # type: ignore[list-item]
    gbs: list[Array] = [None] * n  # type: ignore[list-item]
    g = upstream
    for i in range(n - 1, -1, -1):
        a = cache[i]
        w, b = params.weights[i], params.biases[i]
        if need_param_grads:
            if a.ndim == 1:
                gws[i] = np.outer(a, g).astype(a.dtype)
                gbs[i] = g.copy()
            else:
                gw = np.swapaxes(a, -1, -2) @ g
                while gw.ndim > w.ndim:  # fold extra batch axes (e.g. window dims)
                    gw = gw.sum(axis=0)
                gb = g.sum(axis=-2)
                while gb.ndim > b.ndim:
                    gb = gb.sum(axis=0)
                gws[i] = gw
                gbs[i] = gb
        g = g @ np.swapaxes(params.weights[i], -1, -2)
        if i > 0:
            g = g * (a > 0)
    return (MlpParams(gws, gbs) if need_param_grads else None), g


def mlp_gradients(
    params: MlpParams, x: Array, upstream: Array
) -> tuple[MlpParams, Array]:
    """Exact reverse-mode gradients of output . upstream; recomputes the forward pass."""
    if upstream.shape[-1] != params.out_dim:
        raise ShapeError(f"upstream dim {upstream.shape[-1]} != net out dim {params.out_dim}")
    _, cache = mlp_forward_cached(params, x)
    return mlp_backward(params, cache, upstream)


def zeros_like_params(params: MlpParams) -> MlpParams:
    return MlpParams(
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
    )


def add_params(dst: MlpParams, src: MlpParams, scale: float = 1.0) -> None:
    """In-place dst += scale * src, layer by layer."""
    for d, s in zip(dst.arrays(), src.arrays()):
        d += scale * s
