"""Convolutional block attention: channel gate then spatial gate.

The channel gate pools the feature map globally (average and max),
pushes both vectors through one shared bias-free two-layer MLP and takes
the sigmoid of the sum.  The spatial gate pools the channel axis
(average and max), convolves the two stacked planes with a single odd
kernel (7x7 by default, zero padding, stride 1) and applies a sigmoid.
Both gates multiply into the feature map, so |out| <= |f| elementwise.

Everything is double precision, and the backward pass is exact analytic
differentiation of the forward map (max pools route gradient to the
first argmax).  Forward and backward are pure functions of (input,
params); parameter arrays are frozen read-only at construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from tldet import backends
from tldet.errors import ContractError, FormatError, ValidationError
from tldet.nn.gradcheck import GradReport, grad_check

PARAMS_FORMAT = "tldet-cbam-params"


def as_tensor4(x, name: str = "input") -> np.ndarray:
    """Validate and return a C-contiguous float64 (n, c, h, w) array."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 4:
        raise ValidationError(f"{name} must be rank-4 (n, c, h, w), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class CbamParams:
    """Bias-free weights: shared MLP (c -> c/r -> c) and the spatial kernel
    stored as (2, k, k) for the stacked [channel-mean, channel-max] planes."""

    mlp_w1: np.ndarray
    mlp_w2: np.ndarray
    spatial_kernel: np.ndarray
    reduction: int = 16

    def __post_init__(self):
        c = self.channels
        cr = self.mlp_w1.shape[0]
        if c % self.reduction != 0 or cr != c // self.reduction:
            raise ValidationError(
                f"channels {c} not divisible into {cr} by reduction {self.reduction}"
            )
        if self.mlp_w2.shape != (c, cr):
            raise ValidationError(f"mlp_w2 must be ({c}, {cr}), got {self.mlp_w2.shape}")
        k = self.spatial_kernel.shape
        if len(k) != 3 or k[0] != 2 or k[1] != k[2] or k[1] % 2 == 0:
            raise ValidationError(f"spatial kernel must be (2, k, k) with odd k, got {k}")
        for arr in (self.mlp_w1, self.mlp_w2, self.spatial_kernel):
            arr.setflags(write=False)

    @property
    def channels(self) -> int:
        return self.mlp_w1.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.spatial_kernel.shape[1]

    @staticmethod
    def zeros(channels: int, reduction: int = 16, kernel_size: int = 7) -> "CbamParams":
        cr = channels // reduction
        return CbamParams(
            np.zeros((cr, channels)),
            np.zeros((channels, cr)),
            np.zeros((2, kernel_size, kernel_size)),
            reduction,
        )

    @staticmethod
    def seeded_uniform(
        channels: int, reduction: int = 16, kernel_size: int = 7, seed: int = 41
    ) -> "CbamParams":
        """Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per array."""
        rng = np.random.default_rng(seed)
        cr = channels // reduction

        def u(shape, fan_in):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=shape)

        return CbamParams(
            u((cr, channels), channels),
            u((channels, cr), cr),
            u((2, kernel_size, kernel_size), 2 * kernel_size * kernel_size),
            reduction,
        )

    def save(self, path) -> None:
        """One file: a JSON shape header line, then little-endian f8 data."""
        arrays = [
            ("mlp_w1", self.mlp_w1),
            ("mlp_w2", self.mlp_w2),
            ("spatial_kernel", self.spatial_kernel),
        ]
        header = {
            "format": PARAMS_FORMAT,
            "version": 1,
            "dtype": "<f8",
            "reduction": self.reduction,
            "arrays": [[name, list(a.shape)] for name, a in arrays],
        }
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode("utf-8"))
            fh.write(b"\n")
            for _, a in arrays:
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())

    @staticmethod
    def load(path) -> "CbamParams":
        with open(path, "rb") as fh:
            header_line = fh.readline()
            blob = fh.read()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"bad parameter header: {exc}") from exc
        if header.get("format") != PARAMS_FORMAT:
            raise FormatError(f"not a {PARAMS_FORMAT} file")
        fields = {}
        offset = 0
        for name, shape in header["arrays"]:
            size = int(np.prod(shape)) * 8
            if offset + size > len(blob):
                raise FormatError("parameter blob truncated")
            fields[name] = (
                np.frombuffer(blob[offset : offset + size], dtype="<f8")
                .reshape(shape)
                .astype(np.float64)
            )
            offset += size
        if offset != len(blob):
            raise FormatError("trailing bytes after parameter blob")
        return CbamParams(
            fields["mlp_w1"],
            fields["mlp_w2"],
            fields["spatial_kernel"],
            int(header["reduction"]),
        )


@dataclass
class CbamGrads:
    """Parameter gradients, shaped like CbamParams."""

    mlp_w1: np.ndarray
    mlp_w2: np.ndarray
    spatial_kernel: np.ndarray


@dataclass
class CbamCache:
    """Intermediates a forward pass hands to the matching backward pass."""

    params: CbamParams
    x: np.ndarray
    pool_avg: np.ndarray  # (n, c)
    pool_max: np.ndarray  # (n, c)
    pool_argmax: np.ndarray  # (n, c) flat h*w index
    pre_avg: np.ndarray  # (n, c/r) MLP hidden pre-activation, avg branch
    pre_max: np.ndarray  # (n, c/r) same for the max branch
    channel_gate: np.ndarray  # (n, c)
    gated: np.ndarray  # (n, c, h, w) after the channel gate
    plane_argmax: np.ndarray  # (n, h, w) channel argmax
    planes: np.ndarray  # (n, 2, h, w) stacked mean/max planes
    spatial_gate: np.ndarray  # (n, h, w)


def _check_dims(x: np.ndarray, p: CbamParams) -> None:
    if x.shape[1] != p.channels:
        raise ValidationError(
            f"input has {x.shape[1]} channels, params expect {p.channels}"
        )


def _mlp(v: np.ndarray, p: CbamParams) -> tuple[np.ndarray, np.ndarray]:
    """Shared w2*relu(w1*v) MLP; returns (pre-activation, output)."""
    pre = v @ p.mlp_w1.T
    return pre, np.maximum(pre, 0.0) @ p.mlp_w2.T


def _channel_gate(x: np.ndarray, p: CbamParams):
    avg, mx, amax = backends.ops.global_pool(x)
    pre_avg, out_avg = _mlp(avg, p)
    pre_max, out_max = _mlp(mx, p)
    gate = sigmoid(out_avg + out_max)
    return gate, avg, mx, amax, pre_avg, pre_max


def _spatial_gate(x: np.ndarray, p: CbamParams):
    mean_plane, max_plane, amax = backends.ops.channel_pool(x)
    planes = np.ascontiguousarray(np.stack([mean_plane, max_plane], axis=1))
    gate = sigmoid(backends.ops.conv2d_single_out(planes, p.spatial_kernel))
    return gate, planes, amax


def channel_attention(f, p: CbamParams) -> np.ndarray:
    """Per-channel gate in (0, 1), shaped (n, c, 1, 1)."""
    x = as_tensor4(f)
    _check_dims(x, p)
    gate, *_ = _channel_gate(x, p)
    return gate[:, :, None, None]


def spatial_attention(f, p: CbamParams) -> np.ndarray:
    """Per-position gate in (0, 1), shaped (n, 1, h, w)."""
    x = as_tensor4(f)
    gate, _, _ = _spatial_gate(x, p)
    return gate[:, None, :, :]


def cbam_forward(f, p: CbamParams) -> tuple[np.ndarray, CbamCache]:
    """Apply both attention gates; returns (output, cache for backward)."""
    x = as_tensor4(f)
    _check_dims(x, p)
    ch_gate, avg, mx, amax, pre_avg, pre_max = _channel_gate(x, p)
    gated = x * ch_gate[:, :, None, None]
    sp_gate, planes, plane_amax = _spatial_gate(gated, p)
    out = gated * sp_gate[:, None, :, :]
    cache = CbamCache(
        p, x, avg, mx, amax, pre_avg, pre_max, ch_gate, gated, plane_amax,
        planes, sp_gate,
    )
    return out, cache


def _mlp_backward(d_out: np.ndarray, v: np.ndarray, pre: np.ndarray, p: CbamParams):
    """Backprop through w2*relu(w1*v); returns (d_v, d_w1, d_w2)."""
    hidden = np.maximum(pre, 0.0)
    d_hidden = (d_out @ p.mlp_w2) * (pre > 0.0)
    d_w2 = d_out.T @ hidden
    d_w1 = d_hidden.T @ v
    d_v = d_hidden @ p.mlp_w1
    return d_v, d_w1, d_w2


def cbam_backward(grad_out, cache: CbamCache) -> tuple[np.ndarray, CbamGrads]:
    """Exact gradients w.r.t. the forward input and all parameters.

    grad_out is dL/d(out) for any scalar L; max pools send gradient to
    the first (lowest-index) maximal element recorded in the cache.
    Raises ContractError when the cache does not match grad_out.
    """
    g = as_tensor4(grad_out, "grad_out")
    if not isinstance(cache, CbamCache):
        raise ContractError("backward needs the cache returned by cbam_forward")
    if g.shape != cache.x.shape:
        raise ContractError(
            f"grad_out shape {g.shape} does not match forward input {cache.x.shape}"
        )
    p = cache.params
    n, c, h, w = cache.x.shape
    sp = cache.spatial_gate

    # out = gated * sp_gate
    d_gated = g * sp[:, None, :, :]
    d_sp = np.sum(g * cache.gated, axis=1)
    d_conv = d_sp * sp * (1.0 - sp)
    d_planes, d_kernel = backends.ops.conv2d_single_out_backward(
        cache.planes, p.spatial_kernel, np.ascontiguousarray(d_conv)
    )

    # planes = [mean over c, max over c] of gated
    d_gated += d_planes[:, 0][:, None, :, :] / c
    scatter = np.zeros_like(d_gated)
    np.put_along_axis(
        scatter, cache.plane_argmax[:, None], d_planes[:, 1][:, None], axis=1
    )
    d_gated += scatter

    # gated = x * channel_gate
    ch = cache.channel_gate
    d_ch = np.sum(d_gated * cache.x, axis=(2, 3))
    d_x = d_gated * ch[:, :, None, None]
    d_logit = d_ch * ch * (1.0 - ch)

    d_avg, d_w1_a, d_w2_a = _mlp_backward(d_logit, cache.pool_avg, cache.pre_avg, p)
    d_max, d_w1_m, d_w2_m = _mlp_backward(d_logit, cache.pool_max, cache.pre_max, p)

    # pooled vectors: avg spreads uniformly, max routes to the argmax cell
    d_x += (d_avg / (h * w))[:, :, None, None]
    flat = d_x.reshape(n, c, h * w)
    np.put_along_axis(
        flat, cache.pool_argmax[:, :, None],
        np.take_along_axis(flat, cache.pool_argmax[:, :, None], axis=2)
        + d_max[:, :, None],
        axis=2,
    )

    grads = CbamGrads(d_w1_a + d_w1_m, d_w2_a + d_w2_m, d_kernel)
    return flat.reshape(n, c, h, w), grads


def cbam_grad_report(
    shape: tuple[int, int, int, int],
    reduction: int = 4,
    seed: int = 41,
    step: float = 1e-6,
    kernel_size: int = 7,
) -> GradReport:
    """Finite-difference check of the full backward pass.

    Input and parameters are packed into one flat vector; the scalar under
    test is sum(g * cbam_forward(x)) for a fixed random g.
    """
    n, c, h, w = shape
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, c, h, w))
    params = CbamParams.seeded_uniform(c, reduction, kernel_size, seed=seed + 1)
    g = rng.standard_normal((n, c, h, w))

    sizes = [x.size, params.mlp_w1.size, params.mlp_w2.size, params.spatial_kernel.size]
    splits = np.cumsum(sizes)[:-1]

    def unpack(vec: np.ndarray):
        xs, w1, w2, ker = np.split(vec, splits)
        return (
            xs.reshape(x.shape),
            CbamParams(
                w1.reshape(params.mlp_w1.shape).copy(),
                w2.reshape(params.mlp_w2.shape).copy(),
                ker.reshape(params.spatial_kernel.shape).copy(),
                reduction,
            ),
        )

    def scalar(vec: np.ndarray) -> float:
        xi, pi = unpack(vec)
        out, _ = cbam_forward(xi, pi)
        return float(np.sum(g * out))

    point = np.concatenate(
        [x.ravel(), params.mlp_w1.ravel(), params.mlp_w2.ravel(),
         params.spatial_kernel.ravel()]
    )
    out, cache = cbam_forward(x, params)
    d_x, d_p = cbam_backward(g, cache)
    analytic = np.concatenate(
        [d_x.ravel(), d_p.mlp_w1.ravel(), d_p.mlp_w2.ravel(),
         d_p.spatial_kernel.ravel()]
    )
    return grad_check(scalar, point, analytic, step)
