"""Reference kernels for the two fusion mechanisms, in double precision.

Gated fusion: h_fused = sigmoid(W_g h_text) * h_img + h_text, with an
analytic backward pass checkable against finite differences. Projection
fusion: vision rows mapped to text width and appended to the sequence, the
attention mask extended with ones. This is an oracle, not a fast path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, TapeMismatch


@dataclass
class FusionParams:
    d_text: int
    d_img: int
    w_gate: np.ndarray  # d_text x d_text
    w_proj: np.ndarray  # d_text x d_img

    def __post_init__(self):
        if self.d_text < 1 or self.d_img < 1:
            raise ValueError("dimensions must be positive")
        self.w_gate = np.asarray(self.w_gate, dtype=np.float64)
        self.w_proj = np.asarray(self.w_proj, dtype=np.float64)
        if self.w_gate.shape != (self.d_text, self.d_text):
            raise ShapeMismatch(f"gate weights must be {self.d_text}x{self.d_text}")
        if self.w_proj.shape != (self.d_text, self.d_img):
            raise ShapeMismatch(f"projection must be {self.d_text}x{self.d_img}")
        if not (np.isfinite(self.w_gate).all() and np.isfinite(self.w_proj).all()):
            raise ValueError("weights must be finite")


def init_params(d_text: int, d_img: int, seed: int) -> FusionParams:
    """Seeded uniform(-0.1, 0.1) weights; gate drawn before projection."""
    rng = np.random.default_rng(seed)
    w_gate = rng.uniform(-0.1, 0.1, size=(d_text, d_text))
    w_proj = rng.uniform(-0.1, 0.1, size=(d_text, d_img))
    return FusionParams(d_text=d_text, d_img=d_img, w_gate=w_gate, w_proj=w_proj)


@dataclass
class FusionTape:
    h_text: np.ndarray  # 2-D internal form, rows are batch items
    h_img: np.ndarray
    gate: np.ndarray
    output: np.ndarray
    w_gate: np.ndarray
    squeeze: bool  # True when the caller passed 1-D vectors


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_rows(x, d: int, name: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
        squeezed = True
    elif arr.ndim == 2:
        squeezed = False
    else:
        raise ShapeMismatch(f"{name} must be a vector or row-matrix")
    if arr.shape[1] != d:
        raise ShapeMismatch(f"{name} width {arr.shape[1]} != d_text {d}")
    return arr, squeezed


def gated_fuse_forward(h_text, h_img, params: FusionParams):
    """Returns (h_fused, tape); h_img must already be in d_text space."""
    text, squeeze_t = _as_rows(h_text, params.d_text, "h_text")
    img, squeeze_i = _as_rows(h_img, params.d_text, "h_img")
    if text.shape != img.shape:
        raise ShapeMismatch(f"h_text {text.shape} vs h_img {img.shape}")
    gate = sigmoid(text @ params.w_gate.T)
    fused = gate * img + text
    squeeze = squeeze_t and squeeze_i
    tape = FusionTape(
        h_text=text, h_img=img, gate=gate, output=fused,
        w_gate=params.w_gate.copy(), squeeze=squeeze,
    )
    return (fused[0] if squeeze else fused), tape


def replay_forward(tape: FusionTape) -> np.ndarray:
    """Recompute the forward pass from tape inputs; bitwise-equal to tape.output."""
    gate = sigmoid(tape.h_text @ tape.w_gate.T)
    return gate * tape.h_img + tape.h_text


def gated_fuse_backward(tape: FusionTape, upstream):
    """Gradients w.r.t. (h_text, h_img, w_gate) for a given upstream gradient."""
    up, _ = _as_rows(upstream, tape.output.shape[1], "upstream")
    if up.shape != tape.output.shape:
        raise TapeMismatch(f"upstream {up.shape} vs output {tape.output.shape}")
    # s = dL/d(pre-activation of the gate)
    s = up * tape.h_img * tape.gate * (1.0 - tape.gate)
    d_img = tape.gate * up
    d_text = up + s @ tape.w_gate
    d_w_gate = s.T @ tape.h_text
    if tape.squeeze:
        return d_text[0], d_img[0], d_w_gate
    return d_text, d_img, d_w_gate


def project_and_concat(h_text_seq, v_feats, text_mask, params: FusionParams):
    """Append projected vision rows to the text sequence; extend mask with ones."""
    seq = np.asarray(h_text_seq, dtype=np.float64)
    feats = np.asarray(v_feats, dtype=np.float64)
    mask = np.asarray(text_mask)
    if seq.ndim != 2 or seq.shape[1] != params.d_text:
        raise ShapeMismatch(f"text sequence must be T x {params.d_text}")
    if feats.ndim != 2 or feats.shape[1] != params.d_img:
        raise ShapeMismatch(f"vision features must be V x {params.d_img}")
    if mask.ndim != 1 or mask.shape[0] != seq.shape[0]:
        raise ShapeMismatch("mask length must equal text row count")
    projected = feats @ params.w_proj.T
    fused = np.concatenate([seq, projected], axis=0)
    out_mask = np.concatenate([mask, np.ones(feats.shape[0], dtype=mask.dtype)])
    return fused, out_mask


def gradient_check(
    d: int, seed: int, step: float = 1e-4, tol: float = 1e-5
) -> tuple[bool, float]:
    """One seeded random instance: analytic vs central finite differences.

    Returns (ok, worst relative error) over every entry of all three
    gradients. Used by the self-check command; tests carry their own oracle.
    """
    rng = np.random.default_rng(seed)
    params = init_params(d, d, seed)
    h_text = rng.uniform(-1.0, 1.0, size=d)
    h_img = rng.uniform(-1.0, 1.0, size=d)
    upstream = rng.uniform(-1.0, 1.0, size=d)

    _, tape = gated_fuse_forward(h_text, h_img, params)
    d_text, d_img, d_w = gated_fuse_backward(tape, upstream)

    def loss(text, img, w_gate):
        p = FusionParams(d_text=d, d_img=d, w_gate=w_gate, w_proj=params.w_proj)
        out, _ = gated_fuse_forward(text, img, p)
        return float(np.sum(upstream * out))

    worst = 0.0

    def compare(analytic, base_args, index, which):
        nonlocal worst
        args_hi = [a.copy() for a in base_args]
        args_lo = [a.copy() for a in base_args]
        args_hi[which][index] += step
        args_lo[which][index] -= step
        numeric = (loss(*args_hi) - loss(*args_lo)) / (2.0 * step)
        scale = max(abs(analytic), abs(numeric), 1e-8)
        worst = max(worst, abs(analytic - numeric) / scale)

    base = [h_text, h_img, params.w_gate]
    for i in range(d):
        compare(d_text[i], base, i, 0)
        compare(d_img[i], base, i, 1)
    for i in range(d):
        for j in range(d):
            compare(d_w[i, j], base, (i, j), 2)
    return worst <= tol, worst
