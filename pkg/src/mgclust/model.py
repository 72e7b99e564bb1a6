"""Attention-based graph convolutional autoencoder with view-shared parameters.

One parameter set serves every graph layer/view: each level transforms node
features with a shared weight matrix, scores each (node, neighbor) pair from
two trainable attention vectors, normalizes the scores over each node's
neighborhood, and aggregates the transformed neighbor features with those
coefficients. The decoder mirrors the encoder with its own (untied)
parameters and reuses the same neighbor structure.

When attribute widths differ across views, untied per-view linear input
projections map every view to a common width before the shared stack, and
per-view output projections map the decoder output back to each view's width.

The final encoder level aggregates the *linear* transform (no activation) so
embeddings are unbounded; every other transform applies the sigmoid.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import DiffValue


@dataclass
class LevelParams:
    """Parameters of one attention level: shared weight plus two score vectors."""

    weight: DiffValue      # d_in x d_out
    attn_self: DiffValue   # d_out x 1, scores the receiving node
    attn_neigh: DiffValue  # d_out x 1, scores the neighbor


@dataclass
class EncoderState:
    """All trainable autoencoder parameters, shared across views.

    ``in_proj``/``out_proj`` are per-view linear maps, present only when the
    views' attribute widths differ; otherwise both are None and the shared
    stack consumes the attributes directly.
    """

    enc_levels: list
    dec_levels: list
    widths: list
    input_widths: list
    in_proj: list = None
    out_proj: list = None

    @property
    def embedding_width(self):
        return self.widths[-1]

    def parameters(self):
        """Flat parameter list in a fixed order (projections, encoder, decoder)."""
        params = []
        if self.in_proj is not None:
            params.extend(self.in_proj)
        if self.out_proj is not None:
            params.extend(self.out_proj)
        for level in self.enc_levels + self.dec_levels:
            params.extend([level.weight, level.attn_self, level.attn_neigh])
        return params

    def named_parameters(self):
        named = []
        if self.in_proj is not None:
            named.extend((f"in_proj.{s}", p) for s, p in enumerate(self.in_proj))
        if self.out_proj is not None:
            named.extend((f"out_proj.{s}", p) for s, p in enumerate(self.out_proj))
        for prefix, levels in (("enc", self.enc_levels), ("dec", self.dec_levels)):
            for l, level in enumerate(levels):
                named.append((f"{prefix}.{l}.weight", level.weight))
                named.append((f"{prefix}.{l}.attn_self", level.attn_self))
                named.append((f"{prefix}.{l}.attn_neigh", level.attn_neigh))
        return named


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def _level(rng, d_in, d_out):
    return LevelParams(
        weight=DiffValue(_glorot(rng, d_in, d_out)),
        attn_self=DiffValue(_glorot(rng, d_out, 1)),
        attn_neigh=DiffValue(_glorot(rng, d_out, 1)),
    )


def init_encoder_state(input_widths, widths, rng):
    """Seed-controlled uniform fan-based initialization of all parameters."""
    input_widths = [int(w) for w in input_widths]
    widths = [int(w) for w in widths]
    if not widths:
        raise ValueError("need at least one level width")
    in_proj = out_proj = None
    if len(set(input_widths)) > 1:
        shared_in = widths[0]
        in_proj = [DiffValue(_glorot(rng, d, shared_in)) for d in input_widths]
        out_proj = [DiffValue(_glorot(rng, shared_in, d)) for d in input_widths]
        chain = [shared_in] + widths
    else:
        chain = [input_widths[0]] + widths
    enc_levels = [_level(rng, chain[l], chain[l + 1]) for l in range(len(widths))]
    dec_levels = [_level(rng, chain[l + 1], chain[l]) for l in reversed(range(len(widths)))]
    return EncoderState(
        enc_levels=enc_levels,
        dec_levels=dec_levels,
        widths=widths,
        input_widths=input_widths,
        in_proj=in_proj,
        out_proj=out_proj,
    )


def attention_scores(h_prev, layer, params):
    """Pre-normalization relevance score for every (node, neighbor) pair.

    Each pair (i, j) gets sigmoid(a_self . s_i + a_neigh . s_j) where
    s = sigmoid(h_prev W).
    """
    transformed = ad.sigmoid(ad.matmul(h_prev, params.weight))
    return _scores_from_transformed(transformed, layer, params)


def _scores_from_transformed(transformed, layer, params):
    u = ad.matmul(transformed, params.attn_self)
    v = ad.matmul(transformed, params.attn_neigh)
    return ad.sigmoid(ad.edge_affinity(u, v, layer))


def attention_layer_forward(h_prev, layer, params, linear_values=False, trace=None, trace_key=None):
    """One attention level: score, normalize over neighborhoods, aggregate.

    With ``linear_values`` the aggregated features skip the activation (used
    at the final encoder level); attention scores always use the activated
    transform.
    """
    lin = ad.matmul(h_prev, params.weight)
    act = ad.sigmoid(lin)
    scores = _scores_from_transformed(act, layer, params)
    coef = ad.neighborhood_softmax(scores, layer)
    if trace is not None:
        trace[trace_key] = coef
    return ad.edge_aggregate(coef, lin if linear_values else act, layer)


def encode(tape, x_views, layers, state, trace=None):
    """Embed every view with the shared encoder stack.

    Returns one (n_nodes x embedding_width) value per view. ``trace``, when
    given, collects attention coefficients under (view, "enc", level) keys.
    """
    if len(x_views) != len(layers):
        raise ValueError("one attribute matrix per layer is required")
    n_levels = len(state.enc_levels)
    outputs = []
    for s, (x, layer) in enumerate(zip(x_views, layers)):
        h = tape.leaf(x)
        if state.in_proj is not None:
            h = ad.matmul(h, state.in_proj[s])
        for l, params in enumerate(state.enc_levels):
            h = attention_layer_forward(
                h, layer, params,
                linear_values=(l == n_levels - 1),
                trace=trace, trace_key=(s, "enc", l),
            )
        outputs.append(h)
    return outputs


def decode(z, layer, state, view, trace=None):
    """Reconstruct one view's attributes from its embedding via the mirrored decoder."""
    h = z
    for l, params in enumerate(state.dec_levels):
        h = attention_layer_forward(h, layer, params, trace=trace, trace_key=(view, "dec", l))
    if state.out_proj is not None:
        h = ad.matmul(h, state.out_proj[view])
    return h


# ---------------------------------------------------------------------------
# Checkpoints: flat float64 binary plus a JSON index
# ---------------------------------------------------------------------------


def save_checkpoint(base_path, state, centroids=None, config=None):
    """Write ``<base>.bin`` (concatenated float64 tensors) and ``<base>.json``.

    The index records name, shape, and byte offset per tensor; reading them
    back is bit-exact. ``config`` (a JSON-serializable dict) is embedded for
    later standalone use of the checkpoint.
    """
    base_path = Path(base_path)
    tensors = list(state.named_parameters())
    if centroids is not None:
        tensors.append(("centroids", centroids))
    index = {
        "dtype": "<f8",
        "widths": state.widths,
        "input_widths": state.input_widths,
        "tensors": [],
        "config": config,
    }
    offset = 0
    with open(base_path.with_suffix(".bin"), "wb") as fh:
        for name, value in tensors:
            arr = np.ascontiguousarray(value.data if isinstance(value, DiffValue) else value)
            index["tensors"].append({"name": name, "shape": list(arr.shape), "offset": offset})
            fh.write(arr.tobytes())
            offset += arr.nbytes
    base_path.with_suffix(".json").write_text(json.dumps(index, indent=2) + "\n")
    return base_path


def load_checkpoint(base_path):
    """Read a checkpoint; returns (EncoderState, centroids or None, config or None)."""
    base_path = Path(base_path)
    if base_path.suffix == ".json":
        base_path = base_path.with_suffix("")
    index = json.loads(base_path.with_suffix(".json").read_text())
    raw = base_path.with_suffix(".bin").read_bytes()
    arrays = {}
    for entry in index["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        start = entry["offset"]
        arrays[entry["name"]] = np.frombuffer(
            raw, dtype=index["dtype"], count=count, offset=start
        ).reshape(shape).copy()

    widths = index["widths"]
    input_widths = index["input_widths"]
    n_views = len(input_widths)
    has_proj = "in_proj.0" in arrays

    def level_from(prefix, l):
        return LevelParams(
            weight=DiffValue(arrays[f"{prefix}.{l}.weight"]),
            attn_self=DiffValue(arrays[f"{prefix}.{l}.attn_self"]),
            attn_neigh=DiffValue(arrays[f"{prefix}.{l}.attn_neigh"]),
        )

    state = EncoderState(
        enc_levels=[level_from("enc", l) for l in range(len(widths))],
        dec_levels=[level_from("dec", l) for l in range(len(widths))],
        widths=widths,
        input_widths=input_widths,
        in_proj=[DiffValue(arrays[f"in_proj.{s}"]) for s in range(n_views)] if has_proj else None,
        out_proj=[DiffValue(arrays[f"out_proj.{s}"]) for s in range(n_views)] if has_proj else None,
    )
    centroids = arrays.get("centroids")
    return state, centroids, index.get("config")
