"""Training orchestration: pretraining, centroid initialization, joint
optimization with self-supervised refinement, convergence, and label extraction.

Stages
------
1. Pretrain the autoencoder on reconstruction + contrastive terms only.
2. Initialize centroids by k-means on the fused pretrain embedding.
3. Jointly optimize everything (centroids included) with Adam, refreshing the
   constant target distribution on a fixed epoch cadence, until the total
   loss is stable or the epoch budget runs out.

Training is full batch and entirely deterministic for a fixed
(dataset, config, seed) triple.
"""

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import losses as lo
from . import metrics as me
from . import model as md
from .autodiff import Tape
from .data import l2_normalize_rows, normalize_layer
from .errors import NumericalError
from .kmeans import kmeans
from .losses import FusionWeights
from .optim import Adam

CONVERGENCE_REL_TOL = 1e-6
CONVERGENCE_WINDOW = 20
EMPTY_CLUSTER_MASS = 1e-6
EMPTY_CLUSTER_PATIENCE = 50

HISTORY_COLUMNS = (
    "epoch", "recon_loss", "contrastive_loss", "cluster_loss", "total_loss",
    "acc", "nmi", "ari", "f1",
)

ABLATIONS = ("full", "no_con", "no_clu")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run. All fields are JSON-serializable."""

    widths: tuple                 # encoder level output widths, e.g. (786, 256)
    beta: tuple                   # per-view fusion weights
    lambda1: float = 0.5          # structure term weight inside reconstruction
    lambda2: float = 10.0         # contrastive term weight
    lambda3: float = 0.5          # clustering term weight
    tau: float = 0.5              # contrastive temperature
    lr: float = 0.003
    max_epochs: int = 1000        # joint-stage epoch budget
    pretrain_epochs: int = 200
    seed: int = 0
    p_update_every: int = 1       # target-distribution refresh cadence (epochs)
    ablation: str = "full"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if self.pretrain_epochs < 1:
            raise ValueError("pretrain_epochs must be at least 1")
        if self.p_update_every < 1:
            raise ValueError("p_update_every must be at least 1")
        if self.ablation not in ABLATIONS:
            raise ValueError(f"ablation must be one of {ABLATIONS}")
        FusionWeights(self.beta)  # validates nonnegativity

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        d = asdict(self)
        d["widths"] = list(self.widths)
        d["beta"] = list(self.beta)
        return d

    @property
    def effective_lambda2(self):
        return 0.0 if self.ablation == "no_con" else self.lambda2

    @property
    def effective_lambda3(self):
        return 0.0 if self.ablation == "no_clu" else self.lambda3


@dataclass
class TrainedModel:
    """Final state of a training run.

    ``soft_assign`` is computed from ``fused`` and ``centroids`` after the last
    optimizer step, so the three are mutually consistent. ``labels`` comes from
    the membership argmax, except under the no_clu ablation where it comes
    from k-means on the final fused embedding.
    """

    encoder_state: md.EncoderState
    centroids: np.ndarray
    fused: np.ndarray
    soft_assign: np.ndarray
    labels: np.ndarray
    history: list
    config: TrainConfig
    z_views: list = field(default_factory=list)


def predict_labels(q):
    """Hard labels from memberships; ties break to the lowest cluster index."""
    q = np.asarray(q)
    return q.argmax(axis=1)


def init_centroids(z, k, seed):
    """k-means centroids (distance-weighted seeding, best of 10 restarts) on an embedding."""
    centers, _, _ = kmeans(z, k, seed, restarts=10)
    return centers


class _Prepared:
    """Graph tensors shared by every epoch: normalized inputs and layer structures."""

    def __init__(self, g):
        self.graph = g
        self.layers = [normalize_layer(layer.adjacency) for layer in g.layers]
        self.x_views = [l2_normalize_rows(layer.attributes) for layer in g.layers]
        self.input_widths = [x.shape[1] for x in self.x_views]


def _epoch_losses(tape, prepared, state, config, centroids=None, target=None):
    """One forward pass; returns the loss terms and intermediate values."""
    zs = md.encode(tape, prepared.x_views, prepared.layers, state)
    x_hats = [
        md.decode(z, layer, state, view)
        for view, (z, layer) in enumerate(zip(zs, prepared.layers))
    ]
    recon = lo.reconstruction_loss(prepared.x_views, x_hats, zs, prepared.layers, config.lambda1)
    if config.effective_lambda2 != 0.0 and len(zs) >= 2:
        contrast = lo.contrastive_loss(zs, config.tau)
    else:
        contrast = tape.leaf(np.zeros((1, 1)))
    out = {"zs": zs, "recon": recon, "contrast": contrast}
    if centroids is not None:
        fused = lo.fuse(zs, FusionWeights(config.beta))
        q = lo.soft_assignment(fused, centroids)
        out["fused"] = fused
        out["q"] = q
        if target is not None and config.effective_lambda3 != 0.0:
            out["cluster"] = lo.clustering_loss(q, target)
        else:
            out["cluster"] = tape.leaf(np.zeros((1, 1)))
    return out


def _require_finite(epoch, phase, terms):
    for name, value in terms.items():
        if not np.isfinite(value):
            raise NumericalError(f"non-finite {name} ({value}) at {phase} epoch {epoch}")


def _loss_is_stable(totals, window=CONVERGENCE_WINDOW, rel_tol=CONVERGENCE_REL_TOL):
    """True when the last ``window`` consecutive relative changes are all below tolerance."""
    if len(totals) < window + 1:
        return False
    tail = totals[-(window + 1):]
    return all(
        abs(tail[i + 1] - tail[i]) < rel_tol * max(abs(tail[i]), 1e-12)
        for i in range(window)
    )


def pretrain(g, config, state=None, prepared=None):
    """Train the autoencoder on reconstruction + contrastive terms only.

    Returns the trained EncoderState; with a fixed seed the result is bitwise
    identical across runs.
    """
    prepared = prepared or _Prepared(g)
    if state is None:
        rng = np.random.default_rng(config.seed)
        state = md.init_encoder_state(prepared.input_widths, config.widths, rng)
    params = state.parameters()
    adam = Adam(params, lr=config.lr)
    for epoch in range(1, config.pretrain_epochs + 1):
        tape = Tape()
        for p in params:
            tape.adopt(p)
        fwd = _epoch_losses(tape, prepared, state, config)
        total = lo.total_loss(fwd["recon"], fwd["contrast"], tape.leaf(np.zeros((1, 1))),
                              config.effective_lambda2, 0.0)
        _require_finite(epoch, "pretrain", {"recon": fwd["recon"].item(),
                                            "contrastive": fwd["contrast"].item(),
                                            "total": total.item()})
        adam.zero_grad()
        tape.backward(total)
        adam.step()
    return state


def _materialize(prepared, state, config, centroids_data):
    """Forward pass with the current parameters; plain arrays out."""
    tape = Tape()
    params = state.parameters()
    for p in params:
        tape.adopt(p)
    zs = md.encode(tape, prepared.x_views, prepared.layers, state)
    fused = lo.fuse(zs, FusionWeights(config.beta))
    q = lo.soft_assignment(fused, tape.leaf(centroids_data))
    return [z.data.copy() for z in zs], fused.data.copy(), q.data.copy()


def train(g, config):
    """Run the full pipeline on a multilayer graph; see the module docstring.

    ``history`` covers the joint stage: one row per epoch with the loss
    components (values before that epoch's parameter update) and, when the
    graph carries labels, the four clustering scores of the epoch's hard
    assignment.
    """
    prepared = _Prepared(g)
    if len(config.beta) != g.n_layers:
        raise ValueError(f"{len(config.beta)} fusion weights for {g.n_layers} layers")
    if g.n_layers < 2 and config.effective_lambda2 != 0.0:
        warnings.warn("single-layer graph: the contrastive term is 0")

    state = pretrain(g, config, prepared=prepared)
    _, fused0, _ = _materialize_pre(prepared, state, config)
    centroids = md.DiffValue(init_centroids(fused0, g.k_classes, config.seed))

    params = state.parameters() + [centroids]
    adam = Adam(params, lr=config.lr)
    history = []
    target = None
    recent = []
    starved_for = np.zeros(g.k_classes, dtype=int)
    starved_warned = np.zeros(g.k_classes, dtype=bool)

    for epoch in range(1, config.max_epochs + 1):
        tape = Tape()
        for p in params:
            tape.adopt(p)
        fwd = _epoch_losses(tape, prepared, state, config, centroids=centroids, target=target)
        if target is None or (epoch - 1) % config.p_update_every == 0:
            target = lo.target_distribution(fwd["q"].data)
            if config.effective_lambda3 != 0.0:
                fwd["cluster"] = lo.clustering_loss(fwd["q"], target)
        total = lo.total_loss(fwd["recon"], fwd["contrast"], fwd["cluster"],
                              config.effective_lambda2, config.effective_lambda3)
        values = {
            "recon": fwd["recon"].item(),
            "contrastive": fwd["contrast"].item(),
            "cluster": fwd["cluster"].item(),
            "total": total.item(),
        }
        _require_finite(epoch, "joint", values)

        row = {"epoch": epoch, "recon_loss": values["recon"],
               "contrastive_loss": values["contrastive"],
               "cluster_loss": values["cluster"], "total_loss": values["total"],
               "acc": None, "nmi": None, "ari": None, "f1": None}
        if g.labels is not None:
            row.update(me.clustering_report(predict_labels(fwd["q"].data), g.labels))
        history.append(row)

        cluster_mass = fwd["q"].data.max(axis=0)
        starved = cluster_mass < EMPTY_CLUSTER_MASS
        starved_for = np.where(starved, starved_for + 1, 0)
        for j in np.nonzero((starved_for >= EMPTY_CLUSTER_PATIENCE) & ~starved_warned)[0]:
            warnings.warn(f"cluster {j} has been empty (max mass < {EMPTY_CLUSTER_MASS}) "
                          f"for {EMPTY_CLUSTER_PATIENCE} consecutive epochs")
            starved_warned[j] = True

        adam.zero_grad()
        tape.backward(total)
        adam.step()

        recent.append(values["total"])
        if _loss_is_stable(recent):
            break

    z_views, fused, q = _materialize(prepared, state, config, centroids.data)
    if config.ablation == "no_clu":
        _, labels, _ = kmeans(fused, g.k_classes, config.seed, restarts=10)
    else:
        labels = predict_labels(q)
    return TrainedModel(
        encoder_state=state,
        centroids=centroids.data.copy(),
        fused=fused,
        soft_assign=q,
        labels=labels,
        history=history,
        config=config,
        z_views=z_views,
    )


def _materialize_pre(prepared, state, config):
    """Fused embedding right after pretraining (before centroids exist)."""
    tape = Tape()
    for p in state.parameters():
        tape.adopt(p)
    zs = md.encode(tape, prepared.x_views, prepared.layers, state)
    fused = lo.fuse(zs, FusionWeights(config.beta))
    return [z.data.copy() for z in zs], fused.data.copy(), None


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_history_csv(path, history):
    """History rows as CSV; float cells use shortest round-trip formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for row in history:
            writer.writerow([_format_cell(row[c]) for c in HISTORY_COLUMNS])


def write_labels_csv(path, labels):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id", "label"])
        for i, label in enumerate(labels):
            writer.writerow([i, int(label)])
