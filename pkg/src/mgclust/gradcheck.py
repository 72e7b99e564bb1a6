"""Finite-difference verification of every objective term's gradients.

Builds a small seeded random instance, differentiates each loss term (and the
full joint objective) through the tape, and compares against central finite
differences over every trainable parameter, centroids included. The target
distribution is frozen from the unperturbed forward pass, matching its
constant role in training.
"""

import numpy as np

from . import autodiff as ad
from . import losses as lo
from . import model as md
from .autodiff import DiffValue, Tape, finite_difference_gradient, max_relative_error, zero_grads
from .losses import FusionWeights
from .synth import random_multilayer
from .training import _Prepared

DEFAULT_TOL = 1e-4
FD_STEP = 1e-5

TERMS = ("structure", "reconstruction", "contrastive", "clustering", "total")


def _build_terms(prepared, state, centroids, target, lambdas, tau, beta):
    """All loss terms on one fresh tape, from the parameters' current data."""
    tape = Tape()
    for p in state.parameters():
        tape.adopt(p)
    tape.adopt(centroids)
    zs = md.encode(tape, prepared.x_views, prepared.layers, state)
    x_hats = [md.decode(z, layer, state, s)
              for s, (z, layer) in enumerate(zip(zs, prepared.layers))]
    structure = None
    for z, layer in zip(zs, prepared.layers):
        term = lo.structure_loss(z, layer)
        structure = term if structure is None else ad.add(structure, term)
    recon = lo.reconstruction_loss(prepared.x_views, x_hats, zs, prepared.layers, lambdas[0])
    contrast = lo.contrastive_loss(zs, tau)
    fused = lo.fuse(zs, FusionWeights(beta))
    q = lo.soft_assignment(fused, centroids)
    cluster = lo.clustering_loss(q, target)
    total = lo.total_loss(recon, contrast, cluster, lambdas[1], lambdas[2])
    return tape, {
        "structure": structure,
        "reconstruction": recon,
        "contrastive": contrast,
        "clustering": cluster,
        "total": total,
    }, q


def run_gradient_checks(seed=0, n_nodes=12, attr_width=7, n_views=2, widths=(5, 3),
                        step=FD_STEP, tol=DEFAULT_TOL, corrupt=False):
    """Check every term on a seeded instance; returns a list of per-term reports.

    Each report has the term name, the worst relative disagreement between tape
    and finite-difference gradients (entries below the absolute floor ignored),
    and whether it met ``tol``. ``corrupt`` perturbs one tape gradient before
    comparison — a negative control used to prove the check can fail.
    """
    g = random_multilayer(seed, n_nodes=n_nodes, attr_width=attr_width, n_views=n_views)
    prepared = _Prepared(g)
    rng = np.random.default_rng(seed + 1)
    state = md.init_encoder_state(prepared.input_widths, widths, rng)
    centroids = DiffValue(rng.standard_normal((g.k_classes, widths[-1])))
    params = state.parameters() + [centroids]
    lambdas = (0.7, 3.0, 0.9)
    tau = 0.5
    beta = tuple([1.0] * n_views)

    # Freeze the constant target from the unperturbed memberships.
    _, _, q0 = _build_terms(prepared, state, centroids, np.ones((n_nodes, g.k_classes)) / g.k_classes,
                            lambdas, tau, beta)
    target = lo.target_distribution(q0.data)

    def evaluate(term):
        _, terms, _ = _build_terms(prepared, state, centroids, target, lambdas, tau, beta)
        return terms[term].item()

    reports = []
    for term in TERMS:
        zero_grads(params)
        tape, terms, _ = _build_terms(prepared, state, centroids, target, lambdas, tau, beta)
        tape.backward(terms[term])
        if corrupt:
            params[0].grad[0, 0] += 1e-3
        worst = 0.0
        for p in params:
            numeric = finite_difference_gradient(lambda: evaluate(term), p, step=step)
            worst = max(worst, max_relative_error(p.grad, numeric))
        reports.append({"term": term, "max_rel_err": worst, "ok": worst < tol})
    return reports
