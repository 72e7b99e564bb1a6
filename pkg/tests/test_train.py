import numpy as np
import pytest

from mgclust.autodiff import Tape
from mgclust.errors import NumericalError
from mgclust.losses import FusionWeights, total_loss
from mgclust.model import init_encoder_state
from mgclust.synth import random_multilayer, two_clique_graph
from mgclust.training import (
    TrainConfig,
    _epoch_losses,
    _Prepared,
    init_centroids,
    predict_labels,
    pretrain,
    train,
    write_history_csv,
    write_labels_csv,
)
from tests.conftest import make_graph

TOY = dict(widths=(12, 6), beta=(1.0, 1.0), lambda1=0.5, lambda2=10.0, lambda3=0.5,
           pretrain_epochs=20, max_epochs=40)


def toy_config(**overrides):
    return TrainConfig(**{**TOY, **overrides})


def pretrain_objective(g, config, state):
    """Current value of the pretraining objective for a given state."""
    prepared = _Prepared(g)
    tape = Tape()
    for p in state.parameters():
        tape.adopt(p)
    fwd = _epoch_losses(tape, prepared, state, config)
    return total_loss(fwd["recon"], fwd["contrast"], tape.leaf(np.zeros((1, 1))),
                      config.effective_lambda2, 0.0).item()


class TestConfig:
    def test_defaults_and_serialization(self):
        cfg = TrainConfig(widths=(8, 4), beta=(1.0,))
        assert cfg.lr == 0.003 and cfg.max_epochs == 1000 and cfg.tau == 0.5
        again = TrainConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_rejects_unknown_fields(self):
        with pytest.raises(ValueError, match="unknown"):
            TrainConfig.from_dict({"widths": [4], "beta": [1.0], "bogus": 1})

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(widths=(4,), beta=(1.0,), lr=0.0)
        with pytest.raises(ValueError):
            TrainConfig(widths=(4,), beta=(1.0,), ablation="nope")
        with pytest.raises(ValueError):
            TrainConfig(widths=(4,), beta=(-1.0,))

    def test_ablation_zeroes_weights(self):
        cfg = toy_config(ablation="no_con")
        assert cfg.effective_lambda2 == 0.0 and cfg.effective_lambda3 == cfg.lambda3
        cfg = toy_config(ablation="no_clu")
        assert cfg.effective_lambda3 == 0.0 and cfg.effective_lambda2 == cfg.lambda2


class TestPretrain:
    def test_objective_decreases(self):
        g = random_multilayer(seed=0, n_nodes=10, attr_width=5)
        cfg = toy_config(pretrain_epochs=60, seed=0)
        rng = np.random.default_rng(cfg.seed)
        prepared = _Prepared(g)
        initial_state = init_encoder_state(prepared.input_widths, cfg.widths, rng)
        before = pretrain_objective(g, cfg, initial_state)
        trained = pretrain(g, cfg)
        after = pretrain_objective(g, cfg, trained)
        assert after < before

    def test_single_epoch_takes_one_step(self):
        g = random_multilayer(seed=1, n_nodes=8, attr_width=4)
        cfg = toy_config(pretrain_epochs=1, seed=3)
        rng = np.random.default_rng(cfg.seed)
        init = init_encoder_state(_Prepared(g).input_widths, cfg.widths, rng)
        trained = pretrain(g, cfg)
        diffs = [not np.array_equal(a.data, b.data)
                 for (_, a), (_, b) in zip(init.named_parameters(), trained.named_parameters())]
        assert all(diffs)

    def test_seeded_determinism_bitwise(self):
        g = random_multilayer(seed=2, n_nodes=8, attr_width=4)
        cfg = toy_config(seed=11)
        a = pretrain(g, cfg)
        b = pretrain(g, cfg)
        for (_, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
            np.testing.assert_array_equal(pa.data, pb.data)


class TestInitCentroids:
    def test_separated_clouds(self):
        rng = np.random.default_rng(4)
        z = np.concatenate([rng.standard_normal((20, 3)), 50.0 + rng.standard_normal((20, 3))])
        mu = init_centroids(z, 2, seed=0)
        assert mu.shape == (2, 3)
        spans = sorted(float(m[0]) for m in mu)
        assert spans[0] < 10 and spans[1] > 40

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        z = rng.standard_normal((30, 4))
        np.testing.assert_array_equal(init_centroids(z, 3, seed=9), init_centroids(z, 3, seed=9))


class TestTrain:
    def test_two_cliques_reach_perfect_accuracy(self):
        g = two_clique_graph()
        model = train(g, toy_config(seed=0, pretrain_epochs=40, max_epochs=120))
        assert model.history[-1]["acc"] == 1.0
        np.testing.assert_array_equal(np.sort(np.unique(model.labels)), [0, 1])

    def test_history_totals_decompose(self):
        g = two_clique_graph()
        cfg = toy_config(seed=1, pretrain_epochs=10, max_epochs=25)
        model = train(g, cfg)
        assert len(model.history) == 25
        for row in model.history:
            expected = (row["recon_loss"] + cfg.lambda2 * row["contrastive_loss"]
                        + cfg.lambda3 * row["cluster_loss"])
            assert row["total_loss"] == pytest.approx(expected, abs=1e-9)

    def test_final_state_is_consistent(self):
        from mgclust.losses import soft_assignment
        g = two_clique_graph()
        model = train(g, toy_config(seed=2, pretrain_epochs=10, max_epochs=15))
        t = Tape()
        q = soft_assignment(t.leaf(model.fused), t.leaf(model.centroids))
        np.testing.assert_allclose(q.data, model.soft_assign, atol=1e-12)
        np.testing.assert_array_equal(predict_labels(model.soft_assign), model.labels)

    def test_centroids_move_only_with_cluster_term(self):
        g = two_clique_graph(block_size=6)
        cfg = toy_config(seed=3, pretrain_epochs=5, max_epochs=10)
        prepared_seed_state = pretrain(g, cfg)
        from mgclust.losses import fuse
        from mgclust import model as md
        tape = Tape()
        for p in prepared_seed_state.parameters():
            tape.adopt(p)
        prepared = _Prepared(g)
        zs = md.encode(tape, prepared.x_views, prepared.layers, prepared_seed_state)
        fused = fuse(zs, FusionWeights(cfg.beta)).data
        before = init_centroids(fused, g.k_classes, cfg.seed)

        full = train(g, cfg)
        assert not np.array_equal(full.centroids, before)

        frozen = train(g, toy_config(seed=3, pretrain_epochs=5, max_epochs=10, ablation="no_clu"))
        np.testing.assert_array_equal(frozen.centroids, before)

    def test_all_ablations_solve_separable_toy(self):
        g = two_clique_graph()
        for ablation in ("full", "no_con", "no_clu"):
            model = train(g, toy_config(seed=4, pretrain_epochs=30, max_epochs=80,
                                        ablation=ablation))
            from mgclust.metrics import accuracy
            assert accuracy(model.labels, g.labels) == 1.0, ablation

    def test_noisy_blocks_cluster_correctly(self):
        from mgclust.metrics import accuracy
        from mgclust.synth import sbm_multilayer
        g = sbm_multilayer(seed=7)
        model = train(g, toy_config(widths=(16, 8), beta=(1.0, 1.0), seed=1,
                                    pretrain_epochs=60, max_epochs=200))
        assert accuracy(model.labels, g.labels) >= 0.95

    def test_persistently_empty_cluster_warns(self, monkeypatch):
        import mgclust.training as training_module
        # Park one frozen centroid absurdly far away; its cluster never gets
        # mass, which must warn after the patience window without aborting.
        real_init = training_module.init_centroids

        def far_init(z, k, seed):
            mu = real_init(z, k, seed)
            mu[0] = 1e9
            return mu

        monkeypatch.setattr(training_module, "init_centroids", far_init)
        g = two_clique_graph(block_size=4)
        cfg = toy_config(seed=6, pretrain_epochs=2, max_epochs=55, ablation="no_clu")
        with pytest.warns(UserWarning, match="empty"):
            model = train(g, cfg)
        assert len(model.history) == 55  # warned, not aborted

    def test_single_view_trains_with_zero_contrastive(self):
        g = random_multilayer(seed=6, n_nodes=10, attr_width=5, n_views=1)
        cfg = toy_config(beta=(1.0,), seed=5, pretrain_epochs=5, max_epochs=8)
        with pytest.warns(UserWarning, match="single-layer"):
            model = train(g, cfg)
        assert all(row["contrastive_loss"] == 0.0 for row in model.history)

    def test_beta_length_mismatch(self):
        g = two_clique_graph()
        with pytest.raises(ValueError, match="fusion weights"):
            train(g, toy_config(beta=(1.0,)))

    def test_nonfinite_input_aborts_with_diagnostic(self):
        # Infinite attributes survive row normalization as NaN and must abort.
        g = make_graph(
            [np.array([[0.0, 1.0], [1.0, 0.0]])] * 2,
            [np.array([[np.inf, 0.0], [0.0, 1.0]])] * 2,
        )
        with np.errstate(invalid="ignore"):
            with pytest.raises(NumericalError, match="non-finite"):
                train(g, toy_config(pretrain_epochs=1, max_epochs=1))

    def test_require_finite_diagnostic(self):
        from mgclust.training import _require_finite
        with pytest.raises(NumericalError, match="recon.*epoch 7"):
            _require_finite(7, "joint", {"recon": float("nan")})
        _require_finite(1, "joint", {"recon": 0.0})  # finite passes

    def test_loss_stability_predicate(self):
        from mgclust.training import _loss_is_stable
        flat = [1.0] * 25
        assert _loss_is_stable(flat)
        assert not _loss_is_stable([1.0] * 20)  # needs window + 1 points
        drifting = [1.0 + 0.001 * i for i in range(30)]
        assert not _loss_is_stable(drifting)
        settled = [2.0 - 1.0 / (i + 1) for i in range(5)] + [1.0] * 21
        assert _loss_is_stable(settled)

    def test_early_stop_when_stability_reached(self, monkeypatch):
        import mgclust.training as train_module
        # Declare stability after 6 recorded epochs to exercise the loop exit.
        monkeypatch.setattr(train_module, "_loss_is_stable", lambda totals: len(totals) >= 6)
        g = two_clique_graph(block_size=4)
        model = train(g, toy_config(seed=8, pretrain_epochs=2, max_epochs=500))
        assert len(model.history) == 6


class TestPredictLabels:
    def test_argmax(self):
        assert predict_labels(np.array([[0.9, 0.1]]))[0] == 0

    def test_tie_breaks_low(self):
        assert predict_labels(np.array([[0.5, 0.5]]))[0] == 0

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(10)
        q = rng.random((20, 4))
        q = q / q.sum(axis=1, keepdims=True)
        np.testing.assert_array_equal(predict_labels(q), predict_labels(q ** 3))


class TestWriters:
    def test_history_csv_shape(self, tmp_path):
        g = two_clique_graph(block_size=4)
        model = train(g, toy_config(seed=0, pretrain_epochs=3, max_epochs=4))
        path = tmp_path / "history.csv"
        write_history_csv(path, model.history)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,recon_loss,contrastive_loss,cluster_loss,total_loss,acc,nmi,ari,f1"
        assert len(lines) == len(model.history) + 1

    def test_labels_csv(self, tmp_path):
        path = tmp_path / "labels.csv"
        write_labels_csv(path, np.array([1, 0]))
        assert path.read_text().splitlines() == ["node_id,label", "0,1", "1,0"]
