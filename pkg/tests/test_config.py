"""Presets and config-file parsing."""

import pytest

from neurop.config import PRESETS, TrainConfig, load_config, make_config, new_model


class TestPresets:
    def test_desk_defaults(self):
        cfg = make_config("desk")
        assert cfg.iterations == 20_000
        assert cfg.init_iterations == 2_000
        assert cfg.corpus_size == 9
        assert cfg.init_lr == 5e-5

    def test_paper_scale(self):
        cfg = make_config("paper")
        assert cfg.iterations == 600_000
        assert cfg.init_iterations == 100_000
        assert cfg.corpus_size == 40
        assert cfg.lr == 5e-5
        assert cfg.beta1 == 0.9 and cfg.beta2 == 0.99

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            make_config("gpu-cluster")

    def test_overrides_win(self):
        cfg = make_config("paper", iterations=17)
        assert cfg.iterations == 17
        assert cfg.preset == "paper"


class TestConfigFile:
    def test_flat_yaml_roundtrip(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(
            "preset: desk\nseed: 42\nlambda_tv: 0.2\nloss_terms: [r, c]\n"
            "neurop_mode: standard-fix\n"
        )
        cfg = load_config(path)
        assert cfg.seed == 42
        assert cfg.lambda_tv == 0.2
        assert cfg.loss_terms == ("r", "c")
        assert cfg.neurop_mode == "standard-fix"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("learning_rate_typo: 0.1\n")
        with pytest.raises(ValueError, match="learning_rate_typo"):
            load_config(path)

    def test_invalid_mode_rejected(self):
        with pytest.raises(ValueError):
            TrainConfig(neurop_mode="frozen")

    def test_explicit_overrides_beat_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("seed: 1\n")
        cfg = load_config(path, seed=99)
        assert cfg.seed == 99


class TestNewModel:
    def test_share_flag_controls_backbone_count(self):
        shared = new_model(make_config("desk", share_backbone=True))
        private = new_model(make_config("desk", share_backbone=False))
        assert len(shared.predictors.backbones) == 1
        assert len(private.predictors.backbones) == 3
        assert private.param_count() > 1.8 * shared.param_count() - 14000
