from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pidnet.errors import ParameterError, ParseError
from pidnet.linalg import Rng
from pidnet.network import Activation, Dense, Dropout, NetworkSpec, default_spec, forward
from pidnet.optim import AdadeltaConfig, SgdConfig
from pidnet.serialize import (
    ModelFile,
    VersionError,
    parse_config,
    parse_model,
    render_config,
    render_model,
    zero_model,
)
from pidnet.trainer import FixedUniform, GlorotUniform, TrainConfig, init_params, train

from conftest import separable_dataset


def random_model(seed):
    rs = np.random.default_rng(seed)
    spec = default_spec().with_dropout_rates(rs.uniform(0, 0.9, 2))
    params = init_params(spec, GlorotUniform(), Rng(seed))
    for a in params.arrays():
        a += rs.normal(0, 1e-3, a.shape) * rs.choice([1e-300, 1.0, 1e12], a.shape)
    return ModelFile.from_training(TrainConfig(spec=spec, seed=seed), params)


class TestModelFile:
    def test_round_trip_is_exact(self):
        m = random_model(1)
        back = parse_model(render_model(m))
        assert back.spec == m.spec
        assert back.params == m.params
        assert back.fingerprint == m.fingerprint

    def test_render_is_stable(self):
        m = random_model(2)
        assert render_model(parse_model(render_model(m))) == render_model(m)

    def test_predictions_bit_identical_over_many_models(self):
        rs = np.random.default_rng(0)
        x = rs.uniform(0, 200, (100, 8))
        for seed in range(20):
            m = random_model(seed)
            back = parse_model(render_model(m))
            a = [forward(m.spec, m.params, row)[0] for row in x]
            b = [forward(back.spec, back.params, row)[0] for row in x]
            assert a == b

    def test_trained_model_round_trip(self):
        d = separable_dataset()
        cfg = TrainConfig(epochs=5, batch_size=4, seed=3)
        params, _ = train(cfg, d)
        m = ModelFile.from_training(cfg, params)
        back = parse_model(render_model(m))
        assert back.train_config() == cfg
        assert back.params == params

    def test_self_describing_non_default_spec(self):
        spec = NetworkSpec(8, (Dense(3, Activation("elu", 0.5)), Dropout(0.1), Dense(1, Activation("sigmoid"))))
        m = ModelFile(spec, init_params(spec, FixedUniform(), Rng(0)), {})
        assert parse_model(render_model(m)).spec == spec

    def test_version_mismatch(self):
        text = render_model(zero_model()).replace("pidnet-model 1", "pidnet-model 2", 1)
        with pytest.raises(VersionError, match="version 2.*supports 1"):
            parse_model(text)

    def test_corruption_reports_line(self):
        lines = render_model(zero_model()).splitlines()
        i = next(k for k, l in enumerate(lines) if l.startswith("weights 1"))
        lines[i + 3] = lines[i + 3].replace("0", "zz", 1)
        with pytest.raises(ParseError) as exc:
            parse_model("\n".join(lines))
        assert exc.value.line == i + 4

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda t: t.replace("pidnet-model", "other-model"),
            lambda t: t.replace("\nend\n", "\n"),
            lambda t: t.replace("layer dense 64", "layer dense 65"),
            lambda t: t.replace("bias 2 1", "bias 2 2"),
            lambda t: "",
        ],
    )
    def test_malformed(self, mutate):
        with pytest.raises(ParseError):
            parse_model(mutate(render_model(zero_model())))


configs = st.builds(
    TrainConfig,
    spec=st.builds(
        lambda r1, r2, alpha: NetworkSpec(
            8,
            (Dense(5, Activation("elu", alpha)), Dropout(r1), Dense(3, Activation("tanh")),
             Dropout(r2), Dense(1, Activation("softplus"))),
        ),
        st.floats(0, 0.99), st.floats(0, 0.99), st.floats(0.1, 3),
    ),
    epochs=st.integers(1, 10_000),
    batch_size=st.integers(1, 1024),
    optimizer=st.one_of(
        st.builds(AdadeltaConfig, st.floats(0.01, 0.99), st.floats(1e-12, 1e-2)),
        st.builds(SgdConfig, st.floats(1e-6, 10)),
    ),
    init=st.one_of(
        st.just(GlorotUniform()),
        st.builds(FixedUniform, st.floats(-1, -1e-3), st.floats(1e-3, 1)),
    ),
    seed=st.integers(0, 2**64 - 1),
    validation_fraction=st.floats(0.01, 0.99),
    classification_threshold=st.floats(-10, 10),
    stratified=st.booleans(),
)


class TestConfigFile:
    @given(configs)
    @settings(max_examples=200)
    def test_round_trip(self, cfg):
        assert parse_config(render_config(cfg)) == cfg

    def test_defaults_round_trip(self):
        assert parse_config(render_config(TrainConfig())) == TrainConfig()

    def test_comments_and_partial_files(self):
        cfg = parse_config("# hello\n\nepochs = 7\n  # indented comment\nseed=3\n")
        assert cfg == replace(TrainConfig(), epochs=7, seed=3)

    @given(st.text("abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=12))
    def test_unknown_keys_rejected(self, key):
        from pidnet.serialize import CONFIG_KEYS

        if key in CONFIG_KEYS:
            return
        with pytest.raises(ParseError, match=key):
            parse_config(f"epochs = 3\n{key} = 1\n")

    @pytest.mark.parametrize(
        "text",
        ["epochs = 0", "epochs = many", "optimizer = adam", "init = normal", "stratified = maybe",
         "layers = dense:4:elu", "layers = conv:3", "no equals sign"],
    )
    def test_invalid_values(self, text):
        with pytest.raises((ParameterError, ParseError)):
            parse_config(text)

    def test_duplicate_key(self):
        with pytest.raises(ParseError, match="duplicate"):
            parse_config("seed = 1\nseed = 2\n")
