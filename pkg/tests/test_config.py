from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from polykin.config import ConfigError, ExperimentConfig, load, parse

configs = st.builds(
    ExperimentConfig,
    model=st.just("dumbbell"),
    engine=st.sampled_from(["sde-inertial", "sde-overdamped", "fp-limit"]),
    seed=st.integers(0, 2**64 - 1),
    t_final=st.floats(0, 10, allow_nan=False),
    dt=st.floats(1e-4, 1.0),
    N=st.integers(100, 10**7),
    epsilon=st.floats(0.01, 2.0),
    kBT=st.floats(0.0, 5.0),
    shear_rate=st.floats(-3, 3, allow_nan=False),
    flow=st.sampled_from(["quiescent", "shear", "extension"]),
    x_noise=st.booleans(),
    epsilons=st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5).map(tuple),
)


@given(configs)
def test_round_trip_identity(cfg):
    assert parse(cfg.to_text()) == cfg


@given(configs)
def test_hash_stable_under_round_trip(cfg):
    assert parse(cfg.to_text()).hash() == cfg.hash()


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError) as info:
        parse("[run]\nmodel = dumbbell\nfoo = 1\n")
    assert info.value.line == 3 and info.value.field == "foo"


def test_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        parse("[nope]\nx = 1\n")


def test_bad_value_type():
    with pytest.raises(ConfigError) as info:
        parse("[run]\nN = lots\n")
    assert info.value.field == "N" and info.value.line == 2


def test_fene_init_outside_ball_names_field():
    text = "[physics]\nspring = fene\nn0 = 2.0\n[init]\nn_init = 3.0, 0, 0\n"
    with pytest.raises(ConfigError) as info:
        parse(text)
    assert info.value.field == "n_init" and info.value.line == 5


def test_sde_needs_minimum_ensemble():
    with pytest.raises(ConfigError, match="N >= 100"):
        replace(ExperimentConfig(), N=10).validate()


def test_load_returns_raw_bytes(tmp_path):
    p = tmp_path / "a.ini"
    p.write_text("[run]\nseed = 9\n")
    cfg, raw = load(p)
    assert cfg.seed == 9 and raw == b"[run]\nseed = 9\n"
