import pytest

from pmrnet.config import (
    NetworkConfig,
    TrainConfig,
    branch_channels,
    channels_at,
    config_hash,
    dump_config,
    parse_config,
    validate_config,
)
from pmrnet.errors import ConfigError, DivisibilityError, RangeError


def test_validate_accepts_divisible_input():
    cfg = NetworkConfig(num_layers=5, num_branches=3)
    vc = validate_config(cfg, (512, 512))
    assert cfg.required_divisor == 64
    assert vc.expected_hw(1, 0) == (512, 512)
    assert vc.expected_hw(5, 2) == (8, 8)


def test_validate_rejects_non_divisible_input():
    cfg = NetworkConfig(num_layers=5, num_branches=3)
    with pytest.raises(DivisibilityError):
        validate_config(cfg, (500, 500))


def test_tiny_configuration_is_valid():
    cfg = NetworkConfig(num_layers=4, num_branches=4)
    assert cfg.required_divisor == 64
    validate_config(cfg, (512, 512))


def test_range_errors():
    with pytest.raises(RangeError):
        NetworkConfig(num_layers=1)
    with pytest.raises(RangeError):
        NetworkConfig(num_branches=0)
    with pytest.raises(RangeError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(RangeError):
        TrainConfig(batch_size=0)


def test_channels_at():
    cfg = NetworkConfig(base_channels=32, channel_growth=2)
    assert channels_at(cfg, 1) == 32
    assert channels_at(cfg, 5) == 512
    cfg8 = NetworkConfig(base_channels=8, channel_growth=2, num_layers=3)
    assert channels_at(cfg8, 3) == 32
    with pytest.raises(RangeError):
        channels_at(cfg, 0)
    with pytest.raises(RangeError):
        channels_at(cfg, 6)


def test_branch_channels_halve_per_branch():
    cfg = NetworkConfig(base_channels=32, num_branches=4)
    assert [branch_channels(cfg, 1, j) for j in range(4)] == [32, 16, 8, 4]
    assert [branch_channels(cfg, 3, j) for j in range(4)] == [128, 64, 32, 16]
    # floors at one channel
    tiny = NetworkConfig(base_channels=4, num_branches=4)
    assert branch_channels(tiny, 1, 3) == 1
    with pytest.raises(RangeError):
        branch_channels(cfg, 1, 4)


def test_validated_plan_channels_and_sizes():
    cfg = NetworkConfig(num_layers=3, num_branches=2, base_channels=8)
    vc = validate_config(cfg, (32, 32))
    assert vc.expected[(1, 0)] == (8, 32, 32)
    assert vc.expected[(1, 1)] == (4, 16, 16)
    assert vc.expected[(3, 1)] == (16, 4, 4)


def test_config_file_round_trip():
    cfg = NetworkConfig(num_layers=4, num_branches=2, base_channels=16, threshold=0.4)
    tc = TrainConfig(max_epochs=7, batch_size=2, learning_rate=3e-4, seed=99)
    text = dump_config(cfg, tc)
    cfg2, tc2 = parse_config(text)
    assert cfg2 == cfg
    assert tc2 == tc
    assert dump_config(cfg2, tc2) == text
    assert config_hash(cfg, tc) == config_hash(cfg2, tc2)


def test_config_file_comments_and_errors():
    cfg2, tc2 = parse_config("# comment\nnum_layers = 3\n\nseed = 5 # trailing\n")
    assert cfg2.num_layers == 3
    assert tc2.seed == 5
    with pytest.raises(ConfigError):
        parse_config("bogus_key = 1\n")
    with pytest.raises(ConfigError):
        parse_config("num_layers = 3\nnum_layers = 4\n")
    with pytest.raises(ConfigError):
        parse_config("num_layers = many\n")
