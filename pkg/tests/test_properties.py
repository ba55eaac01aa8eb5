"""Heavier randomized property checks pinned by the module contracts."""

import numpy as np
import pytest

from semmap.config import RunConfig, load_config
from semmap.mln import hard_rules
from semmap.world import Unit, detect_relations, world_from_dict


def test_relations_symmetric_over_1000_random_layouts():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        n = 1 + int(rng.integers(5))
        units = [
            Unit(
                i,
                float(rng.uniform(8, 82)),
                float(rng.uniform(8, 52)),
                float(rng.uniform(3, 14)),
                float(rng.uniform(3, 14)),
                float(rng.uniform(0, np.pi)) if rng.integers(4) == 0 else 0.0,
            )
            for i in range(n)
        ]
        rel = detect_relations(units, (60, 90))
        assert np.array_equal(rel, rel.T)
        assert not rel.diagonal().any()


def test_config_rules_file_plumbs_through(tmp_path):
    rules_path = tmp_path / "hard.rules"
    rules_path.write_text(
        "\n".join(r.text for r in hard_rules()) + "\n"
    )
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(f"rules_file = {rules_path}\nseed = 7\n")
    cfg = load_config(cfg_path)
    assert cfg.rules_file == str(rules_path)
    assert cfg.seed == 7
    from semmap.cli import _rules_for

    rules = _rules_for(cfg)
    assert all(r.hard for r in rules)
    assert len(rules) == 22


def test_config_rejects_invalid_values(tmp_path):
    from semmap.errors import ConfigError

    bad = tmp_path / "bad.cfg"
    bad.write_text("psi = 1.5\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("coverage_gate = 0\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("kernel_weight.add = -1\n")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_config_normalizes_kernel_weights():
    cfg = RunConfig(kernel_weights={k: 2.0 for k in RunConfig().kernel_weights})
    assert sum(cfg.kernel_weights.values()) == pytest.approx(1.0)


def test_world_schema_version_checked():
    with pytest.raises(ValueError):
        world_from_dict({"version": 999, "units": []})
