"""Config parsing: flat key=value files, typed schema, overrides, validation."""

import pytest

from switchdistill.config import apply_overrides, build_setup, load_config, parse_config_text
from switchdistill.errors import ConfigError

MINIMAL = """
# reference blob run
strategy = switch
epochs = 2
batch_size = 16
seed = 3
data.kind = blobs
data.classes = 3
data.dims = 6
data.per_class = 30
data.spread = 0.4
student.hidden = 8
teacher.hidden = 16,16
"""


class TestParsing:
    def test_round_trip(self):
        values = parse_config_text(MINIMAL)
        assert values["strategy"] == "switch"
        assert values["teacher.hidden"] == "16,16"

    def test_comments_and_blanks_skipped(self):
        values = parse_config_text("# all defaults\n\n")
        assert values == {}

    def test_unknown_key_rejected_with_location(self):
        with pytest.raises(ConfigError, match="<config>:2.*unknown key"):
            parse_config_text("seed = 1\nlearning_rate = 0.1\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="key = value"):
            parse_config_text("strategy switch\n")

    def test_bad_type_names_field(self):
        with pytest.raises(ConfigError, match="epochs"):
            build_setup({"epochs": "many"})

    def test_load_missing_file(self):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config("/nonexistent/run.cfg")


class TestOverrides:
    def test_override_applies(self):
        values = apply_overrides(parse_config_text(MINIMAL), ["strategy=dml", "tau=2.0"])
        setup = build_setup(values)
        assert setup.train.strategy == "dml"
        assert setup.train.tau == 2.0

    def test_override_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            apply_overrides({}, ["banana=1"])

    def test_override_requires_equals(self):
        with pytest.raises(ConfigError, match="key=value"):
            apply_overrides({}, ["strategy"])


class TestBuildSetup:
    def test_full_train_config(self):
        setup = build_setup(parse_config_text(MINIMAL))
        cfg = setup.train
        assert cfg.strategy == "switch"
        assert cfg.student.hidden == (8,)
        assert cfg.teacher.hidden == (16, 16)
        assert cfg.seed == 3
        train_ds, test_ds = setup.data.build()
        assert train_ds.num_classes == 3
        assert train_ds.dims == 6

    def test_data_seed_defaults_to_run_seed(self):
        setup = build_setup(parse_config_text(MINIMAL))
        assert setup.data.options["seed"] == 3
        again = build_setup(apply_overrides(parse_config_text(MINIMAL), ["data.seed=99"]))
        assert again.data.options["seed"] == 99

    def test_strategy_topology_restriction(self):
        with pytest.raises(ConfigError, match="pairwise"):
            build_setup({"strategy": "kdcl", "topology": "1t2s"})

    def test_triple_builds_third_network(self):
        setup = build_setup(
            apply_overrides(parse_config_text(MINIMAL), ["topology=1t2s", "third.hidden=4"])
        )
        assert setup.train.third is not None
        assert setup.train.third.hidden == (4,)

    def test_idx_requires_paths(self):
        with pytest.raises(ConfigError, match="data.train_images"):
            build_setup({"data.kind": "idx"})

    def test_kd_offline_requires_checkpoint_key(self):
        with pytest.raises(ConfigError, match="teacher_checkpoint"):
            build_setup({"strategy": "kd-offline"})

    def test_resolved_snapshot_contains_defaults(self):
        setup = build_setup(parse_config_text(MINIMAL))
        assert setup.resolved["alpha"] == "1.0"
        assert setup.resolved["data.seed"] == "3"
