from pathlib import Path

import pytest

from fednetsim.config import (
    CONFIG_FILES,
    CsvSink,
    StreamSink,
    default_config,
    load_config,
    resolve_topology,
    serialize_config,
    validate,
    write_config,
)
from fednetsim.errors import MissingFile, ParseError, ValidationError
from fednetsim.fl import FedAvg, IID
from fednetsim.topology import NodeRole

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "fednetsim" / "data"


@pytest.fixture
def default_dir(tmp_path):
    write_config(default_config(), tmp_path)
    return tmp_path


class TestDefaults:
    def test_default_values(self):
        cfg = default_config()
        assert cfg.fl.n_clients == 4
        assert cfg.fl.aggregator == FedAvg()
        assert cfg.fl.partition == IID()
        assert cfg.net.traffic == ()
        assert cfg.general.sink(CsvSink) is not None

    def test_defaults_pass_validation(self):
        cfg = default_config()
        topo = resolve_topology(cfg.net)
        assert validate(cfg, topo) == []

    def test_shipped_files_equal_defaults(self):
        cfg = load_config(DATA_DIR / "default")
        assert cfg == default_config()

    def test_round_trip(self, tmp_path):
        cfg = default_config()
        write_config(cfg, tmp_path)
        assert load_config(tmp_path) == cfg

    def test_serialized_files_are_stable(self):
        a = serialize_config(default_config())
        b = serialize_config(default_config())
        assert a == b


class TestLoadConfig:
    def test_loads_default_dir(self, default_dir):
        cfg = load_config(default_dir)
        assert cfg == default_config()

    def test_missing_file_named(self, default_dir):
        (default_dir / "net.toml").unlink()
        with pytest.raises(MissingFile) as exc:
            load_config(default_dir)
        assert exc.value.filename == "net.toml"

    def test_missing_files_with_defaults_flag(self, tmp_path):
        cfg = load_config(tmp_path, use_defaults=True)
        assert cfg == default_config()

    def test_fraction_zero_rejected(self, default_dir):
        text = (default_dir / "fl.toml").read_text().replace(
            "clients_per_round_fraction = 1.0", "clients_per_round_fraction = 0.0"
        )
        (default_dir / "fl.toml").write_text(text)
        with pytest.raises(ValidationError) as exc:
            load_config(default_dir)
        assert any("clients_per_round_fraction" in str(v) for v in exc.value.violations)

    def test_unknown_key_rejected(self, default_dir):
        with (default_dir / "fl.toml").open("a") as fh:
            fh.write("\nnot_a_real_key = 3\n")
        with pytest.raises(ParseError) as exc:
            load_config(default_dir)
        assert "not_a_real_key" in str(exc.value)

    def test_unparseable_toml_reports_line(self, default_dir):
        (default_dir / "general.toml").write_text("metric_sample_period_s = =\n")
        with pytest.raises(ParseError) as exc:
            load_config(default_dir)
        assert exc.value.filename == "general.toml"

    def test_multiple_violations_reported_at_once(self, default_dir):
        text = (default_dir / "fl.toml").read_text()
        text = text.replace("clients_per_round_fraction = 1.0", "clients_per_round_fraction = 0.0")
        text = text.replace("rounds = 3", "rounds = 0")
        (default_dir / "fl.toml").write_text(text)
        with pytest.raises(ValidationError) as exc:
            load_config(default_dir)
        assert len(exc.value.violations) == 2

    def test_cross_file_mismatch_raises(self, default_dir):
        text = (default_dir / "fl.toml").read_text().replace("n_clients = 4", "n_clients = 10")
        (default_dir / "fl.toml").write_text(text)
        with pytest.raises(ValidationError) as exc:
            load_config(default_dir)
        assert any("n_clients" in str(v) for v in exc.value.violations)

    def test_loading_is_deterministic(self, default_dir):
        assert load_config(default_dir) == load_config(default_dir)


class TestValidate:
    def test_client_count_mismatch(self):
        cfg = default_config()
        bad = cfg.__class__(
            fl=cfg.fl.__class__(**{**cfg.fl.__dict__, "n_clients": 10}),
            net=cfg.net,
            general=cfg.general,
        )
        topo = resolve_topology(cfg.net)
        violations = validate(bad, topo)
        assert len(violations) == 1
        assert "10" in violations[0].message and "4" in violations[0].message

    def test_dangling_traffic_node(self, default_dir):
        (default_dir / "net.toml").open("a").write(
            '\n[[traffic]]\nsrc = "h99"\ndst = "h2"\ncap_mbps = 10.0\n'
            'start_s = 0.0\nstop_s = 5.0\nseed = 1\n[traffic.pattern]\nkind = "uniform"\nrate_mbps = 5.0\n'
        )
        with pytest.raises(ValidationError) as exc:
            load_config(default_dir)
        assert any("h99" in str(v) for v in exc.value.violations)

    def test_server_node_must_exist(self, default_dir):
        text = (default_dir / "net.toml").read_text().replace('server_node = "h1"', 'server_node = "h9"')
        (default_dir / "net.toml").write_text(text)
        with pytest.raises(ValidationError) as exc:
            load_config(default_dir)
        # server missing also flips the client count (5 client hosts remain)
        assert any("server_node" in str(v) for v in exc.value.violations)


class TestResolveTopology:
    def test_generated_star_roles(self):
        cfg = default_config()
        topo = resolve_topology(cfg.net)
        assert topo.nodes["h1"].role is NodeRole.SERVER
        assert len(topo.nodes_with_role(NodeRole.CLIENT)) == 4

    def test_sample_topologies_parse(self, tmp_path):
        for name, n_clients in (("sample_net_10.json", 10), ("sample_net_15.json", 15)):
            write_config(default_config(), tmp_path)
            net_text = f'''server_node = "server"

[topology]
source = "topohub_json"
path = "{DATA_DIR / 'topologies' / name}"

[default_link]
bandwidth_mbps = 100.0
delay_ms = 1.0
loss_frac = 0.0
'''
            (tmp_path / "net.toml").write_text(net_text)
            fl_text = (tmp_path / "fl.toml").read_text().replace("n_clients = 4", f"n_clients = {n_clients}")
            (tmp_path / "fl.toml").write_text(fl_text)
            cfg = load_config(tmp_path)
            topo = resolve_topology(cfg.net)
            assert len(topo.nodes_with_role(NodeRole.CLIENT)) == n_clients
            assert topo.nodes["server"].role is NodeRole.SERVER

    def test_missing_topology_file(self, default_dir):
        (default_dir / "net.toml").write_text(
            'server_node = "a"\n\n[topology]\nsource = "topohub_json"\npath = "nope.json"\n'
        )
        with pytest.raises(MissingFile):
            load_config(default_dir)


class TestSinks:
    def test_no_sinks_is_violation(self, default_dir):
        (default_dir / "general.toml").write_text("metric_sample_period_s = 0.5\nreport = true\n")
        with pytest.raises(ValidationError) as exc:
            load_config(default_dir)
        assert any("sink" in str(v) for v in exc.value.violations)

    def test_stream_sink_parsed(self, default_dir):
        (default_dir / "general.toml").write_text(
            'metric_sample_period_s = 0.5\nreport = true\n\n[sinks]\ncsv_dir = "."\nstream_bind = "127.0.0.1:0"\n'
        )
        cfg = load_config(default_dir)
        assert cfg.general.sink(StreamSink).bind == "127.0.0.1:0"
