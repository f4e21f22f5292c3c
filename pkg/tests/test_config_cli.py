import pytest

from gossipsim import cli
from gossipsim.config import ConfigError, ScenarioConfig, load, parse_axis, parse_text
from gossipsim.metrics import CSV_FIELDS, read_csv

QUICK = ["--set", "n_nodes=8", "--set", "sim_time_s=8", "--set", "flows=2"]


def test_defaults_are_base_setup():
    cfg = ScenarioConfig().validate()
    assert (cfg.area_w_m, cfg.area_h_m, cfg.n_nodes, cfg.range_m) == (600.0, 400.0, 50, 250.0)
    assert (cfg.rate_bps, cfg.speed_mps, cfg.pause_s) == (2_000_000, 20.0, 10.0)


def test_parse_text_with_comments_and_switches():
    cfg = parse_text("""
        # a comment
        n_nodes = 30   # trailing
        psm = off
        protocol = aeerg
        p_sleep = 0.25
    """)
    assert cfg.n_nodes == 30 and cfg.psm is False
    assert cfg.protocol == "aeerg" and cfg.p_sleep == 0.25


def test_every_bad_key_is_listed():
    with pytest.raises(ConfigError) as info:
        parse_text("bogus = 1\nn_nodes = two\npsm = maybe\n")
    assert len(info.value.problems) == 3


def test_validation_lists_every_problem():
    cfg = ScenarioConfig(protocol="olsr", p_gossip=1.5, n_nodes=0)
    with pytest.raises(ConfigError) as info:
        cfg.validate()
    text = " ".join(info.value.problems)
    assert "protocol" in text and "p_gossip" in text and "n_nodes" in text


def test_malformed_line_rejected():
    with pytest.raises(ConfigError):
        parse_text("just words\n")


def test_dump_round_trips():
    cfg = ScenarioConfig(psm=False, p_sleep=0.4, sweep_nodes="10,20")
    assert parse_text(cfg.dump()) == cfg


def test_axis_parsing():
    assert parse_axis("25, 50,100") == [25.0, 50.0, 100.0]


def test_load_file(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text("seed = 9\n")
    assert load(p).seed == 9


def test_cli_run_writes_provenance_and_row(tmp_path, capsys):
    cfg_file = tmp_path / "s.cfg"
    cfg_file.write_text("seed = 4\nprotocol = aeerg\n")
    out = tmp_path / "row.csv"
    assert cli.main(["run", "--config", str(cfg_file), "--seed", "5", "--out", str(out)] + QUICK) == 0
    text = out.read_text()
    assert "# seed = 5" in text and "# protocol = aeerg" in text
    rows = read_csv(out)
    assert len(rows) == 1 and list(rows[0]) == CSV_FIELDS
    assert rows[0]["seed"] == "5"


def test_cli_run_to_stdout(capsys):
    assert cli.main(["run"] + QUICK) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[-2] == ",".join(CSV_FIELDS)


def test_cli_bad_override_exit_code(capsys):
    assert cli.main(["run", "--set", "nope=1", "--set", "p_sleep=7"]) == 2
    err = capsys.readouterr().err
    assert "nope" in err


def test_cli_sweep_with_summary(tmp_path):
    out = tmp_path / "sweep.csv"
    summary = tmp_path / "summary.csv"
    argv = ["sweep", "--axis", "sim_time", "--values", "7,8", "--out", str(out),
            "--summary", str(summary), "--set", "runs_per_point=2"] + QUICK
    assert cli.main(argv) == 0
    rows = read_csv(out)
    assert len(rows) == 2 * 2 * 2 * 2
    assert "# sweep_axis = sim_time" in out.read_text()
    assert len(summary.read_text().splitlines()) == 1 + 2 * 2 * 2


def test_cli_sweep_requires_out():
    assert cli.main(["sweep", "--axis", "nodes"]) == 2
