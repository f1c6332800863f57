import pytest

from cramsim import cli, config, sim, trace
from cramsim.config import ConfigError


@pytest.fixture(scope="module")
def mixed_trace():
    return trace.generate("mixed", {"ops": 4000, "region": 4096, "chunk": 32}, 3)


def test_csv_byte_identical(small_cfg, mixed_trace):
    a = sim.run(small_cfg, mixed_trace).to_csv()
    b = sim.run(small_cfg, mixed_trace).to_csv()
    assert a == b
    assert a.splitlines()[0] == "mode,counter,value"
    assert "summary,pair_fit_60" in a


def test_parallel_matches_serial(small_cfg, mixed_trace):
    assert sim.run(small_cfg, mixed_trace, jobs=2).to_csv() == sim.run(small_cfg, mixed_trace).to_csv()


def test_conservation(small_cfg, mixed_trace):
    report = sim.run(small_cfg, mixed_trace)
    for res in report.results.values():
        assert res.requests == len(mixed_trace)
        assert res.requests == res.llc_hits + res.ledger.demand_data


def test_uncompressed_has_no_overhead_counters(small_cfg, mixed_trace):
    res = sim.run(small_cfg, mixed_trace, ["uncompressed"]).results["uncompressed"]
    led = res.ledger
    assert led.second_access == led.invalidates == led.clean_writebacks == 0
    assert led.metadata_reads == led.metadata_writes == 0


def test_normalization(small_cfg, mixed_trace):
    report = sim.run(small_cfg, mixed_trace, ["uncompressed", "ideal"])
    assert report.normalized("uncompressed") == 1.0
    assert report.normalized("ideal") == report.results["ideal"].total / report.results["uncompressed"].total


def test_random_incompressible_histogram(small_cfg):
    recs = trace.generate("random_incompressible", {"ops": 3000, "footprint": 2048}, 4)
    hist = sim.run(small_cfg, recs, ["uncompressed"]).histogram
    assert hist["pair_fit_60"] == 0.0 and hist["quad_fit_60"] == 0.0


def test_cram_static_close_to_uncompressed_on_incompressible(small_cfg):
    recs = trace.generate("random_incompressible", {"ops": 20000, "footprint": 4096}, 5)
    report = sim.run(small_cfg, recs, ["uncompressed", "cram-static"])
    assert report.normalized("cram-static") <= 1.03


# -- config --------------------------------------------------------------------


def test_config_parse(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nllc_capacity = 1048576\nmarker_mode=fixed\nsampled_fraction=0.5\n")
    cfg = config.load(p)
    assert cfg.llc_capacity == 1 << 20 and cfg.controller.marker_mode == "fixed"
    assert cfg.sampled_fraction == 0.5


@pytest.mark.parametrize("values", [
    {"bogus": 1}, {"marker_bits": 16}, {"llc_capacity": 3000}, {"llc_assoc": 2},
    {"sampled_fraction": 2.0}, {"memory_lines": 6}, {"lit_overflow": "panic"}, {"llc_assoc": "x"},
])
def test_config_errors(values):
    with pytest.raises(ConfigError):
        config.from_mapping(values)


def test_config_bad_line():
    with pytest.raises(ConfigError, match="line 2"):
        config.parse_lines(["a=1", "oops"])


def test_replace_touches_controller():
    cfg = config.from_mapping({}).replace(seed=9, llc_assoc=8)
    assert cfg.seed == 9 and cfg.llc_assoc == 8


# -- CLI -----------------------------------------------------------------------


def test_cli_run_generator(tmp_path, capsys):
    out = tmp_path / "out.csv"
    cfgp = tmp_path / "c.cfg"
    cfgp.write_text("llc_capacity=65536\n")
    rc = cli.main(["run", "--config", str(cfgp), "--trace", "gen:seq_compressible:lines=256",
                   "--modes", "uncompressed,cram-static", "--out", str(out), "--seed", "1"])
    assert rc == 0
    text = out.read_text()
    assert "cram-static,normalized_accesses" in text


def test_cli_gen_then_run(tmp_path, capsys):
    tpath = tmp_path / "t.trace"
    assert cli.main(["gen", "page_homogeneous", "--params", "pages=4,ops=200", "--seed", "2",
                     "--out", str(tpath)]) == 0
    assert cli.main(["run", "--trace", str(tpath), "--modes", "ideal", "--out", "-"]) == 0
    assert capsys.readouterr().out.startswith("mode,counter,value")


def test_cli_storage(capsys):
    assert cli.main(["storage"]) == 0
    assert "total,276" in capsys.readouterr().out


def test_cli_errors(tmp_path, capsys):
    assert cli.main(["run", "--trace", "gen:nope"]) == 2
    assert cli.main(["run", "--trace", "gen:mixed:ops=10", "--modes", "fast"]) == 2
    bad = tmp_path / "bad.trace"
    bad.write_text("0 R 0x1001\n")
    assert cli.main(["run", "--trace", str(bad)]) == 2
    assert "line 1" in capsys.readouterr().err
    assert cli.main(["run", "--trace", str(tmp_path / "missing")]) == 2
