import json
import subprocess
import sys

import pytest
import yaml

from lane_emden_hole import __version__
from lane_emden_hole.cli import ConfigError, RunConfig, load_config, main


def _write_config(path, **kw):
    path.write_text(yaml.safe_dump(kw))
    return str(path)


def test_exponent_out_of_range_exits_2(tmp_path, capsys):
    cfg = _write_config(tmp_path / "c.yaml", N=4, p=1.6)
    assert main(["groundstate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "exponent-out-of-range" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_increasing_eps_list_exits_2(tmp_path, capsys):
    cfg = _write_config(tmp_path / "c.yaml", eps_list=[1e-4, 1e-3])
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "eps_list must be decreasing" in capsys.readouterr().err


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = _write_config(tmp_path / "c.yaml", N=5, colour="blue")
    assert main(["groundstate", "--config", cfg]) == 2
    assert "colour" in capsys.readouterr().err


def test_nested_sections_are_flattened(tmp_path):
    cfg = load_config(_write_config(tmp_path / "c.yaml", problem={"N": 4, "p": 1.25},
                                    sweep={"eps_list": [1e-2, 1e-3]}))
    assert (cfg.N, cfg.p, cfg.eps_list) == (4, 1.25, [1e-2, 1e-3])


def test_malformed_config(tmp_path):
    bad = tmp_path / "c.yaml"
    bad.write_text("N: [5\n")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_dry_run_writes_nothing(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["report", "--dry-run", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.startswith("# config-sha256=")
    assert "eps_list" in text
    assert not out.exists()


def test_digest_ignores_output_dir():
    a, b = RunConfig(output_dir="x"), RunConfig(output_dir="y")
    assert a.digest() == b.digest()
    assert RunConfig(p=1.25).digest() != a.digest()
    assert a.header().endswith(f"lane_emden_hole={__version__}")


def test_groundstate_outputs_and_determinism(tmp_path):
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["groundstate", "--out", str(out)]) == 0
        runs.append(out)
    header = RunConfig().header()
    for fname in ("groundstate.csv", "constants.json"):
        first = (runs[0] / fname).read_bytes()
        assert first == (runs[1] / fname).read_bytes()
    assert (runs[0] / "groundstate.csv").read_text().splitlines()[0] == f"# {header}"
    rec = json.loads((runs[0] / "constants.json").read_text())
    assert rec["_comment"] == header
    assert 0.99 <= rec["tail_identity_ratio"] <= 1.01


def test_landscape_record(tmp_path):
    out = tmp_path / "o"
    assert main(["landscape", "--out", str(out)]) == 0
    rec = json.loads((out / "saddle.json").read_text())
    assert rec["signature"] == "1+,5-"
    assert rec["grad_norm_at_saddle"] <= 1e-10
    assert rec["d_agreement"] <= 1e-8
    assert (out / "landscape.csv").read_text().startswith("# config-sha256=")


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "lane_emden_hole", "--version"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.strip() == __version__
