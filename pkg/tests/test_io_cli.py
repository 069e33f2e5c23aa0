import csv
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdgrav.calculus import Grid3
from sdgrav.cli import main
from sdgrav.config import ConfigError, parse_config
from sdgrav.io import (
    SnapshotError,
    csv_bytes,
    decode_snapshot,
    encode_snapshot,
    read_snapshot,
    write_csv,
    write_snapshot,
)
from sdgrav.state import Background, FieldState

finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.sampled_from([8, 16]), st.sampled_from([8, 16]), st.sampled_from([8, 16]), st.integers(0, 2**32 - 1),
       st.sampled_from([1, -1]), finite, finite, st.booleans())
@settings(max_examples=30, deadline=None)
def test_snapshot_roundtrip_bit_exact(nx, ny, nz, seed, eps, t, amp, positive):
    g = Grid3(nx, ny, nz, 1.0, 2.0, 3.0)
    r = np.random.default_rng(seed)
    bg = Background(*r.standard_normal(4), amp, 2.0, 1.0 if positive else -1.0)
    s = FieldState(g, t, eps, r.standard_normal(g.shape), r.standard_normal(g.shape) * 1e-300, bg)
    back = decode_snapshot(encode_snapshot(s))
    assert back.u_fluct.tobytes() == s.u_fluct.tobytes()
    assert back.v_fluct.tobytes() == s.v_fluct.tobytes()
    assert (back.t, back.epsilon, back.background, back.grid) == (s.t, s.epsilon, s.background, s.grid)
    assert encode_snapshot(back) == encode_snapshot(s)


def test_snapshot_file_roundtrip(tmp_path, rand16):
    p = tmp_path / "snap.cmaf"
    write_snapshot(p, rand16)
    assert read_snapshot(p).u_fluct.tobytes() == rand16.u_fluct.tobytes()
    assert os.listdir(tmp_path) == ["snap.cmaf"]


def test_snapshot_corruption_detected(rand16):
    data = encode_snapshot(rand16)
    with pytest.raises(SnapshotError, match="magic"):
        decode_snapshot(b"XXXX" + data[4:])
    with pytest.raises(SnapshotError, match="version"):
        decode_snapshot(data[:4] + (99).to_bytes(4, "little") + data[8:])
    with pytest.raises(SnapshotError):
        decode_snapshot(data[:-8])
    with pytest.raises(SnapshotError):
        decode_snapshot(data[:10])


def test_csv_floats_round_trip(tmp_path):
    vals = [0.1, 1 / 3, 1e-300, -2.5e17]
    write_csv(tmp_path / "a.csv", ["x"], [[v] for v in vals])
    with open(tmp_path / "a.csv") as fh:
        rows = list(csv.reader(fh))
    assert [float(r[0]) for r in rows[1:]] == vals
    assert csv_bytes(["x"], [[np.float64(0.1)]]) == b"x\n0.1\n"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

GRID8 = "[grid]\nnx = 8\nny = 8\nnz = 8\n"


def test_config_defaults_and_types():
    cfg = parse_config(GRID8 + "[evolve]\nfilter = on\ndt = 2e-3\n")
    assert cfg.grid == Grid3.cube(8)
    assert cfg["evolve"]["filter"] is True
    assert cfg["evolve"]["dt"] == 2e-3
    assert cfg.tolerances["skew"] == 1e-8


@pytest.mark.parametrize("text,msg", [
    ("[grid]\nnx = 8\nny = 8\n", "missing required key 'nz'"),
    (GRID8 + "[grid2]\n", "unknown section"),
    (GRID8 + "[evolve]\nsteps = 3\n", "unknown key"),
    (GRID8 + "[evolve]\ndt = fast\n", "cannot read"),
    (GRID8 + "[tolerances]\nskew = 0\n", "must be positive"),
    ("[grid]\nnx = 8\nny = 8\nnz = 0\n", "grid"),
    ("not a config", "section headers"),
])
def test_config_errors(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_config(text)


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def write_cfg(tmp_path, body, name="run.cfg"):
    p = tmp_path / name
    p.write_text(body)
    return str(p)


def test_cli_usage_errors(tmp_path, capsys):
    assert main(["evolve", "--fixture", "WAVE_F", "--out", str(tmp_path)]) == 2
    assert "missing required key" in capsys.readouterr().err
    cfg = write_cfg(tmp_path, GRID8 + "[evolve]\nwibble = 1\n")
    assert main(["evolve", "--config", cfg]) == 2
    cfg = write_cfg(tmp_path, GRID8)
    assert main(["evolve", "--config", cfg, "--fixture", "NOPE"]) == 2
    assert main(["evolve", "--config", str(tmp_path / "absent.cfg")]) == 2
    with pytest.raises(SystemExit):
        main(["verify", "--config", cfg, "--suite", "everything"])


def test_cli_evolve_wave_exact(tmp_path):
    cfg = write_cfg(tmp_path, GRID8 + "[evolve]\ndt = 1e-2\nt = 0.1\ncollar_width = 0\n"
                    "densities = Halpha[sin(1x)e^(-1t)]\n[state]\nfixture = WAVE_F\n")
    out = tmp_path / "out"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0
    summary = dict(csv.reader(open(out / "evolve_summary.csv")))
    assert summary["status"] == "ok"
    assert float(summary["final_error_vs_exact"]) < 1e-8
    assert (out / "snap_00010.cmaf").exists()
    last = read_snapshot(out / "snap_00010.cmaf")
    assert last.t == pytest.approx(0.1)


def test_cli_growth_budget_failure(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "[grid]\nnx = 32\nny = 32\nnz = 32\n[evolve]\nt = 2.0\ndt = 0.1\n")
    assert main(["evolve", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "GrowthBudgetExceeded" in capsys.readouterr().err


def test_cli_runs_are_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, "[grid]\nnx = 16\nny = 16\nnz = 16\n[evolve]\nt = 0.01\ndt = 2e-3\n"
                    "collar_width = 0\ndensities = H1,H3\n")
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        main(["evolve", "--config", cfg, "--seed", "11", "--out", str(o)])
    for name in ("conservation.csv", "growth.csv", "evolve_summary.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_cli_metric_qs_minus(tmp_path):
    cfg = write_cfg(tmp_path, GRID8 + "[state]\nfixture = QSM\n")
    assert main(["metric", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(open(tmp_path / "metric.csv")))
    assert ["signature[++--]", "", "1.0", "", "1"] in rows


def test_cli_verify_seeded_failure(tmp_path, capsys):
    base = "[grid]\nnx = 32\nny = 32\nnz = 32\n"
    good = write_cfg(tmp_path, base, "good.cfg")
    bad = write_cfg(tmp_path, base + "[verify]\ncorrupt_psi = 1.0\n", "bad.cfg")
    assert main(["verify", "--config", good, "--suite", "symmetries", "--out", str(tmp_path / "g")]) == 0
    capsys.readouterr()
    assert main(["verify", "--config", bad, "--suite", "symmetries", "--out", str(tmp_path / "b")]) == 1
    err = capsys.readouterr().err
    assert "row1" in err
    rows = list(csv.DictReader(open(tmp_path / "b" / "verify_symmetries.csv")))
    failed = {r["check"] for r in rows if r["pass"] == "0"}
    assert failed and all(c.endswith(".row1") for c in failed)
