"""Command-line interface behavior, exercised through main() in-process."""

import csv
import io

import pytest

from hnlc.cli import main


def gpl_text(n):
    with open("/usr/share/common-licenses/GPL-3", "rb") as f:
        data = f.read()
    return (data * (n // len(data) + 1))[:n]


FAST = ["--block-bytes", "4096", "-L", "512", "-K", "64", "-W", "512"]


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_compress_decompress_round_trip(tmp_path, capsys):
    src = tmp_path / "in.txt"
    src.write_bytes(gpl_text(20000))
    arc = tmp_path / "out.hnlc"
    back = tmp_path / "back.txt"
    code, _, err = run(["compress", str(src), str(arc), *FAST], capsys)
    assert code == 0
    assert "neural" in err and "->" in err
    code, _, _ = run(["decompress", str(arc), str(back)], capsys)
    assert code == 0
    assert back.read_bytes() == src.read_bytes()


def test_inspect(tmp_path, capsys):
    src = tmp_path / "in.bin"
    src.write_bytes(gpl_text(10000))
    arc = tmp_path / "out.hnlc"
    assert run(["compress", str(src), str(arc), *FAST], capsys)[0] == 0
    code, out, _ = run(["inspect", str(arc), "--blocks"], capsys)
    assert code == 0
    assert "L=512" in out and "grid_k=3" in out
    assert "source sha256" in out
    assert "neural" in out  # per-block lines present


def test_bench_csv(tmp_path, capsys):
    a = tmp_path / "a.txt"
    a.write_bytes(gpl_text(8000))
    b = tmp_path / "b.bin"
    b.write_bytes(bytes(range(256)) * 16)
    code, out, _ = run(["bench", str(a), str(b), *FAST], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0][:5] == ["file", "bytes", "archive_bytes", "ratio", "bpc"]
    assert len(rows) == 3
    assert rows[1][1] == "8000"
    assert float(rows[1][3]) > 1.0  # text compresses


def test_missing_input_fails(tmp_path, capsys):
    code, _, err = run(["compress", str(tmp_path / "nope"), str(tmp_path / "o")],
                       capsys)
    assert code == 1 and "error:" in err


def test_corrupt_archive_fails(tmp_path, capsys):
    arc = tmp_path / "bad.hnlc"
    arc.write_bytes(b"not an archive at all")
    code, _, err = run(["decompress", str(arc), str(tmp_path / "o")], capsys)
    assert code == 1 and "error:" in err


def test_wrong_predictor_fails(tmp_path, capsys):
    src = tmp_path / "in.txt"
    src.write_bytes(gpl_text(6000))
    arc = tmp_path / "out.hnlc"
    run(["compress", str(src), str(arc), *FAST, "--predictor", "synthetic:7"],
        capsys)
    code, _, err = run(
        ["decompress", str(arc), str(tmp_path / "o"), "--predictor", "builtin"],
        capsys)
    assert code == 1 and "error:" in err


def test_force_route_flag(tmp_path, capsys):
    src = tmp_path / "in.txt"
    src.write_bytes(gpl_text(6000))
    arc = tmp_path / "out.hnlc"
    code, _, err = run(
        ["compress", str(src), str(arc), *FAST, "--force-route", "stored"], capsys)
    assert code == 0
    assert "0 neural, 0 legacy" in err


def test_invalid_grid_k_rejected(tmp_path, capsys):
    with pytest.raises(SystemExit):
        main(["compress", "x", "y", "--grid-k", "9"])
    capsys.readouterr()
