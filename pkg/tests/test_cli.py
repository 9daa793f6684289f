import subprocess
import sys

import pytest

from qatlab import cli, fourier


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def body(text):
    return [line for line in text.splitlines() if not line.startswith("#")]


def test_quantize_rows(tmp_path, capsys):
    src = tmp_path / "in.txt"
    src.write_text("2.7\n0  10\n-9.0\n")
    code, out, _ = run(["quantize", "--input", str(src), "--bits", "3"], capsys)
    assert code == 0
    assert body(out) == ["x,x_q_int,x_dequant", "2.7,3,3.0", "0,0,0.0", "10,3,3.0", "-9.0,-4,-4.0"]
    assert "# bits = 3" in out


def test_quantize_auto_scale_and_random(capsys):
    code, out, _ = run(["quantize", "--random", "5", "--scale", "auto", "--seed", "1"], capsys)
    assert code == 0 and len(body(out)) == 6


def test_quantize_missing_file(tmp_path, capsys):
    code, out, err = run(["quantize", "--input", str(tmp_path / "nope.txt")], capsys)
    assert code == 2 and out == "" and "cannot read" in err


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--not-a-flag"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["stats", "--surrogate", "sigmoid"])
    assert exc.value.code == 2
    code, _, err = run(["stats", "--amplitude", "0.3"], capsys)
    assert code == 2 and "well-conditioned" in err


def test_config_file_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# toy run\nsteps = 7\nlr = 0.02  # small\nseed=3\n")
    code, out, _ = run(["train", "--config", str(cfg), "--seed", "5"], capsys)
    assert code == 0
    assert "# steps = 7" in out and "# lr = 0.02" in out and "# seed = 5" in out
    assert len(body(out)) == 8


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = run(["train", "--config", str(cfg)], capsys)
    assert code == 2 and "unknown key" in err
    code, _, _ = run(["train", "--config", str(tmp_path / "missing.cfg")], capsys)
    assert code == 2


def test_train_output_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["train", "--bits", "3", "--surrogate", "rdfs", "--amplitude", "0.21", "--seed", "0", "--steps", "50"]
    assert run(args + ["--out", str(a)], capsys)[0] == 0
    assert run(args + ["--out", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert body(a.read_text())[0] == "step,loss,grad_norm,lr"
    assert b"\r\n" not in a.read_bytes()


def test_train_quantization_off(capsys):
    code, out, _ = run(["train", "--bits", "none", "--steps", "3"], capsys)
    assert code == 0 and "# bits = none" in out


def test_stats_dsq(capsys):
    code, out, _ = run(["stats", "--surrogate", "dsq", "--alpha", "0.5", "--samples", "20000"], capsys)
    assert code == 0
    header, row = body(out)
    assert header == ("method,param,l,u,expectation_closed,variance_closed,"
                      "expectation_mc,variance_mc,mc_samples,mc_stderr_mean,seed")
    fields = dict(zip(header.split(","), row.split(",")))
    assert float(fields["expectation_closed"]) == 1.0
    assert fields["mc_samples"] == "20000"


def test_verify_fourier_passes(capsys):
    code, out, err = run(["verify", "--theorem", "fourier"], capsys)
    assert code == 0
    lines = body(out)
    assert lines[0] == "status,check,measured,expected,delta,tolerance"
    assert all(line.startswith("PASS,") for line in lines[1:])
    assert "checks passed" in err


def test_verify_stats_column_order(capsys):
    code, out, _ = run(["verify", "--theorem", "stats", "--samples", "200000", "--seed", "7"], capsys)
    assert code == 0
    lines = body(out)
    assert lines[0] == "status,check,measured,expected,delta,tolerance"
    assert any(line.split(",")[1].startswith("mc_mean_") for line in lines[1:])
    assert all(len(line.split(",")) == 6 for line in lines)


def test_verify_negative_control(monkeypatch, capsys):
    monkeypatch.setattr(fourier, "VANILLA_AMPLITUDE", 0.25)
    code, out, _ = run(["verify", "--theorem", "fourier"], capsys)
    assert code == 1
    assert any(line.startswith("FAIL,zigzag_b1") for line in body(out))


def test_fourier_and_surrogate_eval(capsys):
    code, out, _ = run(["fourier", "--degree", "3"], capsys)
    assert code == 0 and len(body(out)) == 4
    code, out, _ = run(["surrogate-eval", "--surrogate", "rdfs", "--points", "5"], capsys)
    assert code == 0
    rows = body(out)[1:]
    assert rows[2].startswith("0.0,0.0,0.0346582489614842")


def test_bench_rows(capsys):
    code, out, _ = run(["bench", "--n", "10000", "--repeats", "5"], capsys)
    assert code == 0
    lines = body(out)
    assert lines[0] == "label,n_elems,repeats,median_ns,p10_ns,p90_ns,workspace_bytes,host_descriptor"
    assert [line.split(",")[0] for line in lines[1:]] == ["ste", "rdfs", "dsq"]


def test_module_entry_point(tmp_path):
    src = tmp_path / "in.txt"
    src.write_text("2.7")
    proc = subprocess.run([sys.executable, "-m", "qatlab", "quantize", "--input", str(src)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[-1] == "2.7,3,3.0"
