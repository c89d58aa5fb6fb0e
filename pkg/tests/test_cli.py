import csv

import numpy as np
import pytest

from ttcomplete.cli import main
from ttcomplete.errors import InvalidArgument, UnsupportedShape
from ttcomplete.experiments import (ExperimentConfig, WeightDiagnostics, load_config_file,
                                    run_experiment, run_synth_bench)
from ttcomplete.imageio import load_image, save_image
from ttcomplete.tensor import read_dt1, sample_mask, write_dm1, write_dt1


@pytest.fixture
def image(tmp_path):
    y, x = np.mgrid[0:32, 0:32] / 31.0
    img = np.stack([x, y, 0.5 * (x + y)], axis=2)
    path = tmp_path / "img.ppm"
    save_image(img, path)
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_run_experiment_outputs(image, tmp_path):
    cfg = ExperimentConfig(input=str(image), missing_rate=0.5, max_iters=6, th=1e-12,
                           estimate=str(tmp_path / "est.ppm"),
                           metrics_csv=str(tmp_path / "m.csv"),
                           trace_csv=str(tmp_path / "t.csv"),
                           diagnostics_csv=str(tmp_path / "d.csv"),
                           mode_errors_csv=str(tmp_path / "e.csv"),
                           diag_entries=40, mode_error_iters=(1, 4))
    rep = run_experiment(cfg)
    assert 0 <= rep.rse < 1
    rows = read_rows(tmp_path / "m.csv")
    assert list(rows[0]) == ["dataset", "missing_rate", "scheme", "rse", "psnr", "ssim",
                             "iters", "seconds"]
    assert rows[0]["scheme"] == "twmac-tt+oka" and rows[0]["iters"] == "6"
    trace = read_rows(tmp_path / "t.csv")
    assert [int(r["iteration"]) for r in trace] == list(range(1, 7))
    diag = read_rows(tmp_path / "d.csv")
    assert list(diag[0]) == ["entry_id", "weight", "abs_error", "iteration"]
    assert {int(r["iteration"]) for r in diag} == {2, 4, 6}
    assert len(diag) == 3 * 40
    assert {int(r["iteration"]) for r in read_rows(tmp_path / "e.csv")} == {1, 4}
    for name in ("t.png", "d.png", "e.png"):
        assert (tmp_path / name).stat().st_size > 0
    est = load_image(tmp_path / "est.ppm")
    truth = load_image(image)
    mask = sample_mask(truth.shape, 0.5, 0)
    np.testing.assert_array_equal(est[mask], truth[mask])


def test_zero_missing_gives_zero_rse(image):
    rep = run_experiment(ExperimentConfig(input=str(image), missing_rate=0.0, max_iters=3))
    assert rep.rse == 0.0


def test_same_config_identical_csv(image, tmp_path):
    for name in ("a", "b"):
        run_experiment(ExperimentConfig(input=str(image), max_iters=4, scheme="tmac-tt",
                                        trace_csv=str(tmp_path / f"{name}.csv"), figures=False))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_ka_on_non_power_of_two_names_oka(tmp_path):
    path = tmp_path / "odd.pgm"
    save_image(np.zeros((12, 10)), path)
    with pytest.raises(UnsupportedShape, match="OKA"):
        run_experiment(ExperimentConfig(input=str(path), augment="ka"))


def test_dt1_with_mask_and_unknown_truth(tmp_path):
    rng = np.random.default_rng(0)
    t = 5 * np.einsum("i,j,k->ijk", *(rng.standard_normal(6) for _ in range(3)))
    write_dt1(t, tmp_path / "t.dt1")
    mask = sample_mask(t.shape, 0.3, 1)
    write_dm1(mask, tmp_path / "m.dm1")
    cfg = ExperimentConfig(input=str(tmp_path / "t.dt1"), mask=str(tmp_path / "m.dm1"),
                           augment="none", scheme="tmac-tt", ranks=(1,), max_iters=50,
                           estimate=str(tmp_path / "e.dt1"))
    rep = run_experiment(cfg)
    assert rep.rse < 0.05
    est = read_dt1(tmp_path / "e.dt1")
    np.testing.assert_array_equal(est[mask], t[mask])
    cfg = ExperimentConfig(input=str(tmp_path / "t.dt1"), mask=str(tmp_path / "m.dm1"),
                           augment="none", max_iters=3, unknown_truth=True)
    assert run_experiment(cfg) is None


def test_experiment_config_validation():
    with pytest.raises(InvalidArgument):
        ExperimentConfig(input="")
    with pytest.raises(InvalidArgument):
        ExperimentConfig(input="a.ppm", missing_rate=1.0)
    with pytest.raises(InvalidArgument):
        ExperimentConfig(input="a.ppm", augment="wavelet")


def test_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# experiment\ninput = a.ppm\nmissing-rate = 0.8\nranks = 3, 4\n"
                    "workers = none\nfigures = false\n")
    assert load_config_file(path) == dict(input="a.ppm", missing_rate=0.8, ranks=(3, 4),
                                          workers=None, figures=False)
    path.write_text("colour = red\n")
    with pytest.raises(InvalidArgument):
        load_config_file(path)
    path.write_text("seed = x\n")
    with pytest.raises(InvalidArgument):
        load_config_file(path)


def test_weight_diagnostics_picks_balanced_mode():
    truth = np.zeros((4, 4, 4, 4))
    diag = WeightDiagnostics(truth, np.zeros(truth.shape, bool), n_entries=10)
    assert diag.mode == 2 and diag.entries.size == 10


def test_synth_bench(tmp_path):
    rows = run_synth_bench(3, 8, 2, (0.2, 0.5), ("tmac-tt", "twmac-tt"), seed=1,
                           out_csv=tmp_path / "s.csv")
    assert [(r["missing_rate"], r["scheme"]) for r in rows] == [
        (0.2, "tmac-tt"), (0.2, "twmac-tt"), (0.5, "tmac-tt"), (0.5, "twmac-tt")]
    assert len(read_rows(tmp_path / "s.csv")) == 4
    assert (tmp_path / "s.png").exists()


def test_cli_complete_with_config_override(image, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"input = {image}\nmissing_rate = 0.9\nmax_iters = 2\nscheme = tmac-tt\n")
    out = tmp_path / "m.csv"
    assert main(["complete", "--config", str(cfg), "--missing-rate", "0.3", "--metrics-csv",
                 str(out), "--augment", "ka"]) == 0
    row = read_rows(out)[0]
    assert row["missing_rate"] == "0.3"
    assert row["scheme"] == "tmac-tt+ka"
    assert row["iters"] == "2"
    assert "psnr=" in capsys.readouterr().out


def test_cli_synth_and_inspect(tmp_path, capsys):
    assert main(["synth-bench", "--order", "3", "--extent", "6", "--rank", "1",
                 "--missing-rates", "0.3", "--max-iters", "5", "--no-figures",
                 "--out", str(tmp_path / "s.csv")]) == 0
    assert main(["augment-inspect", "256,256,3"]) == 0
    assert "(4, 4, 4, 4, 4, 4, 4, 4, 4, 3)" in capsys.readouterr().out


def test_cli_inspect_writes_tensor(image, tmp_path):
    assert main(["augment-inspect", "--input", str(image), "--augment", "ka",
                 "--out", str(tmp_path / "k.dt1")]) == 0
    assert read_dt1(tmp_path / "k.dt1").shape == (4, 4, 4, 4, 4, 3)
    assert main(["augment-inspect", "--input", str(image), "--out", str(tmp_path / "a.dt1")]) == 0
    assert read_dt1(tmp_path / "a.dt1").shape == (4,) * 6 + (3,)
    assert main(["augment-inspect", "--out", str(tmp_path / "x.dt1")]) == 2


def test_cli_metrics(image, capsys):
    assert main(["metrics", str(image), str(image)]) == 0
    assert "psnr=100.0000" in capsys.readouterr().out


@pytest.mark.parametrize("argv,code", [
    (["complete", "missing.ppm"], "io"),
    (["complete", "x.ppm", "--missing-rate", "1.2"], "invalid-argument"),
    (["augment-inspect", "48,42,64", "--augment", "ka"], "unsupported-shape"),
    (["frobnicate"], "invalid-argument"),
    (["complete", "x.ppm", "--max-iters", "ten"], "invalid-argument"),
])
def test_cli_errors_single_line(argv, code, capsys):
    assert main(argv) != 0
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith(f"error: {code}: ")


def test_cli_malformed_image(tmp_path, capsys):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    assert main(["complete", str(bad)]) != 0
    assert capsys.readouterr().err.startswith("error: malformed-input: ")
