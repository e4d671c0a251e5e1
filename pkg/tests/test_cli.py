import os

import numpy as np
import pytest

from hazeforge import cli
from hazeforge.imaging import Image, load_image, save_image


@pytest.fixture(scope="module")
def cli_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("clidata") / "toy"
    assert cli.main(["gen-toy", "--out", str(root), "--n-images", "4",
                     "--size", "32", "--seed", "5"]) == 0
    return root


@pytest.fixture(scope="module")
def trained_run(cli_data, tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("clirun")
    cfg = run_dir / "small.cfg"
    cfg.write_text(
        "epochs = 1\nbatch_size = 2\ncrop = 16\nwidth = 8\ngroups = 2\n"
        "tnet_width = 4\ndisc_width = 8\ndc_patch = 5\nval_interval = 1\n"
    )
    code = cli.main(["train", "--config", str(cfg), "--data", str(cli_data),
                     "--out", str(run_dir / "out"), "--seed", "1"])
    assert code == 0
    return run_dir / "out"


class TestGenToy:
    def test_layout_written(self, cli_data, capsys):
        for sub in ("hazy", "clean", "trans", "real", "real_gt"):
            assert len(os.listdir(cli_data / sub)) == 4

    def test_prints_summary(self, tmp_path, capsys):
        cli.main(["gen-toy", "--out", str(tmp_path / "t"), "--n-images", "1",
                  "--size", "32"])
        assert "wrote toy dataset" in capsys.readouterr().out


class TestTrain:
    def test_artifacts(self, trained_run):
        assert (trained_run / "ckpt_final.hzf").exists()
        assert (trained_run / "config.txt").exists()
        log = (trained_run / "metrics.log").read_text()
        assert "loss_total=" in log and "kind=val" in log

    def test_config_snapshot_reparses(self, trained_run):
        from hazeforge.config import load_config

        cfg = load_config(trained_run / "config.txt")
        assert cfg.epochs == 1 and cfg.seed == 1 and cfg.width == 8

    def test_missing_data_dir_fails(self, tmp_path, capsys):
        code = cli.main(["train", "--data", str(tmp_path / "nope"),
                         "--out", str(tmp_path / "out")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestInfer:
    def test_directory_input(self, cli_data, trained_run, tmp_path, capsys):
        out = tmp_path / "dehazed"
        code = cli.main(["infer", "--checkpoint", str(trained_run / "ckpt_final.hzf"),
                         "--input", str(cli_data / "hazy"), "--out", str(out)])
        assert code == 0
        names = sorted(os.listdir(out))
        assert names == sorted(os.listdir(cli_data / "hazy"))
        img = load_image(out / names[0])
        assert img.data.shape == (3, 32, 32)

    def test_single_file_input(self, cli_data, trained_run, tmp_path):
        name = sorted(os.listdir(cli_data / "hazy"))[0]
        out = tmp_path / "one"
        code = cli.main(["infer", "--checkpoint", str(trained_run / "ckpt_final.hzf"),
                         "--input", str(cli_data / "hazy" / name), "--out", str(out)])
        assert code == 0 and (out / name).exists()

    def test_threaded_matches_serial(self, cli_data, trained_run, tmp_path, monkeypatch):
        outs = {}
        for workers in ("1", "4"):
            monkeypatch.setenv("HAZEFORGE_THREADS", workers)
            out = tmp_path / f"w{workers}"
            assert cli.main(["infer", "--checkpoint",
                             str(trained_run / "ckpt_final.hzf"),
                             "--input", str(cli_data / "hazy"),
                             "--out", str(out)]) == 0
            outs[workers] = {n: (out / n).read_bytes() for n in os.listdir(out)}
        assert outs["1"] == outs["4"]

    def test_bad_checkpoint_fails(self, cli_data, tmp_path, capsys):
        bad = tmp_path / "bad.hzf"
        bad.write_bytes(b"JUNKJUNK")
        code = cli.main(["infer", "--checkpoint", str(bad),
                         "--input", str(cli_data / "hazy"),
                         "--out", str(tmp_path / "o")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestEval:
    def test_self_comparison(self, cli_data, capsys):
        code = cli.main(["eval", str(cli_data / "clean"), str(cli_data / "clean")])
        assert code == 0
        out = capsys.readouterr().out
        assert "psnr=inf" in out and "ssim=1" in out
        assert "name=__mean__" in out.splitlines()[-1]

    def test_pair_directories(self, cli_data, capsys):
        code = cli.main(["eval", str(cli_data / "hazy"), str(cli_data / "clean")])
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 5  # 4 pairs + mean

    def test_disjoint_names_fail(self, cli_data, tmp_path, capsys):
        empty = tmp_path / "other"
        empty.mkdir()
        save_image(Image(np.zeros((3, 16, 16))), empty / "different.png")
        code = cli.main(["eval", str(cli_data / "clean"), str(empty)])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestDcp:
    def test_directory_mode(self, cli_data, tmp_path, capsys):
        out = tmp_path / "dcp"
        code = cli.main(["dcp", "--input", str(cli_data / "hazy"),
                         "--out", str(out), "--patch", "15"])
        assert code == 0
        assert sorted(os.listdir(out)) == sorted(os.listdir(cli_data / "hazy"))

    def test_reduces_haze(self, cli_data, tmp_path):
        from hazeforge.dcp import dark_channel

        out = tmp_path / "d"
        out.mkdir()
        name = sorted(os.listdir(cli_data / "hazy"))[0]
        cli.main(["dcp", "--input", str(cli_data / "hazy" / name),
                  "--out", str(out / "x.png"), "--patch", "15"])
        hazy = load_image(cli_data / "hazy" / name)
        dehazed = load_image(out / "x.png")
        assert dark_channel(dehazed, 15).data.mean() < dark_channel(hazy, 15).data.mean()

    def test_missing_input_fails(self, tmp_path, capsys):
        code = cli.main(["dcp", "--input", str(tmp_path / "missing"),
                         "--out", str(tmp_path / "o.png")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


class TestHda:
    def test_single_density(self, cli_data, tmp_path, capsys):
        name = sorted(os.listdir(cli_data / "hazy"))[0]
        out = tmp_path / "re.png"
        code = cli.main(["hda", "--hazy", str(cli_data / "hazy" / name),
                         "--dehazed", str(cli_data / "clean" / name),
                         "--p", "1.2", "--out", str(out)])
        assert code == 0 and out.exists()
        assert "rebuilt=" in capsys.readouterr().out

    def test_sweep_writes_five_files(self, cli_data, tmp_path):
        name = sorted(os.listdir(cli_data / "hazy"))[0]
        out = tmp_path / "sw.png"
        code = cli.main(["hda", "--hazy", str(cli_data / "hazy" / name),
                         "--dehazed", str(cli_data / "clean" / name),
                         "--out", str(out), "--sweep"])
        assert code == 0
        written = sorted(os.listdir(tmp_path))
        assert written == ["sw_p0.5.png", "sw_p0.8.png", "sw_p1.0.png",
                           "sw_p1.2.png", "sw_p1.4.png"]

    def test_density_ordering(self, cli_data, tmp_path):
        # higher p -> heavier haze -> brighter dark channel
        from hazeforge.dcp import dark_channel

        name = sorted(os.listdir(cli_data / "hazy"))[0]
        cli.main(["hda", "--hazy", str(cli_data / "hazy" / name),
                  "--dehazed", str(cli_data / "clean" / name),
                  "--out", str(tmp_path / "s.png"), "--sweep"])
        means = [dark_channel(load_image(tmp_path / f"s_p{p}.png"), 15).data.mean()
                 for p in ("0.5", "1.0", "1.4")]
        assert means[0] <= means[1] <= means[2]

    def test_rejects_nonpositive_p(self, cli_data, tmp_path, capsys):
        name = sorted(os.listdir(cli_data / "hazy"))[0]
        code = cli.main(["hda", "--hazy", str(cli_data / "hazy" / name),
                         "--dehazed", str(cli_data / "clean" / name),
                         "--p", "0", "--out", str(tmp_path / "x.png")])
        assert code == 1
        assert "error:" in capsys.readouterr().err


def test_thread_env_parsing(monkeypatch):
    monkeypatch.setenv("HAZEFORGE_THREADS", "3")
    assert cli._worker_count() == 3
    monkeypatch.setenv("HAZEFORGE_THREADS", "junk")
    assert cli._worker_count() == 1
    monkeypatch.delenv("HAZEFORGE_THREADS")
    assert cli._worker_count() == 1
