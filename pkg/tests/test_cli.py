import numpy as np
import pytest
from PIL import Image

from src.app import build_parser, main
from src.services.config_service import save_run_config
from src.services.image_io import save_image

GOLDEN_PAYLOAD_SHA256 = "ecb700ee2e18e29e7726a73da074429783d8ac1b66e0864142d7a3551f883615"


@pytest.fixture
def workdir(tmp_path, small_config, texture):
    """Small run config, matching weights and a pair of 8-bit frames."""

    config = save_run_config(small_config, tmp_path / "run.json")
    weights = tmp_path / "small.dqbw"
    assert main(["--config", str(config), "init-weights", str(weights)]) == 0

    big = texture(72, 72)
    save_image(big[4:68, 4:68], tmp_path / "f0.png")
    save_image(big[6:70, 1:65], tmp_path / "f1.png")
    return tmp_path, ["--config", str(config), "--weights", str(weights)]


class TestParser:
    def test_subcommands_registered(self):
        parser = build_parser()
        args = parser.parse_args(["--threads", "3", "--seed", "0x10", "check"])
        assert args.command == "check" and args.threads == 3 and args.seed == 16

    @pytest.mark.parametrize(
        "argv", [[], ["nope"], ["--threads", "0", "check"], ["--seed", "-1", "check"], ["check", "fuzz"]]
    )
    def test_usage_errors_exit_two(self, argv):
        with pytest.raises(SystemExit) as info:
            main(argv)
        assert info.value.code == 2


class TestInterpolate:
    def test_writes_frame_of_input_size(self, workdir):
        root, flags = workdir
        out = root / "mid.png"
        assert main([*flags, "interpolate", str(root / "f0.png"), str(root / "f1.png"), str(out)]) == 0
        with Image.open(out) as img:
            assert img.size == (64, 64) and img.mode == "RGB"

    def test_dump_flow_writes_four_maps(self, workdir, capsys):
        root, flags = workdir
        out = root / "mid.png"
        code = main([*flags, "interpolate", str(root / "f0.png"), str(root / "f1.png"), str(out), "--dump-flow"])
        assert code == 0
        for suffix in ("flow_t0", "flow_t1", "occlusion", "occlusion_final"):
            assert (root / f"mid_{suffix}.png").exists()
        printed = capsys.readouterr().out
        assert "mid_occlusion_final.png" in printed and "mid_flow_t1.png" in printed

    def test_unaligned_size_round_trips(self, workdir, texture):
        root, flags = workdir
        save_image(texture(60, 44), root / "a.png")
        save_image(texture(60, 44, phase=0.3), root / "b.png")
        assert main([*flags, "interpolate", str(root / "a.png"), str(root / "b.png"), str(root / "o.png")]) == 0
        with Image.open(root / "o.png") as img:
            assert img.size == (44, 60)

    def test_thread_count_does_not_change_output(self, workdir):
        root, flags = workdir
        frames = [str(root / "f0.png"), str(root / "f1.png")]
        assert main([*flags, "--threads", "1", "interpolate", *frames, str(root / "t1.png")]) == 0
        assert main([*flags, "--threads", "4", "interpolate", *frames, str(root / "t4.png")]) == 0
        assert (root / "t1.png").read_bytes() == (root / "t4.png").read_bytes()

    def test_truth_reports_psnr(self, workdir, capsys):
        root, flags = workdir
        frames = [str(root / "f0.png"), str(root / "f1.png")]
        assert main([*flags, "interpolate", *frames, str(root / "o.png"), "--truth", frames[0]]) == 0
        assert "PSNR" in capsys.readouterr().out

    def test_size_mismatch_exits_two(self, workdir, capsys):
        root, flags = workdir
        save_image(np.zeros((64, 63, 3)), root / "narrow.png")
        code = main([*flags, "interpolate", str(root / "f0.png"), str(root / "narrow.png"), str(root / "o.png")])
        assert code == 2
        assert "error:" in capsys.readouterr().err
        assert not (root / "o.png").exists()

    def test_missing_input_exits_one(self, workdir):
        root, flags = workdir
        code = main([*flags, "interpolate", str(root / "f0.png"), str(root / "gone.png"), str(root / "o.png")])
        assert code == 1

    def test_archive_for_other_pyramid_exits_two(self, workdir):
        root, _flags = workdir
        # default pyramid with the small archive: enhancement shapes disagree
        code = main(["--weights", str(root / "small.dqbw"), "interpolate", str(root / "f0.png"), str(root / "f1.png"), str(root / "o.png")])
        assert code == 2

    def test_corrupt_archive_exits_one(self, workdir):
        root, flags = workdir
        (root / "small.dqbw").write_bytes(b"JUNKJUNKJUNKJUNK")
        code = main([*flags, "interpolate", str(root / "f0.png"), str(root / "f1.png"), str(root / "o.png")])
        assert code == 1


class TestOtherCommands:
    def test_check_exact(self, capsys):
        assert main(["check", "exact"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_bench_csv(self, capsys):
        assert main(["bench", "--op", "warp", "--size", "8x8x4", "--repetitions", "1"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "op,height,width,channels,config,median_ns,throughput_elems_per_s"
        assert len(lines) == 2 and lines[1].startswith("warp,8,8,4,")

    def test_bench_bad_size(self):
        with pytest.raises(SystemExit):
            main(["bench", "--size", "8xx"])

    def test_init_weights_golden(self, tmp_path, capsys):
        assert main(["--seed", "42", "init-weights", str(tmp_path / "w.dqbw")]) == 0
        out = capsys.readouterr().out
        assert GOLDEN_PAYLOAD_SHA256 in out
        assert "(4404229)" in out

    def test_fit_motion_reports_endpoint_error(self, workdir, capsys):
        root, _flags = workdir
        code = main(
            [
                "fit-motion",
                str(root / "f0.png"),
                str(root / "f1.png"),
                "--iterations",
                "30",
                "--truth-flow=-3,2",
                "--out-flow",
                str(root / "fit.png"),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "mean endpoint error" in out and "final loss" in out
        assert (root / "fit.png").exists()

    def test_bad_config_exits_two(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{"pyramid": {"levels": 2}}', encoding="utf-8")
        assert main(["--config", str(path), "check", "exact"]) == 2
        assert "radii" in capsys.readouterr().err

    def test_missing_config_exits_one(self, tmp_path):
        assert main(["--config", str(tmp_path / "absent.json"), "check", "exact"]) == 1
