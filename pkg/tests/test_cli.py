import pandas as pd
import pytest

from app.cli import COMMANDS, build_parser, main
from tests.conftest import SMALL_CONFIG


def _small_flags():
    flags = []
    for key, value in SMALL_CONFIG.items():
        flags += [f"--{key.replace('_', '-')}", str(value)]
    return flags


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_phantom_command(tmp_path, capsys):
    output = tmp_path / "phantom.csv"
    assert main(["phantom", "--output", str(output)]) == 0

    frame = pd.read_csv(output)
    assert list(frame.columns) == ["x", "value"]
    assert len(frame) == 100
    assert str(output) in capsys.readouterr().out


def test_run_command_writes_artifacts(tmp_path, capsys):
    code = main(["run", "--method", "TR", "--output-dir", str(tmp_path), *_small_flags()])
    assert code == 0
    assert (tmp_path / "summary.csv").exists()
    assert "TR [delta_data=4 noise=0%]" in capsys.readouterr().out


def test_flags_override_file_and_arguments(tmp_path):
    config = tmp_path / "experiment.env"
    config.write_text("delta_data=5\nnoise_level=0.2\n")
    code = main(
        [
            "run",
            "--config", str(config),
            "--set", "noise_level=0.1",
            "--method", "TR",
            "--output-dir", str(tmp_path),
            *_small_flags(),
        ]
    )
    assert code == 0
    summary = pd.read_csv(tmp_path / "summary.csv")
    # --delta-data from the flags wins over the file
    assert summary["settings"].tolist() == ["delta_data=4 noise=10%"]


def test_invalid_configuration_exit_code(tmp_path):
    assert main(["run", "-s", "theta=0.1", "-s", "delta_t=0.02", "--output-dir", str(tmp_path)]) == 2


def test_unknown_key_exit_code(tmp_path):
    assert main(["phantom", "--set", "colour=blue"]) == 2


def test_table1_command_and_sweep_alias():
    parser = build_parser()
    assert parser.parse_args(["table1", "--master-seed", "3"]).command == "table1"
    assert parser.parse_args(["sweep", "--variants"]).command == "sweep"
    assert COMMANDS["table1"] is COMMANDS["sweep"]


@pytest.mark.slow
def test_table1_is_reproducible(tmp_path, capsys):
    first, second = tmp_path / "first", tmp_path / "second"
    for output in (first, second):
        code = main(["table1", "--master-seed", "5", "--workers", "1", "--output-dir", str(output), *_small_flags()])
        assert code == 0
    assert "BF-SEEK" in capsys.readouterr().out

    first_files = sorted(p.relative_to(first) for p in first.rglob("*.csv"))
    assert len(first_files) == 1 + 6 * 4 * 2
    assert first_files == sorted(p.relative_to(second) for p in second.rglob("*.csv"))
    for name in first_files:
        assert (first / name).read_bytes() == (second / name).read_bytes()
