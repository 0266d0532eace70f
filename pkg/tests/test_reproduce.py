"""Tests for the figure reproduction dispatcher."""

from pathlib import Path

import pytest

from dendritesim.reproduce import Target, reproduce
from dendritesim.utils import ExitCode


class TestReproduce:
    def test_fig1f(self, tmp_path: Path) -> None:
        result = reproduce(Target.FIG1F, tmp_path)
        assert result.exit_code == ExitCode.SUCCESS
        assert result.files == ["fig1f.csv", "manifest.txt"]
        assert result.warnings == []
        lines = (tmp_path / "fig1f.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("time_s,analytic_v0_0.2,numeric_v0_0.2,analytic_v0_0.4")
        assert len(lines) == 1002
        manifest = (tmp_path / "manifest.txt").read_text(encoding="utf-8")
        assert manifest.startswith("dendritesim v")
        assert "target: fig1f" in manifest

    def test_accepts_target_name(self, tmp_path: Path) -> None:
        assert reproduce("fig1f", tmp_path / "nested").exit_code == ExitCode.SUCCESS
        assert (tmp_path / "nested" / "fig1f.csv").is_file()

    def test_unknown_target(self, tmp_path: Path) -> None:
        result = reproduce("fig9", tmp_path)
        assert result.exit_code == ExitCode.INPUT_ERROR
        assert result.files == []
        assert "Unknown target" in result.warnings[0]

    def test_output_is_bit_identical(self, tmp_path: Path) -> None:
        reproduce(Target.FIG1F, tmp_path / "a")
        reproduce(Target.FIG1F, tmp_path / "b")
        first = (tmp_path / "a" / "fig1f.csv").read_bytes()
        assert first == (tmp_path / "b" / "fig1f.csv").read_bytes()
        assert b"\r\n" in first

    def test_chain_comparison_files(self, tmp_path: Path) -> None:
        result = reproduce(Target.FIG3D, tmp_path)
        assert result.exit_code == ExitCode.SUCCESS
        assert result.files == ["fig3d_passive.csv", "fig3d_active.csv", "manifest.txt"]
        header = (tmp_path / "fig3d_active.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header == "chain,stage,peak_v,t_peak_s"

    @pytest.mark.slow
    def test_integration_files(self, tmp_path: Path) -> None:
        result = reproduce(Target.FIG4, tmp_path)
        assert result.exit_code == ExitCode.SUCCESS
        assert result.warnings == []
        assert result.files == [
            "fig4_trains.csv",
            "fig4_temporal.csv",
            "fig4_spatial.csv",
            "manifest.txt",
        ]
        header = (tmp_path / "fig4_trains.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header == "circuit,pulse,peak_v"

    @pytest.mark.slow
    def test_delay_sweep_files(self, tmp_path: Path) -> None:
        result = reproduce(Target.FIG2, tmp_path)
        assert result.exit_code == ExitCode.SUCCESS
        assert result.warnings == []
        assert result.files == ["fig2_delay.csv", "fig2_saturation.csv", "manifest.txt"]
        lines = (tmp_path / "fig2_saturation.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "polarity,amplitude_v,slope_s_per_ohm,intercept_s,r_squared"
        assert [line.split(",")[0] for line in lines[1:]] == ["n", "p"]

    @pytest.mark.slow
    def test_gain_sweep_files(self, tmp_path: Path) -> None:
        result = reproduce(Target.FIG3, tmp_path)
        assert result.exit_code == ExitCode.SUCCESS
        assert result.warnings == []
        assert result.files == ["fig3_gain.csv", "manifest.txt"]

    @pytest.mark.slow
    def test_burst_files(self, tmp_path: Path) -> None:
        result = reproduce(Target.FIG5, tmp_path)
        assert result.exit_code == ExitCode.SUCCESS
        assert result.warnings == []
        assert result.files == ["fig5_bursts.csv", "manifest.txt"]
        manifest = (tmp_path / "manifest.txt").read_text(encoding="utf-8")
        assert "RingConfig(" in manifest
        assert "warnings:" not in manifest

    @pytest.mark.slow
    def test_localisation_files(self, tmp_path: Path) -> None:
        result = reproduce(Target.FIG6, tmp_path)
        assert result.exit_code == ExitCode.SUCCESS
        assert result.warnings == []
        assert result.files == [
            "fig6_variantA.csv",
            "fig6_variantB.csv",
            "fig6_variantC.csv",
            "fig6_passive.csv",
            "manifest.txt",
        ]
        header = (tmp_path / "fig6_variantA.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header == "separation_s,peak_v"
