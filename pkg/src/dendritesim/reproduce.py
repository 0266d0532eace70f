"""Figure reproduction dispatcher: runs a study, writes its CSVs and a manifest."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .analytic import integrate_free_response, membrane_voltage, solve_segment
from .experiments import (
    ChainConfig,
    Characterisation,
    IntegrationConfig,
    LocalisationConfig,
    PassiveBaselineConfig,
    ResultTable,
    RingConfig,
    SweepConfig,
    Variant,
    curve_peak,
    delay_resistance_fit,
    run_burst_table,
    run_characterisation,
    run_passive_localisation_baseline,
    run_sound_localisation,
)
from .model import FloatArray, Polarity, SegmentParams
from .utils import ExitCode, banner, format_float

logger = logging.getLogger(__name__)

FIG1F_V0 = (0.2, 0.4, 0.6, 0.8, 1.0)


class Target(str, Enum):
    FIG1F = "fig1f"
    FIG2 = "fig2"
    FIG3 = "fig3"
    FIG3D = "fig3d"
    FIG4 = "fig4"
    FIG6 = "fig6"
    FIG5 = "fig5"


@dataclass
class ReproductionResult:
    """Outcome of one reproduction run.

    Acceptance properties that did not hold are listed in ``warnings``; the
    CSVs are still written.
    """

    target: str
    out_dir: str
    files: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    exit_code: ExitCode = ExitCode.SUCCESS


@dataclass
class _Panels:
    tables: dict[str, ResultTable] = field(default_factory=dict)
    configs: list[object] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _curve_table(curve: list[tuple[float, float]]) -> ResultTable:
    return ResultTable(("separation_s", "peak_v"), tuple(curve))


def _fig1f(workers: int) -> _Panels:
    params = SegmentParams.uniform(Polarity.N, 1e3, 1e-6)
    times = np.linspace(0.0, 10e-3, 1001)
    header = ["time_s"]
    columns: list[FloatArray] = [times]
    worst = 0.0
    for v0 in FIG1F_V0:
        analytic = membrane_voltage(solve_segment(params, v0), params, times)
        numeric = integrate_free_response(params, v0, times)[1]
        worst = max(worst, float(np.max(np.abs(analytic - numeric))) / v0)
        header += [f"analytic_v0_{format_float(v0)}", f"numeric_v0_{format_float(v0)}"]
        columns += [analytic, numeric]
    rows = tuple(tuple(float(c[i]) for c in columns) for i in range(times.size))
    panels = _Panels({"fig1f.csv": ResultTable(tuple(header), rows)}, [params])
    if worst > 1e-3:
        panels.warnings.append(f"analytic and numeric responses differ by {worst:.3%} of V0")
    return panels


def _fig2(workers: int) -> _Panels:
    cfg = replace(SweepConfig(), workers=workers)
    table = run_characterisation(Characterisation.DELAY_SWEEP, cfg)
    amplitude = cfg.amplitudes[-1]
    fits: list[tuple[object, ...]] = []
    low_fit: list[str] = []
    for pol in cfg.polarities:
        slope, intercept, r2 = delay_resistance_fit(table, pol, amplitude)
        fits.append((pol.value, amplitude, slope, intercept, r2))
        if r2 < 0.98:
            low_fit.append(f"{pol.value}-type delay/resistance fit has R^2 {r2:.4f} < 0.98")
    return _Panels(
        {
            "fig2_delay.csv": table,
            "fig2_saturation.csv": ResultTable(
                ("polarity", "amplitude_v", "slope_s_per_ohm", "intercept_s", "r_squared"),
                tuple(fits),
            ),
        },
        [cfg],
        low_fit,
    )


def _fig3(workers: int) -> _Panels:
    cfg = replace(SweepConfig(), workers=workers)
    table = run_characterisation(Characterisation.GAIN_SWEEP, cfg)
    panels = _Panels({"fig3_gain.csv": table}, [cfg])
    if not any(g > 1 for g in table.where(polarity=Polarity.N.value).floats("gain")):
        panels.warnings.append("no n-type configuration reached a gain above 1")
    return panels


def _fig3d(workers: int) -> _Panels:
    cfg = ChainConfig()
    table = run_characterisation(Characterisation.CHAIN_COMPARISON, cfg)
    passive = table.where(chain="passive")
    active = table.where(chain="active")
    panels = _Panels({"fig3d_passive.csv": passive, "fig3d_active.csv": active}, [cfg])
    peaks = passive.floats("peak_v")
    if any(b >= a for a, b in zip(peaks, peaks[1:], strict=False)):
        panels.warnings.append("passive chain peaks are not strictly decreasing")
    active_peaks = active.floats("peak_v")
    if active_peaks[-1] < active_peaks[0]:
        panels.warnings.append("active chain attenuates: final stage below first")
    return panels


def _growth(peaks: list[float]) -> float:
    return peaks[-1] / peaks[0] - 1.0


def _fig4(workers: int) -> _Panels:
    cfg = IntegrationConfig()
    trains = run_characterisation(Characterisation.TRAIN_RESPONSE, cfg)
    temporal = run_characterisation(Characterisation.TEMPORAL_INTEGRATION, cfg)
    spatial = run_characterisation(Characterisation.SPATIAL_INTEGRATION, cfg)
    panels = _Panels(
        {"fig4_trains.csv": trains, "fig4_temporal.csv": temporal, "fig4_spatial.csv": spatial},
        [cfg],
    )
    for circuit in ("n", "p", "np"):
        peaks = trains.where(circuit=circuit).floats("peak_v")
        if any(b <= a for a, b in zip(peaks, peaks[1:], strict=False)):
            panels.warnings.append(f"{circuit} train peaks do not accumulate: {peaks}")
    growth = [_growth(temporal.where(period_s=p).floats("peak_v")) for p in cfg.periods]
    if any(b >= a for a, b in zip(growth, growth[1:], strict=False)):
        panels.warnings.append(f"train growth does not fall with period: {growth}")
    if growth[-1] >= 0.05:
        longest = format_float(cfg.periods[-1])
        panels.warnings.append(f"growth at {longest} s period is {growth[-1]:.1%}, not below 5%")
    ratio = spatial.floats("ratio")[0]
    if not 1 < ratio < 2:
        panels.warnings.append(f"simultaneous inputs are not sublinear (ratio {ratio})")
    return panels


def _fig6(workers: int) -> _Panels:
    cfg = replace(LocalisationConfig(), workers=workers)
    baseline_cfg = replace(PassiveBaselineConfig(), workers=workers)
    panels = _Panels(configs=[cfg, baseline_cfg])
    curves = {v: run_sound_localisation(v, cfg) for v in Variant}
    peaks: list[float] = []
    for variant, curve in curves.items():
        panels.tables[f"fig6_variant{variant.value}.csv"] = _curve_table(curve)
        peaks.append(curve_peak(curve)[0])
    if not peaks[0] < peaks[1] < peaks[2]:
        panels.warnings.append(f"detector peaks not ordered A < B < C: {peaks}")
    for variant, at in zip(Variant, peaks, strict=True):
        own = dict(curves[variant])[at]
        beaten = [o.value for o in Variant if o is not variant and dict(curves[o])[at] >= own]
        if beaten:
            panels.warnings.append(
                f"variant {variant.value} does not lead at its peak {at} s: {beaten}"
            )

    family = run_passive_localisation_baseline(cfg=baseline_cfg)
    rows = tuple((r, sep, value) for r, curve in family for sep, value in curve)
    header = ("r_axial_ohm", "separation_s", "peak_v")
    panels.tables["fig6_passive.csv"] = ResultTable(header, rows)
    magnitudes = [curve_peak(curve)[1] for _, curve in family]
    if any(b >= a for a, b in zip(magnitudes, magnitudes[1:], strict=False)):
        panels.warnings.append("passive baseline peaks do not decrease with branch resistance")
    return panels


def _fig5(workers: int) -> _Panels:
    cfg = RingConfig()
    targets = (1, 2, 3)
    table = run_burst_table(cfg, targets)
    panels = _Panels({"fig5_bursts.csv": table}, [cfg])
    for target in targets:
        spikes = table.where(source=f"search>={target}").column("spikes")[0]
        if spikes != target:
            panels.warnings.append(f"no P8 leak gives exactly {target} spikes (got {spikes})")
    return panels


_TARGETS: dict[Target, Callable[[int], _Panels]] = {
    Target.FIG1F: _fig1f,
    Target.FIG2: _fig2,
    Target.FIG3: _fig3,
    Target.FIG3D: _fig3d,
    Target.FIG4: _fig4,
    Target.FIG6: _fig6,
    Target.FIG5: _fig5,
}


def _manifest(target: Target, panels: _Panels) -> str:
    lines = [banner(), f"target: {target.value}", "files:"]
    lines += [f"  {name}" for name in panels.tables]
    lines.append("config:")
    lines += [f"  {cfg!r}" for cfg in panels.configs]
    if panels.warnings:
        lines.append("warnings:")
        lines += [f"  {w}" for w in panels.warnings]
    return "\n".join(lines) + "\n"


def reproduce(
    target: Target | str, out_dir: Path | str, *, workers: int = 4
) -> ReproductionResult:
    """Run one figure's study and write its CSVs plus ``manifest.txt`` into ``out_dir``.

    This is the main entry point for programmatic usage.

    Args:
        target: Figure identifier (``fig1f``, ``fig2``, ...).
        out_dir: Output directory, created if missing.
        workers: Thread-pool size for sweeps.

    Returns:
        ReproductionResult listing written files and any failed acceptance checks.
    """
    out = Path(out_dir)
    try:
        target = Target(target)
    except ValueError:
        return ReproductionResult(
            str(target),
            str(out),
            warnings=[f"Unknown target: {target}"],
            exit_code=ExitCode.INPUT_ERROR,
        )

    result = ReproductionResult(target.value, str(out))
    logger.debug("reproduce %s -> %s", target.value, out)
    try:
        panels = _TARGETS[target](workers)
    except (RuntimeError, ValueError) as e:  # divergence and every model/measurement error
        result.warnings.append(f"{target.value} failed: {e}")
        result.exit_code = ExitCode.SIMULATION_FAILED
        return result

    out.mkdir(parents=True, exist_ok=True)
    for name, table in panels.tables.items():
        (out / name).write_text(table.to_csv(), encoding="utf-8", newline="")
        result.files.append(name)
    (out / "manifest.txt").write_text(_manifest(target, panels), encoding="utf-8")
    result.files.append("manifest.txt")
    result.warnings.extend(panels.warnings)
    for w in panels.warnings:
        logger.warning("%s: %s", target.value, w)
    return result
