# GrateWave/core/experiment_runner.py

import json
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from typing import Callable, Dict, List, Optional

import numpy as np

from core.angular_spectrum import angular_spectrum, count_lobes, default_aperture, sample_aperture
from core.capacity_analysis import (capacity_improvement, capacity_map, capacity_vs_distance,
                                    default_map_grid, mode_analysis)
from core.fading_stats import (empirical_pdf, fit_report, pool_ensembles, ring_ensemble, rms_normalize,
                               sample_hoyt, sample_rician, select_model)
from core.field_maps import SamplingGrid, field_map
from core.geometry import ArrayLayout, RoomGeometry
from core.greens import evaluation_count
from core.scenario import Scenario
from core.wall_models import (PEC, Drywall, DrywallMaterial, FreeSpace, Grating, GratingSpec,
                              drywall_reflection_curve)
from services.export_service import ExportService, artifact_hash
from utils.logger import get_logger

logger = get_logger("core.experiment_runner")

EVALUATION_BUDGET = 1e9
RING_SPACING_FRACTION = 1.0 / 20.0
COMPARE_MIMO_ELEMENTS = 6


class RunState(Enum):
    IDLE = "idle"
    RUNNING = "running"
    EXPORTING = "exporting"
    DONE = "done"
    FAILED = "failed"


@dataclass
class CommandResult:
    """What a command produced: artifact paths, timings and a small summary."""
    command: str
    artifacts: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    summary: Dict = field(default_factory=dict)


class ExperimentRunner:
    COMMANDS = ("field-map", "capacity-map", "capacity-vs-distance", "modes", "fit-stats",
                "angular-spectrum", "compare-walls", "period-sweep", "reflectance-curve")

    def __init__(self, scenario: Scenario, config_json: str, out_dir: str, version: str,
                 workers: int = 1, scale: float = 1.0):
        """
        Args:
            scenario: Validated (and possibly scaled) scenario.
            config_json: Canonical JSON of the scenario file, used in artifact hashes.
            out_dir: Directory receiving the artifacts and manifest.json.
            version: Program version, part of every artifact hash.
            workers: Thread count for grid work; artifacts do not depend on it.
            scale: Scale factor already applied to the scenario (recorded in hashes).
        """
        self.scenario = scenario
        self.config_json = config_json
        self.out_dir = out_dir
        self.version = version
        self.workers = max(1, int(workers))
        self.scale = scale

        self.state = RunState.IDLE
        self.status_callback: Optional[Callable] = None
        self.timings: Dict[str, float] = {}
        self.exporter: Optional[ExportService] = None

    def set_status_callback(self, callback: Callable):
        """Set callback function for status updates."""
        self.status_callback = callback

    def _update_status(self, message: str):
        timestamp = datetime.now().strftime("%H:%M:%S")
        full_message = f"[{timestamp}] {message}"
        logger.info(message)
        if self.status_callback:
            self.status_callback(full_message, self.state)

    @contextmanager
    def _timed(self, label: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[label] = round(time.perf_counter() - start, 6)

    def _guardrail(self, n_points: int, scenario: Optional[Scenario] = None):
        scenario = scenario or self.scenario
        pairs = scenario.tx.element_count * max(1, scenario.rx.element_count)
        estimate = evaluation_count(n_points, scenario.wall, scenario.limits, scenario.room) * pairs
        if estimate > EVALUATION_BUDGET:
            logger.warning(f"⚠️ About {estimate:.2e} Green's evaluations requested "
                           f"(budget {EVALUATION_BUDGET:.0e}); consider --scale")

    def run(self, command: str) -> CommandResult:
        """
        Runs one command and writes its artifacts plus manifest.json.

        On any failure the files written so far are removed and the error is re-raised.
        """
        if command not in self.COMMANDS:
            raise ValueError(f"unknown command {command!r}; expected one of {self.COMMANDS}")
        handler = getattr(self, "_cmd_" + command.replace("-", "_"))
        run_hash = artifact_hash(f"{self.config_json}|scale={self.scale!r}", command,
                                 self.scenario.seed, self.version)
        self.exporter = ExportService(self.out_dir, run_hash)
        self.timings = {}
        result = CommandResult(command=command)

        self.state = RunState.RUNNING
        self._update_status(f"🚀 {command} on {self.scenario.wall.tag} walls "
                            f"({self.workers} worker{'s' if self.workers > 1 else ''})")
        try:
            with self._timed("total"):
                result.summary = handler()
            self.state = RunState.EXPORTING
            result.artifacts = list(self.exporter.written)
            result.timings = dict(self.timings)
            self.exporter.write_manifest({
                "command": command,
                "version": self.version,
                "seed": self.scenario.seed,
                "scale": self.scale,
                "workers": self.workers,
                "config": json.loads(self.config_json),
                "timings_s": self.timings,
                "summary": result.summary,
            })
        except Exception:
            self.state = RunState.FAILED
            self._update_status(f"❌ {command} failed; removing partial artifacts")
            self.exporter.cleanup()
            raise
        self.state = RunState.DONE
        self._update_status(f"✅ {command} finished in {self.timings['total']:.2f}s, "
                            f"{len(result.artifacts)} artifacts")
        return result

    def get_current_state(self) -> RunState:
        return self.state

    # --- Commands ---------------------------------------------------------------

    def _path(self, command: str, ext: str, wall: Optional[str] = None) -> str:
        return self.exporter.artifact_path(command, wall or self.scenario.wall.tag, ext)

    @staticmethod
    def _extent(grid: SamplingGrid) -> Dict:
        return {"x_m": [float(grid.x[0]), float(grid.x[-1])], "y_m": [float(grid.y[0]), float(grid.y[-1])]}

    def _cmd_field_map(self) -> Dict:
        scenario = self.scenario
        grid = SamplingGrid.covering(scenario.room, scenario.grid_spacing)
        self._guardrail(grid.shape[0] * grid.shape[1])
        with self._timed("field_map"):
            result = field_map(scenario, None, grid, self.workers)
        points = grid.points().reshape(-1, 2)
        values = result.values.ravel()
        masked = result.masked.ravel()
        self.exporter.write_csv(
            self._path("field-map", "csv"), ("x_m", "y_m", "re", "im", "magnitude", "masked"),
            ((p[0], p[1], v.real, v.imag, abs(v), m) for p, v, m in zip(points, values, masked)))
        self.exporter.write_pgm(self._path("field-map", "pgm"), result.magnitude, result.masked,
                                self._extent(grid))
        return {"points": int(len(points)), "masked": int(np.count_nonzero(masked))}

    def _cmd_capacity_map(self) -> Dict:
        scenario = self.scenario
        grid = default_map_grid(scenario)
        self._guardrail(grid.shape[0] * grid.shape[1])
        with self._timed("capacity_map"):
            cmap = capacity_map(scenario, grid, self.workers)
        points = grid.points().reshape(-1, 2)
        self.exporter.write_csv(
            self._path("capacity-map", "csv"), ("x_m", "y_m", "capacity_bps_hz", "masked"),
            ((p[0], p[1], c, m) for p, c, m in zip(points, cmap.capacity.ravel(), cmap.masked.ravel())))
        self.exporter.write_pgm(self._path("capacity-map", "pgm"), cmap.capacity, cmap.masked,
                                self._extent(grid))
        summary = dict(cmap.metadata)
        summary["mean_capacity_bps_hz"] = cmap.mean_capacity
        self.exporter.write_json(self._path("capacity-map", "json"), summary)
        return summary

    def _cmd_capacity_vs_distance(self) -> Dict:
        scenario = self.scenario
        distances = scenario.analysis.distances
        self._guardrail(len(distances))
        with self._timed("capacity_vs_distance"):
            curve = capacity_vs_distance(scenario, workers=self.workers)
        wavelength = scenario.wavelength
        self.exporter.write_csv(
            self._path("capacity-vs-distance", "csv"),
            ("distance_m", "distance_lambda", "capacity_bps_hz", "masked"),
            ((d, d / wavelength, c, m) for d, c, m in zip(curve.distances, curve.capacity, curve.masked)))
        return {"theta_tr_deg": math.degrees(curve.theta_tr), "points": int(len(curve.distances)),
                "masked": int(np.count_nonzero(curve.masked))}

    def _cmd_modes(self) -> Dict:
        self._guardrail(len(self.scenario.analysis.distances))
        with self._timed("modes"):
            snapshots = mode_analysis(self.scenario, workers=self.workers)
        self.exporter.write_json(self._path("modes", "json"), [s.to_dict() for s in snapshots])
        return {"distances": len(snapshots),
                "max_useful_modes": max((s.useful_modes for s in snapshots), default=0)}

    def _ring_ensemble(self, room_size: float):
        scenario = self.scenario
        room = self.scenario.room
        pooled_room = RoomGeometry(room_size, room_size, room.frequency)
        # Ring statistics are taken around a single line source at the array center.
        tx = ArrayLayout(center=(scenario.tx.center[0] * room_size / room.length_x,
                                 scenario.tx.center[1] * room_size / room.length_y),
                         element_count=1, spacing=0.0)
        analysis = scenario.analysis
        limits = replace(scenario.limits, artificial_loss=analysis.ring_loss)
        pooled = replace(scenario, room=pooled_room, tx=tx, limits=limits)
        spacing = min(scenario.grid_spacing, RING_SPACING_FRACTION * scenario.wavelength)
        grid = SamplingGrid.around(tx.center, analysis.ring_r_max, spacing)
        points = grid.points()
        radius = np.hypot(points[..., 0] - tx.center[0], points[..., 1] - tx.center[1])
        outside_ring = (radius < analysis.ring_r_min) | (radius > analysis.ring_r_max)
        self._guardrail(int(np.count_nonzero(~outside_ring)), pooled)
        result = field_map(pooled, None, grid, self.workers, exclude=outside_ring)
        samples = ring_ensemble(result, tx.center, analysis.ring_r_min, analysis.ring_r_max)
        return rms_normalize(samples, {
            "room_size_m": room_size, "center": list(tx.center), "r_min": analysis.ring_r_min,
            "r_max": analysis.ring_r_max, "wall": scenario.wall.tag,
        })

    def _cmd_fit_stats(self) -> Dict:
        scenario = self.scenario
        analysis = scenario.analysis
        if analysis.stats_source == "synthetic":
            rng = np.random.default_rng(scenario.seed)
            sampler = sample_rician if analysis.synthetic_model == "rician" else sample_hoyt
            samples = sampler(analysis.synthetic_samples, analysis.synthetic_parameter, 1.0, rng)
            ensemble = rms_normalize(samples, {"synthetic_model": analysis.synthetic_model,
                                               "synthetic_parameter": analysis.synthetic_parameter,
                                               "seed": scenario.seed})
            label = f"synthetic-{analysis.synthetic_model}"
        else:
            sizes = analysis.pooled_room_sizes or (scenario.room.length_x,)
            with self._timed("ring_fields"):
                ensemble = pool_ensembles([self._ring_ensemble(size) for size in sizes])
            label = scenario.wall.tag

        with self._timed("fit"):
            fit = select_model(ensemble)
        pdf = empirical_pdf(ensemble, analysis.bins)
        report = fit_report(ensemble, fit, label, analysis.bins)
        self.exporter.write_json(self._path("fit-stats", "json", label), report)
        self.exporter.write_csv(
            self._path("fit-stats", "csv", label), ("bin_left", "bin_right", "density"),
            zip(pdf.bin_edges[:-1], pdf.bin_edges[1:], pdf.densities))
        return report

    def _cmd_angular_spectrum(self) -> Dict:
        scenario = self.scenario
        start, end, n = default_aperture(scenario)
        self._guardrail(2 * n)
        with self._timed("aperture"):
            aperture = sample_aperture(scenario, None, start, end, n, self.workers)
        spectrum = angular_spectrum(aperture, scenario.analysis.window, scenario.analysis.zero_pad)
        self.exporter.write_csv(self._path("angular-spectrum", "csv"), ("sin_theta", "magnitude"),
                                zip(spectrum.sin_theta, spectrum.magnitude))
        metadata = dict(spectrum.metadata)
        metadata["aperture"] = "parallel to the x = L_x wall"
        metadata["lobes_above_10pct"] = count_lobes(spectrum, 0.1)
        self.exporter.write_json(self._path("angular-spectrum", "json"), metadata)
        return metadata

    def _grating_spec(self) -> GratingSpec:
        if isinstance(self.scenario.wall, Grating):
            return self.scenario.wall.spec
        return GratingSpec(period=2.0 * self.scenario.wavelength)

    def _material(self) -> DrywallMaterial:
        wall = self.scenario.wall
        if isinstance(wall, Drywall):
            return wall.material
        if isinstance(wall, Grating):
            return wall.spec.dielectric
        return DrywallMaterial()

    def _mean_improvements(self, scenario: Scenario, walls: Dict[str, object], grid: SamplingGrid,
                           baseline) -> Dict[str, Dict[str, float]]:
        results = {}
        for name, wall in walls.items():
            with self._timed(f"map_{name}_{scenario.tx.element_count}x{scenario.rx.element_count}"):
                cmap = capacity_map(scenario.with_wall(wall), grid, self.workers)
            improvement = capacity_improvement(cmap, baseline)
            results[name] = {"delta_c_mean": improvement.mean, "mean_capacity": cmap.mean_capacity,
                             "points": improvement.n_points}
        return results

    def _cmd_compare_walls(self) -> Dict:
        scenario = self.scenario
        wavelength = scenario.wavelength

        def resized(layout: ArrayLayout, count: int) -> ArrayLayout:
            spacing = layout.spacing if layout.element_count > 1 else 0.5 * wavelength
            return replace(layout, element_count=count, spacing=spacing if count > 1 else 0.0)

        def mimo_count(layout: ArrayLayout) -> int:
            return layout.element_count if layout.element_count > 1 else COMPARE_MIMO_ELEMENTS

        setups = {
            "siso": replace(scenario, tx=resized(scenario.tx, 1), rx=resized(scenario.rx, 1)),
            "mimo": replace(scenario, tx=resized(scenario.tx, mimo_count(scenario.tx)),
                            rx=resized(scenario.rx, mimo_count(scenario.rx))),
        }
        walls = {"drywall": Drywall(self._material()), "grating": Grating(self._grating_spec()), "pec": PEC()}
        grid = default_map_grid(setups["mimo"])
        self._guardrail(grid.shape[0] * grid.shape[1] * len(walls), setups["mimo"])

        bars = {}
        for mode, setup in setups.items():
            baseline = capacity_map(setup.with_wall(FreeSpace()), grid, self.workers)
            bars[mode] = self._mean_improvements(setup, walls, grid, baseline)
            bars[mode]["free-space"] = {"delta_c_mean": 0.0, "mean_capacity": baseline.mean_capacity,
                                        "points": int(np.count_nonzero(~baseline.masked))}
            self._update_status(f"📊 {mode.upper()}: " + ", ".join(
                f"{name} {bars[mode][name]['delta_c_mean']:+.3f}" for name in walls))

        spreads = {mode: bars[mode]["pec"]["delta_c_mean"] - bars[mode]["drywall"]["delta_c_mean"]
                   for mode in bars}
        summary = {"bars": bars, "spreads": spreads, "grating_period_m": self._grating_spec().period,
                   "grid_points": int(grid.shape[0] * grid.shape[1])}
        self.exporter.write_json(self._path("compare-walls", "json", "all"), summary)
        self.exporter.write_csv(
            self._path("compare-walls", "csv", "all"), ("mode", "wall", "delta_c_mean", "mean_capacity_bps_hz"),
            ((mode, name, bars[mode][name]["delta_c_mean"], bars[mode][name]["mean_capacity"])
             for mode in bars for name in ("drywall", "grating", "pec")))
        return summary

    def _cmd_period_sweep(self) -> Dict:
        scenario = self.scenario
        grid = default_map_grid(scenario)
        periods = scenario.analysis.periods
        self._guardrail(grid.shape[0] * grid.shape[1] * (len(periods) + 1))
        with self._timed("map_drywall"):
            reference = capacity_map(scenario.with_wall(Drywall(self._material())), grid, self.workers)

        base = self._grating_spec()
        rows = []
        for period in periods:
            wall = Grating(replace(base, period=period))
            with self._timed(f"map_p{period / scenario.wavelength:g}"):
                cmap = capacity_map(scenario.with_wall(wall), grid, self.workers)
            improvement = capacity_improvement(cmap, reference)
            rows.append((period, period / scenario.wavelength, improvement.mean, cmap.mean_capacity))
            self._update_status(f"📊 p = {period / scenario.wavelength:g} lambda: "
                                f"delta C vs drywall {improvement.mean:+.4f}")

        self.exporter.write_csv(self._path("period-sweep", "csv", "grating"),
                                ("period_m", "period_lambda", "delta_c_vs_drywall", "mean_capacity_bps_hz"), rows)
        return {"periods_lambda": [r[1] for r in rows], "delta_c_vs_drywall": [r[2] for r in rows],
                "drywall_mean_capacity": reference.mean_capacity}

    def _cmd_reflectance_curve(self) -> Dict:
        scenario = self.scenario
        curve = drywall_reflection_curve(self._material(), scenario.room, scenario.analysis.reflectance_angles)
        self.exporter.write_csv(
            self._path("reflectance-curve", "csv", "drywall"), ("theta_deg", "magnitude", "phase_rad"),
            zip(np.degrees(curve.theta), curve.magnitude, curve.phase))
        return {"angles": int(len(curve.theta)), "normal_incidence_magnitude": float(curve.magnitude[0])}
