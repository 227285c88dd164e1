# GrateWave/utils/config_manager.py

import json
import math
import os
import re
from dataclasses import replace
from typing import Any, Dict, Iterable, Optional, Tuple

from core.exceptions import (CoefficientValidationError, ConfigurationError, GeometryError,
                             ScenarioParseError)
from core.geometry import ArrayLayout, RoomGeometry
from core.mimo import PowerBudget
from core.scenario import AnalysisSettings, Scenario
from core.wall_models import (PEC, WALL_TAGS, Drywall, DrywallMaterial, FreeSpace, Grating, GratingSpec,
                              KirchhoffApprox, PathTraceLimits, load_coefficient_table)
from utils.logger import get_logger

logger = get_logger("utils.config_manager")

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DEFAULT_SCENARIO = os.path.join(PROJECT_ROOT, "assets", "scenarios", "default.json")
DEFAULT_FREQUENCY = 2.4e9

_LAMBDA_LENGTH = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*lambda\s*$")

_SECTIONS = {
    "": {"frequency", "room", "wall", "tx", "rx", "power", "limits", "grid_spacing", "seed", "current", "analysis"},
    "room": {"length_x", "length_y"},
    "tx": {"center", "elements", "spacing", "orientation_deg"},
    "rx": {"center", "elements", "spacing", "orientation_deg"},
    "power": {"p_tx", "p_noise"},
    "limits": {"max_bounces", "max_image_order", "artificial_loss"},
    "material": {"eps_real", "loss_tangent", "thickness", "mu_rel"},
    "analysis": {"distances", "theta_tr_deg", "ring_r_min", "ring_r_max", "bins", "pooled_room_sizes",
                 "periods", "aperture_samples", "aperture_offset", "window", "zero_pad",
                 "reflectance_angles", "map_points", "stats_source", "synthetic_model",
                 "synthetic_parameter", "synthetic_samples", "ring_loss"},
}


class ConfigManager:
    """
    Reads a JSON scenario file and turns it into typed simulation objects.

    Lengths are meters when given as numbers, or wavelengths when given as
    strings such as "5lambda" or "0.5lambda".
    """

    def __init__(self, config_file: Optional[str] = None):
        self.config_file = config_file or DEFAULT_SCENARIO
        if not os.path.exists(self.config_file):
            raise ScenarioParseError(f"scenario file not found: {self.config_file}")
        with open(self.config_file, "r", encoding="utf-8") as handle:
            self.text = handle.read()
        try:
            self.config = json.loads(self.text)
        except json.JSONDecodeError as exc:
            raise ScenarioParseError(exc.msg, line=exc.lineno, column=exc.colno) from exc
        if not isinstance(self.config, dict):
            raise ScenarioParseError("top level must be an object")
        self._check_keys(self.config, "")
        self.frequency = self._number(self.config.get("frequency", DEFAULT_FREQUENCY), "frequency")
        if not self.frequency > 0:
            raise ScenarioParseError("must be positive", field="frequency")
        self.wavelength = RoomGeometry(1.0, 1.0, self.frequency).wavelength

    # --- Field helpers ---------------------------------------------------------

    @staticmethod
    def _check_keys(section: Dict, name: str, allowed: Optional[Iterable[str]] = None):
        allowed = set(allowed if allowed is not None else _SECTIONS[name])
        for key in section:
            if key not in allowed:
                raise ScenarioParseError(f"unknown key (expected one of {sorted(allowed)})",
                                         field=f"{name}.{key}" if name else key)

    def _section(self, name: str, required: bool = True) -> Dict:
        section = self.config.get(name)
        if section is None:
            if required:
                raise ScenarioParseError("missing section", field=name)
            return {}
        if not isinstance(section, dict):
            raise ScenarioParseError("must be an object", field=name)
        return section

    @staticmethod
    def _number(value: Any, field: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioParseError(f"expected a number, got {value!r}", field=field)
        return float(value)

    @staticmethod
    def _integer(value: Any, field: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioParseError(f"expected an integer, got {value!r}", field=field)
        return int(value)

    def length(self, value: Any, field: str) -> float:
        """Meters from a number or a 'lambda'-suffixed string."""
        if isinstance(value, str):
            match = _LAMBDA_LENGTH.match(value)
            if not match:
                raise ScenarioParseError(f"cannot read length {value!r}; use meters or e.g. '5lambda'",
                                         field=field)
            factor = float(match.group(1)) if match.group(1) else 1.0
            return factor * self.wavelength
        return self._number(value, field)

    def _lengths(self, values: Any, field: str) -> Tuple[float, ...]:
        if isinstance(values, dict):
            self._check_keys(values, field, {"start", "stop", "step"})
            start = self.length(values.get("start"), f"{field}.start")
            stop = self.length(values.get("stop"), f"{field}.stop")
            step = self.length(values.get("step"), f"{field}.step")
            if not step > 0:
                raise ScenarioParseError("step must be positive", field=f"{field}.step")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return tuple(start + i * step for i in range(max(count, 0)))
        if not isinstance(values, list):
            raise ScenarioParseError("expected a list of lengths or {start, stop, step}", field=field)
        return tuple(self.length(v, f"{field}[{i}]") for i, v in enumerate(values))

    # --- Typed getters ---------------------------------------------------------

    def get_room(self) -> RoomGeometry:
        section = self._section("room")
        self._check_keys(section, "room")
        try:
            return RoomGeometry(self.length(section.get("length_x"), "room.length_x"),
                                self.length(section.get("length_y"), "room.length_y"), self.frequency)
        except GeometryError as exc:
            raise ScenarioParseError(str(exc), field="room") from exc

    def _material(self, data: Any, field: str) -> DrywallMaterial:
        if data is None:
            return DrywallMaterial()
        if not isinstance(data, dict):
            raise ScenarioParseError("must be an object", field=field)
        self._check_keys(data, field, _SECTIONS["material"])
        defaults = DrywallMaterial()
        try:
            return DrywallMaterial(
                eps_real=self._number(data.get("eps_real", defaults.eps_real), f"{field}.eps_real"),
                loss_tangent=self._number(data.get("loss_tangent", defaults.loss_tangent), f"{field}.loss_tangent"),
                thickness=self.length(data.get("thickness", defaults.thickness), f"{field}.thickness"),
                mu_rel=self._number(data.get("mu_rel", defaults.mu_rel), f"{field}.mu_rel"),
            )
        except ConfigurationError as exc:
            raise ScenarioParseError(str(exc), field=field) from exc

    def _coefficients(self, value: Any):
        if value is None or value == KirchhoffApprox.name:
            return KirchhoffApprox()
        if isinstance(value, dict) and set(value) == {"table"} and isinstance(value["table"], str):
            path = value["table"]
            if not os.path.isabs(path):
                path = os.path.join(os.path.dirname(os.path.abspath(self.config_file)), path)
            try:
                return load_coefficient_table(path)
            except CoefficientValidationError as exc:
                raise ScenarioParseError(str(exc), field="wall.coefficients") from exc
        raise ScenarioParseError("expected 'kirchhoff' or {\"table\": <path>}", field="wall.coefficients")

    def get_wall(self):
        """Wall model from the `wall` section, keyed by its `type` tag."""
        section = self._section("wall")
        tag = section.get("type")
        if tag not in WALL_TAGS:
            raise ScenarioParseError(f"unknown wall tag {tag!r}; expected one of {list(WALL_TAGS)}",
                                     field="wall.type")
        if tag == FreeSpace.tag:
            self._check_keys(section, "wall", {"type"})
            return FreeSpace()
        if tag == PEC.tag:
            self._check_keys(section, "wall", {"type"})
            return PEC()
        if tag == Drywall.tag:
            self._check_keys(section, "wall", {"type", "material"})
            return Drywall(self._material(section.get("material"), "wall.material"))

        self._check_keys(section, "wall", {"type", "period", "pec_duty", "max_order", "material", "coefficients"})
        if "period" not in section:
            raise ScenarioParseError("grating walls need a period", field="wall.period")
        try:
            spec = GratingSpec(
                period=self.length(section["period"], "wall.period"),
                pec_duty=self._number(section.get("pec_duty", 0.5), "wall.pec_duty"),
                dielectric=self._material(section.get("material"), "wall.material"),
                coeff_source=self._coefficients(section.get("coefficients")),
                max_order=self._integer(section.get("max_order", 3), "wall.max_order"),
            )
        except ConfigurationError as exc:
            raise ScenarioParseError(str(exc), field="wall") from exc
        return Grating(spec)

    def get_array(self, name: str) -> ArrayLayout:
        section = self._section(name)
        self._check_keys(section, name)
        center = section.get("center")
        if not isinstance(center, list) or len(center) != 2:
            raise ScenarioParseError("expected [x, y]", field=f"{name}.center")
        try:
            return ArrayLayout(
                center=(self.length(center[0], f"{name}.center[0]"), self.length(center[1], f"{name}.center[1]")),
                element_count=self._integer(section.get("elements", 1), f"{name}.elements"),
                spacing=self.length(section.get("spacing", 0.0), f"{name}.spacing"),
                orientation=math.radians(self._number(section.get("orientation_deg", 0.0), f"{name}.orientation_deg")),
            )
        except GeometryError as exc:
            raise ScenarioParseError(str(exc), field=name) from exc

    def get_power_budget(self) -> PowerBudget:
        section = self._section("power", required=False)
        self._check_keys(section, "power")
        defaults = PowerBudget()
        try:
            return PowerBudget(p_tx=self._number(section.get("p_tx", defaults.p_tx), "power.p_tx"),
                               p_noise=self._number(section.get("p_noise", defaults.p_noise), "power.p_noise"))
        except ConfigurationError as exc:
            raise ScenarioParseError(str(exc), field="power") from exc

    def get_limits(self) -> PathTraceLimits:
        section = self._section("limits", required=False)
        self._check_keys(section, "limits")
        defaults = PathTraceLimits()
        try:
            return PathTraceLimits(
                max_bounces=self._integer(section.get("max_bounces", defaults.max_bounces), "limits.max_bounces"),
                max_image_order=self._integer(section.get("max_image_order", defaults.max_image_order),
                                              "limits.max_image_order"),
                artificial_loss=self._number(section.get("artificial_loss", defaults.artificial_loss),
                                             "limits.artificial_loss"),
            )
        except ConfigurationError as exc:
            raise ScenarioParseError(str(exc), field="limits") from exc

    def get_analysis(self, room: RoomGeometry) -> AnalysisSettings:
        """Analysis settings; anything not given falls back to AnalysisSettings.defaults."""
        section = self._section("analysis", required=False)
        self._check_keys(section, "analysis")
        settings = AnalysisSettings.defaults(self.wavelength, min(room.length_x, room.length_y))
        values: Dict[str, Any] = {}
        for key in ("distances", "pooled_room_sizes", "periods"):
            if key in section:
                values[key] = self._lengths(section[key], f"analysis.{key}")
        for key in ("ring_r_min", "ring_r_max", "aperture_offset"):
            if key in section:
                values[key] = self.length(section[key], f"analysis.{key}")
        for key in ("bins", "aperture_samples", "zero_pad", "reflectance_angles", "map_points", "synthetic_samples"):
            if key in section:
                values[key] = self._integer(section[key], f"analysis.{key}")
        for key in ("window", "stats_source", "synthetic_model"):
            if key in section:
                if not isinstance(section[key], str):
                    raise ScenarioParseError("expected a string", field=f"analysis.{key}")
                values[key] = section[key]
        for key in ("synthetic_parameter", "ring_loss"):
            if key in section:
                values[key] = self._number(section[key], f"analysis.{key}")
        if "theta_tr_deg" in section:
            values["theta_tr"] = math.radians(self._number(section["theta_tr_deg"], "analysis.theta_tr_deg"))
        return replace(settings, **values)

    def build_scenario(self) -> Scenario:
        room = self.get_room()
        scenario = Scenario(
            room=room,
            wall=self.get_wall(),
            tx=self.get_array("tx"),
            rx=self.get_array("rx"),
            budget=self.get_power_budget(),
            limits=self.get_limits(),
            grid_spacing=self.length(self.config.get("grid_spacing", "0.5lambda"), "grid_spacing"),
            seed=self._integer(self.config.get("seed", 0), "seed"),
            current=self._number(self.config.get("current", 1.0), "current"),
            analysis=self.get_analysis(room),
        )
        return scenario.validate()

    def canonical_json(self) -> str:
        """The parsed file re-serialized with sorted keys, used for artifact hashing."""
        return json.dumps(self.config, sort_keys=True, separators=(",", ":"))


def load_scenario(path: Optional[str] = None) -> Scenario:
    """
    Loads and validates a scenario; no path means the bundled default.

    Raises:
        ScenarioParseError: invalid JSON (with line and column) or a malformed field.
        ScenarioValidationError: a cross-field constraint such as `rx.center` fails.
    """
    manager = ConfigManager(path)
    scenario = manager.build_scenario()
    logger.debug(f"✅ Loaded scenario {manager.config_file} (wall={scenario.wall.tag})")
    return scenario


if __name__ == "__main__":
    manager = ConfigManager()
    scenario = manager.build_scenario()
    print(f"Scenario: {manager.config_file}")
    print(f"  room {scenario.room.length_x / manager.wavelength:g} x {scenario.room.length_y / manager.wavelength:g} lambda")
    print(f"  wall {scenario.wall.tag}, tx {scenario.tx.element_count} elements, rx {scenario.rx.element_count}")
