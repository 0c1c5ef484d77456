"""Scenario configuration: defaults, validation, YAML round trip and digest."""
import dataclasses
import hashlib
import json
from dataclasses import dataclass

import numpy as np
import yaml

from .channel import GEO_SLANT_RANGE_KM, LinkParams
from .geometry import DEFAULT_OVERLAP_FACTOR
from .framing import ModcodTable, default_modcod_table
from .impairments import PROFILES, ImpairmentStats

MODES = ("benchmark4", "precoding1")
MODE_COLOURS = {"benchmark4": 4, "precoding1": 1}
# per-mode columns of the link parameter table: (bandwidth per beam, saturated
# power per beam/polarization, carriers (polarizations) per beam)
MODE_DEFAULTS = {
    "benchmark4": {"bandwidth_hz": 250e6, "sat_power_w": 100.0, "layers_per_beam": 1},
    "precoding1": {"bandwidth_hz": 500e6, "sat_power_w": 50.0, "layers_per_beam": 2},
}
DEFAULT_LOADS_GBPS = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)
CUSTOM_KEYS = ("threshold_db", "outdated_phase_std_deg", "main_amp_mean", "main_amp_std",
               "main_phase_mean", "main_phase_std", "intf_amp_mean", "intf_amp_std",
               "intf_phase_mean", "intf_phase_std")

# named presets selectable with --scenario
SCENARIOS = {
    "benchmark": {"mode": "benchmark4", "colours": 4},
    "single-ideal": {"mode": "precoding1", "colours": 1, "gw_count": 1, "impairments": "ideal"},
    "single-real": {"mode": "precoding1", "colours": 1, "gw_count": 1, "impairments": "real"},
    "multi-ideal": {"mode": "precoding1", "colours": 1, "gw_count": 9, "impairments": "ideal"},
    "multi-real": {"mode": "precoding1", "colours": 1, "gw_count": 9, "impairments": "real"},
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    mode: str = "benchmark4"
    colours: int = 4
    gw_count: int = 1
    impairments: str = "ideal"
    custom_impairments: dict = None
    scheduler: str = "fair"

    n_beams: int = 63
    users_per_beam: int = 1000
    radius_3db_km: float = 117.6
    overlap_factor: float = DEFAULT_OVERLAP_FACTOR
    peak_gain_dbi: float = 52.0
    sidelobe_floor_db: float = 25.0
    feed_spacing_m: float = 0.1

    frequency_ghz: float = 20.0
    bandwidth_hz: float = None
    sat_power_w: float = None
    layers_per_beam: int = None
    obo_db: float = 2.0
    rolloff: float = 0.2
    terminal_gt_dbk: float = 16.9
    slant_range_km: float = GEO_SLANT_RANGE_KM
    path_loss_db: float = None
    attenuation_db: float = 0.0

    group_size: int = 5
    codeword_bits: int = 64800
    bundle_symbols: int = 64800
    modcod_table: str = None
    regularization_scale: float = 1.0

    duty_cycle: float = 0.5
    mean_on_epochs: float = 20.0
    loads_gbps: tuple = DEFAULT_LOADS_GBPS
    epochs: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode: must be one of {MODES}, got {self.mode!r}")
        d = MODE_DEFAULTS[self.mode]
        for k, v in d.items():
            if getattr(self, k) is None:
                object.__setattr__(self, k, v)
        object.__setattr__(self, "loads_gbps", tuple(float(x) for x in self.loads_gbps))
        validate(self)

    def replace(self, **kw):
        """Copy with overrides. Mode-dependent link fields keep their values;
        use ``scenario_config`` to switch mode with fresh defaults."""
        return dataclasses.replace(self, **kw)

    @property
    def is_precoding(self):
        return self.mode == "precoding1"

    def link_params(self):
        return LinkParams(bandwidth_hz=self.bandwidth_hz, sat_power_w=self.sat_power_w,
                          frequency_ghz=self.frequency_ghz, rolloff=self.rolloff, obo_db=self.obo_db,
                          terminal_gt_dbk=self.terminal_gt_dbk, peak_sat_gain_dbi=self.peak_gain_dbi,
                          slant_range_km=self.slant_range_km, path_loss_db=self.path_loss_db)

    def impairment_stats(self):
        if self.impairments != "custom":
            return PROFILES[self.impairments]
        c = self.custom_impairments
        return ImpairmentStats(
            threshold_db=float(c["threshold_db"]),
            outdated_phase_std_deg=float(c["outdated_phase_std_deg"]),
            main_amp=(float(c["main_amp_mean"]), float(c["main_amp_std"])),
            main_phase=(float(c["main_phase_mean"]), float(c["main_phase_std"])),
            intf_amp=(float(c["intf_amp_mean"]), float(c["intf_amp_std"])),
            intf_phase=(float(c["intf_phase_mean"]), float(c["intf_phase_std"])),
        )

    def modcod(self):
        return ModcodTable.from_csv(self.modcod_table) if self.modcod_table else default_modcod_table()

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["loads_gbps"] = list(self.loads_gbps)
        return d

    def digest(self):
        """SHA-256 over the canonical JSON form; stable for equal configs."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


FIELD_NAMES = tuple(f.name for f in dataclasses.fields(ScenarioConfig))


def validate(c):
    def need(cond, key, msg):
        if not cond:
            raise ConfigError(f"{key}: {msg}")

    need(c.mode in MODES, "mode", f"must be one of {MODES}, got {c.mode!r}")
    need(c.colours == MODE_COLOURS[c.mode], "colours",
         f"mode {c.mode} requires colours={MODE_COLOURS[c.mode]}, got {c.colours}")
    need(c.impairments in ("ideal", "real", "custom"), "impairments", "must be ideal, real or custom")
    if c.impairments == "custom":
        ci = c.custom_impairments
        need(isinstance(ci, dict), "custom_impairments", "required when impairments=custom")
        missing = set(CUSTOM_KEYS) - set(ci)
        extra = set(ci) - set(CUSTOM_KEYS)
        need(not missing, "custom_impairments", f"missing keys {sorted(missing)}")
        need(not extra, "custom_impairments", f"unknown keys {sorted(extra)}")
        try:
            c.impairment_stats()
        except ValueError as exc:
            raise ConfigError(f"custom_impairments: {exc}") from None
    else:
        need(c.custom_impairments is None, "custom_impairments", "only allowed with impairments=custom")
    need(c.scheduler in ("fair", "random"), "scheduler", "must be fair or random")
    need(isinstance(c.gw_count, int) and c.gw_count >= 1, "gw_count", "must be a positive integer")
    need(c.n_beams >= 1 and c.n_beams % c.gw_count == 0, "gw_count",
         f"{c.gw_count} gateways cannot split {c.n_beams} beams evenly")
    need(c.users_per_beam >= 1, "users_per_beam", "must be >= 1")
    need(c.layers_per_beam >= 1, "layers_per_beam", "must be >= 1")
    need(c.radius_3db_km > 0, "radius_3db_km", "must be positive")
    need(c.overlap_factor > 0, "overlap_factor", "must be positive")
    need(c.sidelobe_floor_db > 0, "sidelobe_floor_db", "must be positive (dB below peak)")
    need(c.bandwidth_hz > 0, "bandwidth_hz", "must be positive")
    need(c.sat_power_w > 0, "sat_power_w", "must be positive")
    need(0 <= c.rolloff < 1, "rolloff", "must be in [0, 1)")
    need(c.group_size >= 1, "group_size", "must be >= 1")
    need(c.bundle_symbols >= 1, "bundle_symbols", "must be >= 1")
    need(c.regularization_scale >= 0, "regularization_scale", "must be >= 0")
    need(0 < c.duty_cycle <= 1, "duty_cycle", "must be in (0, 1]")
    need(c.mean_on_epochs >= 1, "mean_on_epochs", "must be >= 1")
    need(len(c.loads_gbps) > 0, "loads_gbps", "must not be empty")
    need(all(x >= 0 and np.isfinite(x) for x in c.loads_gbps), "loads_gbps", "loads must be finite and >= 0")
    need(c.epochs >= 1, "epochs", "must be >= 1")


def from_mapping(data, source="<mapping>"):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    unknown = sorted(set(data) - set(FIELD_NAMES))
    if unknown:
        raise ConfigError(f"{source}: unknown keys {unknown}")
    kw = dict(data)
    if "loads_gbps" in kw:
        loads = kw["loads_gbps"]
        kw["loads_gbps"] = tuple(loads) if isinstance(loads, (list, tuple)) else (loads,)
    try:
        return ScenarioConfig(**kw)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def parse_config(path):
    """Load a YAML config file; missing keys take their defaults."""
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    return from_mapping(data, source=str(path))


def dump_config(config, path=None):
    text = yaml.safe_dump(config.to_dict(), sort_keys=False)
    if path is not None:
        with open(path, "w") as f:
            f.write(text)
    return text


def scenario_config(name=None, base=None, **overrides):
    """Config for a named preset layered over ``base`` (a mapping) and overrides."""
    data = dict(base or {})
    if name is not None:
        if name not in SCENARIOS:
            raise ConfigError(f"scenario: unknown {name!r}, choose from {sorted(SCENARIOS)}")
        preset = SCENARIOS[name]
        if data.get("mode", preset["mode"]) != preset["mode"]:
            for k in MODE_DEFAULTS[preset["mode"]]:
                data.pop(k, None)
        if preset.get("impairments", "custom") != "custom":
            data.pop("custom_impairments", None)
        data.update(preset)
    data.update(overrides)
    return from_mapping(data, source=f"scenario {name}" if name else "<overrides>")
