"""Parametric latency profiles.

A profile is a bundle of multiplicative coefficient tables, never a
measurement: per-layer latency is

    kernel_factor(k) * expansion_factor(e) * ratio_factor(r) * unit_scale(u)
      * layer_cost(u, l) * area_scale(u)

summed over present layers, plus a fixed overhead and a padding penalty. The
input resolution is first padded up to the nearest template size; the padded
size drives the per-unit feature-map areas (area_scale is relative to the
profile's largest template), and the penalty charges for the padded-away
fraction of the image. An all-ones profile with zero overhead therefore
evaluates to the plain body layer count.

Preset coefficient values are illustrative, chosen to reproduce qualitative
hardware behaviors (kernel-7 hostility with resolution templates, flat GPU
factors, expansion-bound CPU cost, resolution-linear mobile latency). They
are stated as such everywhere they surface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .costs import MINIMIZE, MetricEvaluator, params_digest, unit_spatial_sizes
from .errors import ConfigError, ValidationError
from .spaces import (
    MBCONV_V2,
    MBCONV_V3,
    RESNET_BOTTLENECK,
    Architecture,
    DesignSpace,
)

PROFILE_VERSION = 1


@dataclass(frozen=True)
class DeviceProfile:
    name: str
    families: tuple[str, ...]
    kernel_factor: Mapping[float, float]
    expansion_factor: Mapping[float, float]
    ratio_factor: Mapping[float, float] = field(default_factory=dict)
    unit_scale: Mapping[int, float] = field(default_factory=dict)
    layer_cost_ms: float | Mapping[int, float] = 1.0
    resolution_templates: tuple[int, ...] = (224,)
    fixed_overhead_ms: float = 0.0
    pad_cost_ms: float = 0.0

    def __post_init__(self):
        if not self.resolution_templates:
            raise ConfigError(f"profile {self.name!r}: resolution_templates must be non-empty")
        for table_name in ("kernel_factor", "expansion_factor", "ratio_factor", "unit_scale"):
            for key, value in getattr(self, table_name).items():
                if value <= 0:
                    raise ConfigError(
                        f"profile {self.name!r}: {table_name}[{key}] must be positive"
                    )

    def template_for(self, resolution: int) -> int:
        """Smallest template the input fits into after padding up."""
        fitting = [t for t in self.resolution_templates if t >= resolution]
        if not fitting:
            raise ValidationError(
                f"resolution {resolution} exceeds every template of profile {self.name!r}"
            )
        return min(fitting)

    def _factor(self, table: Mapping, key, table_name: str) -> float:
        if key in table:
            return float(table[key])
        raise ValidationError(
            f"profile {self.name!r}: {table_name} has no entry for {key!r}"
        )

    def layer_base(self, unit: int, layer: int) -> float:
        cost = self.layer_cost_ms
        if isinstance(cost, (int, float)):
            return float(cost)
        if unit in cost:
            per_unit = cost[unit]
            if isinstance(per_unit, (int, float)):
                return float(per_unit)
            if layer <= len(per_unit):
                return float(per_unit[layer - 1])
        raise ValidationError(
            f"profile {self.name!r}: no layer cost for unit {unit} layer {layer}"
        )

    def config(self) -> dict:
        return {
            "format_version": PROFILE_VERSION,
            "name": self.name,
            "families": list(self.families),
            "kernel_factor": {str(k): v for k, v in self.kernel_factor.items()},
            "expansion_factor": {str(k): v for k, v in self.expansion_factor.items()},
            "ratio_factor": {str(k): v for k, v in self.ratio_factor.items()},
            "unit_scale": {str(k): v for k, v in self.unit_scale.items()},
            "layer_cost_ms": self.layer_cost_ms
            if isinstance(self.layer_cost_ms, (int, float))
            else {str(k): v for k, v in self.layer_cost_ms.items()},
            "resolution_templates": list(self.resolution_templates),
            "fixed_overhead_ms": self.fixed_overhead_ms,
            "pad_cost_ms": self.pad_cost_ms,
        }


def profile_latency(space: DesignSpace, arch: Architecture, profile: DeviceProfile) -> float:
    """Latency in model milliseconds under a parametric profile."""
    if space.family not in profile.families:
        raise ValidationError(
            f"profile {profile.name!r} covers families {profile.families}, not {space.family!r}"
        )
    template = profile.template_for(arch.resolution)
    reference = max(profile.resolution_templates)
    sizes = unit_spatial_sizes(space, template)
    ref_sizes = unit_spatial_sizes(space, reference)
    total = profile.fixed_overhead_ms
    total += profile.pad_cost_ms * (template * template - arch.resolution * arch.resolution) / (
        template * template
    )
    for unit, codes in zip(space.units, arch.blocks):
        u = unit.index
        scale = float(profile.unit_scale.get(u, 1.0))
        h_out = sizes[u - 1][1]
        h_ref = ref_sizes[u - 1][1]
        area = (h_out * h_out) / (h_ref * h_ref)
        for layer, code in enumerate(codes, start=1):
            block = space.block(u, code)
            cost = profile._factor(profile.kernel_factor, block.kernel, "kernel_factor")
            cost *= profile._factor(profile.expansion_factor, block.expansion, "expansion_factor")
            if block.channel_ratio is not None and profile.ratio_factor:
                cost *= profile._factor(profile.ratio_factor, block.channel_ratio, "ratio_factor")
            total += cost * scale * profile.layer_base(u, layer) * area
    return total


# ---------------------------------------------------------------------------
# presets

_ALL_FAMILIES = (MBCONV_V3, MBCONV_V2, RESNET_BOTTLENECK)
_MOBILE_FAMILIES = (MBCONV_V3, MBCONV_V2)


def _npu_like() -> DeviceProfile:
    # kernel 7 is distinctly hostile; one resolution template, so smaller
    # inputs pad up to 224 and pay for the discarded area
    return DeviceProfile(
        name="npu-like",
        families=_MOBILE_FAMILIES,
        kernel_factor={3: 1.0, 5: 1.15, 7: 3.2},
        expansion_factor={3: 1.0, 4: 1.1, 6: 1.25},
        layer_cost_ms=0.05,
        resolution_templates=(224,),
        fixed_overhead_ms=0.0,
        pad_cost_ms=0.4,
    )


def _gpu_flat() -> DeviceProfile:
    # block choice barely matters; depth dominates
    return DeviceProfile(
        name="gpu-flat",
        families=_ALL_FAMILIES,
        kernel_factor={3: 1.0, 5: 1.0, 7: 1.0},
        expansion_factor={3: 1.0, 4: 1.0, 6: 1.0, 0.2: 1.0, 0.25: 1.0, 0.35: 1.0},
        ratio_factor={0.65: 1.0, 0.8: 1.0, 1.0: 1.0},
        layer_cost_ms=0.02,
        resolution_templates=(192, 208, 224),
        fixed_overhead_ms=1.0,
        pad_cost_ms=0.0,
    )


def _cpu_expansion_bound() -> DeviceProfile:
    # expansion ratio (channel count) dominates; hundreds of model-ms
    return DeviceProfile(
        name="cpu-expansion-bound",
        families=_ALL_FAMILIES,
        kernel_factor={3: 1.0, 5: 1.05, 7: 1.12},
        expansion_factor={3: 1.0, 4: 1.55, 6: 2.3, 0.2: 0.8, 0.25: 1.0, 0.35: 1.35},
        ratio_factor={0.65: 0.75, 0.8: 1.0, 1.0: 1.35},
        layer_cost_ms=5.0,
        resolution_templates=(192, 208, 224),
        fixed_overhead_ms=15.0,
        pad_cost_ms=0.0,
    )


def _note10_linear() -> DeviceProfile:
    # every resolution is its own template, so latency tracks input area
    return DeviceProfile(
        name="note10-linear",
        families=_MOBILE_FAMILIES,
        kernel_factor={3: 1.0, 5: 1.3, 7: 1.65},
        expansion_factor={3: 1.0, 4: 1.3, 6: 1.8},
        layer_cost_ms=0.12,
        resolution_templates=(192, 208, 224),
        fixed_overhead_ms=1.0,
        pad_cost_ms=0.0,
    )


_PROFILE_PRESETS = {
    "npu-like": _npu_like,
    "gpu-flat": _gpu_flat,
    "cpu-expansion-bound": _cpu_expansion_bound,
    "note10-linear": _note10_linear,
}


def list_profiles() -> tuple[str, ...]:
    return tuple(_PROFILE_PRESETS)


def identity_profile(space: DesignSpace, resolution: int | None = None) -> DeviceProfile:
    """All factors one, zero overhead: latency equals the body layer count."""
    template = max(space.resolutions) if resolution is None else resolution
    kernels = sorted({b.kernel for u in space.units for b in u.blocks})
    expansions = sorted({b.expansion for u in space.units for b in u.blocks})
    ratios = sorted({b.channel_ratio for u in space.units for b in u.blocks} - {None})
    return DeviceProfile(
        name="identity",
        families=(space.family,),
        kernel_factor={k: 1.0 for k in kernels},
        expansion_factor={e: 1.0 for e in expansions},
        ratio_factor={r: 1.0 for r in ratios},
        layer_cost_ms=1.0,
        resolution_templates=(template,),
        fixed_overhead_ms=0.0,
        pad_cost_ms=0.0,
    )


def _num(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def _parse_table(raw, where) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected a mapping of value -> factor")
    out = {}
    for key, value in raw.items():
        try:
            out[_num(str(key))] = float(value)
        except ValueError as exc:
            raise ConfigError(f"{where}[{key!r}]: bad entry ({exc})") from exc
    return out


def profile_from_config(config: dict) -> DeviceProfile:
    if not isinstance(config, dict):
        raise ConfigError("device profile: expected a mapping")
    for key in ("name", "families", "kernel_factor", "expansion_factor"):
        if key not in config:
            raise ConfigError(f"device profile: missing field {key!r}")
    families = tuple(config["families"])
    for fam in families:
        if fam not in _ALL_FAMILIES:
            raise ConfigError(f"device profile families: unknown family {fam!r}")
    raw_cost = config.get("layer_cost_ms", 1.0)
    if isinstance(raw_cost, dict):
        cost = {}
        for key, value in raw_cost.items():
            cost[int(key)] = (
                [float(v) for v in value] if isinstance(value, list) else float(value)
            )
    else:
        cost = float(raw_cost)
    return DeviceProfile(
        name=str(config["name"]),
        families=families,
        kernel_factor=_parse_table(config["kernel_factor"], "kernel_factor"),
        expansion_factor=_parse_table(config["expansion_factor"], "expansion_factor"),
        ratio_factor=_parse_table(config.get("ratio_factor", {}), "ratio_factor"),
        unit_scale={int(k): float(v) for k, v in config.get("unit_scale", {}).items()},
        layer_cost_ms=cost,
        resolution_templates=tuple(sorted(int(t) for t in config.get("resolution_templates", [224]))),
        fixed_overhead_ms=float(config.get("fixed_overhead_ms", 0.0)),
        pad_cost_ms=float(config.get("pad_cost_ms", 0.0)),
    )


def load_profile(source) -> DeviceProfile:
    """Resolve a profile from a preset name, a mapping, or a JSON file path."""
    if isinstance(source, DeviceProfile):
        return source
    if isinstance(source, dict):
        return profile_from_config(source)
    if isinstance(source, (str, Path)):
        key = str(source)
        if key in _PROFILE_PRESETS:
            return _PROFILE_PRESETS[key]()
        path = Path(source)
        if path.exists():
            try:
                return profile_from_config(json.loads(path.read_text()))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        raise ConfigError(
            f"unknown profile {key!r}: not a preset ({', '.join(_PROFILE_PRESETS)}) and no such file"
        )
    raise ConfigError(f"cannot load a device profile from {type(source).__name__}")


def save_profile(profile: DeviceProfile, path) -> None:
    Path(path).write_text(json.dumps(profile.config(), indent=2, sort_keys=True) + "\n")


def latency_evaluator(space: DesignSpace, profile) -> MetricEvaluator:
    profile = load_profile(profile)
    return MetricEvaluator(
        name=profile.name,
        direction=MINIMIZE,
        fn=lambda arch: profile_latency(space, arch, profile),
        resolution_sensitive=len(space.resolutions) > 1,
        params_digest=params_digest(profile.config()),
    )
