"""
Run configuration: flat ``section.key = value`` text files.

Example::

    # comments start with '#'
    model.epsilon = 0.05
    grid.L_max = 128
    flow.dt = 0.002
    initial.kind = perturbed
    initial.base = tanh_band
    initial.theta1 = 1.2
    initial.theta2 = 1.9
    initial.amplitude = 0.05
    initial.seed = 7

Command-line ``--set key=value`` pairs are applied after the file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .axisym import Cap, CapSet
from .flow import FlowParams
from .operators import ModelParams

__all__ = [
    "ConfigError",
    "InitialSpec",
    "OutputSpec",
    "RunConfig",
    "parse_text",
    "load_config",
    "build_config",
    "build_initial",
]

INITIAL_KINDS = ("constant", "tanh_cap", "tanh_band", "tanh_caps", "checkpoint", "perturbed")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class InitialSpec:
    """Tagged initial condition.

    ``kind`` selects the variant; ``params`` holds its numeric fields
    (theta0, pole, theta1, theta2, theta_north, theta_south, path, amplitude,
    seed, max_degree, base).
    """

    kind: str = "constant"
    params: tuple = ()

    def get(self, key, default=None):
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "runs/out"
    snapshot_every: int = 0
    formats: tuple = ("csv",)


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    L_max: int = 64
    oversample: float = 2.0
    fft_size: str = "smooth"
    flow: FlowParams = field(default_factory=FlowParams)
    initial: InitialSpec = field(default_factory=InitialSpec)
    outputs: OutputSpec = field(default_factory=OutputSpec)
    extra: tuple = ()

    def get_extra(self, key, default=None):
        return dict(self.extra).get(key, default)

    def flat(self) -> dict:
        """All settings as a flat ``section.key -> value`` mapping."""
        out = {f"model.{k}": v for k, v in self.model.as_dict().items()}
        out.update({"grid.L_max": self.L_max, "grid.oversample": self.oversample, "grid.fft_size": self.fft_size})
        for f in fields(FlowParams):
            out[f"flow.{f.name}"] = getattr(self.flow, f.name)
        out["initial.kind"] = self.initial.kind
        for k, v in self.initial.params:
            out[f"initial.{k}"] = v
        out["outputs.directory"] = self.outputs.directory
        out["outputs.snapshot_every"] = self.outputs.snapshot_every
        out["outputs.formats"] = ",".join(self.outputs.formats)
        for k, v in self.extra:
            out[k] = ",".join(map(str, v)) if isinstance(v, tuple) else v
        return out


def _value(text: str):
    t = text.strip()
    if t.lower() in ("true", "false"):
        return t.lower() == "true"
    if t.lower() in ("none", "null"):
        return None
    if "," in t:
        return tuple(_value(p) for p in t.split(",") if p.strip())
    for conv in (int, float):
        try:
            return conv(t)
        except ValueError:
            pass
    if t.startswith("pi"):
        # allow "pi/2", "pi/3"
        try:
            num, _, den = t.partition("/")
            return math.pi / float(den) if den else math.pi
        except ValueError:
            pass
    return t


def parse_text(text: str) -> dict:
    out = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        if "." not in key:
            raise ConfigError(f"line {n}: key {key!r} needs a section prefix")
        out[key] = _value(val)
    return out


def parse_overrides(pairs) -> dict:
    out = {}
    for p in pairs or ():
        if "=" not in p:
            raise ConfigError(f"override {p!r} is not key=value")
        k, _, v = p.partition("=")
        out[k.strip()] = _value(v)
    return out


_MODEL_KEYS = {f.name for f in fields(ModelParams)}
_FLOW_KEYS = {f.name for f in fields(FlowParams)}
_INITIAL_KEYS = {
    "theta0",
    "pole",
    "theta1",
    "theta2",
    "theta_north",
    "theta_south",
    "path",
    "amplitude",
    "seed",
    "max_degree",
    "base",
}
_EXTRA_SECTIONS = ("study", "axisym", "run")


def build_config(values: dict) -> RunConfig:
    model, flow, init, grid, outputs, extra = {}, {}, {}, {}, {}, {}
    kind = "constant"
    for key, v in values.items():
        section, _, name = key.partition(".")
        if section == "model" and name in _MODEL_KEYS:
            model[name] = float(v)
        elif section == "flow" and name in _FLOW_KEYS:
            flow[name] = v
        elif section == "grid" and name in ("L_max", "oversample", "fft_size"):
            grid[name] = v
        elif section == "initial" and name == "kind":
            kind = str(v)
        elif section == "initial" and name in _INITIAL_KEYS:
            init[name] = v
        elif section == "outputs" and name in ("directory", "snapshot_every", "formats"):
            outputs[name] = v
        elif section in _EXTRA_SECTIONS:
            extra[key] = v
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    if kind not in INITIAL_KINDS:
        raise ConfigError(f"unknown initial.kind {kind!r}")
    if kind == "perturbed":
        amp = float(init.get("amplitude", 0.0))
        if amp > 0 and "seed" not in init:
            raise ConfigError("initial.seed is required when initial.amplitude > 0")
        if init.get("base", "tanh_band") not in INITIAL_KINDS[:-2]:
            raise ConfigError("initial.base must be constant, tanh_cap, tanh_band or tanh_caps")
    if kind == "checkpoint" and "path" not in init:
        raise ConfigError("initial.path is required for checkpoint initial data")
    try:
        mp = ModelParams(**model)
        for k in ("max_steps", "snapshot_every"):
            if flow.get(k) is not None and k in flow:
                flow[k] = int(flow[k])
        for k in ("dt", "t_end", "dt_min", "dt_max", "energy_tol", "stop_tol", "grow", "diverge_at"):
            if k in flow:
                flow[k] = float(flow[k])
        fp = FlowParams(**flow)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    fmts = outputs.get("formats", ("csv",))
    if isinstance(fmts, str):
        fmts = (fmts,)
    L = int(grid.get("L_max", 64))
    if L < 2:
        raise ConfigError("grid.L_max must be >= 2")
    return RunConfig(
        model=mp,
        L_max=L,
        oversample=float(grid.get("oversample", 2.0)),
        fft_size=str(grid.get("fft_size", "smooth")),
        flow=fp,
        initial=InitialSpec(kind, tuple(sorted(init.items()))),
        outputs=OutputSpec(
            directory=str(outputs.get("directory", "runs/out")),
            snapshot_every=int(outputs.get("snapshot_every", 0)),
            formats=tuple(fmts),
        ),
        extra=tuple(sorted(extra.items())),
    )


def load_config(path=None, overrides=None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            values.update(parse_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
    values.update(parse_overrides(overrides))
    return build_config(values)


def capset_from(spec: InitialSpec) -> CapSet:
    kind = spec.kind if spec.kind != "perturbed" else spec.get("base", "tanh_band")
    if kind == "tanh_cap":
        return CapSet((Cap(str(spec.get("pole", "north")), float(spec.get("theta0", math.pi / 2))),))
    if kind == "tanh_band":
        t1 = float(spec.get("theta1", math.pi / 3))
        t2 = float(spec.get("theta2", 2 * math.pi / 3))
        return CapSet((Cap("north", t1), Cap("south", math.pi - t2)))
    if kind == "tanh_caps":
        return CapSet.two(float(spec.get("theta_north", 1.0)), float(spec.get("theta_south", 0.7)))
    raise ConfigError(f"initial kind {kind!r} has no cap geometry")


def build_initial(cfg: RunConfig, grid):
    """Initial phase field for ``cfg`` on ``grid`` (mean set to model.alpha)."""
    from . import initial as ini
    from .io import load_checkpoint

    spec = cfg.initial
    p = cfg.model
    kind = spec.kind
    if kind == "checkpoint":
        state, _ = load_checkpoint(spec.get("path"), grid)
        return state.phi
    base_kind = spec.get("base", "tanh_band") if kind == "perturbed" else kind
    if base_kind == "constant":
        phi = ini.constant(grid, p.alpha)
    elif base_kind == "tanh_band":
        cs = capset_from(replace(spec, kind="tanh_band"))
        phi = ini.tanh_band(grid, cs.caps[0].theta0, math.pi - cs.caps[1].theta0, p.epsilon, p.alpha)
    else:
        phi = ini.tanh_caps(grid, capset_from(replace(spec, kind=base_kind)), p.epsilon, p.alpha)
    if kind == "perturbed":
        amp = float(spec.get("amplitude", 0.0))
        if amp > 0:
            md = spec.get("max_degree")
            phi = ini.perturbed(phi, amp, int(spec.get("seed")), None if md is None else int(md), p.alpha)
    return phi
