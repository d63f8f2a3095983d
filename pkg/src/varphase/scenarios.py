"""Scenario configuration, figure presets, initial conditions and system construction."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .energy import SingleQuadraticEnergy, TwoPhaseEnergy, TwoPhaseParams
from .errors import ConfigError, InvalidArgumentError
from .lagrangian import BinarySystem, TernaryParams, TernarySystem
from .mesh_fem import CellQuadrature, Field, FunctionSpace, build_interval_mesh, build_unit_square_mesh, interpolate

__all__ = [
    "MODELS",
    "IC_KINDS",
    "PRESETS",
    "MeshSpec",
    "EnergySpec",
    "TransportSpec",
    "TimeSpec",
    "ICSpec",
    "ScenarioConfig",
    "preset",
    "fig6_sweep",
    "parse_config",
    "linear_ramp_ic",
    "random_two_phase_ic",
    "cosine_ic",
    "uniform_ic",
    "build_system",
    "initial_state",
]

MODELS = ("cahn-hilliard", "case-i", "case-ii", "single-quadratic", "ternary-vacancy")
IC_KINDS = ("linear-ramp", "random-two-phase", "uniform", "cosine")
FIG6_DELTA_F = (1.0 / 480.0, 1.0 / 240.0, 1.0 / 120.0, 1.0 / 60.0)


@dataclass(frozen=True)
class MeshSpec:
    dimension: int = 1
    cells: tuple[int, ...] = (200,)
    length: float = 1.0  # mm

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise InvalidArgumentError("mesh dimension must be 1 or 2")
        if len(self.cells) != self.dimension or any(int(n) < 1 for n in self.cells):
            raise InvalidArgumentError(f"need {self.dimension} positive cell count(s), got {self.cells}")
        if not self.length > 0:
            raise InvalidArgumentError("mesh length must be > 0")


@dataclass(frozen=True)
class EnergySpec:
    """Two-phase energy parameters; ``x_eq`` is only used by the single quadratic."""

    kappa: float = 0.0
    delta_f_int: float = 1.0 / 120.0
    x_alpha: float = 0.25
    x_beta: float = 0.75
    f_alpha: float = 0.01
    f_beta: float = 0.02
    k: float = 2.0
    x_eq: float = 0.5

    def __post_init__(self):
        self.two_phase()

    def two_phase(self, delta_f_int: float | None = None) -> TwoPhaseParams:
        return TwoPhaseParams(
            x_alpha=self.x_alpha,
            x_beta=self.x_beta,
            f_alpha=self.f_alpha,
            f_beta=self.f_beta,
            k=self.k,
            delta_f_int=self.delta_f_int if delta_f_int is None else delta_f_int,
            kappa=self.kappa,
        )


@dataclass(frozen=True)
class TransportSpec:
    """Diffusivities in mm^2/s. ``d0 = inf`` drops vacancy-flux dissipation."""

    diffusivity: float = 1.0
    d0: float = math.inf
    d1: float = 2.0
    d2: float = 1.0
    a_phi: float = 1.0e3
    x0_eq: float = 1.0e-3
    k0: float = 1.0e6

    def __post_init__(self):
        for name in ("diffusivity", "d0", "d1", "d2", "a_phi", "k0"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be > 0")
        if not 0 < self.x0_eq < 1:
            raise InvalidArgumentError("x0_eq must lie in (0, 1)")


@dataclass(frozen=True)
class TimeSpec:
    dt: float = 1.0e-3
    t_end: float = 0.2
    snapshot_stride: int = 10

    def __post_init__(self):
        if not 0 < self.dt <= self.t_end:
            raise InvalidArgumentError("need 0 < dt <= t_end")
        if self.snapshot_stride < 1:
            raise InvalidArgumentError("snapshot_stride must be >= 1")


@dataclass(frozen=True)
class ICSpec:
    kind: str = "linear-ramp"
    seed: int = 42
    beta_fraction: float = 0.4
    mean: float = 0.5
    amplitude: float = 0.01

    def __post_init__(self):
        if self.kind not in IC_KINDS:
            raise InvalidArgumentError(f"unknown ic kind {self.kind!r}; expected one of {', '.join(IC_KINDS)}")
        if not 0 <= self.seed < 2**64:
            raise InvalidArgumentError("seed must be an unsigned 64-bit integer")
        if not 0 < self.beta_fraction < 1:
            raise InvalidArgumentError("beta_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    model: str = "case-ii"
    mesh: MeshSpec = field(default_factory=MeshSpec)
    energy: EnergySpec = field(default_factory=EnergySpec)
    transport: TransportSpec = field(default_factory=TransportSpec)
    time: TimeSpec = field(default_factory=TimeSpec)
    ic: ICSpec = field(default_factory=ICSpec)
    output_dir: str = "out"

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidArgumentError(f"unknown model {self.model!r}; expected one of {', '.join(MODELS)}")
        if self.model == "case-ii" and self.energy.kappa != 0:
            raise InvalidArgumentError("case-ii requires kappa = 0")
        if self.model == "case-i" and not self.energy.kappa > 0:
            raise InvalidArgumentError("case-i requires kappa > 0")
        if self.ic.kind == "linear-ramp" and self.mesh.dimension != 1:
            raise InvalidArgumentError("linear-ramp ic needs a 1-D mesh")
        if self.ic.kind == "random-two-phase" and self.mesh.dimension != 2:
            raise InvalidArgumentError("random-two-phase ic needs a 2-D mesh")

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# presets

_1D = MeshSpec(1, (200,))
_2D = MeshSpec(2, (64, 64))
_T1 = TimeSpec(1e-3, 0.2, 10)
_T2 = TimeSpec(1e-3, 0.1, 10)
_RAMP = ICSpec("linear-ramp")
_RANDOM = ICSpec("random-two-phase", seed=42, beta_fraction=0.4)

PRESETS = {
    "fig2": ScenarioConfig("fig2", "cahn-hilliard", _1D, EnergySpec(kappa=5.0), TransportSpec(), _T1, _RAMP),
    "fig3": ScenarioConfig("fig3", "case-ii", _1D, EnergySpec(kappa=0.0, delta_f_int=0.0), TransportSpec(), _T1, _RAMP),
    "fig4": ScenarioConfig("fig4", "case-i", _1D, EnergySpec(kappa=5.0, delta_f_int=0.0), TransportSpec(), _T1, _RAMP),
    "fig6": ScenarioConfig("fig6", "cahn-hilliard", _1D, EnergySpec(kappa=100.0), TransportSpec(), _T1, _RAMP),
    "fig8": ScenarioConfig("fig8", "cahn-hilliard", _2D, EnergySpec(kappa=1.0), TransportSpec(), _T2, _RANDOM),
    "fig9": ScenarioConfig("fig9", "case-ii", _2D, EnergySpec(kappa=0.0, delta_f_int=0.0), TransportSpec(), _T2, _RANDOM),
    "fig10": ScenarioConfig("fig10", "case-i", _2D, EnergySpec(kappa=1.0, delta_f_int=0.0), TransportSpec(), _T2, _RANDOM),
    "fig11": ScenarioConfig(
        "fig11",
        "ternary-vacancy",
        _2D,
        EnergySpec(kappa=0.0, delta_f_int=0.0),
        TransportSpec(d0=math.inf, d1=2.0, d2=1.0, x0_eq=1e-3),
        _T2,
        _RANDOM,
    ),
}


def preset(name: str) -> ScenarioConfig:
    """A figure scenario with desk-scale numerics."""
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}") from None


def fig6_sweep() -> list[ScenarioConfig]:
    """The interface-energy sweep at ``kappa = 100``."""
    base = preset("fig6")
    return [
        replace(base, name=f"fig6_df{i}", energy=replace(base.energy, delta_f_int=df))
        for i, df in enumerate(FIG6_DELTA_F)
    ]


# ---------------------------------------------------------------------------
# config parsing

_SECTIONS = {
    "mesh": MeshSpec,
    "energy": EnergySpec,
    "transport": TransportSpec,
    "time": TimeSpec,
    "ic": ICSpec,
}
_TOP_KEYS = {"preset", "name", "model"}


def _convert(section: str, key: str, raw: str, line: int):
    if section == "mesh" and key == "cells":
        try:
            return tuple(int(v) for v in raw.replace("x", ",").split(","))
        except ValueError:
            raise ConfigError(f"cells must be 'n' or 'nx,ny', got {raw!r}", line) from None
    kind = {f.name: str(f.type) for f in dataclasses.fields(_SECTIONS[section])}[key]
    if kind == "str":
        return raw
    try:
        return int(raw) if kind == "int" else float(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: expected {kind}, got {raw!r}", line) from None


def parse_config(text: str) -> ScenarioConfig:
    """Parse the line-oriented ``key = value`` scenario format.

    Sections are ``[mesh] [energy] [transport] [time] [ic] [output]``;
    ``#`` starts a comment. A top-level ``preset = <name>`` line (before
    any section) seeds every field from that preset; remaining keys
    override it. Without a preset, ``model`` is required and all other
    fields take their documented defaults. Errors carry the line number
    of the first problem found.
    """
    section = None
    top: dict[str, tuple[str, int]] = {}
    values: dict[str, dict[str, object]] = {s: {} for s in _SECTIONS}
    output: dict[str, str] = {}
    key_lines: dict[tuple[str, str], int] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {line!r}", lineno)
            section = line[1:-1].strip()
            if section not in _SECTIONS and section != "output":
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, raw = (part.strip() for part in line.split("=", 1))
        if not key or not raw:
            raise ConfigError(f"empty key or value in {line!r}", lineno)
        if section is None:
            if key not in _TOP_KEYS:
                raise ConfigError(f"unknown top-level key {key!r}", lineno)
            top[key] = (raw, lineno)
            continue
        if section == "output":
            if key != "directory":
                raise ConfigError(f"unknown key output.{key}", lineno)
            output[key] = raw
            continue
        allowed = {f.name for f in dataclasses.fields(_SECTIONS[section])}
        if key not in allowed:
            raise ConfigError(f"unknown key {section}.{key}", lineno)
        values[section][key] = _convert(section, key, raw, lineno)
        key_lines[(section, key)] = lineno

    if "preset" in top:
        name, lineno = top["preset"]
        try:
            base = preset(name)
        except InvalidArgumentError as exc:
            raise ConfigError(str(exc), lineno) from None
    elif "model" in top:
        base = ScenarioConfig(name="custom")
    else:
        raise ConfigError("missing required key 'model' (or 'preset')", 0)

    def build(section, cls, current):
        kwargs = dict(values[section])
        if section == "mesh" and "cells" in kwargs and "dimension" not in kwargs:
            kwargs["dimension"] = len(kwargs["cells"])
        if section == "mesh" and "dimension" in kwargs:
            kwargs["dimension"] = int(kwargs["dimension"])
        try:
            return replace(current, **kwargs)
        except InvalidArgumentError as exc:
            lines = [key_lines[(section, k)] for k in values[section]]
            raise ConfigError(f"[{section}] {exc}", min(lines) if lines else 0) from None

    specs = {s: build(s, cls, getattr(base, s)) for s, cls in _SECTIONS.items()}
    changes = dict(specs)
    if "model" in top:
        changes["model"] = top["model"][0]
    if "name" in top:
        changes["name"] = top["name"][0]
    if "directory" in output:
        changes["output_dir"] = output["directory"]
    try:
        return replace(base, **changes)
    except InvalidArgumentError as exc:
        line = top.get("model", ("", 0))[1] or min(key_lines.values(), default=0)
        raise ConfigError(str(exc), line) from None


# ---------------------------------------------------------------------------
# initial conditions


def linear_ramp_ic(space: FunctionSpace) -> Field:
    """``x(s) = s / length`` on a 1-D space."""
    if space.mesh.dimension != 1:
        raise InvalidArgumentError("linear ramp needs a 1-D space")
    lo, hi = space.mesh.bounding_box
    return interpolate(space, lambda p: (p[:, 0] - lo[0]) / (hi[0] - lo[0]))


def cosine_ic(space: FunctionSpace, mean: float = 0.5, amplitude: float = 0.01) -> Field:
    """``mean + amplitude cos(pi s / length)`` along the first axis."""
    lo, hi = space.mesh.bounding_box
    return interpolate(space, lambda p: mean + amplitude * np.cos(np.pi * (p[:, 0] - lo[0]) / (hi[0] - lo[0])))


def uniform_ic(space: FunctionSpace, value: float = 0.5) -> Field:
    return Field(space, np.full(space.n_scalar_dofs, float(value)))


def _dof_weights(space: FunctionSpace) -> np.ndarray:
    """``int N_i dV`` for every scalar dof."""
    quad = CellQuadrature(space)
    local = np.einsum("cq,ql->cl", quad.weights, quad.values)
    return np.bincount(space.scalar_dofmap.ravel(), local.ravel(), minlength=space.n_scalar_dofs)


def random_two_phase_ic(space: FunctionSpace, seed: int = 42, beta_fraction: float = 0.4, n_waves: int = 24) -> Field:
    """Seeded two-phase pattern with nodal values in {0, 1}.

    A sum of ``n_waves`` plane cosines of wavelength ``length / 8`` with
    random directions and phases is thresholded at the weighted quantile
    that puts ``beta_fraction`` of ``int x dV`` at value one.
    """
    if space.mesh.dimension != 2:
        raise InvalidArgumentError("random two-phase ic needs a 2-D space")
    if not 0.0 <= beta_fraction < 1.0:
        raise InvalidArgumentError("beta_fraction must lie in [0, 1)")
    if beta_fraction == 0.0:
        return Field(space, np.zeros(space.n_scalar_dofs))
    lo, hi = space.mesh.bounding_box
    length = float((hi - lo).max())
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2.0 * np.pi, n_waves)
    phases = rng.uniform(0.0, 2.0 * np.pi, n_waves)
    wavenumber = 2.0 * np.pi / (length / 8.0)
    k = wavenumber * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    smooth = np.cos(space.dof_coordinates @ k.T + phases).sum(axis=1)

    weights = _dof_weights(space)
    order = np.argsort(-smooth, kind="stable")
    cum = np.cumsum(weights[order])
    n_on = int(np.searchsorted(cum, beta_fraction * cum[-1], side="left")) + 1
    threshold = smooth[order[min(n_on, order.size) - 1]]
    return Field(space, (smooth >= threshold).astype(float))


# ---------------------------------------------------------------------------
# assembly of a runnable system


def build_mesh(spec: MeshSpec):
    if spec.dimension == 1:
        return build_interval_mesh(spec.cells[0], spec.length)
    return build_unit_square_mesh(spec.cells[0], spec.cells[1], spec.length)


def build_energy(config: ScenarioConfig):
    e = config.energy
    if config.model == "single-quadratic":
        return SingleQuadraticEnergy(e.k, e.x_eq, e.kappa)
    if config.model in ("case-i", "case-ii", "ternary-vacancy"):
        return TwoPhaseEnergy(e.two_phase(delta_f_int=0.0))
    return TwoPhaseEnergy(e.two_phase())


def build_system(config: ScenarioConfig):
    mesh = build_mesh(config.mesh)
    energy = build_energy(config)
    t = config.transport
    if config.model == "ternary-vacancy":
        return TernarySystem(mesh, energy, TernaryParams(d1=t.d1, d2=t.d2, d0=t.d0, k0=t.k0, x0_eq=t.x0_eq, a_phi=t.a_phi))
    return BinarySystem(mesh, energy, t.diffusivity)


def initial_state(config: ScenarioConfig, system) -> np.ndarray:
    space = system.scalar_space
    ic = config.ic
    if ic.kind == "linear-ramp":
        x = linear_ramp_ic(space).coeffs
    elif ic.kind == "random-two-phase":
        x = random_two_phase_ic(space, ic.seed, ic.beta_fraction).coeffs
    elif ic.kind == "cosine":
        x = cosine_ic(space, ic.mean, ic.amplitude).coeffs
    else:
        x = uniform_ic(space, ic.mean).coeffs
    if isinstance(system, TernarySystem):
        # keep the host fraction 1 - x0 - x1 non-negative
        x0_eq = config.transport.x0_eq
        return system.initial_state(np.clip(x, 0.0, 1.0 - x0_eq))
    return system.initial_state(x)
