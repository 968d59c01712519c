"""Scenario configuration: builtin experiments and flat TOML config files."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import tomli

from ..algebra import SecondOrderStats
from ..errors import ConfigurationError
from ..filters import FilterVariant
from ..model import StateSpaceModel, ar2_model, projectile_model
from ..network import WEIGHT_SCHEMES, NetworkTopology, random_geometric_topology
from ..stats import NoiseSpec

KINDS = ("ar2", "projectile", "custom")
ETA_TARGETS = ("state", "observation", "both")
CROSS_PSEUDO_MODES = ("proportional", "zero")


@dataclass
class ScenarioConfig:
    """Everything needed to reproduce one Monte-Carlo experiment.

    Node-``i`` observation variance is
    ``obs_variance_base + obs_variance_scale * i ** obs_variance_power``
    (1-based ``i``); every pair of nodes has covariance ``obs_cross_cov``.
    The noise source named by ``eta_target`` gets degree of circularity
    ``eta`` for each point of ``eta_sweep``; the other is held circular
    (``"both"`` applies ``eta`` to both).
    """

    name: str
    kind: str = "ar2"
    # topology: a fixture file (``package:`` prefix for bundled ones) or a generator
    topology: str = None
    topology_nodes: int = 10
    topology_radius: float = 0.5
    topology_seed: int = 0
    weights: str = "nearest_neighbour"
    # observation noise
    obs_variance_base: float = 1.0
    obs_variance_scale: float = 0.0
    obs_variance_power: float = 0.0
    obs_cross_cov: float = 0.0
    cross_pseudo: str = "proportional"
    # circularity
    eta_target: str = "state"
    eta_sweep: list = field(default_factory=lambda: [0.0])
    state_phase: float = 0.0
    obs_phase: float = 0.0
    # ar2
    ar_coeffs: list = field(default_factory=lambda: [1.2, -0.8])
    driving_variance: float = 2.0
    # projectile
    sample_period: float = 0.05
    gravity: float = 9.8
    velocity: list = field(default_factory=lambda: [20.0, 10.0])
    position: list = field(default_factory=lambda: [0.0, 0.0])
    state_variance: float = 1.0
    # custom: real or complex ("1+2j") matrices
    F: list = None
    A: list = None
    H: list = None
    state_cov: list = None
    x0: list = None
    # run
    variants: list = field(default_factory=lambda: ["DCKF", "DACKF"])
    horizon: int = 2000
    burn_in: int = 0
    steady_window: int = None
    trials: int = 1000
    seed: int = 0
    delta: float = 100.0
    workers: int = 1
    out: str = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.eta_target not in ETA_TARGETS:
            raise ConfigurationError(f"eta_target must be one of {ETA_TARGETS}")
        if self.cross_pseudo not in CROSS_PSEUDO_MODES:
            raise ConfigurationError(f"cross_pseudo must be one of {CROSS_PSEUDO_MODES}")
        if self.weights not in WEIGHT_SCHEMES:
            raise ConfigurationError(f"unknown weight scheme {self.weights!r}")
        if int(self.trials) < 1:
            raise ConfigurationError("trials must be >= 1")
        if int(self.horizon) < 1:
            raise ConfigurationError("horizon must be >= 1")
        if self.burn_in < 0:
            raise ConfigurationError("burn_in must be >= 0")
        if not 1 <= self.window <= self.horizon:
            raise ConfigurationError("steady_window must satisfy 1 <= window <= horizon")
        if self.window == self.horizon and self.horizon > 1:
            raise ConfigurationError("horizon must exceed the steady-state window")
        if int(self.workers) < 1:
            raise ConfigurationError("workers must be >= 1")
        for eta in self.eta_sweep:
            if not 0.0 <= float(eta) <= 1.0:
                raise ConfigurationError(f"eta must lie in [0, 1], got {eta}")
        self.variants = [FilterVariant.parse(v).value for v in self.variants]
        if not self.variants:
            raise ConfigurationError("no filter variants selected")
        if self.topology is not None and not self.topology.startswith("package:"):
            if not Path(self.topology).is_file():
                raise ConfigurationError(f"topology fixture not found: {self.topology}")
        if self.kind == "custom" and (self.F is None or self.H is None or self.state_cov is None):
            raise ConfigurationError("custom scenarios need F, H and state_cov")

    @property
    def window(self):
        """Steady-state window length; defaults to the final 25% of the horizon."""
        if self.steady_window is None:
            return max(1, self.horizon // 4)
        return int(self.steady_window)

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)

    # construction of the experiment objects
    def build_topology(self) -> NetworkTopology:
        if self.topology is None:
            return random_geometric_topology(self.topology_nodes, self.topology_radius, self.topology_seed)
        if self.topology.startswith("package:"):
            name = self.topology.split(":", 1)[1]
            text = resources.files("wlkalman.data").joinpath(name).read_text()
            return NetworkTopology.from_fixture(text)
        return NetworkTopology.load(self.topology)

    def build_weights(self, topology):
        return WEIGHT_SCHEMES[self.weights](topology)

    def obs_variances(self, n_nodes):
        i = np.arange(1, n_nodes + 1, dtype=float)
        return self.obs_variance_base + self.obs_variance_scale * i ** self.obs_variance_power

    def etas(self, eta):
        """``(state eta, observation eta)`` for one sweep point."""
        s = eta if self.eta_target in ("state", "both") else 0.0
        o = eta if self.eta_target in ("observation", "both") else 0.0
        return s, o

    def obs_noise(self, n_nodes, eta):
        cross_pseudo = None if self.cross_pseudo == "proportional" else 0.0
        return NoiseSpec.with_eta(self.obs_variances(n_nodes), eta, self.obs_phase,
                                  self.obs_cross_cov, cross_pseudo)

    def build_model(self, n_nodes, eta) -> StateSpaceModel:
        eta_w, eta_v = self.etas(eta)
        obs = self.obs_noise(n_nodes, eta_v)
        rot = eta_w * np.exp(1j * self.state_phase)
        if self.kind == "ar2":
            var = self.driving_variance
            driving = SecondOrderStats(np.array([[var]]), np.array([[rot * var]]))
            return ar2_model(tuple(self.ar_coeffs), driving, obs)
        if self.kind == "projectile":
            return projectile_model(self.sample_period, obs, self.state_variance, rot * self.state_variance,
                                    velocity=tuple(self.velocity), position=tuple(self.position),
                                    g=self.gravity)
        F = _matrix(self.F)
        L = F.shape[0]
        Q = _matrix(self.state_cov)
        A = None if self.A is None else _matrix(self.A)
        H = _matrix(self.H)
        x0 = None if self.x0 is None else np.array([complex(v) for v in self.x0])
        state = SecondOrderStats(Q, rot * Q)
        return StateSpaceModel(F, np.broadcast_to(H, (n_nodes,) + H.shape), state, obs,
                               A=A if A is not None else np.zeros((L, L)), x0=x0)

    def to_toml(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name} = {_toml_value(v)}")
        return "\n".join(lines) + "\n"


def _matrix(rows):
    m = np.array([[complex(v) for v in row] for row in rows])
    return m.real if not np.any(m.imag) else m


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def load_config(path) -> ScenarioConfig:
    """Read a flat TOML config; unknown keys are rejected."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"{path}: {exc.strerror}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {unknown}")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigurationError(f"{path}: config must be flat, found tables {nested}")
    data.setdefault("name", path.stem)
    topo = data.get("topology")
    if topo and not topo.startswith("package:") and not Path(topo).is_absolute():
        data["topology"] = str(path.parent / topo)
    try:
        return ScenarioConfig(**data)
    except TypeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc


def builtin_ar2_config() -> ScenarioConfig:
    """Complex AR(2) tracked by a 10-node network with correlated sensors."""
    return ScenarioConfig(
        name="ar2",
        kind="ar2",
        topology="package:ar2_n10.txt",
        weights="nearest_neighbour",
        ar_coeffs=[1.2, -0.8],
        driving_variance=2.0,
        obs_variance_base=4.0,
        obs_variance_scale=1.0,
        obs_variance_power=-0.5,
        obs_cross_cov=4.0,
        eta_target="state",
        eta_sweep=[round(0.1 * k, 1) for k in range(10)],
        variants=["DCKF", "DACKF", "CENTRAL_CKF", "CENTRAL_ACKF", "BASELINE"],
        horizon=2000,
        burn_in=500,
        trials=1000,
        seed=42,
    )


def builtin_projectile_config() -> ScenarioConfig:
    """Projectile tracked by a 20-node network, both noises noncircular."""
    return ScenarioConfig(
        name="projectile",
        kind="projectile",
        topology="package:projectile_n20.txt",
        weights="nearest_neighbour",
        sample_period=0.05,
        gravity=9.8,
        velocity=[20.0, 10.0],
        position=[0.0, 0.0],
        state_variance=5.0,
        obs_variance_base=1.0,
        obs_variance_scale=2.0,
        obs_variance_power=0.5,
        obs_cross_cov=1.0,
        eta_target="both",
        eta_sweep=[0.85],
        state_phase=0.0,
        obs_phase=math.pi,
        variants=["DCKF", "DACKF", "CENTRAL_CKF", "CENTRAL_ACKF"],
        horizon=400,
        trials=1000,
        seed=42,
    )


BUILTIN = {
    "ar2": builtin_ar2_config,
    "projectile": builtin_projectile_config,
}


def resolve_scenario(name_or_path) -> ScenarioConfig:
    if name_or_path in BUILTIN:
        return BUILTIN[name_or_path]()
    path = Path(name_or_path)
    if not path.is_file():
        raise ConfigurationError(f"unknown scenario {name_or_path!r} (builtin: {', '.join(BUILTIN)})")
    return load_config(path)
