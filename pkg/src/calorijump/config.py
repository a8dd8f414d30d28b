"""Config parsing, serialization, and run manifests.

The config surface speaks SI-facing units (kelvin, W/K^5, dimensionless
ratios); conversion to internal rad/s happens here, exactly once. Files are
flat UTF-8 ``key = value`` text with ``#`` comments: diff-able, no nesting.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .constants import K_B, KB_OVER_HBAR
from .errors import ConfigError
from .params import ModelParams, SimConfig, sim_config_for
from .thermo import ThermoParams

_REQUIRED = (
    "hbar_omega_q_over_kB",
    "omega_L_over_omega_q",
    "kappa",
    "g2",
    "T_p",
    "C_over_kB",
    "horizon_periods",
    "seed",
    "n_trajectories",
)

_OPTIONAL = (
    "SigmaV",
    "Sigma",
    "V",
    "dt_factor",
    "record",
    "downsample",
    "bins",
    "hist_min",
    "hist_max",
    "qubit_init",
    "phonon_noise",
    "n_max",
    "channel_threshold",
    "threads",
    "grid_points",
    "m_samples",
    "n_electrons",
    "gamma_e",
    "epsilon_f",
)

_KNOWN = set(_REQUIRED) | set(_OPTIONAL)

_INT_KEYS = {
    "seed",
    "n_trajectories",
    "downsample",
    "bins",
    "n_max",
    "threads",
    "grid_points",
    "m_samples",
}
_STR_KEYS = {"record", "qubit_init"}
_BOOL_KEYS = {"phonon_noise"}


def parse_config_text(text: str) -> dict:
    """Parse flat ``key = value`` lines into a typed dict."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key not in _KNOWN:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in _STR_KEYS:
            out[key] = value
        elif key in _BOOL_KEYS:
            if value.lower() in ("true", "1", "yes", "on"):
                out[key] = True
            elif value.lower() in ("false", "0", "no", "off"):
                out[key] = False
            else:
                raise ConfigError(f"line {lineno}: {key} must be true/false")
        elif key in _INT_KEYS:
            try:
                out[key] = int(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {key} must be an integer") from exc
        else:
            try:
                out[key] = float(value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: {key} must be a number") from exc
    return out


def resolve_params(cfg: dict) -> tuple[ModelParams, SimConfig]:
    """Build the internal parameter objects from a parsed config dict."""
    missing = [k for k in _REQUIRED if k not in cfg]
    if missing:
        raise ConfigError(f"missing required config keys: {', '.join(missing)}")
    if "SigmaV" in cfg:
        if "Sigma" in cfg or "V" in cfg:
            raise ConfigError("give either SigmaV or the Sigma + V pair, not both")
        sigma_v = cfg["SigmaV"]
    elif "Sigma" in cfg and "V" in cfg:
        sigma_v = cfg["Sigma"] * cfg["V"]
    else:
        raise ConfigError("missing SigmaV (or the Sigma + V pair)")

    thermo = ThermoParams(
        sigma_v=sigma_v,
        t_p=cfg["T_p"],
        c=cfg["C_over_kB"] * K_B,
        n_electrons=cfg.get("n_electrons"),
        gamma_e=cfg.get("gamma_e"),
        epsilon_f=cfg.get("epsilon_f"),
    )
    omega_q = cfg["hbar_omega_q_over_kB"] * KB_OVER_HBAR
    model = ModelParams(
        omega_q=omega_q,
        omega_L=cfg["omega_L_over_omega_q"] * omega_q,
        kappa=cfg["kappa"],
        g2=cfg["g2"],
        thermo=thermo,
    )

    extras = {}
    for key in (
        "record",
        "downsample",
        "bins",
        "qubit_init",
        "phonon_noise",
        "n_max",
        "channel_threshold",
        "threads",
        "grid_points",
        "m_samples",
    ):
        if key in cfg:
            extras[key] = cfg[key]
    if "hist_min" in cfg or "hist_max" in cfg:
        if not ("hist_min" in cfg and "hist_max" in cfg):
            raise ConfigError("hist_min and hist_max must be given together")
        extras["range"] = (cfg["hist_min"], cfg["hist_max"])
    sim = sim_config_for(
        model,
        horizon_periods=cfg["horizon_periods"],
        seed=cfg["seed"],
        n_trajectories=cfg["n_trajectories"],
        dt_factor=cfg.get("dt_factor", 100.0),
        **extras,
    )
    return model, sim


def load_config(path) -> tuple[ModelParams, SimConfig]:
    """Read and resolve a config file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return resolve_params(parse_config_text(p.read_text(encoding="utf-8")))


def config_dict(model: ModelParams, sim: SimConfig) -> dict:
    """SI-surface key set that reproduces (model, sim) through resolve_params."""
    th = model.thermo
    out = {
        "hbar_omega_q_over_kB": model.e_q,
        "omega_L_over_omega_q": model.omega_L / model.omega_q,
        "kappa": model.kappa,
        "g2": model.g2,
        "SigmaV": th.sigma_v,
        "T_p": th.t_p,
        "C_over_kB": th.c_over_kB,
        "dt_factor": (
            sim.dt_factor
            if sim.dt_factor is not None
            else 1.0 / (sim.dt * model.omega_q)
        ),
        "horizon_periods": (
            sim.horizon_periods
            if sim.horizon_periods is not None
            else sim.n_steps * sim.dt / model.period
        ),
        "seed": sim.seed,
        "n_trajectories": sim.n_trajectories,
        "record": sim.record,
        "downsample": sim.downsample,
        "bins": sim.bins,
        "phonon_noise": sim.phonon_noise,
        "n_max": sim.n_max,
        "channel_threshold": sim.channel_threshold,
        "threads": sim.threads,
        "grid_points": sim.grid_points,
        "m_samples": sim.m_samples,
    }
    if isinstance(sim.qubit_init, str):
        out["qubit_init"] = sim.qubit_init
    if sim.range is not None:
        out["hist_min"], out["hist_max"] = sim.range
    for key, val in (
        ("n_electrons", th.n_electrons),
        ("gamma_e", th.gamma_e),
        ("epsilon_f", th.epsilon_f),
    ):
        if val is not None:
            out[key] = val
    return out


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def dump_config(model: ModelParams, sim: SimConfig) -> str:
    """Render a config file that round-trips through load_config."""
    lines = [f"{k} = {_format_value(v)}" for k, v in config_dict(model, sim).items()]
    return "\n".join(lines) + "\n"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Resolved parameters plus an inventory of the files a run produced."""

    config_si: dict
    internal: dict
    version: str
    seed: int
    created: str
    outputs: list = field(default_factory=list)

    @classmethod
    def for_run(cls, model: ModelParams, sim: SimConfig, version: str) -> "RunManifest":
        th = model.thermo
        internal = {
            "omega_q": model.omega_q,
            "omega_L": model.omega_L,
            "kappa": model.kappa,
            "g2": model.g2,
            "sigma_v": th.sigma_v,
            "t_p": th.t_p,
            "c": th.c,
            "dt": sim.dt,
            "n_steps": sim.n_steps,
            "n_trajectories": sim.n_trajectories,
            "threads": sim.threads,
        }
        return cls(
            config_si=config_dict(model, sim),
            internal=internal,
            version=version,
            seed=sim.seed,
            created=datetime.now(timezone.utc).isoformat(),
            outputs=[],
        )

    def add_output(self, path) -> None:
        p = Path(path)
        self.outputs.append(
            {"path": p.name, "sha256": sha256_file(p), "bytes": p.stat().st_size}
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def write(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")
