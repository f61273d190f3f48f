"""Scenario configuration: TOML files with unit-suffixed keys.

Sections mirror the domain types ([profile], [model], [gait], [sim], plus
repeated [[disturbance]] tables and optional [montecarlo]/[sweep] blocks).
Every physical quantity carries its unit in the key name (z0_m, dtau_s,
magnitude_m_s, ...).  Unknown keys are rejected by name so unit mistakes
and typos fail loudly instead of being silently ignored.
"""

from __future__ import annotations

import os
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .controller import make_reference
from .dynamics import ModelParams
from .errors import ConfigError, ValidationError
from .simulate import Disturbance, RandomizationSpec, Scenario
from .stability import GainK
from .surface import make_profile

_PROFILE_KEYS = {"kind", "case_id", "lever_arm_m", "amplitude_deg", "amplitude_m",
                 "omega_rad_s", "phase_rad", "sample_file", "margin_s2",
                 "t_offset_s"}
_MODEL_KEYS = {"z0_m", "g_m_s2", "mu", "u_min_m", "u_max_m", "dtau_s",
               "step_bound_mode"}
_GAIT_KEYS = {"v_des_m_s"}
_SIM_KEYS = {"duration_s", "tick_s", "dt_s", "e0_x_m", "e0_xdot_m_s",
             "fbar_mode", "gain_mode", "fixed_k1", "fixed_k2", "seed",
             "fbar_margin_s2", "fbar_window_s", "fbar_noise_s2", "dtau_jitter",
             "qp_eps", "success_err_m", "divergence_err_m", "axis"}
_DISTURBANCE_KEYS = {"kind", "time_s", "magnitude_m_s", "magnitude_s2",
                     "magnitude_m_s2", "axis"}
_MC_KEYS = {"trials", "e0_pos_m", "e0_vel_m_s", "pushes", "push_window_s",
            "push_mag_m_s", "fbar_noise_s2", "success_err_m"}
_SWEEP_KEYS = {"grid", "k1", "k2", "horizon_s"}
_SECTIONS = {"profile": _PROFILE_KEYS, "model": _MODEL_KEYS, "gait": _GAIT_KEYS,
             "sim": _SIM_KEYS, "disturbance": _DISTURBANCE_KEYS,
             "montecarlo": _MC_KEYS, "sweep": _SWEEP_KEYS}

_MAG_KEY_FOR_KIND = {"velocity_impulse": "magnitude_m_s",
                     "fbar_noise": "magnitude_s2",
                     "sway_accel": "magnitude_m_s2"}


def load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"scenario file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def check_keys(raw: dict) -> None:
    for section, content in raw.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section '[{section}]'")
        tables = content if isinstance(content, list) else [content]
        for table in tables:
            if not isinstance(table, dict):
                raise ConfigError(f"section '[{section}]' must be a table")
            for key in table:
                if key not in _SECTIONS[section]:
                    raise ConfigError(f"unknown key '{key}' in [{section}]")


def _parse_value(text: str) -> Any:
    low = text.strip()
    if low.lower() in ("true", "false"):
        return low.lower() == "true"
    try:
        return int(low)
    except ValueError:
        pass
    try:
        return float(low)
    except ValueError:
        pass
    return low


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply key=value overrides, dotted (section.key) or bare when unique."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, _, value = item.partition("=")
        key = key.strip()
        if "." in key:
            section, _, name = key.partition(".")
            if section not in _SECTIONS or name not in _SECTIONS[section]:
                raise ConfigError(f"unknown override key '{key}'")
            raw.setdefault(section, {})[name] = _parse_value(value)
            continue
        hits = [s for s, keys in _SECTIONS.items()
                if key in keys and s != "disturbance"]
        if not hits:
            raise ConfigError(f"unknown override key '{key}'")
        if len(hits) > 1:
            raise ConfigError(f"override key '{key}' is ambiguous; use section.{key}")
        raw.setdefault(hits[0], {})[key] = _parse_value(value)
    return raw


def _get(table: dict, key: str, default=None):
    return table.get(key, default)


def build_scenario(raw: dict, base_dir: str = ".") -> Scenario:
    """Construct a validated Scenario from parsed configuration."""
    check_keys(raw)
    prof_tab = dict(raw.get("profile", {"kind": "static"}))
    margin_default = float(prof_tab.pop("margin_s2", 0.0))
    kind = prof_tab.pop("kind", "static")
    kw = {}
    if "case_id" in prof_tab:
        kw["case_id"] = prof_tab.pop("case_id")
    if "lever_arm_m" in prof_tab:
        kw["lever_arm"] = float(prof_tab.pop("lever_arm_m"))
    if "amplitude_deg" in prof_tab:
        kw["amplitude_deg"] = float(prof_tab.pop("amplitude_deg"))
    if "amplitude_m" in prof_tab:
        kw["amplitude_m"] = float(prof_tab.pop("amplitude_m"))
    if "omega_rad_s" in prof_tab:
        kw["omega"] = float(prof_tab.pop("omega_rad_s"))
    if "phase_rad" in prof_tab:
        kw["phase"] = float(prof_tab.pop("phase_rad"))
    if "sample_file" in prof_tab:
        sample_file = prof_tab.pop("sample_file")
        if not os.path.isabs(sample_file):
            sample_file = os.path.join(base_dir, sample_file)
        kw["sample_file"] = sample_file
    if "t_offset_s" in prof_tab:
        kw["t_offset"] = float(prof_tab.pop("t_offset_s"))
    try:
        profile = make_profile(kind, **kw)
    except (ValidationError, KeyError) as exc:
        raise ConfigError(f"bad [profile]: {exc}") from exc

    m = raw.get("model", {})
    params = ModelParams(
        z0=float(_get(m, "z0_m", 0.25)),
        g=float(_get(m, "g_m_s2", 9.81)),
        mu=float(_get(m, "mu", 0.8)),
        u_min=float(_get(m, "u_min_m", -0.15)),
        u_max=float(_get(m, "u_max_m", 0.15)),
        dtau=float(_get(m, "dtau_s", 0.3)),
        step_bound_mode=_get(m, "step_bound_mode", "union"),
    )

    v_des = float(_get(raw.get("gait", {}), "v_des_m_s", 0.0))
    reference = make_reference(v_des, params.dtau, profile, params)

    s = raw.get("sim", {})
    gain_mode = _get(s, "gain_mode", "per_tick")
    fixed_gain = None
    if isinstance(gain_mode, str) and gain_mode.startswith("fixed"):
        if ":" in gain_mode:
            _, _, rest = gain_mode.partition(":")
            parts = rest.split(",")
            if len(parts) != 2:
                raise ConfigError(f"bad fixed gain spec '{gain_mode}'; "
                                  "expected fixed:K1,K2")
            try:
                fixed_gain = GainK(float(parts[0]), float(parts[1]))
            except ValueError as exc:
                raise ConfigError(f"bad fixed gain spec '{gain_mode}'") from exc
        else:
            fixed_gain = GainK(float(_get(s, "fixed_k1", 0.0)),
                               float(_get(s, "fixed_k2", 0.0)))
        gain_mode = "fixed"

    disturbances = []
    for tab in raw.get("disturbance", []):
        kind_d = _get(tab, "kind")
        if kind_d not in _MAG_KEY_FOR_KIND:
            raise ConfigError(f"unknown disturbance kind '{kind_d}'")
        mag_key = _MAG_KEY_FOR_KIND[kind_d]
        if mag_key not in tab:
            raise ConfigError(f"disturbance kind '{kind_d}' needs key '{mag_key}'")
        for key in tab:
            if key in ("magnitude_m_s", "magnitude_s2", "magnitude_m_s2") and key != mag_key:
                raise ConfigError(
                    f"disturbance kind '{kind_d}' takes '{mag_key}', not '{key}'")
        disturbances.append(Disturbance(
            kind=kind_d, time=float(_get(tab, "time_s", 0.0)),
            magnitude=float(tab[mag_key]), axis=_get(tab, "axis", "x")))

    window = _get(s, "fbar_window_s")
    scn = Scenario(
        profile=profile, params=params, reference=reference,
        duration=float(_get(s, "duration_s", 10.0)),
        e0=(float(_get(s, "e0_x_m", 0.0)), float(_get(s, "e0_xdot_m_s", 0.0))),
        disturbances=tuple(disturbances),
        fbar_mode=_get(s, "fbar_mode", "oracle_horizon"),
        gain_mode=gain_mode,
        fixed_gain=fixed_gain,
        seed=int(_get(s, "seed", 0)),
        tick=float(_get(s, "tick_s", 5e-3)),
        dt=float(_get(s, "dt_s", 1e-3)),
        fbar_margin=float(_get(s, "fbar_margin_s2", margin_default)),
        fbar_window=float(window) if window is not None else None,
        fbar_noise=float(_get(s, "fbar_noise_s2", 0.0)),
        dtau_jitter=float(_get(s, "dtau_jitter", 0.0)),
        qp_eps=float(_get(s, "qp_eps", 1e-6)),
        success_err=float(_get(s, "success_err_m", 0.5)),
        divergence_err=float(_get(s, "divergence_err_m", 10.0)),
        axis=_get(s, "axis", "x"),
    )
    scn.validate()
    return scn


def build_mc_spec(raw: dict) -> tuple[int, RandomizationSpec, Optional[float]]:
    mc = raw.get("montecarlo", {})
    window = _get(mc, "push_window_s", [0.0, 0.0])
    if not (isinstance(window, (list, tuple)) and len(window) == 2):
        raise ConfigError("push_window_s must be a [start, end] pair")
    spec = RandomizationSpec(
        e0_pos=float(_get(mc, "e0_pos_m", 0.0)),
        e0_vel=float(_get(mc, "e0_vel_m_s", 0.0)),
        n_pushes=int(_get(mc, "pushes", 0)),
        push_window=(float(window[0]), float(window[1])),
        push_mag=float(_get(mc, "push_mag_m_s", 0.0)),
        fbar_noise=float(_get(mc, "fbar_noise_s2", 0.0)),
    )
    trials = int(_get(mc, "trials", 100))
    success = _get(mc, "success_err_m")
    return trials, spec, float(success) if success is not None else None


def parse_grid(spec: str) -> dict[str, list[float]]:
    """Parse 'name=lo:hi:n' comma lists into value grids."""
    allowed = {"fbar", "dtau", "z0", "k1", "k2"}
    grids: dict[str, list[float]] = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad grid component '{part}'")
        name, _, rng = part.partition("=")
        name = name.strip()
        if name not in allowed:
            raise ConfigError(f"unknown grid axis '{name}'")
        pieces = rng.split(":")
        try:
            if len(pieces) == 1:
                grids[name] = [float(pieces[0])]
            elif len(pieces) == 3:
                lo, hi, n = float(pieces[0]), float(pieces[1]), int(pieces[2])
                if n < 1:
                    raise ValueError
                if n == 1:
                    grids[name] = [lo]
                else:
                    step = (hi - lo) / (n - 1)
                    grids[name] = [lo + i * step for i in range(n)]
            else:
                raise ValueError
        except ValueError as exc:
            raise ConfigError(f"bad grid range '{part}'; expected lo:hi:n") from exc
    if not grids:
        raise ConfigError("empty grid specification")
    return grids
