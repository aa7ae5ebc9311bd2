"""Scenario runners behind the command-line tool.

Each runner takes a flat parameter mapping (already merged with the
defaults in :data:`SCENARIO_DEFAULTS`) and returns a :class:`Table`.
Nothing here touches the filesystem.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .anneal import AnnealConfig, anneal_discord_qutrit, anneal_eof
from .correlations import (
    MdmsParams,
    bell_populations,
    discord_2q,
    is_x_state,
    mdms_state,
    mutual_information,
    ppt_min_eigenvalue,
    x_state_correlations,
)
from .dynamics import (
    CavityConfig,
    DickeConfig,
    LindbladRates,
    cavity_ladder,
    dicke_effective_evolve,
    dicke_ladder,
    dicke_mixture,
    four_atom_weights,
    ladder_evolve,
    lindblad_evolve,
    pair_states,
    qutrit_family_state,
    tavis_cummings4_evolve,
    tavis_cummings_evolve,
    uniform_grid,
)
from .exceptions import ContractError, DomainError
from .qmath import DensityMatrix

# concurrence above this ends the dissonance window
CONCURRENCE_TOL = 1e-9
# partial-transpose screening threshold for running the EoF annealer
PPT_SCREEN_TOL = -1e-6
MAX_EVAL_POINTS = 200
POPULATION_SUM_TOL = 1e-6
# annealed EoF below this counts as unentangled
EOF_ZERO_TOL = 5e-3

_ANNEAL_DEFAULTS = {
    "stages": 10,
    "iters_per_stage": 50_000,
    "c0": 1e-9,
    "decay": 2.0,
    "restarts": 8,
    "purification_dim": 10,
    "initial_step": 0.5,
}

_CAVITY = {"n": 0, "delta": 1.07, "g": 1.0, "t_max": 2.0, "dt": 1e-3}
_DICKE = {"delta1": 11.2, "delta2": 10.0, "g1": 1.0, "g2": 1.0, "N": 13, "t_max": 4.0, "dt": 1e-3}

SCENARIO_DEFAULTS: dict[str, dict] = {
    "lindblad": {"gamma_x": 1.0, "gamma_y": 1.0, "gamma_z": 0.0, "initial": "00", "t_max": 10.0, "dt": 0.01},
    "cavity": dict(_CAVITY),
    "cavity-sweep": {**_CAVITY, "lo": 0.0, "hi": 2.0, "steps": 201},
    "dicke": dict(_DICKE),
    "qutrit-family": {"lo": 0.0, "hi": 1.0, "steps": 101, **_ANNEAL_DEFAULTS},
    "qutrit-cavity": {
        **_CAVITY,
        "delta": 1.08,
        "coarse_dt": 0.05,
        "fine_dt": 0.01,
        "refine_halfwidth": 0.05,
        **_ANNEAL_DEFAULTS,
    },
    # t_max of None means the target's own default
    "sweep": {
        "target": "cavity", "param": "delta", "lo": 0.0, "hi": 2.0, "steps": 201,
        **_CAVITY, **_DICKE, "t_max": None, "epsilon": 1 / 3, "m": 0.5,
    },
    "measure": {"state": "", **_ANNEAL_DEFAULTS},
}

SWEEP_TARGETS = {
    "cavity": ("n", "delta", "g"),
    "dicke": ("delta1", "delta2", "g1", "g2", "N"),
    "mdms": ("epsilon", "m"),
}


@dataclass
class Table:
    """Column-oriented result with free-form metadata lines."""

    columns: list[str]
    rows: np.ndarray
    metadata: dict[str, str] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def check_populations(self, prefix: str = "p_") -> None:
        idx = [i for i, c in enumerate(self.columns) if c.startswith(prefix)]
        if idx:
            s = self.rows[:, idx].sum(axis=1)
            if np.any(np.abs(s - 1.0) > POPULATION_SUM_TOL):
                raise ContractError("populations do not sum to 1 within 1e-6")


def anneal_config(p: dict, seed: int) -> AnnealConfig:
    return AnnealConfig(
        K=int(p["stages"]),
        iters_per_stage=int(p["iters_per_stage"]),
        c0=float(p["c0"]),
        decay=float(p["decay"]),
        purification_dim=int(p["purification_dim"]),
        initial_step=float(p["initial_step"]),
        seed=int(seed),
        restarts=int(p["restarts"]),
    )


def sweep_values(lo: float, hi: float, steps: int) -> np.ndarray:
    steps = int(steps)
    if steps < 1:
        raise DomainError("steps must be at least 1")
    if lo == hi:
        return np.array([float(lo)])
    if steps == 1:
        raise DomainError("a single step needs lo == hi")
    return np.linspace(float(lo), float(hi), steps)


def dissonance_peak(discord: np.ndarray, concurrence: np.ndarray, tol: float = CONCURRENCE_TOL):
    """Index of the largest discord before concurrence first exceeds ``tol``.

    Works along the last axis; ties go to the earliest index.  Returns
    ``-1`` where the window is empty (entangled from the first sample).
    """
    ent = concurrence > tol
    end = np.where(ent.any(axis=-1), ent.argmax(axis=-1), ent.shape[-1])
    idx = np.arange(discord.shape[-1])
    masked = np.where(idx < end[..., None], discord, -np.inf)
    return np.where(end > 0, masked.argmax(axis=-1), -1)


def _two_qubit_columns(mats: np.ndarray) -> dict[str, np.ndarray]:
    if all(is_x_state(DensityMatrix(m, (2, 2), check=False)) for m in mats):
        out = x_state_correlations(mats)
        return {k: out[k] for k in ("mutual_information", "classical", "discord", "concurrence")}
    reps = [discord_2q(DensityMatrix(m, (2, 2))) for m in mats]
    return {
        "mutual_information": np.array([r.mutual_information for r in reps]),
        "classical": np.array([r.classical for r in reps]),
        "discord": np.array([r.discord for r in reps]),
        "concurrence": np.array([r.entanglement for r in reps]),
    }


_CORR_COLUMNS = ["mutual_information", "classical", "discord", "concurrence"]


def run_lindblad(p: dict, seed: int = 0) -> Table:
    rates = LindbladRates(float(p["gamma_x"]), float(p["gamma_y"]), float(p["gamma_z"]))
    label = str(p["initial"])
    if len(label) != 2 or set(label) - {"0", "1"}:
        raise DomainError(f"initial must be a two-qubit basis label like '00', got {label!r}")
    rho0 = np.zeros((4, 4), dtype=complex)
    rho0[int(label, 2), int(label, 2)] = 1.0
    times = uniform_grid(float(p["t_max"]), float(p["dt"]))
    traj = lindblad_evolve(DensityMatrix(rho0, (2, 2)), rates, times)
    pops = np.array([bell_populations(traj[i]) for i in range(len(traj))])
    corr = _two_qubit_columns(traj.matrices)
    rows = np.column_stack([times, pops] + [corr[c] for c in _CORR_COLUMNS])
    cols = ["t", "p_1", "p_2", "p_3", "p_4"] + _CORR_COLUMNS
    return Table(cols, rows, {"time_unit": "gamma t"})


def _pair_table(times, pops, labels, unit) -> Table:
    corr = x_state_correlations(pair_states(pops))
    rows = np.column_stack([times, pops] + [corr[c] for c in _CORR_COLUMNS])
    k = int(dissonance_peak(corr["discord"], corr["concurrence"]))
    meta = {"time_unit": unit}
    if k >= 0:
        meta["dissonance_peak"] = f"t={times[k]:.9g} discord={corr['discord'][k]:.9g}"
    return Table(["t"] + [f"p_{s}" for s in labels] + _CORR_COLUMNS, rows, meta)


def _cavity_config(p: dict, **over) -> CavityConfig:
    kw = {k: p[k] for k in ("n", "delta", "g", "t_max", "dt")}
    kw.update(over)
    return CavityConfig(n=int(kw["n"]), delta=float(kw["delta"]), g=float(kw["g"]),
                        t_max=float(kw["t_max"]), dt=float(kw["dt"]))


def _dicke_config(p: dict, **over) -> DickeConfig:
    kw = {k: p[k] for k in ("delta1", "delta2", "g1", "g2", "N", "t_max", "dt")}
    kw.update(over)
    return DickeConfig(delta1=float(kw["delta1"]), delta2=float(kw["delta2"]), g1=float(kw["g1"]),
                       g2=float(kw["g2"]), N=int(kw["N"]), t_max=float(kw["t_max"]), dt=float(kw["dt"]))


def run_cavity(p: dict, seed: int = 0) -> Table:
    cfg = _cavity_config(p)
    traj = tavis_cummings_evolve(cfg)
    return _pair_table(traj.times, traj.populations(), ("ee", "plus", "gg"), "g t")


def run_dicke(p: dict, seed: int = 0) -> Table:
    cfg = _dicke_config(p)
    traj = dicke_effective_evolve(cfg)
    t = _pair_table(traj.times, traj.populations(), ("ee_D0", "plus_D1", "gg_D2"), "g t")
    t.metadata.update(omega12=f"{cfg.omega12:.9g}", delta_a=f"{cfg.delta_a:.9g}", delta_b=f"{cfg.delta_b:.9g}")
    return t


def _ladder_sweep(configs, ladder) -> np.ndarray:
    # all configs share the time grid and step
    times, step = configs[0].times, configs[0].step
    cw = [ladder(cfg) for cfg in configs]
    c = np.array([x[0] for x in cw])
    w = np.array([x[1] for x in cw])
    amps = ladder_evolve(c, w, [1, 0, 0], times, step)
    pops = np.abs(amps) ** 2  # (T, B, 3)
    corr = x_state_correlations(pair_states(pops.reshape(-1, 3)))
    q = corr["discord"].reshape(pops.shape[:2]).T
    e = corr["concurrence"].reshape(pops.shape[:2]).T
    k = dissonance_peak(q, e)
    b = np.arange(len(configs))
    ok = k >= 0
    kk = np.where(ok, k, 0)
    return np.column_stack(
        [
            np.where(ok, q[b, kk], np.nan),
            np.where(ok, times[kk], np.nan),
            np.where(ok, e[b, kk], np.nan),
        ]
    )


_SWEEP_COLUMNS = ["max_discord", "t_at_max", "concurrence_at_max"]


def run_sweep(p: dict, seed: int = 0) -> Table:
    target, param = str(p["target"]), str(p["param"])
    if target not in SWEEP_TARGETS:
        raise DomainError(f"unknown sweep target {target!r}; choose from {sorted(SWEEP_TARGETS)}")
    if param not in SWEEP_TARGETS[target]:
        raise DomainError(f"parameter {param!r} cannot be swept for {target}; choose from {SWEEP_TARGETS[target]}")
    values = sweep_values(p["lo"], p["hi"], p["steps"])
    if param in ("n", "N"):
        if np.any(values != np.round(values)):
            raise DomainError(f"{param} takes integer values only")
    if target == "mdms":
        mats = []
        for v in values:
            kw = {"epsilon": float(p["epsilon"]), "m": float(p["m"])}
            kw[param] = float(v)
            mats.append(mdms_state(MdmsParams(**kw)).matrix)
        corr = _two_qubit_columns(np.array(mats))
        rows = np.column_stack([values] + [corr[c] for c in _CORR_COLUMNS])
        return Table([param] + _CORR_COLUMNS, rows, {"target": target})
    if p["t_max"] is None:
        p = {**p, "t_max": (_CAVITY if target == "cavity" else _DICKE)["t_max"]}
    if target == "cavity":
        configs = [_cavity_config(p, **{param: v}) for v in values]
        res = _ladder_sweep(configs, cavity_ladder)
    else:
        configs = [_dicke_config(p, **{param: v}) for v in values]
        res = _ladder_sweep(configs, dicke_ladder)
    return Table([param] + _SWEEP_COLUMNS, np.column_stack([values, res]), {"target": target, "time_unit": "g t"})


def run_cavity_sweep(p: dict, seed: int = 0) -> Table:
    return run_sweep({**SCENARIO_DEFAULTS["sweep"], **p, "target": "cavity", "param": "delta"}, seed)


def qutrit_point(rho: DensityMatrix, cfg: AnnealConfig) -> dict[str, float]:
    """Annealed discord of a two-qutrit state, plus EoF when it passes PPT screening."""
    mi = mutual_information(rho)
    q = anneal_discord_qutrit(rho, cfg).value
    ppt = ppt_min_eigenvalue(rho)
    eof = anneal_eof(rho, cfg).value if ppt >= PPT_SCREEN_TOL else float("nan")
    return {"mutual_information": mi, "classical": mi - q, "discord": q, "ppt_min_eigenvalue": ppt, "eof": eof}


_QUTRIT_COLUMNS = ["mutual_information", "classical", "discord", "ppt_min_eigenvalue", "eof"]


def zero_eof_peak(discord: np.ndarray, eof: np.ndarray, tol: float) -> int:
    """Earliest index of the largest discord among points with ``eof < tol`` (NaN counts as entangled)."""
    ok = np.nan_to_num(eof, nan=np.inf) < tol
    if not ok.any():
        return -1
    return int(np.argmax(np.where(ok, discord, -np.inf)))



def run_qutrit_family(p: dict, seed: int = 0) -> Table:
    values = sweep_values(p["lo"], p["hi"], p["steps"])
    if values.size > MAX_EVAL_POINTS:
        raise DomainError(f"at most {MAX_EVAL_POINTS} evaluation points per run")
    cfg = anneal_config(p, seed)
    rows = []
    for eps in values:
        r = qutrit_point(qutrit_family_state(float(eps)), cfg)
        rows.append([eps] + [r[c] for c in _QUTRIT_COLUMNS])
    rows = np.array(rows)
    t = Table(["epsilon"] + _QUTRIT_COLUMNS, rows, {"eof_screen": f"ppt_min_eigenvalue >= {PPT_SCREEN_TOL:g}"})
    k = zero_eof_peak(rows[:, 3], rows[:, 5], EOF_ZERO_TOL)
    if k >= 0:
        t.metadata["zero_eof_peak"] = f"epsilon={rows[k, 0]:.9g} discord={rows[k, 3]:.9g}"
    return t


def run_qutrit_cavity(p: dict, seed: int = 0) -> Table:
    cfg = _cavity_config(p)
    traj = tavis_cummings4_evolve(cfg)
    weights = four_atom_weights(traj)
    cfg_a = anneal_config(p, seed)
    times = traj.times
    coarse = uniform_grid(cfg.t_max, float(p["coarse_dt"]))
    fine_dt = float(p["fine_dt"])
    half = float(p["refine_halfwidth"])

    def nearest(t):
        return int(np.argmin(np.abs(times - t)))

    results: dict[int, dict] = {}

    def evaluate(idx):
        for i in idx:
            if i not in results:
                if len(results) >= MAX_EVAL_POINTS:
                    raise DomainError(f"more than {MAX_EVAL_POINTS} evaluation points requested")
                rho = dicke_mixture(np.clip(weights[i], 0, None) / weights[i].sum())
                results[i] = qutrit_point(rho, cfg_a)

    def window_peak(keys):
        q = np.array([results[i]["discord"] for i in keys])
        eof = np.nan_to_num([results[i]["eof"] for i in keys], nan=np.inf)
        return int(dissonance_peak(q, eof, EOF_ZERO_TOL))

    # refine around the discord peak of the first zero-EoF window, not the global maximum
    evaluate(sorted({nearest(t) for t in coarse}))
    keys = sorted(results)
    k0 = window_peak(keys)
    t0 = times[keys[max(k0, 0)]]
    fine = np.arange(max(0.0, t0 - half), min(cfg.t_max, t0 + half) + fine_dt / 2, fine_dt)
    evaluate(sorted({nearest(t) for t in fine}))

    keys = sorted(results)
    rows = np.array([[times[i], *weights[i][::-1], *[results[i][c] for c in _QUTRIT_COLUMNS]] for i in keys])
    cols = ["t"] + [f"p_D{k}" for k in range(4, -1, -1)] + _QUTRIT_COLUMNS
    k = window_peak(keys)
    g = int(np.argmax(rows[:, cols.index("discord")]))
    meta = {
        "time_unit": "g t",
        "evaluation_grid": f"coarse dt={p['coarse_dt']:g} on [0, {cfg.t_max:g}], fine dt={fine_dt:g} "
        f"on [{fine[0]:.9g}, {fine[-1]:.9g}], {len(keys)} points",
        "eof_screen": f"ppt_min_eigenvalue >= {PPT_SCREEN_TOL:g}",
        "discord_peak": f"t={rows[g, 0]:.9g} discord={rows[g, cols.index('discord')]:.9g}",
    }
    if k >= 0:
        meta["dissonance_peak"] = f"t={rows[k, 0]:.9g} discord={rows[k, cols.index('discord')]:.9g}"
    return Table(cols, rows, meta)


RUNNERS = {
    "lindblad": run_lindblad,
    "cavity": run_cavity,
    "cavity-sweep": run_cavity_sweep,
    "dicke": run_dicke,
    "qutrit-family": run_qutrit_family,
    "qutrit-cavity": run_qutrit_cavity,
    "sweep": run_sweep,
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario name, merged parameters, output path and seed."""

    scenario: str
    parameters: dict = field(default_factory=dict)
    out: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIO_DEFAULTS:
            raise KeyError(self.scenario)
        defaults = SCENARIO_DEFAULTS[self.scenario]
        unknown = sorted(set(self.parameters) - set(defaults))
        if unknown:
            raise ValueError(f"unknown parameter(s) for {self.scenario}: {', '.join(unknown)}")
        object.__setattr__(self, "parameters", {**defaults, **self.parameters})

    def with_parameters(self, **kw) -> "ScenarioConfig":
        return replace(self, parameters={**self.parameters, **kw})

    def describe(self) -> str:
        return json.dumps(self.parameters, sort_keys=True)


def run_scenario(cfg: ScenarioConfig) -> Table:
    if cfg.scenario == "measure":
        raise ValueError("measure does not produce a table; use the measure command")
    table = RUNNERS[cfg.scenario](cfg.parameters, cfg.seed)
    table.check_populations()
    return table
