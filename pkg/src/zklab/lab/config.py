"""Experiment configuration: INI files, presets and eager validation.

A config file has flat sections (``experiment``, ``grid``, ``solver``,
``weights``, ``data``, ``psido``) of ``key = value`` pairs.  Values missing
from the file come from the preset of the chosen experiment, and command-line
``section.key=value`` overrides win over both.
"""

import configparser
import os
from dataclasses import dataclass, field

import numpy as np

from ..evolve import DEALIAS, INTEGRATORS, STABILITY_LIMIT
from ..psido import CATALOG, MAX_COMPOSITION_ORDER
from ..spectral import MODEL_DIM, cone_condition, linear_rate, make_grid
from ..diagnostics import SEAM_MARGIN

EXPERIMENTS = (
    "poly-decay-zk",
    "exp-decay-zk",
    "poly-decay-kdv",
    "exp-decay-kdv",
    "soliton-validate",
    "linear-growth",
    "psido-suite",
    "weights-suite",
)
OUTPUT_ENV = "ZKLAB_OUTPUT"
SECTIONS = ("experiment", "grid", "solver", "weights", "data", "psido")

_ZK_GRID = {"dim": 2, "box_length": 80.0, "points": 256}
_KDV_GRID = {"dim": 1, "box_length": 200.0, "points": 1024}
_ZK_SOLVER = {"model": "zk", "dt": 0.01, "t_end": 1.0, "snapshot_stride": 5}
_KDV_SOLVER = {"model": "kdv", "dt": 0.002, "t_end": 2.0, "snapshot_stride": 25}

PRESETS = {
    "poly-decay-zk": {
        "grid": _ZK_GRID, "solver": _ZK_SOLVER,
        "weights": {"r": 2.0, "eps": 0.5, "tau": 2.5, "sigma": (1.0, 0.0), "nu": 25.0,
                    "kappa": 0.0, "delta": 0.1},
        "data": {"right": "gauss", "width": 3.0, "rho": 3.5, "tail_amplitude": 0.05,
                 "taper_at": -28.0, "transverse_width": 3.0},
    },
    "exp-decay-zk": {
        "grid": _ZK_GRID, "solver": _ZK_SOLVER,
        "weights": {"b": 0.5, "eps": 0.5, "tau": 2.5, "sigma": (1.0, 0.0), "nu": 25.0,
                    "kappa": 0.0, "delta": 0.1},
        "data": {"right": "exp", "width": 5.0, "rate": 1.0, "amplitude": 0.2,
                 "tail_amplitude": 0.0, "transverse_width": 3.0},
    },
    "poly-decay-kdv": {
        "grid": _KDV_GRID, "solver": _KDV_SOLVER,
        "weights": {"r": 2.0, "eps": 0.5, "tau": 2.5, "sigma": (1.0,), "nu": 25.0,
                    "kappa": 0.0, "delta": 0.1},
        "data": {"right": "gauss", "width": 3.0, "rho": 3.5, "amplitude": 0.3,
                 "tail_amplitude": 0.05, "taper_at": -70.0},
    },
    "exp-decay-kdv": {
        "grid": _KDV_GRID, "solver": dict(_KDV_SOLVER, t_end=1.0),
        "weights": {"b": 0.5, "eps": 0.5, "tau": 2.5, "sigma": (1.0,), "nu": 25.0,
                    "kappa": 0.0, "delta": 0.1},
        "data": {"right": "exp", "width": 3.0, "rate": 1.0, "amplitude": 0.2,
                 "tail_amplitude": 0.0},
    },
    "soliton-validate": {
        "grid": _KDV_GRID,
        "solver": {"model": "kdv", "dt": 0.001, "t_end": 1.0, "snapshot_stride": 100},
        "data": {"c": 1.0},
    },
    "linear-growth": {
        "grid": {"dim": 2, "box_length": 256.0, "points": 256},
        "solver": {"model": "zk", "t_end": 8.0},
        "weights": {"rs": (0.5, 1.0, 2.0), "t_start": 1.0, "n_times": 15},
        "data": {"width": 4.0},
    },
    "psido-suite": {
        "grid": {"dim": 1, "box_length": 32.0, "points": 64},
        "weights": {"eps": 3.0, "tau": 15.0},
        "psido": {"symbol": "product", "order": 3, "m": 1.0, "q": 1.0, "samples": 100},
    },
    "weights-suite": {
        "weights": {"eps": 0.5, "tau": 2.5, "b": 0.5, "r": 0.5},
    },
}

# keys whose values are tuples of floats
_TUPLE_KEYS = {"sigma", "rs"}
_STR_KEYS = {"id", "output", "model", "integrator", "dealias", "right", "symbol", "method"}
_INT_KEYS = {"dim", "points", "snapshot_stride", "seed", "order", "n_times", "samples"}


class ConfigError(ValueError):
    """Raised with every violated precondition listed, one per line."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid experiment config:\n  - " + "\n  - ".join(self.violations))


def _parse_value(key, raw):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    if key in _STR_KEYS:
        return raw
    if key in _TUPLE_KEYS:
        return tuple(float(v) for v in raw.replace(" ", "").split(",") if v)
    if raw.lower() in ("none", ""):
        return None
    if key in _INT_KEYS:
        return int(raw)
    return float(raw)


@dataclass
class ExperimentConfig:
    """Parsed and validated settings of one experiment run.

    Attributes are plain dictionaries per section so that the config echo in
    the run manifest mirrors the file layout.
    """

    id: str
    seed: int = 1
    output: str = None
    grid: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    weights: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    psido: dict = field(default_factory=dict)

    @classmethod
    def from_preset(cls, experiment_id, overrides=None, **kwargs):
        if experiment_id not in PRESETS:
            raise ConfigError([f"experiment id must be one of {list(EXPERIMENTS)}, got {experiment_id!r}"])
        preset = PRESETS[experiment_id]
        sections = {name: dict(preset.get(name, {})) for name in SECTIONS[1:]}
        cfg = cls(experiment_id, **kwargs, **sections)
        for key, value in (overrides or {}).items():
            cfg.set(key, value)
        cfg.validate()
        return cfg

    def set(self, dotted, value):
        """Apply an override ``section.key = value`` (string values are parsed)."""
        if "." not in dotted:
            raise ConfigError([f"override {dotted!r} must look like section.key"])
        section, key = dotted.split(".", 1)
        if section not in SECTIONS:
            raise ConfigError([f"unknown config section {section!r}"])
        value = _parse_value(key, value)
        if section == "experiment":
            if key not in ("id", "seed", "output"):
                raise ConfigError([f"unknown experiment key {key!r}"])
            setattr(self, key, value)
        else:
            getattr(self, section)[key] = value

    # ------------------------------------------------------------ accessors

    @property
    def model(self):
        if self.id.endswith("-zk"):
            return "zk"
        if self.id.endswith("-kdv"):
            return "kdv"
        return self.solver.get("model")

    def output_dir(self):
        root = os.environ.get(OUTPUT_ENV, "zklab-runs")
        return self.output or os.path.join(root, self.id)

    def make_grid(self):
        g = self.grid
        return make_grid(g["dim"], g["box_length"], g["points"])

    def to_dict(self):
        return {"experiment": {"id": self.id, "seed": self.seed, "output": self.output},
                "grid": dict(self.grid), "solver": dict(self.solver),
                "weights": {k: list(v) if isinstance(v, tuple) else v for k, v in self.weights.items()},
                "data": dict(self.data), "psido": dict(self.psido)}

    # ----------------------------------------------------------- validation

    def violations(self):
        """Every precondition that the config breaks, as readable strings."""
        out = []
        if self.id not in EXPERIMENTS:
            return [f"experiment id must be one of {list(EXPERIMENTS)}, got {self.id!r}"]
        if not isinstance(self.seed, (int, np.integer)):
            out.append(f"seed must be an integer, got {self.seed!r}")
        grid_ok = False
        if self.grid:
            dim, box, pts = self.grid.get("dim"), self.grid.get("box_length"), self.grid.get("points")
            if dim not in (1, 2):
                out.append(f"grid.dim must be 1 or 2, got {dim!r}")
            if box is None or not box > 0:
                out.append(f"grid.box_length must be > 0, got {box!r}")
            if pts is None or pts < 8 or pts % 2:
                out.append(f"grid.points must be even and >= 8, got {pts!r}")
            grid_ok = not out
            model = self.model
            if model is not None:
                if model not in MODEL_DIM:
                    out.append(f"solver.model must be 'zk' or 'kdv', got {model!r}")
                    grid_ok = False
                elif dim != MODEL_DIM[model]:
                    out.append(f"model {model!r} needs grid.dim = {MODEL_DIM[model]}, got {dim}")
                    grid_ok = False
        out += self._solver_violations(grid_ok)
        out += self._weight_violations()
        out += self._psido_violations()
        return out

    def _solver_violations(self, grid_ok):
        s = self.solver
        if not s or self.id == "linear-growth":
            if self.id == "linear-growth" and not s.get("t_end", 0) > self.weights.get("t_start", 0):
                return ["solver.t_end must exceed weights.t_start"]
            return []
        out = []
        dt, t_end = s.get("dt"), s.get("t_end")
        if dt is None or not dt > 0:
            out.append(f"solver.dt must be > 0, got {dt!r}")
        if t_end is None or not t_end > 0:
            out.append(f"solver.t_end must be > 0, got {t_end!r}")
        integrator = s.get("integrator", "etdrk4")
        if integrator not in INTEGRATORS:
            out.append(f"solver.integrator must be one of {list(INTEGRATORS)}, got {integrator!r}")
        if s.get("dealias", "two-thirds") not in DEALIAS:
            out.append(f"solver.dealias must be one of {list(DEALIAS)}, got {s.get('dealias')!r}")
        stride = s.get("snapshot_stride", 1)
        if not isinstance(stride, (int, np.integer)) or stride < 1:
            out.append(f"solver.snapshot_stride must be a positive integer, got {stride!r}")
        if grid_ok and not out:
            grid = self.make_grid()
            n_steps = int(np.ceil(t_end / dt - 1e-9))
            number = t_end / n_steps * float(np.max(np.abs(linear_rate(grid, self.model))))
            if number >= STABILITY_LIMIT[integrator]:
                out.append(f"dt*max|omega| = {number:.3g} exceeds the {integrator} stability limit")
        return out

    def _weight_violations(self):
        w, out = self.weights, []
        if "eps" in w or "tau" in w:
            eps, tau = w.get("eps"), w.get("tau")
            if eps is None or not eps > 0:
                out.append(f"weights.eps must be > 0, got {eps!r}")
            elif tau is None or not tau >= 5 * eps:
                out.append(f"weights.tau must satisfy tau >= 5*eps (eps={eps}, tau={tau})")
        if "sigma" in w:
            sigma = w["sigma"]
            if self.grid and len(sigma) != self.grid.get("dim"):
                out.append(f"weights.sigma has {len(sigma)} components for a {self.grid.get('dim')}D grid")
            elif not cone_condition(sigma):
                out.append(f"weights.sigma={tuple(sigma)} violates sigma_1 > 0, sqrt(3) sigma_1 > |sigma_perp|")
        for key in ("r", "b", "nu"):
            if key in w and not (w[key] is not None and w[key] > 0):
                out.append(f"weights.{key} must be > 0, got {w[key]!r}")
        if "rs" in w and not all(r > 0 for r in w["rs"]):
            out.append(f"weights.rs must be positive, got {w['rs']!r}")
        t_end = self.solver.get("t_end")
        if "delta" in w and t_end is not None:
            if not 0 < w["delta"] < t_end:
                out.append(f"weights.delta must lie in (0, t_end={t_end}), got {w['delta']!r}")
        if {"nu", "sigma"} <= w.keys() and self.grid and t_end and not out:
            # the moving edge must stay inside the seam-safe core for the whole run
            edge = w.get("kappa", 0.0) + w.get("eps", 0.0) - w["nu"] * t_end
            core = (0.5 - SEAM_MARGIN) * self.grid["box_length"] * float(np.linalg.norm(w["sigma"]))
            if edge <= -core:
                out.append(f"region edge reaches sigma.x = {edge:g} by t_end, beyond the seam-safe "
                           f"core (> {-core:g}); lower weights.nu or enlarge grid.box_length")
        return out

    def _psido_violations(self):
        p, out = self.psido, []
        if not p:
            return out
        if p.get("symbol") not in CATALOG:
            out.append(f"psido.symbol must be one of {list(CATALOG)}, got {p.get('symbol')!r}")
        order = p.get("order", 3)
        if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_COMPOSITION_ORDER:
            out.append(f"psido.order must be an integer in [1, {MAX_COMPOSITION_ORDER}], got {order!r}")
        if p.get("samples", 100) < 2:
            out.append("psido.samples must be >= 2")
        return out

    def validate(self):
        problems = self.violations()
        if problems:
            raise ConfigError(problems)
        return self


def load_config(path=None, experiment_id=None, overrides=None):
    """Read an INI file (optional), fill from the preset and apply overrides.

    Parameters
    ----------
    path : str, optional
        Config file; its ``[experiment] id`` selects the preset.
    experiment_id : str, optional
        Used when no file is given, or to check the file's id.
    overrides : dict, optional
        ``{"section.key": value}`` applied last.
    """
    file_values = {}
    if path is not None:
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        unknown = [s for s in parser.sections() if s not in SECTIONS]
        if unknown:
            raise ConfigError([f"unknown config section(s) {unknown} in {path}"])
        for section in parser.sections():
            for key, raw in parser.items(section):
                file_values[f"{section}.{key}"] = raw
    file_id = file_values.pop("experiment.id", None)
    experiment_id = experiment_id or file_id
    if experiment_id is None:
        raise ConfigError(["no experiment id given (set [experiment] id or pass one)"])
    merged = dict(file_values)
    merged.update(overrides or {})
    return ExperimentConfig.from_preset(experiment_id, merged)
