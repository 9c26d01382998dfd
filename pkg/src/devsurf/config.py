"""Run configuration: ``key = value`` text with ``[weights]``, ``[solver]`` and ``[panels]``."""
from dataclasses import dataclass, field, fields, asdict

from .energies import EnergyWeights
from .errors import ConfigError
from .paneling import PanelSpec
from .solver import SolverConfig

MODES = ("fit", "develop", "panelize", "analyze", "rulings")


def _pair(text):
    parts = text.replace(",", " ").replace("x", " ").split()
    if len(parts) != 2:
        raise ValueError("expected two integers")
    return int(parts[0]), int(parts[1])


# top-level key -> (parser, attribute)
TOP_KEYS = {
    "scenario": str,
    "reference": str,
    "surface": str,
    "ctrl": _pair,
    "panels": _pair,
    "samples": _pair,
    "patch": _pair,
    "overlap": _pair,
    "panel_samples": _pair,
    "close_samples": _pair,
    "fit_iterations": int,
    "moment_mode": str,
    "tessellation": _pair,
    "seed": int,
    "out": str,
}


@dataclass
class RunConfig:
    mode: str = "develop"
    scenario: str = None
    reference: str = None
    surface: str = None
    ctrl: tuple = (7, 7)
    panels: tuple = (1, 1)
    samples: tuple = (30, 60)
    patch: tuple = (5, 5)
    overlap: tuple = (2, 2)
    panel_samples: tuple = (4, 4)
    close_samples: tuple = (10, 10)
    fit_iterations: int = 10
    moment_mode: str = "variable"
    tessellation: tuple = (20, 20)
    seed: int = 0
    out: str = "out"
    weights: EnergyWeights = field(default_factory=EnergyWeights)
    solver: SolverConfig = field(default_factory=SolverConfig)
    panel_specs: dict = field(default_factory=dict)
    default_panel: str = None

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError("mode", f"must be one of {', '.join(MODES)}")
        if self.moment_mode not in ("variable", "refit-per-iteration"):
            raise ConfigError("moment_mode", "must be 'variable' or 'refit-per-iteration'")
        for name in ("ctrl", "panels", "samples", "patch", "panel_samples", "close_samples",
                     "tessellation"):
            if min(getattr(self, name)) < 1:
                raise ConfigError(name, "counts must be positive")
        sources = [k for k in ("scenario", "reference", "surface") if getattr(self, k)]
        if not sources:
            raise ConfigError("scenario", "one of scenario, reference or surface is required")
        if self.mode in ("fit", "panelize") and not (self.scenario or self.reference):
            raise ConfigError("reference", f"{self.mode} needs a reference or scenario")
        if self.mode == "panelize":
            self.specs()
        return self

    def specs(self):
        """Panel specs in row-major panel order."""
        rows, cols = self.panels
        out = []
        for i in range(rows * cols):
            text = self.panel_specs.get(i, self.default_panel)
            if text is None:
                raise ConfigError(f"panel {i}", "no spec given (and no 'default')")
            try:
                out.append(PanelSpec.parse(text))
            except ValueError as exc:
                raise ConfigError(f"panel {i}", str(exc)) from None
        extra = [i for i in self.panel_specs if i >= rows * cols]
        if extra:
            raise ConfigError(f"panel {extra[0]}", f"grid has only {rows * cols} panels")
        return out

    def dumps(self):
        """Effective configuration in the same grammar it is read from."""
        lines = [f"mode = {self.mode}"]
        for key in TOP_KEYS:
            value = getattr(self, key)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = f"{value[0]} {value[1]}"
            lines.append(f"{key} = {value}")
        lines.append("")
        lines.append("[weights]")
        lines += [f"{k} = {v!r}" for k, v in asdict(self.weights).items()]
        lines.append("")
        lines.append("[solver]")
        lines += [f"{k} = {v!r}" for k, v in asdict(self.solver).items()]
        if self.panel_specs or self.default_panel:
            lines.append("")
            lines.append("[panels]")
            if self.default_panel:
                lines.append(f"default = {self.default_panel}")
            lines += [f"panel {i} = {s}" for i, s in sorted(self.panel_specs.items())]
        return "\n".join(lines) + "\n"


def _typed(cls, values, section):
    types = {f.name: f.type for f in fields(cls)}
    kwargs = {}
    for key, (text, lineno) in values.items():
        if key not in types:
            raise ConfigError(f"{section}.{key}", f"unknown key (line {lineno})")
        conv = int if types[key] in (int, "int") else float
        try:
            kwargs[key] = conv(text)
        except ValueError:
            raise ConfigError(f"{section}.{key}", f"bad value {text!r} (line {lineno})") from None
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(section, str(exc)) from None


def parse_config(text, mode=None, base=None):
    """Parse config text into a :class:`RunConfig` (not yet validated)."""
    cfg = base or RunConfig()
    if mode:
        cfg.mode = mode
    section = None
    sections = {"weights": {}, "solver": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in ("weights", "solver", "panels"):
                raise ConfigError(f"[{section}]", f"unknown section (line {lineno})")
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(line, f"expected 'key = value' (line {lineno})")
        key, value = key.strip(), value.strip()
        if section in ("weights", "solver"):
            sections[section][key] = (value, lineno)
        elif section == "panels":
            if key == "default":
                cfg.default_panel = value
                continue
            parts = key.split()
            if len(parts) != 2 or parts[0] != "panel" or not parts[1].isdigit():
                raise ConfigError(key, f"expected 'panel <index>' (line {lineno})")
            idx = int(parts[1])
            try:
                PanelSpec.parse(value)
            except ValueError as exc:
                raise ConfigError(f"panel {idx}", f"{exc} (line {lineno})") from None
            cfg.panel_specs[idx] = value
        elif key == "mode":
            if mode is None:
                cfg.mode = value
        elif key in TOP_KEYS:
            try:
                setattr(cfg, key, TOP_KEYS[key](value))
            except ValueError as exc:
                raise ConfigError(key, f"bad value {value!r}: {exc} (line {lineno})") from None
        else:
            raise ConfigError(key, f"unknown key (line {lineno})")
    if sections["weights"]:
        merged = {k: (repr(v), 0) for k, v in asdict(cfg.weights).items()}
        merged.update(sections["weights"])
        cfg.weights = _typed(EnergyWeights, merged, "weights")
    if sections["solver"]:
        merged = {k: (repr(v), 0) for k, v in asdict(cfg.solver).items()}
        merged.update(sections["solver"])
        cfg.solver = _typed(SolverConfig, merged, "solver")
    return cfg


def load_config(path, mode=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, mode)
