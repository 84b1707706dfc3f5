"""Run configuration: flat ``key = value`` files plus ``--key value`` overrides."""
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


@dataclass
class SimConfig:
    # geometry: exactly one of level / mesh / sequence is used (in that priority)
    level: int = 2
    mesh: str = ""
    sequence: str = ""
    order: int = 3
    tau: float = 1e-3
    t_end: float = 1.0
    Re: float = 1.0
    beta0: float = 100.0
    alpha: float = 1e-3
    epsilon: float = 1e-10
    max_iter: int = 50
    quad_degree: int = 0  # 0 selects 2k + 2
    initial: str = "zero"  # zero | random
    seed: int = 0
    area_mode: str = "exact"  # exact | linear
    project_w: bool = False
    exact_normal: bool = False
    analytic_V: bool = False
    output_dir: str = ""
    cadence: int = 10
    formats: str = "csv,vtk"
    timing: bool = False

    def validate(self):
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")
        if self.t_end <= 0:
            raise ConfigError("t_end must be > 0")
        if self.order < 2:
            raise ConfigError("order must be >= 2 (Taylor-Hood pressure has order k-1)")
        if self.cadence < 1:
            raise ConfigError("cadence must be >= 1")
        if self.Re <= 0 or self.beta0 <= 0 or self.epsilon <= 0:
            raise ConfigError("Re, beta0 and epsilon must be > 0")
        if self.initial not in ("zero", "random"):
            raise ConfigError(f"initial must be 'zero' or 'random', got {self.initial!r}")
        if self.area_mode not in ("exact", "linear"):
            raise ConfigError(f"area_mode must be 'exact' or 'linear', got {self.area_mode!r}")
        if self.quad_degree and not 1 <= self.quad_degree <= 12:
            raise ConfigError("quad_degree must be in [1, 12]")
        unknown = set(self.format_list) - {"csv", "vtk"}
        if unknown:
            raise ConfigError(f"unknown output formats {sorted(unknown)}")
        return self

    @property
    def degree(self):
        return self.quad_degree or min(2 * self.order + 2, 12)

    @property
    def n_steps(self):
        return int(round(self.t_end / self.tau))

    @property
    def format_list(self):
        return [f.strip() for f in self.formats.split(",") if f.strip()]

    def replace(self, **changes):
        return dataclasses.replace(self, **changes).validate()

    def dumps(self):
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


_FIELDS = {f.name: f for f in fields(SimConfig)}


def _coerce(key, text):
    f = _FIELDS.get(key)
    if f is None:
        raise ConfigError(f"unknown config key {key!r}")
    typ = f.type
    text = str(text).strip()
    try:
        if typ is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return typ(text)
    except ValueError:
        raise ConfigError(f"bad value {text!r} for {key} ({typ.__name__})") from None


def parse_config_text(text, base=None):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = _coerce(key, value)
    cfg = base or SimConfig()
    return dataclasses.replace(cfg, **values)


def load_config(path=None, overrides=None):
    """Config from an optional file, then ``overrides`` (dict of str -> str)."""
    cfg = SimConfig()
    if path:
        cfg = parse_config_text(Path(path).read_text(encoding="utf-8"), cfg)
    if overrides:
        cfg = dataclasses.replace(cfg, **{k: _coerce(k, v) for k, v in overrides.items()})
    return cfg.validate()


def parse_overrides(args):
    """``['--tau', '0.01', '--Re=10']`` -> {'tau': '0.01', 'Re': '10'}."""
    out = {}
    it = iter(args)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"missing value for --{key}") from None
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = value
    return out
