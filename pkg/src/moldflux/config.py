"""Run configuration: typed sections, a line-oriented ``key = value``
grammar, canonical serialization and config hashing.

A config file is INI-style: ``[section]`` headers, one ``key = value`` per
line, ``#`` comments.  ``to_text`` always emits the canonical section and
key order with round-tripping float reprs, so load -> save -> load is the
identity and the sha256 of the canonical text identifies a run.
"""

import configparser
import hashlib
import io
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import ConfigurationError

_SENTINEL = object()


@dataclass(frozen=True)
class GridSection:
    nx: int = 20
    ny: int = 8
    nz: int = 16
    lx: float = 1.0
    ly: float = 0.04
    lz: float = 0.8
    refine_truth: int = 1  # optional: 2 runs the truth on a finer mesh


@dataclass(frozen=True)
class MaterialSection:
    rho: float = 5.0
    cp: float = 20.0
    ks: float = 3.0
    h: float = 5.66e4
    t_fluid: float = 350.0
    t_init: float = 400.0


@dataclass(frozen=True)
class FluxTruthSection:
    b: float = 200.0
    c: float = 300.0
    f_max: float = 0.1


@dataclass(frozen=True)
class SensorSection:
    n_x: int = 10
    n_z: int = 10
    plane_y: float = 0.02
    margin_frac: float = 0.05  # optional


@dataclass(frozen=True)
class RbfSection:
    kernel: str = "multiquadric"
    eta: float = 3.0
    centers: str = "auto"  # optional: "x,z; x,z; ..." overrides the default five


@dataclass(frozen=True)
class PriorSection:
    kappa: float = 0.2
    shift: float = 0.3
    state_var: float = 10.0


@dataclass(frozen=True)
class NoiseSection:
    q: float = 0.5
    r: float = 0.034


@dataclass(frozen=True)
class FilterSection:
    ensemble_size: int = 300
    beta_max: int = 1


@dataclass(frozen=True)
class TimeSection:
    dt: float = 0.2
    obs_span: float = 0.4
    t_f: float = 20.0


@dataclass(frozen=True)
class RunSection:
    seed: int = 2026


@dataclass(frozen=True)
class ProbesSection:
    temperature: tuple = (0.91, 0.02, 0.55)
    flux: tuple = (0.91, 0.0, 0.55)


@dataclass(frozen=True)
class SweepSection:
    parameter: str = ""
    values: tuple = ()


_OPTIONAL_KEYS = {
    ("grid", "refine_truth"),
    ("sensors", "margin_frac"),
    ("rbf", "centers"),
}

_SECTIONS = {
    "grid": GridSection,
    "material": MaterialSection,
    "flux_truth": FluxTruthSection,
    "sensors": SensorSection,
    "rbf": RbfSection,
    "prior": PriorSection,
    "noise": NoiseSection,
    "filter": FilterSection,
    "time": TimeSection,
    "run": RunSection,
    "probes": ProbesSection,
}

SWEEPABLE = {
    "ensemble_size": ("filter", "ensemble_size", int),
    "eta": ("rbf", "eta", float),
    "kappa": ("prior", "kappa", float),
    "shift": ("prior", "shift", float),
    "dt": ("time", "dt", float),
    "obs_span": ("time", "obs_span", float),
}

_TWIN_SECTIONS = ("grid", "material", "flux_truth", "sensors", "time")


@dataclass(frozen=True)
class RunConfig:
    grid: GridSection = GridSection()
    material: MaterialSection = MaterialSection()
    flux_truth: FluxTruthSection = FluxTruthSection()
    sensors: SensorSection = SensorSection()
    rbf: RbfSection = RbfSection()
    prior: PriorSection = PriorSection()
    noise: NoiseSection = NoiseSection()
    filter: FilterSection = FilterSection()
    time: TimeSection = TimeSection()
    run: RunSection = RunSection()
    probes: ProbesSection = ProbesSection()
    sweep: SweepSection | None = None

    # -- serialization ------------------------------------------------------

    def to_text(self):
        out = io.StringIO()
        for name in _SECTIONS:
            section = getattr(self, name)
            out.write(f"[{name}]\n")
            for f in fields(section):
                out.write(f"{f.name} = {_format_value(getattr(section, f.name))}\n")
            out.write("\n")
        if self.sweep is not None:
            out.write("[sweep]\n")
            out.write(f"parameter = {self.sweep.parameter}\n")
            out.write(f"values = {' '.join(_format_value(v) for v in self.sweep.values)}\n")
        return out.getvalue()

    def to_dict(self):
        d = {name: {f.name: getattr(getattr(self, name), f.name)
                    for f in fields(getattr(self, name))}
             for name in _SECTIONS}
        if self.sweep is not None:
            d["sweep"] = {"parameter": self.sweep.parameter,
                          "values": list(self.sweep.values)}
        return d

    @property
    def config_hash(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    @property
    def twin_hash(self):
        """Hash of the subset that determines the twin dataset."""
        parts = []
        for name in _TWIN_SECTIONS:
            section = getattr(self, name)
            for f in fields(section):
                parts.append(f"{name}.{f.name}={_format_value(getattr(section, f.name))}")
        parts.append(f"noise.r={_format_value(self.noise.r)}")
        parts.append(f"run.seed={self.run.seed}")
        return hashlib.sha256("\n".join(parts).encode()).hexdigest()[:16]

    def with_value(self, parameter, value):
        """Copy with one sweepable hyperparameter replaced."""
        if parameter not in SWEEPABLE:
            raise ConfigurationError(
                f"unknown sweep parameter {parameter!r}; choose from {sorted(SWEEPABLE)}")
        section_name, key, typ = SWEEPABLE[parameter]
        section = getattr(self, section_name)
        return replace(self, **{section_name: replace(section, **{key: typ(value)})})

    def with_seed(self, seed):
        return replace(self, run=replace(self.run, seed=int(seed)))

    def with_kernel(self, kernel):
        return replace(self, rbf=replace(self.rbf, kernel=str(kernel)))

    # -- validation ---------------------------------------------------------

    def validate(self):
        """Build every domain object once; raises ConfigurationError on any
        violated precondition. Returns self for chaining."""
        from .driver import build_pieces
        from .twin import _check_schedule

        build_pieces(self)
        _check_schedule(self.time.dt, self.time.obs_span, self.time.t_f)
        if self.run.seed < 0:
            raise ConfigurationError("seed must be a nonnegative integer")
        if self.grid.refine_truth < 1:
            raise ConfigurationError("refine_truth must be >= 1")
        if self.sweep is not None and self.sweep.parameter not in SWEEPABLE:
            raise ConfigurationError(
                f"unknown sweep parameter {self.sweep.parameter!r}")
        if self.sweep is not None and len(self.sweep.values) == 0:
            raise ConfigurationError("sweep values must be non-empty")
        return self


def _format_value(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_format_value(x) for x in v)
    return str(v)


def _parse_scalar(raw, typ, where):
    try:
        if typ is int:
            if float(raw) != int(float(raw)):
                raise ValueError
            return int(float(raw))
        if typ is float:
            return float(raw)
        if typ is tuple:  # coordinate triple
            parts = [float(p) for p in raw.replace(",", " ").split()]
            if len(parts) != 3:
                raise ValueError
            return tuple(parts)
        return raw.strip()
    except ValueError:
        raise ConfigurationError(f"cannot parse {where} = {raw!r} as {typ.__name__}") from None


def from_text(text):
    """Parse a config document; every non-optional key must be present."""
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc

    known = set(_SECTIONS) | {"sweep"}
    for section in parser.sections():
        if section not in known:
            raise ConfigurationError(f"unknown config section [{section}]")

    kwargs = {}
    for name, cls in _SECTIONS.items():
        if not parser.has_section(name):
            raise ConfigurationError(f"missing config section [{name}]")
        section_kwargs = {}
        seen = set()
        for f in fields(cls):
            seen.add(f.name)
            if parser.has_option(name, f.name):
                raw = parser.get(name, f.name)
                typ = type(getattr(cls(), f.name))
                typ = {str: str, int: int, float: float, tuple: tuple}[typ]
                section_kwargs[f.name] = _parse_scalar(raw, typ, f"[{name}] {f.name}")
            elif (name, f.name) in _OPTIONAL_KEYS:
                pass  # default applies
            else:
                raise ConfigurationError(f"missing required key '{f.name}' in section [{name}]")
        for key in parser.options(name):
            if key not in seen:
                raise ConfigurationError(f"unknown key '{key}' in section [{name}]")
        kwargs[name] = cls(**section_kwargs)

    sweep = None
    if parser.has_section("sweep"):
        for key in ("parameter", "values"):
            if not parser.has_option("sweep", key):
                raise ConfigurationError(f"missing required key '{key}' in section [sweep]")
        parameter = parser.get("sweep", "parameter").strip()
        typ = SWEEPABLE.get(parameter, (None, None, float))[2]
        values = tuple(_parse_scalar(v, typ, "[sweep] values")
                       for v in parser.get("sweep", "values").replace(",", " ").split())
        sweep = SweepSection(parameter=parameter, values=values)

    return RunConfig(sweep=sweep, **kwargs)


def parse_centers(raw):
    """Parse the explicit-center grammar 'x,z; x,z; ...' into an (N,2) array."""
    pairs = []
    for item in raw.split(";"):
        item = item.strip()
        if not item:
            continue
        parts = [p for p in item.replace(",", " ").split()]
        if len(parts) != 2:
            raise ConfigurationError(
                f"center {item!r} must be an 'x,z' pair on the hot face")
        pairs.append((float(parts[0]), float(parts[1])))
    if not pairs:
        raise ConfigurationError("no RBF centers given")
    return np.asarray(pairs)


def gaussian_preset():
    """Reference hyperparameters for the Gaussian kernel run."""
    return RunConfig(
        rbf=RbfSection(kernel="gaussian", eta=0.5),
        prior=PriorSection(kappa=0.2, shift=0.0, state_var=10.0),
        filter=FilterSection(ensemble_size=375, beta_max=1),
        time=TimeSection(dt=0.1, obs_span=0.4, t_f=20.0),
    )


def multiquadric_preset():
    """Reference hyperparameters for the Multiquadric kernel run."""
    return RunConfig()
