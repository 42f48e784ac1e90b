"""Run configuration: INI sections parsed into typed, validated dataclasses.

Every section maps onto one dataclass below; unknown sections or keys are
rejected with the offending line number.  ``RunConfig.to_ini`` writes a
file that parses back to an equal object.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import re
import typing
from dataclasses import dataclass, field

CONSTRUCTIONS = ("prop1", "prop2", "lemma1-riemann")
ANALYSES = ("build", "times", "exact-eval", "validate", "seminorm", "nondegeneracy", "check-lemmas", "tiling")


class ConfigError(ValueError):
    pass


def _require(cond: bool, key: str, msg: str) -> None:
    if not cond:
        raise ConfigError(f"{key}: {msg}")


@dataclass(frozen=True)
class RunSection:
    construction: str = "prop1"
    analyses: tuple[str, ...] = ("times",)
    seed: int = 0

    def __post_init__(self):
        _require(self.construction in CONSTRUCTIONS, "run.construction", f"must be one of {CONSTRUCTIONS}")
        for a in self.analyses:
            _require(a in ANALYSES, "run.analyses", f"unknown analysis {a!r}")
        _require(self.seed >= 0, "run.seed", "must be >= 0")


@dataclass(frozen=True)
class ParamsSection:
    zeta: int = 1
    d: int = 2
    eps: float = 1.0 / 30.0
    R: float = 1.0
    N: typing.Optional[int] = None
    n_max: typing.Optional[int] = None
    box_half_width: typing.Optional[float] = None
    inner_fraction: float = 0.5

    def __post_init__(self):
        _require(self.zeta >= 1, "params.zeta", "must be >= 1")
        _require(self.d >= 1, "params.d", "must be >= 1")
        _require(self.eps > 0, "params.eps", "must be positive")
        _require(self.R > 0, "params.R", "must be positive")
        _require(0 < self.inner_fraction < 1, "params.inner_fraction", "must lie in (0, 1)")


@dataclass(frozen=True)
class FluxSection:
    family: typing.Optional[str] = None
    u_bound: typing.Optional[float] = None
    coefficients: typing.Optional[str] = None
    direction: typing.Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.family is not None:
            _require(self.family in ("power-law", "prop2-pair", "polynomial"), "flux.family", "unknown family")
            _require(self.family != "polynomial" or self.coefficients is not None, "flux.coefficients",
                     "required for the polynomial family")
        _require(self.u_bound is None or self.u_bound > 0, "flux.u_bound", "must be positive")

    def coefficient_lists(self) -> list[list[float]]:
        """``"0 0 0.5; 0 1"`` -> ``[[0, 0, 0.5], [0, 1]]`` (ascending powers per component)."""
        rows = [r for r in (self.coefficients or "").split(";") if r.strip()]
        return [[float(v) for v in r.split()] for r in rows]


@dataclass(frozen=True)
class RiemannSection:
    a: float = 0.2
    b: float = 0.6
    box_half_width: float = 1.0

    def __post_init__(self):
        _require(self.box_half_width > 0, "riemann.box_half_width", "must be positive")


@dataclass(frozen=True)
class ExactEvalSection:
    t_fraction: float = 0.5
    samples: int = 201

    def __post_init__(self):
        _require(0 <= self.t_fraction < 1, "exact-eval.t_fraction", "must lie in [0, 1)")
        _require(self.samples >= 2, "exact-eval.samples", "must be >= 2")


@dataclass(frozen=True)
class ValidateSection:
    cells: tuple[int, ...] = (1024, 2048, 4096)
    t_fraction: float = 0.5
    cfl: float = 0.9
    pad: float = 1.0
    order_min: float = 0.7
    order_max: float = 1.3
    error_max: float = 1e-2

    def __post_init__(self):
        _require(len(self.cells) >= 2 and all(c > 0 for c in self.cells), "validate.cells",
                 "need at least two positive cell counts")
        _require(0 < self.t_fraction < 1, "validate.t_fraction", "must lie in (0, 1)")
        _require(0 < self.cfl < 1, "validate.cfl", "must lie in (0, 1)")
        _require(self.pad >= 0, "validate.pad", "must be >= 0")


@dataclass(frozen=True)
class SeminormSection:
    s: float = 0.4
    p: float = 1.0
    theta: float = 1.0
    axis: int = 0
    h_min: typing.Optional[float] = None
    h_max: typing.Optional[float] = None
    per_decade: int = 64
    t_fraction: float = 0.0
    tol: float = 0.05
    bounded_tol: float = 0.02
    truncations: typing.Optional[tuple[int, ...]] = None

    def __post_init__(self):
        _require(0 < self.s < 1, "seminorm.s", "must lie in (0, 1)")
        _require(self.truncations is None or (len(self.truncations) >= 3 and min(self.truncations) >= 1),
                 "seminorm.truncations", "need at least three positive n_max values")
        _require(self.p >= 1, "seminorm.p", "must be >= 1")
        _require(self.theta > 0, "seminorm.theta", "must be positive")
        _require(self.axis >= 0, "seminorm.axis", "must be >= 0")
        _require(self.h_min is None or self.h_min > 0, "seminorm.h_min", "must be positive")
        _require(self.per_decade >= 2, "seminorm.per_decade", "must be >= 2")
        _require(0 <= self.t_fraction < 1, "seminorm.t_fraction", "must lie in [0, 1)")


@dataclass(frozen=True)
class NondegeneracySection:
    r0: typing.Optional[float] = None
    delta_min: float = 1e-8
    delta_max: float = 1e-1
    n_deltas: int = 57
    sphere_samples: int = 1000
    v_grid: int = 1_000_000
    expected: typing.Optional[float] = None
    tol: float = 0.05

    def __post_init__(self):
        _require(0 < self.delta_min < self.delta_max < 1, "nondegeneracy.delta_min",
                 "need 0 < delta_min < delta_max < 1")
        _require(self.n_deltas >= 4, "nondegeneracy.n_deltas", "must be >= 4")
        _require(self.sphere_samples >= 1, "nondegeneracy.sphere_samples", "must be >= 1")
        _require(self.v_grid >= 1000, "nondegeneracy.v_grid", "must be >= 1000")


@dataclass(frozen=True)
class LemmasSection:
    samples: int = 100_000

    def __post_init__(self):
        _require(self.samples >= 1, "check-lemmas.samples", "must be >= 1")


@dataclass(frozen=True)
class TilingSection:
    K: int = 3
    time_gap: float = 1.0

    def __post_init__(self):
        _require(self.K >= 1, "tiling.K", "must be >= 1")
        _require(self.time_gap > 0, "tiling.time_gap", "must be positive")


SECTIONS: dict[str, type] = {
    "run": RunSection,
    "params": ParamsSection,
    "flux": FluxSection,
    "riemann": RiemannSection,
    "exact-eval": ExactEvalSection,
    "validate": ValidateSection,
    "seminorm": SeminormSection,
    "nondegeneracy": NondegeneracySection,
    "check-lemmas": LemmasSection,
    "tiling": TilingSection,
}


def _attr(section: str) -> str:
    return section.replace("-", "_")


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    params: ParamsSection = field(default_factory=ParamsSection)
    flux: FluxSection = field(default_factory=FluxSection)
    riemann: RiemannSection = field(default_factory=RiemannSection)
    exact_eval: ExactEvalSection = field(default_factory=ExactEvalSection)
    validate: ValidateSection = field(default_factory=ValidateSection)
    seminorm: SeminormSection = field(default_factory=SeminormSection)
    nondegeneracy: NondegeneracySection = field(default_factory=NondegeneracySection)
    check_lemmas: LemmasSection = field(default_factory=LemmasSection)
    tiling: TilingSection = field(default_factory=TilingSection)

    def section(self, name: str):
        return getattr(self, _attr(name))

    def to_ini(self) -> str:
        lines = []
        for name in SECTIONS:
            sec = self.section(name)
            lines.append(f"[{name}]")
            for f in dataclasses.fields(sec):
                v = getattr(sec, f.name)
                if v is not None:
                    lines.append(f"{f.name} = {_format(v)}")
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.to_ini().encode()).hexdigest()

    def with_analyses(self, analyses) -> "RunConfig":
        return dataclasses.replace(self, run=dataclasses.replace(self.run, analyses=tuple(analyses)))


def _format(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _convert(text: str, hint, key: str):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union:
        inner = [a for a in args if a is not type(None)][0]
        if text.strip().lower() in ("", "none"):
            return None
        return _convert(text, inner, key)
    if origin is tuple:
        items = [x.strip() for x in text.split(",") if x.strip()]
        return tuple(_convert(x, args[0], key) for x in items)
    try:
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {text!r} as {hint.__name__}") from exc
    return text.strip()


def _line_numbers(text: str) -> dict[tuple[str, str], int]:
    out, section = {}, None
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"^\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            out[(section, "")] = i
        elif section and line and line[0] not in "#;":
            key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
            out[(section, key)] = i
    return out


def parse_config(text: str) -> RunConfig:
    """Parse INI text; errors name the section, key and line."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    lines = _line_numbers(text)
    built = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"line {lines.get((name, ''), '?')}: unknown section [{name}]")
        cls = SECTIONS[name]
        hints = typing.get_type_hints(cls)
        kwargs = {}
        for key, val in parser.items(name):
            where = f"line {lines.get((name, key), '?')}"
            if key not in hints:
                raise ConfigError(f"{where}: unknown key {name}.{key}")
            try:
                kwargs[key] = _convert(val, hints[key], f"{name}.{key}")
            except ConfigError as exc:
                raise ConfigError(f"{where}: {exc}") from exc
        try:
            built[_attr(name)] = cls(**kwargs)
        except ConfigError as exc:
            key = str(exc).split(":", 1)[0].split(".", 1)[-1]
            raise ConfigError(f"line {lines.get((name, key), lines.get((name, ''), '?'))}: {exc}") from exc
    return RunConfig(**built)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
