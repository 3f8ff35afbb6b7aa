"""Run configuration: parsing, validation and the resolved "effective" config."""

from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fields import GeneratorSpec, generate_field
from .lattice import PrioritySet, SuitabilityField, load_suitability
from .sampler import SAMPLERS, AnnealSchedule

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class AnalysisOptions:
    alpha: float = 0.1
    smoothing_window: int = 3
    bin_width: int = 1
    min_depth: float = 0.5
    degeneracy_tol: float = 0.5
    refine_depth: int = 0
    refine_multiplier: int = 2


@dataclass(frozen=True)
class RunConfig:
    rows: int = 30
    cols: int = 30
    n_types: int = 3
    periodic: bool = False
    suitability_file: str | None = None
    generator: dict | None = None
    compactness: float = 1.0
    suitability_priorities: tuple = (1.0,)
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    sampler: str = "wolff"
    interleave: bool = True
    seeds: tuple = ()
    master_seed: int = 0
    output_dir: str = "runs/latest"
    parallelism: int = 1
    snapshots: str = "flashpoints"
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)

    def priorities(self, p_s: float) -> PrioritySet:
        return PrioritySet(self.compactness, p_s, self.schedule.t_target)

    def build_field(self, base_dir: Path | None = None) -> SuitabilityField:
        if self.generator is not None:
            g = self.generator
            spec = GeneratorSpec(g["kind"], self.rows, self.cols, self.n_types, g.get("params", {}))
            return generate_field(spec)
        path = Path(self.suitability_file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        f = load_suitability(path, self.n_types)
        if f.shape != (self.rows, self.cols) or f.n_types != self.n_types:
            raise ConfigError("suitability_file",
                              f"field is {f.shape}x{f.n_types}, config says {self.rows}x{self.cols}x{self.n_types}")
        return f

    def effective(self) -> dict:
        d = asdict(self)
        d["suitability_priorities"] = list(self.suitability_priorities)
        d["seeds"] = list(self.seeds)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def replace(self, **changes) -> "RunConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return RunConfig(**d)


def priority_range(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic range, rounded to kill float drift."""
    if step <= 0:
        raise ConfigError("sweep.step", "must be positive")
    if stop < start:
        raise ConfigError("sweep.stop", "must be >= start")
    n = int(round((stop - start) / step)) + 1
    return [round(start + k * step, 10) for k in range(n)]


def _positive_int(d: dict, key: str, default: int, minimum: int = 1) -> int:
    v = d.get(key, default)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise ConfigError(key, f"must be an integer >= {minimum}, got {v!r}")
    return v


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    known = {f.name for f in fields(RunConfig)} | {"sweep", "suitability", "suitability_priority",
                                                  "seed_count", "schema_version"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown configuration key")

    rows = _positive_int(raw, "rows", 30)
    cols = _positive_int(raw, "cols", 30)
    n_types = _positive_int(raw, "n_types", 3, minimum=2)

    src = raw.get("suitability", {})
    file_ = raw.get("suitability_file", src.get("file"))
    gen = raw.get("generator", src.get("generator"))
    if (file_ is None) == (gen is None):
        raise ConfigError("suitability", "give exactly one of a file path or a generator spec")
    if gen is not None:
        if "kind" not in gen:
            raise ConfigError("generator.kind", "missing")
        try:
            GeneratorSpec(gen["kind"], rows, cols, n_types, gen.get("params", {}))
        except ValueError as exc:
            raise ConfigError("generator", str(exc)) from None

    if "sweep" in raw and ("suitability_priority" in raw or "suitability_priorities" in raw):
        raise ConfigError("sweep", "give either a sweep or fixed suitability priorities")
    if "sweep" in raw:
        sw = raw["sweep"]
        if "values" in sw:
            ps = [float(v) for v in sw["values"]]
        else:
            try:
                ps = priority_range(float(sw["start"]), float(sw["stop"]), float(sw["step"]))
            except KeyError as exc:
                raise ConfigError(f"sweep.{exc.args[0]}", "missing") from None
    elif "suitability_priorities" in raw:
        ps = [float(v) for v in raw["suitability_priorities"]]
    else:
        ps = [float(raw.get("suitability_priority", 1.0))]
    if not ps:
        raise ConfigError("sweep", "no priority values")
    if any(b <= a for a, b in zip(ps, ps[1:])):
        raise ConfigError("sweep", "priority values must be strictly increasing")
    if any(p < 0 for p in ps):
        raise ConfigError("sweep", "priorities must be non-negative")

    compactness = float(raw.get("compactness", 1.0))
    if compactness < 0:
        raise ConfigError("compactness", "must be non-negative")

    try:
        schedule = AnnealSchedule(**raw.get("schedule", {}))
    except TypeError as exc:
        raise ConfigError("schedule", str(exc)) from None
    except ValueError as exc:
        raise ConfigError("schedule", str(exc)) from None

    sampler = raw.get("sampler", "wolff")
    if sampler not in SAMPLERS:
        raise ConfigError("sampler", f"must be one of {SAMPLERS}")

    master_seed = raw.get("master_seed", 0)
    if not isinstance(master_seed, int) or not 0 <= master_seed < 2**64:
        raise ConfigError("master_seed", "must be an unsigned 64-bit integer")
    if "seeds" in raw and "seed_count" in raw:
        raise ConfigError("seeds", "give either seeds or seed_count")
    if "seeds" in raw:
        seeds = [int(s) for s in raw["seeds"]]
        if not seeds or len(set(seeds)) != len(seeds):
            raise ConfigError("seeds", "must be a non-empty list of distinct integers")
        if any(not 0 <= s < 2**64 for s in seeds):
            raise ConfigError("seeds", "must be unsigned 64-bit integers")
    else:
        seeds = list(range(_positive_int(raw, "seed_count", 300)))

    a = dict(raw.get("analysis", {}))
    try:
        analysis = AnalysisOptions(**a)
    except TypeError as exc:
        raise ConfigError("analysis", str(exc)) from None
    if not 0 < analysis.alpha < 1:
        raise ConfigError("analysis.alpha", f"must lie in (0, 1), got {analysis.alpha}")
    if analysis.smoothing_window < 1:
        raise ConfigError("analysis.smoothing_window", "must be >= 1")
    if analysis.bin_width < 1:
        raise ConfigError("analysis.bin_width", "must be >= 1")
    if analysis.refine_depth < 0 or analysis.refine_multiplier < 1:
        raise ConfigError("analysis.refine_depth", "refine_depth >= 0 and refine_multiplier >= 1 required")

    snapshots = raw.get("snapshots", "flashpoints")
    if snapshots not in ("flashpoints", "none"):
        raise ConfigError("snapshots", "must be 'flashpoints' or 'none'")

    return RunConfig(rows=rows, cols=cols, n_types=n_types, periodic=bool(raw.get("periodic", False)),
                     suitability_file=file_, generator=gen, compactness=compactness,
                     suitability_priorities=tuple(ps), schedule=schedule, sampler=sampler,
                     interleave=bool(raw.get("interleave", True)), seeds=tuple(seeds),
                     master_seed=master_seed, output_dir=str(raw.get("output_dir", "runs/latest")),
                     parallelism=_positive_int(raw, "parallelism", 1), snapshots=snapshots,
                     analysis=analysis)


def load_config(path) -> RunConfig:
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix.lower() == ".toml":
            raw = tomllib.loads(text)
        else:
            raw = json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(str(path), f"parse error: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(str(path), "top level must be a table/object")
    return config_from_dict(raw)


def write_effective_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.effective(), indent=2, sort_keys=True) + "\n")
