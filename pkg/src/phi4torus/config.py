"""Run configuration in flat ``section.key = value`` text.

Blank lines and lines starting with ``#`` are ignored. Every key must appear
in SCHEMA; unknown keys and malformed values are errors that name the line
and the key path. Lists are comma separated.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, Mapping, Tuple, Union


def _optional(parse: Callable[[str], Any]) -> Callable[[str], Any]:
    def inner(text: str):
        return None if text.strip().lower() in ("", "none") else parse(text)
    return inner


def _list(parse: Callable[[str], Any]) -> Callable[[str], Tuple]:
    def inner(text: str):
        return tuple(parse(p) for p in text.split(",") if p.strip())
    return inner


def _str(text: str) -> str:
    return text.strip()


VERBS = ("simulate", "sample-gibbs", "verify-invariance", "trees", "renorm-constants", "besov",
         "commutator-scan", "diagnostics")

# key -> (parser, default, description)
SCHEMA: Dict[str, Tuple[Callable[[str], Any], Any, str]] = {
    "run.verb": (_str, "simulate", f"one of {', '.join(VERBS)}"),
    "run.seed": (int, 0, "root seed of all random streams"),
    "run.output": (_str, "phi4_output", "output directory (PHI4_OUTPUT_DIR overrides)"),
    "sim.N": (int, 0, "Galerkin level"),
    "sim.m0": (float, 1.0, "mass"),
    "sim.lambda": (float, 0.1, "coupling"),
    "sim.lambda0": (float, 1.0, "upper bound allowed for the coupling"),
    "sim.dt": (float, 1e-3, "time step"),
    "sim.T": (float, 1.0, "horizon"),
    "sim.scheme": (_str, "exponential-euler", "exponential-euler or tamed-euler"),
    "sim.chains": (int, 1, "independent chains"),
    "sim.burn_in": (_optional(float), None, "tree burn-in time (default 20/m0^2)"),
    "sim.blowup_ceiling": (float, 1e8, "abort when a chain's squared L2 norm exceeds this"),
    "sim.record_every": (int, 10, "steps between recorded observables"),
    "gibbs.method": (_str, "mala", "mala or rejection"),
    "gibbs.mala_step": (float, 2.0, "pCN-Langevin step"),
    "gibbs.n_steps": (int, 200, "MALA steps per draw"),
    "gibbs.thinning": (int, 1, "keep every n-th MALA state"),
    "gibbs.beta": (float, 2.0, "inverse temperature of the Langevin target"),
    "gibbs.samples": (int, 1000, "draws written by sample-gibbs"),
    "invariance.dts": (_list(float), (4e-3, 2e-3, 1e-3), "step sizes for the residual study"),
    "invariance.checkpoints": (int, 5, "checkpoints for E||X_t||^2 constancy"),
    "invariance.reference_dt": (_optional(float), None, "reference step (default half the smallest)"),
    "trees.snapshot_every": (int, 0, "steps between tree snapshots (0: final only)"),
    "trees.dt": (float, 1e-2, "tree time step"),
    "besov.snapshot": (_str, "", "snapshot file to decompose"),
    "besov.p": (_str, "2", "Lebesgue exponent (number or inf)"),
    "commutator.alpha": (float, 0.5, "regularity of f"),
    "commutator.beta": (float, -1.05, "regularity of g"),
    "commutator.gamma": (float, -0.5, "Besov index of the measured norm"),
    "commutator.p": (float, 2.0, "Lebesgue exponent of the measured norm"),
    "commutator.K": (int, 1024, "cutoff of the random fields of x_1 (must exceed t_min^-1/2)"),
    "commutator.epsilon": (float, 0.1, "extra regularity of f"),
    "commutator.realizations": (int, 8, "field pairs averaged per time"),
    "commutator.t_min": (float, 1e-4, "smallest time"),
    "commutator.t_max": (float, 1e-1, "largest time"),
    "commutator.points": (int, 13, "log-spaced times"),
    "commutator.slope_tolerance": (float, 0.15, "allowed slope deviation"),
    "diagnostics.Ns": (_list(int), (0, 1), "Galerkin levels of the sweep"),
    "diagnostics.seeds": (int, 30, "number of seeds"),
    "diagnostics.chains": (int, 8, "chains per seed"),
    "diagnostics.dt": (float, 1e-2, "time step"),
    "diagnostics.record_every": (int, 5, "steps between recorded states"),
    "diagnostics.eta": (float, 0.4, "time weight exponent"),
    "diagnostics.gamma": (float, 0.1, "Hoelder exponent"),
    "diagnostics.epsilon": (float, 0.04, "regularity offset"),
    "diagnostics.q": (float, 1.1, "power of the Y functional"),
    "diagnostics.max_spread": (float, 0.5, "allowed across-seed relative spread"),
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    values: Mapping[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key}")
        return self.values.get(key, SCHEMA[key][1])

    def section(self, name: str) -> Dict[str, Any]:
        prefix = name + "."
        return {k[len(prefix):]: self[k] for k in SCHEMA if k.startswith(prefix)}

    def with_overrides(self, overrides: Mapping[str, Any]) -> "Config":
        for key in overrides:
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key}")
        return Config({**self.values, **overrides})

    def canonical(self) -> str:
        """Every key with its effective value, sorted; the basis of the digest."""
        lines = []
        for key in sorted(SCHEMA):
            v = self[key]
            if isinstance(v, tuple):
                v = ",".join(repr(x) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{key} = {'none' if v is None else v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def __post_init__(self) -> None:
        verb = self.values.get("run.verb")
        if verb is not None and verb not in VERBS:
            raise ConfigError(f"run.verb: {verb!r} is not one of {', '.join(VERBS)}")


def parse_value(key: str, text: str, where: str = "") -> Any:
    if key not in SCHEMA:
        raise ConfigError(f"{where}unknown key {key}")
    try:
        return SCHEMA[key][0](text)
    except ValueError as exc:
        raise ConfigError(f"{where}{key}: {exc}") from None


def parse_config(text: str, source: str = "<config>") -> Config:
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        where = f"{source}:{lineno}: "
        if "=" not in line:
            raise ConfigError(f"{where}expected 'section.key = value'")
        key, _, value = (part.strip() for part in line.partition("="))
        if key in values:
            raise ConfigError(f"{where}duplicate key {key}")
        values[key] = parse_value(key, value, where)
    return Config(values)


def load_config(path: Union[str, Path]) -> Config:
    return parse_config(Path(path).read_text(), str(path))


def parse_overrides(items: Iterable[str]) -> Dict[str, Any]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        key, _, value = item.partition("=")
        out[key.strip()] = parse_value(key.strip(), value, "--set: ")
    return out


def schema_text() -> str:
    """Human-readable schema (used by ``phi4torus config-schema``)."""
    lines = []
    for key, (_, default, doc) in SCHEMA.items():
        if isinstance(default, tuple):
            default = ",".join(str(x) for x in default)
        lines.append(f"{key} = {default}    # {doc}")
    return "\n".join(lines)
