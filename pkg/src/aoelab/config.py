"""Run configuration: YAML (or JSON) files, validated strictly on keys."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from aoelab import quantum as q
from aoelab.distributions import JointDistribution
from aoelab.models import MODELS, STRATEGIES
from aoelab.scenarios import (
    KINDS,
    PRESETS,
    Scenario,
    build_bong,
    build_lawrence,
    build_ormrod_barrett,
    build_wigner_friend,
)

FORMATS = ("json", "md")
TOP_KEYS = {"scenario", "models", "samples", "seed", "tolerances", "format", "baseline", "contexts", "targets",
            "scenarios"}
TOLERANCE_RANGES = {"analytic": (1e-15, 1e-6), "significance": (1e-12, 1e-2)}
SCENARIO_KEYS = {
    "wigner": {"kind", "state", "friend_basis", "super_angle"},
    "bong": {"kind", "state", "c", "d", "a", "b"},
    "ormrod-barrett": {"kind", "state", "c", "d", "a", "b"},
    "lawrence": {"kind", "a_bases", "b_bases"},
}
MAX_SAMPLES = 10_000_000


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: dict = field(default_factory=lambda: {"preset": "bong"})
    models: list[dict] = field(default_factory=list)
    samples: int = 100_000
    seed: int | None = None
    tolerances: dict = field(default_factory=lambda: {"analytic": 1e-9, "significance": 1e-6})
    format: str = "json"
    baseline: str | None = None
    contexts: list[str] | None = None
    targets: dict | None = None
    scenarios: list[dict] | None = None

    def echo(self) -> dict:
        """Normalised config; loading it back gives an equal RunConfig."""
        out = {
            "scenario": self.scenario,
            "samples": self.samples,
            "seed": self.seed,
            "tolerances": self.tolerances,
            "format": self.format,
        }
        if self.models:
            out["models"] = self.models
        for key in ("baseline", "contexts", "targets", "scenarios"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        return out

    def model_specs(self) -> list[tuple[str, dict]]:
        return [(m["name"], dict(m.get("params", {}))) for m in self.models]

    def scenario_specs(self) -> list[dict]:
        return self.scenarios if self.scenarios is not None else [self.scenario]


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    if data is None:
        data = {}
    return parse_config(data, source=str(path))


def parse_config(data: Any, source: str = "config") -> RunConfig:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{source}: top level must be a mapping")
    unknown = set(data) - TOP_KEYS
    if unknown:
        raise ConfigError(f"{source}: unknown keys {sorted(unknown)}; allowed: {sorted(TOP_KEYS)}")
    cfg = RunConfig()
    if "scenario" in data:
        cfg.scenario = _scenario_spec(data["scenario"], f"{source}: scenario")
    if "scenarios" in data:
        if not isinstance(data["scenarios"], list) or not data["scenarios"]:
            raise ConfigError(f"{source}: scenarios must be a nonempty list")
        cfg.scenarios = [_scenario_spec(s, f"{source}: scenarios[{i}]") for i, s in enumerate(data["scenarios"])]
    if "models" in data:
        cfg.models = _models(data["models"], source)
    if "samples" in data:
        cfg.samples = _int(data["samples"], f"{source}: samples", 1, MAX_SAMPLES)
    if "seed" in data and data["seed"] is not None:
        cfg.seed = _int(data["seed"], f"{source}: seed", 0, 2**63 - 1)
    if "tolerances" in data:
        cfg.tolerances = _tolerances(data["tolerances"], source)
    if "format" in data:
        cfg.format = str(data["format"]).lower()
        if cfg.format not in FORMATS:
            raise ConfigError(f"{source}: format must be one of {FORMATS}, got {data['format']!r}")
    if data.get("baseline") is not None:
        cfg.baseline = str(data["baseline"])
    if data.get("contexts") is not None:
        if not isinstance(data["contexts"], list) or not all(isinstance(c, str) for c in data["contexts"]):
            raise ConfigError(f"{source}: contexts must be a list of labels like 'Ask,Super'")
        cfg.contexts = [c.replace(" ", "") for c in data["contexts"]]
    if data.get("targets") is not None:
        cfg.targets = _targets(data["targets"], source)
    return cfg


def _int(value, where, lo, hi) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if isinstance(value, str):
        try:
            value = float(value.replace("_", ""))
        except ValueError:
            raise ConfigError(f"{where}: expected an integer, got {value!r}") from None
    if isinstance(value, float):
        if not value.is_integer():
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        value = int(value)
    if not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    if not lo <= value <= hi:
        raise ConfigError(f"{where}: {value} outside [{lo}, {hi}]")
    return value


def _float(value, where) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number (radians), got {value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"{where}: must be finite, got {value!r}")
    return out


def _tolerances(data, source) -> dict:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{source}: tolerances must be a mapping")
    unknown = set(data) - set(TOLERANCE_RANGES)
    if unknown:
        raise ConfigError(f"{source}: unknown tolerance keys {sorted(unknown)}")
    out = {"analytic": 1e-9, "significance": 1e-6}
    for key, value in data.items():
        v = _float(value, f"{source}: tolerances.{key}")
        lo, hi = TOLERANCE_RANGES[key]
        if not lo <= v <= hi:
            raise ConfigError(f"{source}: tolerances.{key} = {v} outside [{lo}, {hi}]")
        out[key] = v
    return out


def _models(data, source) -> list[dict]:
    if isinstance(data, (str, Mapping)):
        data = [data]
    if not isinstance(data, list) or not data:
        raise ConfigError(f"{source}: models must be a nonempty list")
    out = []
    for i, item in enumerate(data):
        where = f"{source}: models[{i}]"
        if isinstance(item, str):
            item = {"name": item}
        if not isinstance(item, Mapping):
            raise ConfigError(f"{where}: expected a name or a mapping with name/params")
        unknown = set(item) - {"name", "params"}
        if unknown:
            raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
        name = str(item.get("name", "")).strip().lower()
        if name not in MODELS:
            raise ConfigError(f"{where}: unknown model {item.get('name')!r}; choose from {sorted(MODELS)}")
        params = dict(item.get("params") or {})
        allowed = {"strategy"} if name == "naive-absolute" else set()
        if set(params) - allowed:
            raise ConfigError(f"{where}: model {name!r} takes no parameters {sorted(set(params) - allowed)}")
        if "strategy" in params and params["strategy"] not in STRATEGIES:
            raise ConfigError(f"{where}: unknown strategy {params['strategy']!r}; choose from {sorted(STRATEGIES)}")
        entry = {"name": name}
        if params:
            entry["params"] = params
        out.append(entry)
    return out


_STATE_PRESET = re.compile(r"^\s*hardy\s*\(\s*([^)]+)\s*\)\s*$")


def _state_spec(value, where):
    """Keep the state entry as given (string preset or amplitude list) after checking it parses."""
    if isinstance(value, str):
        name = value.strip().lower()
        if name in ("singlet", "ghz", "hardy", "plus", "zero", "one"):
            return name
        m = _STATE_PRESET.match(name)
        if m:
            _float(m.group(1), where)
            return f"hardy({_float(m.group(1), where)!r})"
        raise ConfigError(f"{where}: unknown state {value!r}; use singlet, hardy, hardy(p), plus, zero, one "
                          "or an amplitude list")
    if isinstance(value, list):
        amps = [_complex(a, where) for a in value]
        norm = math.sqrt(sum(abs(a) ** 2 for a in amps))
        if norm == 0:
            raise ConfigError(f"{where}: amplitude vector is zero")
        return [_amp_token(a) for a in amps]
    raise ConfigError(f"{where}: state must be a preset name or an amplitude list")


def _complex(a, where) -> complex:
    if isinstance(a, bool):
        raise ConfigError(f"{where}: bad amplitude {a!r}")
    if isinstance(a, (list, tuple)) and len(a) == 2:
        return complex(_float(a[0], where), _float(a[1], where))
    if isinstance(a, (int, float)):
        return complex(_float(a, where))
    if isinstance(a, str):
        try:
            return complex(a.replace(" ", "").replace("i", "j"))
        except ValueError:
            raise ConfigError(f"{where}: bad amplitude {a!r}") from None
    raise ConfigError(f"{where}: bad amplitude {a!r}")


def _amp_token(a: complex):
    return a.real if a.imag == 0 else [a.real, a.imag]


def _scenario_spec(data, where) -> dict:
    if isinstance(data, str):
        data = {"preset": data}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where}: expected a preset name or a mapping")
    if "preset" in data:
        if set(data) != {"preset"}:
            raise ConfigError(f"{where}: a preset takes no other keys (got {sorted(set(data) - {'preset'})})")
        name = str(data["preset"]).strip().lower()
        if name not in PRESETS:
            raise ConfigError(f"{where}: unknown preset {data['preset']!r}; choose from {sorted(PRESETS)}")
        return {"preset": name}
    kind = str(data.get("kind", "")).strip().lower()
    if kind not in KINDS:
        raise ConfigError(f"{where}: kind must be one of {KINDS}, got {data.get('kind')!r}")
    unknown = set(data) - SCENARIO_KEYS[kind]
    if unknown:
        raise ConfigError(f"{where}: unknown keys for {kind}: {sorted(unknown)}")
    out: dict = {"kind": kind}
    for key in sorted(set(data) - {"kind"}):
        value = data[key]
        if key == "state":
            out[key] = _state_spec(value, f"{where}.state")
        elif key in ("a_bases", "b_bases"):
            if not isinstance(value, list) or len(value) != 3:
                raise ConfigError(f"{where}.{key}: expected three of X / Y")
            flags = [str(v).upper() for v in value]
            if set(flags) - {"X", "Y"}:
                raise ConfigError(f"{where}.{key}: expected three of X / Y, got {value!r}")
            out[key] = flags
        elif value is None and key == "super_angle":
            out[key] = None
        else:
            out[key] = _float(value, f"{where}.{key}")
    return out


def _targets(data, source) -> dict:
    if not isinstance(data, Mapping):
        raise ConfigError(f"{source}: targets must map pairs AB, AD, CB, CD to four probabilities")
    out = {}
    for pair in ("AB", "AD", "CB", "CD"):
        if pair not in data:
            raise ConfigError(f"{source}: targets missing pair {pair}")
    if set(data) - {"AB", "AD", "CB", "CD"}:
        raise ConfigError(f"{source}: unknown target pairs {sorted(set(data) - {'AB', 'AD', 'CB', 'CD'})}")
    for pair, probs in data.items():
        if not isinstance(probs, list) or len(probs) != 4:
            raise ConfigError(f"{source}: targets.{pair} needs [p(+,+), p(+,-), p(-,+), p(-,-)]")
        vals = [_float(p, f"{source}: targets.{pair}") for p in probs]
        if min(vals) < 0 or abs(sum(vals) - 1) > 1e-9:
            raise ConfigError(f"{source}: targets.{pair} is not a probability vector")
        out[pair] = vals
    return out


def target_distributions(targets: Mapping[str, list]) -> dict[str, JointDistribution]:
    cells = [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    return {p: JointDistribution(tuple(p), dict(zip(cells, v))) for p, v in targets.items()}


# ---------------------------------------------------------------------------
# scenario construction


def _two_qubit_state(spec) -> q.PureState:
    if spec is None or spec == "singlet":
        return q.singlet()
    if spec == "hardy":
        from aoelab.feasibility.hardy import default_hardy_configuration

        return default_hardy_configuration().state()
    if isinstance(spec, str):
        m = _STATE_PRESET.match(spec)
        if m:
            return q.schmidt_state(float(m.group(1)))
        raise ConfigError(f"state {spec!r} is not a two-qubit state")
    return _amplitude_state(spec, ("S_C", "S_D"))


def _amplitude_state(spec, labels) -> q.PureState:
    amps = [complex(a[0], a[1]) if isinstance(a, list) else complex(a) for a in spec]
    if len(amps) != 2 ** len(labels):
        raise ConfigError(f"expected {2 ** len(labels)} amplitudes, got {len(amps)}")
    return q.PureState.from_amplitudes(labels, amps)


def _one_qubit_state(spec) -> q.PureState:
    if spec is None or spec == "plus":
        return q.plus("S")
    if spec in ("zero", "one"):
        return q.ket("S", 0 if spec == "zero" else 1)
    if isinstance(spec, list):
        return _amplitude_state(spec, ("S",))
    raise ConfigError(f"state {spec!r} is not a one-qubit state")


def build_scenario(spec: Mapping) -> Scenario:
    if "preset" in spec:
        return PRESETS[spec["preset"]]()
    kind = spec["kind"]
    try:
        if kind == "wigner":
            return build_wigner_friend(_one_qubit_state(spec.get("state")), spec.get("friend_basis", 0.0),
                                       spec.get("super_angle"))
        if kind == "lawrence":
            return build_lawrence(spec.get("a_bases", ["Y"] * 3), spec.get("b_bases", ["X"] * 3))
        state = _two_qubit_state(spec.get("state"))
        if kind == "bong":
            angles = {k: spec[k] for k in "cdab" if k in spec}
            return build_bong(state, **{f"{k}_angle": v for k, v in angles.items()})
        # ormrod-barrett: with the hardy state and no angles, use the searched angles
        if spec.get("state") == "hardy" and not any(k in spec for k in "cdab"):
            from aoelab.feasibility.hardy import default_hardy_configuration

            return build_ormrod_barrett(state, **default_hardy_configuration().angle_kwargs())
        missing = [k for k in "cdab" if k not in spec]
        if missing:
            raise ConfigError(f"ormrod-barrett needs angles {missing}")
        return build_ormrod_barrett(state, *(spec[k] for k in "cdab"))
    except (q.QuantumError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot build {kind} scenario: {exc}") from None
