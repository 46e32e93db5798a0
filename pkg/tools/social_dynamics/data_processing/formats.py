"""
File formats: model definitions, trajectories, snapshots, event streams,
posterior marginals and fitted parameters.

Tabular data is CSV written through pandas with a JSON sidecar
(``<name>.json``) carrying the window end, the actor roster and the time
unit. Times are written with 17 significant digits so they read back
bit-identical.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..core.trajectory import Trajectory, Transition
from ..core.variables import VariableId
from ..estimation.result import FitResult
from ..exceptions import DataFormatError, EvidenceError, InvalidModelError
from ..inference.hidden import EventStream, ObservationParams
from ..model.effects import EffectKind, EffectSpec
from ..model.params import ModelDefinition, ModelParams
from ..model.state import AttributeSpec, NetworkState

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"
TRAJECTORY_COLUMNS = ["time", "variable", "new_state"]
EVENT_COLUMNS = ["time", "sender", "recipient"]
MARGINAL_COLUMNS = ["time", "i", "j", "probability"]


def sidecar_path(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def _read_json(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError as exc:
        raise DataFormatError("file not found", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid JSON: {exc.msg}", str(path), exc.lineno) from exc


def _write_json(data: Mapping[str, Any], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, ensure_ascii=False, indent=2)
    return path


def _read_csv(path: PathLike, columns: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, float_precision="round_trip", skipinitialspace=True)
    except FileNotFoundError as exc:
        raise DataFormatError("file not found", str(path)) from exc
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise DataFormatError(f"unreadable CSV: {exc}", str(path)) from exc
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataFormatError(f"missing columns {missing}", str(path), 1, missing[0])
    return frame


# -- model definition -----------------------------------------------------------


@dataclass
class ModelFile:
    """Contents of a model definition file."""

    definition: ModelDefinition
    params: Optional[ModelParams] = None
    observation: Optional[ObservationParams] = None
    initial_state: Optional[NetworkState] = None


def _parse_effect(entry: Any, attributes: Sequence[AttributeSpec], target: Optional[int],
                  path: str, field: str) -> EffectSpec:
    names = {a.name: h for h, a in enumerate(attributes)}
    if isinstance(entry, str):
        entry = {"kind": entry}
    if not isinstance(entry, dict) or "kind" not in entry:
        raise DataFormatError("effect must be a name or an object with 'kind'", path, field=field)
    try:
        kind = EffectKind(entry["kind"])
    except ValueError as exc:
        raise DataFormatError(f"unknown effect '{entry['kind']}'", path, field=field) from exc
    attribute = entry.get("attribute")
    if isinstance(attribute, str):
        if attribute not in names:
            raise DataFormatError(f"unknown attribute '{attribute}'", path, field=field)
        attribute = names[attribute]
    try:
        return EffectSpec(kind, target, attribute)
    except InvalidModelError as exc:
        raise DataFormatError(str(exc), path, field=field) from exc


def _rate_vector(value: Any, n: int, path: str, field: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(n, float(arr[0]))
    if arr.size != n:
        raise DataFormatError(f"expected 1 or {n} rates, got {arr.size}", path, field=field)
    return arr


def parse_model(config: Mapping[str, Any], path: str = "<model>") -> ModelFile:
    """
    Build a model from its JSON form.

    Raises:
        DataFormatError: Naming the offending field
    """
    actors = config.get("actors")
    if isinstance(actors, int):
        n, names = actors, None
    elif isinstance(actors, list) and actors:
        n, names = len(actors), tuple(str(a) for a in actors)
    else:
        raise DataFormatError("'actors' must be a count or a list of names", path, field="actors")

    attributes = []
    for k, item in enumerate(config.get("attributes", [])):
        field = f"attributes[{k}]"
        try:
            low, high = item["range"]
            attributes.append(AttributeSpec(str(item["name"]), int(low), int(high)))
        except InvalidModelError as exc:
            raise DataFormatError(str(exc), path, field=field) from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise DataFormatError("attribute needs 'name' and 'range': [min, max]", path, field=field) from exc
    names_to_index = {a.name: h for h, a in enumerate(attributes)}

    network_effects = [_parse_effect(e, attributes, None, path, f"network_effects[{k}]")
                       for k, e in enumerate(config.get("network_effects", []))]
    attribute_effects = []
    raw_attr_effects = config.get("attribute_effects", {})
    if not isinstance(raw_attr_effects, dict):
        raise DataFormatError("'attribute_effects' must map attribute names to effect lists", path,
                              field="attribute_effects")
    for name, effects in raw_attr_effects.items():
        if name not in names_to_index:
            raise DataFormatError(f"unknown attribute '{name}'", path, field="attribute_effects")
        attribute_effects.extend(_parse_effect(e, attributes, names_to_index[name], path,
                                               f"attribute_effects.{name}[{k}]") for k, e in enumerate(effects))
    try:
        definition = ModelDefinition(n, tuple(attributes), tuple(network_effects), tuple(attribute_effects),
                                     bool(config.get("shared_rates", True)), str(config.get("time_unit", "day")),
                                     names, float(config.get("link_prior", 0.1)))
    except InvalidModelError as exc:
        raise DataFormatError(str(exc), path) from exc

    params = observation = None
    raw = config.get("parameters")
    if raw is not None:
        try:
            params = ModelParams(_rate_vector(raw.get("network_rate", 1.0), n, path, "parameters.network_rate"),
                                 _rate_vector(raw.get("attribute_rate", 0.0), n, path, "parameters.attribute_rate"),
                                 raw.get("network_weights", [0.0] * definition.n_network_effects),
                                 raw.get("attribute_weights", [0.0] * definition.n_attribute_effects)).check(definition)
            if "observation_rates" in raw:
                observation = ObservationParams.from_dict(raw["observation_rates"])
        except DataFormatError:
            raise
        except (InvalidModelError, ValueError, TypeError) as exc:
            raise DataFormatError(str(exc), path, field="parameters") from exc

    initial = None
    if "initial_state" in config:
        initial = _parse_state(config["initial_state"], definition, path, "initial_state")
    return ModelFile(definition, params, observation, initial)


def load_model(path: PathLike) -> ModelFile:
    model_file = parse_model(_read_json(path), str(path))
    logger.info("Loaded model from %s: %d actors, %d attributes", path, model_file.definition.n_actors,
                model_file.definition.n_attributes)
    return model_file


def model_to_dict(definition: ModelDefinition, params: Optional[ModelParams] = None,
                  observation: Optional[ObservationParams] = None) -> Dict[str, Any]:
    """Inverse of ``parse_model``."""
    attrs = definition.attributes

    def effect(spec: EffectSpec) -> Any:
        if spec.kind == EffectKind.SIMILARITY and spec.attribute != spec.target:
            return {"kind": spec.kind.value, "attribute": attrs[spec.attribute].name}
        return spec.kind.value

    data: Dict[str, Any] = {
        "time_unit": definition.time_unit,
        "actors": list(definition.actor_names) if definition.actor_names else definition.n_actors,
        "attributes": [{"name": a.name, "range": [a.z_min, a.z_max]} for a in attrs],
        "network_effects": [effect(s) for s in definition.network_effects],
        "attribute_effects": {a.name: [effect(s) for s in definition.attribute_effects if s.target == h]
                              for h, a in enumerate(attrs)},
        "shared_rates": definition.shared_rates,
        "link_prior": definition.link_prior,
    }
    if params is not None:
        data["parameters"] = {
            "network_rate": params.network_rate.tolist(),
            "attribute_rate": params.attribute_rate.tolist(),
            "network_weights": params.network_weights.tolist(),
            "attribute_weights": params.attribute_weights.tolist(),
        }
        if observation is not None:
            data["parameters"]["observation_rates"] = observation.as_dict()
    return data


# -- states and snapshots -------------------------------------------------------


def _parse_state(raw: Mapping[str, Any], definition: ModelDefinition, path: str, field: str) -> NetworkState:
    n = definition.n_actors
    y = np.zeros((n, n), dtype=np.int8)
    try:
        for i, j in raw.get("links", []):
            y[int(i), int(j)] = 1
        z = np.array([[a.z_min] * n for a in definition.attributes], dtype=np.int64).reshape(definition.n_attributes, n)
        for name, values in raw.get("attributes", {}).items():
            h = [a.name for a in definition.attributes].index(name)
            z[h] = np.asarray(values, dtype=np.int64)
        return NetworkState(y, z, definition.attributes)
    except (IndexError, ValueError, TypeError, InvalidModelError) as exc:
        raise DataFormatError(f"invalid state: {exc}", path, field=field) from exc


def state_to_dict(state: NetworkState) -> Dict[str, Any]:
    links = np.argwhere(state.y == 1)
    return {
        "links": [[int(i), int(j)] for i, j in links],
        "attributes": {a.name: state.z[h].tolist() for h, a in enumerate(state.attributes)},
    }


def write_snapshots(snapshots: Sequence[Tuple[float, NetworkState]], path: PathLike,
                    definition: ModelDefinition) -> Path:
    data = {
        "time_unit": definition.time_unit,
        "n_actors": definition.n_actors,
        "snapshots": [{"time": float(t), **state_to_dict(s)} for t, s in snapshots],
    }
    return _write_json(data, path)


def read_snapshots(path: PathLike, definition: ModelDefinition) -> List[Tuple[float, NetworkState]]:
    data = _read_json(path)
    if data.get("n_actors", definition.n_actors) != definition.n_actors:
        raise DataFormatError("snapshot actor count does not match the model", str(path), field="n_actors")
    _check_unit(data, definition, path)
    out = []
    for k, item in enumerate(data.get("snapshots", [])):
        if "time" not in item:
            raise DataFormatError("snapshot without time", str(path), field=f"snapshots[{k}]")
        out.append((float(item["time"]), _parse_state(item, definition, str(path), f"snapshots[{k}]")))
    return sorted(out, key=lambda s: s[0])


def _check_unit(data: Mapping[str, Any], definition: ModelDefinition, path: PathLike) -> None:
    unit = data.get("time_unit")
    if unit is not None and unit != definition.time_unit:
        raise DataFormatError(f"time unit '{unit}' differs from the model's '{definition.time_unit}'",
                              str(path), field="time_unit")


# -- trajectories ---------------------------------------------------------------


def write_trajectory(trajectory: Trajectory, path: PathLike, definition: Optional[ModelDefinition] = None) -> Path:
    """Transitions as CSV plus a sidecar with the window end and the initial values."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([(tr.time, str(tr.variable), tr.new_state) for tr in trajectory.transitions],
                         columns=TRAJECTORY_COLUMNS)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    meta = {
        "t_end": trajectory.t_end,
        "initial": {str(v): x for v, x in trajectory.initial.items()},
    }
    if definition is not None:
        meta["time_unit"] = definition.time_unit
        meta["n_actors"] = definition.n_actors
    _write_json(meta, sidecar_path(path))
    return path


def read_trajectory(path: PathLike) -> Trajectory:
    """
    Trajectory CSV and sidecar. Each row's previous value is replayed from the
    initial values; any extra columns (such as a legacy ``old_state``) are ignored.
    """
    meta = _read_json(sidecar_path(path))
    frame = _read_csv(path, TRAJECTORY_COLUMNS)
    try:
        initial = {VariableId.parse(k): int(x) for k, x in meta["initial"].items()}
        t_end = float(meta["t_end"])
    except (KeyError, ValueError, InvalidModelError) as exc:
        raise DataFormatError(f"invalid trajectory sidecar: {exc}", str(sidecar_path(path))) from exc
    current = dict(initial)
    transitions = []
    for row, (t, v, b) in enumerate(frame[TRAJECTORY_COLUMNS].itertuples(index=False), start=2):
        try:
            variable = VariableId.parse(str(v))
        except (ValueError, InvalidModelError) as exc:
            raise DataFormatError(str(exc), str(path), row, "variable") from exc
        if variable not in current:
            raise DataFormatError(f"{variable} has no initial value", str(path), row, "variable")
        try:
            transitions.append(Transition(float(t), variable, current[variable], int(b)))
        except ValueError as exc:
            raise DataFormatError(str(exc), str(path), row, "new_state") from exc
        current[variable] = int(b)
    try:
        return Trajectory(t_end, initial, transitions)
    except EvidenceError as exc:
        raise DataFormatError(str(exc), str(path)) from exc


# -- event streams --------------------------------------------------------------


def write_events(stream: EventStream, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"time": stream.times, "sender": stream.senders, "recipient": stream.recipients},
                         columns=EVENT_COLUMNS)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    names = list(stream.actor_names) if stream.actor_names else [str(k) for k in range(stream.n_actors)]
    _write_json({"actors": names, "t_end": stream.t_end, "time_unit": stream.time_unit}, sidecar_path(path))
    return path


def read_events(path: PathLike) -> EventStream:
    """
    Event stream CSV; actors are indices into the sidecar roster (names are also accepted).
    """
    meta = _read_json(sidecar_path(path))
    frame = _read_csv(path, EVENT_COLUMNS)
    try:
        actors = [str(a) for a in meta["actors"]]
        t_end = float(meta["t_end"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError("sidecar needs 'actors' and 't_end'", str(sidecar_path(path))) from exc
    index = {name: k for k, name in enumerate(actors)}
    events = []
    for row, (t, s, r) in enumerate(frame[EVENT_COLUMNS].itertuples(index=False), start=2):
        try:
            events.append((float(t), _actor_index(s, index), _actor_index(r, index)))
        except (KeyError, ValueError) as exc:
            raise DataFormatError(f"unknown actor {exc}", str(path), row, "sender/recipient") from exc
    try:
        return EventStream(events, len(actors), t_end, actors, str(meta.get("time_unit", "day")))
    except EvidenceError as exc:
        raise DataFormatError(str(exc), str(path)) from exc


def _actor_index(value: Any, index: Mapping[str, int]) -> int:
    key = str(value)
    if key in index:
        return index[key]
    k = int(float(key))
    if not 0 <= k < len(index):
        raise KeyError(key)
    return k


def read_raw_events(path: PathLike) -> pd.DataFrame:
    """Raw ``time,sender,recipients`` rows; recipients separated by ';'."""
    return _read_csv(path, ["time", "sender", "recipients"]).astype(str)


# -- marginals ------------------------------------------------------------------


def marginals_frame(grid: Sequence[float], marginals: np.ndarray) -> pd.DataFrame:
    """Long ``time,i,j,probability`` rows, diagonal omitted."""
    grid = np.asarray(grid, dtype=float)
    _, n, _ = marginals.shape
    i, j = np.nonzero(~np.eye(n, dtype=bool))
    rows = {
        "time": np.repeat(grid, len(i)),
        "i": np.tile(i, len(grid)),
        "j": np.tile(j, len(grid)),
        "probability": marginals[:, i, j].ravel(),
    }
    return pd.DataFrame(rows, columns=MARGINAL_COLUMNS)


def write_marginals(grid: Sequence[float], marginals: np.ndarray, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    marginals_frame(grid, marginals).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


# -- fitted parameters ----------------------------------------------------------


def _rate_rows(prefix: str, rates: np.ndarray, definition: ModelDefinition, shared: bool) -> Dict[str, float]:
    if shared:
        return {prefix: float(rates[0])}
    return {f"{prefix}:{definition.actor_name(i)}": float(r) for i, r in enumerate(rates)}


def params_to_dict(definition: ModelDefinition, params: ModelParams,
                   observation: Optional[ObservationParams] = None,
                   fit: Optional[FitResult] = None) -> Dict[str, Any]:
    """
    Parameter tables: rate rows first, then one row per effect.
    """
    shared = definition.shared_rates and params.is_shared
    network = _rate_rows("rate", params.network_rate, definition, shared)
    network.update(zip(definition.network_labels(), params.network_weights.tolist()))
    data: Dict[str, Any] = {"time_unit": definition.time_unit, "network": network}
    if definition.n_attributes:
        attribute = _rate_rows("rate", params.attribute_rate, definition, shared)
        attribute.update(zip(definition.attribute_labels(), params.attribute_weights.tolist()))
        data["attribute"] = attribute
    if observation is not None:
        data["observation"] = observation.as_dict()
    if fit is not None:
        data["method"] = fit.method
        data["converged"] = fit.converged
        data["diagnostics"] = fit.diagnostics
        data["trace"] = fit.trace
    return data


def write_params(path: PathLike, definition: ModelDefinition, params: ModelParams,
                 observation: Optional[ObservationParams] = None, fit: Optional[FitResult] = None) -> Path:
    return _write_json(params_to_dict(definition, params, observation, fit), path)


def read_params(path: PathLike, definition: ModelDefinition) -> Tuple[ModelParams, Optional[ObservationParams]]:
    """Parameters from a fitted-parameter file, or from a model file's ``parameters`` section."""
    data = _read_json(path)
    if "parameters" in data:
        model_file = parse_model({**model_to_dict(definition), "parameters": data["parameters"]}, str(path))
        return model_file.params, model_file.observation
    n = definition.n_actors

    def section(name: str, labels: Sequence[str]) -> Tuple[np.ndarray, np.ndarray]:
        rows = data.get(name, {})
        if "rate" in rows:
            rates = np.full(n, float(rows["rate"]))
        else:
            try:
                rates = np.array([float(rows[f"rate:{definition.actor_name(i)}"]) for i in range(n)])
            except KeyError as exc:
                if name == "attribute" and not definition.n_attributes:
                    rates = np.zeros(n)
                else:
                    raise DataFormatError(f"missing rate row {exc}", str(path), field=name) from exc
        try:
            weights = np.array([float(rows[label]) for label in labels])
        except KeyError as exc:
            raise DataFormatError(f"missing effect row {exc}", str(path), field=name) from exc
        return rates, weights

    network_rate, network_weights = section("network", definition.network_labels())
    attribute_rate, attribute_weights = section("attribute", definition.attribute_labels())
    try:
        params = ModelParams(network_rate, attribute_rate, network_weights, attribute_weights).check(definition)
        observation = ObservationParams.from_dict(data["observation"]) if "observation" in data else None
    except (InvalidModelError, ValueError) as exc:
        raise DataFormatError(str(exc), str(path)) from exc
    return params, observation
