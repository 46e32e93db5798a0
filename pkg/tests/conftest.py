"""
pytest configuration and shared fixtures for the social-dynamics tests.

Fixtures build small models whose joint state space is tiny enough for the
exact oracle, plus the shipped example configurations.
"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tools"))

from social_dynamics.data_processing.formats import load_model  # noqa: E402
from social_dynamics.inference.hidden import EventStream, ObservationParams  # noqa: E402
from social_dynamics.model.coevolution import CoevolutionModel  # noqa: E402
from social_dynamics.model.effects import EffectSpec  # noqa: E402
from social_dynamics.model.params import ModelDefinition, ModelParams  # noqa: E402
from social_dynamics.model.state import AttributeSpec, NetworkState  # noqa: E402


@pytest.fixture(scope="session")
def repo_root() -> Path:
    """
    Fixture providing the repository root.

    Returns:
        Path: Directory holding setup.py
    """
    return ROOT


@pytest.fixture(scope="session")
def configs_dir(repo_root: Path) -> Path:
    """
    Fixture providing the shipped configuration directory.

    Args:
        repo_root: Root directory fixture

    Returns:
        Path: Path to configs/
    """
    return repo_root / "configs"


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded random stream, fresh for every test."""
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def pair_definition() -> ModelDefinition:
    """
    Two actors, links only, density and reciprocity effects.

    Returns:
        ModelDefinition: Four joint states
    """
    return ModelDefinition(2, (), (EffectSpec.network("density"), EffectSpec.network("reciprocity")),
                           link_prior=0.3)


@pytest.fixture(scope="session")
def pair_model(pair_definition: ModelDefinition) -> CoevolutionModel:
    """
    Link-only two-actor model with moderate rates.

    Args:
        pair_definition: Model skeleton fixture

    Returns:
        CoevolutionModel: Model with rate 0.8 and weights (-0.5, 1.0)
    """
    return CoevolutionModel(pair_definition, ModelParams.shared(2, 0.8, 0.0, [-0.5, 1.0]))


@pytest.fixture(scope="session")
def small_definition() -> ModelDefinition:
    """
    Three actors and one three-valued attribute with the synthetic effect set.

    Returns:
        ModelDefinition: Network density, reciprocity, similarity; attribute tendency, similarity
    """
    attrs = (AttributeSpec("z", 0, 2),)
    return ModelDefinition(
        3, attrs,
        (EffectSpec.network("density"), EffectSpec.network("reciprocity"), EffectSpec.network("similarity", 0)),
        (EffectSpec.for_attribute(0, "tendency"), EffectSpec.for_attribute(0, "similarity")),
        time_unit="unit",
    )


@pytest.fixture(scope="session")
def small_params() -> ModelParams:
    """Synthetic weights on a three-actor system."""
    return ModelParams.shared(3, 0.5, 0.5, [-1.0, 1.5, 1.0], [0.1, 1.0])


@pytest.fixture(scope="session")
def small_model(small_definition: ModelDefinition, small_params: ModelParams) -> CoevolutionModel:
    """
    Three-actor co-evolution model.

    Args:
        small_definition: Model skeleton fixture
        small_params: Parameter fixture

    Returns:
        CoevolutionModel: Bound model
    """
    return CoevolutionModel(small_definition, small_params)


@pytest.fixture
def small_state(small_definition: ModelDefinition) -> NetworkState:
    """A state with a reciprocated pair, one one-way link and mixed attributes."""
    y = np.array([[0, 1, 0], [1, 0, 1], [0, 0, 0]])
    z = np.array([[0, 2, 1]])
    return NetworkState(y, z, small_definition.attributes)


@pytest.fixture(scope="session")
def hidden_definition() -> ModelDefinition:
    """Link-only four-effect model used for event streams."""
    effects = tuple(EffectSpec.network(k) for k in ("density", "reciprocity", "activity", "popularity"))
    return ModelDefinition(3, (), effects, link_prior=0.2)


@pytest.fixture(scope="session")
def hidden_model(hidden_definition: ModelDefinition) -> CoevolutionModel:
    return CoevolutionModel(hidden_definition, ModelParams.shared(3, 0.3, 0.0, [-1.0, 1.0, 0.1, 0.1]))


@pytest.fixture(scope="session")
def observation() -> ObservationParams:
    """Event rates keyed by ``(y_ij, y_ji)``: links emit far more events."""
    return ObservationParams(np.array([[0.05, 0.2], [2.0, 3.0]]))


@pytest.fixture
def tiny_stream() -> EventStream:
    """Six events among three actors over ten time units."""
    events = [(0.5, 0, 1), (1.5, 1, 0), (2.0, 0, 1), (4.25, 2, 0), (7.0, 0, 1), (9.5, 1, 2)]
    return EventStream(events, 3, 10.0, ["ann", "bob", "cy"])


@pytest.fixture(scope="session")
def synthetic_model_file(configs_dir: Path):
    """Parsed ``configs/synthetic_coevolution.json``."""
    return load_model(configs_dir / "synthetic_coevolution.json")


@pytest.fixture
def run_dir(tmp_path: Path) -> Path:
    """Temporary parent directory for run outputs."""
    path = tmp_path / "runs"
    path.mkdir()
    return path
