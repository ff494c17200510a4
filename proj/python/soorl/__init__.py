"""Object-oriented model-based RL with strategic exploration."""

import json

from ._core import (
    Environment,
    environment_names,
    episodes_to_consistent_goal,
    exploration_bonus,
    learn_macros,
    make_environment,
)
from . import _core


def resolve_config(config):
    """Fully resolved experiment config; `config` is a dict or a JSON string."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(_core.resolve_config(text))


def run_rows_csv(config):
    text = config if isinstance(config, str) else json.dumps(config)
    return _core.run_rows_csv(text)


def run_experiment(config):
    text = config if isinstance(config, str) else json.dumps(config)
    return _core.run_experiment(text)


__all__ = [
    "Environment",
    "environment_names",
    "episodes_to_consistent_goal",
    "exploration_bonus",
    "learn_macros",
    "make_environment",
    "resolve_config",
    "run_experiment",
    "run_rows_csv",
]
