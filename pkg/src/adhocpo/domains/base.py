"""Domain build results and ground-truth sampling."""
from __future__ import annotations

import dataclasses

import numpy as np

from adhocpo.pomdp import TabularPomdp, sample_initial_state
from adhocpo.solvers import SolverSettings


@dataclasses.dataclass
class DomainBuild:
    """A benchmark instance: candidate models plus evaluation settings.

    models[k] describes the environment when candidate k is the one in
    play; descriptions[k] says what k means in domain terms.  solver holds
    the reference settings used to produce the per-model policies.
    """

    name: str
    models: list
    descriptions: list
    horizon: int
    epsilon: float
    solver: SolverSettings

    @property
    def size(self) -> int:
        return len(self.models)


@dataclasses.dataclass
class GroundTruth:
    """What a trial actually runs: which model, and from which state."""

    model_index: int
    model: TabularPomdp
    initial_state: int


def sample_ground_truth(build: DomainBuild, rng: np.random.Generator) -> GroundTruth:
    """Uniform candidate, then a start state from its initial belief."""
    k = int(rng.integers(build.size))
    model = build.models[k]
    return GroundTruth(
        model_index=k,
        model=model,
        initial_state=sample_initial_state(model, rng),
    )
