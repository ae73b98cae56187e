"""Generation + scoring pipelines fed to the search algorithms.

A pipeline turns a candidate noise tensor into a scalar score and accounts
for the inference compute it spent. Only denoising steps count toward NFE,
never verifier cost.
"""

from __future__ import annotations

import numpy as np

from .flow import FlowSchedule, GuidanceConfig, MixtureModel, NfeCounter, sample
from .noise import NoiseTensor
from .verifiers import FkVerifier, ScoreRequest


class ToyFlowPipeline:
    """Euler-sample the flow from the noise, then score the output.

    The verifier either scores the generated sample (synthetic / external)
    or, for the FK verifier, accumulates its weight along the same Euler
    trajectory in a single pass. Each generation costs ``schedule.steps``
    NFE either way.
    """

    def __init__(self, model: MixtureModel, schedule: FlowSchedule,
                 guidance: GuidanceConfig, verifier, context: str = ""):
        self.model = model
        self.schedule = schedule
        self.guidance = guidance
        self.verifier = verifier
        self.context = context
        self.nfe_counter = NfeCounter()
        self._next_id = 0

    @property
    def nfe_per_eval(self) -> int:
        return self.schedule.steps

    def evaluate(self, noise: NoiseTensor) -> float:
        self._next_id += 1
        if isinstance(self.verifier, FkVerifier):
            _, vscore = self.verifier.score_noise(noise, self.nfe_counter)
            return vscore.value
        out = sample(self.model, self.schedule, self.guidance,
                     noise.values, self.nfe_counter)
        req = ScoreRequest(out, self.context, self._next_id)
        return self.verifier.score(req).value


class IdentityPipeline:
    """Score the noise values directly; one NFE per evaluation.

    Used by diagnostics and oracle tests where no flow model is involved.
    """

    def __init__(self, verifier, context: str = ""):
        self.verifier = verifier
        self.context = context
        self.nfe_counter = NfeCounter()
        self._next_id = 0

    @property
    def nfe_per_eval(self) -> int:
        return 1

    def evaluate(self, noise: NoiseTensor) -> float:
        self._next_id += 1
        self.nfe_counter.add(1)
        req = ScoreRequest(np.asarray(noise.values), self.context, self._next_id)
        return self.verifier.score(req).value
