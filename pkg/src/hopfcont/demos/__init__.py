"""Registered 1D model problems.

Each entry knows how to build its :class:`~hopfcont.problem.Problem` from
keyword options and how to produce a documented exact steady state to
start a continuation from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..problem import Problem
from . import brusselator, cgl, cglext, ks, masscons, pollution


def _zeros(prob: Problem) -> np.ndarray:
    return np.zeros(prob.nu)


@dataclass(frozen=True)
class DemoSpec:
    name: str
    builder: Callable[..., Problem]
    start: Callable[[Problem], np.ndarray]
    description: str
    param_names: tuple
    oracles: dict = field(default_factory=dict)

    def build(self, **options) -> Problem:
        """Problem with builder ``options``; unknown keys that name parameters are passed as such."""
        prob = self.builder(**options)
        prob.data.setdefault("recipe", dict(demo=self.name, options=dict(options)))
        return prob


DEMOS = {
    spec.name: spec
    for spec in (
        DemoSpec("cgl", cgl.cgl_problem, _zeros, "cubic-quintic complex Ginzburg-Landau",
                 cgl.PARAM_NAMES, dict(hopf_points=cgl.hopf_points, tw_amplitude_squared=cgl.tw_amplitude_squared,
                                       tw_frequency=cgl.tw_frequency)),
        DemoSpec("brusselator", brusselator.brusselator_problem, brusselator.homogeneous_state,
                 "three-species extended Brusselator", brusselator.PARAM_NAMES,
                 dict(linear_dispersion=brusselator.linear_dispersion)),
        DemoSpec("masscons", masscons.masscons_problem, masscons.homogeneous_state,
                 "reaction-diffusion system with a conserved mass", masscons.PARAM_NAMES),
        DemoSpec("ks", ks.ks_problem, _zeros, "Kuramoto-Sivashinsky as a differential-algebraic system",
                 ks.PARAM_NAMES, dict(bifurcation_points=ks.bifurcation_points)),
        DemoSpec("pollution", pollution.pollution_problem, pollution.canonical_steady_state,
                 "canonical system of a distributed optimal control problem", pollution.PARAM_NAMES),
        DemoSpec("cglext", cglext.cglext_problem, _zeros, "cGL with time-periodic quintic forcing",
                 cglext.PARAM_NAMES),
    )
}


def get_demo(name: str) -> DemoSpec:
    try:
        return DEMOS[name]
    except KeyError:
        raise KeyError(f"unknown demo {name!r}; available: {', '.join(sorted(DEMOS))}") from None


def build_problem(name: str, **options) -> Problem:
    return get_demo(name).build(**options)
