"""Shared fixtures.

Meshing, solving, and diagnostics are the expensive steps, and many tests
interrogate the same handful of canonical runs; a session-scoped cache keyed
by (domain, p, h) runs each pipeline once.
"""

from __future__ import annotations

import math

import pytest

from ptorsion import (
    DELTA_CRIT_DEFAULT,
    DomainSpec,
    SolveConfig,
    analyze,
    build_boundary,
    recover,
    solve_torsion,
    triangulate,
)

ALL_P = (1.25, 1.5, 1.75, 2.0)


def fixed_area_ellipse(e: float) -> DomainSpec:
    """Eccentricity-e ellipse of area 2*pi; the e=0 member is disk(sqrt 2)."""
    w = math.sqrt(1.0 - e * e)
    return DomainSpec.ellipse(math.sqrt(2.0 / w), math.sqrt(2.0 * w))


DOMAINS = {
    "disk": DomainSpec.disk(1.0),
    "ellipse": DomainSpec.ellipse(2.0, 1.0),
    "annulus": DomainSpec.annulus(1.0, 2.0),
    "blob": DomainSpec.fourier(1.0, cos_coef=(0.0, 0.12), sin_coef=(0.0, 0.0, 0.05)),
    "e0": fixed_area_ellipse(0.0),
    "e0.2": fixed_area_ellipse(0.2),
    "e0.4": fixed_area_ellipse(0.4),
    "e0.6": fixed_area_ellipse(0.6),
}


class PipelineCache:
    def __init__(self):
        self._curves = {}
        self._summaries = {}
        self._meshes = {}
        self._solutions = {}
        self._recoveries = {}
        self._reports = {}

    @staticmethod
    def spec(name: str) -> DomainSpec:
        return DOMAINS[name]

    def curve(self, name: str):
        if name not in self._curves:
            self._curves[name] = build_boundary(DOMAINS[name])
        return self._curves[name]

    def summary(self, name: str):
        if name not in self._summaries:
            self._summaries[name] = self.curve(name).summary()
        return self._summaries[name]

    def mesh(self, name: str, h: float):
        key = (name, h)
        if key not in self._meshes:
            self._meshes[key] = triangulate(self.curve(name), h)
        return self._meshes[key]

    def solution(self, name: str, p: float, h: float):
        key = (name, p, h)
        if key not in self._solutions:
            self._solutions[key] = solve_torsion(self.mesh(name, h),
                                                 SolveConfig(p=p))
        return self._solutions[key]

    def recovery(self, name: str, p: float, h: float):
        key = (name, p, h)
        if key not in self._recoveries:
            sol = self.solution(name, p, h)
            self._recoveries[key] = recover(sol.mesh, sol.values, sol.fem)
        return self._recoveries[key]

    def report(self, name: str, p: float, h: float,
               delta_crit: float = DELTA_CRIT_DEFAULT):
        key = (name, p, h, delta_crit)
        if key not in self._reports:
            self._reports[key] = analyze(self.solution(name, p, h),
                                         self.curve(name), delta_crit=delta_crit)
        return self._reports[key]

    def solved_keys(self):
        return sorted(self._solutions)


@pytest.fixture(scope="session")
def lab():
    return PipelineCache()
