"""Measured constants for the inequality checks, frozen in a fixture file.

The bounds being checked have constants that exist but are not explicit, so
each ratio (left side over right side) is measured on a random corpus and
frozen at twice the largest value seen. Tests then draw a fresh corpus with a
different seed and require every ratio to stay below the frozen ceiling.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from .besov import BesovParams, besov_norm
from .ou import NoiseStream, hermitian_normal
from .paraproducts import commutator_res, paraproduct
from .projections import project, semigroup
from .torus import SpectralField, lp_norm, wavenumber_sq

FIXTURE = "regression_constants.json"
SAFETY_FACTOR = 2.0


@dataclass(frozen=True)
class CommutatorSetup:
    alpha: float = 0.5
    beta: float = -0.25
    gamma: float = -0.3
    p: float = 2.0
    K: int = 6


@dataclass(frozen=True)
class ParaproductSetup:
    s: float = 0.5
    p: float = 2.0
    p1: float = 4.0
    p2: float = 4.0
    K: int = 6


@dataclass(frozen=True)
class EmbeddingSetup:
    s: float = 0.3
    p1: float = 4.0 / 3.0
    p2: float = 4.0
    K: int = 6


@dataclass(frozen=True)
class ProjectionSetup:
    s: float = 0.5
    p: float = 4.0 / 3.0
    levels: tuple = (0, 1, 2, 3, 4, 5)
    K: int = 6


@dataclass(frozen=True)
class SmoothingSetup:
    alpha: float = 0.5
    beta: float = 0.5
    p: float = 2.0
    times: tuple = (1e-3, 1e-2, 1e-1, 1.0)
    K: int = 6


def random_regular_field(rng, K: int, s: float, batch=()) -> SpectralField:
    """Hermitian Gaussian field with coefficient size (1 + |k|^2)^(-(s + 3/2)/2).

    Its B^s_{p,inf} norm stays of order one as K grows.
    """
    weight = (1.0 + wavenumber_sq((K, K, K))) ** (-(s + 1.5) / 2.0)
    return SpectralField._trusted(weight * hermitian_normal(rng, K, batch), True)


def commutator_ratios(rng, trials: int, setup: CommutatorSetup = CommutatorSetup()) -> np.ndarray:
    """||C(f,g,h)||_{B^{a+b+c}_p} / (||f||_{B^a_p} ||g||_{B^b_p} ||h||_{B^c_p}) per trial."""
    a, b, c, p = setup.alpha, setup.beta, setup.gamma, setup.p
    f = random_regular_field(rng, setup.K, a, (trials,))
    g = random_regular_field(rng, setup.K, b, (trials,))
    h = random_regular_field(rng, setup.K, c, (trials,))
    top = besov_norm(commutator_res(f, g, h), BesovParams(a + b + c, p))
    bottom = besov_norm(f, BesovParams(a, p)) * besov_norm(g, BesovParams(b, p)) * besov_norm(h, BesovParams(c, p))
    return top / bottom


def paraproduct_ratios(rng, trials: int, setup: ParaproductSetup = ParaproductSetup()) -> np.ndarray:
    """||f (<) g||_{B^s_p} / (||f||_{L^p1} ||g||_{B^s_p2}) per trial."""
    f = random_regular_field(rng, setup.K, 0.0, (trials,))
    g = random_regular_field(rng, setup.K, setup.s, (trials,))
    top = besov_norm(paraproduct(f, g, "lt"), BesovParams(setup.s, setup.p))
    return top / (lp_norm(f, setup.p1) * besov_norm(g, BesovParams(setup.s, setup.p2)))


def embedding_ratios(rng, trials: int, setup: EmbeddingSetup = EmbeddingSetup()) -> np.ndarray:
    """||f||_{B^{s - 3(1/p1 - 1/p2)}_{p2}} / ||f||_{B^s_{p1}} per trial."""
    f = random_regular_field(rng, setup.K, setup.s, (trials,))
    s2 = setup.s - 3.0 * (1.0 / setup.p1 - 1.0 / setup.p2)
    return besov_norm(f, BesovParams(s2, setup.p2)) / besov_norm(f, BesovParams(setup.s, setup.p1))


def projection_ratios(rng, trials: int, setup: ProjectionSetup = ProjectionSetup()) -> np.ndarray:
    """max over i in {1, 2} and the levels of ||P_N^(i) f||_{B^s_p} / ||f||_{B^s_p} per trial."""
    f = random_regular_field(rng, setup.K, setup.s, (trials,))
    bp = BesovParams(setup.s, setup.p)
    base = besov_norm(f, bp)
    ratios = [besov_norm(project(i, N, f), bp) / base for i in (1, 2) for N in setup.levels]
    return np.max(ratios, axis=0)


def smoothing_ratios(rng, trials: int, setup: SmoothingSetup = SmoothingSetup()) -> np.ndarray:
    """max over t of ||e^{t Lap} f||_{B^a_p} / ((1 + t^-b) ||f||_{B^{a-2b}_p}) per trial."""
    a, b = setup.alpha, setup.beta
    f = random_regular_field(rng, setup.K, a - 2.0 * b, (trials,))
    base = besov_norm(f, BesovParams(a - 2.0 * b, setup.p))
    ratios = [besov_norm(semigroup(t, 0.0, f), BesovParams(a, setup.p)) / ((1.0 + t ** (-b)) * base)
              for t in setup.times]
    return np.max(ratios, axis=0)


def measure(seed: int = 20240, trials: int = 100) -> Dict[str, float]:
    """Largest ratio of each check over a corpus drawn from ``seed``."""
    root = NoiseStream(seed, 5)
    return {
        "commutator_res": float(np.max(commutator_ratios(root.child(0), trials))),
        "paraproduct_lt": float(np.max(paraproduct_ratios(root.child(1), trials))),
        "besov_embedding": float(np.max(embedding_ratios(root.child(2), trials))),
        "projection_bound": float(np.max(projection_ratios(root.child(3), trials))),
        "semigroup_smoothing": float(np.max(smoothing_ratios(root.child(4), trials))),
    }


def calibrate(seed: int = 20240, trials: int = 100, path: Optional[Union[str, Path]] = None) -> Dict[str, object]:
    """Measure, apply the safety factor and (optionally) write the fixture."""
    observed = measure(seed, trials)
    data = {
        "seed": seed,
        "trials": trials,
        "safety_factor": SAFETY_FACTOR,
        "observed_max": observed,
        "ceiling": {k: SAFETY_FACTOR * v for k, v in observed.items()},
    }
    if path is not None:
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return data


def fixture_path() -> Path:
    return Path(str(resources.files("phi4torus") / "data" / FIXTURE))


def load_ceilings(path: Optional[Union[str, Path]] = None) -> Dict[str, float]:
    data = json.loads(Path(path or fixture_path()).read_text())
    return {k: float(v) for k, v in data["ceiling"].items()}
