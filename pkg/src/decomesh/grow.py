"""Mesh-based region growing: frontier expansion by feature similarity.

Seeds expand along mesh adjacency, admitting neighbors above a cosine
threshold that decays between rounds; boundary vertices fence the growth
with last-safe-set semantics (a round whose cumulative candidate set
overlaps too much of the boundary is discarded wholesale).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .mesh import NeuralMesh

STOP_BOUNDARY = "boundary-fence"
STOP_FIXED_POINT = "fixed-point"
STOP_TAU_FLOOR = "tau-floor"
STOP_ROUND_CAP = "round-cap"


class GrowError(ValueError):
    pass


@dataclass(frozen=True)
class GrowConfig:
    tau: float = 0.95         # initial similarity threshold
    theta: float = 0.02       # per-round threshold decay
    epsilon: float = 0.10     # tolerated boundary overlap ratio
    tau_floor: float = 0.0
    max_rounds: int = 200

    def __post_init__(self):
        if not (-1.0 < self.tau <= 1.0):
            raise GrowError("tau must be in (-1, 1]")
        if self.theta <= 0:
            raise GrowError("theta must be positive")
        if not (0.0 <= self.epsilon <= 1.0):
            raise GrowError("epsilon must be in [0, 1]")
        if self.tau_floor < -1.0:
            raise GrowError("tau_floor must be >= -1")


@dataclass
class GrownRegion:
    vertices: set
    rounds: int
    stop_reason: str
    round_sizes: list = field(default_factory=list)

    def to_dict(self):
        return {"vertices": sorted(self.vertices), "rounds": self.rounds,
                "stop_reason": self.stop_reason, "round_sizes": self.round_sizes}

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def _unit_features(mesh):
    if mesh.features is None:
        raise GrowError("mesh has no features")
    f = mesh.features.astype(np.float64)
    n = np.linalg.norm(f, axis=1, keepdims=True)
    return f / np.where(n > 0, n, 1.0)


def grow(mesh: NeuralMesh, seeds, boundary=None, cfg: GrowConfig = GrowConfig()) -> GrownRegion:
    """Expand seed vertices along adjacency; returns the accepted vertex set.

    seeds / boundary accept a SegmentationSeed or explicit vertex sets.
    """
    if hasattr(seeds, "seeds"):   # SegmentationSeed
        boundary = set(seeds.boundary) if boundary is None else set(boundary)
        seeds = set(seeds.seeds)
    else:
        seeds = set(int(v) for v in seeds)
        boundary = set() if boundary is None else set(int(v) for v in boundary)
    if not seeds:
        raise GrowError("empty seed set")
    feats = _unit_features(mesh)

    accepted = set(seeds)
    frontier = sorted(seeds)
    tau = cfg.tau
    round_sizes = [len(accepted)]
    rounds = 0

    while True:
        if not frontier:
            return GrownRegion(accepted, rounds, STOP_FIXED_POINT, round_sizes)
        if tau < cfg.tau_floor:
            return GrownRegion(accepted, rounds, STOP_TAU_FLOOR, round_sizes)
        if rounds >= cfg.max_rounds:
            return GrownRegion(accepted, rounds, STOP_ROUND_CAP, round_sizes)

        candidate = set(accepted)
        deferred = set()
        queue = deque(frontier)
        added = False
        while queue:
            s = queue.popleft()
            fs = feats[s]
            for n in mesh.neighbors(s):
                n = int(n)
                if n in candidate:
                    continue
                if float(fs @ feats[n]) > tau:
                    candidate.add(n)
                    queue.append(n)
                    added = True
                else:
                    deferred.add(s)
        rounds += 1

        if boundary and len(candidate & boundary) / len(boundary) > cfg.epsilon:
            # discard the whole round: last safe set wins
            return GrownRegion(accepted, rounds, STOP_BOUNDARY, round_sizes)
        accepted = candidate
        round_sizes.append(len(accepted))
        if not added and not deferred:
            return GrownRegion(accepted, rounds, STOP_FIXED_POINT, round_sizes)
        frontier = sorted(deferred)
        tau -= cfg.theta


def grow_by_similarity_only(mesh: NeuralMesh, seeds, tau):
    """Ablation baseline: global cosine threshold against the seed-mean feature.

    Ignores adjacency and boundary entirely; kept for comparison against
    grow(), which it loses to whenever distant surfaces share features.
    """
    if hasattr(seeds, "seeds"):
        seeds = set(seeds.seeds)
    else:
        seeds = set(int(v) for v in seeds)
    if not seeds:
        raise GrowError("empty seed set")
    feats = _unit_features(mesh)
    proto = feats[sorted(seeds)].mean(axis=0)
    pn = np.linalg.norm(proto)
    if pn > 0:
        proto = proto / pn
    cos = feats @ proto
    return seeds | set(np.nonzero(cos > tau)[0].tolist())
