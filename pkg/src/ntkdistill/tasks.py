"""Synthetic target generators and input samplers.

Targets are scalar logit functions on R^d: Gaussian mixtures with a mode
count controlling their difficulty, sign-flip corruptions of those mixtures,
scaled teacher networks, the constant zero function, and per-sample random
logits.  Inputs are always drawn i.i.d. N(0, input_scale^2) per coordinate.

All generators are deterministic functions of (seed, draw index): realizing
a spec twice from the same seed, or evaluating a noisy target twice with
identically seeded generators, reproduces the same stream.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit

from .network import Checkpoint, forward

TASK_KINDS = ("mixture", "flipped-mixture", "teacher-net", "zero", "random-labels")

# Mode width shrinks with the mode count so every bump stays visible in the
# mixture's shape.
def default_mode_width(modes: int) -> float:
    return 15.0 / modes**2


@dataclass(frozen=True)
class MixtureSpec:
    """Gaussian-mixture shape controls before realization.

    Per-mode amplitudes, centers and widths are drawn from a seed:
    amplitudes jitter around ``amplitude`` with equiprobable sign, centers
    are N(0, center_spread^2) per coordinate, widths jitter around ``width``
    (defaulting to 15 / modes^2).  The exponent divides the squared distance
    by the width itself; ``squared_width`` switches to dividing by width^2.
    """

    modes: int
    dim: int = 2
    amplitude: float = 1.0
    center_spread: float = 5.0
    width: float | None = None
    jitter: float = 0.2
    squared_width: bool = False

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("modes must be >= 1")
        if self.width is not None and self.width <= 0:
            raise ValueError("width must be positive")


@dataclass(frozen=True)
class Mixture:
    """A realized Gaussian mixture: sum_j A_j exp(-|x - x_j|^2 / s_j)."""

    amplitudes: np.ndarray
    centers: np.ndarray
    widths: np.ndarray
    squared_width: bool = False

    def values(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        sq = ((x[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        denom = self.widths**2 if self.squared_width else self.widths
        return (self.amplitudes * np.exp(-sq / denom)).sum(axis=1)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.values(x)

    def to_dict(self) -> dict:
        """JSON-ready realized parameters, for exact reproduction."""
        return {
            "amplitudes": self.amplitudes.tolist(),
            "centers": self.centers.tolist(),
            "widths": self.widths.tolist(),
            "squared_width": self.squared_width,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Mixture":
        return cls(
            amplitudes=np.asarray(data["amplitudes"], dtype=float),
            centers=np.asarray(data["centers"], dtype=float),
            widths=np.asarray(data["widths"], dtype=float),
            squared_width=bool(data.get("squared_width", False)),
        )


def realize_mixture(spec: MixtureSpec, rng: np.random.Generator) -> Mixture:
    width = spec.width if spec.width is not None else default_mode_width(spec.modes)
    q = spec.modes
    signs = rng.choice([-1.0, 1.0], size=q)
    amplitudes = spec.amplitude * (1 + spec.jitter * rng.uniform(-1, 1, size=q)) * signs
    centers = rng.normal(scale=spec.center_spread, size=(q, spec.dim))
    widths = width * (1 + spec.jitter * rng.uniform(-1, 1, size=q))
    return Mixture(amplitudes, centers, widths, spec.squared_width)


def mixture_value(mixture: Mixture, x: np.ndarray) -> np.ndarray:
    """Mixture target at one point or a batch."""
    x = np.asarray(x, dtype=float)
    vals = mixture.values(x)
    return float(vals[0]) if x.ndim == 1 else vals


def flip_labels(base, p_flip: float):
    """Wrap a target so each sample's sign flips independently with p_flip.

    The returned callable takes (x, rng); the i-th sample's flip is the i-th
    draw from the generator, so identically seeded generators replay the
    same corruption (and applying it twice with replayed randomness recovers
    the base target).
    """
    if not 0.0 <= p_flip <= 0.5:
        raise ValueError(f"p_flip must be in [0, 0.5], got {p_flip}")

    def flipped(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        values = base(x)
        signs = np.where(rng.random(len(values)) < p_flip, -1.0, 1.0)
        return signs * values

    return flipped


@dataclass(frozen=True)
class LabelSource:
    """Teacher logits, soft labels, and ground-truth hard labels.

    Teacher logits are the checkpoint network's outputs scaled by the
    reduction factor; soft labels pass them through a tempered sigmoid; hard
    labels come from the sign of an independent ground-truth function.
    """

    checkpoint: Checkpoint
    temperature: float
    reduction: float
    ground_truth: object = None

    def __post_init__(self):
        if not self.reduction > 0:
            raise ValueError("reduction factor must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.reduction * forward(
            self.checkpoint.config, self.checkpoint.params, x
        )

    def soft(self, x: np.ndarray) -> np.ndarray:
        return expit(self.logits(x) / self.temperature)

    def hard(self, x: np.ndarray) -> np.ndarray:
        if self.ground_truth is None:
            raise ValueError("no ground-truth function attached")
        return (np.asarray(self.ground_truth(x)) > 0).astype(float)


def teacher_labels(
    checkpoint: Checkpoint, temperature: float, reduction: float, ground_truth=None
) -> LabelSource:
    return LabelSource(checkpoint, temperature, reduction, ground_truth)


@dataclass(frozen=True)
class TaskSpec:
    """Config-file description of a synthetic task.

    ``kind`` selects the target: a Gaussian mixture, a sign-flipped mixture,
    a reduced teacher network (``checkpoint`` path), the zero function, or
    i.i.d. N(0,1) logits per sample.  Inputs are N(0, input_scale^2) per
    coordinate in every case.
    """

    kind: str = "mixture"
    dim: int = 2
    seed: int = 0
    input_scale: float = 5.0
    modes: int = 10
    amplitude: float = 1.0
    center_spread: float = 5.0
    width: float | None = None
    p_flip: float = 0.0
    checkpoint: str | None = None
    temperature: float = 1.0
    reduction: float = 1.0

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"unknown task kind {self.kind!r}; choose from {TASK_KINDS}")
        if self.width is not None and self.width <= 0:
            raise ValueError("width must be positive")
        if not 0.0 <= self.p_flip <= 0.5:
            raise ValueError(f"p_flip must be in [0, 0.5], got {self.p_flip}")
        if not self.reduction > 0:
            raise ValueError("reduction factor must be positive")
        if self.kind == "teacher-net" and self.checkpoint is None:
            raise ValueError("teacher-net task needs a checkpoint path")

    def to_dict(self) -> dict:
        return asdict(self)


class Task:
    """A realized task: input sampler plus target logit source.

    ``target_logits(x, rng)`` consumes randomness only for the noisy kinds
    (flipped-mixture, random-labels).  ``subtract_init`` says whether weight
    -change targets are measured against a student's initial logits (true
    function targets) or taken as-is (the random-label reference, which is
    defined directly as a logit difference).
    """

    def __init__(self, spec: TaskSpec):
        self.spec = spec
        rng = np.random.default_rng(spec.seed)
        self._ground: Mixture | LabelSource | None = None
        if spec.kind in ("mixture", "flipped-mixture"):
            self._ground = realize_mixture(
                MixtureSpec(
                    modes=spec.modes,
                    dim=spec.dim,
                    amplitude=spec.amplitude,
                    center_spread=spec.center_spread,
                    width=spec.width,
                ),
                rng,
            )
        elif spec.kind == "teacher-net":
            from .network import load_checkpoint

            ckpt = load_checkpoint(spec.checkpoint)
            self._ground = teacher_labels(ckpt, spec.temperature, spec.reduction)

    @property
    def subtract_init(self) -> bool:
        return self.spec.kind != "random-labels"

    def realized_dict(self) -> dict:
        """The spec plus any realized randomness, JSON-ready."""
        out = {"spec": self.spec.to_dict()}
        if isinstance(self._ground, Mixture):
            out["mixture"] = self._ground.to_dict()
        return out

    def sample_inputs(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return sample_inputs(self.spec, n, rng)

    def target_logits(self, x: np.ndarray, rng: np.random.Generator | None = None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        kind = self.spec.kind
        if kind == "mixture":
            return self._ground.values(x)
        if kind == "flipped-mixture":
            if rng is None:
                raise ValueError("flipped-mixture targets need an rng")
            return flip_labels(self._ground.values, self.spec.p_flip)(x, rng)
        if kind == "teacher-net":
            return self._ground.logits(x)
        if kind == "zero":
            return np.zeros(len(x))
        if rng is None:
            raise ValueError("random-label targets need an rng")
        return rng.standard_normal(len(x))

    def hard_labels(self, x: np.ndarray, rng: np.random.Generator | None = None):
        return (np.asarray(self.target_logits(x, rng)) > 0).astype(float)


def sample_inputs(spec: TaskSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. inputs with N(0, input_scale^2) coordinates; (n, dim)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return rng.normal(scale=spec.input_scale, size=(n, spec.dim))
