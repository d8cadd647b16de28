"""Initial curves for flow experiments, with matching flow settings."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .curve import DiscreteCurve
from .symmetry import SymmetrySpec, index_i


def ellipse(a: float = 2.0, b: float = 1.0, M: int = 256) -> DiscreteCurve:
    t = 2 * math.pi * np.arange(M) / M
    return DiscreteCurve(np.column_stack([a * np.cos(t), b * np.sin(t)]), name=f"ellipse-{a:g}x{b:g}")


def limacon(a: float = 1.0, b: float = 0.55, M: int = 512) -> DiscreteCurve:
    """r = b + a cos(phi) with b < a: an inner loop, rotation number 2."""
    if not 0 < b < a:
        raise ValueError("need 0 < b < a for an inner loop")
    phi = 2 * math.pi * np.arange(M) / M
    r = b + a * np.cos(phi)
    return DiscreteCurve(np.column_stack([r * np.cos(phi), r * np.sin(phi)]), name="limacon")


def figure_eight(M: int = 512, lobe_area: float = 1.0) -> DiscreteCurve:
    """Lemniscate of Gerono (cos t, sin t cos t), scaled so each lobe has the given area."""
    t = 2 * math.pi * np.arange(M) / M
    # each lobe of the unit Gerono curve encloses 2/3
    s = math.sqrt(1.5 * lobe_area)
    return DiscreteCurve(s * np.column_stack([np.cos(t), np.sin(t) * np.cos(t)]), name="figure-eight")


def lowest_mode(n: int, m: int) -> int:
    """Smallest x-frequency m*j that is at least 2n: the first shape mode compatible with the symmetry."""
    j = max(1, -((-2 * n) // m))
    return m * j


def perturbed_circle(n: int = 2, m: int = 4, amplitude: float = 0.03, M: int = 512,
                     mode: int | None = None, radius: float = 1.0) -> DiscreteCurve:
    """n-covered circle with relative radial perturbation amplitude*cos(2 pi mode x).

    ``mode`` must be a multiple of m so the curve keeps (m, i_{n,m})-symmetry.
    Defaults to :func:`lowest_mode`.
    """
    if M % m:
        raise ValueError(f"M={M} not divisible by m={m}")
    mode = lowest_mode(n, m) if mode is None else mode
    if mode % m:
        raise ValueError(f"mode {mode} breaks the m={m} symmetry")
    x = np.arange(M) / M
    phi = 2 * math.pi * n * x
    r = radius * (1 + amplitude * np.cos(2 * math.pi * mode * x))
    return DiscreteCurve(np.column_stack([r * np.cos(phi), r * np.sin(phi)]),
                         name=f"perturbed-n{n}-m{m}-eps{amplitude:g}")


@dataclass(frozen=True)
class Preset:
    build: Callable[..., DiscreteCurve]
    params: dict
    config: dict = field(default_factory=dict)
    symmetry: SymmetrySpec | None = None
    description: str = ""

    def curve(self, **overrides) -> DiscreteCurve:
        return self.build(**{**self.params, **overrides})

    def flow_config(self, **overrides):
        from .flow import FlowConfig

        cfg = dict(self.config)
        if self.symmetry is not None:
            cfg.setdefault("symmetry", (self.symmetry.m, self.symmetry.i))
            cfg.setdefault("n", self.symmetry.n)
        cfg.update(overrides)
        if cfg.get("K") == "kstar":
            from .flow import kstar

            cfg["K"] = kstar(cfg.get("n") or 1)
        return FlowConfig(**cfg)


_STABLE = SymmetrySpec(2, 4)

PRESETS = {
    "ellipse": Preset(ellipse, {"a": 2.0, "b": 1.0, "M": 256}, description="2:1 ellipse"),
    "stable-nm": Preset(
        perturbed_circle, {"n": 2, "m": 4, "amplitude": 0.03, "M": 512},
        config={"K": "kstar"},
        symmetry=_STABLE,
        description="perturbed doubly covered circle with 4-fold symmetry",
    ),
    "nonconvex-nm": Preset(
        perturbed_circle, {"n": 2, "m": 4, "amplitude": 0.1, "M": 512, "mode": 8},
        symmetry=_STABLE,
        description="non-convex symmetric perturbation of the doubly covered circle",
    ),
    "limacon": Preset(
        limacon, {"a": 1.0, "b": 0.55, "M": 512},
        config={"redistribution": "curvature"},
        description="limacon with an inner loop",
    ),
    "figure-eight": Preset(
        figure_eight, {"M": 512},
        config={"bp_area_every": 16, "bp_area_h_rel": 1.0 / 200, "bending_factor": 100.0},
        description="figure-eight, zero signed area",
    ),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


__all__ = ["PRESETS", "Preset", "get_preset", "ellipse", "limacon", "figure_eight",
           "perturbed_circle", "lowest_mode", "index_i"]
