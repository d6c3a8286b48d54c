"""Random and canonical problem instances shared by tests, scripts and the CLI."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .background import Background, build_background
from .jost import Perturbation, validate_perturbation


@dataclass(frozen=True)
class Instance:
    bg: Background
    pert: Perturbation
    seed: int | None = None

    @property
    def label(self) -> str:
        return f"q={self.bg.q} p={self.pert.p} nu={self.pert.nu} seed={self.seed}"


@dataclass(frozen=True)
class InstanceConfig:
    q_choices: tuple = (2, 3)
    p_choices: tuple = (1, 2, 3)
    a0_range: tuple = (0.6, 1.6)
    b0_range: tuple = (-1.0, 1.0)
    u_scale: float = 0.4
    v_scale: float = 0.8
    min_gap: float = 0.05  # relative to the spectral scale


def worked_background() -> Background:
    return build_background(2, (2.0, 0.5), (0.0, 0.0))


def worked_instance() -> Instance:
    bg = worked_background()
    return Instance(bg, validate_perturbation(bg, 1, (1.0,), (0.0,)))


def default_seed() -> int:
    return int(os.environ.get("RESLAB_SEED", "20240611"))


def random_background(rng: np.random.Generator, q: int, cfg: InstanceConfig = InstanceConfig()) -> Background:
    while True:
        a0 = rng.uniform(*cfg.a0_range, size=q)
        a0 = a0 / np.prod(a0) ** (1.0 / q)
        a0[-1] = 1.0 / np.prod(a0[:-1])
        b0 = rng.uniform(*cfg.b0_range, size=q)
        bg = build_background(q, a0, b0)
        widths = [hi - lo for lo, hi in (bg.bands.gap(j) for j in range(1, q))]
        if min(widths) > cfg.min_gap * bg.bands.scale:
            return bg


def random_instance(
    rng: np.random.Generator,
    q: int | None = None,
    p: int | None = None,
    odd: bool | None = None,
    cfg: InstanceConfig = InstanceConfig(),
) -> Instance:
    """Random all-gaps-open background with a random perturbation of support p.

    ``odd`` selects nu = 2p - 1 (u_p = 0) or nu = 2p.
    """
    q = int(rng.choice(cfg.q_choices)) if q is None else q
    p = int(rng.choice(cfg.p_choices)) if p is None else p
    odd = bool(rng.integers(0, 2)) if odd is None else odd
    bg = random_background(rng, q, cfg)
    while True:
        u = rng.uniform(-cfg.u_scale, cfg.u_scale, size=p)
        v = rng.uniform(-cfg.v_scale, cfg.v_scale, size=p)
        if odd:
            u[-1] = 0.0
            if abs(v[-1]) < 0.1:
                continue
        elif abs(u[-1]) < 0.05:
            continue
        a = [bg.a_at(n) + u[n - 1] for n in range(1, p + 1)]
        if min(a) <= 0.2:
            continue
        return Instance(bg, validate_perturbation(bg, p, u, v))


def instance_family(n: int, seed: int | None = None) -> list[Instance]:
    """``n`` instances cycling through q in {2,3}, p in {1,2,3} and both parities."""
    seed = default_seed() if seed is None else seed
    out = []
    combos = [(q, p, odd) for q in (2, 3) for p in (1, 2, 3) for odd in (False, True)]
    for k in range(n):
        q, p, odd = combos[k % len(combos)]
        rng = np.random.default_rng([seed, k])
        inst = random_instance(rng, q, p, odd)
        out.append(Instance(inst.bg, inst.pert, seed=k))
    return out
