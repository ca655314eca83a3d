"""Curriculum manager: difficulty adjustments driven by policy performance.

``update`` runs once per control step at the reset stage. World-scoped terms
(terrain promotion, command widening) act on the worlds being reset; schedule
terms track the global step count and run regardless of resets.
"""

from __future__ import annotations

import numpy as np

from .base import CURRICULUM_TERMS, CurriculumTermCfg, resolve


class CurriculumManager:
    def __init__(self, cfg: dict[str, CurriculumTermCfg], env):
        self.env = env
        self.cfg = cfg
        self.terms = {name: resolve(CURRICULUM_TERMS, c.func, "curriculum") for name, c in cfg.items()}

    def update(self, reset_ids: np.ndarray) -> None:
        for name, func in self.terms.items():
            func(self.env, reset_ids, **self.cfg[name].params)
