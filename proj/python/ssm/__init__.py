"""Spectral submanifolds of damped polynomial vector fields.

Models are given as a path to a model JSON file or as an already decoded dict.
Results come back as plain Python dicts and lists.
"""

import json
import os

from . import _core
from ._core import SsmError

__all__ = ["SsmError", "check", "expand", "correct", "sweep", "backbone", "verify"]
__version__ = _core.__version__


def _model_text(model):
    if isinstance(model, dict):
        return json.dumps(model)
    with open(os.fspath(model), encoding="utf-8") as f:
        return f.read()


def check(model, res_margin=0.05):
    """Assumption report with an overall "pass" flag."""
    return json.loads(_core.check(_model_text(model), res_margin))


def expand(model, order, eps=None, jet=None, res_margin=0.05):
    """Fourier-Taylor coefficients at a numeric eps or as eps-jets of the given degree."""
    return json.loads(_core.expand(_model_text(model), order, eps, jet, res_margin))


def correct(model, order, eps, gamma, method="collocation", grid=(16, 8), res_margin=0.05):
    """Tail correction on an (Mr, Ktheta) grid by collocation or Picard iteration."""
    return json.loads(_core.correct(_model_text(model), order, eps, gamma, method, grid[0], grid[1], res_margin))


def sweep(model, order, eps_list, res_margin=0.05):
    """Coefficients over a list of eps values with distance and slope diagnostics."""
    return json.loads(_core.sweep(_model_text(model), order, list(eps_list), res_margin))


def backbone(model, order, eps, radii, res_margin=0.05):
    """Rows of (r, amplitude, frequency, decay_rate)."""
    return [dict(zip(("r", "amplitude", "frequency", "decay_rate"), row))
            for row in _core.backbone(_model_text(model), order, eps, list(radii), res_margin)]


def verify(model, order, eps):
    """Residual, conservation, trajectory and sweep checks."""
    return json.loads(_core.verify(_model_text(model), order, eps))
