"""Identity-based threat segmentation engine."""

import json

from ._ztseg import *  # noqa: F401,F403
from ._ztseg import simulate as _simulate


def simulate(spec=None, config=None):
    """Generate a scenario, run both engines and return events, audit and report."""
    out = _simulate(json.dumps(spec or {}), json.dumps(config) if config else "")
    out["report"] = json.loads(out["report"])
    return out
