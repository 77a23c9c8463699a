"""Shared test knobs.

The simulation tests do real work per example (building mempools, mining
blocks), so the default hypothesis deadline is too twitchy on a loaded
machine; examples stay capped instead.
"""

from hypothesis import settings

settings.register_profile("sim", deadline=None, max_examples=60)
settings.load_profile("sim")
