"""Procedural face footage: rendering, dataset synthesis, identity fitting.

Renders an ellipsoid head with polygon features from the same 3D landmark
rig the alignment template is projected from, so generated frames come
with exact landmarks and masks. No learned components anywhere.
"""

from .render import (IDENTITY_RANGES, STATE_RANGES, DatasimError,
                     IdentityParams, StateParams, render)
from .dataset import load_identity, load_states, make_dataset, random_identity
from .fit import fit_identity, identity_distance, identity_from_vector, identity_to_vector

__all__ = [
    "DatasimError", "IdentityParams", "StateParams", "IDENTITY_RANGES",
    "STATE_RANGES", "render", "make_dataset", "random_identity",
    "load_states", "load_identity", "fit_identity", "identity_distance",
    "identity_to_vector", "identity_from_vector",
]
