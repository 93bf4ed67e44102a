"""swapkit: a desk-scale face-swapping pipeline.

Three phases connected through a filesystem workspace: extraction (landmark
driven alignment), training (twin-decoder or dual-latent autoencoders on an
internal autodiff engine), and conversion (colour harmonization, paste-back,
blending). A procedural face generator stands in for footage so the whole
pipeline is testable offline.
"""

__version__ = "0.1.0"
