"""Training phase: losses, optimizer, initialization, GAN, and the loop.

Submodules are imported explicitly (swapkit.training.losses and friends);
this package intentionally re-exports nothing so that models can use the
initializers without dragging in the full training stack.
"""
