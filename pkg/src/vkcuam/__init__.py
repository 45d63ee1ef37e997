"""Sequential aerial-manipulation stack: virtual kinematic chains,
trajectory optimization, hierarchical control and a desk-scale simulator
for an over-actuated aerial manipulator."""

from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
