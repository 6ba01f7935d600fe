"""Backend selection for the hot inner loops.

The compiled Cython module is used when it was built; otherwise the numpy
fallback is imported. Set ``TWINBOOT_BACKEND=python`` to force the fallback.
"""
import os

from twinboot import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("TWINBOOT_BACKEND", "").lower() != "python":
    try:
        from twinboot import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None for active)."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from twinboot import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


grouped_sqdist = _impl.grouped_sqdist
grouped_perturb = _impl.grouped_perturb
grouped_normal_perturb = _impl.grouped_normal_perturb
standard_normal = _impl.standard_normal
grouped_variance = _impl.grouped_variance
twin_normal_perturb = _impl.twin_normal_perturb
adam_update = _impl.adam_update
two_well_loss_grad = _impl.two_well_loss_grad
