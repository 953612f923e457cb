"""Edit-time vulnerability detection toolkit."""

__version__ = "0.1.0"

from evd.kernel import KERNEL_BACKEND  # noqa: F401
