"""Nevanlinna functionals of randomly perturbed entire functions."""

import subprocess
from pathlib import Path

__version__ = "0.1.0"


def version_string() -> str:
    """``git describe`` of the source tree when available, else the release number."""
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"],
                             cwd=Path(__file__).resolve().parent, capture_output=True,
                             text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return __version__
    desc = out.stdout.strip()
    return f"{__version__}+g{desc}" if out.returncode == 0 and desc else __version__
