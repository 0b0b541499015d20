"""Backend selection for the hot kernels.

The compiled extension is preferred when importable; the pure numpy fallback
produces bit-identical results, just slower. The PMETA_BACKEND environment
variable ("compiled" | "python") forces a choice at import time.
"""

from __future__ import annotations

import os

from . import _core_py

try:
    from . import _core  # type: ignore[attr-defined]
except ImportError:  # pragma: no cover - depends on the build
    _core = None

_BACKENDS = {"python": _core_py}
if _core is not None:
    _BACKENDS["compiled"] = _core

_forced = os.environ.get("PMETA_BACKEND", "").strip().lower()
if _forced:
    if _forced not in _BACKENDS:
        raise ImportError(
            f"PMETA_BACKEND={_forced!r} not available; have {sorted(_BACKENDS)}"
        )
    ACTIVE_BACKEND = _forced
else:
    ACTIVE_BACKEND = "compiled" if _core is not None else "python"

active = _BACKENDS[ACTIVE_BACKEND]


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str = "active"):
    """Return a kernel module by name ("active", "python", "compiled")."""
    if name in ("active", "auto", ""):
        return active
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; have {sorted(_BACKENDS)}") from None
