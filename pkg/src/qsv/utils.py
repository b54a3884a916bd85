"""
Utility functions for qsv package.

Helper functions for logging, Pauli label formatting, hashing and JSON files.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any

import numpy as np

PAULI_AXES = ("x", "y", "z")
PAULI_SIGNS = ("+", "−")
TENSOR_SEPARATOR = "⊗"


# Configure module logger
def get_logger(name: str, level: str = "INFO") -> logging.Logger:
    """
    Get a configured logger for the module.

    Args:
        name: Logger name (typically __name__ or "qsv")
        level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    # Only configure if not already configured
    if not logger.handlers:
        handler = logging.StreamHandler()
        formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        handler.setFormatter(formatter)
        logger.addHandler(handler)
    logger.setLevel(getattr(logging, level.upper()))

    return logger


def format_pauli_label(factors: list[tuple[str, int]]) -> str:
    """
    Format a tensor product of Pauli eigenprojectors as a display label.

    Args:
        factors: (axis, sign) pairs, axis in 'xyz', sign +1 or -1

    Returns:
        Label such as 'x+⊗z−'
    """
    parts = []
    for axis, sign in factors:
        parts.append(f"{axis}{PAULI_SIGNS[0] if sign > 0 else PAULI_SIGNS[1]}")
    return TENSOR_SEPARATOR.join(parts)


def parse_pauli_label(label: str) -> list[tuple[str, int]] | None:
    """
    Parse a Pauli projector label back to (axis, sign) factors.

    ASCII '-' is accepted for '−' and '*' for '⊗'.

    Args:
        label: Label (e.g., 'x+⊗z−' or 'x+*z-')

    Returns:
        List of (axis, sign) pairs or None if not parseable
    """
    text = label.strip().replace("*", TENSOR_SEPARATOR).replace("-", PAULI_SIGNS[1])
    if not text:
        return None

    factors = []
    for part in text.split(TENSOR_SEPARATOR):
        part = part.strip()
        if len(part) != 2 or part[0] not in PAULI_AXES or part[1] not in PAULI_SIGNS:
            return None
        factors.append((part[0], 1 if part[1] == PAULI_SIGNS[0] else -1))

    return factors


def digest_arrays(*arrays: np.ndarray, labels: tuple[str, ...] = ()) -> str:
    """
    Stable short hash of numeric arrays and labels.

    Values are rounded to 12 decimals so that digests survive JSON round trips.
    """
    h = hashlib.sha256()
    for arr in arrays:
        a = np.round(np.asarray(arr, dtype=complex), 12)
        h.update(np.ascontiguousarray(a.real).tobytes())
        h.update(np.ascontiguousarray(a.imag).tobytes())
    for label in labels:
        h.update(label.encode("utf-8"))
    return h.hexdigest()[:16]


def read_json(path: str | Path) -> Any:
    """Read a JSON document from disk."""
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_json(path: str | Path, payload: Any) -> None:
    """Write a JSON document with sorted keys (stable output)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")
