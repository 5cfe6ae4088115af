import numpy as np

from fracmild.errors import DimensionError


def sup_norm(values: np.ndarray) -> float:
    """Discrete sup over grid nodes of the max-abs coordinate."""
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values)))


def format_float(value: float) -> str:
    """Shortest decimal string that round-trips to the same double."""
    return repr(float(value))


def as_state(value, dim: int) -> np.ndarray:
    """Broadcast a scalar or sequence to a state vector of length ``dim``."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(dim, float(arr))
    arr = arr.reshape(-1)
    if arr.size != dim:
        raise DimensionError(f"expected {dim} coordinates, got {arr.size}")
    return arr.copy()


def state_norm(value: np.ndarray) -> float:
    # coefficients against an orthonormal basis, so this is the L2 norm in x
    return float(np.linalg.norm(value))
