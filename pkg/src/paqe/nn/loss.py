import numpy as np

from ..errors import ContractError


def l1_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error and its subgradient (sign(0) = 0)."""
    if pred.shape != target.shape:
        raise ContractError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    loss = float(np.mean(np.abs(diff, dtype=np.float64)))
    grad = (np.sign(diff) / diff.size).astype(pred.dtype)
    return loss, grad
