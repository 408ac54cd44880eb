"""Central finite-difference check of the network's analytic gradients.

The analytic gradient of ``sum(out * R)`` comes from the network as given;
finite differences are taken on a float64 copy so rounding noise does not
swamp the signal. Probes whose +h and -h evaluations land on different
sides of a ReLU kink are not differentiable there and are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import QENetwork

NEGLIGIBLE_FRACTION = 1e-5  # of the largest per-tensor gradient norm


@dataclass
class GradCheckReport:
    rel_err: dict[str, float] = field(default_factory=dict)  # per tensor, norm-relative
    checked: int = 0
    skipped: int = 0

    @property
    def max_rel_err(self) -> float:
        return max(self.rel_err.values(), default=0.0)


def _relu_signature(net: QENetwork, x: np.ndarray, mode: str) -> tuple[np.ndarray, np.ndarray]:
    out = net.forward(x, mode, cache=True)
    sig = np.concatenate([(c._cache[2] > 0).ravel() for c in net.convs() if c.relu])
    for c in net.convs():
        c._cache = None
    net.bn._cache = None
    net._cached = False
    return out, sig


def gradient_check(net: QENetwork, x: np.ndarray, h: float = 1e-3, mode: str = "train",
                   seed: int = 0) -> GradCheckReport:
    rng = np.random.default_rng(seed)
    probe = rng.standard_normal((x.shape[0], 1, x.shape[2], x.shape[3]))
    work = net.copy()
    work.zero_grad()
    work.forward(x, mode, cache=True)
    work.backward(probe.astype(work.dtype))
    analytic = {k: g.astype(np.float64) for k, g in work.named_grads()}

    floor = NEGLIGIBLE_FRACTION * max(np.linalg.norm(g) for g in analytic.values())
    net64 = net.astype(np.float64)
    x64 = x.astype(np.float64)
    report = GradCheckReport()
    for name, p in net64.named_parameters():
        flat = p.reshape(-1)
        a_vals, n_vals = [], []
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            out_p, sig_p = _relu_signature(net64, x64, mode)
            flat[i] = old - h
            out_m, sig_m = _relu_signature(net64, x64, mode)
            flat[i] = old
            if not np.array_equal(sig_p, sig_m):
                report.skipped += 1
                continue
            report.checked += 1
            n_vals.append((np.sum(out_p * probe) - np.sum(out_m * probe)) / (2 * h))
            a_vals.append(analytic[name].reshape(-1)[i])
        if not n_vals:
            continue
        a, n = np.array(a_vals), np.array(n_vals)
        scale = max(np.linalg.norm(a), np.linalg.norm(n))
        # e.g. the conv bias right before batch norm has an identically zero gradient
        report.rel_err[name] = 0.0 if scale < floor else float(np.linalg.norm(a - n) / scale)
    return report
