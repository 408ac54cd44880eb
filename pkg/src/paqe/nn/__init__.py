"""Minimal numpy neural-network engine for the enhancement network."""

from .layers import BatchNorm2d, Conv2d, conv2d_forward
from .loss import l1_loss
from .network import DESK_NET, PAPER_NET, NetConfig, QENetwork, network_backward, network_forward
from .optim import Adam, adam_step
from .serialize import load_weights, loads_weights, dumps_weights, save_weights

__all__ = [
    "BatchNorm2d", "Conv2d", "conv2d_forward", "l1_loss", "DESK_NET", "PAPER_NET",
    "NetConfig", "QENetwork", "network_backward", "network_forward", "Adam", "adam_step",
    "load_weights", "loads_weights", "dumps_weights", "save_weights",
]
