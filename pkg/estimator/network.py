"""
The classical network h(s; theta_N).

Each basis string gets its own learned embedding vector (a table of 2^n
rows), followed by three fully connected ReLU layers and a scalar head.
Everything runs in float64 on the CPU.
"""
import copy
import logging
import math
from typing import Dict, Optional

import numpy as np
import torch
from torch import nn

from quantum.circuit import BitString
from quantum.exceptions import ArgumentError, CapacityError

logger = logging.getLogger('estimator')

DTYPE = torch.float64
MAX_EMBEDDED_QUBITS = 12


class EntropyNet(nn.Module):
    """Embedding table + 3 hidden ReLU layers + linear head."""

    def __init__(self, n_qubits: int, embed_dim: int = 64, hidden_width: int = 256,
                 n_hidden: int = 3, seed: Optional[int] = None):
        super().__init__()
        if n_qubits < 1:
            raise ArgumentError(f"Network needs at least one qubit, got {n_qubits}")
        if n_qubits > MAX_EMBEDDED_QUBITS:
            raise CapacityError(f"A per-string embedding over {n_qubits} qubits is too large")
        if embed_dim < 1 or hidden_width < 1 or n_hidden < 1:
            raise ArgumentError("Embedding size, hidden width and depth must be positive")

        self.n_qubits = n_qubits
        self.embed_dim = embed_dim
        self.hidden_width = hidden_width
        self.n_hidden = n_hidden
        self.seed = seed

        self.embedding = nn.Embedding(1 << n_qubits, embed_dim, dtype=DTYPE)
        layers = []
        width = embed_dim
        for _ in range(n_hidden):
            layers.append(nn.Linear(width, hidden_width, dtype=DTYPE))
            layers.append(nn.ReLU())
            width = hidden_width
        self.hidden = nn.Sequential(*layers)
        self.head = nn.Linear(width, 1, dtype=DTYPE)
        self.reset_parameters(seed)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def reset_parameters(self, seed: Optional[int] = None):
        """Seeded uniform He initialization, zero biases."""
        generator = torch.Generator()
        generator.manual_seed(0 if seed is None else int(seed))
        with torch.no_grad():
            bound = math.sqrt(3.0)
            self.embedding.weight.copy_(
                (torch.rand(self.embedding.weight.shape, generator=generator, dtype=DTYPE) * 2 - 1) * bound
            )
            for module in [*self.hidden, self.head]:
                if isinstance(module, nn.Linear):
                    bound = math.sqrt(6.0 / module.in_features)
                    module.weight.copy_(
                        (torch.rand(module.weight.shape, generator=generator, dtype=DTYPE) * 2 - 1) * bound
                    )
                    module.bias.zero_()

    def forward(self, indices: torch.Tensor) -> torch.Tensor:
        """h for a batch of basis indices, shape (batch,)."""
        return self.head(self.hidden(self.embedding(indices))).squeeze(-1)

    def all_outputs(self) -> torch.Tensor:
        """h over every basis string, differentiable."""
        return self(torch.arange(self.dim))

    def h(self, s: BitString) -> float:
        if s.n != self.n_qubits:
            raise ArgumentError(f"Bit string {s} has {s.n} bits, network expects {self.n_qubits}")
        with torch.no_grad():
            return float(self(torch.tensor([s.index]))[0])

    def h_table(self) -> np.ndarray:
        """h(s_i) for all 2^n strings, ordered by basis index."""
        with torch.no_grad():
            return self.all_outputs().numpy().copy()

    def snapshot(self) -> Dict[str, np.ndarray]:
        """Detached copy of every weight array, keyed by parameter name."""
        return {name: tensor.detach().numpy().copy() for name, tensor in self.state_dict().items()}

    def load_snapshot(self, weights: Dict[str, np.ndarray]):
        self.load_state_dict({name: torch.from_numpy(np.array(array)) for name, array in weights.items()})

    def clone(self) -> 'EntropyNet':
        """Independent copy for a warm-started trainer."""
        return copy.deepcopy(self)

    def extra_repr(self) -> str:
        return f"n_qubits={self.n_qubits}"


def build_network(n_qubits: int, embed_dim: int = 64, hidden_width: int = 256, seed: Optional[int] = None) -> EntropyNet:
    net = EntropyNet(n_qubits, embed_dim=embed_dim, hidden_width=hidden_width, seed=seed)
    logger.debug(
        f"Built EntropyNet n={n_qubits} embed={embed_dim} width={hidden_width} "
        f"params={sum(p.numel() for p in net.parameters())}"
    )
    return net
