"""Batched 1-D FFT backend for the hot trajectory loop.

The split-step integrator spends most of its time in length-512 transforms
over a trajectory batch.  When torch is importable its pocketfft build runs
these ~3x faster than numpy on one core, so it is used opportunistically;
numpy remains the only hard dependency and the reference backend.  Both
backends implement the same transform; results agree to roundoff.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised via whichever backend the env provides
    import torch

    def fft_last(x: np.ndarray) -> np.ndarray:
        return torch.fft.fft(torch.from_numpy(x), dim=-1).numpy()

    def ifft_last(x: np.ndarray) -> np.ndarray:
        return torch.fft.ifft(torch.from_numpy(x), dim=-1).numpy()

    BACKEND = "torch"
except ImportError:  # pragma: no cover
    def fft_last(x: np.ndarray) -> np.ndarray:
        return np.fft.fft(x, axis=-1)

    def ifft_last(x: np.ndarray) -> np.ndarray:
        return np.fft.ifft(x, axis=-1)

    BACKEND = "numpy"
