"""Bundled example configurations for the experiment harness."""

from __future__ import annotations

import numpy as np

from .models import LinearGaussianModel

__all__ = ["PRESETS", "preset_model", "preset_defaults"]


def _three_state_model() -> LinearGaussianModel:
    return LinearGaussianModel(
        A=[[0.0, 3.0, 1.0], [2.0, -2.0, 1.0], [-2.0, 1.0, -3.0]],
        G=[[0.5], [0.5], [0.5]],
        C=[[1.0, -1.0, 2.0], [1.0, 0.0, 1.0]],
        V=[[0.5, 0.1], [0.1, 0.5]],
        x0_mean=np.zeros(3),
        x0_cov=np.eye(3),
    )


def _scalar_benchmark_model() -> LinearGaussianModel:
    return LinearGaussianModel.scalar(A=-1.0, G=1.0, C=1.0, V=0.5, x0_mean=0.0, P0=1.0)


# name -> (model factory, experiment defaults)
PRESETS: dict[str, tuple] = {
    "paper-3.4": (
        _three_state_model,
        {
            "lambda_values": [5.0, 10.0],
            "M_values": [10, 20],
            "horizon": 2.0,
            "grid_dt": 1e-3,
            "n_realizations": 100,
        },
    ),
    "scalar-benchmark": (
        _scalar_benchmark_model,
        {
            "lambda_values": [5.0],
            "M_values": [10, 20, 40],
            "horizon": 5.0,
            "grid_dt": 1e-2,
            "n_realizations": 100,
        },
    ),
}


def preset_model(name: str) -> LinearGaussianModel:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return PRESETS[name][0]()


def preset_defaults(name: str) -> dict:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    return dict(PRESETS[name][1])
