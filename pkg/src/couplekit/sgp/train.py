"""Train one FITC model per output channel of a dataset."""

from __future__ import annotations

import time
from collections.abc import Sequence

from couplekit.common import derive_seed, fmt_duration, parallel_map
from couplekit.core.dataset import Dataset, standardize_channel
from couplekit.core.space import DesignSpace
from couplekit.sgp.fitc import FitcModel, FitConfig, fit


def channel_seed(seed: int, name: str) -> int:
    return derive_seed(seed, "sgp", name)


def train_channels(
    ds: Dataset,
    space: DesignSpace,
    channels: Sequence[str],
    m: int | None = None,
    seed: int = 0,
    config: FitConfig | None = None,
    verbose: bool = False,
) -> dict[str, FitcModel]:
    """Fit every requested channel; channels train concurrently and independently."""
    x = space.normalize(ds.aligned_inputs(space))
    targets = {name: standardize_channel(ds, name) for name in channels}
    t0 = time.perf_counter()

    def train(name: str) -> FitcModel:
        y, channel = targets[name]
        return fit(
            x,
            y,
            m=m,
            seed=channel_seed(seed, name),
            config=config,
            name=name,
            standardization=(channel.mean, channel.std),
            verbose=verbose,
        )

    models = parallel_map(train, list(channels))
    if verbose:
        print(
            f"SGP: trained {len(models)} channel(s) on {ds.n_rows:,} rows "
            f"in {fmt_duration(time.perf_counter() - t0)}"
        )
    return dict(zip(channels, models))
