import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from t1forge import phantom, segmenter, uncertainty


@pytest.fixture(scope="session")
def default_truth():
    return phantom.generate(phantom.PhantomSpec(seed=3))


@pytest.fixture(scope="session")
def noisy_truth():
    return phantom.generate(phantom.PhantomSpec(noise_sd=30.0, seed=3))


@pytest.fixture(scope="session")
def fifty_phantom_run():
    """Shared 50-phantom segmentation sweep with randomised myocardial T1
    (noise SD 30 ms), reused by the fidelity and agreement acceptance tests."""
    rng = np.random.default_rng(2024)
    rows = []
    for s in range(50):
        myo_t1 = float(rng.uniform(870.0, 1010.0))
        spec = phantom.PhantomSpec(noise_sd=30.0, seed=1000 + s, t1_myocardium=myo_t1)
        truth = phantom.generate(spec)
        samples = segmenter.segment_mc(truth.image, t=32, seed=s)
        mask = uncertainty.final_mask(uncertainty.mean_probability(samples))
        rows.append({"truth": truth, "spec": spec, "mask": mask})
    return rows
