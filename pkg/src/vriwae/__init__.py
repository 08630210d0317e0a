"""VR-IWAE bound gradient estimators, asymptotic predictions and collapse
diagnostics.

Subpackages by concern:

* :mod:`vriwae.statcore`   - numerical/statistical kernels and oracles
* :mod:`vriwae.models`     - reparameterized models with analytic partials
* :mod:`vriwae.estimators` - bound / REP / DREP Monte Carlo estimators
* :mod:`vriwae.analytics`  - closed-form leading-order predictions
* :mod:`vriwae.collapse`   - high-dimensional weight-collapse diagnostics
* :mod:`vriwae.harness`    - sweep runner, figure presets, oracle suite
* :mod:`vriwae.kernels`    - compiled/NumPy backend for the hot reductions
"""

from .analytics import (
    AnalyticPrediction,
    gaussian_predictions,
    lingauss_predictions,
    large_n_gradient_expansion,
)
from .estimators import (
    EstimatorConfig,
    GradSampleBatch,
    drep_gradient,
    rep_gradient,
    replicate_sweep,
    vriwae_bound_estimate,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .models import (
    DREP,
    REP,
    GaussianModel,
    LinearGaussianModel,
    LinGaussDataset,
    Psi,
    gaussian_offset,
    lingauss_offset,
)
from .statcore import (
    MomentAccumulator,
    SnrValue,
    log_sum_exp,
    mills_ratio,
    normal_cdf,
    normal_pdf,
    normal_quantile,
    self_normalize,
    snr_of_samples,
)

__version__ = "0.1.0"
