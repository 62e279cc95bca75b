"""HSIC-Lasso feature selection with post-selection inference."""

import json

from ._core import (
    HsicPsiError,
    confidence_interval,
    estimate_cov,
    estimate_H,
    estimate_M,
    event_full_model,
    event_single_feature,
    gram,
    hsic_biased,
    hsic_unbiased,
    lambda_max,
    median_bandwidth,
    p_value,
    run_psi_json,
    simulate,
    solve,
    trunc_gauss_cdf,
    truncation_points,
)

__all__ = [
    "HsicPsiError",
    "confidence_interval",
    "estimate_cov",
    "estimate_H",
    "estimate_M",
    "event_full_model",
    "event_single_feature",
    "gram",
    "hsic_biased",
    "hsic_unbiased",
    "lambda_max",
    "median_bandwidth",
    "p_value",
    "run_psi",
    "run_psi_json",
    "simulate",
    "solve",
    "trunc_gauss_cdf",
    "truncation_points",
]


def run_psi(X, y, **options):
    """Run the full split/screen/select/infer pipeline and return the report as a dict.

    Keyword options match run_psi_json (alpha, target, side, h_estimator, ...).
    """
    return json.loads(run_psi_json(X, y, **options))
