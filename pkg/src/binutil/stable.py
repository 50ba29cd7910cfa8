"""Floating-point summation and log-space accumulation helpers."""

import math

import numpy as np

MACHINE_EPS = float(np.finfo(float).eps)


def exp_sum(log_terms) -> float:
    """Correctly rounded sum of exp(log_terms) via compensated summation."""
    arr = np.asarray(log_terms, dtype=float)
    if arr.size == 0:
        return 0.0
    return math.fsum(np.exp(arr))


def weighted_exp_sum(values, log_weights) -> float:
    """Compensated sum of values[k] * exp(log_weights[k])."""
    v = np.asarray(values, dtype=float)
    lw = np.asarray(log_weights, dtype=float)
    if v.size == 0:
        return 0.0
    return math.fsum(v * np.exp(lw))


def abs_weighted_exp_sum(values, log_weights) -> float:
    """Compensated sum of |values[k]| * exp(log_weights[k])."""
    v = np.asarray(values, dtype=float)
    lw = np.asarray(log_weights, dtype=float)
    if v.size == 0:
        return 0.0
    return math.fsum(np.abs(v) * np.exp(lw))


def log_prefix_sums(log_terms) -> np.ndarray:
    """out[m] = log(sum_{k <= m} exp(log_terms[k])), accumulated in log space."""
    return np.logaddexp.accumulate(np.asarray(log_terms, dtype=float))


def log_suffix_sums(log_terms) -> np.ndarray:
    """out[m] = log(sum_{k >= m} exp(log_terms[k])), accumulated in log space."""
    arr = np.asarray(log_terms, dtype=float)
    return np.logaddexp.accumulate(arr[::-1])[::-1]


def recursive_sum_error_bound(term_count: int, abs_sum: float) -> float:
    """Classical a-priori bound on the rounding error of summing term_count terms."""
    return (term_count + 1) * MACHINE_EPS * abs_sum
