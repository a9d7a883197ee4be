"""Subject-level normalization of device orientation and bias.

A worn accelerometer reports in an arbitrary device frame and with a
small additive offset. Normalization estimates a rotation R and bias b
per subject so that x = R u - b expresses every raw sample u in a common
wearer frame: gravity while standing maps to exactly (-1, 0, 0), and
lying on the back lands near (0, -1, 0).

The rotation comes from a closed form that is the exact minimizer of

    ||R a1 + e1||^2 + ||R a2 + e2||^2

over rotation matrices, where a1 and a2 are the raw standing and lying
segment means and e1, e2 are the first two canonical basis vectors. Among
the two candidate orientation families the one satisfying the right-hand
condition e3 . R (a1 x a2) > 0 is returned; it always attains the lower
objective. The bias is then fixed so the standing mean maps to -e1 with
no residual.

This module also carries the resting-segment bias test: a normal
approximation to the distribution of | ||mean||^2 - 1 | under the
hypothesis of an unbiased device, using the conservative variance bound
(6/n) * ||Sigma||_op.
"""

from __future__ import annotations

from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .core import (
    LabelTimeline,
    Segment,
    TriaxialSeries,
    as_vec3,
    label_runs,
    segment_mean,
    segment_view,
)
from .errors import DegenerateCalibration, InsufficientSamples, SingularCovariance

#: Cross-product magnitude below which calibration means are considered
#: degenerate (parallel or near-zero).
EPSILON_PARALLEL = 1e-6

_E1 = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class RotationMatrix:
    """A proper rotation, validated at construction.

    The matrix must be orthonormal with determinant +1 to within 1e-10.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("rotation entries must be finite")
        if np.max(np.abs(m.T @ m - np.eye(3))) > 1e-10:
            raise ValueError("matrix is not orthonormal")
        if abs(np.linalg.det(m) - 1.0) > 1e-10:
            raise ValueError("matrix is not a proper rotation (det != +1)")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def apply(self, v) -> np.ndarray:
        return self.matrix @ as_vec3(v)


@dataclass(frozen=True)
class NormalizationTransform:
    """Per-subject frame correction x = R u - b."""

    rotation: RotationMatrix
    bias: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bias", as_vec3(self.bias))


@dataclass(frozen=True)
class BiasTestResult:
    """Outcome of the resting-segment device-bias test.

    ``rejected`` is True when the statistic exceeds the two-sided normal
    critical value at level alpha, i.e. the data are inconsistent with an
    unbiased device.
    """

    statistic: float
    n: int
    mean_norm_sq: float
    sigma_op_norm: float
    alpha: float
    critical_value: float
    rejected: bool


def estimate_rotation(a1, a2, *, eps_parallel: float = EPSILON_PARALLEL) -> RotationMatrix:
    """Closed-form optimal rotation from standing and lying means.

    Parameters
    ----------
    a1, a2:
        Raw-frame segment means for standing and lying. They must be
        non-degenerate: ``||a1 x a2|| > eps_parallel``, which excludes
        (near-)parallel and (near-)zero inputs.

    Returns
    -------
    RotationMatrix
        The unique rotation minimizing ||R a1 + e1||^2 + ||R a2 + e2||^2
        subject to the right-hand condition e3 . R (a1 x a2) > 0.

    Notes
    -----
    Writing b1 = a1/||a1||, b2 for the normalized rejection of a2 from b1,
    and a1 = c1 b1, a2 = c2 b1 + c3 b2, the minimizer is a planar rotation
    through the angle with cos t = -(c1+c3)/s, sin t = c2/s where
    s = sqrt((c1+c3)^2 + c2^2), composed with the change of basis onto
    (b1, b2, b1 x b2). Bias contamination of the means is deliberately
    ignored; offsets are small enough not to matter for orientation.
    """
    a1 = as_vec3(a1)
    a2 = as_vec3(a2)
    cross = np.cross(a1, a2)
    if float(np.linalg.norm(cross)) <= eps_parallel:
        raise DegenerateCalibration(
            "standing and lying means are parallel or near zero; "
            f"||a1 x a2|| = {float(np.linalg.norm(cross)):.3e} <= {eps_parallel:.1e}"
        )

    c1 = float(np.linalg.norm(a1))
    b1 = a1 / c1
    c2 = float(a2 @ b1)
    rej = a2 - c2 * b1
    c3 = float(np.linalg.norm(rej))
    b2 = rej / c3

    s = float(np.hypot(c1 + c3, c2))
    cos_t = -(c1 + c3) / s
    sin_t = c2 / s
    planar = np.array(
        [
            [cos_t, -sin_t, 0.0],
            [sin_t, cos_t, 0.0],
            [0.0, 0.0, 1.0],
        ]
    )
    # rows b1, b2, b1 x b2 form the transpose of the basis matrix [b1 b2 b1xb2]
    frame = np.stack([b1, b2, np.cross(b1, b2)])
    return RotationMatrix(planar.T @ frame)


def estimate_transform(
    series: TriaxialSeries,
    standing: Segment,
    lying: Segment,
    *,
    eps_parallel: float = EPSILON_PARALLEL,
) -> NormalizationTransform:
    """Estimate the full frame correction from calibration segments.

    The rotation comes from :func:`estimate_rotation` on the two segment
    means; the bias is b = R a1 + e1, chosen so the standing mean maps to
    exactly (-1, 0, 0) under x = R u - b.
    """
    a1 = segment_mean(series, standing)
    a2 = segment_mean(series, lying)
    rotation = estimate_rotation(a1, a2, eps_parallel=eps_parallel)
    bias = rotation.matrix @ a1 + _E1
    return NormalizationTransform(rotation=rotation, bias=bias)


def apply_transform(series: TriaxialSeries, transform: NormalizationTransform) -> TriaxialSeries:
    """Map every sample through x = R u - b, preserving fs and start time."""
    out = series.samples @ transform.rotation.matrix.T - transform.bias
    return TriaxialSeries(samples=out, fs=series.fs, start_time=series.start_time)


def invert_transform(transform: NormalizationTransform) -> NormalizationTransform:
    """The inverse correction u = R' x - b' with R' = R^T, b' = -R^T b."""
    r_inv = transform.rotation.matrix.T
    return NormalizationTransform(
        rotation=RotationMatrix(r_inv), bias=-(r_inv @ transform.bias)
    )


def labeled_run_segment(
    timeline: LabelTimeline,
    label: str,
    *,
    seconds: float | None = None,
    settle_seconds: float = 0.0,
) -> Segment:
    """First contiguous run of a label, as a segment for calibration.

    Optionally skips ``settle_seconds`` at the run's start (useful on real
    recordings where the posture stabilizes) and caps the length at
    ``seconds``. Raises DegenerateCalibration when the label never occurs
    or the trimmed run is empty.
    """
    for start, end, run_label in label_runs(timeline.labels):
        if run_label != label:
            continue
        start = start + int(round(settle_seconds * timeline.fs))
        if seconds is not None:
            end = min(end, start + int(round(seconds * timeline.fs)))
        if end <= start:
            break
        return Segment(start=start, end=end)
    raise DegenerateCalibration(
        f"no usable run labeled {label!r} for calibration"
    )


def calibration_segments(
    timeline: LabelTimeline,
    *,
    standing_label: str = "standing",
    lying_label: str = "lying",
    seconds: float | None = 3.0,
    settle_seconds: float = 0.0,
) -> tuple[Segment, Segment]:
    """Standing and lying calibration segments located from labels."""
    return (
        labeled_run_segment(
            timeline, standing_label, seconds=seconds, settle_seconds=settle_seconds
        ),
        labeled_run_segment(
            timeline, lying_label, seconds=seconds, settle_seconds=settle_seconds
        ),
    )


def covariance_operator_norm(cov: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric PSD 3x3 covariance matrix."""
    eigenvalues = np.linalg.eigvalsh(np.asarray(cov, dtype=np.float64))
    return float(eigenvalues[-1])


def bias_test(
    series: TriaxialSeries,
    segment: Segment,
    *,
    alpha: float = 0.05,
) -> BiasTestResult:
    """Test a resting segment for device bias.

    Under an unbiased device the resting mean has unit magnitude. The
    statistic

        T = | ||X_bar||^2 - 1 | / sqrt((6/n) ||Sigma_hat||_op)

    is compared against the two-sided standard normal critical value at
    level ``alpha``. The operator-norm bound makes the test conservative:
    it rejects no more often than nominal under the hypothesis, whatever
    the true covariance orientation.

    Sigma_hat is the unbiased (n-1 denominator) sample covariance of the
    segment. At least two samples are required; a segment whose covariance
    has zero operator norm (all samples identical) is rejected as
    :class:`SingularCovariance` since T is undefined there.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    x = segment_view(series, segment)
    n = x.shape[0]
    if n < 2:
        raise InsufficientSamples(f"bias test needs at least 2 samples, got {n}")

    mean = x.mean(axis=0)
    mean_norm_sq = float(mean @ mean)
    cov = np.cov(x.T, ddof=1)
    op_norm = covariance_operator_norm(cov)
    if op_norm <= 0.0:
        raise SingularCovariance(
            "segment covariance has zero operator norm; the statistic is undefined"
        )

    statistic = abs(mean_norm_sq - 1.0) / float(np.sqrt((6.0 / n) * op_norm))
    critical = NormalDist().inv_cdf(1.0 - alpha / 2.0)
    return BiasTestResult(
        statistic=statistic,
        n=n,
        mean_norm_sq=mean_norm_sq,
        sigma_op_norm=op_norm,
        alpha=float(alpha),
        critical_value=critical,
        rejected=statistic > critical,
    )
