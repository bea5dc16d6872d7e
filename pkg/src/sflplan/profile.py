"""Per-layer model profiles and the three cut-layer regression curves.

A profile stores, for each candidate cut-layer l of an L-layer model, the
cumulative size of the device-side fragment (bits), the cumulative
forward-pass cost of that fragment (FLOPs per sample), and the size of the
activations crossing the cut (bits per sample).  Three parametric curves are
fit against those arrays:

    device fragment size   ~ alpha * l^2
    training compute load  ~ beta  * l * (1 + kappa)
    activation payload     ~ gamma1 / (l + gamma2)

kappa, the backward/forward compute ratio, is fit separately from measured
(forward, backward) timing pairs as a through-origin slope.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import CurveFitError, InvalidProfileError, UndefinedCoefficientError

# Search bound multiplier and interval tolerance for the gamma2 line search.
# The documented guarantee is 1e-6 absolute; the search actually runs to a
# much tighter interval so that noise-free profiles round-trip to ~1e-12.
GAMMA2_RANGE_FACTOR = 10.0
GAMMA2_TOL = 1e-12


@dataclass(frozen=True)
class ModelProfile:
    """Ground-truth per-layer arrays for an L-layer model.

    Arrays are indexed by cut-layer l = 1..L (python index l-1).  A cut at
    layer L means the device trains the whole model, so the activation
    payload entry for l = L is identically zero.
    """

    layer_count: int
    client_model_bits: np.ndarray
    client_flops_fwd: np.ndarray
    smashed_bits: np.ndarray
    total_model_bits: float
    total_flops: float

    def __post_init__(self):
        L = self.layer_count
        if L < 1:
            raise InvalidProfileError(f"layer_count must be >= 1, got {L}")
        for name in ("client_model_bits", "client_flops_fwd", "smashed_bits"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            if arr.shape != (L,):
                raise InvalidProfileError(f"{name} must have length {L}, got {arr.shape}")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise InvalidProfileError(f"{name} entries must be finite and nonnegative")
            if not np.any(arr > 0):
                raise InvalidProfileError(f"{name} is all-zero")
        for name in ("client_model_bits", "client_flops_fwd"):
            arr = getattr(self, name)
            if np.any(np.diff(arr) < 0):
                raise InvalidProfileError(f"{name} must be non-decreasing in the cut-layer")
        if self.smashed_bits[-1] != 0.0:
            raise InvalidProfileError("smashed_bits must be zero at l = L (full local training)")
        if self.total_model_bits <= 0 or self.total_flops <= 0:
            raise InvalidProfileError("totals must be positive")
        if not math.isclose(self.client_model_bits[-1], self.total_model_bits, rel_tol=1e-9):
            raise InvalidProfileError(
                "client_model_bits[L] must equal total_model_bits "
                f"({self.client_model_bits[-1]!r} != {self.total_model_bits!r})"
            )

    def to_dict(self) -> dict:
        return {
            "layer_count": self.layer_count,
            "client_model_bits": self.client_model_bits.tolist(),
            "client_flops_fwd": self.client_flops_fwd.tolist(),
            "smashed_bits": self.smashed_bits.tolist(),
            "total_model_bits": self.total_model_bits,
            "total_flops": self.total_flops,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelProfile":
        try:
            return cls(
                layer_count=int(data["layer_count"]),
                client_model_bits=np.asarray(data["client_model_bits"], dtype=float),
                client_flops_fwd=np.asarray(data["client_flops_fwd"], dtype=float),
                smashed_bits=np.asarray(data["smashed_bits"], dtype=float),
                total_model_bits=float(data["total_model_bits"]),
                total_flops=float(data["total_flops"]),
            )
        except KeyError as exc:
            raise InvalidProfileError(f"profile file missing key {exc}") from exc


@dataclass(frozen=True)
class TimingPairs:
    """Measured (forward_seconds, backward_seconds) pairs from training runs."""

    samples: list[tuple[float, float]]

    def __post_init__(self):
        if not self.samples:
            raise InvalidProfileError("timing pairs must be non-empty")
        for fp, bp in self.samples:
            if fp <= 0 or bp <= 0:
                raise InvalidProfileError("timing entries must be positive")

    @classmethod
    def from_list(cls, pairs) -> "TimingPairs":
        return cls(samples=[(float(a), float(b)) for a, b in pairs])


@dataclass(frozen=True)
class FittedCurves:
    """Regression parameters for the three curves plus fit quality scores."""

    alpha: float        # bits per layer^2
    beta: float         # forward FLOPs per layer
    kappa: float        # backward/forward compute ratio, >= 1
    gamma1: float       # bits * layers
    gamma2: float       # layers
    r2_size: float = 1.0
    r2_flops: float = 1.0
    r2_smashed: float = 1.0

    def __post_init__(self):
        checks = [
            (self.alpha >= 0, f"alpha must be >= 0, got {self.alpha}"),
            (self.beta > 0, f"beta must be > 0, got {self.beta}"),
            (self.kappa >= 1, f"kappa must be >= 1, got {self.kappa}"),
            (self.gamma1 > 0, f"gamma1 must be > 0, got {self.gamma1}"),
            (self.gamma2 >= 0, f"gamma2 must be >= 0, got {self.gamma2}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise CurveFitError("parameters", msg)
        for name in ("r2_size", "r2_flops", "r2_smashed"):
            if getattr(self, name) > 1.0:
                raise CurveFitError(name, "determination coefficient cannot exceed 1")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "kappa": self.kappa,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "r2_size": self.r2_size,
            "r2_flops": self.r2_flops,
            "r2_smashed": self.r2_smashed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FittedCurves":
        kwargs = {k: float(data[k]) for k in ("alpha", "beta", "kappa", "gamma1", "gamma2")}
        for k in ("r2_size", "r2_flops", "r2_smashed"):
            if k in data:
                kwargs[k] = float(data[k])
        return cls(**kwargs)


def determination_coefficient(truth, predicted) -> float:
    """Standard coefficient of determination of `predicted` against `truth`.

    R = 1 - SS_res / SS_tot with SS_tot taken about the mean of the true
    values.  Raises if the truth has zero variance (R undefined).
    """
    y = np.asarray(truth, dtype=float)
    yhat = np.asarray(predicted, dtype=float)
    if y.size == 0 or y.shape != yhat.shape:
        raise ValueError(f"arrays must be equal-length and non-empty, got {y.shape} vs {yhat.shape}")
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedCoefficientError("truth array has zero variance")
    ss_res = float(np.sum((y - yhat) ** 2))
    return 1.0 - ss_res / ss_tot


def _golden_section_min(fun, lo: float, hi: float, tol: float) -> float:
    """Golden-section minimizer for a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while (b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def fit_curves(profile: ModelProfile, timing: TimingPairs) -> FittedCurves:
    """Fit alpha, beta, kappa, gamma1, gamma2 and score each curve.

    alpha and beta come from closed-form least squares through the origin in
    the bases l^2 and l.  kappa is the through-origin slope of backward vs
    forward times.  (gamma1, gamma2) minimize the squared error of
    gamma1/(l+gamma2) with gamma1 closed-form for each gamma2 and gamma2
    found by a 1-D golden-section search on [0, 10*L].

    The activation curve is fit over l = 1..L-1 only: the l = L entry is
    identically zero by construction and lies outside the reciprocal model.
    """
    L = profile.layer_count
    layers = np.arange(1, L + 1, dtype=float)

    # alpha: client_model_bits ~ alpha * l^2
    l2 = layers**2
    denom = float(np.sum(l2 * l2))
    if denom == 0.0:
        raise CurveFitError("size", "zero denominator in alpha fit")
    alpha = max(float(np.sum(l2 * profile.client_model_bits)) / denom, 0.0)

    # kappa: bp ~ kappa * fp, through the origin
    fp = np.array([s[0] for s in timing.samples])
    bp = np.array([s[1] for s in timing.samples])
    denom = float(np.sum(fp * fp))
    if denom == 0.0:
        raise CurveFitError("bp_fp_ratio", "zero denominator in kappa fit")
    kappa = float(np.sum(fp * bp)) / denom
    if kappa < 1.0:
        raise CurveFitError("bp_fp_ratio", f"fitted kappa {kappa} < 1")

    # beta: client_flops_fwd ~ beta * l (the (1+kappa) factor cancels)
    denom = float(np.sum(layers * layers))
    beta = float(np.sum(layers * profile.client_flops_fwd)) / denom
    if beta <= 0.0:
        raise CurveFitError("flops", f"fitted beta {beta} <= 0")

    # (gamma1, gamma2): smashed ~ gamma1 / (l + gamma2) over l = 1..L-1
    if L < 2:
        raise CurveFitError("smashed", "need at least 2 layers to fit the activation curve")
    sl = layers[:-1]
    sy = profile.smashed_bits[:-1]

    def gamma1_for(g2: float) -> float:
        u = 1.0 / (sl + g2)
        return float(np.sum(sy * u)) / float(np.sum(u * u))

    def sse(g2: float) -> float:
        g1 = gamma1_for(g2)
        return float(np.sum((sy - g1 / (sl + g2)) ** 2))

    gamma2 = _golden_section_min(sse, 0.0, GAMMA2_RANGE_FACTOR * L, GAMMA2_TOL)
    gamma1 = gamma1_for(gamma2)
    if gamma1 <= 0.0:
        raise CurveFitError("smashed", f"fitted gamma1 {gamma1} <= 0")

    def scored(curve: str, truth, predicted) -> float:
        try:
            return determination_coefficient(truth, predicted)
        except UndefinedCoefficientError as exc:
            raise CurveFitError(curve, str(exc)) from exc

    r2_size = scored("size", profile.client_model_bits, alpha * l2)
    r2_flops = scored("flops", profile.client_flops_fwd, beta * layers)
    r2_smashed = scored("smashed", sy, gamma1 / (sl + gamma2))
    return FittedCurves(
        alpha=alpha, beta=beta, kappa=kappa, gamma1=gamma1, gamma2=gamma2,
        r2_size=r2_size, r2_flops=r2_flops, r2_smashed=r2_smashed,
    )


def synthesize_profile(
    alpha: float,
    beta: float,
    kappa: float,
    gamma1: float,
    gamma2: float,
    layer_count: int,
    noise: float = 0.1,
    seed: int = 0,
) -> ModelProfile:
    """Generate a ground-truth profile following the three curves.

    Multiplicative noise is uniform in [-noise, +noise]; monotonicity of the
    cumulative arrays is restored with a running maximum.  Deterministic for
    a fixed seed.
    """
    FittedCurves(alpha=alpha, beta=beta, kappa=kappa, gamma1=gamma1, gamma2=gamma2)
    if not 0 <= noise < 1:
        raise ValueError(f"noise must be in [0, 1), got {noise}")
    L = int(layer_count)
    rng = np.random.default_rng(seed)
    layers = np.arange(1, L + 1, dtype=float)

    def jitter(values: np.ndarray) -> np.ndarray:
        if noise == 0:
            return values.copy()
        return values * (1.0 + noise * rng.uniform(-1.0, 1.0, size=values.shape))

    size = np.maximum.accumulate(jitter(alpha * layers**2))
    flops = np.maximum.accumulate(jitter(beta * layers))
    smashed = jitter(gamma1 / (layers + gamma2))
    smashed[-1] = 0.0
    return ModelProfile(
        layer_count=L,
        client_model_bits=size,
        client_flops_fwd=flops,
        smashed_bits=smashed,
        total_model_bits=float(size[-1]),
        total_flops=float(flops[-1]) * (1.0 + kappa),
    )


def load_profile(path: str | Path) -> ModelProfile:
    with open(path, "r", encoding="utf-8") as fh:
        return ModelProfile.from_dict(json.load(fh))


def save_profile(profile: ModelProfile, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(profile.to_dict(), fh, indent=2)
        fh.write("\n")


def load_timing(path: str | Path) -> TimingPairs:
    with open(path, "r", encoding="utf-8") as fh:
        return TimingPairs.from_list(json.load(fh))


def save_timing(timing: TimingPairs, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([[fp, bp] for fp, bp in timing.samples], fh)
        fh.write("\n")
