"""Stochastic velocity models: damped inertial oscillation plus turbulent background.

A complex velocity record z = u + iv is modeled as the sum of two independent
zero-mean Gaussian processes:

* an inertial oscillation, the complex Ornstein-Uhlenbeck (OU) process
  ``dz = (i*omega0 - c) z dt + A dQ`` with circular complex Brownian forcing,
  whose spectrum is a Lorentzian peak of height ``A^2/c^2`` at ``omega0``; and
* a turbulent background, an isotropic complex Matern process with spectrum
  ``B^2 / (omega^2 + h^2)^alpha``, which decays like a power law for
  ``|omega| >> h`` and flattens to white noise below ``h``.

Conventions used throughout: the autocovariance is
``s(tau) = E[z(t + tau) * conj(z(t))]`` and spectra satisfy
``S(omega) = integral s(tau) exp(-i*omega*tau) dtau``, so a positive
``omega0`` puts the oscillation peak at positive frequencies
(anticlockwise rotation).  Setting ``h = 0`` turns the background into a
nonstationary pure power law (a fractional-Brownian velocity record), which
is handled by :func:`simulate_fbm` and has no stationary autocovariance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter
from scipy.special import gamma as _gamma
from scipy.special import kv as _kv

from .series import ComplexSeries

__all__ = [
    "Variant",
    "ModelParams",
    "Acvs",
    "parse_variant",
    "ou_acvs",
    "ou_spectrum",
    "matern_acvs",
    "matern_spectrum",
    "model_spectrum",
    "model_acvs",
    "sampled_acvs",
    "simulate",
    "simulate_fbm",
]

# Lag (in units of h*|tau|) below which the Matern autocovariance switches to
# its analytic zero-lag limit; x^nu * K_nu(x) has a removable singularity there.
_MATERN_SMALL_X = 1e-8


class Variant(str, enum.Enum):
    """Model variants: which of the six parameters are free, fixed, or absent."""

    FULL6 = "full6"
    FIXED_FREQ5 = "fixed_freq5"
    FBM_BACKGROUND5 = "fbm_background5"
    MATERN_ONLY3 = "matern_only3"
    OU_ONLY3 = "ou_only3"


_VARIANT_ALIASES = {
    "full6": Variant.FULL6,
    "full": Variant.FULL6,
    "fixed_freq5": Variant.FIXED_FREQ5,
    "fixed5": Variant.FIXED_FREQ5,
    "fixed": Variant.FIXED_FREQ5,
    "fbm_background5": Variant.FBM_BACKGROUND5,
    "fbm5": Variant.FBM_BACKGROUND5,
    "matern_only3": Variant.MATERN_ONLY3,
    "matern3": Variant.MATERN_ONLY3,
    "matern": Variant.MATERN_ONLY3,
    "ou_only3": Variant.OU_ONLY3,
    "ou3": Variant.OU_ONLY3,
    "ou": Variant.OU_ONLY3,
}

# Free parameters per variant, in reporting order.
FREE_PARAMS = {
    Variant.FULL6: ("A", "B", "omega0", "c", "h", "alpha"),
    Variant.FIXED_FREQ5: ("A", "B", "c", "h", "alpha"),
    Variant.FBM_BACKGROUND5: ("A", "B", "omega0", "c", "alpha"),
    Variant.MATERN_ONLY3: ("B", "h", "alpha"),
    Variant.OU_ONLY3: ("A", "omega0", "c"),
}


def parse_variant(name: str | Variant) -> Variant:
    if isinstance(name, Variant):
        return name
    key = str(name).strip().lower()
    try:
        return _VARIANT_ALIASES[key]
    except KeyError:
        raise ValueError(
            f"unknown variant {name!r}; expected one of "
            f"{sorted(set(v.value for v in Variant))}"
        ) from None


@dataclass(frozen=True)
class ModelParams:
    """Parameter vector of the aggregated oscillation + background model.

    Parameters
    ----------
    A : float
        Oscillation forcing amplitude (velocity per sqrt(time)); > 0 whenever
        the oscillation component is present.  The stationary oscillation
        variance is ``A^2 / (2 c)``.
    B : float
        Background amplitude (velocity * time^(alpha - 1/2)); > 0 whenever the
        background component is present.
    omega0 : float
        Oscillation angular frequency (rad per time unit); sign selects the
        rotation sense.  Must stay below the Nyquist frequency of the record
        being modeled.
    c : float
        Oscillation damping (1/time); > 0.
    h : float
        Background damping / inverse timescale (1/time); > 0, except exactly 0
        under ``FBM_BACKGROUND5``.
    alpha : float
        Background spectral slope; > 1/2 (and < 3/2 when ``h = 0``).
    variant : Variant
        Which parameters are free; absent components are stored as zeros.
    """

    A: float
    B: float
    omega0: float
    c: float
    h: float
    alpha: float
    variant: Variant = Variant.FULL6

    def __post_init__(self):
        object.__setattr__(self, "variant", parse_variant(self.variant))
        for name in ("A", "B", "omega0", "c", "h", "alpha"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not all(
            math.isfinite(getattr(self, f)) for f in ("A", "B", "omega0", "c", "h", "alpha")
        ):
            raise ValueError("model parameters must be finite")
        if self.alpha <= 0.5:
            raise ValueError(f"alpha must exceed 1/2, got {self.alpha}")
        if self.has_oscillation:
            if self.A <= 0:
                raise ValueError(f"A must be positive, got {self.A}")
            if self.c <= 0:
                raise ValueError(f"c must be positive, got {self.c}")
        if self.has_background:
            if self.B <= 0:
                raise ValueError(f"B must be positive, got {self.B}")
            if self.background_is_fbm:
                if self.h != 0.0:
                    raise ValueError("fbm background requires h = 0 exactly")
                if not (0.5 < self.alpha < 1.5):
                    raise ValueError(
                        f"fbm background requires 1/2 < alpha < 3/2, got {self.alpha}"
                    )
            elif self.h <= 0:
                raise ValueError(f"h must be positive, got {self.h}")

    # -- component structure -------------------------------------------------

    @property
    def has_oscillation(self) -> bool:
        return self.variant is not Variant.MATERN_ONLY3

    @property
    def has_background(self) -> bool:
        return self.variant is not Variant.OU_ONLY3

    @property
    def background_is_fbm(self) -> bool:
        return self.variant is Variant.FBM_BACKGROUND5

    @property
    def free_names(self) -> tuple[str, ...]:
        return FREE_PARAMS[self.variant]

    @property
    def n_free(self) -> int:
        return len(self.free_names)

    def free_values(self) -> np.ndarray:
        return np.array([getattr(self, k) for k in self.free_names], dtype=float)

    def with_free_values(self, values) -> "ModelParams":
        updates = {k: float(v) for k, v in zip(self.free_names, values, strict=True)}
        return replace(self, **updates)

    def validate_for_dt(self, dt: float) -> None:
        """Check that the oscillation frequency is observable at interval dt."""
        if self.has_oscillation and abs(self.omega0) > np.pi / dt:
            raise ValueError(
                f"|omega0|={abs(self.omega0):.6g} exceeds the Nyquist frequency "
                f"{np.pi / dt:.6g} for dt={dt:.6g}"
            )

    # -- constructors per variant --------------------------------------------

    @classmethod
    def full6(cls, A, B, omega0, c, h, alpha) -> "ModelParams":
        return cls(A, B, omega0, c, h, alpha, Variant.FULL6)

    @classmethod
    def fixed_freq5(cls, A, B, c, h, alpha, f0) -> "ModelParams":
        """5-parameter model with the oscillation pinned to the local Coriolis frequency."""
        return cls(A, B, f0, c, h, alpha, Variant.FIXED_FREQ5)

    @classmethod
    def fbm_background5(cls, A, B, omega0, c, alpha) -> "ModelParams":
        """5-parameter model with a pure power-law (h = 0) background."""
        return cls(A, B, omega0, c, 0.0, alpha, Variant.FBM_BACKGROUND5)

    @classmethod
    def matern_only3(cls, B, h, alpha) -> "ModelParams":
        return cls(0.0, B, 0.0, 0.0, h, alpha, Variant.MATERN_ONLY3)

    @classmethod
    def ou_only3(cls, A, omega0, c) -> "ModelParams":
        return cls(A, 0.0, omega0, c, 0.0, 1.0, Variant.OU_ONLY3)

    def as_dict(self) -> dict:
        return {
            "A": self.A,
            "B": self.B,
            "omega0": self.omega0,
            "c": self.c,
            "h": self.h,
            "alpha": self.alpha,
            "variant": self.variant.value,
        }


@dataclass(frozen=True)
class Acvs:
    """Autocovariance sequence on the symmetric lag grid -(n-1)..(n-1)."""

    lags: np.ndarray
    values: np.ndarray
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "lags", np.asarray(self.lags, dtype=int))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))
        if self.lags.shape != self.values.shape:
            raise ValueError("lags and values must have matching shapes")


# ---------------------------------------------------------------------------
# Autocovariances and spectra
# ---------------------------------------------------------------------------


def ou_acvs(p: ModelParams, tau) -> np.ndarray | complex:
    """Autocovariance of the oscillation component at time lag(s) ``tau``.

    Returns ``(A^2 / 2c) * exp(i*omega0*tau) * exp(-c*|tau|)``: an
    exponentially decaying rotation, so the component has short memory with
    stationary variance ``A^2 / 2c``.
    """
    if p.c <= 0 or p.A <= 0:
        raise ValueError("oscillation autocovariance requires A > 0 and c > 0")
    tau = np.asarray(tau, dtype=float)
    out = (p.A**2 / (2.0 * p.c)) * np.exp(1j * p.omega0 * tau - p.c * np.abs(tau))
    return out if out.ndim else complex(out)


def ou_spectrum(p: ModelParams, omega) -> np.ndarray | float:
    """Spectral density ``A^2 / ((omega - omega0)^2 + c^2)`` of the oscillation."""
    if p.c <= 0:
        raise ValueError("oscillation spectrum requires c > 0")
    omega = np.asarray(omega, dtype=float)
    out = p.A**2 / ((omega - p.omega0) ** 2 + p.c**2)
    return out if out.ndim else float(out)


def matern_variance(B: float, h: float, alpha: float) -> float:
    """Zero-lag value of the Matern autocovariance (the process variance)."""
    return (
        B**2
        * _gamma(alpha - 0.5)
        / (2.0 * math.sqrt(math.pi) * _gamma(alpha) * h ** (2.0 * alpha - 1.0))
    )


def matern_acvs(p: ModelParams, tau) -> np.ndarray | float:
    """Autocovariance of the Matern background at time lag(s) ``tau``.

    Real-valued for all lags: ``x^(alpha-1/2) K_(alpha-1/2)(x)`` with
    ``x = h|tau|``, normalized so its Fourier transform is
    ``B^2 / (omega^2 + h^2)^alpha``.  The zero-lag limit is evaluated
    analytically; naive evaluation of the Bessel term underflows there.
    """
    if p.h <= 0:
        raise ValueError(
            "Matern autocovariance requires h > 0 (an h = 0 background is a "
            "nonstationary power law with no stationary autocovariance)"
        )
    if p.alpha <= 0.5:
        raise ValueError("Matern autocovariance requires alpha > 1/2")
    if p.B <= 0:
        raise ValueError("Matern autocovariance requires B > 0")
    nu = p.alpha - 0.5
    tau = np.asarray(tau, dtype=float)
    x = p.h * np.abs(tau)
    coef = p.B**2 / (2.0**nu * math.sqrt(math.pi) * _gamma(p.alpha) * p.h ** (2.0 * p.alpha - 1.0))
    small = x < _MATERN_SMALL_X
    x_safe = np.where(small, 1.0, x)
    vals = np.where(
        small,
        matern_variance(p.B, p.h, p.alpha),
        coef * x_safe**nu * _kv(nu, x_safe),
    )
    return vals if vals.ndim else float(vals)


def matern_spectrum(p: ModelParams, omega) -> np.ndarray | float:
    """Spectral density ``B^2 / (omega^2 + h^2)^alpha`` of the background.

    With ``h = 0`` (pure power law) the zero frequency is singular and must
    not be evaluated; nonzero frequencies are fine for 1/2 < alpha < 3/2.
    """
    if p.alpha <= 0.5:
        raise ValueError("background spectrum requires alpha > 1/2")
    if p.h < 0:
        raise ValueError("background spectrum requires h >= 0")
    if p.h == 0 and not p.background_is_fbm:
        raise ValueError("h = 0 is only valid for the fbm background variant")
    omega = np.asarray(omega, dtype=float)
    if p.h == 0 and np.any(omega == 0.0):
        raise ValueError("power-law background (h = 0) is singular at omega = 0")
    out = p.B**2 / (omega**2 + p.h**2) ** p.alpha
    return out if out.ndim else float(out)


def model_spectrum(p: ModelParams, omega) -> np.ndarray | float:
    """Aggregated model spectrum: oscillation plus background, per variant."""
    omega = np.asarray(omega, dtype=float)
    out = np.zeros_like(omega)
    if p.has_oscillation:
        out = out + ou_spectrum(p, omega)
    if p.has_background:
        out = out + matern_spectrum(p, omega)
    return out if out.ndim else float(out)


def model_acvs(p: ModelParams, tau) -> np.ndarray | complex:
    """Aggregated model autocovariance: oscillation plus background, per variant."""
    if p.background_is_fbm:
        raise ValueError(
            "the fbm background (h = 0) is nonstationary and has no "
            "stationary autocovariance"
        )
    tau = np.asarray(tau, dtype=float)
    out = np.zeros(tau.shape, dtype=complex)
    if p.has_oscillation:
        out = out + ou_acvs(p, tau)
    if p.has_background:
        out = out + matern_acvs(p, tau)
    return out if out.ndim else complex(out)


def sampled_acvs(p: ModelParams, n: int, dt: float) -> Acvs:
    """Model autocovariance sampled at lags ``-(n-1)*dt .. (n-1)*dt``."""
    lags = np.arange(-(n - 1), n)
    return Acvs(lags=lags, values=model_acvs(p, lags * dt), dt=dt)


# ---------------------------------------------------------------------------
# Exact Gaussian simulation
# ---------------------------------------------------------------------------


def _simulate_ou(p: ModelParams, n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Exact sampling of the complex OU component at interval dt.

    Uses the discrete recursion z[t+1] = exp((i*omega0 - c)*dt) z[t] + eps[t]
    with circular complex Gaussian innovations, started from the stationary
    law, so the sampled autocovariance equals the continuous one at lag
    multiples of dt with no discretization error.
    """
    var = p.A**2 / (2.0 * p.c)
    phi = np.exp((1j * p.omega0 - p.c) * dt)
    innov_var = var * (1.0 - np.exp(-2.0 * p.c * dt))
    noise = rng.standard_normal((2, n))
    x = np.empty(n, dtype=complex)
    x[0] = math.sqrt(var / 2.0) * (noise[0, 0] + 1j * noise[1, 0])
    x[1:] = math.sqrt(innov_var / 2.0) * (noise[0, 1:] + 1j * noise[1, 1:])
    return lfilter([1.0], [1.0, -phi], x)


def _circulant_eigenvalues(acvs_fn, n: int, max_doublings: int = 4):
    """Eigenvalues of a nonnegative circulant embedding of a real acvs.

    ``acvs_fn(k)`` must return the real autocovariance at integer lags k.
    The embedding circle is padded (with true acvs values, not zeros) by
    successive doublings until its FFT is nonnegative.  Returns ``None`` if
    every padding fails.
    """
    size = 1 << max(3, int(math.ceil(math.log2(2 * max(n - 1, 1)))))
    for _ in range(max_doublings + 1):
        half = size // 2
        r = acvs_fn(np.arange(half + 1))
        circle = np.concatenate([r, r[-2:0:-1]])
        lam = np.fft.fft(circle).real
        lo = lam.min()
        if lo >= -1e-8 * max(lam.max(), 1e-300):
            return np.maximum(lam, 0.0)
        size *= 2
    return None


def _draw_circulant_complex(
    lam: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """One complex draw whose real and imaginary parts are independent
    stationary Gaussian fields, each with the acvs embedded in ``lam``."""
    size = lam.size
    noise = rng.standard_normal((2, size))
    w = np.sqrt(lam) * (noise[0] + 1j * noise[1])
    x = np.fft.fft(w) / math.sqrt(size)
    return x[:n]


def _draw_dense_complex(acvs_fn, n: int, rng: np.random.Generator) -> np.ndarray:
    """Fallback sampler via an eigendecomposition of the dense covariance."""
    if n > 8192:
        raise RuntimeError(
            "circulant embedding failed and the series is too long for the "
            "dense covariance fallback"
        )
    from scipy.linalg import toeplitz

    cov = toeplitz(acvs_fn(np.arange(n)))
    w, v = np.linalg.eigh(cov)
    if w.min() < -1e-8 * max(w.max(), 1e-300):
        raise RuntimeError("covariance matrix is not positive semi-definite")
    root = v * np.sqrt(np.maximum(w, 0.0))
    noise = rng.standard_normal((2, n))
    return root @ (noise[0] + 1j * noise[1])


def _simulate_matern(p: ModelParams, n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Exact stationary background sample: independent real/imaginary parts,
    each carrying half the complex autocovariance."""

    def half_acvs(lags):
        return matern_acvs(p, np.asarray(lags, dtype=float) * dt) / 2.0

    lam = _circulant_eigenvalues(half_acvs, n)
    if lam is not None:
        return _draw_circulant_complex(lam, n, rng)
    return _draw_dense_complex(half_acvs, n, rng)


def _simulate_fbm_values(
    B: float, alpha: float, n: int, dt: float, rng: np.random.Generator
) -> np.ndarray:
    """Complex power-law velocity record via exact synthesis of stationary
    fractional-Gaussian increments (Hurst H = alpha - 1/2), then a cumulative
    sum.  Amplitude is matched so the mid-band spectrum is B^2 |omega|^(-2*alpha).
    """
    H = alpha - 0.5
    # per-component variance rate: 2 * sigma_u^2 * sin(pi H) * Gamma(2H+1) = B^2
    sigma_u2 = B**2 / (2.0 * math.sin(math.pi * H) * _gamma(2.0 * H + 1.0))
    step_var = sigma_u2 * dt ** (2.0 * H)

    def fgn_acvs(lags):
        k = np.abs(np.asarray(lags, dtype=float))
        return 0.5 * step_var * (
            np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H)
        )

    lam = _circulant_eigenvalues(fgn_acvs, n)
    if lam is not None:
        increments = _draw_circulant_complex(lam, n, rng)
    else:
        increments = _draw_dense_complex(fgn_acvs, n, rng)
    return np.cumsum(increments)


def simulate(
    p: ModelParams, n: int, dt: float, seed: int | np.random.Generator | None = None
) -> ComplexSeries:
    """Generate one exact Gaussian velocity record from the model.

    The oscillation component uses the exact discrete OU recursion; the
    stationary background uses circulant embedding of its autocovariance
    (dense covariance square root as fallback); an ``h = 0`` background is
    synthesized as a nonstationary power-law record.  Components are drawn
    independently and summed.  Deterministic for a fixed integer seed.

    Parameters
    ----------
    p : ModelParams
    n : int
        Number of samples (>= 2).
    dt : float
        Sampling interval (> 0), in the time unit of the rate parameters.
    seed : int, Generator, or None
    """
    if n < 2:
        raise ValueError("need at least two samples")
    if dt <= 0:
        raise ValueError("dt must be positive")
    p.validate_for_dt(dt)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    values = np.zeros(n, dtype=complex)
    if p.has_oscillation:
        values += _simulate_ou(p, n, dt, rng)
    if p.has_background:
        if p.background_is_fbm:
            values += _simulate_fbm_values(p.B, p.alpha, n, dt, rng)
        else:
            values += _simulate_matern(p, n, dt, rng)
    return ComplexSeries(values=values, dt=dt)


def simulate_fbm(
    B: float,
    alpha: float,
    n: int,
    dt: float,
    seed: int | np.random.Generator | None = None,
) -> ComplexSeries:
    """Generate a pure power-law (fractional-Brownian) complex velocity record.

    Valid for 1/2 < alpha < 3/2; alpha = 1 gives ordinary Brownian motion.
    The record is nonstationary: its variance grows like t^(2*alpha - 1), and
    its mid-band periodogram follows B^2 |omega|^(-2*alpha).
    """
    if not (0.5 < alpha < 1.5):
        raise ValueError(f"power-law record requires 1/2 < alpha < 3/2, got {alpha}")
    if n < 2:
        raise ValueError("need at least two samples")
    if dt <= 0:
        raise ValueError("dt must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return ComplexSeries(values=_simulate_fbm_values(B, alpha, n, dt, rng), dt=dt)
