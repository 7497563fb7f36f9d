"""Rendered impedance, band-limited passivity and W_phi deterioration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridTooSparse
from .lti import FrequencyResponse, RationalTransferFunction, frequency_response, is_hurwitz

TWO_PI = 2.0 * np.pi
F_LOW_HZ = 0.01  # lower edge of the passivity band


def passivity_grid(f_max: float = 5.0, f_min: float = F_LOW_HZ, points_per_decade: int = 40) -> np.ndarray:
    """Log-spaced grid (rad/s) spanning ``[2 pi f_min, 2 pi f_max]`` inclusive."""
    lo, hi = np.log10(TWO_PI * f_min), np.log10(TWO_PI * f_max)
    n = max(2, int(np.ceil((hi - lo) * points_per_decade)) + 1)
    return np.logspace(lo, hi, n)


def actual_impedance(cl, grid) -> FrequencyResponse:
    """``Z_a(jw) = -T(phi_L -> tau_L)(jw) / (jw)`` of a closed loop."""
    fr = frequency_response(cl.system.subsystem(["tau_L"], ["phi_L"]), grid)
    w = fr.frequencies
    return FrequencyResponse(w, -fr.values / (1j * w)[:, None, None])


@dataclass
class PassivityReport:
    band: tuple[float, float]
    grid: np.ndarray
    phase_deg: np.ndarray
    min_phase_margin_deg: float
    passive_on_band: bool
    tolerance_deg: float = 0.5
    hurwitz: bool | None = None
    spectral_abscissa: float | None = None

    @property
    def passed(self) -> bool:
        return self.passive_on_band and self.hurwitz is not False

    @property
    def max_abs_phase_deg(self) -> float:
        return float(np.max(np.abs(self.phase_deg)))

    def summary(self) -> str:
        s = (
            f"band [{self.band[0]:.4g}, {self.band[1]:.4g}] rad/s, "
            f"phase in [{self.phase_deg.min():.3f}, {self.phase_deg.max():.3f}] deg, "
            f"min margin {self.min_phase_margin_deg:.3f} deg, passive_on_band = {self.passive_on_band}"
        )
        if self.hurwitz is not None:
            s += f", hurwitz = {self.hurwitz} (abscissa {self.spectral_abscissa:.4g})"
        return s


def _principal_unwrapped(phase_rad: np.ndarray) -> np.ndarray:
    """Unwrap along the grid, then shift by whole turns so the first point
    lies in (-180, 180] degrees."""
    p = np.unwrap(phase_rad)
    turns = np.round(p[0] / TWO_PI)
    return np.degrees(p - turns * TWO_PI)


def check_relaxed_passivity(
    Z: FrequencyResponse,
    f_max: float = 5.0,
    *,
    f_min: float = F_LOW_HZ,
    tolerance_deg: float = 0.5,
    min_points_per_decade: float = 20.0,
    closed_loop=None,
) -> PassivityReport:
    """Phase of a scalar impedance inside ``[-90, 90]`` degrees on the band
    ``[2 pi f_min, 2 pi f_max]`` rad/s.

    ``closed_loop`` (optional) adds the Hurwitz half of the condition.
    """
    w = Z.frequencies
    lo, hi = TWO_PI * f_min, TWO_PI * f_max
    slack = 1e-9
    if w[0] > lo * (1 + slack) or w[-1] < hi * (1 - slack):
        raise GridTooSparse(f"grid [{w[0]:.4g}, {w[-1]:.4g}] rad/s does not cover [{lo:.4g}, {hi:.4g}]")
    i0 = max(int(np.searchsorted(w, lo * (1 - slack))) - 1, 0)
    i1 = min(int(np.searchsorted(w, hi * (1 + slack))) + 1, len(w))
    wb = w[i0:i1]
    gaps = np.diff(np.log10(wb))
    if gaps.size == 0 or gaps.max() > 1.0 / min_points_per_decade + 1e-9:
        raise GridTooSparse(
            f"grid spacing {gaps.max() if gaps.size else np.inf:.4g} decades exceeds "
            f"1/{min_points_per_decade:g} on the passivity band"
        )
    phase = _principal_unwrapped(np.angle(Z.entry(0, 0)))
    inband = (w >= lo * (1 - slack)) & (w <= hi * (1 + slack))
    ph = phase[inband]
    margin = float(np.min(90.0 - np.abs(ph)))
    rep = PassivityReport((lo, hi), w[inband], ph, margin, margin >= -tolerance_deg, tolerance_deg)
    if closed_loop is not None:
        ok, a = is_hurwitz(closed_loop.system)
        rep.hurwitz, rep.spectral_abscissa = ok, a
    return rep


@dataclass
class ImpedancePair:
    Z_desired: FrequencyResponse
    Z_actual: FrequencyResponse

    def __post_init__(self):
        if not np.array_equal(self.Z_desired.frequencies, self.Z_actual.frequencies):
            raise ValueError("impedance responses must share one grid")

    @property
    def magnitude_gap_db(self) -> np.ndarray:
        return self.Z_actual.magnitude_db() - self.Z_desired.magnitude_db()

    @property
    def phase_gap_deg(self) -> np.ndarray:
        return self.Z_actual.phase_deg() - self.Z_desired.phase_deg()


def impedance_pair(Z_d: RationalTransferFunction, cl, grid) -> ImpedancePair:
    return ImpedancePair(FrequencyResponse.from_transfer_function(Z_d, grid), actual_impedance(cl, grid))


def wphi_deterioration(
    Z_d: RationalTransferFunction,
    W_phi: RationalTransferFunction,
    f_max: float = 5.0,
    *,
    f_min: float = F_LOW_HZ,
    points_per_decade: int = 40,
) -> tuple[float, float]:
    """Largest magnitude (dB) and phase (deg) gap between ``Z_d`` and
    ``W_phi Z_d`` over the band."""
    grid = passivity_grid(f_max, f_min, points_per_decade)
    z1 = FrequencyResponse.from_transfer_function(Z_d, grid)
    z2 = FrequencyResponse.from_transfer_function(W_phi * Z_d, grid)
    mag = np.abs(z2.magnitude_db() - z1.magnitude_db())
    ph = np.abs(_principal_unwrapped(np.angle(z2.entry())) - _principal_unwrapped(np.angle(z1.entry())))
    return float(mag.max()), float(ph.max())


def bode_columns(fr: FrequencyResponse, i: int = 0, j: int = 0) -> dict[str, np.ndarray]:
    """Plot-ready columns ``omega_rad_s, mag_db, phase_deg`` (phase unwrapped)."""
    return {
        "omega_rad_s": fr.frequencies,
        "mag_db": fr.magnitude_db(i, j),
        "phase_deg": _principal_unwrapped(np.angle(fr.entry(i, j))),
    }
