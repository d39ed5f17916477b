"""Closed-form field kernels: spectra, beam profiles, phase mismatch, the
bilinear pair-creation kernel and its thin-crystal contractions.

Wave vectors are split into a transverse part ``K`` (arrays of shape
(..., 2), units 1/m) and an angular frequency ``omega`` (rad/s).  All
functions broadcast over leading dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig, DerivedQuantities, seed_shift


def gaussian_spectrum(offset, bandwidth):
    """Normalized real spectral amplitude h(offset, bandwidth).

    Satisfies the power normalization: the integral of h^2 over all
    frequencies equals 2*pi, so h^2 tends to 2*pi*delta(offset) in the
    monochromatic limit.
    """
    if np.any(np.asarray(bandwidth) <= 0):
        raise ValueError("bandwidth must be positive")
    offset = np.asarray(offset, dtype=float)
    return np.sqrt(2.0 * math.sqrt(math.pi) / bandwidth) * np.exp(
        -(offset**2) / (2.0 * np.asarray(bandwidth, dtype=float) ** 2)
    )


def _norm_sq(K):
    K = np.asarray(K, dtype=float)
    return np.sum(K * K, axis=-1)


@dataclass(frozen=True)
class ContractedKernel:
    """One closed-form term of the thin-crystal kernel expansion.

    ``order`` counts contracted pair kernels; odd orders couple modes whose
    transverse wave vectors sum to zero, even orders couple equal ones.
    """

    order: int
    parity: str                 # 'odd' or 'even'
    prefactor: complex          # includes the -i for odd orders
    gauss_width: float          # w_p / sqrt(order): Gaussian scale in K [m]
    bandwidth: float            # sqrt(order) * pump bandwidth [rad/s]
    omega_pump: float
    peak_magnitude: float       # |value| on the kernel peak at degeneracy

    def __call__(self, K1, K2, omega1, omega2):
        m = self.order
        omega1 = np.asarray(omega1, dtype=float)
        omega2 = np.asarray(omega2, dtype=float)
        if self.parity == "odd":
            gauss = np.exp(-0.25 * self.gauss_width**2 * _norm_sq(np.asarray(K1) + np.asarray(K2)))
            spectral = gaussian_spectrum(self.omega_pump - omega1 - omega2, self.bandwidth)
            powers = (omega1 * omega2) ** (0.5 * m)
        else:
            gauss = np.exp(-0.25 * self.gauss_width**2 * _norm_sq(np.asarray(K1) - np.asarray(K2)))
            spectral = gaussian_spectrum(omega1 - omega2, self.bandwidth)
            powers = (omega1 * (self.omega_pump - omega1)) ** (0.5 * m)
        return self.prefactor * powers * gauss * spectral


class FieldKernels:
    """Evaluator bundle for one experiment configuration.

    All methods are pure; instances are immutable and safe to share.
    """

    def __init__(self, cfg: ExperimentConfig, derived: DerivedQuantities | None = None):
        self.cfg = cfg
        self.q = derived if derived is not None else cfg.derive()
        # |Omega_0| = M0*M1/L; the pump phase enters as exp(-i*phase).
        self._pair_amplitude = (
            self.q.kernel_prefactor * self.q.order_gain / cfg.crystal.length
        )

    # -- beam profiles -------------------------------------------------

    def pump_profile(self, K, omega):
        """Pump parameter function in the Fourier domain (complex)."""
        p = self.cfg.pump
        zeta0 = self.q.pump_amplitude * np.exp(1j * p.phase)
        return (
            math.sqrt(2.0 * math.pi)
            * zeta0
            * p.waist
            * gaussian_spectrum(np.asarray(omega) - p.omega, p.bandwidth)
            * np.exp(-0.25 * p.waist**2 * _norm_sq(K))
        )

    def seed_profile(self, K, omega):
        """Seed parameter function, shifted in the Fourier domain."""
        s = self.cfg.seed
        xi0 = s.amplitude * np.exp(1j * s.phase)
        shift = np.asarray(seed_shift(self.cfg, self.q))
        dK = np.asarray(K, dtype=float) - shift
        return (
            math.sqrt(2.0 * math.pi)
            * xi0
            * s.waist
            * gaussian_spectrum(np.asarray(omega) - self.q.omega_deg, s.bandwidth)
            * np.exp(-0.25 * s.waist**2 * _norm_sq(dK))
        )

    # -- dispersion helpers --------------------------------------------

    def wavenumber(self, omega):
        """k(omega) inside the crystal [1/m]."""
        return np.asarray(omega) * self.cfg.crystal.refractive_index / 299792458.0

    def kz(self, omega):
        """Beam-axis z-component k_z(omega) [1/m]."""
        return self.wavenumber(omega) * math.cos(self.cfg.crystal.pdc_angle)

    def chi(self, omega):
        """k^2/k_z - k_z at the given frequency [1/m]."""
        return (
            self.wavenumber(omega)
            * math.sin(self.cfg.crystal.pdc_angle) ** 2
            / math.cos(self.cfg.crystal.pdc_angle)
        )

    def phase_mismatch(self, K1, K2, omega1, omega2):
        """Longitudinal wave-vector mismatch for noncollinear emission [1/m].

        Symmetric under simultaneous swap of (K1, omega1) and (K2, omega2);
        vanishes on-axis at degeneracy for collinear emission.
        """
        kz1 = np.asarray(self.kz(omega1))
        kz2 = np.asarray(self.kz(omega2))
        K1 = np.asarray(K1, dtype=float)
        K2 = np.asarray(K2, dtype=float)
        rel = K1 / kz1[..., None] - K2 / kz2[..., None]
        quad = 0.5 * (kz1 * kz2 / (kz1 + kz2)) * np.sum(rel * rel, axis=-1)
        return quad - 0.5 * self.chi(omega1) - 0.5 * self.chi(omega2)

    # -- bilinear kernel -----------------------------------------------

    def bilinear_kernel(self, K1, K2, omega1, omega2, z=0.0):
        """Pair-creation kernel between two down-converted modes at depth z."""
        p = self.cfg.pump
        omega1 = np.asarray(omega1, dtype=float)
        omega2 = np.asarray(omega2, dtype=float)
        amp = self._pair_amplitude * np.exp(-1j * p.phase)
        envelope = np.exp(-0.25 * p.waist**2 * _norm_sq(np.asarray(K1) + np.asarray(K2)))
        spectral = gaussian_spectrum(omega1 + omega2 - p.omega, p.bandwidth)
        phase = np.exp(1j * self.phase_mismatch(K1, K2, omega1, omega2) * z)
        return -1j * amp * np.sqrt(omega1 * omega2) * spectral * envelope * phase

    def bilinear_magnitude(self, K1, K2, omega1, omega2):
        """|bilinear_kernel|; z-independent and elementwise positive."""
        p = self.cfg.pump
        omega1 = np.asarray(omega1, dtype=float)
        omega2 = np.asarray(omega2, dtype=float)
        return (
            self._pair_amplitude
            * np.sqrt(omega1 * omega2)
            * gaussian_spectrum(omega1 + omega2 - p.omega, p.bandwidth)
            * np.exp(-0.25 * p.waist**2 * _norm_sq(np.asarray(K1) + np.asarray(K2)))
        )

    # -- thin-crystal contracted kernels --------------------------------

    def contracted_kernel(self, order: int, parity: str | None = None) -> ContractedKernel:
        """Closed form for `order` contracted pair kernels (thin-crystal limit)."""
        if order < 1:
            raise ValueError("order must be >= 1")
        expected = "odd" if order % 2 else "even"
        if parity is not None and parity != expected:
            raise ValueError(f"order {order} is {expected}, not {parity}")
        q = self.q
        m = order
        scale = q.kernel_prefactor * q.order_gain**m / (m**1.25 * math.factorial(m))
        prefactor = -1j * scale if m % 2 else scale
        bandwidth = math.sqrt(m) * self.cfg.pump.bandwidth
        peak = scale * q.omega_deg**m * gaussian_spectrum(0.0, bandwidth)
        return ContractedKernel(
            order=m,
            parity=expected,
            prefactor=prefactor,
            gauss_width=self.cfg.pump.waist / math.sqrt(m),
            bandwidth=bandwidth,
            omega_pump=self.cfg.pump.omega,
            peak_magnitude=float(peak),
        )

    def thin_crystal_uv(self, K1, K2, omega1, omega2, n_max: int = 32, tol: float = 1e-10):
        """Bogoliubov kernel sums in the thin-crystal limit.

        Returns ``(u_smooth, v, info)`` where the full forward kernel is the
        identity plus ``u_smooth``.  The sums stop once the next term's
        on-peak magnitude falls below ``tol`` times the running peak sum,
        capped at ``n_max`` terms per series; ``info`` reports the order and
        on-peak magnitude of the last included terms.
        """
        shape = np.broadcast_shapes(
            _norm_sq(K1).shape, _norm_sq(K2).shape, np.shape(omega1), np.shape(omega2)
        )
        u = np.zeros(shape, dtype=complex)
        v = np.zeros(shape, dtype=complex)
        phase = np.exp(-1j * self.cfg.pump.phase)
        info = {"u_order": 0, "v_order": 0, "u_last": 0.0, "v_last": 0.0}

        running_peak = 0.0
        for n in range(1, n_max + 1):
            term = self.contracted_kernel(2 * n)
            contrib_peak = 4.0**-n * term.peak_magnitude
            if n > 1 and contrib_peak < tol * max(running_peak, 1.0e-300):
                break
            u = u + 4.0**-n * term(K1, K2, omega1, omega2)
            running_peak += contrib_peak
            info["u_order"] = 2 * n
            info["u_last"] = contrib_peak

        running_peak = 0.0
        for n in range(1, n_max + 1):
            term = self.contracted_kernel(2 * n - 1)
            contrib_peak = 2.0 * 4.0**-n * term.peak_magnitude
            if n > 1 and contrib_peak < tol * max(running_peak, 1.0e-300):
                break
            v = v + 2.0 * 4.0**-n * term(K1, K2, omega1, omega2)
            running_peak += contrib_peak
            info["v_order"] = 2 * n - 1
            info["v_last"] = contrib_peak

        return u, phase * v, info
