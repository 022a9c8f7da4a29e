"""Refocusing compiler for the nearest-neighbour ZZ block of a 4-spin chain.

Inside a free-evolution block of length ``tau`` under the natural NMR
Hamiltonian, spin 3 is flipped by an ideal pi pulse at ``tau1`` and spin 4 at
``tau2``. The timing equations equalise the effective 2-3 and 3-4 couplings
to ``J12`` and fix the overall ZZ angle to ``JT/2``::

    pi * J12 * tau / 2          = JT / 2
    (2 tau1 - tau) * J23         = J12 * tau
    (2 (tau2 - tau1) + tau) J34  = J12 * tau

Chemical-shift phases accumulated during the block are removed by a final
z rotation ``prod_i exp(-i alpha_i sigma_i^z / 2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .molecule import MoleculeSpec, natural_hamiltonian
from .operators import expm_hermitian, kron_all, site_operator

TWO_PI = 2 * math.pi


class InfeasibleTimingError(ValueError):
    """The molecule cannot realise the requested block; ``equation`` names the culprit."""

    def __init__(self, message: str, equation: str = ""):
        super().__init__(message)
        self.equation = equation


@dataclass(frozen=True)
class PulseTiming:
    tau_ms: float
    tau1_ms: float
    tau2_ms: float
    alphas: tuple[float, ...] = ()
    residuals: tuple[float, float, float] = (0.0, 0.0, 0.0)

    @property
    def seconds(self) -> tuple[float, float, float]:
        return self.tau_ms * 1e-3, self.tau1_ms * 1e-3, self.tau2_ms * 1e-3


def nmr_hamiltonian(m: MoleculeSpec) -> np.ndarray:
    """``-sum_i (w_i/2) Z_i + pi sum_{i<j} (J_ij/2) Z_i Z_j`` in rad/s, ``w_i = 2 pi offset_i``."""
    return natural_hamiltonian(m.omegas, m.couplings, "Z")


def timing_residuals(m: MoleculeSpec, jt: float, tau: float, tau1: float, tau2: float):
    j12, j23, j34 = m.j(1, 2), m.j(2, 3), m.j(3, 4)
    return (
        math.pi * j12 * tau / 2 - jt / 2,
        (2 * tau1 - tau) * j23 - j12 * tau,
        (2 * (tau2 - tau1) + tau) * j34 - j12 * tau,
    )


def solve_timing(m: MoleculeSpec, JT: float) -> PulseTiming:
    """Solve the three timing equations; durations reported in ms."""
    if m.n_spins != 4:
        raise ValueError("the refocusing block is defined for a 4-spin chain")
    j12, j23, j34 = m.j(1, 2), m.j(2, 3), m.j(3, 4)
    for name, value in (("J12", j12), ("J23", j23), ("J34", j34)):
        if value <= 0:
            raise InfeasibleTimingError(
                f"required coupling {name} = {value} Hz is not positive", name
            )
    tau = JT / (math.pi * j12)
    tau1 = (j12 * tau / j23 + tau) / 2
    tau2 = tau1 + (j12 * tau / j34 - tau) / 2
    for name, value, eq in (
        ("tau", tau, "pi J12 tau / 2 = JT / 2"),
        ("tau1", tau1, "(2 tau1 - tau) J23 = J12 tau"),
        ("tau2", tau2, "(2 (tau2 - tau1) + tau) J34 = J12 tau"),
    ):
        if value < 0:
            raise InfeasibleTimingError(f"solved {name} = {value * 1e3:.6g} ms is negative", eq)
    res = timing_residuals(m, JT, tau, tau1, tau2)
    t = PulseTiming(tau * 1e3, tau1 * 1e3, tau2 * 1e3, residuals=res)
    return PulseTiming(t.tau_ms, t.tau1_ms, t.tau2_ms, z_corrections(m, t), res)


def net_z_times(t: PulseTiming) -> tuple[float, float, float, float]:
    """Signed time (s) each spin spends unflipped minus flipped during the block."""
    tau, tau1, tau2 = t.seconds
    return tau, tau, 2 * tau1 - tau, 2 * tau2 - tau


def z_corrections(m: MoleculeSpec, t: PulseTiming) -> tuple[float, ...]:
    """Angles ``alpha_i = w_i * net_time_i`` reduced to [0, 2 pi)."""
    return tuple(float(np.mod(w * s, TWO_PI)) for w, s in zip(m.omegas, net_z_times(t)))


def rz_layer(alphas) -> np.ndarray:
    return kron_all(
        np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)]) for a in alphas
    )


def pulse_sequence(h: np.ndarray, n_spins: int, duration: float, flips: list[tuple[float, int]]):
    """Evolve under ``h`` for ``duration`` seconds with ideal pi_x pulses at ``(time, spin)``.

    Returns ``(U, frame)`` where ``frame`` is the product of all applied
    pulses, i.e. the Pauli frame left on the register.
    """
    d = 2**n_spins
    u = np.eye(d, dtype=complex)
    frame = np.eye(d, dtype=complex)
    now = 0.0
    for when, spin in sorted(flips):
        if not 0 <= when <= duration:
            raise ValueError(f"pulse at {when} s lies outside the {duration} s block")
        u = expm_hermitian(h, when - now) @ u
        x = site_operator(n_spins, {spin: "X"})
        u = x @ u
        frame = x @ frame
        now = when
    u = expm_hermitian(h, duration - now) @ u
    return u, frame


def refocused_segment(m: MoleculeSpec, lambdas, duration: float) -> tuple[np.ndarray, np.ndarray]:
    """Z-basis refocusing segment: one pi pulse on spin ``i`` at ``lambda_i * duration``."""
    flips = [(float(l) * duration, i + 1) for i, l in enumerate(lambdas)]
    return pulse_sequence(nmr_hamiltonian(m), m.n_spins, duration, flips)


def compiled_block(m: MoleculeSpec, t: PulseTiming) -> np.ndarray:
    """Simulated ZZ block: free evolution with flips on spins 3 and 4, the closing
    pi pair that undoes their Pauli frame, then the z corrections."""
    tau, tau1, tau2 = t.seconds
    u, frame = pulse_sequence(nmr_hamiltonian(m), 4, tau, [(tau1, 3), (tau2, 4)])
    alphas = t.alphas or z_corrections(m, t)
    return rz_layer(alphas) @ frame.conj().T @ u


def target_block(JT: float) -> np.ndarray:
    """``exp(-i (JT/2) sum_nn Z_i Z_{i+1})`` on 4 spins."""
    zz = sum(site_operator(4, {i: "Z", i + 1: "Z"}) for i in range(1, 4))
    return expm_hermitian(zz, JT / 2)


def process_fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Phase-insensitive overlap ``|Tr(u^dag v)| / dim``."""
    return float(abs(np.trace(u.conj().T @ v)) / u.shape[0])


def residual_z_phase(u: np.ndarray, target: np.ndarray) -> float:
    """Largest deviation (rad) of ``arg(diag(target^dag u))`` from a global phase."""
    ratio = np.diag(target.conj().T @ u)
    ratio = ratio / ratio[0]
    return float(np.max(np.abs(np.angle(ratio))))


@dataclass(frozen=True)
class CompileReport:
    timing: PulseTiming
    fidelity_nn: float
    fidelity_full: float
    residual_z_phase: float


def compile_and_verify(m: MoleculeSpec, JT: float) -> CompileReport:
    """Solve the timing, simulate the block, and compare with the target.

    ``fidelity_nn`` zeroes the long-range couplings (J13, J24, J14) and must be
    1 up to rounding; ``fidelity_full`` keeps the molecule's full coupling
    table and quantifies the error of neglecting them.
    """
    t = solve_timing(m, JT)
    tau, tau1, tau2 = t.seconds
    for name, value in (("tau1", tau1), ("tau2", tau2)):
        if value > tau * (1 + 1e-12):
            raise InfeasibleTimingError(
                f"pulse time {name} = {value * 1e3:.6g} ms exceeds the block length "
                f"{tau * 1e3:.6g} ms",
                "(2 tau1 - tau) J23 = J12 tau" if name == "tau1" else "(2 (tau2 - tau1) + tau) J34 = J12 tau",
            )
    target = target_block(JT)
    u_nn = compiled_block(m.nearest_neighbour_only(), t)
    u_full = compiled_block(m, t)
    return CompileReport(
        timing=t,
        fidelity_nn=process_fidelity(u_nn, target),
        fidelity_full=process_fidelity(u_full, target),
        residual_z_phase=residual_z_phase(u_nn, target),
    )
