"""Analog beamformer architectures and nearest-point projections.

Three feasible sets for the phase-shifter network:
  full    - every (antenna, RF chain) pair has a phase shifter
  partial - each RF chain drives a fixed contiguous block of N_t / N_rf antennas
  dynamic - each RF chain drives a re-selectable subset of antennas, with a
            total budget of L phase shifters split evenly across chains
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FULL = "full"
PARTIAL = "partial"
DYNAMIC = "dynamic"
KINDS = (FULL, PARTIAL, DYNAMIC)


@dataclass(frozen=True)
class ArchitectureSpec:
    kind: str
    n_tx_antennas: int
    n_tx_rf: int
    n_phase_shifters: int | None = None   # dynamic only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown architecture kind {self.kind!r}")
        if self.n_tx_antennas < 1 or self.n_tx_rf < 1:
            raise ValueError("antenna and RF-chain counts must be >= 1")
        if self.n_tx_rf > self.n_tx_antennas:
            raise ValueError("n_tx_rf must not exceed n_tx_antennas")
        if self.kind == PARTIAL and self.n_tx_antennas % self.n_tx_rf != 0:
            raise ValueError("partial connection requires n_tx_rf | n_tx_antennas")
        if self.kind == DYNAMIC:
            L = self.n_phase_shifters
            if L is None:
                raise ValueError("dynamic connection requires n_phase_shifters")
            if L < self.n_tx_rf:
                raise ValueError("need at least one phase shifter per RF chain")
            if L % self.n_tx_rf != 0:
                raise ValueError("phase-shifter budget must split evenly across chains")
            if L // self.n_tx_rf > self.n_tx_antennas:
                raise ValueError("per-chain budget exceeds antenna count")

    @property
    def block_size(self) -> int:
        return self.n_tx_antennas // self.n_tx_rf

    @property
    def budget_per_chain(self) -> int:
        if self.kind == FULL:
            return self.n_tx_antennas
        if self.kind == PARTIAL:
            return self.block_size
        return self.n_phase_shifters // self.n_tx_rf

    def phase_shifter_count(self) -> int:
        """Hardware cost driver: number of phase shifters in the network."""
        if self.kind == FULL:
            return self.n_tx_antennas * self.n_tx_rf
        if self.kind == PARTIAL:
            return self.n_tx_antennas
        return int(self.n_phase_shifters)

    def static_support(self) -> np.ndarray | None:
        """Boolean (N_t, N_rf) support mask for full/partial; None for dynamic."""
        nt, nrf = self.n_tx_antennas, self.n_tx_rf
        if self.kind == FULL:
            return np.ones((nt, nrf), dtype=bool)
        if self.kind == PARTIAL:
            mask = np.zeros((nt, nrf), dtype=bool)
            b = self.block_size
            for i in range(nrf):
                mask[i * b:(i + 1) * b, i] = True
            return mask
        return None


@dataclass
class AnalogPrecoder:
    """Phase-shifter matrix F_rf (N_t x N_rf) together with its architecture."""

    matrix: np.ndarray
    spec: ArchitectureSpec

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        expect = (self.spec.n_tx_antennas, self.spec.n_tx_rf)
        if self.matrix.shape != expect:
            raise ValueError(f"analog matrix shape {self.matrix.shape}, expected {expect}")

    @property
    def support(self) -> np.ndarray:
        return np.abs(self.matrix) > 0

    def switch_map(self) -> np.ndarray:
        """Binary (N_t, L) switch matrix: column per phase shifter, one 1 each."""
        cols = []
        nt = self.spec.n_tx_antennas
        for i in range(self.spec.n_tx_rf):
            for n in np.flatnonzero(self.support[:, i]):
                col = np.zeros(nt, dtype=int)
                col[n] = 1
                cols.append(col)
        return np.array(cols).T if cols else np.zeros((nt, 0), dtype=int)


def _phase_project(x: np.ndarray) -> np.ndarray:
    # angle(0) := 0, so exact zeros project to 1.
    return np.exp(1j * np.angle(x))


def _dynamic_support(x: np.ndarray, spec: ArchitectureSpec) -> np.ndarray:
    """Greedy per-chain support: the budget_per_chain largest-|x| antennas."""
    mask = np.zeros(x.shape, dtype=bool)
    b = spec.budget_per_chain
    for i in range(x.shape[1]):
        # stable sort so ties resolve to the lowest antenna index
        order = np.argsort(-np.abs(x[:, i]), kind="stable")
        mask[order[:b], i] = True
    return mask


def project_analog(x: np.ndarray, spec: ArchitectureSpec) -> AnalogPrecoder:
    """Nearest feasible analog precoder to x.

    full/partial: entrywise phase projection restricted to the allowed
    support (the Euclidean-nearest feasible point). dynamic: the support is
    re-selected greedily per RF chain by |x| before phase projection.
    """
    x = np.asarray(x, dtype=complex)
    expect = (spec.n_tx_antennas, spec.n_tx_rf)
    if x.shape != expect:
        raise ValueError(f"input shape {x.shape}, expected {expect}")
    mask = spec.static_support()
    if mask is None:
        mask = _dynamic_support(x, spec)
    f = np.where(mask, _phase_project(x), 0.0)
    return AnalogPrecoder(matrix=f, spec=spec)


def feasibility_check(precoder: AnalogPrecoder, tol: float = 1e-9):
    """Check the architecture invariants; returns (ok, violation messages)."""
    f = precoder.matrix
    spec = precoder.spec
    violations = []
    static = spec.static_support()
    if static is not None:
        off = np.abs(f[~static])
        bad = np.flatnonzero(off > tol)
        if bad.size:
            r, c = (int(v) for v in np.argwhere(~static)[bad[0]])
            violations.append(
                f"nonzero entry outside allowed support at ({r}, {c})")
        on_support = static
    else:
        on_support = np.abs(f) > tol
        counts = on_support.sum(axis=0)
        b = spec.budget_per_chain
        for i, c in enumerate(counts):
            if c != b:
                violations.append(
                    f"chain {i} uses {c} phase shifters, budget is {b}")
    mod = np.abs(f[on_support])
    bad = np.flatnonzero(np.abs(mod - 1.0) > tol)
    if bad.size:
        r, c = (int(v) for v in np.argwhere(on_support)[bad[0]])
        violations.append(
            f"entry ({r}, {c}) has modulus {mod[bad[0]]:.6g}, expected 1")
    return len(violations) == 0, violations


def random_feasible(spec: ArchitectureSpec, seed: int) -> AnalogPrecoder:
    """Uniform random phases on the allowed support, deterministic given seed."""
    rng = np.random.default_rng(int(seed))
    nt, nrf = spec.n_tx_antennas, spec.n_tx_rf
    mask = spec.static_support()
    if mask is None:
        mask = np.zeros((nt, nrf), dtype=bool)
        b = spec.budget_per_chain
        for i in range(nrf):
            mask[rng.permutation(nt)[:b], i] = True
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(nt, nrf))
    f = np.where(mask, np.exp(1j * phases), 0.0)
    return AnalogPrecoder(matrix=f, spec=spec)
