"""Transient simulation of flat Josephson circuits.

Unknowns are node phases (node flux in units of Phi0/2pi, ground fixed at 0).
Each element contributes a current expressed in node phases:

    junction   Ic(T) sin(dphi) + P/R dphi' + P C dphi''
    inductor   P/L dphi
    resistor   P/R dphi'
    capacitor  P C dphi''

with P = Phi0/2pi. Time is stepped with the trapezoidal rule applied to the
first and second phase derivatives, and each step is closed by Newton
iteration on the junction nonlinearity. Internally time is in ps, current in
uA and voltage in mV (P = 0.3291 mV*ps); derived units are nH, kOhm and fF.
The public API speaks SI.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
import math

import numpy as np
from numba import njit

from ..constants import PHI0
from ..netlist.flatten import FlatCircuit, FlatJunction, FlatSource, FlatTwoTerminal
from ..netlist.grammar import Waveform
from ..physics import ic_at, johnson_sigma
from .. import rng as _rng

P_INT = PHI0 / (2 * math.pi) / 1e-15  # mV*ps
_T, _I, _V, _L, _R, _C = 1e-12, 1e-6, 1e-3, 1e-9, 1e3, 1e-15

NOISE_CHUNK = 2048


class SolverError(RuntimeError):
    def __init__(self, message: str, time: float | None = None, node: str | None = None):
        self.time = time
        self.node = node
        super().__init__(message)


class TopologyError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    t_stop: float
    dt: float = 0.1e-12
    newton_tol: float = 1e-9
    max_newton_iters: int = 50
    noise_enabled: bool = False
    seed: int = 0
    temperature: float = 4.2
    bias_scale: float = 1.0
    ersfq: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_stop > self.dt:
            raise ValueError("t_stop must exceed dt")
        if not self.bias_scale > 0:
            raise ValueError("bias_scale must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class TransientResult:
    time: np.ndarray  # s
    phases: np.ndarray  # (steps+1, n_junctions) rad
    voltages: np.ndarray  # (steps+1, n_nodes) V, column 0 is ground
    slips: np.ndarray  # (steps+1, n_junctions) cumulative 2pi slips
    junction_volts: np.ndarray  # (steps+1, n_junctions) V
    junction_names: tuple[str, ...]
    node_names: tuple[str, ...]
    config: SolverConfig
    port_junctions: dict[str, int] = field(default_factory=dict)

    def junction(self, ref: int | str) -> int:
        if isinstance(ref, (int, np.integer)):
            return int(ref)
        try:
            return self.junction_names.index(ref.lower())
        except ValueError:
            raise KeyError(f"no junction {ref!r}") from None

    def junction_voltage(self, ref: int | str) -> np.ndarray:
        """Voltage across a junction (V), from its phase derivative."""
        return self.junction_volts[:, self.junction(ref)]

    @property
    def final_slips(self) -> np.ndarray:
        return self.slips[-1]

    def config_echo(self) -> dict:
        return asdict(self.config)


def count_slips(phase: np.ndarray) -> np.ndarray:
    """Cumulative count of new upward crossings of pi (mod 2pi)."""
    level = np.floor((phase - math.pi) / (2 * math.pi))
    return (np.maximum.accumulate(level, axis=0) - level[0]).astype(np.int64)


def _ersfq_transform(fc: FlatCircuit, beta: float, fj_ratio: float = 1.4, lb: float = 600e-12) -> tuple[FlatCircuit, list]:
    """Replace each bias source by a feeding-JJ + bias-inductor branch off a shared rail.

    The rail is driven by one current source equal to the scaled total bias;
    a rail resistor only carries current once feeding junctions switch.
    """
    from ..physics import JunctionParams

    nodes = list(fc.nodes)
    junctions = list(fc.junctions)
    inductors = list(fc.inductors)
    resistors = list(fc.resistors)
    sources = [s for s in fc.sources if not s.is_bias]
    rail = len(nodes)
    nodes.append("ersfq.rail")
    total = 0.0
    bias = [s for s in fc.sources if s.is_bias]
    ref = max(abs(s.waveform.dc_value) for s in bias) if bias else 1.0
    for s in bias:
        ib = s.waveform.dc_value
        total += abs(ib)
        target = s.b if ib >= 0 else s.a
        mid = len(nodes)
        nodes.append(f"ersfq.{s.name}.mid")
        template = fc.junctions[0].params if fc.junctions else None
        jp = JunctionParams(
            ic_ref=fj_ratio * abs(ib),
            rn=template.rn * template.ic_ref / (fj_ratio * abs(ib)),
            r_shunt=template.r_shunt * template.ic_ref / (fj_ratio * abs(ib)),
            cap=template.cap * fj_ratio * abs(ib) / template.ic_ref,
            material=template.material,
        )
        junctions.append(FlatJunction(f"ersfq.{s.name}.fj", rail, mid, jp, "ersfq_fj", 1.0))
        inductors.append(FlatTwoTerminal(f"ersfq.{s.name}.lb", mid, target, lb * ref / abs(ib)))
    resistors.append(FlatTwoTerminal("ersfq.rrail", rail, 0, 50.0))
    sources.append(FlatSource("ersfq.ib_rail", 0, rail, Waveform("dc", (total * beta,)), False))
    out = replace(
        fc,
        nodes=tuple(nodes),
        junctions=tuple(junctions),
        inductors=tuple(inductors),
        resistors=tuple(resistors),
        sources=tuple(sources),
    )
    return out, bias


class _System:
    def __init__(self, fc: FlatCircuit, cfg: SolverConfig, ic_scale_override=None):
        if cfg.ersfq:
            fc, _ = _ersfq_transform(fc, cfg.bias_scale)
            self.beta_sources = 1.0
        else:
            self.beta_sources = cfg.bias_scale
        self.fc = fc
        self.cfg = cfg
        n = fc.n_nodes
        self.n = n - 1
        self.h = cfg.dt / _T
        K = np.zeros((n, n))
        G = np.zeros((n, n))
        M = np.zeros((n, n))

        def stamp(mat, a, b, v):
            mat[a, a] += v
            mat[b, b] += v
            mat[a, b] -= v
            mat[b, a] -= v

        for e in fc.inductors:
            stamp(K, e.a, e.b, P_INT / (e.value / _L))
        for e in fc.resistors:
            stamp(G, e.a, e.b, P_INT / (e.value / _R))
        for e in fc.capacitors:
            stamp(M, e.a, e.b, P_INT * e.value / _C)
        for j in fc.junctions:
            stamp(G, j.a, j.b, P_INT / (j.params.r_shunt / _R))
            stamp(M, j.a, j.b, P_INT * j.params.cap / _C)
        self.K, self.G, self.M = (np.ascontiguousarray(m[1:, 1:]) for m in (K, G, M))
        nj = len(fc.junctions)
        D = np.zeros((nj, n))
        for k, j in enumerate(fc.junctions):
            D[k, j.a] += 1.0
            D[k, j.b] -= 1.0
        self.D = D[:, 1:]
        self.DT = self.D.T.copy()
        self.ic = np.array([ic_at(cfg.temperature, j.params) / _I for j in fc.junctions])
        # noise resistors: junction shunts first, then explicit resistors
        res = [(j.a, j.b, j.params.r_shunt) for j in fc.junctions] + [(r.a, r.b, r.value) for r in fc.resistors]
        self.noise_nodes = res
        self.sigma = np.array([johnson_sigma(r, cfg.temperature, cfg.dt) / _I for _, _, r in res])
        Dn = np.zeros((len(res), n))
        for k, (a, b, _) in enumerate(res):
            Dn[k, a] += 1.0
            Dn[k, b] -= 1.0
        self.Dnoise_T = Dn[:, 1:].T.copy()
        self.src = fc.sources
        Ds = np.zeros((len(fc.sources), n))
        for k, s in enumerate(fc.sources):
            Ds[k, s.b] += 1.0
            Ds[k, s.a] -= 1.0
        self.Dsrc_T = Ds[:, 1:].T.copy()
        self.src_scale = np.array([self.beta_sources if s.is_bias else 1.0 for s in fc.sources])

    def source_table(self, steps: int) -> np.ndarray:
        """Scaled source currents (uA) for steps 0..steps, one column per source."""
        t = np.arange(steps + 1) * self.cfg.dt
        if not self.src:
            return np.zeros((steps + 1, 0))
        cols = [s.waveform.sample(t) / _I * k for s, k in zip(self.src, self.src_scale)]
        return np.stack(cols, axis=1)

    def injection(self, t_int: float) -> np.ndarray:
        if not self.src:
            return np.zeros(self.n)
        t = t_int * _T
        vals = np.array([s.waveform(t) for s in self.src]) / _I * self.src_scale
        return self.Dsrc_T @ vals

    def newton(self, A, rhs, x, t_int, tol, max_iter, gmin=0.0):
        D, DT, ic = self.D, self.DT, self.ic
        for _ in range(max_iter):
            phi = D @ x
            F = A @ x + DT @ (ic * np.sin(phi)) - rhs
            J = A + DT @ ((ic * np.cos(phi))[:, None] * D)
            if gmin:
                J = J + gmin * np.eye(self.n)
                F = F + gmin * x
            try:
                dx = np.linalg.solve(J, -F)
            except np.linalg.LinAlgError:
                raise TopologyError(f"singular circuit matrix at t={t_int * _T:.4g} s", t_int * _T) from None
            x = x + dx
            if np.max(np.abs(dx), initial=0.0) < tol:
                return x
        worst = int(np.argmax(np.abs(dx)))
        raise SolverError(
            f"Newton did not converge at t={t_int * _T:.4g} s (worst node {self.fc.nodes[worst + 1]!r})",
            t_int * _T,
            self.fc.nodes[worst + 1],
        )

    def dc_point(self) -> np.ndarray:
        x = np.zeros(self.n)
        target = self.injection(0.0)
        for lam in np.linspace(0.1, 1.0, 10):
            try:
                x = self.newton(self.K, lam * target, x, 0.0, 1e-10, 200, gmin=1e-9)
            except SolverError:
                # no static state at this bias (supercritical); start from the last one found
                break
        return x


@njit(cache=True)
def _integrate_block(x, v, a, A, M, G, D, DT, ic, inj, h, tol, max_iter, phases, volts, jv, offset):
    """Advance ``inj.shape[0]`` steps in place. Returns (-1, -1) or the failing (step, node)."""
    n = x.shape[0]
    c_mx, c_mv, c_gx = 4.0 / h**2, 4.0 / h, 2.0 / h
    for s in range(inj.shape[0]):
        rhs = inj[s] + M @ (c_mx * x + c_mv * v + a) + G @ (c_gx * x + v)
        y = x + h * v
        dx = np.zeros(n)
        ok = False
        for _ in range(max_iter):
            phi = D @ y
            F = A @ y + DT @ (ic * np.sin(phi)) - rhs
            J = A + DT @ ((ic * np.cos(phi)).reshape(-1, 1) * D)
            dx = np.linalg.solve(J, -F)
            y = y + dx
            if np.max(np.abs(dx)) < tol:
                ok = True
                break
        if not ok:
            return offset + s, int(np.argmax(np.abs(dx)))
        v_new = c_gx * (y - x) - v
        a = c_gx * (v_new - v) - a
        x[:] = y
        v[:] = v_new
        k = offset + s + 1
        phases[k] = D @ x
        volts[k, 1:] = v
        jv[k] = D @ v
    return -1, -1


def _check_grounded(fc: FlatCircuit) -> None:
    """Every node needs an element path to ground, or the matrices are singular."""
    parent = list(range(fc.n_nodes))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for group in (fc.junctions, fc.inductors, fc.resistors, fc.capacitors):
        for e in group:
            parent[find(e.a)] = find(e.b)
    floating = [fc.nodes[i] for i in range(1, fc.n_nodes) if find(i) != find(0)]
    if floating:
        raise TopologyError(f"no path to ground from node(s) {', '.join(map(repr, floating[:5]))}", None, floating[0])


def transient(fc: FlatCircuit, cfg: SolverConfig) -> TransientResult:
    """Integrate ``fc`` from its DC operating point to ``cfg.t_stop``."""
    _check_grounded(fc)
    sys_ = _System(fc, cfg)
    n, h = sys_.n, sys_.h
    steps = int(round(cfg.t_stop / cfg.dt))
    nj = len(sys_.fc.junctions)
    x = sys_.dc_point() if n else np.zeros(0)
    v = np.zeros(n)
    a = np.zeros(n)
    A = (4 / h**2) * sys_.M + (2 / h) * sys_.G + sys_.K
    phases = np.zeros((steps + 1, nj))
    volts = np.zeros((steps + 1, n + 1))
    jv = np.zeros((steps + 1, nj))
    phases[0] = sys_.D @ x
    noise_on = cfg.noise_enabled and cfg.temperature > 0 and len(sys_.sigma) > 0
    if noise_on:
        gens = [_rng.stream(cfg.seed, k) for k in range(len(sys_.sigma))]
    table = sys_.source_table(steps)
    if n:
        D = np.ascontiguousarray(sys_.D)
        DT = np.ascontiguousarray(sys_.DT)
        for start in range(0, steps, NOISE_CHUNK):
            stop = min(start + NOISE_CHUNK, steps)
            inj = table[start + 1 : stop + 1] @ sys_.Dsrc_T.T
            if noise_on:
                chunk = np.stack([g.standard_normal(NOISE_CHUNK) for g in gens])[:, : stop - start]
                inj = inj + (sys_.sigma[:, None] * chunk).T @ sys_.Dnoise_T.T
            try:
                step, node = _integrate_block(
                    x, v, a, A, sys_.M, sys_.G, D, DT, sys_.ic, np.ascontiguousarray(inj), h,
                    cfg.newton_tol, cfg.max_newton_iters, phases, volts, jv, start,
                )
            except np.linalg.LinAlgError:
                raise TopologyError(f"singular circuit matrix after t={start * cfg.dt:.4g} s", start * cfg.dt) from None
            if step >= 0:
                t = (step + 1) * cfg.dt
                name = sys_.fc.nodes[node + 1]
                raise SolverError(f"Newton did not converge at t={t:.4g} s (worst node {name!r})", t, name)
    volts *= P_INT * _V
    jv *= P_INT * _V
    time = np.arange(steps + 1) * cfg.dt
    return TransientResult(
        time=time,
        phases=phases,
        voltages=volts,
        slips=count_slips(phases),
        junction_volts=jv,
        junction_names=tuple(j.name for j in sys_.fc.junctions),
        node_names=sys_.fc.nodes,
        config=cfg,
        port_junctions={p: ref.junction for p, ref in fc.port_map.items() if ref.junction is not None},
    )
