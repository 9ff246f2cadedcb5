"""Acceptance suite: each check runs one criterion at its stated tolerance.

Shared by ``sfqlab selftest`` and the test suite. Every check returns a
``CheckResult`` with a one-line verdict; none of them raises on a failed
criterion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io
import math
from pathlib import Path
import tempfile
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
from scipy.stats import binom

from .analog.pulses import pulse_area_check
from .analog.solver import SolverConfig, transient
from .constants import PHI0
from .margin_lab.margins import Criterion, cancelling_anneal_factor, find_margins, sweep_temperature, trial_seeds
from .margin_lab.patterns import divider_pattern, dmx_rotation_pattern, null_pattern, pattern_for
from .margin_lab.pcm import extract_ic, extract_inductance, solve_three_inductances, synthesize_iv, synthesize_vphi
from .margin_lab.targets import BehavioralTarget, SyntheticTarget
from .netlist.flatten import flatten
from .netlist.grammar import parse
from .physics import MaterialParams, ab_critical_current, ic_ratio
from .pulse_logic.circuit import behavioral_circuit
from .pulse_logic.errors import ErrorModel
from .pulse_logic.programs import run_counter
from .pulse_logic.simulate import simulate

TC = 8.5
PCM_KINDS = ("sd_chain", "divider4", "d2f", "ndro_switch")


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    parts: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.detail}"


def check_ic_ratio_point() -> CheckResult:
    r = float(ic_ratio(4.2, TC))
    return CheckResult(1, "ic_ratio(4.2 K)", abs(r - 0.879) <= 0.005, f"{r:.4f} (target 0.879 +/- 0.005)")


def check_flatness() -> CheckResult:
    t = np.linspace(0.1, 2.5, 241)
    r = np.asarray(ic_ratio(t, TC))
    var = float((r.max() - r.min()) / r.max())
    return CheckResult(2, "low-T flatness", var < 0.015, f"variation {100 * var:.3f}% over 0.1-2.5 K (< 1.5%)")


def check_composition() -> CheckResult:
    t = np.linspace(1e-3, TC - 1e-3, 2001)
    m = MaterialParams(tc=TC)
    composed = np.asarray(ab_critical_current(t, 50.0, m)) / float(ab_critical_current(0.0, 50.0, m))
    err = float(np.max(np.abs(composed / np.asarray(ic_ratio(t, TC)) - 1.0)))
    return CheckResult(3, "gap + AB composition", err <= 1e-9, f"max relative deviation {err:.2e} (<= 1e-9)")


def _single_junction(ic: float, r: float, i: float):
    text = f".model ov jj(icrit={ic!r}, rsh={r!r}, cap=1e-18, rn=1e9)\nB1 1 0 ov\nI1 0 1 dc({i!r})\n"
    fc = flatten(parse(text))
    # the model Ic is defined at 4.2 K, so run there with noise off
    return transient(fc, SolverConfig(t_stop=1000e-12, dt=0.01e-12, temperature=4.2))


def check_rsj() -> CheckResult:
    ic, r = 100e-6, 2.0
    worst_v = worst_flux = 0.0
    for x in (1.2, 1.5, 2.0):
        tr = _single_junction(ic, r, x * ic)
        keep = tr.time > 100e-12
        v = float(np.mean(tr.junction_voltage(0)[keep]))
        worst_v = max(worst_v, abs(v / (r * math.sqrt((x * ic) ** 2 - ic**2)) - 1.0))
        worst_flux = max(worst_flux, abs(pulse_area_check(tr, 0, start=3) / PHI0 - 1.0))
    ok = worst_v < 0.01 and worst_flux < 0.02
    return CheckResult(4, "RSJ oracle", ok, f"mean voltage off by {100 * worst_v:.2f}% (< 1%), slip flux off by {100 * worst_flux:.2f}% (< 2%)")


def check_functional() -> CheckResult:
    off = ErrorModel.off()
    div = behavioral_circuit("divider4")
    div_bad = [n for n in range(1, 101) if simulate(div, divider_pattern(n).stimuli, off).outputs.count("out") != n // 4]
    dmx = behavioral_circuit("dmx", n_out=4)
    pat = dmx_rotation_pattern(4)
    dmx_ok = pat.evaluate(simulate(dmx, pat.stimuli, off).outputs).passed
    pc = behavioral_circuit("prog_counter", n_bits=8)
    pc_bad = []
    for m in range(1, 257):
        out, stop, _ = run_counter(pc, m, m + 2, off)
        if out.count("out") != m or stop is None or stop < out["out"][-1]:
            pc_bad.append(m)
    ok = not div_bad and dmx_ok and not pc_bad
    detail = f"divider4 wrong for {len(div_bad)}/100 N, dmx rotation {'passes' if dmx_ok else 'fails'}, PC wrong for {len(pc_bad)}/256 m"
    return CheckResult(5, "functional suite", ok, detail)


def _fast() -> Criterion:
    # early stopping changes no verdict, only skips trials whose outcome cannot matter
    return Criterion(early_stop=True)


def center_ratios(jobs: int = 1) -> dict[str, float | None]:
    out = {}
    for kind in PCM_KINDS:
        s = sweep_temperature(BehavioralTarget(behavioral_circuit(kind)), pattern_for(kind), criterion=_fast(), jobs=jobs)
        out[kind] = s.center_ratio(0.1, 4.2)
    return out


def width_property(seed: int) -> tuple[bool, bool, dict]:
    """(cold width <= warm width for every target, cold widths decrease with cell count, widths)."""
    widths, cells = {}, {}
    for kind in PCM_KINDS:
        bc = behavioral_circuit(kind, jitter_seed=seed)
        cells[kind] = len(bc.instances)
        pat = pattern_for(kind)
        widths[kind] = tuple(find_margins(BehavioralTarget(bc), pat, t, _fast()).width for t in (0.1, 4.2))
    narrower = all(c <= w for c, w in widths.values())
    cold = [widths[k][0] for k in sorted(PCM_KINDS, key=cells.get)]
    ordered = all(b < a for a, b in zip(cold, cold[1:]))
    return narrower, ordered, widths


def check_center_shift(seeds: int = 20, jobs: int = 1) -> CheckResult:
    ratios = center_ratios(jobs)
    ratio_ok = all(r is not None and 1.12 <= r <= 1.18 for r in ratios.values())
    narrower = ordered = both = 0
    for s in range(seeds):
        a, b, _ = width_property(s)
        narrower += a
        ordered += b
        both += a and b
    frac = both / seeds
    width_ok = frac >= 0.95
    txt = ", ".join(f"{k} {r:.4f}" if r is not None else f"{k} none" for k, r in ratios.items())
    detail = (
        f"center ratio 0.1K/4.2K: {txt} (in [1.12, 1.18]: {'yes' if ratio_ok else 'no'}); "
        f"width property on {frac:.0%} of {seeds} jitter seeds (>= 95%; cold<=warm on {narrower}, "
        f"cold widths decreasing on {ordered})"
    )
    return CheckResult(6, "center shift and widths", ratio_ok and width_ok, detail, {"center_ratio": ratio_ok, "width_property": width_ok, "ratios": ratios})


# The counter as measured: +/-5% margins at 4.2 K, swept over a finite bias
# range. Narrow windows alone are not enough, because pure Ic scaling keeps
# a shifted interval somewhere on an unbounded sweep.
PC_WINDOW = (0.95, 1.05)
PC_BIAS_RANGE = (0.925, 1.075)
PC_STEP = 0.005


def narrow_counter() -> BehavioralTarget:
    bc = behavioral_circuit("prog_counter", n_bits=8)
    return BehavioralTarget(bc.with_windows([PC_WINDOW] * len(bc.instances)))


def check_anneal() -> CheckResult:
    tg = narrow_counter()
    pat = pattern_for("prog_counter", m=8, n_bits=8)
    kw = dict(sweep_range=PC_BIAS_RANGE, step=PC_STEP)
    warm = find_margins(tg, pat, 4.2, _fast(), **kw)
    cold = find_margins(tg, pat, 0.01, _fast(), **kw)
    factor = cancelling_anneal_factor(0.01)
    fixed = find_margins(tg.annealed(factor), pat, 0.01, _fast(), **kw)
    rel = abs(fixed.width / warm.width - 1.0) if warm.width else math.inf
    ok = cold.interval is None and warm.interval is not None and rel <= 0.20
    detail = (
        f"4.2 K {warm.interval}, 10 mK {cold.interval or 'empty'}, after factor {factor:.4f} {fixed.interval}; "
        f"width differs by {100 * rel:.1f}% (<= 20%)"
    )
    return CheckResult(7, "anneal recovery", ok, detail)


def check_binomial(points: int = 200) -> CheckResult:
    crit = Criterion()
    pat = null_pattern()
    mismatches = 0
    summary = []
    ok = True
    for p in (0.05, 0.15):
        tg = SyntheticTarget(window=(0.0, 10.0), p_in=p)
        passes = 0
        for k in range(points):
            beta = 1.0 + k * 1e-3
            rep = find_margins(tg, pat, 4.2, crit, seed=11, sweep_range=(beta, beta + 0.5), step=1.0)
            pt = rep.points[0]
            fails = sum(not o.passed for o in tg.run_trials(pat, beta, 4.2, trial_seeds(11, beta, crit.trials)))
            verdict = rep.interval is not None
            mismatches += (pt.failures != fails) or (verdict != (fails < 10))
            passes += verdict
        expect = float(binom.cdf(9, 100, p))
        sd = math.sqrt(expect * (1 - expect) / points)
        good = abs(passes / points - expect) <= 4 * sd
        ok &= good
        summary.append(f"p={p}: pass fraction {passes / points:.3f} vs exact {expect:.3f}")
    ok &= mismatches == 0
    return CheckResult(8, "protocol fidelity", ok, f"{'; '.join(summary)}; {mismatches} misclassified points")


def check_fitters() -> CheckResult:
    errs_ic = []
    for ic in (20e-6, 100e-6):
        errs_ic.append(abs(extract_ic(synthesize_iv(ic, 10, points=4001)) / ic - 1.0))
    errs_l = []
    for ind in (5e-12, 20e-12, 60e-12):
        errs_l.append(abs(extract_inductance(synthesize_vphi(ind, periods=5)) / ind - 1.0))
    l1, l2, l3 = 16e-12, 9e-12, 7e-12
    pairs = [extract_inductance(synthesize_vphi(a + b, periods=5)) for a, b in ((l1, l2), (l2, l3), (l1, l3))]
    got = solve_three_inductances(*pairs)
    ratio_err = max(abs((g / got[2]) / (t / 7.0) - 1.0) for g, t in zip(got, (16.0, 9.0, 7.0)))
    ok = max(errs_ic) <= 0.005 and max(errs_l) <= 0.01 and ratio_err <= 0.02
    detail = f"Ic error {100 * max(errs_ic):.3f}% (<= 0.5%), L error {100 * max(errs_l):.3f}% (<= 1%), 16:9:7 ratio error {100 * ratio_err:.3f}% (<= 2%)"
    return CheckResult(9, "PCM fitters", ok, detail)


def _determinism_commands(d: Path) -> list[tuple[list[str], list[str]]]:
    """(argv, output files) per command; ``{J}`` becomes the job count."""
    iv = synthesize_iv(50e-6, 10)
    vp = synthesize_vphi(12e-12, periods=4)
    from .margin_lab.pcm import write_two_column_csv

    (d / "iv.csv").write_text(write_two_column_csv(iv.current, iv.voltage))
    (d / "vphi.csv").write_text(write_two_column_csv(vp.coil_current, vp.voltage))
    return [
        (["sim", "--circuit", "divider4", "--temp", "4.2", "--seed", "5", "--json", "{O}/sim.json", "--pulses", "{O}/sim.csv"], ["sim.json", "sim.csv"]),
        (["sim", "--circuit", "sd_chain", "--mode", "analog", "--temp", "4.2", "--seed", "5", "--json", "{O}/asim.json", "--traces", "{O}/tr.bin", "--pulses", "{O}/apul.csv"], ["asim.json", "tr.bin", "apul.csv"]),
        (["margins", "--circuit", "d2f", "--temp", "4.2", "--seed", "5", "--jobs", "{J}", "--json", "{O}/m.json", "--csv", "{O}/m.csv"], ["m.json", "m.csv"]),
        (["tsweep", "--circuit", "ndro_switch", "--tmin", "0.1", "--tmax", "4.2", "--tstep", "2.05", "--early-stop", "--seed", "5", "--jobs", "{J}", "--json", "{O}/t.json", "--csv", "{O}/t.csv"], ["t.json", "t.csv"]),
        (["pattern", "--circuit", "dmx", "--temp", "4.2", "--beta", "1.2", "--seed", "5", "--json", "{O}/p.json"], ["p.json"]),
        (["anneal", "--circuit", "divider4", "--temp", "0.01", "--early-stop", "--seed", "5", "--jobs", "{J}", "--json", "{O}/a.json", "--csv", "{O}/a.csv"], ["a.json", "a.csv"]),
        (["pcm", "fit-ic", "--in", str(d / "iv.csv"), "--n-series", "10", "--json", "{O}/ic.json"], ["ic.json"]),
        (["pcm", "fit-ind", "--in", str(d / "vphi.csv"), "--json", "{O}/l.json"], ["l.json"]),
    ]


def check_determinism(job_counts=(1, 8)) -> CheckResult:
    from .cli import main

    bad = []
    with tempfile.TemporaryDirectory() as tmp:
        d = Path(tmp)
        for n, (argv, files) in enumerate(_determinism_commands(d)):
            blobs = []
            for run, jobs in enumerate(list(job_counts) + [job_counts[0]]):
                o = d / f"c{n}_r{run}"
                o.mkdir()
                args = [a.replace("{O}", str(o)).replace("{J}", str(jobs)) for a in argv]
                with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
                    rc = main(args)
                if rc not in (0, 1):
                    bad.append(f"{argv[0]} exit {rc}")
                    break
                blobs.append([(o / f).read_bytes() for f in files])
            if any(b != blobs[0] for b in blobs[1:]):
                bad.append(" ".join(argv[:2]))
    ok = not bad
    detail = "all commands byte-identical across reruns and job counts" if ok else f"differs: {', '.join(bad)}"
    return CheckResult(10, "determinism", ok, detail)


CHECKS = {
    1: check_ic_ratio_point,
    2: check_flatness,
    3: check_composition,
    4: check_rsj,
    5: check_functional,
    6: check_center_shift,
    7: check_anneal,
    8: check_binomial,
    9: check_fitters,
    10: check_determinism,
}


def run_all(only=None, jobs: int = 1) -> list[CheckResult]:
    out = []
    for n, fn in CHECKS.items():
        if only and n not in only:
            continue
        out.append(fn(jobs=jobs) if n == 6 else fn())
    return out
