"""Orchestration of synthesize / simulate / observe / verify runs.

Each ``run_*`` function takes a parsed :class:`ExperimentConfig`, writes its
artifacts under ``out_dir`` and returns them; the CLI maps exceptions to
exit codes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import synthesis
from ..battery import simulate
from ..errors import DimensionMismatchError, VerificationError
from ..observer import ObserverConfig, error_metrics, run, samples_from_trajectory
from . import csvio, plots
from .config import ExperimentConfig
from .noise import uniform_noise

log = logging.getLogger(__name__)


@dataclass
class RunArtifacts:
    out_dir: Path
    truth_csv: Optional[Path] = None
    measurements_csv: Optional[Path] = None
    trace_csv: Optional[Path] = None
    certificates: Optional[Path] = None
    gain: Optional[Path] = None
    summary: Optional[Path] = None
    plots: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def paths(self):
        single = [self.truth_csv, self.measurements_csv, self.trace_csv,
                  self.certificates, self.gain, self.summary]
        return [p for p in single if p is not None] + list(self.plots)

    def all_exist(self) -> bool:
        return all(Path(p).is_file() for p in self.paths())


def _out(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def certificate_text(cfg: ExperimentConfig, result: synthesis.SynthesisResult,
                     report: synthesis.CertificateReport):
    """Human-readable certificate summary and the matching ultimate-bound report."""
    e = cfg.euub
    euub = synthesis.euub_report(result, e.bounds, rho=e.rho, mu=e.mu, r=e.r, sigma=e.sigma)
    lines = [f"alpha_bar = {result.alpha_bar:.6e}  gamma_Z = {result.gamma_z_norm:.6e}",
             "vertex margins: " + "  ".join(f"{m:.6e}" for m in result.vertex_margins),
             report.summary(), "", "ultimate-bound report", euub.summary()]
    return "\n".join(lines) + "\n", euub


def check_gain(cfg: ExperimentConfig, result: synthesis.SynthesisResult):
    if result.dim != cfg.observer.dim:
        raise DimensionMismatchError(
            f"gain file has dimension {result.dim}, config implies {cfg.observer.dim} "
            f"(order_l = {cfg.observer.order_l})")


def run_synthesize(cfg: ExperimentConfig, out_dir) -> RunArtifacts:
    """Solve, verify and write ``gain.txt`` plus ``certificates.txt``.

    Raises :class:`VerificationError` (after writing the certificates) when the
    re-check fails.
    """
    out = _out(out_dir)
    result = synthesis.synthesize(cfg.synthesis)
    report = synthesis.verify_solution(result, cfg.synthesis, raise_on_failure=False)
    text, _ = certificate_text(cfg, result, report)
    art = RunArtifacts(out, gain=synthesis.save_result(result, out / "gain.txt"))
    art.certificates = out / "certificates.txt"
    art.certificates.write_text(text)
    if not report.passed:
        raise VerificationError("synthesized gain failed verification: "
                                + "; ".join(report.failures), report=report)
    return art


def _obtain_gain(cfg, out, gain_path, art):
    if gain_path is None:
        sub = run_synthesize(cfg, out)
        art.gain, art.certificates = sub.gain, sub.certificates
        return synthesis.load_result(sub.gain)
    result = synthesis.load_result(gain_path)
    check_gain(cfg, result)
    report = synthesis.verify_solution(result, cfg.synthesis, raise_on_failure=False)
    text, _ = certificate_text(cfg, result, report)
    art.certificates = out / "certificates.txt"
    art.certificates.write_text(text)
    if not report.passed:
        raise VerificationError("gain failed verification: " + "; ".join(report.failures),
                                report=report)
    return result


def observer_config(cfg: ExperimentConfig, result) -> ObserverConfig:
    return ObserverConfig(gain_factor=result.gain_factor, params=cfg.battery,
                          cfg=cfg.observer, x_hat0=cfg.x_hat0, dt=cfg.observer_dt,
                          q_range=(cfg.synthesis.q_min, cfg.synthesis.q_max))


def _summary_lines(trace, truth=None):
    lines = [f"samples = {len(trace)}",
             f"sup |z_hat|_inf = {float(np.abs(trace.x_hat[:, :2]).max())!r}",
             f"terminal z_hat = {float(trace.x_hat[-1, 0])!r} {float(trace.x_hat[-1, 1])!r}"]
    q = trace.time >= trace.time[0] + 0.75 * (trace.time[-1] - trace.time[0])
    lines.append(f"final-quarter mean crossover estimate = {float(trace.crossover[q].mean())!r}")
    lines.append(f"gamma_T estimate = {trace.gamma_t_estimate()!r}")
    if truth is not None:
        rep = error_metrics(truth, trace)
        ref = float(np.interp(trace.time[q], truth.time, truth.crossover_flux).mean())
        lines += [f"initial |z_err| = {rep.initial_norm!r}",
                  f"terminal |z_err| = {rep.terminal_norm!r}",
                  f"final-quarter mean crossover truth = {ref!r}"]
        if ref != 0:
            rel = float(abs(trace.crossover[q].mean() - ref) / abs(ref))
            lines.append(f"relative error of time-averaged crossover = {rel!r}")
    lines += [f"warning: {w}" for w in trace.warnings]
    return lines


def simulate_twin(cfg: ExperimentConfig, seed: Optional[int] = None):
    """Plant run and its (optionally noisy) sampled measurements."""
    truth = simulate(cfg.battery, cfg.z0, cfg.inputs, cfg.crossover_truth, cfg.horizon,
                     cfg.sim_dt)
    clean = samples_from_trajectory(truth, cfg.sample_period)
    noise = None
    if cfg.noise_mv > 0:
        noise = uniform_noise(len(clean), cfg.noise_mv * 1e-3,
                              cfg.seed if seed is None else seed)
    return truth, samples_from_trajectory(truth, cfg.sample_period, noise)


def run_twin(cfg: ExperimentConfig, out_dir, gain_path=None, seed=None,
             make_plots: bool = True) -> RunArtifacts:
    out = _out(out_dir)
    art = RunArtifacts(out)
    result = _obtain_gain(cfg, out, gain_path, art)
    truth, samples = simulate_twin(cfg, seed)
    trace = run(observer_config(cfg, result), samples)
    art.truth_csv = csvio.write_truth(out / "truth.csv", truth)
    art.measurements_csv = csvio.write_measurements(out / "measurements.csv", samples)
    art.trace_csv = csvio.write_trace(out / "trace.csv", trace)
    art.summary = out / "summary.txt"
    art.summary.write_text("\n".join(_summary_lines(trace, truth)) + "\n")
    art.warnings = list(trace.warnings)
    if make_plots:
        art.plots = plots.plot_states(out, trace, truth) + \
            plots.plot_voltage(out, samples, trace, cfg.battery)
    return art


def run_observe(cfg: ExperimentConfig, csv_path, out_dir, gain_path=None,
                make_plots: bool = True) -> RunArtifacts:
    out = _out(out_dir)
    art = RunArtifacts(out)
    samples = csvio.read_measurements(csv_path)
    result = _obtain_gain(cfg, out, gain_path, art)
    trace = run(observer_config(cfg, result), samples)
    art.trace_csv = csvio.write_trace(out / "trace.csv", trace)
    art.summary = out / "summary.txt"
    art.summary.write_text("\n".join(_summary_lines(trace)) + "\n")
    art.warnings = list(trace.warnings)
    if make_plots:
        art.plots = plots.plot_states(out, trace) + \
            plots.plot_voltage(out, samples, trace, cfg.battery)
    return art


def run_verify(cfg: ExperimentConfig, gain_path):
    """Re-check a stored gain; returns ``(report text, passed)``."""
    result = synthesis.load_result(gain_path)
    check_gain(cfg, result)
    report = synthesis.verify_solution(result, cfg.synthesis, n_samples=11,
                                       raise_on_failure=False)
    text, euub = certificate_text(cfg, result, report)
    return text, report.passed and euub.valid
