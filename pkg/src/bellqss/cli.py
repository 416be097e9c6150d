"""Batch runner: seeded trials per scenario, aggregate statistics, reports.

Exit codes: 0 success, 1 configuration/usage error, 2 internal invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import yaml

from . import __version__
from .adversary import CollusionStrategy, InterceptResendStrategy
from .equations import verify_equations
from .errors import ConfigError, InternalInvariantError, QSSError
from .protocol import ProtocolConfig, RunReport, Strategy, Variant, run_scenario
from .rng import trial_seed

SCENARIOS = ("honest", "collusion", "collusion-improved", "intercept-resend")
CSV_HEADER = (
    "scenario", "k", "k1", "m", "trials", "seed",
    "detection_rate", "mean_mismatch", "adversary_accuracy",
)  # fmt: skip


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class ScenarioSpec:
    scenario: str
    config: ProtocolConfig
    trials: int
    out: Path | None = None
    csv: Path | None = None
    zach_returns_genuine: bool = False

    def strategy(self) -> Strategy:
        if self.scenario == "honest":
            return Strategy()
        if self.scenario in ("collusion", "collusion-improved"):
            return CollusionStrategy(returns_genuine=self.zach_returns_genuine)
        return InterceptResendStrategy()


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    detected: bool
    aborted_at: str | None
    mismatch_count: int
    precheck_photons: int
    precheck_matches: int
    check_positions: int
    check_mismatches: int
    recovery_accuracy: float | None
    adversary_accuracy: float | None

    @classmethod
    def from_report(cls, trial: int, report: RunReport) -> TrialRecord:
        return cls(
            trial=trial,
            seed=report.config.seed,
            detected=report.detected,
            aborted_at=report.aborted_at,
            mismatch_count=report.mismatch_count,
            precheck_photons=len(report.prechecks),
            precheck_matches=sum(r.verdict.value == "match" for r in report.prechecks),
            check_positions=len(report.checks),
            check_mismatches=sum(r.verdict.value == "mismatch" for r in report.checks),
            recovery_accuracy=report.recovery_accuracy,
            adversary_accuracy=_adversary_accuracy(report),
        )


def _adversary_accuracy(report: RunReport) -> float | None:
    if report.adversary_secret is None:
        return None
    if report.detected:
        # aborted before Alice announced anything decodable
        return 0.0
    return report.adversary_accuracy


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


@dataclass
class AggregateReport:
    spec: ScenarioSpec
    records: list[TrialRecord] = field(default_factory=list)

    @property
    def detection_rate(self) -> float:
        return sum(r.detected for r in self.records) / len(self.records)

    @property
    def mean_mismatch(self) -> float:
        return sum(r.mismatch_count for r in self.records) / len(self.records)

    @property
    def mean_recovery_accuracy(self) -> float | None:
        return _mean(r.recovery_accuracy for r in self.records)

    @property
    def mean_adversary_accuracy(self) -> float | None:
        return _mean(r.adversary_accuracy for r in self.records)

    @property
    def precheck_photons(self) -> int:
        return sum(r.precheck_photons for r in self.records)

    @property
    def precheck_match_rate(self) -> float | None:
        n = self.precheck_photons
        return sum(r.precheck_matches for r in self.records) / n if n else None

    @property
    def check_positions(self) -> int:
        return sum(r.check_positions for r in self.records)

    @property
    def check_mismatch_rate(self) -> float | None:
        n = self.check_positions
        return sum(r.check_mismatches for r in self.records) / n if n else None

    def aggregates(self) -> dict:
        return {
            "trials": len(self.records),
            "detected": sum(r.detected for r in self.records),
            "detection_rate": self.detection_rate,
            "mean_mismatch": self.mean_mismatch,
            "mean_recovery_accuracy": self.mean_recovery_accuracy,
            "mean_adversary_accuracy": self.mean_adversary_accuracy,
            "precheck_photons": self.precheck_photons,
            "precheck_match_rate": self.precheck_match_rate,
            "check_positions": self.check_positions,
            "check_mismatch_rate": self.check_mismatch_rate,
        }

    def to_document(self) -> dict:
        cfg = self.spec.config
        return {
            "tool": "bellqss",
            "version": __version__,
            "scenario": self.spec.scenario,
            "seed": cfg.seed,
            "config": {
                "k": cfg.k,
                "k1": cfg.k1,
                "m": cfg.m,
                "variant": cfg.variant.value,
                "trials": self.spec.trials,
                "zach_returns_genuine": self.spec.zach_returns_genuine,
            },
            "aggregates": self.aggregates(),
            "trials": [vars(r) for r in self.records],
        }

    def summary_row(self) -> list[str]:
        cfg = self.spec.config
        adv = self.mean_adversary_accuracy
        return [
            self.spec.scenario, str(cfg.k), str(cfg.k1), str(cfg.m),
            str(self.spec.trials), str(cfg.seed),
            f"{self.detection_rate:.6f}", f"{self.mean_mismatch:.6f}",
            "" if adv is None else f"{adv:.6f}",
        ]  # fmt: skip


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _ArgParser(prog="bellqss", description="Simulate the five-party Bell-state secret sharing protocol and its attacks.")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--k", type=int, default=32, help="Bell pairs per run")
    p.add_argument("--k1", type=int, default=8, help="final check positions")
    p.add_argument("--m", type=int, default=0, help="pre-check photons (improved variant)")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="structured (YAML) report path")
    p.add_argument("--csv", type=Path, help="one-line CSV summary path")
    p.add_argument("--verify-equations", action="store_true", help="run the worked-instance and exhaustive checks")
    p.add_argument("--zach-returns-genuine", action="store_true", help="in pre-checks, Zach surrenders the genuine t photons")
    return p


def parse_args(argv: Sequence[str] | None = None) -> tuple[ScenarioSpec | None, bool]:
    """Validate argv into a spec (None when only verifying equations)."""
    ns = build_parser().parse_args(argv)
    if ns.scenario is None:
        if not ns.verify_equations:
            raise UsageError("--scenario is required unless --verify-equations is given")
        return None, True
    if ns.trials < 1:
        raise UsageError("trials must be >= 1")
    if ns.seed < 0 or ns.seed >= 2**64:
        raise UsageError("seed must be a 64-bit unsigned integer")
    if ns.scenario == "collusion-improved":
        if ns.m < 1:
            raise UsageError("collusion-improved needs --m >= 1")
        variant = Variant.Improved
    else:
        variant = Variant.Improved if ns.m > 0 else Variant.Original
    if ns.k1 >= ns.k:
        raise UsageError("k1 must be < k")
    if ns.m >= ns.k - ns.k1:
        raise UsageError("m must be < k - k1")
    try:
        config = ProtocolConfig(ns.k, ns.k1, ns.m, variant, ns.seed)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    spec = ScenarioSpec(ns.scenario, config, ns.trials, ns.out, ns.csv, ns.zach_returns_genuine)
    return spec, ns.verify_equations


def run_batch(spec: ScenarioSpec) -> AggregateReport:
    cfg = spec.config
    report = AggregateReport(spec)
    for trial in range(spec.trials):
        trial_cfg = ProtocolConfig(cfg.k, cfg.k1, cfg.m, cfg.variant, trial_seed(cfg.seed, trial))
        run = run_scenario(trial_cfg, spec.strategy())
        report.records.append(TrialRecord.from_report(trial, run))
    return report


def _represent_float(dumper: yaml.SafeDumper, value: float):
    return dumper.represent_scalar("tag:yaml.org,2002:float", f"{value:.6f}")


class _ReportDumper(yaml.SafeDumper):
    pass


_ReportDumper.add_representer(float, _represent_float)


def dump_document(doc: dict) -> str:
    return yaml.dump(doc, Dumper=_ReportDumper, sort_keys=False, allow_unicode=True, width=120)


def load_document(text: str) -> dict:
    return yaml.safe_load(text)


def summary_csv(report: AggregateReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerow(report.summary_row())
    return buf.getvalue()


def write_reports(report: AggregateReport, out: Path | None, csv_path: Path | None) -> None:
    if out is not None:
        out.write_text(dump_document(report.to_document()), encoding="utf-8")
    if csv_path is not None:
        csv_path.write_text(summary_csv(report), encoding="utf-8")


def _print_checks() -> bool:
    ok = True
    for check in verify_equations():
        status = "PASS" if check.passed else "FAIL"
        print(f"{status}  {check.name:<20} {check.detail}  ({check.seconds:.3f}s)")
        ok &= check.passed
    return ok


def main(argv: Sequence[str] | None = None) -> int:
    try:
        spec, verify = parse_args(argv)
    except UsageError as exc:
        print(f"bellqss: error: {exc}", file=sys.stderr)
        return 1
    try:
        if verify and not _print_checks():
            return 2
        if spec is None:
            return 0
        report = run_batch(spec)
    except InternalInvariantError as exc:
        print(f"bellqss: internal invariant violated: {exc}", file=sys.stderr)
        return 2
    except QSSError as exc:
        print(f"bellqss: {exc}", file=sys.stderr)
        return 1
    try:
        write_reports(report, spec.out, spec.csv)
    except OSError as exc:
        print(f"bellqss: cannot write report: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(summary_csv(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
