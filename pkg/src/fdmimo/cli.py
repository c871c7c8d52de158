"""Command-line front end: figure presets, YAML configuration and CSV output.

Usage::

    python -m fdmimo --preset fig4 --trials 200 --out runs/fig4

A configuration file is a flat YAML mapping whose keys are the fields of
:class:`~fdmimo.config.SystemConfig`, :class:`~fdmimo.montecarlo.SweepSpec`,
:class:`~fdmimo.channels.ChannelParams` and
:class:`~fdmimo.canceller.ImpairmentParams`, plus ``preset`` and
``mq_nm_cases``.  The ``meta.txt`` written next to ``results.csv`` uses the
same format, so it can be fed back with ``--config`` to repeat a run.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import yaml

from . import __version__
from .canceller import ImpairmentParams
from .channels import ChannelParams
from .config import SystemConfig
from .exceptions import ConfigError, NumericalError, ParameterError
from .montecarlo import Design, SweepSpec, run_sweep

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "design",
    "p_k_dbm",
    "p_m_dbm",
    "prob_constraint_met",
    "avg_alpha",
    "mean_dl",
    "mean_ul",
    "mean_fd",
    "mean_fd_conditioned",
    "n_feasible",
    "n_trials",
    "seed",
)

DEFAULT_TRIALS = 200

_TAPS = ("proposed_taps:4", "proposed_taps:8", "sota_full_taps", "softnull")
_AUX = ("proposed_aux:2", "proposed_aux:3", "sota_full_aux", "softnull")
_RATES = ("proposed_taps:4", "proposed_taps:8", "proposed_aux:2", "proposed_aux:3", "sota_full_taps")
_RATE_SPLIT = ("proposed_taps:8", "proposed_aux:3", "sota_full_taps")

# name -> overrides; every figure uses the 4x4 node of the defaults.
PRESETS: Dict[str, Dict[str, object]] = {
    "fig4": {"m_q": 1, "n_m": 1, "designs": _TAPS},
    "fig5": {"m_q": 4, "n_m": 4, "designs": _TAPS},
    "fig6": {"m_q": 1, "n_m": 1, "architecture": "aux", "n_elements": 2, "designs": _AUX},
    "fig7": {"m_q": 4, "n_m": 4, "architecture": "aux", "n_elements": 2, "designs": _AUX},
    "fig8": {"mq_nm_cases": (1, 4), "designs": ("proposed_taps:4", "proposed_taps:8")},
    "fig9": {
        "mq_nm_cases": (1, 4),
        "architecture": "aux",
        "n_elements": 2,
        "designs": ("proposed_aux:1", "proposed_aux:2", "proposed_aux:3"),
    },
    "fig10": {"m_q": 1, "n_m": 1, "designs": _RATES},
    "fig11": {"m_q": 4, "n_m": 4, "designs": _RATES},
    "fig12": {"m_q": 1, "n_m": 1, "designs": _RATE_SPLIT},
    "fig13": {"m_q": 4, "n_m": 4, "designs": _RATE_SPLIT},
    "custom": {},
}

_SYSTEM_KEYS = {f.name for f in dataclasses.fields(SystemConfig)}
_SWEEP_KEYS = {"p_k_grid_dbm", "p_m_offset_db", "n_trials", "designs", "master_seed"}
_CHANNEL_KEYS = {f.name for f in dataclasses.fields(ChannelParams)}
_IMPAIRMENT_KEYS = {f.name for f in dataclasses.fields(ImpairmentParams)}
_SCENARIO_KEYS = {"preset", "mq_nm_cases", "version"}
KNOWN_KEYS = _SYSTEM_KEYS | _SWEEP_KEYS | _CHANNEL_KEYS | _IMPAIRMENT_KEYS | _SCENARIO_KEYS


@dataclass(frozen=True)
class Scenario:
    """Fully resolved run description."""

    preset: str
    system: SystemConfig
    sweep: SweepSpec
    channel: ChannelParams
    impairments: ImpairmentParams
    mq_nm_cases: Optional[Tuple[int, ...]] = None

    def cases(self) -> List[Tuple[str, SystemConfig]]:
        """(label suffix, config) pairs; one per M_q = N_m value."""
        if not self.mq_nm_cases:
            return [("", self.system)]
        return [(f"@mq{v}", self.system.replace(m_q=v, n_m=v)) for v in self.mq_nm_cases]

    def to_mapping(self) -> Dict[str, object]:
        out: Dict[str, object] = {"preset": self.preset}
        out.update(dataclasses.asdict(self.system))
        out.update(
            p_k_grid_dbm=list(self.sweep.p_k_grid_dbm),
            p_m_offset_db=self.sweep.p_m_offset_db,
            n_trials=self.sweep.n_trials,
            designs=[str(d) for d in self.sweep.designs],
            master_seed=self.sweep.master_seed,
        )
        out.update(dataclasses.asdict(self.channel))
        out.update(dataclasses.asdict(self.impairments))
        out["mq_nm_cases"] = list(self.mq_nm_cases) if self.mq_nm_cases else None
        return out


def load_config_file(path) -> Dict[str, object]:
    """Read a flat YAML mapping; an empty file yields an empty mapping."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"not valid YAML: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be a key: value mapping")
    return data


def _coerce(key, value, kind):
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot interpret {value!r} as {kind.__name__}") from None


def parse_config(values: Optional[Dict[str, object]] = None) -> Scenario:
    """Build a :class:`Scenario` from a key/value mapping.

    The ``preset`` entry (default ``custom``) supplies base values that the
    other entries override.  Unknown keys and invalid values raise
    :class:`ConfigError` naming the key.
    """
    values = dict(values or {})
    unknown = sorted(set(values) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    preset = str(values.pop("preset", None) or "custom")
    if preset not in PRESETS:
        raise ConfigError("preset", f"expected one of {sorted(PRESETS)}")
    values.pop("version", None)
    merged = dict(PRESETS[preset])
    merged.update({k: v for k, v in values.items()})

    system_kw = {}
    for k in _SYSTEM_KEYS & set(merged):
        v = merged[k]
        if v is None:
            continue
        field_type = {f.name: f.type for f in dataclasses.fields(SystemConfig)}[k]
        if "bool" in str(field_type):
            if not isinstance(v, bool):
                raise ConfigError(k, "expected true or false")
        elif "int" in str(field_type):
            if isinstance(v, bool) or _coerce(k, v, float) != int(_coerce(k, v, float)):
                raise ConfigError(k, f"expected an integer, got {v!r}")
            v = int(v)
        elif "float" in str(field_type):
            v = _coerce(k, v, float)
        else:
            v = str(v)
        system_kw[k] = v
    system = SystemConfig(**system_kw)

    sweep_kw = {k: merged[k] for k in _SWEEP_KEYS & set(merged) if merged[k] is not None}
    if "p_k_grid_dbm" in sweep_kw:
        grid = sweep_kw["p_k_grid_dbm"]
        if not isinstance(grid, (list, tuple)):
            raise ConfigError("p_k_grid_dbm", "expected a list of powers in dBm")
        sweep_kw["p_k_grid_dbm"] = tuple(_coerce("p_k_grid_dbm", p, float) for p in grid)
    if "designs" in sweep_kw:
        designs = sweep_kw["designs"]
        if isinstance(designs, str):
            designs = [d for d in designs.split(",") if d.strip()]
        sweep_kw["designs"] = tuple(Design.parse(d) for d in designs)
    for key, kind in (("n_trials", int), ("master_seed", int), ("p_m_offset_db", float)):
        if key in sweep_kw:
            sweep_kw[key] = _coerce(key, sweep_kw[key], kind)
    sweep = SweepSpec(lambda_a_dbm=system.lambda_a_dbm, **sweep_kw)

    channel = ChannelParams(
        **{k: _coerce(k, merged[k], float) for k in _CHANNEL_KEYS & set(merged)}
    )
    impairments = ImpairmentParams(
        **{k: _coerce(k, merged[k], float) for k in _IMPAIRMENT_KEYS & set(merged)}
    )

    cases = merged.get("mq_nm_cases")
    if cases is not None:
        if not isinstance(cases, (list, tuple)) or not cases:
            raise ConfigError("mq_nm_cases", "expected a non-empty list of antenna counts")
        cases = tuple(int(_coerce("mq_nm_cases", c, int)) for c in cases)
        for c in cases:
            system.replace(m_q=c, n_m=c)  # validates every case up front

    for design in sweep.designs:
        if design.kind.startswith("proposed"):
            system.replace(architecture=design.architecture, n_elements=design.n_elements)

    return Scenario(preset, system, sweep, channel, impairments, cases)


def _fmt(x):
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def run_scenario(scenario: Scenario, output_dir, n_jobs=1) -> Path:
    """Run the sweep(s) of ``scenario`` and write ``results.csv`` and ``meta.txt``.

    Returns the path of ``results.csv``.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for suffix, system in scenario.cases():
        result = run_sweep(scenario.sweep, system, scenario.channel, scenario.impairments, n_jobs)
        for st in result.rows():
            rows.append(
                [
                    st.design + suffix,
                    st.p_k_dbm,
                    st.p_m_dbm,
                    st.prob_constraint_met,
                    st.avg_alpha,
                    st.mean_dl_rate,
                    st.mean_ul_rate,
                    st.mean_fd_rate,
                    st.mean_fd_conditioned,
                    st.n_feasible,
                    st.n_trials,
                    scenario.sweep.master_seed,
                ]
            )
    csv_path = out / "results.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    meta = f"# fdmimo {__version__}\nversion: {__version__}\n"
    meta += yaml.safe_dump(scenario.to_mapping(), sort_keys=True, default_flow_style=None)
    (out / "meta.txt").write_text(meta)
    return csv_path


def build_parser():
    p = argparse.ArgumentParser(
        prog="fdmimo",
        description="Monte Carlo sweeps of full-duplex MIMO analog/digital SI mitigation.",
    )
    p.add_argument("--preset", choices=sorted(PRESETS), help="figure preset (default custom)")
    p.add_argument("--trials", type=int, help=f"Monte Carlo trials (default {DEFAULT_TRIALS})")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--config", help="YAML key: value file (meta.txt files are accepted)")
    p.add_argument("--out", default="fdmimo_out", help="output directory")
    p.add_argument(
        "--enumerate-realizations",
        action="store_true",
        default=None,
        help="search every MUX/DEMUX placement instead of the heuristic one",
    )
    p.add_argument("--architecture", choices=("taps", "aux"))
    p.add_argument("--n-elements", type=int, help="taps or AUX TX chains of the canceller")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        values = load_config_file(args.config) if args.config else {}
        if args.preset is not None:
            values["preset"] = args.preset
        if args.trials is not None:
            values["n_trials"] = args.trials
        elif "n_trials" not in values:
            values["n_trials"] = DEFAULT_TRIALS
        if args.seed is not None:
            values["master_seed"] = args.seed
        if args.enumerate_realizations:
            values["enumerate_realizations"] = True
        if args.architecture is not None:
            values["architecture"] = args.architecture
        if args.n_elements is not None:
            values["n_elements"] = args.n_elements
        scenario = parse_config(values)
        path = run_scenario(scenario, args.out, n_jobs=args.jobs)
    except ConfigError as exc:
        print(f"fdmimo: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ParameterError, NumericalError, OverflowError) as exc:
        print(f"fdmimo: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"fdmimo: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
