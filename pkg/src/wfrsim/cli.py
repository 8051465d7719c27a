"""Command-line harness.

Subcommands run the benchmark experiments (accuracy, efficiency, shift,
iterations, scaling) or a plain simulation; configuration comes from an INI
style key = value file plus command-line overrides. A full example config
ships in docs/benchmark.ini.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import fields

from .bench import (DEFAULT_DRIVE, EXPERIMENT_KINDS, ExperimentSpec,
                    run_experiment, run_simulation)
from .model import NeuronParams
from .network import (GapJunction, Network, Neuron, SimulationConfig,
                      SpikeConnection, build_scaled_network)
from .wfr import WfrConfig


def _read_config(path):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        cp.read_file(fh)
    return cp


def _neuron_params(cp) -> NeuronParams:
    kwargs = {}
    if cp is not None and cp.has_section("neuron"):
        valid = {f.name for f in fields(NeuronParams)}
        for key, val in cp.items("neuron"):
            if key not in valid:
                raise SystemExit(f"unknown neuron parameter {key!r}")
            kwargs[key] = float(val)
    return NeuronParams(**kwargs)


def _parse_edges(text, factory):
    edges = []
    for chunk in text.split(";"):
        parts = chunk.split()
        if parts:
            edges.append(factory(*parts))
    return edges


def _network_from_config(cp) -> Network:
    params = _neuron_params(cp)
    sec = cp["network"] if cp.has_section("network") else {}
    kind = sec.get("kind", "scaled")
    i_ext = float(sec.get("i_ext", DEFAULT_DRIVE))
    params = NeuronParams(**{**{f.name: getattr(params, f.name)
                                for f in fields(NeuronParams)}, "i_ext": i_ext})
    if kind == "scaled":
        return build_scaled_network(int(sec.get("v", 2)),
                                    int(sec.get("degree", 1)),
                                    float(sec.get("total_g", 30.0)),
                                    params=params)
    if kind == "explicit":
        n = int(sec.get("v", 2))
        neurons = [Neuron(params=params) for _ in range(n)]
        gaps = _parse_edges(sec.get("gap_junctions", ""),
                            lambda i, j, g: GapJunction(int(i), int(j), float(g)))
        spikes = _parse_edges(
            sec.get("spike_connections", ""),
            lambda s, t, w, d: SpikeConnection(int(s), int(t), float(w), float(d)))
        return Network(neurons=neurons, gap_junctions=gaps,
                       spike_connections=spikes)
    raise SystemExit(f"unknown network kind {kind!r}")


def _wfr_config(cp, args) -> WfrConfig:
    kwargs = {}
    if cp is not None and cp.has_section("wfr"):
        sec = cp["wfr"]
        if "interval" in sec:
            kwargs["interval"] = float(sec["interval"])
        if "wfr_tol" in sec:
            kwargs["tol"] = float(sec["wfr_tol"])
        if "max_iterations" in sec:
            kwargs["max_iterations"] = int(sec["max_iterations"])
        if "scheme" in sec:
            kwargs["scheme"] = sec["scheme"]
        if "spike_detection" in sec:
            kwargs["spike_detection"] = sec.getboolean("spike_detection")
    return WfrConfig(**kwargs)


def _experiment_spec(kind, cp, args) -> ExperimentSpec:
    kwargs = {"kind": kind, "out_dir": args.out}
    if cp is not None:
        if cp.has_section("experiment"):
            sec = cp["experiment"]
            if "h_sweep" in sec:
                kwargs["h_list"] = tuple(float(x) for x in sec["h_sweep"].split())
            for key, cast in (("duration", float), ("wfr_tol", float),
                              ("rk_tol", float), ("interval", float),
                              ("v", int), ("degree", int), ("total_g", float),
                              ("i_ext", float), ("repeats", int)):
                if key in sec:
                    kwargs[key] = cast(sec[key])
            if "workers" in sec:
                kwargs["workers"] = tuple(int(x) for x in sec["workers"].split())
        if cp.has_section("neuron"):
            kwargs["params"] = _neuron_params(cp)
    if args.h:
        kwargs["h_list"] = tuple(args.h)
    if args.duration is not None:
        kwargs["duration"] = args.duration
    if args.workers is not None and kind == "scaling":
        kwargs["workers"] = (1, args.workers) if args.workers > 1 else (1,)
    kwargs["traces"] = args.traces
    if args.seed is not None:
        kwargs["seed"] = args.seed
    return ExperimentSpec(**kwargs)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="wfrsim",
        description="waveform-relaxation gap-junction network benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS + ("simulate",):
        sp = sub.add_parser(kind)
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--out", default="results", help="output directory")
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None,
                        help="reserved; default networks are deterministic")
        sp.add_argument("--traces", action="store_true",
                        help="also write per-run trace CSVs for sweep experiments")
        sp.add_argument("--h", type=float, nargs="*", default=None,
                        help="override the h sweep (ms)")
        sp.add_argument("--duration", type=float, default=None,
                        help="simulated time (ms)")
    args = parser.parse_args(argv)
    cp = _read_config(args.config) if args.config else None

    if args.command == "simulate":
        nw = _network_from_config(cp) if cp is not None else \
            build_scaled_network(2, 1, 30.0,
                                 params=NeuronParams(i_ext=DEFAULT_DRIVE))
        sim_kwargs = {"h": 0.1, "duration": 100.0}
        if cp is not None and cp.has_section("simulation"):
            sec = cp["simulation"]
            if "h" in sec:
                sim_kwargs["h"] = float(sec["h"])
            if "duration" in sec:
                sim_kwargs["duration"] = float(sec["duration"])
            if "workers" in sec:
                sim_kwargs["workers"] = int(sec["workers"])
        if cp is not None and cp.has_section("solver"):
            sec = cp["solver"]
            if "rk_atol" in sec:
                sim_kwargs["rk_atol"] = float(sec["rk_atol"])
            if "tableau" in sec:
                sim_kwargs["tableau"] = sec["tableau"]
        if args.h:
            sim_kwargs["h"] = args.h[0]
        if args.duration is not None:
            sim_kwargs["duration"] = args.duration
        if args.workers is not None:
            sim_kwargs["workers"] = args.workers
        cfg = SimulationConfig(wfr=_wfr_config(cp, args), **sim_kwargs)
        rec, stats = run_simulation(nw, cfg, args.out)
        print(f"simulated {cfg.duration} ms: {len(rec.spikes)} spikes, "
              f"mean iterations {stats.mean_iterations:.2f}, "
              f"rounds {stats.total_rounds}")
        return 0

    spec = _experiment_spec(args.command, cp, args)
    if args.workers is not None and args.command != "scaling":
        spec = ExperimentSpec(**{**spec.__dict__, "workers": (args.workers,)})
    rows = run_experiment(spec)
    print(f"{args.command}: wrote {len(rows)} result rows to {spec.out_dir}/results.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
