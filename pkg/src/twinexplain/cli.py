"""Command line: ``twinexplain {learn-profile,discover,evaluate,synth}``.

Exit codes: 0 success, 1 module error, 2 missing input or empty input set,
3 failed precondition (no action at the requested time), 4 invalid config or
argument value.

Outputs
-------
discover writes ``edges.txt`` (one ``cause_agent t -> effect_agent t distance``
line per causal link) and ``report.json`` (agents, actions, every tested pair
with its plans and distance, links with explanations, learned profiles).
evaluate writes a comma-separated table with columns
threshold,tp,fp,fn,tn,precision,recall,fpr,f1 (``none`` for undefined values).
Values from a ``--config`` file take precedence over command-line flags.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .causal import SceneAnalysis, explain, top_motive
from .config import ConfigError, RunConfig, config_from_dict, load_config
from .data_io.convoy import extract_convoy_scenes
from .data_io.highd import load_recording
from .data_io.scene import MalformedRecord, SceneModel, read_scene, write_scene
from .data_io.synth import TEMPLATES, ScenarioSpec, UnknownTemplate, synth_scene
from .evaluation import (DEFAULT_THRESHOLDS, UnlabelledScene, best_f1, format_table,
                         scene_graphs, sweep_graphs)
from .reward import FEATURE_NAMES

REPORT_FORMAT = "twinexplain-report/1"
PROFILE_FORMAT = "twinexplain-profile/1"
log = logging.getLogger("twinexplain")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def _config(args) -> RunConfig:
    """Defaults, then flags, then the config file on top."""
    flags = {}
    if getattr(args, "seed", None) is not None:
        flags["seed"] = args.seed
    if getattr(args, "threshold", None) is not None:
        flags["action"] = {"threshold": args.threshold}
    try:
        cfg = config_from_dict(flags)
        return load_config(args.config, cfg) if args.config else cfg
    except FileNotFoundError as e:
        raise CliError(f"config file not found: {e}", 2) from e
    except ConfigError as e:
        raise CliError(f"invalid config: {e}", 4) from e


def _read_scene(path: str) -> SceneModel:
    if not Path(path).is_file():
        raise CliError(f"scene file not found: {path}", 2)
    try:
        return read_scene(path)
    except (MalformedRecord, KeyError, TypeError, ValueError) as e:
        raise CliError(f"cannot read scene {path}: {e}", 1) from e


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------

def cmd_learn_profile(args) -> int:
    cfg = _config(args)
    scene = _read_scene(args.scene)
    if args.agent not in scene.agents:
        raise CliError(f"agent {args.agent!r} not in scene (agents: {', '.join(scene.agents)})", 3)
    an = SceneAnalysis(scene, cfg.engine)
    tol = 0.5 / scene.track(args.agent).frame_rate
    pair = next((p for p in an.actions[args.agent] if abs(p.t_a - args.t) <= tol), None)
    if pair is None:
        times = ", ".join(f"{p.t_a:g}" for p in an.actions[args.agent])
        raise CliError(f"agent {args.agent} has no action at t={args.t:g} (actions at {times})",
                       3)
    info = an.effect_info(pair)
    if info.error is not None:
        raise CliError(f"profile learning failed: {info.error}", 1)
    p = info.profile
    record = {
        "format": PROFILE_FORMAT,
        "scene": scene.name,
        "action": pair.to_dict(),
        "weights": dict(zip(FEATURE_NAMES, p.weights)),
        "top_motive": top_motive(p),
        "diagnostics": {
            "candidates": len(info.candidates),
            "hypotheticals": len(info.candidates) + int(cfg.planner.include_observed),
            "rank": p.rank, "rank_deficient": p.rank_deficient, "residual": p.residual,
        },
        "observed_outcome": info.observed.to_dict(),
        "seed": cfg.seed,
    }
    text = _dump(record)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def discover_report(scene: SceneModel, cfg: RunConfig) -> tuple[dict, str]:
    an = SceneAnalysis(scene, cfg.engine)
    g = an.discover()
    lam = cfg.action.threshold
    tests = []
    for r in g.tests:
        tests.append({
            "cause": r.cause.to_dict(), "effect": r.effect.to_dict(), "distance": r.distance,
            "causal": r.link(lam) is not None,
            "factual_plan": r.factual_plan.to_dict() if r.factual_plan else None,
            "counterfactual_plan": (r.counterfactual_plan.to_dict()
                                    if r.counterfactual_plan else None),
            "error": r.error,
        })
    links, lines = [], []
    for e in g.edges:
        text = explain(e, g.profiles[e.effect])
        links.append({"cause": e.cause.to_dict(), "effect": e.effect.to_dict(),
                      "distance": e.distance, "explanation": text})
        lines.append(f"{e.cause.agent} {e.cause.t_a:.2f} -> {e.effect.agent} "
                     f"{e.effect.t_a:.2f} {e.distance:.6f}")
    profiles = [{"effect": eff.to_dict(), "weights": dict(zip(FEATURE_NAMES, p.weights)),
                 "rank": p.rank, "residual": p.residual, "top_motive": top_motive(p)}
                for eff, p in sorted(g.profiles.items(), key=lambda kv: (kv[0].t_a, kv[0].agent))]
    report = {
        "format": REPORT_FORMAT,
        "scene": scene.name,
        "agents": list(scene.agents),
        "threshold": lam,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "actions": [p.to_dict() for p in g.vertices],
        "tests": tests,
        "links": links,
        "adjacency": sorted(list(e) for e in g.agent_adjacency),
        "failures": len(g.failures),
        "profiles": profiles,
    }
    return report, "".join(l + "\n" for l in lines)


def cmd_discover(args) -> int:
    cfg = _config(args)
    scene = _read_scene(args.scene)
    if len(scene.agents) < 2:
        log.warning("scene has fewer than two agents; no pairs to test")
    report, edges = discover_report(scene, cfg)
    out = _out_dir(args, cfg)
    (out / "report.json").write_text(_dump(report))
    (out / "edges.txt").write_text(edges)
    for link in report["links"]:
        print(link["explanation"])
    print(f"{len(report['links'])} causal link(s); report written to {out / 'report.json'}")
    return 0


def _collect_scenes(src: Path, cfg: RunConfig) -> list[SceneModel]:
    """Native scene documents plus convoy scenes cut from highD-layout recordings."""
    scenes = []
    for p in sorted(src.glob("*.json")):
        scenes.append(_read_scene(str(p)))
    for tracks in sorted(src.glob("*_tracks.csv")):
        stem = tracks.name[:-len("_tracks.csv")]
        meta = src / f"{stem}_recordingMeta.csv"
        tmeta = src / f"{stem}_tracksMeta.csv"
        if not meta.exists():
            raise CliError(f"recording meta not found: {meta}", 2)
        try:
            rec = load_recording(tracks, meta, meta, tmeta if tmeta.exists() else None)
        except MalformedRecord as e:
            raise CliError(str(e), 1) from e
        c = cfg.convoy
        scenes += extract_convoy_scenes(rec, c.gap_max, c.window, c.max_independent)
    return scenes


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    src = Path(args.scenes_dir)
    if not src.is_dir():
        raise CliError(f"scenes directory not found: {src}", 2)
    thresholds = DEFAULT_THRESHOLDS
    if args.thresholds:
        try:
            thresholds = tuple(float(x) for x in args.thresholds.split(",") if x.strip())
        except ValueError as e:
            raise CliError(f"bad --thresholds: {args.thresholds}", 4) from e
        if not thresholds or any(not t >= 0 for t in thresholds):
            raise CliError("thresholds must be non-negative numbers", 4)
    scenes = _collect_scenes(src, cfg)
    if not scenes:
        raise CliError(f"no scenes found in {src}", 2)
    try:
        graphs = scene_graphs(scenes, cfg.engine)
    except UnlabelledScene as e:
        raise CliError(str(e), 4) from e
    reports = sweep_graphs(scenes, graphs, thresholds)
    table = format_table(reports)
    out = Path(args.out) if args.out else _out_dir(args, cfg) / "roc.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(table)
    best = best_f1(reports)
    print(f"{len(scenes)} scene(s); table written to {out}")
    if best is not None:
        print(f"best F1 {best.f1:.4f} at threshold {best.threshold:g} "
              f"(precision {best.precision:.4f}, recall {best.recall:.4f}, "
              f"fpr {'none' if best.fpr is None else f'{best.fpr:.4f}'})")
    else:
        print("F1 undefined at every threshold")
    return 0


def scene_seeds(seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1)[0]) for c in children]


def cmd_synth(args) -> int:
    cfg = _config(args)
    if args.count < 1:
        raise CliError("--count must be at least 1", 4)
    try:
        spec = ScenarioSpec(args.template)
    except UnknownTemplate as e:
        raise CliError(str(e), 4) from e
    out = _out_dir(args, cfg)
    for i, s in enumerate(scene_seeds(cfg.seed, args.count)):
        scene = synth_scene(spec, s)
        write_scene(scene, out / f"{args.template}-{i:03d}.json")
    print(f"wrote {args.count} {args.template} scene(s) to {out}")
    return 0


class _Parser(argparse.ArgumentParser):
    # usage errors share the config/argument exit code; 2 means missing input here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(4, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="twinexplain",
                                 description="Causal discovery and explanation for driving scenes")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, threshold=False):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output file or directory")
        if threshold:
            p.add_argument("--threshold", type=float, help="causal threshold on plan distance")

    p = sub.add_parser("learn-profile", help="learn one decision's reward profile")
    p.add_argument("scene")
    p.add_argument("--agent", required=True)
    p.add_argument("--t", type=float, required=True, help="action time in seconds")
    common(p)
    p.set_defaults(func=cmd_learn_profile)

    p = sub.add_parser("discover", help="causal graph and explanations for one scene")
    p.add_argument("scene")
    common(p, threshold=True)
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("evaluate", help="threshold sweep over labelled scenes")
    p.add_argument("scenes_dir")
    p.add_argument("--thresholds", help="comma-separated list, default 0.0,0.1,...,1.0")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="write synthetic labelled scenes")
    p.add_argument("--template", required=True, help=f"one of {', '.join(TEMPLATES)}")
    p.add_argument("--count", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except Exception as e:  # module errors end the run with a message, not a traceback
        log.debug("unhandled", exc_info=True)
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
