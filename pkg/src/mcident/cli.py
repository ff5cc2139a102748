"""Command-line front end.

Every subcommand prints its result as JSON (trajectories and shuffle
records as plain text).  With ``--out`` the result is also written to that
file, CSV for tabular commands, JSON or text otherwise, next to a
``<out>.manifest.json`` holding the resolved configuration, the SHA-256
of the output and the wall time.  Wall time never enters the output
itself, so one configuration always reproduces the same bytes.

``--config FILE`` reads a JSON object whose keys are option names of the
subcommand (dashes or underscores), plus optional ``command``, ``seed``
and ``jobs``.  Flags given on the command line win over the file.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .calibrate import calibrate_chi2_edge, calibrate_symmetric
from .chain_sim import sample_trajectory
from .distance import (
    chain_distance,
    minimal_distinguishing_length,
    tv_distinguishing_interval,
    word_report,
)
from .errors import ConfigError, MCIdentError
from .experiments import EXPERIMENTS
from .hard import power_curve
from .io import (
    _load_json,
    chain_from_dict,
    format_shuffles,
    format_states,
    format_words,
    load_matrix,
    matrix_from_dict,
    parse_shuffles,
    parse_states,
    parse_words,
    rows_to_csv,
    sha256_text,
)
from .profiles import Constants, ThresholdProfile
from .rng import make_rng, resolve_seed
from .runner import default_jobs
from .shuffle import (
    biased_gsr_model,
    build_grid_chain,
    encode_shuffle,
    path_to_word,
    riffle,
    sample_identity_path,
    void_path,
)
from .sparse import chi2_edge_test, default_m_for, sample_rounds
from .symmetric import recommended_trajectory_length, test_identity_symmetric
from .verdict import _plain

COMMANDS = ("distance", "simulate", "test-symmetric", "test-sparse", "test-shuffle",
            "shuffle-simulate", "lowerbound", "calibrate", "experiment")


class Result:
    """What a subcommand produced: table rows, a JSON payload or raw text."""

    def __init__(self, rows=None, payload=None, text=None):
        self.rows = rows or []
        self.payload = payload
        self.text = text

    def render(self, out: str | None) -> str:
        if self.text is not None:
            return self.text
        if out is not None and out.endswith(".csv"):
            return rows_to_csv(self.rows)
        return json.dumps(_plain(self.payload), indent=2, sort_keys=True) + "\n"


# ---- loaders ----

def _load_any_chain(path):
    """StochasticMatrix or SparseChain, told apart by the 'layers' key."""
    d = _load_json(path)
    if isinstance(d, dict) and "layers" in d:
        return chain_from_dict(d, str(path))
    return matrix_from_dict(d, str(path))


def _load_sparse(path):
    d = _load_json(path)
    if not isinstance(d, dict) or "layers" not in d:
        raise ConfigError(f"{path}: expected a sparse chain with 'layers'")
    return chain_from_dict(d, str(path))


def _load_constants_or_profile(path):
    """``--constants`` accepts a constants file or a threshold profile."""
    if path is None:
        return Constants(), None
    d = _load_json(path)
    if isinstance(d, dict) and "kind" in d:
        return Constants(), ThresholdProfile.load(path)
    return Constants.load(path), None


def _start(spec, n):
    if spec is None or spec == "uniform":
        return np.full(n, 1.0 / n)
    try:
        s = int(spec)
    except ValueError:
        raise ConfigError(f"--start must be a state index or 'uniform', got {spec!r}") from None
    if not 0 <= s < n:
        raise ConfigError(f"--start {s} is not a state of a {n}-state chain")
    return s


def _need(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"{args.command}: missing {', '.join(missing)}")


# ---- subcommands ----

def cmd_distance(args) -> Result:
    _need(args, "p", "q")
    P, Q = load_matrix(args.p), load_matrix(args.q)
    d = chain_distance(P, Q)
    row = {"spectral_distance": d}
    try:
        row["minimal_length"] = minimal_distinguishing_length(P, Q, args.mode, _start(args.start, P.n)
                                                              if args.mode == "average" else None)
        lo, hi = tv_distinguishing_interval(P, Q, args.mode, _start(args.start, P.n)
                                            if args.mode == "average" else None)
        row["tv_length_lo"], row["tv_length_hi"] = lo, hi
    except MCIdentError as e:  # no finite length when the chains share an essential class
        row["minimal_length"] = row["tv_length_lo"] = row["tv_length_hi"] = None
        row["note"] = str(e)
    if args.length is not None:
        rep = word_report(P, Q, _start(args.start, P.n), args.length)
        row.update({"length": rep.length, "hellinger_sq": rep.hellinger_sq,
                    "tv_lower": rep.tv_lower, "tv_upper": rep.tv_upper})
    return Result([row], row)


def cmd_simulate(args, seed) -> Result:
    _need(args, "chain", "m")
    chain = _load_any_chain(args.chain)
    if hasattr(chain, "layers"):
        return Result(text=format_words(sample_rounds(chain, args.m, seed)))
    lines = []
    for r in range(args.count):
        w = sample_trajectory(chain, _start(args.start, chain.n), args.m, (seed, r))
        lines.append(format_states(w.states))
    return Result(text="".join(lines))


def cmd_test_symmetric(args, seed) -> Result:
    _need(args, "chain", "epsilon")
    Q = load_matrix(args.chain)
    constants, profile = _load_constants_or_profile(args.constants)
    if args.profile is not None:
        profile = ThresholdProfile.load(args.profile)
    if args.trajectory is not None:
        w = parse_states(Path(args.trajectory).read_text(), args.trajectory)
    else:
        src = load_matrix(args.sample_from) if args.sample_from else Q
        m = args.m if args.m is not None else recommended_trajectory_length(Q, args.epsilon, constants)
        w = sample_trajectory(src, _start(args.start, src.n), m, (seed, 0)).states
    v = test_identity_symmetric(Q, w, args.epsilon, (seed, 1), constants, profile, args.tau)
    d = v.to_dict()
    return Result([_verdict_row(d)], d)


def _verdict_row(d):
    row = {"decision": d["decision"], "reason": d["reason"],
           "statistic": d["statistic"], "threshold": d["threshold"]}
    row.update({k: v for k, v in d["diagnostics"].items() if np.isscalar(v) or v is None})
    return row


def _sparse_verdict(Q, words, args, seed) -> Result:
    profile = ThresholdProfile.load(args.profile) if args.profile else None
    v = chi2_edge_test(Q, words, args.epsilon, (seed, 1), m=args.m, threshold=args.threshold,
                       threshold_profile=profile)
    d = v.to_dict()
    return Result([_verdict_row(d)], d)


def cmd_test_sparse(args, seed) -> Result:
    _need(args, "chain", "epsilon")
    Q = _load_sparse(args.chain)
    if args.words is not None:
        words = parse_words(Path(args.words).read_text(), args.words)
    else:
        _need(args, "m")
        src = _load_sparse(args.sample_from) if args.sample_from else Q
        words = sample_rounds(src, max(math.ceil(args.m + 3.0 * math.sqrt(args.m)), 1), (seed, 0))
    return _sparse_verdict(Q, words, args, seed)


def _model(args):
    return biased_gsr_model(args.n_cards, args.cut_bias, args.drop_bias)


def cmd_test_shuffle(args, seed) -> Result:
    _need(args, "shuffles", "epsilon")
    recs = parse_shuffles(Path(args.shuffles).read_text(), args.shuffles)
    if not recs:
        raise ConfigError(f"{args.shuffles}: no shuffle records")
    n = len(recs[0][0])
    if args.n_cards is not None and args.n_cards != n:
        raise ConfigError(f"{args.shuffles}: decks have {n} cards, --n-cards says {args.n_cards}")
    args.n_cards = n
    model = _model(args)
    words = []
    voids = 0
    for i, (before, after) in enumerate(recs, start=1):
        if len(before) != n:
            raise ConfigError(f"{args.shuffles}:{i}: deck size {len(before)} differs from {n}")
        try:
            path = encode_shuffle(before, after)
        except MCIdentError as e:
            raise type(e)(f"{args.shuffles}: record {i}: {e}") from None
        if path == void_path(n) and args.void == "resample":
            path = sample_identity_path(model, (seed, 2, i))
            voids += 1
        words.append(path_to_word(path))
    Q = build_grid_chain(model)
    if args.m is None:
        args.m = default_m_for(len(words))
    res = _sparse_verdict(Q, np.array(words), args, seed)
    res.payload["diagnostics"]["void_records_resampled"] = voids
    res.rows[0]["void_records_resampled"] = voids
    return res


def cmd_shuffle_simulate(args, seed) -> Result:
    _need(args, "n_cards", "count")
    model = _model(args)
    deck = [str(c) for c in range(1, args.n_cards + 1)]
    recs = [(deck, riffle(model, deck, make_rng((seed, i))).deck) for i in range(args.count)]
    return Result(text=format_shuffles(recs))


def cmd_lowerbound(args, seed, jobs) -> Result:
    _need(args, "family", "n", "epsilon", "m_grid", "trials")
    constants, profile = _load_constants_or_profile(args.constants)
    rows = power_curve(args.family, args.n, args.epsilon, args.m_grid, args.trials, seed, jobs,
                       args.alternative_distance, constants, profile, args.threshold)
    rows = [{"family": args.family, "n": args.n, "epsilon": args.epsilon, **r} for r in rows]
    return Result(rows, {"rows": rows})


def cmd_calibrate(args, seed, jobs) -> Result:
    _need(args, "kind", "epsilon", "m")
    base = ThresholdProfile.load(args.profile) if args.profile else None
    if args.kind == "iid":
        _need(args, "chain")
        constants, _ = _load_constants_or_profile(args.constants)
        prof = calibrate_symmetric(load_matrix(args.chain), args.epsilon, int(args.m), args.trials, seed,
                                   args.percentile, constants, base)
    elif args.kind == "chi2-edge":
        if args.chain is not None:
            Q = _load_sparse(args.chain)
        elif args.n_cards is not None:
            Q = build_grid_chain(_model(args))
        else:
            raise ConfigError("calibrate --kind chi2-edge needs --chain or --n-cards")
        prof = calibrate_chi2_edge(Q, args.epsilon, args.m, args.trials, seed, args.percentile, jobs, base)
    else:
        raise ConfigError(f"unknown calibration kind {args.kind!r}")
    d = prof.to_dict()
    return Result(d["entries"], d)


def cmd_experiment(args, seed, jobs) -> Result:
    _need(args, "name")
    if args.name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {args.name!r}; choose from {sorted(EXPERIMENTS)}")
    params = dict(args.params or {})
    params.setdefault("seed", seed)
    params.setdefault("jobs", jobs)
    res = EXPERIMENTS[args.name](params)
    seconds = res.pop("seconds")
    res["params"] = {k: v for k, v in res["params"].items() if k != "jobs"}
    row = {"experiment": args.name, **{k: v for k, v in res.items()
                                       if k != "params" and (np.isscalar(v) or v is None)}}
    out = Result([row], {"experiment": args.name, **res})
    out.seconds = seconds
    return out


# ---- parser ----

def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise argparse.ArgumentTypeError(f"invalid JSON: {e.msg}") from None


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mcident", description="Identity testing of Markov chains.")
    ap.add_argument("--version", action="version", version=f"mcident {__version__}")
    glob = argparse.ArgumentParser(add_help=False)
    glob.add_argument("--seed", type=int, default=None, help="master seed (default $MCIDENT_SEED or 0)")
    glob.add_argument("--config", default=None, help="JSON file with option values")
    glob.add_argument("--out", default=None, help="output file; a manifest is written beside it")
    glob.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("distance", parents=[glob], help="spectral and word distances of two chains")
    p.add_argument("--p")
    p.add_argument("--q")
    p.add_argument("--length", type=int)
    p.add_argument("--start", default=None, help="state index or 'uniform'")
    p.add_argument("--mode", choices=("worst", "average"), default="worst")

    p = sub.add_parser("simulate", parents=[glob], help="sample trajectories or round words")
    p.add_argument("--chain")
    p.add_argument("--m", type=int)
    p.add_argument("--start", default=None)
    p.add_argument("--count", type=int, default=1)

    p = sub.add_parser("test-symmetric", parents=[glob], help="test a trajectory against a symmetric chain")
    p.add_argument("--chain")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--trajectory")
    p.add_argument("--m", type=int)
    p.add_argument("--sample-from")
    p.add_argument("--start", default=None)
    p.add_argument("--constants", help="constants file or threshold profile")
    p.add_argument("--profile")
    p.add_argument("--tau", type=float)

    for name, help_ in (("test-sparse", "test round words against a sparse chain"),
                        ("test-shuffle", "test riffle shuffle records against a shuffle model")):
        p = sub.add_parser(name, parents=[glob], help=help_)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--m", type=float)
        p.add_argument("--threshold", type=float)
        p.add_argument("--profile")
        if name == "test-sparse":
            p.add_argument("--chain")
            p.add_argument("--words")
            p.add_argument("--sample-from")
        else:
            p.add_argument("--shuffles")
            p.add_argument("--n-cards", type=int)
            p.add_argument("--cut-bias", type=float, default=0.5)
            p.add_argument("--drop-bias", type=float, default=1.0)
            p.add_argument("--void", choices=("resample", "canonical"), default="resample",
                           help="walk used for unchanged decks")

    p = sub.add_parser("shuffle-simulate", parents=[glob], help="sample riffle shuffle records")
    p.add_argument("--n-cards", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--cut-bias", type=float, default=0.5)
    p.add_argument("--drop-bias", type=float, default=1.0)

    p = sub.add_parser("lowerbound", parents=[glob], help="power curve on a lower-bound family")
    p.add_argument("--family", choices=("symmetric", "sparse"))
    p.add_argument("--n", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--m-grid", type=_floats)
    p.add_argument("--trials", type=int)
    p.add_argument("--alternative-distance", type=float)
    p.add_argument("--constants")
    p.add_argument("--threshold", type=float)

    p = sub.add_parser("calibrate", parents=[glob], help="calibrate a threshold profile by null simulation")
    p.add_argument("--kind", choices=("iid", "chi2-edge"))
    p.add_argument("--chain")
    p.add_argument("--n-cards", type=int)
    p.add_argument("--cut-bias", type=float, default=0.5)
    p.add_argument("--drop-bias", type=float, default=1.0)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--m", type=float)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--percentile", type=float, default=0.9)
    p.add_argument("--constants")
    p.add_argument("--profile", help="existing profile to extend")

    p = sub.add_parser("experiment", parents=[glob], help="run a named acceptance experiment")
    p.add_argument("name", nargs="?", choices=sorted(EXPERIMENTS))
    p.add_argument("--params", type=_json_arg, default=None, help="JSON object of experiment parameters")
    return ap


def _apply_config(ap, argv):
    """Prepend the config's command if absent and install its values as defaults."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return argv, {}
    cfg = _load_json(known.config)
    if not isinstance(cfg, dict):
        raise ConfigError(f"{known.config}: expected a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    command = cfg.pop("command", None)
    if not any(a in COMMANDS for a in argv):
        if command is None:
            raise ConfigError(f"{known.config}: no subcommand given and no 'command' key")
        argv = [command] + list(argv)
    cmd = next(a for a in argv if a in COMMANDS)
    if command is not None and command != cmd:
        raise ConfigError(f"{known.config}: config is for {command!r}, not {cmd!r}")
    sp = ap._subparsers._group_actions[0].choices[cmd]
    dests = {a.dest for a in sp._actions}
    unknown = sorted(set(cfg) - dests)
    if unknown:
        raise ConfigError(f"{known.config}: unknown option(s) for {cmd}: {unknown}")
    if "m_grid" in cfg and isinstance(cfg["m_grid"], str):
        cfg["m_grid"] = _floats(cfg["m_grid"])
    sp.set_defaults(**cfg)
    return argv, cfg


def _run(args) -> Result:
    seed = resolve_seed(args.seed)
    jobs = default_jobs() if args.jobs is None else args.jobs
    args.seed, args.jobs = seed, jobs
    handler = {
        "distance": lambda: cmd_distance(args),
        "simulate": lambda: cmd_simulate(args, seed),
        "test-symmetric": lambda: cmd_test_symmetric(args, seed),
        "test-sparse": lambda: cmd_test_sparse(args, seed),
        "test-shuffle": lambda: cmd_test_shuffle(args, seed),
        "shuffle-simulate": lambda: cmd_shuffle_simulate(args, seed),
        "lowerbound": lambda: cmd_lowerbound(args, seed, jobs),
        "calibrate": lambda: cmd_calibrate(args, seed, jobs),
        "experiment": lambda: cmd_experiment(args, seed, jobs),
    }[args.command]
    return handler()


def _manifest(args, out: str, content: str, seconds: float) -> dict:
    config = {k: v for k, v in vars(args).items() if k not in ("out", "config", "jobs")}
    return {
        "tool": "mcident",
        "version": __version__,
        "command": args.command,
        "config": _plain(config),
        "config_file": args.config,
        "output": out,
        "sha256": sha256_text(content),
        "jobs": args.jobs,
        "wall_seconds": seconds,
    }


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        argv, _ = _apply_config(ap, argv)
        args = ap.parse_args(argv)
        if args.command is None:
            ap.print_help(sys.stderr)
            return 2
        t0 = time.perf_counter()
        res = _run(args)
        seconds = getattr(res, "seconds", time.perf_counter() - t0)
        content = res.render(args.out)
        if args.out is not None:
            Path(args.out).write_text(content)
            Path(args.out + ".manifest.json").write_text(
                json.dumps(_manifest(args, args.out, content, seconds), indent=2, sort_keys=True) + "\n")
        if res.text is not None and args.out is not None:
            return 0
        sys.stdout.write(content if res.text is not None else res.render(None))
        return 0
    except (MCIdentError, OSError, ValueError) as e:
        print(f"mcident: error: {e}", file=sys.stderr)
        return 2
