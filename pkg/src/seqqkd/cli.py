"""Command line front end.

Every command writes one document (JSON or CSV) that is a pure function of
its parameters: no timestamps, no host details.  Exit codes: 0 success,
1 usage or input error, 2 a session aborted because tampering was detected.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .channels import (
    best_channel_b_analyzer,
    channel_a_demo,
    channel_b_demo,
    v0_roundtrip,
    variant_security_report,
)
from .codec import (
    ALPHABETS,
    V1,
    forbidden_letters,
    get_variant,
    sequence_density,
    table_joint_probabilities,
)
from .errors import MissingIndices, SimulationError
from .photon import trace_distance
from .seeding import trial_rng
from .session import EveStrategy, SessionConfig, detection_experiment, run_session, transcript_lines
from .splitting import SplitConfig, merge, run_split_session, split_densities

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_TAMPER = 0, 1, 2

DEFAULTS: dict[str, Any] = {
    "n": 400,
    "bits": 100,
    "variant": "V1",
    "eve": "none",
    "paths": 2,
    "trials": 100,
    "seed": 0,
    "out": None,
    "format": "json",
    "workers": 1,
}

# JSON schema shared by every command's document.
DOCUMENT_SCHEMA = {
    "type": "object",
    "required": ["schema_version", "command", "meta", "result"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "command": {"enum": ["tables", "density", "qkd", "split", "eve", "variants", "merge"]},
        "meta": {
            "type": "object",
            "required": ["artifact_version", "params"],
            "properties": {
                "artifact_version": {"type": "string"},
                "params": {"type": "object"},
            },
        },
        "result": {"type": "object"},
    },
}


class UsageError(Exception):
    pass


def _fraction(x: float) -> str:
    return str(Fraction(x).limit_denominator(1 << 20))


def _document(command: str, params: dict, result: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "meta": {"artifact_version": __version__, "params": params},
        "result": result,
    }


def _csv_text(command: str, params: dict, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema_version={SCHEMA_VERSION} command={command} artifact_version={__version__}\n")
    buf.write(f"# params={json.dumps(params, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --- tables -----------------------------------------------------------------

def tables_rows(variant=V1) -> list[list[Any]]:
    """One row per (setting, letter): alpha, beta, gamma and the conclusive flag.

    A beta cell is conclusive when the letter's alphabet partner can never
    give beta under that setting, so a beta click names the letter outright.
    """
    partner = {a: b for x, y in ALPHABETS for a, b in ((x, y), (y, x))}
    rows = []
    for bank in variant.settings:
        silent = forbidden_letters(bank, variant)
        for letter, probs in table_joint_probabilities(bank, variant).items():
            conclusive = probs[1] > 0 and partner[letter] in silent
            rows.append([bank.name, letter, *probs, conclusive])
    return rows


def render_tables(rows) -> str:
    out = []
    for setting in dict.fromkeys(r[0] for r in rows):
        bank = V1.setting(setting)
        orient = " : ".join(f"{a:g}deg_{p}" for p, a in bank.orientations)
        out.append(f"Joint probabilities, {setting} = ({orient})")
        out.append(f"  {'state':<6}{'alpha':>10}{'beta':>10}{'gamma':>10}")
        for _, letter, a, b, g, conclusive in (r for r in rows if r[0] == setting):
            mark = "*" if conclusive else " "
            out.append(f"  |{letter}>   {_fraction(a):>10}{_fraction(b) + mark:>11}{_fraction(g):>9}")
        out.append("  * conclusive: identifies the letter")
        out.append("")
    return "\n".join(out)


def cmd_tables(opts: dict) -> int:
    rows = tables_rows()
    fmt = opts["format"]
    if fmt == "csv":
        text = _csv_text("tables", {}, ["setting", "letter", "alpha", "beta", "gamma", "conclusive"], rows)
    elif fmt == "json":
        result = {
            r[0]: {} for r in rows
        }
        for setting, letter, a, b, g, conclusive in rows:
            result[setting][letter] = {"alpha": a, "beta": b, "gamma": g, "conclusive": conclusive}
        text = _dump(_document("tables", {}, result))
    else:
        text = render_tables(rows)
    _emit(text, opts["out"])
    return EXIT_OK


# --- density ----------------------------------------------------------------

def density_result(variant: str, m: int) -> dict:
    v = get_variant(variant)
    if v.name == "V1":
        rho0, rho1 = split_densities(m)
    else:
        rho0, rho1 = sequence_density(0, v), sequence_density(1, v)
    dist = trace_distance(rho0, rho1)
    return {
        "rho0": rho0.to_json(),
        "rho1": rho1.to_json(),
        "trace_distance": dist,
        "equal": dist <= 1e-12,
    }


def cmd_density(opts: dict) -> int:
    params = {"variant": opts["variant"], "paths": opts["paths"]}
    res = density_result(opts["variant"], opts["paths"])
    if opts["format"] == "csv":
        rows = []
        for name in ("rho0", "rho1"):
            for i, row in enumerate(res[name]["matrix"]):
                rows.append([name, i, *(f"{re:g}{im:+g}j" for re, im in row)])
        rows.append(["trace_distance", res["trace_distance"]])
        text = _csv_text("density", params, ["matrix", "row", "entries..."], rows)
    elif opts["format"] == "json":
        text = _dump(_document("density", params, res))
    else:
        lines = []
        for name in ("rho0", "rho1"):
            mat = np.array([[re for re, _ in row] for row in res[name]["matrix"]])
            lines.append(f"{name} =")
            lines += ["  " + " ".join(f"{_fraction(x):>6}" for x in row) for row in mat]
        lines.append(f"trace distance = {res['trace_distance']:.3g} ({'equal' if res['equal'] else 'different'})")
        text = "\n".join(lines) + "\n"
    _emit(text, opts["out"])
    return EXIT_OK


# --- qkd / eve --------------------------------------------------------------

def _session_config(opts: dict) -> SessionConfig:
    return SessionConfig(
        n=int(opts["n"]),
        bits=int(opts["bits"]),
        variant=str(opts["variant"]).upper(),
        eve=EveStrategy.parse(str(opts["eve"]), opts["variant"]),
        seed=int(opts["seed"]),
    )


def cmd_qkd(opts: dict) -> int:
    config = _session_config(opts)
    result, events = run_session(config)
    params = config.to_json()
    if opts.get("transcript"):
        Path(opts["transcript"]).write_text(transcript_lines(events))
    if opts["format"] == "csv":
        rows = [[ev.index, ev.kind, json.dumps(dict(ev.payload), sort_keys=True)] for ev in events]
        text = _csv_text("qkd", params, ["index", "event", "payload"], rows)
    else:
        body = result.to_json()
        body["transcript"] = [ev.to_json() for ev in events]
        text = _dump(_document("qkd", params, body))
    _emit(text, opts["out"])
    return EXIT_TAMPER if result.aborted_at is not None else EXIT_OK


def cmd_eve(opts: dict) -> int:
    config = _session_config(opts)
    summary = detection_experiment(config, int(opts["trials"]), workers=int(opts.get("workers") or 1))
    params = {**config.to_json(), "trials": int(opts["trials"])}
    if opts["format"] == "csv":
        flat = [[k, json.dumps(v, sort_keys=True)] for k, v in summary.items()]
        text = _csv_text("eve", params, ["statistic", "value"], flat)
    else:
        text = _dump(_document("eve", params, summary))
    _emit(text, opts["out"])
    return EXIT_TAMPER if summary["aborts"] else EXIT_OK


# --- split / merge ----------------------------------------------------------

def cmd_split(opts: dict) -> int:
    config = SplitConfig(m=int(opts["paths"]), n=int(opts["n"]), bits=int(opts["bits"]), seed=int(opts["seed"]))
    res = run_split_session(config)
    params = {"paths": config.m, "n": config.n, "bits": config.bits, "seed": config.seed}
    partials = {p: {str(k): b for k, b in share.items()} for p, share in res.partials.items()}
    try:
        merged = "".join(map(str, merge(res.partials, len(res.alice_key))))
    except SimulationError:
        merged = None
    if opts["format"] == "csv":
        rows = [
            [k, res.schedule[k], res.alice_key[k], *(res.partials[p].get(k, "") for p in res.partials)]
            for k in range(len(res.alice_key))
        ]
        text = _csv_text("split", params, ["index", "carrying", "alice", *res.partials], rows)
    else:
        body = {
            "partials": partials,
            "shares": {p: len(s) for p, s in res.partials.items()},
            "alice_key": "".join(map(str, res.alice_key)),
            "merged_key": merged,
            "merged_matches": merged == "".join(map(str, res.alice_key)),
            "aborted_at": res.aborted_at,
        }
        text = _dump(_document("split", params, body))
    _emit(text, opts["out"])
    return EXIT_TAMPER if res.aborted_at is not None else EXIT_OK


def _load_partials(files: Sequence[str]) -> dict[str, dict[int, int]]:
    partials: dict[str, dict[int, int]] = {}
    for f in files:
        data = json.loads(Path(f).read_text())
        if isinstance(data, dict) and "result" in data and "partials" in data["result"]:
            for p, share in data["result"]["partials"].items():
                partials[f"{f}:{p}"] = {int(k): int(v) for k, v in share.items()}
        elif isinstance(data, dict):
            partials[f] = {int(k): int(v) for k, v in data.items()}
        else:
            raise UsageError(f"{f}: expected a JSON object mapping index to bit")
    return partials


def cmd_merge(opts: dict) -> int:
    files = opts.get("inputs") or []
    if not files:
        raise UsageError("merge needs at least one partial-key file")
    partials = _load_partials(files)
    n_bits = int(opts["bits"])
    try:
        key = merge(partials, n_bits)
    except MissingIndices as exc:
        print(f"seqqkd merge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    params = {"bits": n_bits, "inputs": [Path(f).name for f in files]}
    if opts["format"] == "csv":
        text = _csv_text("merge", params, ["index", "bit"], list(enumerate(key)))
    else:
        text = _dump(_document("merge", params, {"key": "".join(map(str, key))}))
    _emit(text, opts["out"])
    return EXIT_OK


# --- variants ---------------------------------------------------------------

def variants_result(trials: int, n: int, seed: int) -> dict:
    reports = {}
    for i, name in enumerate(("V1", "V2", "V3")):
        reports[name] = variant_security_report(name, trials, n=n, rng=trial_rng(seed, i)).to_json()
    rng = trial_rng(seed, 3)
    angle, exact = best_channel_b_analyzer()
    v0_ones = sum(v0_roundtrip(32, 1, rng).bit == 0 for _ in range(trials))
    channels = {
        "channel_a_accuracy": channel_a_demo(rng, trials),
        "channel_b_best_analyzer": angle,
        "channel_b_best_accuracy_exact": exact,
        "channel_b_accuracy": channel_b_demo(rng, trials, analyzer=angle),
        "v0_bit1_false_accept_rate_n32": v0_ones / trials,
    }
    return {"variants": reports, "channels": channels}


def render_variants(res: dict) -> str:
    cols = ["honest_accuracy", "eve_bit_accuracy", "disturbance", "rho_distance", "lucky_disturbance"]
    lines = [f"{'variant':<8}" + "".join(f"{c:>19}" for c in cols)]
    for name, rep in res["variants"].items():
        cells = "".join(f"{'-' if rep[c] is None else format(rep[c], '.4f'):>19}" for c in cols)
        lines.append(f"{name:<8}{cells}")
    lines.append("")
    lines += [f"{k}: {v:.4f}" if isinstance(v, float) else f"{k}: {v}" for k, v in res["channels"].items()]
    return "\n".join(lines) + "\n"


def cmd_variants(opts: dict) -> int:
    trials = int(opts["trials"])
    n = int(opts["n"])
    res = variants_result(trials, n, int(opts["seed"]))
    params = {"trials": trials, "n": n, "seed": int(opts["seed"])}
    if opts["format"] == "csv":
        keys = list(next(iter(res["variants"].values())).keys())
        rows = [[rep[k] for k in keys] for rep in res["variants"].values()]
        text = _csv_text("variants", params, keys, rows)
    elif opts["format"] == "json":
        text = _dump(_document("variants", params, res))
    else:
        text = render_variants(res)
    _emit(text, opts["out"])
    return EXIT_OK


COMMANDS = {
    "tables": cmd_tables,
    "density": cmd_density,
    "qkd": cmd_qkd,
    "split": cmd_split,
    "eve": cmd_eve,
    "variants": cmd_variants,
    "merge": cmd_merge,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, help="photons per operating sequence")
    common.add_argument("--bits", type=int, help="number of key bits N")
    common.add_argument("--variant", help="V1 (default), V2 or V3")
    common.add_argument("--eve", help="none | random-da | fixed:<deg> | density")
    common.add_argument("--paths", type=int, help="number of paths m for splitting / density")
    common.add_argument("--trials", type=int, help="independent trials for experiments")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--workers", type=int, help="worker processes for experiments")
    common.add_argument("--config", help="JSON file whose keys mirror the flag names")
    common.add_argument("--out", help="output file (stdout if omitted)")
    common.add_argument("--format", choices=["json", "csv", "pretty"])

    parser = argparse.ArgumentParser(prog="seqqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("tables", parents=[common], help="joint outcome probabilities per letter")
    sub.add_parser("density", parents=[common], help="sequence density matrices and their distance")
    qkd = sub.add_parser("qkd", parents=[common], help="run one key distribution session")
    qkd.add_argument("--transcript", help="also write the event log as JSON lines")
    sub.add_parser("split", parents=[common], help="run a key splitting session")
    sub.add_parser("eve", parents=[common], help="repeat sessions and summarize detection")
    sub.add_parser("variants", parents=[common], help="security contrast between variants")
    mg = sub.add_parser("merge", parents=[common], help="merge partial keys")
    mg.add_argument("inputs", nargs="*", help="partial key files or split outputs")
    return parser


def resolve_options(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if args.command in ("tables", "density", "variants"):
        opts["format"] = "pretty"
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS) - {"transcript", "inputs"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        opts.update(loaded)
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        if key == "inputs" and not value:
            continue
        opts[key] = value
    return opts


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        opts = resolve_options(args)
        return COMMANDS[args.command](opts)
    except (UsageError, SimulationError, ValueError, OSError) as exc:
        print(f"seqqkd {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
