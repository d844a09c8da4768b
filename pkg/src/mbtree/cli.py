"""``mbtree`` command line: build, detect, eval, tune, simulate, theory."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .capture import CaptureStats, ingest
from .capture.sessions import DEFAULT_UDP_TIMEOUT
from .detect import Verdict, default_jobs, detect_hosts
from .dirpiz import DEFAULT_MAX_LEVEL, load_stoplist
from .errors import ConfigurationError, InputError, MBTreeError
from .evaluate import metrics, outcome, read_truth, sweep, write_rows
from .mltree import add_to_set, build_signature, load_signatures, merge_signatures, save_signatures
from .similarity import DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_RT_CLAMP, DEFAULT_THETA, ScoreParams
from .synthgen import load_template, write_population
from .theory import DEFAULT_P, binomial_pmf, monte_carlo_collisions, per_position_collision, suggest_threshold

log = logging.getLogger("mbtree")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class Config:
    L: int = DEFAULT_MAX_LEVEL
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    theta: float = DEFAULT_THETA
    stoplist: Optional[str] = None
    internal: Optional[str] = None
    rt_clamp: Optional[Tuple[float, float]] = DEFAULT_RT_CLAMP
    udp_timeout: float = DEFAULT_UDP_TIMEOUT
    jobs: int = 1

    def params(self) -> ScoreParams:
        return ScoreParams(self.alpha, self.beta, self.theta, self.L, self.rt_clamp)

    def prefixes(self) -> List[str]:
        return [p for p in (self.internal or "").split(",") if p.strip()]

    def stopset(self) -> frozenset:
        return load_stoplist(self.stoplist) if self.stoplist else frozenset()


CONFIG_ALIASES = {"max_level": "L", "l": "L", "max-level": "L", "rt-clamp": "rt_clamp", "udp-timeout": "udp_timeout"}


def parse_rt_clamp(value) -> Optional[Tuple[float, float]]:
    if value is None or isinstance(value, tuple):
        return value
    if str(value).strip().lower() in ("none", "off", ""):
        return None
    lo, hi = (float(v) for v in str(value).split(","))
    return (lo, hi)


def _coerce(name: str, value):
    if name == "rt_clamp":
        return parse_rt_clamp(value)
    if name in ("L", "jobs"):
        return int(value)
    if name in ("alpha", "beta", "theta", "udp_timeout"):
        return float(value)
    return str(value)


def read_config_file(path: str) -> Dict[str, object]:
    """Flat ``key = value`` file; ``#`` starts a comment, ``[sections]`` are ignored."""
    known = {f.name for f in fields(Config)}
    values: Dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.startswith("["):
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = CONFIG_ALIASES.get(key, key)
        if key not in known:
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, value.strip("\"'"))
    return values


def resolve_config(args: argparse.Namespace) -> Config:
    """Defaults, overridden by the config file, overridden by flags."""
    cfg = Config(jobs=default_jobs())
    if getattr(args, "config", None):
        for key, value in read_config_file(args.config).items():
            setattr(cfg, key, value)
    for f in fields(Config):
        flag = getattr(args, f.name, None)
        if flag is not None:
            setattr(cfg, f.name, _coerce(f.name, flag))
    cfg.params()  # validates ranges
    return cfg


def _float_list(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> List[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def read_ip_list(path: str) -> set:
    ips = {line.split("#", 1)[0].strip() for line in Path(path).read_text().splitlines()}
    ips.discard("")
    return ips


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_common(p: argparse.ArgumentParser, scoring: bool = False, capture: bool = True) -> None:
    p.add_argument("--config", help="flat key=value defaults file")
    if capture:
        p.add_argument("--internal", help="comma-separated internal CIDR prefixes")
        p.add_argument("--udp-timeout", dest="udp_timeout", type=float, help="UDP idle split, seconds")
        p.add_argument("--stoplist", help="file of DirPiz values to drop, one per line")
    if scoring:
        p.add_argument("--alpha", type=float, help="path score ratio (default 0.3)")
        p.add_argument("--beta", type=float, help="head score ratio (default 0.7)")
        p.add_argument("--theta", type=float, help="detection threshold (default 2048)")
        p.add_argument("--rt-clamp", dest="rt_clamp", help="lo,hi bounds for the time ratio or 'none'")
    p.add_argument("--jobs", type=int, help="worker processes (default: all CPUs)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mbtree", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("build", help="build or extend a signature set from malicious captures")
    p.add_argument("pcaps", nargs="+")
    p.add_argument("--cc-ips", required=True, help="file with one C&C IP per line")
    p.add_argument("--label", required=True)
    p.add_argument("-o", "--out", required=True, help="signature set JSON (merged into if present)")
    p.add_argument("--max-level", dest="L", type=int, help="sequence length L (default 10)")
    _add_common(p)

    p = sub.add_parser("detect", help="score test captures against a signature set")
    p.add_argument("pcaps", nargs="+")
    p.add_argument("--signatures", required=True)
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("-o", "--out")
    _add_common(p, scoring=True)

    p = sub.add_parser("eval", help="metrics of a detection report against ground truth")
    p.add_argument("--truth", required=True, help="host,label CSV")
    p.add_argument("--reports", required=True, help="JSONL report from detect")

    p = sub.add_parser("tune", help="sweep alpha/beta/L/theta over labelled captures")
    p.add_argument("--train", action="append", required=True, metavar="LABEL=PCAP")
    p.add_argument("--cc-ips", help="C&C IP file for the training captures (default: no whitelist)")
    p.add_argument("--test", nargs="+", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--alphas", type=_float_list, default=[DEFAULT_ALPHA])
    p.add_argument("--betas", type=_float_list, default=[DEFAULT_BETA])
    p.add_argument("--levels", type=_int_list, default=[DEFAULT_MAX_LEVEL])
    p.add_argument("--thetas", default="auto", help="comma list, or 'auto' for 10 points in [2^L, 2^(L+2)]")
    p.add_argument("-o", "--out")
    _add_common(p, scoring=True)

    p = sub.add_parser("simulate", help="write synthetic host captures from templates")
    p.add_argument("--template", action="append", required=True)
    p.add_argument("--hosts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--fragment-mtu", type=int)
    p.add_argument("--retransmit-every", type=int)

    p = sub.add_parser("theory", help="collision model utilities")
    tsub = p.add_subparsers(dest="theory_command", parser_class=_Parser)
    q = tsub.add_parser("suggest", help="threshold for a number of applications")
    q.add_argument("--L", type=int, default=DEFAULT_MAX_LEVEL)
    q.add_argument("--na", type=int, required=True)
    q.add_argument("--m", type=int, default=10)
    q.add_argument("--p", type=float, default=DEFAULT_P)
    q = tsub.add_parser("mc", help="Monte Carlo collision histogram")
    q.add_argument("--trials", type=lambda s: int(float(s)), default=10 ** 6)
    q.add_argument("--m", type=int, default=10)
    q.add_argument("--seed", type=int, default=42)
    q.add_argument("--jobs", type=int, default=1)
    return parser


def _open_out(path: Optional[str]):
    return open(path, "w", newline="") if path else sys.stdout


def cmd_build(args, cfg: Config) -> int:
    cc_ips = read_ip_list(args.cc_ips)
    stats = CaptureStats()
    hosts = ingest(args.pcaps, "training", cc_ips, cfg.prefixes(), cfg.udp_timeout, stats=stats)
    hosts = [h for h in hosts if h.sessions]
    if not hosts:
        raise InputError("no sessions with the given C&C IPs")
    stop = cfg.stopset()
    sig = merge_signatures([build_signature(h, args.label, cfg.L, stop) for h in hosts], args.label)
    sigs = []
    out = Path(args.out)
    if out.exists():
        L, sigs = load_signatures(out)
        if L != cfg.L:
            raise InputError(f"{out} uses L={L}, requested L={cfg.L}")
    sigs = add_to_set(sigs, sig)
    save_signatures(sigs, out, cfg.L)
    log.info("signature %r from %d host(s); %s", args.label, len(hosts), stats)
    return EXIT_OK


def cmd_detect(args, cfg: Config) -> int:
    L, sigs = load_signatures(args.signatures)
    if getattr(args, "L", None) not in (None, L):
        raise InputError("--max-level disagrees with the signature file")
    cfg.L = L
    params = cfg.params()
    stats = CaptureStats()
    hosts = ingest(args.pcaps, "testing", None, cfg.prefixes(), cfg.udp_timeout, stats=stats)
    started = time.perf_counter()
    reports = detect_hosts(hosts, sigs, params, cfg.stopset(), jobs=cfg.jobs)
    elapsed = time.perf_counter() - started
    fh = _open_out(args.out)
    try:
        if args.format == "csv":
            writer = csv.writer(fh)
            writer.writerow(["host", "verdict", "label", "max_log2_score"] + [s.label for s in sigs])
            for r in reports:
                writer.writerow([r.host, r.verdict.value, r.predicted_label or "", r.max_score, *r.scores])
        else:
            for r in reports:
                fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    finally:
        if fh is not sys.stdout:
            fh.close()
    per_host = elapsed / len(reports) * 1e3 if reports else 0.0
    log.info("%d host(s) scored in %.3f s (%.2f ms/host wall clock); %s", len(reports), elapsed, per_host, stats)
    return EXIT_OK


def cmd_eval(args) -> int:
    truth = read_truth(args.truth)
    outs = []
    for line in Path(args.reports).read_text().splitlines():
        if not line.strip():
            continue
        rep = json.loads(line)
        host = rep["host"]
        if host not in truth:
            log.warning("host %s missing from truth file; skipped", host)
            continue
        outs.append(outcome(host, truth[host], Verdict(rep["verdict"]), rep.get("label")))
    m = metrics(outs)
    print(json.dumps({"hosts": len(outs), "FPR": m.fpr, "FNR": m.fnr, "Acc": m.acc, "macroF1": m.macro_f1}, sort_keys=True))
    return EXIT_OK


def cmd_tune(args, cfg: Config) -> int:
    cc_ips = read_ip_list(args.cc_ips) if args.cc_ips else None
    train = []
    for item in args.train:
        label, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"--train expects LABEL=PCAP, got {item!r}")
        mode = "training" if cc_ips else "testing"
        for h in ingest(path, mode, cc_ips, cfg.prefixes(), cfg.udp_timeout):
            train.append((label, h))
    truth = read_truth(args.truth)
    test = [(h, truth.get(h.host_ip, "benign")) for h in ingest(args.test, "testing", None, cfg.prefixes(), cfg.udp_timeout)]
    thetas = None if args.thetas == "auto" else _float_list(args.thetas)
    rows = sweep(train, test, args.alphas, args.betas, args.levels, thetas, cfg.stopset(), cfg.rt_clamp, cfg.jobs)
    fh = _open_out(args.out)
    try:
        write_rows(rows, fh)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_simulate(args) -> int:
    templates = [load_template(t) for t in args.template]
    rows = write_population(
        templates, args.hosts, args.seed, args.out,
        fragment_mtu=args.fragment_mtu, retransmit_every=args.retransmit_every,
    )
    with open(Path(args.out) / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["host", "label", "pcap"])
        for path, host, label in rows:
            writer.writerow([host, label, path.name])
    log.info("wrote %d capture(s) to %s", len(rows), args.out)
    return EXIT_OK


def cmd_theory(args) -> int:
    if args.theory_command == "suggest":
        s = suggest_threshold(args.L, args.na, args.m, args.p)
        out = {"n": s.n, "theta": s.theta}
        if s.reference_n is not None:
            out.update(reference_n=s.reference_n, reference_theta=s.reference_theta)
        print(json.dumps(out, sort_keys=True))
        return EXIT_OK
    if args.theory_command == "mc":
        emp = monte_carlo_collisions(args.trials, args.m, "uniform", args.seed, jobs=args.jobs)
        exact = binomial_pmf(args.m, per_position_collision("uniform"))
        for n, (e, x) in enumerate(zip(emp, exact)):
            print(f"{n}\t{e:.6e}\t{x:.6e}")
        return EXIT_OK
    raise UsageError("theory needs a subcommand: suggest or mc")


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if not argv:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "theory":
            return cmd_theory(args)
        cfg = resolve_config(args)
        return {"build": cmd_build, "detect": cmd_detect, "tune": cmd_tune}[args.command](args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (MBTreeError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())
