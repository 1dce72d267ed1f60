"""``semantic-pir`` command-line tool.

Exit codes: 0 ok, 2 bad configuration or arguments, 3 lengths not divisible
as the scheme requires, 4 store file I/O, 5 reconstruction mismatch,
6 transport failure, 7 server could not bind.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from fractions import Fraction

from .. import audit, scheme1, scheme2
from ..analysis import capacity_report
from ..core import MessageStore, SemanticPIRError
from . import runner, storefile, transport, wire
from .config import ConfigError, fraction_to_json, load_config, parse_endpoints

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVISIBILITY = 3
EXIT_IO = 4
EXIT_MISMATCH = 5
EXIT_TRANSPORT = 6
EXIT_BIND = 7

log = logging.getLogger("semantic_pir")


class CLIError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _json_default(obj):
    if isinstance(obj, Fraction):
        return fraction_to_json(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serialisable")


def _emit(args, report: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(report, default=_json_default, indent=2, sort_keys=True))
    else:
        print("\n".join(lines))


def _fmt(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x} (~{float(x):.6g})"


def _config(args):
    if not args.config:
        raise CLIError(EXIT_CONFIG, "--config is required")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        raise CLIError(EXIT_CONFIG, str(exc)) from None
    if getattr(args, "scheme", None):
        cfg.scheme = "det" if args.scheme.startswith("det") else "stoch"
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise CLIError(EXIT_CONFIG, "--trials must be >= 1")
        cfg.trials = args.trials
    if getattr(args, "endpoints", None):
        try:
            cfg.endpoints = parse_endpoints(args.endpoints)
        except ConfigError as exc:
            raise CLIError(EXIT_CONFIG, str(exc)) from None
        if len(cfg.endpoints) != cfg.catalog.N:
            raise CLIError(EXIT_CONFIG, f"{len(cfg.endpoints)} endpoints for {cfg.catalog.N} databases")
    if getattr(args, "timeout", None) is not None:
        cfg.timeout = args.timeout
    return cfg


def _check_divisible(cfg) -> None:
    try:
        if cfg.scheme == "det":
            scheme1.compute_params(cfg.catalog)
        else:
            scheme2.check_divisibility(cfg.catalog)
    except (scheme1.LengthNotMultipleOfNK, scheme2.LengthNotMultipleOfNMinus1) as exc:
        raise CLIError(EXIT_DIVISIBILITY, f"{exc} (required multiple: {exc.multiple})") from None


def _store(args, cfg) -> MessageStore:
    if not args.store:
        raise CLIError(EXIT_CONFIG, "--store is required")
    try:
        store = storefile.read_store(args.store)
    except (OSError, storefile.StoreFormatError) as exc:
        raise CLIError(EXIT_IO, f"cannot read store {args.store}: {exc}") from None
    if not store.matches(cfg.catalog):
        raise CLIError(EXIT_CONFIG, f"store lengths {store.lengths} do not match catalog {cfg.catalog.lengths}")
    return store


def _databases(args, cfg, store):
    if cfg.endpoints:
        mf = getattr(args, "max_frame", None) or transport.DEFAULT_MAX_FRAME
        return [transport.RemoteDatabase(h, p, cfg.timeout, mf) for h, p in cfg.endpoints]
    return [transport.LocalDatabase(store)] * cfg.catalog.N


def cmd_capacity(args) -> int:
    cfg = _config(args)
    r = capacity_report(cfg.catalog)
    report = {
        "n_databases": cfg.catalog.N,
        "messages": [str(i) for i in cfg.catalog.ids],
        "semantic_capacity": r.semantic_capacity,
        "classical_capacity": r.classical_capacity,
        "zero_pad_rate": r.zero_pad_rate,
        "gain_lhs": r.gain_lhs,
        "gain": r.gain,
        "per_message_rates": list(r.per_message_rates),
        "expected_download": r.expected_download,
    }
    lines = [
        f"semantic capacity:   {_fmt(r.semantic_capacity)}",
        f"classical capacity:  {_fmt(r.classical_capacity)}",
        f"zero-padding rate:   {_fmt(r.zero_pad_rate)}",
        f"expected download:   {_fmt(r.expected_download)} bits",
        f"gain over classical: {'yes' if r.gain else 'no'} (condition value {r.gain_lhs})",
    ]
    lines += [f"  rate[{m.id}] = {_fmt(rate)}" for m, rate in zip(cfg.catalog.messages, r.per_message_rates)]
    _emit(args, report, lines)
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _config(args)
    _check_divisible(cfg)
    c = cfg.catalog
    if cfg.scheme == "det":
        p = scheme1.compute_params(c)
        report = {
            "scheme": "det",
            "upsilon": list(p.upsilon),
            "alpha": p.alpha,
            "subpacketizations": list(p.subpacketizations),
            "d_sub": p.d_sub,
            "total_download": p.alpha * p.d_sub,
        }
        lines = [
            f"upsilon = {p.upsilon}",
            f"alpha = {p.alpha}",
            f"U = {p.subpacketizations}",
            f"d_sub = {p.d_sub} bits per subpacket, {p.alpha * p.d_sub} bits per retrieval",
        ]
    else:
        blocks = [scheme2.block_len(c, i) for i in range(1, c.K + 1)]
        ed = scheme2.expected_download(c)
        report = {
            "scheme": "stoch",
            "block_bits": blocks,
            "options": scheme2.option_count(c),
            "expected_download": ed,
        }
        lines = [
            f"blocks per message = {c.N - 1}, block bits = {tuple(blocks)}",
            f"options = {scheme2.option_count(c)}",
            f"expected download = {_fmt(ed)} bits",
        ]
    _emit(args, report, lines)
    return EXIT_OK


def cmd_gen(args) -> int:
    cfg = _config(args)
    if not args.out:
        raise CLIError(EXIT_IO, "output path is empty")
    store = MessageStore.random(cfg.catalog.lengths, cfg.seed)
    try:
        storefile.write_store(args.out, store)
    except OSError as exc:
        raise CLIError(EXIT_IO, f"cannot write {args.out}: {exc}") from None
    size = os.path.getsize(args.out)
    _emit(args, {"path": args.out, "bytes": size, "lengths": list(store.lengths)}, [f"wrote {size} bytes to {args.out}"])
    return EXIT_OK


def _run_guarded(fn):
    try:
        return fn()
    except runner.ReconstructionMismatch as exc:
        raise CLIError(EXIT_MISMATCH, str(exc)) from None
    except (transport.TransportError, wire.RemoteError) as exc:
        raise CLIError(EXIT_TRANSPORT, str(exc)) from None


def cmd_retrieve(args) -> int:
    cfg = _config(args)
    _check_divisible(cfg)
    store = _store(args, cfg)
    c = cfg.catalog
    if args.desired is None:
        raise CLIError(EXIT_CONFIG, "--desired is required")
    try:
        d = c.index_of(args.desired)
    except KeyError:
        raise CLIError(EXIT_CONFIG, f"no message with id {args.desired!r}") from None
    dbs = _databases(args, cfg, store)
    analytic = runner.analytic_rate(c, d)

    if args.exhaustive and cfg.scheme == "stoch":
        results = _run_guarded(lambda: runner.exhaustive_stochastic(c, dbs, d, store, cfg.timeout))
        total = sum(r.transcript.downloaded_bits for r in results)
        mean = Fraction(total, len(results))
        report = {
            "scheme": "stoch",
            "desired": str(c.messages[d - 1].id),
            "options": len(results),
            "mean_download": mean,
            "useful_bits": c.length(d),
            "rate": Fraction(c.length(d)) / mean,
            "analytic_rate": analytic,
            "verified": True,
        }
        lines = [
            f"options tried: {len(results)}, all recovered exactly",
            f"mean download: {_fmt(mean)} bits",
            f"rate: {_fmt(Fraction(c.length(d)) / mean)} (analytic {analytic})",
        ]
        _emit(args, report, lines)
        return EXIT_OK

    r = _run_guarded(lambda: runner.retrieve(c, dbs, d, cfg.scheme, cfg.seed, verify_store=store, timeout=cfg.timeout))
    t = r.transcript
    report = dict(runner.transcript_summary(c, r))
    report["desired"] = str(report["desired"])
    report.update(
        scheme=cfg.scheme,
        rate=Fraction(t.useful_bits, t.downloaded_bits),
        analytic_rate=analytic,
        verified=True,
        digest=runner.transcript_digest(t),
    )
    lines = [
        f"recovered message {c.messages[d - 1].id!s} exactly ({t.useful_bits} bits)",
        f"downloaded {t.downloaded_bits} bits, rate {_fmt(report['rate'])}, analytic {analytic}",
    ]
    if cfg.scheme == "det":
        p = scheme1.compute_params(c)
        sub_rate = Fraction(p.subpacketizations[d - 1], p.d_sub)
        report["subpacket_rate"] = sub_rate
        lines.append(f"per subpacket: {p.subpacketizations[d - 1]}/{p.d_sub} useful bits")
    if r.option_index is not None:
        lines.append(f"option index {r.option_index} of {scheme2.option_count(c)}")
    _emit(args, report, lines)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    _check_divisible(cfg)
    store = _store(args, cfg)
    dbs = _databases(args, cfg, store)
    res = _run_guarded(
        lambda: runner.bench(cfg.catalog, dbs, cfg.scheme, cfg.trials, cfg.seed, store, cfg.timeout)
    )
    report = {
        "scheme": cfg.scheme,
        "trials": res.trials,
        "useful_bits": res.useful_bits,
        "downloaded_bits": res.downloaded_bits,
        "empirical_rate": res.empirical_rate,
        "capacity": res.capacity,
        "transcripts": [dict(s, desired=str(s["desired"])) for s in res.summaries],
    }
    lines = [
        f"{res.trials} retrievals, all recovered exactly",
        f"empirical rate {_fmt(res.empirical_rate)}",
        f"capacity       {_fmt(res.capacity)}",
    ]
    _emit(args, report, lines)
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = _config(args)
    _check_divisible(cfg)
    if args.empirical:
        try:
            rep = audit.audit_empirical(
                cfg.catalog, cfg.scheme, args.samples, cfg.seed, args.tv_threshold, args.chi2_alpha
            )
        except audit.InsufficientSamples as exc:
            raise CLIError(EXIT_CONFIG, str(exc)) from None
    elif cfg.scheme == "det":
        rep = audit.audit_scheme1_structural(cfg.catalog, cfg.seed)
    else:
        rep = audit.audit_scheme2_structural(cfg.catalog)
    lines = [f"{rep.mode} audit of {rep.scheme} scheme: {'PASS' if rep.passed else 'FAIL'}"]
    lines += [f"  database {n}: {'ok' if ok else 'LEAKS'}" for n, ok in enumerate(rep.per_database, start=1)]
    if rep.mode == "empirical":
        lines.append(f"  max TV distance {max(rep.tv_distances):.5f} (threshold {rep.tv_threshold:.5f})")
    _emit(args, rep.to_dict(), lines)
    return EXIT_OK if rep.passed else 1


def cmd_serve(args) -> int:
    try:
        store = storefile.read_store(args.store)
    except (OSError, storefile.StoreFormatError) as exc:
        raise CLIError(EXIT_IO, f"cannot read store {args.store}: {exc}") from None
    try:
        server = transport.DatabaseServer(store, args.host, args.port, args.db_index)
    except OSError as exc:
        raise CLIError(EXIT_BIND, f"cannot bind {args.host}:{args.port}: {exc}") from None
    host, port = server.address
    print(f"database {args.db_index} serving {store.K} messages on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semantic-pir", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, store=False, scheme=True, seed=True):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if scheme:
            p.add_argument("--scheme", choices=["det", "stoch", "deterministic", "stochastic"])
        if seed:
            p.add_argument("--seed", type=int)
        if store:
            p.add_argument("--store", help="store file")
        return p

    common(sub.add_parser("capacity", help="exact capacity and comparison rates"), scheme=False, seed=False)
    common(sub.add_parser("plan", help="scheme parameters"), seed=False)

    p = common(sub.add_parser("gen", help="write a seeded random store file"), scheme=False)
    p.add_argument("--out", "-o", required=True)

    for name, text in (("retrieve", "run one retrieval"), ("bench", "run many retrievals")):
        p = common(sub.add_parser(name, help=text), store=True)
        p.add_argument("--endpoints", help="host:port[,host:port...] in database order")
        p.add_argument("--timeout", type=float)
        p.add_argument("--max-frame", type=int, help="split QUERY frames above this many payload bytes")
        if name == "retrieve":
            p.add_argument("--desired", help="id of the wanted message")
            p.add_argument("--exhaustive", action="store_true", help="stochastic scheme: try every option")
        else:
            p.add_argument("--trials", type=int)

    p = common(sub.add_parser("audit", help="privacy audit"))
    p.add_argument("--empirical", action="store_true")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--tv-threshold", type=float)
    p.add_argument("--chi2-alpha", type=float, default=0.01)

    p = sub.add_parser("serve", help="serve one database over TCP")
    p.add_argument("--store", required=True)
    p.add_argument("--db-index", type=int, default=1)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7400)
    return parser


COMMANDS = {
    "capacity": cmd_capacity,
    "plan": cmd_plan,
    "gen": cmd_gen,
    "retrieve": cmd_retrieve,
    "bench": cmd_bench,
    "audit": cmd_audit,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    level = getattr(logging, os.environ.get("SPIR_LOG", "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except SemanticPIRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
