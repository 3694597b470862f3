"""Command-line surface: code-book tooling, decoding, and the simulator.

Subcommands mirror the library one to one: codebook gen/report, encode,
decode, sync-interval, lockon, and simulate. stdout carries machine
readable output (JSON, or CSV where a command offers --csv); everything
meant for humans goes to stderr. Exit status is 0 on success, 1 on a
usage error, 2 on a domain error (bad config, unknown identifier, ...).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from . import channel, codec, scenario, signal
from .codebook import (
    codebook_from_json,
    codebook_to_json,
    generate_initial_codebook,
    generate_robust_codebook,
    necklace_count,
)

USAGE_ERROR = 1
DOMAIN_ERROR = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; the contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _load_book(path: str):
    with open(path) as fh:
        return codebook_from_json(json.load(fh))


def _parse_bits_range(text: str) -> range:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return range(int(lo), int(hi) + 1)
    n = int(text)
    return range(n, n + 1)


def _generate(n: int, mode: str):
    if mode == "initial":
        return generate_initial_codebook(n)
    return generate_robust_codebook(n)


def cmd_codebook_gen(args) -> int:
    book, lut = _generate(args.bits, args.mode)
    _emit(json.dumps(codebook_to_json(book, lut), sort_keys=True), args.out)
    return 0


def cmd_codebook_report(args) -> int:
    bits = _parse_bits_range(args.bits)
    rows = []
    for n in bits:
        initial, _ = generate_initial_codebook(n)
        entry = {
            "bits": n,
            "necklace_classes": necklace_count(n),
            "initial_size": len(initial),
        }
        if n >= 4:
            robust, _ = generate_robust_codebook(n)
            entry["robust_size"] = len(robust)
            entry["lockon_s"] = {
                str(fps): codec.lock_on_display(n, fps)
                for fps in codec.LOCKON_TABLE_FPS
            }
        rows.append(entry)
    if args.csv:
        buf = io.StringIO()
        fields = ["bits", "necklace_classes", "initial_size", "robust_size"] + [
            str(fps) for fps in codec.LOCKON_TABLE_FPS
        ]
        writer = csv.DictWriter(buf, fieldnames=fields)
        writer.writeheader()
        for entry in rows:
            flat = {k: v for k, v in entry.items() if k != "lockon_s"}
            flat.update(entry.get("lockon_s", {}))
            writer.writerow(flat)
        _emit(buf.getvalue().rstrip("\n"), args.out)
    else:
        _emit(json.dumps(rows, sort_keys=True), args.out)
    return 0


def cmd_encode(args) -> int:
    book, _ = _load_book(args.book)
    word = book.word(args.id)
    _emit(json.dumps({"identifier": args.id, "word": str(word)}), args.out)
    return 0


def _decode_stream(lut, bits: str) -> dict:
    decoder = codec.StreamDecoder(lut)
    votes = [decoder.push(int(b)).vote for b in bits]
    return {
        "votes": votes,
        "locked_identifier": decoder.identifier,
        "bits": len(bits),
    }


def cmd_decode(args) -> int:
    _, lut = _load_book(args.book)
    if args.stream:
        if any(c not in "01" for c in args.stream):
            raise ValueError("stream must be a string of 0s and 1s")
        _emit(json.dumps(_decode_stream(lut, args.stream)), args.out)
        return 0
    traces = signal.read_trace_csv(args.trace)
    result = {}
    for trace in traces:
        if args.scheme == "hue":
            bitizer = signal.HueBitizer()
            values = [s.hue for s in trace.samples]
        else:
            bitizer = signal.IntensityBitizer(lut.n)
            values = [s.intensity for s in trace.samples]
        decoder = codec.StreamDecoder(lut)
        votes = []
        for value in values:
            for bit in bitizer.push(value):
                votes.append(decoder.push(bit).vote)
        result[str(trace.track_id)] = {
            "votes": votes,
            "locked_identifier": decoder.identifier,
        }
    _emit(json.dumps(result, sort_keys=True), args.out)
    return 0


def cmd_sync_interval(args) -> int:
    print(f"{channel.sync_interval(args.delta_max, args.rho_ppm):g}")
    return 0


def cmd_lockon(args) -> int:
    if args.fps is not None:
        if args.bits is None:
            raise ValueError("--fps needs --bits")
        print(codec.lock_on_display(args.bits, args.fps))
        return 0
    table = codec.render_lockon_table()
    if args.csv:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["bits", "size"] + [str(f) for f in codec.LOCKON_TABLE_FPS])
        for n, row in table.items():
            writer.writerow(
                [n, row["size"]] + [row["lockon_s"][f] for f in codec.LOCKON_TABLE_FPS]
            )
        _emit(buf.getvalue().rstrip("\n"), args.out)
    else:
        printable = {
            str(n): {
                "size": row["size"],
                "lockon_s": {str(f): v for f, v in row["lockon_s"].items()},
            }
            for n, row in table.items()
        }
        _emit(json.dumps(printable, sort_keys=True), args.out)
    return 0


def cmd_simulate(args) -> int:
    with open(args.scenario) as fh:
        raw = json.load(fh)
    config = scenario.ScenarioConfig.from_dict(raw)
    report = scenario.run(config, debug_truth=args.debug_truth)
    _emit(report.to_json(), args.out)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="flashtrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_book = sub.add_parser("codebook", help="generate or summarize code-books")
    book_sub = p_book.add_subparsers(dest="book_command", required=True, parser_class=_Parser)

    p_gen = book_sub.add_parser("gen", help="generate one code-book as JSON")
    p_gen.add_argument("--bits", type=int, required=True)
    p_gen.add_argument("--mode", choices=("initial", "robust"), required=True)
    p_gen.add_argument("--out")
    p_gen.set_defaults(func=cmd_codebook_gen)

    p_rep = book_sub.add_parser("report", help="sizes and lock-on grid over a range of n")
    p_rep.add_argument("--bits", required=True, metavar="LO..HI")
    p_rep.add_argument("--csv", action="store_true")
    p_rep.add_argument("--out")
    p_rep.set_defaults(func=cmd_codebook_report)

    p_enc = sub.add_parser("encode", help="look up the word for an identifier")
    p_enc.add_argument("--book", required=True)
    p_enc.add_argument("--id", type=int, required=True)
    p_enc.add_argument("--out")
    p_enc.set_defaults(func=cmd_encode)

    p_dec = sub.add_parser("decode", help="decode a bit string or a trace CSV")
    p_dec.add_argument("--book", required=True)
    src = p_dec.add_mutually_exclusive_group(required=True)
    src.add_argument("--stream", help="bit string, oldest bit first")
    src.add_argument("--trace", help="trace CSV as written by the signal module")
    p_dec.add_argument("--scheme", choices=("hue", "intensity"), default="hue")
    p_dec.add_argument("--out")
    p_dec.set_defaults(func=cmd_decode)

    p_sync = sub.add_parser("sync-interval", help="heartbeat period for a desync budget")
    p_sync.add_argument("--delta-max", type=float, required=True, metavar="SECONDS")
    p_sync.add_argument("--rho-ppm", type=float, required=True)
    p_sync.set_defaults(func=cmd_sync_interval)

    p_lock = sub.add_parser("lockon", help="lock-on time (single value or full table)")
    p_lock.add_argument("--bits", type=int)
    p_lock.add_argument("--fps", type=float)
    p_lock.add_argument("--csv", action="store_true")
    p_lock.add_argument("--out")
    p_lock.set_defaults(func=cmd_lockon)

    p_sim = sub.add_parser("simulate", help="run a scenario file end to end")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--out")
    p_sim.add_argument("--debug-truth", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"flashtrack: {exc}", file=sys.stderr)
        return DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
