"""Command line: ``mmg2p {synth,train,convert,eval,gradcheck}``.

Exit codes: 0 success, 1 usage, 2 data/parse error, 3 model/checkpoint error,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import synthlang
from .experiment import MODULES, evaluate_system, gold_labels, prepare, train_module
from .lexicon import CorpusError, LexiconParseError, parse_corpus, parse_lexicon, parse_word_list
from .manifest import Manifest, ManifestError, format_kv, parse_kv
from .metrics import format_eval_rows
from .nn.checkpoint import CheckpointError, load_file, save_file
from .pipeline import Flags, G2pSystem, OovLog
from .text import Alphabet, default_table, load_table

log = logging.getLogger("mmg2p")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL, EXIT_VERIFY = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _echo(title: str, values: dict):
    print(f"# {title}", file=sys.stderr)
    for k, v in values.items():
        print(f"#   {k} = {v}", file=sys.stderr)


# data loading ------------------------------------------------------------------------

def _read(path: Path) -> str:
    return Path(path).read_text(encoding="utf-8")


def load_data(m: Manifest, seed: int):
    alphabet = Alphabet.from_file(m.path("alphabet"))
    entries = parse_lexicon(_read(m.path("lexicon")))
    corpus = parse_corpus(_read(m.path("corpus")))
    exceptions = parse_word_list(_read(m.path("exceptions"))) if "exceptions" in m.values else frozenset()
    return prepare(corpus, entries, alphabet, exceptions, seed), corpus


def load_system(m: Manifest, data, parallel: bool = False) -> G2pSystem:
    ez = "ezafe-i" if m.ezafe_model == "I" else "ezafe-ii"
    models = {}
    for module in ("oov", "homograph", ez):
        path = m.checkpoint(module)
        if not path.exists():
            raise CheckpointError(f"missing checkpoint {path}; run `mmg2p train {module}` first")
        models[module] = load_file(path, data.alphabet)
    table = default_table() if "normalization" not in m.values else load_table(
        _read(m.base / m.values["normalization"]))
    flags = Flags(skip_list=m.skip_list, beam=m.beam, seed=m.seed, parallel=parallel)
    sink = OovLog(m.path("oov_log") if "oov_log" in m.values else None)
    return G2pSystem(data.alphabet, data.dicts, models["oov"], models["homograph"], models[ez],
                     flags, sink, table)


# commands ----------------------------------------------------------------------------

def cmd_synth(args) -> int:
    values = parse_kv(_read(args.spec)) if args.spec else {}
    if args.seed is not None:
        values["seed"] = args.seed
    spec = synthlang.SynthSpec.from_dict(values)
    _echo("synth spec", {k: getattr(spec, k) for k in spec.__dataclass_fields__ if k != "rules"})
    out = synthlang.generate(spec)
    paths = out.write(args.out)
    manifest = {"alphabet": "alphabet.tsv", "lexicon": "lexicon.txt", "corpus": "corpus.tsv",
                "exceptions": "exceptions.tsv", "checkpoints": "checkpoints",
                "oov_log": "oov_log.tsv", "seed": spec.seed, "ezafe_model": "I",
                "skip_list": "on", "beam": 1}
    (Path(args.out) / "manifest.txt").write_text(format_kv(manifest), encoding="utf-8")
    for name, p in paths.items():
        print(f"{name}\t{p}")
    return EXIT_OK


def _manifest(args) -> Manifest:
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    return Manifest.load(args.manifest, overrides)


def cmd_train(args) -> int:
    m = _manifest(args)
    if not m.has_seed:
        raise UsageError("training needs a seed (manifest `seed = N` or --seed N)")
    overrides = m.overrides(args.module)
    _echo("train", {"module": args.module, "seed": m.seed, **overrides})
    data, _ = load_data(m, m.seed)
    start = time.perf_counter()
    model = train_module(args.module, data, m.seed, overrides)
    _echo("model config", {k: v for k, v in model.config.get("model", {}).items()})
    path = m.checkpoint(args.module)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_file(model, path)
    curve = path.with_suffix(".log.json")
    curve.write_text(json.dumps({"module": args.module, "seed": m.seed,
                                 "losses": model.train_log.losses}) + "\n", encoding="utf-8")
    print(f"{args.module}\t{path}\tfinal_loss={model.train_log.final_loss:.6f}")
    log.info("trained %s in %.1fs", args.module, time.perf_counter() - start)
    return EXIT_OK


def _format_results(results) -> str:
    return "".join(f"{r.token}\t{r.pron}\t{r.route}\t{r.ezafe}\n" for r in results) + "\n"


def cmd_convert(args) -> int:
    m = _manifest(args)
    _echo("convert", m.resolved())
    data, _ = load_data(m, m.seed)
    system = load_system(m, data, parallel=args.parallel)
    text = _read(args.input) if args.input and args.input != "-" else sys.stdin.read()
    lines = [line for line in text.splitlines() if line.strip()]
    start = time.perf_counter()
    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            results = list(pool.map(system.convert, lines))  # map keeps input order
    else:
        results = [system.convert(line) for line in lines]
    elapsed = time.perf_counter() - start
    system.close()
    out = "".join(_format_results(r) for r in results)
    if args.output:
        Path(args.output).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    n_words = sum(1 for r in results for w in r if w.route != "punct")
    routes = {}
    for r in results:
        for w in r:
            routes[w.route] = routes.get(w.route, 0) + 1
    print(f"# throughput {n_words / max(elapsed, 1e-9):.1f} words/s over {n_words} words; "
          f"routes {json.dumps(routes, sort_keys=True)}", file=sys.stderr)
    if "oov_log" in m.values:
        system.flush_oov_log()
    return EXIT_OK


def cmd_eval(args) -> int:
    m = _manifest(args)
    _echo("eval", m.resolved())
    data, _ = load_data(m, m.seed)
    system = load_system(m, data)
    samples = parse_corpus(_read(args.test)) if args.test else data.test
    labels = gold_labels(samples, data.entries, data.alphabet)
    summary, report, rows = evaluate_system(system, samples, labels)
    lines = report.to_jsonl().splitlines()[:-1]
    lines.append(json.dumps(summary, sort_keys=True))
    out = "\n".join(lines) + "\n"
    if args.report:
        Path(args.report).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)
    if args.rows:
        Path(args.rows).write_text(format_eval_rows(rows), encoding="utf-8")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .nn.gradcheck import run_suite

    _echo("gradcheck", {"seed": args.seed, "shapes": args.shapes})
    ok = True
    for rep in run_suite(args.seed, args.shapes):
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status}\t{rep.name}\tmax_rel_error={rep.max_rel_error:.3e}\t"
              f"tolerance={rep.tolerance:.0e}\t{rep.seconds:.2f}s")
        ok &= rep.passed
    return EXIT_OK if ok else EXIT_VERIFY


# entry point -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mmg2p", description="Multi-module grapheme-to-phoneme conversion")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate the synthetic language")
    s.add_argument("--spec", type=Path, help="key = value synth spec (defaults otherwise)")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_synth)

    def common(q):
        q.add_argument("--manifest", type=Path, required=True)
        q.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a manifest entry")
        q.add_argument("--seed", type=int)

    t = sub.add_parser("train", help="train one module")
    t.add_argument("module", choices=MODULES)
    common(t)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("convert", help="convert text lines to phonemes")
    common(c)
    c.add_argument("--input", help="text file, one sentence per line (default stdin)")
    c.add_argument("--output", type=Path)
    c.add_argument("--workers", type=int, default=1)
    c.add_argument("--parallel", action="store_true", help="run the modules concurrently")
    c.set_defaults(func=cmd_convert)

    e = sub.add_parser("eval", help="evaluate the full system")
    common(e)
    e.add_argument("--test", type=Path, help="corpus TSV (default: the held-out split)")
    e.add_argument("--report", type=Path)
    e.add_argument("--rows", type=Path)
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("gradcheck", help="finite-difference check of every layer")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--shapes", type=int, default=20)
    g.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mmg2p: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointError as exc:
        print(f"mmg2p: model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ManifestError, LexiconParseError, CorpusError, synthlang.SynthError, OSError,
            ValueError, KeyError) as exc:
        print(f"mmg2p: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
