"""Command-line front end: estimation, prediction, coding, tests, harness.

Every command prints a JSON report on standard output (or to --out) and
sets the exit code: 0 success or accept, 1 reject (tests and the Monte
Carlo bound check), 2 usage error, 3 data error.  Errors emit a
machine-readable {"error", "detail"} object on standard error.

Symbol files are UTF-8 text, blank-line separated samples.  When every
alphabet label is a single character (the default numeric labels up to
size 10), each line is a contiguous string of symbols; otherwise one
token per line.  Real-valued files hold one value per line, or two
comma-separated columns (x,y) for side-information experiments.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent import futures

import numpy as np

from . import coding, estimators, realvalued, testing
from .estimators import MarkovSource, MixtureEstimator, r_log2prob
from .seqmodel import Alphabet, MultiSample, SymbolSeq

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_USAGE = 2
EXIT_DATA = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# Input handling


def _parse_alphabet(spec: str | None) -> Alphabet | None:
    if spec is None:
        return None
    if "," in spec:
        return Alphabet(tuple(tok.strip() for tok in spec.split(",")))
    if spec.isdigit():
        return Alphabet.of_size(int(spec))
    raise ValueError(f"--alphabet must be a size or a comma-separated label list, got {spec!r}")


def _char_mode(alphabet: Alphabet) -> bool:
    return all(len(lbl) == 1 for lbl in alphabet.labels)


def _read_blocks(path: str) -> list[list[str]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    blocks: list[list[str]] = []
    cur: list[str] = []
    for line in lines:
        if line.strip():
            cur.append(line.strip())
        elif cur:
            blocks.append(cur)
            cur = []
    if cur:
        blocks.append(cur)
    if not blocks:
        raise ValueError(f"no symbols found in {path}")
    return blocks


def _read_symbols(path: str, alphabet: Alphabet | None):
    blocks = _read_blocks(path)
    if alphabet is None:
        chars = sorted({c for block in blocks for line in block for c in line})
        alphabet = Alphabet(tuple(chars))
    samples = []
    for block in blocks:
        if _char_mode(alphabet):
            tokens = [c for line in block for c in line]
        else:
            tokens = block
        samples.append(SymbolSeq.from_labels(alphabet, tokens))
    return MultiSample(samples) if len(samples) > 1 else samples[0], alphabet


def _parse_word(text: str, alphabet: Alphabet) -> list[int]:
    tokens = list(text) if _char_mode(alphabet) else text.split(",")
    return [alphabet.index(tok) for tok in tokens]


def _read_reals(path: str):
    xs, ys = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            parts = [p for p in line.replace(",", " ").split() if p]
            if len(parts) not in (1, 2):
                raise ValueError(f"{path}:{lineno}: expected one or two columns")
            xs.append(float(parts[0]))
            if len(parts) == 2:
                ys.append(float(parts[1]))
    if ys and len(ys) != len(xs):
        raise ValueError(f"{path}: ragged two-column data")
    x = np.asarray(xs)
    return (x, np.asarray(ys)) if ys else (x, None)


def _parse_domain(spec: str) -> tuple[float, float]:
    try:
        lo, hi = spec.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise ValueError(f"--domain must look like a:b, got {spec!r}") from None


def _format_symbols(x, alphabet: Alphabet) -> str:
    samples = x.samples if isinstance(x, MultiSample) else [x]
    chunks = []
    for s in samples:
        labels = s.to_labels()
        chunks.append("".join(labels) if _char_mode(alphabet) else "\n".join(labels))
    return "\n\n".join(chunks) + "\n"


def _provider(args, alphabet=None):
    name = getattr(args, "provider", "ideal-r") or "ideal-r"
    max_order = getattr(args, "max_order", estimators.DEFAULT_MAX_EXPLICIT_ORDER)
    if name == "ideal-r":
        return coding.ideal_r_provider(max_order)
    if name == "arithmetic":
        return coding.arithmetic_provider(max_explicit_order=max_order)
    if name == "external":
        cmd = getattr(args, "compressor_cmd", None)
        if not cmd:
            raise _UsageError("--provider external requires --compressor-cmd")
        return coding.external_provider(cmd)
    raise _UsageError(f"unknown provider {name!r}")


# ---------------------------------------------------------------------------
# Report output


def _rounded(obj):
    if isinstance(obj, dict):
        return {k: _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return float(f"{v:.12g}") if math.isfinite(v) else v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _emit(report: dict, args, to_stdout: bool = False) -> None:
    """Write the JSON report to --out, or stdout when absent or forced."""
    text = json.dumps(_rounded(report), indent=2) + "\n"
    out = None if to_stdout else getattr(args, "out", None)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Commands


def cmd_estimate(args) -> int:
    x, alphabet = _read_symbols(args.input, _parse_alphabet(args.alphabet))
    lp = r_log2prob(x, args.max_order)
    lengths = [len(s) for s in x.samples] if isinstance(x, MultiSample) else [len(x)]
    report = {
        "command": "estimate",
        "alphabet": list(alphabet.labels),
        "lengths": lengths,
        "max_order": args.max_order,
        "log2_prob": lp,
        "prob": float(2.0 ** lp),
    }
    if args.query is not None:
        word = _parse_word(args.query, alphabet)
        clp = estimators.r_cond_log2prob(word, x, args.max_order)
        report["query"] = {
            "word": args.query,
            "log2_prob": clp,
            "prob": float(2.0 ** clp),
        }
    _emit(report, args)
    return EXIT_OK


def cmd_predict(args) -> int:
    x, alphabet = _read_symbols(args.input, _parse_alphabet(args.alphabet))
    report = {"command": "predict", "alphabet": list(alphabet.labels),
              "max_order": args.max_order}
    if args.input2:
        y, y_alphabet = _read_symbols(args.input2, None)
        if isinstance(x, MultiSample) or isinstance(y, MultiSample):
            raise ValueError("side-information prediction takes single samples")
        if len(y) != len(x) + 1:
            raise ValueError(
                "side-information file must hold one more symbol than --in "
                f"(got {len(y)} vs {len(x)})"
            )
        pair = estimators.PairAlphabet(alphabet, y_alphabet)
        history = list(zip(x.symbols.tolist(), y.symbols.tolist()))
        est = MixtureEstimator(pair.product, args.max_order)
        lps = estimators.side_info_cond_log2probs(
            pair, history, int(y.symbols[-1]), est
        )
        probs = np.exp2(lps)
        report["side_info"] = y_alphabet.labels[int(y.symbols[-1])]
    else:
        est = MixtureEstimator(alphabet, args.max_order).consume(x)
        probs = est.conditional_probs()
    report["conditionals"] = {
        alphabet.labels[a]: float(probs[a]) for a in range(alphabet.size)
    }
    _emit(report, args)
    return EXIT_OK


def cmd_compress(args) -> int:
    x, alphabet = _read_symbols(args.input, _parse_alphabet(args.alphabet))
    if isinstance(x, MultiSample):
        raise ValueError("compress takes a single sample (no blank-line separators)")
    if not args.out:
        raise _UsageError("compress requires --out for the binary container")
    model = MixtureEstimator(alphabet, args.max_order)
    payload, nbits = coding.arithmetic_encode(x, model)
    blob = coding.container_header(alphabet.size, len(x), "r") + payload
    with open(args.out, "wb") as fh:
        fh.write(blob)
    ideal = -r_log2prob(x, args.max_order)
    report = {
        "command": "compress",
        "length": len(x),
        "alphabet_size": alphabet.size,
        "container_bytes": len(blob),
        "payload_bits": nbits,
        "ideal_bits": ideal,
        "out": args.out,
    }
    _emit(report, args, to_stdout=True)
    return EXIT_OK


def cmd_decompress(args) -> int:
    if not args.out:
        raise _UsageError("decompress requires --out for the decoded text")
    with open(args.input, "rb") as fh:
        blob = fh.read()
    alphabet = _parse_alphabet(args.alphabet)
    model = None
    if alphabet is not None:
        model = coding.model_for_id("r", alphabet, args.max_order)
    seq, header = coding.decompress_container(
        blob, model=model, alphabet=alphabet, max_explicit_order=args.max_order
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(_format_symbols(seq, seq.alphabet))
    report = {"command": "decompress", "out": args.out, **header}
    _emit(report, args, to_stdout=True)
    return EXIT_OK


def _finish_test(report, args) -> int:
    _emit(report.to_dict(), args)
    return EXIT_REJECT if report.rejected else EXIT_OK


def cmd_test_identity(args) -> int:
    if not args.null:
        raise _UsageError("test-identity requires --null (source parameter file)")
    null = MarkovSource.from_file(args.null)
    x, alphabet = _read_symbols(args.input, _parse_alphabet(args.alphabet))
    if alphabet.size != null.alphabet.size:
        raise ValueError("data alphabet size differs from the null model")
    report = testing.identity_test(x, null, args.alpha, _provider(args))
    return _finish_test(report, args)


def cmd_test_independence(args) -> int:
    x, _ = _read_symbols(args.input, _parse_alphabet(args.alphabet))
    report = testing.serial_independence_test(x, args.order, args.alpha,
                                              _provider(args))
    return _finish_test(report, args)


def cmd_density(args) -> int:
    if not args.domain:
        raise _UsageError("density requires --domain a:b")
    lo, hi = _parse_domain(args.domain)
    values, extra = _read_reals(args.input)
    if extra is not None:
        raise ValueError("density expects single-column input")
    lp = realvalued.density_log2(
        values, lo, hi, max_depth=args.depth,
        renormalize=args.renormalize_depth_weights,
    )
    report = {
        "command": "density",
        "n": int(values.size),
        "domain": [lo, hi],
        "depth": args.depth,
        "renormalized": bool(args.renormalize_depth_weights),
        "log2_density": lp,
        "bits_per_value": (-lp / values.size) if values.size else 0.0,
    }
    _emit(report, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Monte Carlo harness


def _mc_trial(payload) -> bool:
    kind, cfg, index = payload
    seed = cfg["seed"] + index
    rng = np.random.default_rng(seed)
    alpha = cfg["alpha"]
    max_order = cfg["max_order"]
    provider = coding.ideal_r_provider(max_order)
    if kind == "identity":
        null = MarkovSource.from_text(cfg["null_text"])
        source = MarkovSource.from_text(cfg["source_text"])
        x = source.sample(cfg["length"], rng)
        return testing.identity_test(x, null, alpha, provider).rejected
    if kind == "independence":
        source = MarkovSource.from_text(cfg["source_text"])
        x = source.sample(cfg["length"], rng)
        return testing.serial_independence_test(x, cfg["order"], alpha,
                                                provider).rejected
    if kind == "partition-si":
        lo, hi = cfg["domain"]
        data = lo + (hi - lo) * rng.random(cfg["length"])
        report = testing.partition_meta_test(
            data, alpha, kind="si", max_depth=cfg["depth"], domain=(lo, hi),
            max_explicit_order=max_order,
        )
        return report.rejected
    raise ValueError(f"unknown Monte Carlo test {kind!r}")


def _run_pool(kind, cfg, trials):
    payloads = [(kind, cfg, i) for i in range(trials)]
    workers = min(os.cpu_count() or 1, 8)
    if workers > 1 and trials >= 16:
        try:
            with futures.ProcessPoolExecutor(max_workers=workers) as pool:
                chunk = max(1, trials // (workers * 8))
                return list(pool.map(_mc_trial, payloads, chunksize=chunk))
        except OSError:
            pass  # restricted environments: fall back to in-process
    return [_mc_trial(p) for p in payloads]


def cmd_montecarlo(args) -> int:
    cfg = {
        "seed": args.seed,
        "alpha": args.alpha,
        "length": args.length,
        "order": args.order,
        "depth": args.depth if args.depth is not None else 4,
        "max_order": args.max_order,
        "domain": _parse_domain(args.domain) if args.domain else (0.0, 1.0),
    }
    kind = args.test
    if kind == "kl-redundancy":
        if not args.source:
            raise _UsageError("kl-redundancy requires --source")
        truth = MarkovSource.from_file(args.source)
        est = estimators.avg_kl_error(
            truth, lambda x: r_log2prob(x, args.max_order), args.length,
            trials=args.trials, seed=args.seed,
        )
        report = {
            "test": "kl-redundancy", "trials": est.trials, "length": args.length,
            "value_bits_per_letter": est.value, "stderr": est.stderr,
            "seed": args.seed,
        }
        _emit(report, args)
        return EXIT_OK
    if kind == "identity":
        null = (MarkovSource.from_file(args.null) if args.null
                else MarkovSource.uniform(_parse_alphabet(args.alphabet or "2")))
        cfg["null_text"] = null.to_text()
        source = MarkovSource.from_file(args.source) if args.source else null
        cfg["source_text"] = source.to_text()
    elif kind == "independence":
        source = (MarkovSource.from_file(args.source) if args.source
                  else MarkovSource.uniform(_parse_alphabet(args.alphabet or "2")))
        cfg["source_text"] = source.to_text()
    elif kind != "partition-si":
        raise _UsageError(f"unknown Monte Carlo test {kind!r}")
    rejected = _run_pool(kind, cfg, args.trials)
    rate = float(np.mean(rejected)) if rejected else 0.0
    se = math.sqrt(args.alpha * (1 - args.alpha) / args.trials)
    bound = args.alpha + 3 * se
    report = {
        "test": kind,
        "trials": args.trials,
        "alpha": args.alpha,
        "length": args.length,
        "rejection_rate": rate,
        "binomial_se": se,
        "bound": bound,
        "pass": rate <= bound,
        "seed": args.seed,
    }
    _emit(report, args)
    return EXIT_OK if rate <= bound else EXIT_REJECT


# ---------------------------------------------------------------------------
# Argument wiring


def _add_common(p: argparse.ArgumentParser, *, data=True) -> None:
    if data:
        p.add_argument("--in", dest="input", required=True, help="input data file")
    p.add_argument("--in2", dest="input2", help="side-information file")
    p.add_argument("--alphabet", help="size or comma-separated symbol labels")
    p.add_argument("--domain", help="real-valued domain a:b")
    p.add_argument("--order", type=int, default=0, help="Markov order")
    p.add_argument("--max-order", dest="max_order", type=int,
                   default=estimators.DEFAULT_MAX_EXPLICIT_ORDER,
                   help="largest explicit mixture order")
    p.add_argument("--depth", type=int, default=realvalued.DEFAULT_MAX_DEPTH,
                   help="quantization depth")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p.add_argument("--provider", choices=["ideal-r", "arithmetic", "external"],
                   default="ideal-r")
    p.add_argument("--compressor-cmd", dest="compressor_cmd",
                   help="external compressor command (stdin to stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--out", help="write the report (or binary container) here")
    p.add_argument("--renormalize-depth-weights", dest="renormalize_depth_weights",
                   action="store_true")


def build_parser() -> _Parser:
    parser = _Parser(prog="uctseries", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="mixture probability of the input")
    _add_common(p)
    p.add_argument("--query", help="word whose conditional probability to report")
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("predict", help="next-symbol conditional distribution")
    _add_common(p)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("compress", help="arithmetic-code the input")
    _add_common(p)
    p.set_defaults(fn=cmd_compress)

    p = sub.add_parser("decompress", help="decode a compressed container")
    _add_common(p)
    p.set_defaults(fn=cmd_decompress)

    p = sub.add_parser("test-identity", help="goodness-of-fit test against a null")
    _add_common(p)
    p.add_argument("--null", help="source parameter file for the null")
    p.set_defaults(fn=cmd_test_identity)

    p = sub.add_parser("test-independence", help="serial independence test")
    _add_common(p)
    p.set_defaults(fn=cmd_test_independence)

    p = sub.add_parser("density", help="density estimate of real-valued input")
    _add_common(p)
    p.set_defaults(fn=cmd_density)

    p = sub.add_parser("montecarlo", help="rejection-rate validation harness")
    _add_common(p, data=False)
    p.add_argument("--test", required=True,
                   choices=["identity", "independence", "partition-si",
                            "kl-redundancy"])
    p.add_argument("--length", type=int, default=256, help="per-trial sample length")
    p.add_argument("--null", help="null source parameter file (identity)")
    p.add_argument("--source", help="data-generating source parameter file")
    p.set_defaults(fn=cmd_montecarlo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _UsageError as exc:
        sys.stderr.write(json.dumps({"error": "usage", "detail": str(exc)}) + "\n")
        return EXIT_USAGE
    except (ValueError, OSError, KeyError) as exc:
        sys.stderr.write(json.dumps({"error": "data", "detail": str(exc)}) + "\n")
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())
