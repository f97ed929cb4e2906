"""Command-line interface.

Subcommands: fit, encode, attend, bench, stream, eval, ratio. Tensor
arguments are files in the container format of :mod:`lisa.tensorfile`;
configuration arguments accept either a path to a JSON file or an inline
JSON object. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

import argparse
import json
import sys

import numpy as np

from . import bench as bench_mod
from . import evaluate as eval_mod
from . import streaming
from .attention import (
    ProjectionSet,
    build_ip_table,
    lisa_forward,
    lisa_forward_soft,
    project_values,
)
from .quantizer import (
    Codebooks,
    compression_ratio,
    encode_batch,
    fit_codebooks,
    soft_assign_batch,
)
from .tensorfile import read_tensor, write_tensor

FIT_DEFAULTS = {"iters": 10, "seed": 0, "temperature": 1.0}


def _load_json(arg: str) -> dict:
    if arg.lstrip().startswith("{"):
        doc = json.loads(arg)
    else:
        with open(arg) as fh:
            doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("configuration must be a JSON object")
    return doc


def _load_projections(args, dim: int, scale: float | None) -> ProjectionSet:
    mats = []
    for name in ("proj_q", "proj_k", "proj_v"):
        path = getattr(args, name, None)
        mats.append(read_tensor(path) if path else np.eye(dim))
    return ProjectionSet(*mats, scale=scale)


def _parse_scale(raw) -> float | None:
    if raw is None or raw == "rsqrt_d":
        return None
    return float(raw)


def _cmd_fit(args) -> int:
    cfg = {**FIT_DEFAULTS, **_load_json(args.config)}
    for key in ("B", "W"):
        if key not in cfg:
            raise ValueError(f"fit config is missing required key {key!r}")
    embeddings = read_tensor(args.embeddings)
    books = fit_codebooks(
        embeddings,
        n_codebooks=int(cfg["B"]),
        n_codewords=int(cfg["W"]),
        iters=int(cfg["iters"]),
        seed=int(cfg["seed"]),
    )
    write_tensor(args.out, books.values)
    print(f"fitted {books.n_codebooks}x{books.n_codewords} codebooks -> {args.out}")
    return 0


def _cmd_encode(args) -> int:
    embeddings = read_tensor(args.embeddings)
    books = Codebooks(read_tensor(args.codebooks))
    if args.soft:
        out = soft_assign_batch(embeddings, books, temperature=args.temperature)
    else:
        out = encode_batch(embeddings, books)
    write_tensor(args.out, out)
    print(f"encoded {embeddings.shape[0]} items -> {args.out}")
    return 0


def _cmd_attend(args) -> int:
    cfg = _load_json(args.config) if args.config else {}
    mode = {"uni": "unidirectional", "bi": "bidirectional"}.get(
        cfg.get("mode", "uni"), cfg.get("mode")
    )
    variant = cfg.get("variant", "base")
    indices = read_tensor(args.indices)
    books = Codebooks(read_tensor(args.codebooks))
    proj = _load_projections(args, books.dim, _parse_scale(cfg.get("scale", "rsqrt_d")))
    table = build_ip_table(books, proj)
    values = project_values(books, proj)
    if variant == "soft":
        if not args.assignments:
            raise ValueError("the soft variant needs --assignments")
        assignments = read_tensor(args.assignments)
        out = lisa_forward_soft(assignments, indices, table, values, mode=mode)
    elif variant == "base":
        out = lisa_forward(indices, table, values, mode=mode)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    write_tensor(args.out, out)
    print(f"attention over {indices.shape[0]} positions -> {args.out}")
    return 0


def _cmd_bench(args) -> int:
    report = bench_mod.bench_attention(
        methods=args.methods.split(","),
        l_grid=[int(v) for v in args.l_grid.split(",")],
        token_budget=args.token_budget,
        dim=args.d,
        n_codebooks=args.b,
        n_codewords=args.w,
        runs=args.runs,
        seed=args.seed,
        mem_cap_bytes=args.mem_cap_bytes,
    )
    csv = report.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv)
        print(f"wrote {len(report.rows)} rows -> {args.out}")
    else:
        print(csv, end="")
    return 0


def _cmd_stream(args) -> int:
    with open(args.items) as fh:
        item_ids = [int(line) for line in fh if line.strip()]
    catalog = read_tensor(args.indices)
    books = Codebooks(read_tensor(args.codebooks))
    proj = _load_projections(args, books.dim, _parse_scale(args.scale))
    table = build_ip_table(books, proj)
    values = project_values(books, proj)
    state = streaming.state_init(books.n_codebooks, books.n_codewords)
    lines = ["step," + ",".join(f"top{r}" for r in range(1, args.top_k + 1))]
    for step, item in enumerate(item_ids, start=1):
        if not 0 <= item < catalog.shape[0]:
            raise ValueError(f"item id {item} outside the catalog of {catalog.shape[0]}")
        state = streaming.state_update(state, catalog[item])
        repr_vec = streaming.step_infer(state, table, values)
        scores = eval_mod.score_candidates(repr_vec, (catalog, books))
        top = np.argsort(-scores, kind="stable")[: args.top_k]
        lines.append(f"{step}," + ",".join(str(int(i)) for i in top))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {len(item_ids)} steps -> {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_eval(args) -> int:
    dataset = eval_mod.synth_dataset(
        n_users=args.users,
        n_items=args.items,
        structure_seed=args.seed,
        n_clusters=args.clusters,
        dim=args.d,
    )
    report = eval_mod.run_synthetic_eval(
        dataset,
        scorer=args.scorer,
        n_codebooks=args.b,
        n_codewords=args.w,
        k_values=tuple(int(k) for k in args.k.split(",")),
        seed=args.seed,
    )
    print(json.dumps(report.as_dict(), indent=2))
    if args.json_out:
        with open(args.json_out, "w") as fh:
            json.dump(report.as_dict(), fh, indent=2)
    if args.csv_out:
        with open(args.csv_out, "w") as fh:
            fh.write(report.as_csv())
    return 0


def _cmd_ratio(args) -> int:
    target = None
    if (args.target_b is None) != (args.target_w is None):
        raise ValueError("--target-b and --target-w must be given together")
    if args.target_b is not None:
        target = (args.target_b, args.target_w)
    ratio = compression_ratio(args.n, args.d, (args.b, args.w), target)
    print(f"{ratio:.2f}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lisa",
        description="Linear-time self-attention over codeword histograms.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit codebooks to an embedding matrix")
    p.add_argument("--embeddings", required=True, help="(N, D) tensor file")
    p.add_argument("--config", required=True, help="JSON: B, W, iters, seed, temperature")
    p.add_argument("--out", required=True, help="output (B, W, D) tensor file")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("encode", help="encode embeddings to codeword indices")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--codebooks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--soft", action="store_true", help="write (N, B, W) soft assignments")
    p.add_argument("--temperature", type=float, default=1.0)
    p.set_defaults(func=_cmd_encode)

    p = sub.add_parser("attend", help="run a histogram-attention forward pass")
    p.add_argument("--indices", required=True, help="(L, B) codeword index tensor")
    p.add_argument("--codebooks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help='JSON: {"mode":"uni"|"bi","variant":"base"|"soft","scale":x}')
    p.add_argument("--assignments", help="(L, B, W) soft assignment tensor (soft variant)")
    p.add_argument("--proj-q", dest="proj_q")
    p.add_argument("--proj-k", dest="proj_k")
    p.add_argument("--proj-v", dest="proj_v")
    p.set_defaults(func=_cmd_attend)

    p = sub.add_parser("bench", help="time attention methods on a length grid")
    p.add_argument("--methods", default="lisa,vanilla")
    p.add_argument("--l-grid", default="256,512,1024,2048,4096,8192")
    p.add_argument("--token-budget", type=int, default=8192)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--b", type=int, default=4)
    p.add_argument("--w", type=int, default=32)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mem-cap-bytes", type=int, default=bench_mod.DEFAULT_MEM_CAP)
    p.add_argument("--out", help="CSV path; stdout when omitted")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("stream", help="stepwise inference over an item-id stream")
    p.add_argument("--items", required=True, help="text file, one item id per line")
    p.add_argument("--indices", required=True, help="(N, B) catalog codeword indices")
    p.add_argument("--codebooks", required=True)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--scale", default="rsqrt_d")
    p.add_argument("--proj-q", dest="proj_q")
    p.add_argument("--proj-k", dest="proj_k")
    p.add_argument("--proj-v", dest="proj_v")
    p.add_argument("--out", help="CSV path; stdout when omitted")
    p.set_defaults(func=_cmd_stream)

    p = sub.add_parser("eval", help="ranking metrics on a synthetic dataset")
    p.add_argument("--users", type=int, default=500)
    p.add_argument("--items", type=int, default=600)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--clusters", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scorer", choices=("lisa", "vanilla", "random"), default="lisa")
    p.add_argument("--b", type=int, default=4)
    p.add_argument("--w", type=int, default=32)
    p.add_argument("--k", default="5,10")
    p.add_argument("--json-out")
    p.add_argument("--csv-out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ratio", help="embedding compression ratio for a configuration")
    p.add_argument("--n", type=int, required=True, help="item count")
    p.add_argument("--d", type=int, required=True, help="embedding dimension")
    p.add_argument("--b", type=int, required=True, help="codebooks encoding the sequence")
    p.add_argument("--w", type=int, required=True, help="codewords per sequence codebook")
    p.add_argument("--target-b", type=int, help="separate target-item codebooks")
    p.add_argument("--target-w", type=int)
    p.set_defaults(func=_cmd_ratio)

    return parser


def cli_dispatch(argv) -> int:
    """Parse and run; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 0 for --help, 2 for usage errors
        code = exc.code
        return code if isinstance(code, int) else 2
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return cli_dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    raise SystemExit(main())
