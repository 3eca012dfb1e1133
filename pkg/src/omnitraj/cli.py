"""Command-line entry points for the full pipeline.

Subcommands: gen-data, extract, train, embed, query, eval-sim, eval-cond,
bench-heuristics, serve. Every subcommand accepts --seed, --config (flat
key=value file) and --out; artifact paths default to $OMNITRAJ_DATA_DIR.
Exit status 0 on success, 1 with a single machine-parseable error line on
data/config failures, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import (
    DatasetRecord,
    ensure_views,
    read_dataset,
    read_network,
    write_dataset,
    write_network,
)
from .encoders import EncoderConfig, OmniTrajModel
from .errors import ConfigError, OmniTrajError
from .evaluation import bench_heuristics, run_condition_eval, run_similarity_eval
from .retrieval import EmbeddingStore, QuerySpec, build_store, condition_query
from .synth import generate_network, generate_trajectories, grid_for_network
from .training import AugmentationPolicy, TrainConfig, train

_ENCODER_KEYS = (
    "d", "h", "blocks", "heads", "patch_size", "resample_len",
    "max_top_len", "max_road_len", "max_region_len", "rope_base",
)
_TRAIN_KEYS = ("epochs", "batch_size", "lr", "lr_final_factor", "tau", "seed", "train_fusions")
_POLICY_KEYS = (
    "reverse_prob", "keep_lo", "keep_hi", "shuffle_prob", "shuffle_window",
    "replace_prob", "region_shuffle", "region_drop_prob", "identity_prob",
)


def data_root() -> Path:
    return Path(os.environ.get("OMNITRAJ_DATA_DIR", "."))


def read_kv_config(path: str | Path) -> dict:
    """Flat key=value file; '#' starts a comment; values are parsed as JSON
    scalars where possible."""
    conf: dict = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"bad config line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            conf[key] = json.loads(value)
        except json.JSONDecodeError:
            conf[key] = value
    return conf


def _load_config(args) -> dict:
    conf = read_kv_config(args.config) if getattr(args, "config", None) else {}
    # explicit CLI flags win over the config file
    for key, value in vars(args).items():
        if value is not None and key in set(_ENCODER_KEYS) | set(_TRAIN_KEYS) | set(_POLICY_KEYS):
            conf[key] = value
    return conf


def _pick(conf: dict, keys) -> dict:
    return {k: conf[k] for k in keys if k in conf}


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- commands

def cmd_gen_data(args) -> int:
    out = Path(args.out or data_root())
    out.mkdir(parents=True, exist_ok=True)
    net = generate_network(args.seed, args.rows, args.cols, args.jitter)
    grid = grid_for_network(net, rows=args.grid_rows, cols=args.grid_cols)
    pairs = generate_trajectories(
        net, args.count, seed=args.seed, min_hops=args.min_hops, max_hops=args.max_hops
    )
    write_network(net, grid, out / "network.jsonl")
    write_dataset([DatasetRecord(t, road=r) for t, r in pairs], out / "dataset.jsonl")
    print(f"wrote {args.count} trajectories to {out / 'dataset.jsonl'}")
    return 0


def cmd_extract(args) -> int:
    root = data_root()
    data = Path(args.data or root / "dataset.jsonl")
    network = Path(args.network or root / "network.jsonl")
    out = Path(args.out or data)
    _, grid = read_network(network)
    kwargs = {}
    if args.epsilon is not None:
        kwargs["epsilon"] = args.epsilon
    if args.angle_min_deg is not None:
        kwargs["angle_min"] = np.deg2rad(args.angle_min_deg)
    records = [ensure_views(r, grid, **kwargs) for r in read_dataset(data)]
    write_dataset(records, out)
    print(f"extracted views for {len(records)} trajectories -> {out}")
    return 0


def _build_train_objects(conf: dict, road_vocab: int, region_vocab: int):
    encoder_cfg = EncoderConfig(
        road_vocab=road_vocab, region_vocab=region_vocab, **_pick(conf, _ENCODER_KEYS)
    )
    train_cfg = TrainConfig(**_pick(conf, _TRAIN_KEYS))
    policy = AugmentationPolicy(**_pick(conf, _POLICY_KEYS))
    return encoder_cfg, train_cfg, policy


def cmd_train(args) -> int:
    root = data_root()
    data = Path(args.data or root / "dataset.jsonl")
    network = Path(args.network or root / "network.jsonl")
    out = Path(args.out or root)
    out.mkdir(parents=True, exist_ok=True)
    net, grid = read_network(network)
    records = read_dataset(data)
    if args.train_count:
        records = records[: args.train_count]
    conf = _load_config(args)
    encoder_cfg, train_cfg, policy = _build_train_objects(
        conf, net.num_segments, grid.num_cells
    )
    if args.no_augment:
        policy = AugmentationPolicy.none()

    curve_path = out / "loss_curve.jsonl"
    with open(curve_path, "w", encoding="utf-8") as curve_file:
        def log(entry):
            curve_file.write(json.dumps(entry, sort_keys=True) + "\n")
            curve_file.flush()
            print(f"epoch {entry['epoch']}: total {entry['total']:.4f}", flush=True)

        result = train(records, encoder_cfg, policy, train_cfg, grid=grid, log=log)
    fp = result.model.save(out / "model.otwt")
    print(f"checkpoint {out / 'model.otwt'} fingerprint {fp.hex()}")
    return 0


def cmd_embed(args) -> int:
    root = data_root()
    data = Path(args.data or root / "dataset.jsonl")
    checkpoint = Path(args.checkpoint or root / "model.otwt")
    out_dir = Path(args.out or root)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, _ = OmniTrajModel.load(checkpoint)
    records = read_dataset(data)
    if args.candidates:
        records = records[-args.candidates :]
    modalities = args.modality.split(",") if args.modality else ["traj", "top", "road", "region"]
    for mod in modalities:
        store = build_store(model, records, mod)
        path = out_dir / f"store_{store.modality}.otes"
        store.save(path)
        print(f"wrote {len(store)} x {store.width} {store.modality} store -> {path}")
    return 0


def _load_stores(stores_dir: Path) -> dict[str, EmbeddingStore]:
    stores = {}
    for mod in ("traj", "top", "road", "region"):
        path = stores_dir / f"store_{mod}.otes"
        if path.exists():
            stores[mod] = EmbeddingStore.load(path)
    if not stores:
        raise ConfigError(f"no store files under {stores_dir}")
    return stores


def _parse_id_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.replace(",", " ").split())


def _parse_points(text: str) -> np.ndarray:
    pts = [[float(v) for v in pair.replace(",", " ").split()] for pair in text.split(";")]
    return np.asarray(pts, dtype=np.float64)


def cmd_query(args) -> int:
    root = data_root()
    checkpoint = Path(args.checkpoint or root / "model.otwt")
    stores = _load_stores(Path(args.stores or root))
    model, _ = OmniTrajModel.load(checkpoint)
    spec = QuerySpec(
        k=args.k,
        topology=_parse_points(args.topology) if args.topology else None,
        road=_parse_id_list(args.road) if args.road else None,
        region=_parse_id_list(args.region) if args.region else None,
        coarse_modality=args.coarse,
        coarse_subset=args.subset,
    )
    result = condition_query(stores, spec, model)
    payload = {
        "results": [{"id": i, "score": round(s, 6)} for i, s in result.items],
        "provenance": result.provenance,
    }
    if args.out:
        _write_json(Path(args.out), payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def _eval_common(args):
    root = data_root()
    data = Path(args.data or root / "dataset.jsonl")
    checkpoint = Path(args.checkpoint or root / "model.otwt")
    stores = _load_stores(Path(args.stores or root))
    model, _ = OmniTrajModel.load(checkpoint)
    records = read_dataset(data)
    universe = set(stores["traj"].ids.tolist())
    test_records = [r for r in records if r.id in universe]
    return model, stores, test_records


def cmd_eval_sim(args) -> int:
    model, stores, test_records = _eval_common(args)
    report = run_similarity_eval(model, stores["traj"], test_records, variant=args.variant)
    payload = report.to_dict()
    payload["checkpoint_fingerprint"] = stores["traj"].fingerprint.hex()
    if args.out:
        _write_json(Path(args.out), payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_eval_cond(args) -> int:
    model, stores, test_records = _eval_common(args)
    report = run_condition_eval(
        model,
        stores["traj"],
        test_records,
        modality=args.modality,
        condition_fraction=args.condition_fraction,
    )
    payload = report.to_dict()
    payload["checkpoint_fingerprint"] = stores["traj"].fingerprint.hex()
    if args.out:
        _write_json(Path(args.out), payload)
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_bench_heuristics(args) -> int:
    root = data_root()
    data = Path(args.data or root / "dataset.jsonl")
    records = read_dataset(data)
    if args.candidates:
        records = records[-args.candidates :]
    reports = bench_heuristics(
        records, num_queries=args.queries, eps=args.eps, resample_len=args.resample_len
    )
    payload = {name: rep.to_dict() for name, rep in reports.items()}
    if args.out:
        _write_json(Path(args.out), payload)
    header = f"{'measure':<10} {'MR':>8} {'MRR':>7} {'HR@1':>6} {'HR@5':>6} {'HR@10':>6}"
    print(header)
    for name, rep in reports.items():
        print(
            f"{name:<10} {rep.mr:>8.3f} {rep.mrr:>7.3f} "
            f"{rep.hr[1]:>6.3f} {rep.hr[5]:>6.3f} {rep.hr[10]:>6.3f}"
        )
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    serve(Path(args.artifacts or data_root()), host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="omnitraj", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--out", help="output file or directory")

    p = sub.add_parser("gen-data", help="generate a synthetic network + trajectories")
    common(p)
    p.add_argument("--count", type=int, default=2200)
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=8)
    p.add_argument("--jitter", type=float, default=0.2)
    p.add_argument("--min-hops", type=int, default=8)
    p.add_argument("--max-hops", type=int, default=20)
    p.add_argument("--grid-rows", type=int, default=16)
    p.add_argument("--grid-cols", type=int, default=16)
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("extract", help="fill topology/region views in a dataset")
    common(p)
    p.add_argument("--data")
    p.add_argument("--network")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--angle-min-deg", type=float)
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("train", help="contrastive training run")
    common(p)
    p.add_argument("--data")
    p.add_argument("--network")
    p.add_argument("--train-count", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--no-augment", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("embed", help="build embedding stores from a checkpoint")
    common(p)
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--candidates", type=int, help="use only the last N records")
    p.add_argument("--modality", help="comma-separated subset of traj,top,road,region")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("query", help="condition-based retrieval")
    common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--stores")
    p.add_argument("--road", help="comma-separated segment ids")
    p.add_argument("--region", help="comma-separated region ids")
    p.add_argument("--topology", help="semicolon-separated x,y pairs")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--coarse", help="coarse modality for two-stage retrieval")
    p.add_argument("--subset", type=int, help="coarse subset size")
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("eval-sim", help="self-retrieval ranking evaluation")
    common(p)
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--stores")
    p.add_argument("--variant", default="top")
    p.set_defaults(fn=cmd_eval_sim)

    p = sub.add_parser("eval-cond", help="condition-coverage evaluation")
    common(p)
    p.add_argument("--data")
    p.add_argument("--checkpoint")
    p.add_argument("--stores")
    p.add_argument("--modality", default="road", choices=["road", "region"])
    p.add_argument("--condition-fraction", type=float, default=1.0)
    p.set_defaults(fn=cmd_eval_cond)

    p = sub.add_parser("bench-heuristics", help="rank with the classical measures")
    common(p)
    p.add_argument("--data")
    p.add_argument("--queries", type=int, default=1000)
    p.add_argument("--candidates", type=int)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--resample-len", type=int, default=64)
    p.set_defaults(fn=cmd_bench_heuristics)

    p = sub.add_parser("serve", help="HTTP query service over a snapshot")
    common(p)
    p.add_argument("--artifacts")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except OmniTrajError as exc:
        message = " ".join(str(exc).split())
        print(f"error code={exc.code} message={message!r}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error code=io message='missing file: {exc.filename}'", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
