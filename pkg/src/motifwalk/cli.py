"""Command-line front end: build-graph, extract-walks, train, generate, rules, evaluate, predict."""
import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import evalkit, grammar
from .fragment import load_annotations
from .molgraph import canonical_smiles, parse_smiles
from .motifgraph import MotifGraph, default_jobs
from .pipeline import build_from_annotations, extract_walks
from .walks import WalkDag, print_walk

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _dumps(obj):
    return json.dumps(obj, sort_keys=True)


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _jsonl(records):
    return "".join(_dumps(r) + "\n" for r in records)


def _read_jsonl(path):
    out = []
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{n}: {exc.msg}") from None
    return out


def _log(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# corpus files


def corpus_records(corpus):
    return [
        {
            "molecule_id": mid,
            "smiles": canonical_smiles(mol),
            "walk": print_walk(dag),
            "dag": dag.to_json(),
        }
        for mid, mol, dag in zip(corpus.ids, corpus.molecules, corpus.dags)
    ]


def load_corpus(path):
    recs = _read_jsonl(path)
    if not recs:
        raise ValueError(f"{path}: empty walk corpus")
    return recs, [WalkDag.from_json(r["dag"]) for r in recs]


def read_molecules(path):
    """Molecules from a walk corpus / generation file (.jsonl), annotations (.json) or SMILES lines."""
    if path.endswith(".jsonl"):
        return [parse_smiles(r["smiles"]) for r in _read_jsonl(path)]
    if path.endswith(".json"):
        return [a.molecule for a in load_annotations(path)]
    mols = []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if parts and not parts[0].startswith("#"):
                mols.append(parse_smiles(parts[0]))
    return mols


def read_properties(path):
    """``molecule_id,value`` rows (a header line is skipped; tabs also accepted)."""
    with open(path, newline="") as fh:
        text = fh.read()
    dialect = "excel-tab" if "\t" in text.splitlines()[0] else "excel"
    props = {}
    for row in csv.reader(io.StringIO(text), dialect):
        if not row or row[0].startswith("#"):
            continue
        try:
            props[row[0]] = float(row[1])
        except (ValueError, IndexError):
            if not props:
                continue  # header
            raise ValueError(f"{path}: bad property row {row}") from None
    return props


# ---------------------------------------------------------------------------
# commands


def cmd_build_graph(args):
    anns = load_annotations(args.annotations)
    graph, corpus = build_from_annotations(anns, jobs=args.jobs)
    graph.save(args.out)
    if args.corpus:
        _write(args.corpus, _jsonl(corpus_records(corpus)))
    if args.dot:
        _write(args.dot, graph.to_dot())
    print(f"G  (|V|,|E|) = {graph.base_size()}")
    print(f"G' (|V|,|E|) = {graph.size()}")
    if graph.truncated:
        _log("warning: some motif pairs hit the match cap; edge sets are truncated")


def cmd_extract_walks(args):
    graph = MotifGraph.load(args.graph)
    corpus = extract_walks(load_annotations(args.annotations), graph)
    _write(args.out, _jsonl(corpus_records(corpus)))
    print(f"{len(corpus.dags)} walks")


def _train_config(args):
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    for key in ("strategy", "epochs", "lr", "seed", "mode", "sign", "activation"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    return grammar.TrainConfig.from_json(cfg)


def cmd_train(args):
    graph = MotifGraph.load(args.graph)
    _, dags = load_corpus(args.corpus)
    cfg = _train_config(args)
    _log(f"seed {cfg.seed}")
    params, trace = grammar.train(dags, graph, cfg)
    params.meta["seed"] = cfg.seed
    params.meta["epochs"] = cfg.epochs
    _write(args.out, _dumps(params.to_json(graph.nodes)) + "\n")
    if args.loss_csv:
        _write(args.loss_csv, "epoch,loss\n" + "".join(f"{k + 1},{v!r}\n" for k, v in enumerate(trace)))
    if trace:
        print(f"loss {trace[0]:.6g} -> {trace[-1]:.6g} over {len(trace)} epochs")


def _load_params(path, graph):
    params = grammar.GrammarParams.load(path)
    params.check_graph(graph)
    return params


_GEN_STATE = {}


def _gen_init(params, graph, opts):
    _GEN_STATE.update(params=params, graph=graph, opts=opts)


def _gen_one(seed_seq):
    st = _GEN_STATE
    rng = np.random.default_rng(seed_seq)
    res = grammar.generate(st["params"], st["graph"], rng=rng, **st["opts"])
    return {
        "smiles": canonical_smiles(res.molecule),
        "walk": print_walk(res.walk, canonical=False),
        "dag": res.walk.to_json(),
        "valid": bool(res.valid),
    }


def cmd_generate(args):
    graph = MotifGraph.load(args.graph)
    params = _load_params(args.params, graph)
    if args.n < 1:
        raise ValueError("--n must be positive")
    opts = {"loop_back": args.loop_back, "max_steps": args.max_steps, "start": args.start}
    if args.start is not None and args.start not in graph.node_index:
        raise ValueError(f"unknown start node {args.start}")
    _log(f"seed {args.seed}")
    seeds = np.random.SeedSequence(args.seed).spawn(args.n)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs, initializer=_gen_init, initargs=(params, graph, opts)) as pool:
            out = list(pool.map(_gen_one, seeds, chunksize=max(1, args.n // (4 * args.jobs))))
    else:
        _gen_init(params, graph, opts)
        out = [_gen_one(s) for s in seeds]
    for i, r in enumerate(out):
        r["molecule_id"] = f"gen{i}"
    _write(args.out, _jsonl(out))
    print(f"{sum(r['valid'] for r in out)}/{len(out)} valid")


def cmd_rules(args):
    graph = MotifGraph.load(args.graph)
    params = _load_params(args.params, graph)
    rules = grammar.extract_hard_rules(
        params, graph, args.theta_min, max_states=args.max_states, max_depth=args.max_depth,
        loop_back=args.loop_back,
    )
    _write(args.out, "".join(_dumps(r.to_json()) + "\n" for r in rules))
    print(f"{len(rules)} rules")


def cmd_evaluate(args):
    generated = read_molecules(args.generated)
    training = read_molecules(args.training) if args.training else []
    patterns = list(args.membership or evalkit.DEFAULT_MEMBERSHIP.get(args.kind, []))
    report = evalkit.evaluate_generations(generated, training, patterns).to_json()
    report["membership_patterns"] = patterns
    _write(args.out, _dumps(report) + "\n")
    print(_dumps({k: report[k] for k in ("valid", "unique", "novel", "diversity", "membership")}))


def cmd_predict(args):
    graph = MotifGraph.load(args.graph)
    recs, dags = load_corpus(args.corpus)
    props = read_properties(args.properties)
    ids, X, y = [], [], []
    for rec, dag in zip(recs, dags):
        mid = str(rec["molecule_id"])
        if mid not in props:
            continue
        ids.append(mid)
        X.append(evalkit.bag_of_motifs(dag, parse_smiles(rec["smiles"]), graph).vector)
        y.append(props[mid])
    if len(ids) < 5:
        raise ValueError("need at least 5 molecules with properties")
    _log(f"seeds {args.seeds}")
    res = evalkit.split_protocol(
        np.array(X), np.array(y), args.task, seeds=args.seeds,
        n_estimators=args.n_estimators, max_depth=args.max_depth, lr=args.lr,
    )
    rows = ["seed,id,y_true,y_pred\n"]
    for run in res["runs"]:
        for i, p in zip(run["test"], run["pred"]):
            rows.append(f"{run['seed']},{ids[i]},{y[i]!r},{p!r}\n")
    _write(args.out, "".join(rows))
    summary = {"task": args.task, "seeds": list(args.seeds), "mean": res["mean"], "std": res["std"],
               "per_seed": [{k: v for k, v in r.items() if k not in ("test", "pred")} for r in res["runs"]]}
    if args.metrics_out:
        _write(args.metrics_out, _dumps(summary) + "\n")
    print(_dumps({"mean": res["mean"], "std": res["std"]}))


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="motifwalk", description="Motif-graph walk grammar for molecules.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=None, help="worker processes (default: $MOTIFWALK_JOBS or 1)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build-graph", parents=[common], help="fragment annotations and build the motif graph")
    s.add_argument("--annotations", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--corpus", help="also write the training walk corpus (JSON lines)")
    s.add_argument("--dot", help="also write a DOT rendering")
    s.set_defaults(func=cmd_build_graph)

    s = sub.add_parser("extract-walks", parents=[common], help="walks of annotated molecules over a built graph")
    s.add_argument("--annotations", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract_walks)

    s = sub.add_parser("train", parents=[common], help="fit transition weights to a walk corpus")
    s.add_argument("--corpus", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="JSON training options")
    s.add_argument("--loss-csv")
    s.add_argument("--strategy", choices=["forcing", "split"])
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--mode", choices=["step", "trajectory"])
    s.add_argument("--sign", type=float)
    s.add_argument("--activation", choices=["identity", "tanh"])
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("generate", parents=[common], help="sample molecules")
    s.add_argument("--params", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("-n", "--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-steps", type=int)
    s.add_argument("--start", help="node name to start every walk from")
    s.add_argument("--loop-back", action="store_true")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("rules", parents=[common], help="extract forced transitions")
    s.add_argument("--params", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--theta-min", type=float, default=0.05)
    s.add_argument("--max-states", type=int, default=2000)
    s.add_argument("--max-depth", type=int, default=8)
    s.add_argument("--loop-back", action="store_true")
    s.set_defaults(func=cmd_rules)

    s = sub.add_parser("evaluate", parents=[common], help="generation metrics")
    s.add_argument("--generated", required=True)
    s.add_argument("--training")
    s.add_argument("--out", required=True)
    s.add_argument("--membership", nargs="*", help="SMILES patterns")
    s.add_argument("--kind", choices=sorted(evalkit.DEFAULT_MEMBERSHIP), default="hopv",
                   help="default membership patterns")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("predict", parents=[common], help="motif-count property prediction, 80/20 splits over seeds")
    s.add_argument("--corpus", required=True)
    s.add_argument("--graph", required=True)
    s.add_argument("--properties", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--metrics-out")
    s.add_argument("--task", choices=["regression", "classification"], default="regression")
    s.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    s.add_argument("--n-estimators", type=int, default=16)
    s.add_argument("--max-depth", type=int, default=10)
    s.add_argument("--lr", type=float, default=0.3)
    s.set_defaults(func=cmd_predict)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    args.jobs = default_jobs() if args.jobs is None else max(1, args.jobs)
    try:
        args.func(args)
    except OSError as exc:
        where = f" ({exc.filename})" if getattr(exc, "filename", None) else ""
        print(f"error: {exc.strerror or exc}{where}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
