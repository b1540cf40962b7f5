"""Command-line surface: validate datasets, grade candidate solutions,
annotate difficulty, and compute rank agreement.

Exit codes: 0 success, 1 validation or grading failure, 2 usage/config
error. Primary report artifacts are byte-stable for a fixed config; wall
time goes to the console only.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .constants import ConstantsMap, default_constants_map
from .dataset import DatasetError, load_candidates, load_dataset
from .difficulty import DifficultyInput, dag_entropy, difficulty_label, entropy_tertiles
from .equiv import DEFAULT_SEED, EquivParams
from .pipeline import CandidateSolution, grade_dataset
from .ranks import DegenerateRankingError, RankPairs, kendall_tau_b, permutation_test

_USAGE_ERROR = 2
_FAILURE = 1


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def _setting(args: argparse.Namespace, config: dict, name: str, default):
    """Precedence: explicit flag > config file > default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _write_output(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_validate(args: argparse.Namespace) -> int:
    from .dag import validate

    try:
        dataset = load_dataset(args.dataset)
    except (DatasetError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    listing = []
    ok = True
    for problem in dataset.problems:
        report = validate(problem.dag)
        entry = {"problem_id": problem.id}
        entry.update(report.to_dict())
        listing.append(entry)
        ok = ok and report.ok
    _write_output(_dump_json(listing), args.out)
    return 0 if ok else _FAILURE


def cmd_grade(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    dataset_path = _setting(args, config, "dataset", None)
    candidates_path = _setting(args, config, "candidates", None)
    if not dataset_path or not candidates_path:
        print("error: --dataset and --candidates are required", file=sys.stderr)
        return _USAGE_ERROR
    try:
        dataset = load_dataset(dataset_path)
        records = load_candidates(candidates_path)
        constants_path = _setting(args, config, "constants", None)
        constants = ConstantsMap.from_file(constants_path) if constants_path else default_constants_map()
        sample_range = str(_setting(args, config, "sample_range", "2:20"))
        lo, _, hi = sample_range.partition(":")
        params = EquivParams(
            n_max=int(_setting(args, config, "n_max", 40)),
            n_succ=int(_setting(args, config, "n_succ", 10)),
            n_eq=int(_setting(args, config, "n_eq", 10)),
            eps=float(_setting(args, config, "eps", 1e-6)),
            sample_lo=float(lo),
            sample_hi=float(hi),
            t_max=float(_setting(args, config, "t_max_ms", 200.0)) / 1000.0,
            seed=int(_setting(args, config, "seed", DEFAULT_SEED)),
        )
        jobs = int(_setting(args, config, "jobs", 1))
    except (DatasetError, json.JSONDecodeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR

    candidates = [
        CandidateSolution(
            problem_id=r["problem_id"],
            solution_text=r["solution"],
            model=r.get("model"),
            latency_s=r.get("latency_s"),
        )
        for r in records
    ]
    if not candidates:
        print("error: zero problems graded (empty candidates file)", file=sys.stderr)
        return _FAILURE

    started = time.monotonic()
    report = grade_dataset(dataset, candidates, constants, params, parallelism=jobs)
    elapsed = time.monotonic() - started

    fmt = _setting(args, config, "format", "json")
    if fmt == "tsv-summary":
        lines = ["problem_id\tmodel\tscore\tfinal_correct"]
        for g in report.grades:
            score_s = f"{float(g.score_fraction):.6f}" if g.error is None else "error"
            final_s = str(g.report.final_correct).lower() if g.report is not None else "error"
            lines.append(f"{g.problem_id}\t{g.model or ''}\t{score_s}\t{final_s}")
        _write_output("\n".join(lines) + "\n", args.out)
    else:
        _write_output(_dump_json(report.to_dict()), args.out)

    overall = report.rollups["overall"]
    graded = sum(1 for g in report.grades if g.error is None)
    print(
        f"graded {graded}/{len(report.grades)} records: "
        f"step_mean={overall.get('step_mean_by_problem', 0.0):.4f} "
        f"final_accuracy={overall.get('final_accuracy', 0.0):.4f} "
        f"wall={elapsed:.2f}s",
        file=sys.stderr,
    )
    return 0 if graded > 0 else _FAILURE


def cmd_annotate(args: argparse.Namespace) -> int:
    try:
        dataset = load_dataset(args.dataset)
        ratings: dict = {}
        with open(args.annotations, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                ratings[obj["problem_id"]] = (int(obj["c1"]), int(obj["c2"]))
    except (DatasetError, json.JSONDecodeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR

    entropies = {p.id: dag_entropy(p.dag) for p in dataset.problems}
    if args.tau1 is not None and args.tau2 is not None:
        tau1, tau2 = args.tau1, args.tau2
    else:
        tau1, tau2 = entropy_tertiles(list(entropies.values()))

    lines = []
    missing = 0
    for problem in dataset.problems:
        if problem.id not in ratings:
            missing += 1
            continue
        c1, c2 = ratings[problem.id]
        result = difficulty_label(DifficultyInput(c1=c1, c2=c2, dag=problem.dag, tau1=tau1, tau2=tau2))
        row = {"problem_id": problem.id}
        row.update(result.to_dict())
        lines.append(json.dumps(row, sort_keys=True))
    _write_output("\n".join(lines) + ("\n" if lines else ""), args.out)
    if missing:
        print(f"note: {missing} problems had no c1/c2 ratings and were skipped", file=sys.stderr)
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        xs, ys = [], []
        with open(args.pairs, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                xs.append(float(obj["score_a"]))
                ys.append(float(obj["score_b"]))
        pairs = RankPairs.from_sequences(xs, ys)
    except (json.JSONDecodeError, OSError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR

    try:
        tau, p_asym = kendall_tau_b(pairs)
        p_perm = permutation_test(pairs, n_perm=args.n_perm, seed=args.seed)
    except DegenerateRankingError as exc:
        print(f"undefined result: {exc}", file=sys.stderr)
        return _FAILURE

    print(f"tau_b={tau:.6f} p_asymptotic={p_asym:.6e} p_permutation={p_perm:.6e}")
    if args.out:
        _write_output(
            _dump_json({"tau_b": tau, "p_asymptotic": p_asym, "p_permutation": p_perm}), args.out
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stepgrade", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="check dataset DAG construction rules")
    p_val.add_argument("--dataset", required=True)
    p_val.add_argument("--out")
    p_val.set_defaults(fn=cmd_validate)

    p_grade = sub.add_parser("grade", help="grade candidate solutions against a dataset")
    p_grade.add_argument("--config", help="JSON config; flags override its values")
    p_grade.add_argument("--dataset")
    p_grade.add_argument("--candidates")
    p_grade.add_argument("--constants")
    p_grade.add_argument("--seed", type=int)
    p_grade.add_argument("--jobs", type=int)
    p_grade.add_argument("--n-max", dest="n_max", type=int)
    p_grade.add_argument("--n-succ", dest="n_succ", type=int)
    p_grade.add_argument("--n-eq", dest="n_eq", type=int)
    p_grade.add_argument("--eps", type=float)
    p_grade.add_argument("--sample-range", dest="sample_range", help="LO:HI")
    p_grade.add_argument("--t-max-ms", dest="t_max_ms", type=float)
    p_grade.add_argument("--out")
    p_grade.add_argument("--format", choices=["json", "tsv-summary"])
    p_grade.set_defaults(fn=cmd_grade)

    p_ann = sub.add_parser("annotate", help="difficulty annotation from DAG entropy and c1/c2 ratings")
    p_ann.add_argument("--dataset", required=True)
    p_ann.add_argument("--annotations", required=True, help="JSONL {problem_id, c1, c2}")
    p_ann.add_argument("--tau1", type=float)
    p_ann.add_argument("--tau2", type=float)
    p_ann.add_argument("--out")
    p_ann.set_defaults(fn=cmd_annotate)

    p_stats = sub.add_parser("stats", help="Kendall tau_b agreement with significance tests")
    p_stats.add_argument("--pairs", required=True, help="JSONL {id, score_a, score_b}")
    p_stats.add_argument("--n-perm", dest="n_perm", type=int, default=10000)
    p_stats.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_stats.add_argument("--out")
    p_stats.set_defaults(fn=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.fn(args)


def main_entry() -> None:
    sys.exit(main())
