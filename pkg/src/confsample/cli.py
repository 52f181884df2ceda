"""``confsample`` command line: scan, sample, evaluate.

Exit codes: 0 success, 1 fatal error, 2 scan finished with diagnostics,
3 an algorithm is infeasible at the requested (global) scale.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .cppscan import (
    Diagnostic, FileVariabilityModel, ScanError, UnbalancedDirectives, apply_build_manifest, model_from_dict,
    model_to_dict, parse_manifest, resolve_headers, scan_file,
)
from .evaluation import CorpusError, evaluate_algorithms, ingest_corpus
from .samples import GLOBAL, SampleSet
from .sampling import AlgorithmId, Combination, InfeasibleAtScale, T_WISE, parse_algorithm, sample_project
from .satsolver import ConstraintModel, ResourceLimit, Unsatisfiable

log = logging.getLogger("confsample")

EXIT_OK, EXIT_FATAL, EXIT_DIAGNOSTICS, EXIT_INFEASIBLE = 0, 1, 2, 3


@dataclass
class RunConfig:
    """Everything that determines a run; embedded verbatim in every output."""

    root: str = "."
    include_paths: list[str] = field(default_factory=list)
    constraints: str | None = None
    build_manifest: str | None = None
    headers: bool = False
    scope: str = "per-file"
    algorithms: list[str] = field(default_factory=list)
    random_n: int = 10
    seed: int = 0
    repeat: int = 1
    n_grid: list[int] = field(default_factory=list)
    out: str = "samples"
    budget: int | None = None
    threshold: int = 200
    jobs: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        data = data.get("run_config", data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown run-config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# ---------------------------------------------------------------------------
# Shared helpers


def _source_files(root: Path) -> list[Path]:
    if root.is_file():
        return [root]
    return sorted(p for p in root.rglob("*.c") if p.is_file())


def _rel(path: Path, root: Path) -> str:
    if root.is_file():
        return path.name
    return path.relative_to(root).as_posix()


def _scan_tree(cfg: RunConfig) -> tuple[list[FileVariabilityModel], list[Diagnostic]]:
    root = Path(cfg.root)
    if not root.exists():
        raise FileNotFoundError(f"no such file or directory: {root}")
    base = root if root.is_dir() else root.parent
    manifest = None
    if cfg.build_manifest:
        manifest = parse_manifest(Path(cfg.build_manifest).read_text(encoding="utf-8"))
    models: list[FileVariabilityModel] = []
    diagnostics: list[Diagnostic] = []
    for path in _source_files(root):
        rel = _rel(path, root)
        try:
            model = scan_file(path.read_text(encoding="utf-8", errors="replace"), rel)
        except UnbalancedDirectives as exc:
            log.warning("%s", exc)
            diagnostics.append(Diagnostic("unbalanced", rel, exc.line, str(exc)))
            continue
        if cfg.headers:
            model = resolve_headers(model, cfg.include_paths, root=base)
        if manifest is not None:
            model = apply_build_manifest(model, manifest)
        diagnostics.extend(model.diagnostics)
        models.append(model)
    return models, diagnostics


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_.+" else "_" for ch in name)


# ---------------------------------------------------------------------------
# scan


def cmd_scan(args: argparse.Namespace, cfg: RunConfig) -> int:
    models, diagnostics = _scan_tree(cfg)
    dumps = [model_to_dict(m) for m in models]
    if args.emit_model:
        out = Path(args.emit_model)
        for m, d in zip(models, dumps):
            _write_json(out / (m.file + ".json"), d)
        _write_json(out / "index.json", {"tool": __version__, "run_config": cfg.to_dict(),
                                         "files": [m.file for m in models],
                                         "diagnostics": [str(d) for d in diagnostics]})
    else:
        json.dump({"tool": __version__, "models": dumps}, sys.stdout, indent=2)
        sys.stdout.write("\n")
    for d in diagnostics:
        print(f"diagnostic: {d}", file=sys.stderr)
    print(f"scanned {len(models)} file(s), {len(diagnostics)} diagnostic(s)", file=sys.stderr)
    return EXIT_DIAGNOSTICS if diagnostics else EXIT_OK


# ---------------------------------------------------------------------------
# sample


def _algorithms(cfg: RunConfig) -> list[AlgorithmId | Combination]:
    if not cfg.algorithms:
        raise ValueError("no algorithm selected (use --alg or --t)")
    out: list[AlgorithmId | Combination] = []
    for text in cfg.algorithms:
        if text.strip() == "random" and (cfg.repeat > 1 or cfg.n_grid):
            # the random protocol: every n of the grid, ``repeat`` seeds each
            for n in cfg.n_grid or [cfg.random_n]:
                out.extend(AlgorithmId("random", n, cfg.seed + r) for r in range(cfg.repeat))
        else:
            out.append(parse_algorithm(text, cfg.random_n, cfg.seed))
    return list(dict.fromkeys(out))


def _load_models(path: Path) -> list[FileVariabilityModel]:
    index = json.loads((path / "index.json").read_text(encoding="utf-8"))
    return [model_from_dict(json.loads((path / (f + ".json")).read_text(encoding="utf-8")))
            for f in index["files"]]


def cmd_sample(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.models:
        models = _load_models(Path(args.models))
    else:
        models, diagnostics = _scan_tree(cfg)
        for d in diagnostics:
            print(f"diagnostic: {d}", file=sys.stderr)
    constraints = None
    if cfg.constraints:
        constraints = ConstraintModel.from_text(Path(cfg.constraints).read_text(encoding="utf-8"),
                                                source=cfg.constraints)
    manifest = None
    if cfg.build_manifest:
        manifest = parse_manifest(Path(cfg.build_manifest).read_text(encoding="utf-8"))
    out = Path(cfg.out)
    for alg in _algorithms(cfg):
        try:
            sets = sample_project(models, alg, cfg.scope, constraints, manifest, cfg.budget,
                                  cfg.headers, cfg.threshold, cfg.jobs)
        except InfeasibleAtScale as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        _write_samples(out, str(alg), sets, cfg)
        total = sum(len(s) for s in sets)
        print(f"{alg}: {len(sets)} sample set(s), {total} configuration(s)", file=sys.stderr)
    return EXIT_OK


def _write_samples(out: Path, name: str, sets: list[SampleSet], cfg: RunConfig) -> None:
    folder = out / _safe(name)
    for s in sets:
        (folder / (s.scope + ".csv")).parent.mkdir(parents=True, exist_ok=True)
        (folder / (s.scope + ".csv")).write_text(s.to_csv(), encoding="utf-8")
    _write_json(out / f"{_safe(name)}.json", {
        "tool": __version__,
        "run_config": cfg.to_dict(),
        "algorithm": name,
        "sets": [s.to_dict() for s in sets],
    })


# ---------------------------------------------------------------------------
# evaluate


def _load_sample_dir(path: Path) -> dict[str, list[SampleSet]]:
    out: dict[str, list[SampleSet]] = {}
    for f in sorted(path.glob("*.json")):
        data = json.loads(f.read_text(encoding="utf-8"))
        if "sets" not in data:
            continue
        out[data["algorithm"]] = [SampleSet.from_dict(s) for s in data["sets"]]
    return out


def cmd_evaluate(args: argparse.Namespace, cfg: RunConfig) -> int:
    corpus = ingest_corpus(Path(args.corpus).read_text(encoding="utf-8"))
    if not corpus:
        print("error: the fault corpus is empty", file=sys.stderr)
        return EXIT_FATAL
    sets_by_alg = _load_sample_dir(Path(args.samples))
    if not sets_by_alg:
        print(f"error: no sample sets found in {args.samples}", file=sys.stderr)
        return EXIT_FATAL
    report = evaluate_algorithms(corpus, sets_by_alg, combinations=args.combinations)
    report.meta = {"tool": __version__, "run_config": cfg.to_dict(), "corpus": args.corpus,
                   "samples": args.samples}
    if args.format == "json":
        json.dump(report.to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        sys.stdout.write(report.to_table())
    if args.report:
        _write_json(Path(args.report), report.to_dict())
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _grid(text: str) -> list[int]:
    """``1-40`` or ``1,2,5`` or a mix."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("n-grid values must be positive")
    return out


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("root", nargs="?", help="source tree or single .c file")
    p.add_argument("--config", help="JSON run config (or a previous output embedding one)")
    p.add_argument("--headers", action="store_true", default=None,
                   help="resolve #include files and add their options")
    p.add_argument("-I", dest="include_paths", action="append", metavar="DIR", help="include search path")
    p.add_argument("--build-manifest", help="per-file presence conditions from the build system")
    p.add_argument("--jobs", type=int, help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confsample", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"confsample {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("scan", help="extract conditional blocks and presence conditions")
    _common(scan)
    scan.add_argument("--emit-model", metavar="DIR", help="write one JSON model per file")

    sample = sub.add_parser("sample", help="generate sample sets")
    _common(sample)
    sample.add_argument("--models", metavar="DIR", help="use models written by 'scan --emit-model'")
    sample.add_argument("--alg", dest="algorithms", action="append", metavar="NAME",
                        help="algorithm (repeatable); 'a+b' for a combination")
    sample.add_argument("--t", type=int, action="append", help="add the t-wise algorithm for this t (2..6)")
    sample.add_argument("--constraints", help="constraint file, one formula per line")
    sample.add_argument("--global", dest="scope", action="store_const", const=GLOBAL,
                        help="one sample set over the merged option space")
    sample.add_argument("--random-n", type=int, help="random: configurations per file")
    sample.add_argument("--seed", type=int, help="random: seed")
    sample.add_argument("--repeat", type=int, help="random: runs per n, seeds seed..seed+repeat-1")
    sample.add_argument("--n-grid", type=_grid, help="random: values of n, e.g. 1-40")
    sample.add_argument("--budget", type=int, help="solver decision budget")
    sample.add_argument("--threshold", type=int, help="global option count above which t-wise refuses")
    sample.add_argument("-o", "--out", help="output directory (default: samples)")

    ev = sub.add_parser("evaluate", help="score sample sets against a fault corpus")
    ev.add_argument("samples", help="directory written by 'sample'")
    ev.add_argument("--corpus", required=True)
    ev.add_argument("--combinations", action="store_true", help="also score 2- and 3-way combinations")
    ev.add_argument("--format", choices=("table", "json"), default="table")
    ev.add_argument("--report", metavar="FILE", help="also write the JSON report here")
    ev.add_argument("--config", help="JSON run config to embed")
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = RunConfig.from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    for t in getattr(args, "t", None) or []:
        name = next((a for a, v in T_WISE.items() if v == t), None)
        if name is None:
            raise ValueError(f"--t must be between 2 and 6, got {t}")
        cfg.algorithms.append(name)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _run_config(args)
        if args.command == "scan":
            return cmd_scan(args, cfg)
        if args.command == "sample":
            return cmd_sample(args, cfg)
        return cmd_evaluate(args, cfg)
    except (OSError, ValueError, ScanError, CorpusError, Unsatisfiable, ResourceLimit) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
