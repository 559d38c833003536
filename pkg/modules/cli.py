"""
CLI - command-line surface: segment, sweep, dsd, linkage, certify, oracle, generate

Exit status: 0 on success, 1 on invalid input, 2 when a solve did not converge
(its artifacts are still written).
"""

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from modules.artifact_io import ArtifactWriter
from modules.certify import certify_alpha, tangent_witness_loc, verify_recovery_conditions
from modules.config_manager import ConfigManager
from modules.dictionary_io import DictionarySpec, load_dictionary, save_dictionary
from modules.dsd import CompositionSpec, compose_region, count_compositions, decompose
from modules.errors import CertificationError, CompositionError, InputError, ShapeCompError
from modules.fixtures import (
    basic_shapes_dictionary,
    block_grid_dictionary,
    glyph_dictionary,
    render_composition,
    write_puzzle,
)
from modules.grid import Image, chan_vese_measures, loc_holds, quantile_levels
from modules.image_io import read_observed_mask, read_pgm
from modules.linkage import is_basic
from modules.solver import (
    Solution,
    SolverConfig,
    SparseCscProblem,
    brute_force_cardinal_sc,
    extract_support,
    solve,
)

logger = logging.getLogger(__name__)

PROG = "shapecomp"
EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2
MAX_COUNTED_SHAPES = 30

COMMANDS = ("segment", "sweep", "dsd", "linkage", "certify", "oracle", "generate")
GENERATORS = {
    "blocks": block_grid_dictionary,
    "glyphs": glyph_dictionary,
    "shapes": basic_shapes_dictionary,
}


# ── Run configuration ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RunConfig:
    command: str
    out_dir: Path
    image: Optional[Path] = None
    dictionary: Optional[Path] = None
    observed: Optional[Path] = None
    tau: Optional[float] = None
    taus: tuple[float, ...] = ()
    lam: Optional[float] = None
    levels: Optional[tuple[float, float]] = None
    quantiles: tuple[float, float] = (0.15, 0.85)
    include: tuple[str, ...] = ()
    exclude: tuple[str, ...] = ()
    cardinality: int = 2
    kind: Optional[str] = None
    level: float = 0.5
    workers: int = 1
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command '{self.command}'")
        if self.command == "segment" and (self.tau is None) == (self.lam is None):
            raise InputError("segment needs exactly one of --tau or --lambda")
        if self.command == "sweep" and not self.taus:
            raise InputError("sweep needs --tau-list")
        for name, value in (("tau", self.tau), ("lambda", self.lam)):
            if value is not None and value < 0:
                raise InputError(f"--{name} must be nonnegative, got {value}")
        if any(t < 0 for t in self.taus):
            raise InputError(f"--tau-list values must be nonnegative, got {list(self.taus)}")
        if self.command not in ("dsd", "linkage", "generate") and self.image is None:
            raise InputError(f"{self.command} needs --image")
        if self.command != "generate" and self.dictionary is None:
            raise InputError(f"{self.command} needs --dict")
        if self.command in ("linkage", "certify") and not self.include:
            raise InputError(f"{self.command} needs --include")
        if self.workers < 1:
            raise InputError(f"sweep workers must be at least 1, got {self.workers}")


class _Parser(argparse.ArgumentParser):
    """Usage errors raise instead of exiting with argparse's status 2."""

    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _name_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Sparse convex shape composition for image segmentation.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--image", type=Path, help="input PGM image")
    parser.add_argument("--dict", dest="dictionary", type=Path, help="dictionary document (JSON)")
    parser.add_argument("--out", dest="out_dir", type=Path, required=True, help="output directory")
    parser.add_argument("--observed", type=Path, help="PGM mask of observed pixels (nonzero = observed)")
    parser.add_argument("--tau", type=float, help="L1 budget")
    parser.add_argument("--tau-list", type=_float_list, default=(), help="comma-separated budgets for sweep")
    parser.add_argument("--lambda", dest="lam", type=float, help="L1 penalty")
    parser.add_argument("--uin", type=float, help="inside intensity level")
    parser.add_argument("--uex", type=float, help="outside intensity level")
    parser.add_argument("--quantiles", type=_float_list, help="lo,hi quantiles for the intensity levels")
    parser.add_argument("--include", type=_name_list, default=(), help="included shapes (1-based indices or labels)")
    parser.add_argument("--exclude", type=_name_list, default=(), help="excluded shapes (1-based indices or labels)")
    parser.add_argument("--cardinality", type=int, default=2, help="oracle cardinality bound")
    parser.add_argument("--kind", choices=("blocks", "puzzle", "glyphs", "shapes"), help="generator for 'generate'")
    parser.add_argument("--iters", type=int, help="maximum solver iterations")
    parser.add_argument("--seed", type=int, help="solver seed")
    parser.add_argument("--workers", type=int, help="concurrent sweep solves")
    parser.add_argument("--config", type=Path, help="configuration file")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def parse_run_config(argv: Sequence[str], config: Optional[ConfigManager] = None) -> RunConfig:
    args = build_parser().parse_args(list(argv))
    if config is None:
        config = ConfigManager(args.config) if args.config else ConfigManager()
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    levels = None
    if (args.uin is None) != (args.uex is None):
        raise InputError("--uin and --uex must be given together")
    if args.uin is not None:
        levels = (args.uin, args.uex)
    quantiles = config.get_quantiles()
    if args.quantiles is not None:
        if len(args.quantiles) != 2:
            raise InputError(f"--quantiles needs two values, got {list(args.quantiles)}")
        quantiles = tuple(args.quantiles)
    if args.command == "generate" and args.kind is None:
        raise InputError("generate needs --kind")

    return RunConfig(
        command=args.command,
        out_dir=args.out_dir,
        image=args.image,
        dictionary=args.dictionary,
        observed=args.observed,
        tau=args.tau,
        taus=tuple(args.tau_list),
        lam=args.lam,
        levels=levels,
        quantiles=quantiles,
        include=args.include,
        exclude=args.exclude,
        cardinality=args.cardinality,
        kind=args.kind,
        level=float(config.get("segmentation.level", 0.5)),
        workers=int(args.workers if args.workers is not None else config.get("sweep.workers", 4)),
        solver=config.get_solver_config(max_iters=args.iters, seed=args.seed),
    )


# ── Shared loading ────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class _Inputs:
    dictionary: DictionarySpec
    image: Optional[Image] = None
    levels: Optional[tuple[float, float]] = None
    problem: Optional[SparseCscProblem] = None


def _load(run: RunConfig) -> _Inputs:
    spec = load_dictionary(run.dictionary)
    if run.image is None:
        return _Inputs(spec)
    image = read_pgm(run.image)
    if image.grid != spec.grid:
        raise InputError(f"image {run.image} is {image.grid.width}x{image.grid.height}, dictionary "
                         f"{run.dictionary} is {spec.grid.width}x{spec.grid.height}")
    if run.observed is not None:
        image = Image(image.grid, image.values, read_observed_mask(run.observed, image.grid))
    levels = run.levels or quantile_levels(image, *run.quantiles)
    problem = SparseCscProblem(chan_vese_measures(image, *levels), spec.masks)
    return _Inputs(spec, image, levels, problem)


def _resolve(names: Sequence[str], spec: DictionarySpec) -> tuple[int, ...]:
    out = []
    for name in names:
        if name.isdigit():
            index = int(name) - 1
            if not 0 <= index < len(spec):
                raise CompositionError(f"shape index {name} outside 1..{len(spec)}")
            out.append(index)
        else:
            out.append(spec.index_of(name))
    return tuple(out)


def _composition(run: RunConfig, spec: DictionarySpec) -> CompositionSpec:
    return CompositionSpec(_resolve(run.include, spec), _resolve(run.exclude, spec))


def _run_header(run: RunConfig, inputs: _Inputs) -> dict:
    header = {"command": run.command, "dictionary": str(run.dictionary), "shapes": len(inputs.dictionary)}
    if run.image is not None:
        header["image"] = str(run.image)
        header["levels"] = {"u_in": float(inputs.levels[0]), "u_ex": float(inputs.levels[1])}
    return header


# ── Commands ──────────────────────────────────────────────────────────────────

def _write_solution(writer: ArtifactWriter, prefix: str, run: RunConfig, inputs: _Inputs,
                    problem: SparseCscProblem, solution: Solution) -> int:
    labels = inputs.dictionary.labels
    support = extract_support(problem, solution.alpha, run.level)
    writer.write_mask(f"{prefix}segment.pgm", support)
    writer.write_alpha(f"{prefix}alpha.csv", solution.alpha, labels)
    return len(support)


def cmd_segment(run: RunConfig, writer: ArtifactWriter) -> int:
    inputs = _load(run)
    if run.tau is not None:
        problem = inputs.problem.with_budget(run.tau)
    else:
        problem = inputs.problem.with_penalty(run.lam)
    solution = solve(problem, run.solver)
    pixels = _write_solution(writer, "", run, inputs, problem, solution)
    report = _run_header(run, inputs)
    report.update({
        "mode": {"tau": run.tau} if run.tau is not None else {"lambda": run.lam},
        "solver": {"max_iters": run.solver.max_iters, "seed": run.solver.seed},
        "solution": solution.as_dict(inputs.dictionary.labels),
        "support_pixels": pixels,
    })
    writer.write_report("report.yaml", report)
    return EXIT_OK if solution.converged else EXIT_NOT_CONVERGED


def cmd_sweep(run: RunConfig, writer: ArtifactWriter) -> int:
    inputs = _load(run)
    base = inputs.problem
    base.members, base.B, base.integrals  # build the shared caches before threads start

    def one(tau: float) -> tuple[float, Solution, int]:
        problem = base.with_budget(tau)
        solution = solve(problem, run.solver)
        pixels = _write_solution(writer, f"tau_{tau:g}/", run, inputs, problem, solution)
        return tau, solution, pixels

    with ThreadPoolExecutor(max_workers=min(run.workers, len(run.taus))) as pool:
        results = list(pool.map(one, run.taus))

    rows = [(tau, s.objective, len(s.support[0]) + len(s.support[1])) for tau, s, _ in results]
    writer.write_sweep_summary("sweep.csv", rows)
    report = _run_header(run, inputs)
    report["runs"] = [
        {"tau": tau, "support_pixels": pixels, **s.as_dict(inputs.dictionary.labels)}
        for tau, s, pixels in results
    ]
    writer.write_report("report.yaml", report)
    stalled = [tau for tau, s, _ in results if not s.converged]
    if stalled:
        logger.warning("Sweep runs without convergence: tau=%s", stalled)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_dsd(run: RunConfig, writer: ArtifactWriter) -> int:
    inputs = _load(run)
    decomposition = decompose(inputs.dictionary.masks)
    report = _run_header(run, inputs)
    report["labels"] = inputs.dictionary.labels
    report.update(decomposition.as_dict())
    n = len(inputs.dictionary)
    if n <= MAX_COUNTED_SHAPES:
        report["compositions"] = count_compositions(n)
    writer.write_report("dsd.yaml", report)
    writer.write_text("bearing.txt", decomposition.bearing.to_text())
    return EXIT_OK


def cmd_linkage(run: RunConfig, writer: ArtifactWriter) -> int:
    inputs = _load(run)
    spec = _composition(run, inputs.dictionary)
    basic = is_basic(inputs.dictionary.masks, spec)
    report = _run_header(run, inputs)
    report["linkage"] = basic.linkage.as_dict()
    report["basic"] = basic.as_dict()
    writer.write_report("linkage.yaml", report)
    return EXIT_OK


def cmd_certify(run: RunConfig, writer: ArtifactWriter) -> int:
    inputs = _load(run)
    spec = _composition(run, inputs.dictionary)
    problem = inputs.problem
    labels = inputs.dictionary.labels
    basic = is_basic(problem.dictionary, spec)
    alpha = basic.linkage.full_alpha(problem.n_shapes)

    report = _run_header(run, inputs)
    report["composition"] = spec.as_dict()
    sigma = compose_region(problem.dictionary, spec)
    loc = loc_holds(problem.field, sigma)
    report["loc"] = {"holds": loc.holds, "violations": loc.violations}
    try:
        report["certificate"] = certify_alpha(problem, alpha).as_dict()
    except CertificationError as exc:
        report["certificate"] = {"error": str(exc)}
    if loc.holds:
        try:
            witness = tangent_witness_loc(problem, spec, alpha)
            report["tangent_witness"] = {"epsilon": witness.epsilon, "k": witness.k, "gain": witness.gain}
        except CertificationError as exc:
            report["tangent_witness"] = {"error": str(exc)}
    if basic.basic:
        report["recovery"] = verify_recovery_conditions(problem.dictionary, spec).as_dict(labels)
    else:
        report["recovery"] = {"error": f"composition {spec.as_dict()} is not basic", **basic.as_dict()}
    writer.write_report("certify.yaml", report)
    return EXIT_OK


def cmd_oracle(run: RunConfig, writer: ArtifactWriter) -> int:
    inputs = _load(run)
    result = brute_force_cardinal_sc(inputs.problem, run.cardinality)
    report = _run_header(run, inputs)
    report["cardinality"] = run.cardinality
    report.update(result.as_dict())
    if result.spec is not None:
        report["labels"] = {
            "include": [inputs.dictionary.labels[j] for j in result.spec.include],
            "exclude": [inputs.dictionary.labels[j] for j in result.spec.exclude],
        }
        writer.write_mask("oracle.pgm", compose_region(inputs.problem.dictionary, result.spec))
    writer.write_report("oracle.yaml", report)
    return EXIT_OK


def cmd_generate(run: RunConfig, writer: ArtifactWriter) -> int:
    if run.kind == "puzzle":
        write_puzzle(writer.out_dir)
        return EXIT_OK
    spec = GENERATORS[run.kind]()
    save_dictionary(writer.out_dir / "dictionary.json", spec)
    if run.include:
        labels = [spec.labels[j] for j in _resolve(run.include, spec)]
        writer.write_image("composition.pgm", render_composition(spec, labels))
        logger.info("Rendered %d %s entries to composition.pgm", len(labels), run.kind)
    return EXIT_OK


HANDLERS = {
    "segment": cmd_segment,
    "sweep": cmd_sweep,
    "dsd": cmd_dsd,
    "linkage": cmd_linkage,
    "certify": cmd_certify,
    "oracle": cmd_oracle,
    "generate": cmd_generate,
}


def run(config: RunConfig) -> int:
    writer = ArtifactWriter(config.out_dir)
    return HANDLERS[config.command](config, writer)


def main(argv: Optional[Sequence[str]] = None, config: Optional[ConfigManager] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        status = run(parse_run_config(argv, config))
    except ShapeCompError as exc:
        logger.error("%s", exc)
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if status == EXIT_NOT_CONVERGED:
        print(f"{PROG}: warning: solver did not converge; results were written anyway", file=sys.stderr)
    return status
