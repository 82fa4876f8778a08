"""Command-line interface for the visit optimizer"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import click

from .data_loader import DataLoader
from .defaults import BACKENDS, METHODS, OVERLAP_POLICIES, WEIGHT_SOURCES
from .errors import InvalidConfig, TooFewSessions, VisitOptimizerError
from .evaluation import (
    EvalReport,
    TimingReport,
    aggregate_reports,
    fit_assigner,
    grid_search,
    run_cross_validation,
    run_mixed,
    run_sequential,
    sweep_extraction,
    time_solver,
)
from .features import compute_feature_vectors, train_feature_bank
from .geo import PoiDatabase
from .models import (
    AnnotatedSession,
    ExtractionParams,
    FeatureParams,
    PopularityTable,
    RunConfig,
    Session,
    WeightVector,
)
from .pipeline import SessionAssigner
from .reporter import EvaluationReporter, write_report_csv, write_report_json
from .solvers import solution_to_dict, verify_solution
from .staypoint import extract_candidates
from .synthgen import CorpusGenerator, WorldConfig, export_corpus
from .utils import LOGGER_NAME, parse_offset, setup_logger

PATH_KEYS = ("poi_db", "trajectories", "annotations", "popularity", "bank", "weights", "output")


class VisitCLI(click.Group):
    """Maps domain errors to their documented exit codes."""

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except VisitOptimizerError as exc:
            logging.getLogger(LOGGER_NAME).error(f"❌ {exc}")
            ctx.exit(exc.exit_code)


# ---------- config assembly: defaults <- file <- flags ----------

def _param_set(value: Any) -> ExtractionParams:
    if isinstance(value, str):
        return ExtractionParams.parse(value)
    dist, secs = value
    return ExtractionParams(theta_dist=float(dist), theta_time=float(secs))


def build_run_config(values: Dict[str, Any]) -> RunConfig:
    """RunConfig from merged file/flag values; bad values raise InvalidConfig."""
    try:
        tz = parse_offset(str(values.get("timezone_offset", 0)))
        kwargs: Dict[str, Any] = {"tz_offset_minutes": tz}
        for key in PATH_KEYS:
            if values.get(key) is not None:
                kwargs[key] = Path(values[key])
        if values.get("param_sets"):
            kwargs["param_sets"] = tuple(_param_set(v) for v in values["param_sets"])
        kwargs["features"] = FeatureParams(**{**values.get("features", {}), "tz_offset_minutes": tz})
        for key in ("backend", "method", "weight_source", "eval_mode", "setting", "overlap_policy"):
            if values.get(key) is not None:
                kwargs[key] = str(values[key])
        # a weights path without an explicit source means "file"
        kwargs.setdefault("weight_source", "file" if "weights" in kwargs else "grid-search")
        if values.get("methods"):
            kwargs["methods"] = tuple(values["methods"])
        if values.get("grid"):
            kwargs["grid"] = tuple(float(g) for g in values["grid"])
        for key in ("folds", "seed", "n_jobs"):
            if values.get(key) is not None:
                kwargs[key] = int(values[key])
        return RunConfig(**kwargs)
    except InvalidConfig:
        raise
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"invalid configuration: {exc}") from None


def _config(shared: Dict[str, Any], **flags: Any) -> RunConfig:
    values = dict(shared["file_config"])
    values.update({k: v for k, v in shared["overrides"].items() if v is not None})
    values.update({k: v for k, v in flags.items() if v is not None and v != ()})
    return build_run_config(values)


def _extraction_flags(
    theta_dist: Optional[float], theta_time: Optional[float], param_set: Sequence[str]
) -> Optional[list[Any]]:
    """--param-set wins; otherwise --theta-dist/--theta-time form a single set."""
    if param_set:
        return list(param_set)
    if theta_dist is not None or theta_time is not None:
        base = ExtractionParams()
        return [[theta_dist or base.theta_dist, theta_time or base.theta_time]]
    return None


def _require(cfg: RunConfig, *keys: str) -> None:
    missing = [k for k in keys if getattr(cfg, k) is None]
    if missing:
        raise InvalidConfig(f"missing required path(s): {', '.join('--' + k.replace('_', '-') for k in missing)}")


def _per_user_file(path: Optional[Path], user: str) -> Optional[Path]:
    """A directory holds one <user>.json per user; a file is shared by everyone."""
    if path is None:
        return None
    return path / f"{user}.json" if path.is_dir() else path


def _load_sessions(loader: DataLoader, cfg: RunConfig) -> Dict[str, list[Session]]:
    _require(cfg, "trajectories")
    assert cfg.trajectories is not None
    return loader.load_trajectories(cfg.trajectories, cfg.tz_offset_minutes)


def _load_corpus(loader: DataLoader, cfg: RunConfig) -> Dict[str, list[AnnotatedSession]]:
    _require(cfg, "trajectories", "annotations")
    assert cfg.trajectories is not None and cfg.annotations is not None
    return loader.load_corpus(cfg.trajectories, cfg.annotations, cfg.tz_offset_minutes)


# ---------- Root group ----------
extraction_options = [
    click.option("--theta-dist", type=float, default=None, help="Stay-point radius threshold in meters."),
    click.option("--theta-time", type=float, default=None, help="Stay-point minimum duration in seconds."),
    click.option(
        "--param-set",
        multiple=True,
        help="Extraction setting 'dist,time'; repeat to build an exhaustive candidate set.",
    ),
]


def with_extraction_options(f: Callable[..., Any]) -> Callable[..., Any]:
    for option in reversed(extraction_options):
        f = option(f)
    return f


@click.group(cls=VisitCLI)
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False, path_type=str),
    default=None,
    help="JSON run config; flags override its values.",
)
@click.option("--seed", type=int, default=None, help="Seed for synthesis and fold assignment.")
@click.option("--out", type=click.Path(file_okay=False, path_type=str), default=None, help="Output directory.")
@click.option("--timezone-offset", type=str, default=None, help="Fixed UTC offset, e.g. +09:00 or 540.")
@click.option("--verbose", is_flag=True, help="Enable detailed debug logs.")
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: str | None,
    seed: int | None,
    out: str | None,
    timezone_offset: str | None,
    verbose: bool,
):
    """📍 Joint significant-location and visited-POI estimation"""
    logger = setup_logger(verbose)
    loader = DataLoader(logger)

    file_config = loader.load_run_config(config_path) if config_path else {}
    ctx.obj = {
        "logger": logger,
        "loader": loader,
        "file_config": file_config,
        "overrides": {"seed": seed, "output": out, "timezone_offset": timezone_offset},
    }


# ---------- Subcommand: synthetic corpus ----------
@cli.command("synth")
@click.option("--users", type=int, default=None, help="Number of users.")
@click.option("--sessions", type=int, default=None, help="Sessions (days) per user.")
@click.pass_obj
def cmd_synth(shared: Dict[str, Any], users: int | None, sessions: int | None):
    """Generate a synthetic POI world, users and annotated day traces."""
    logger = shared["logger"]
    cfg = _config(shared)

    world: Dict[str, Any] = dict(shared["file_config"].get("world", {}))
    world["seed"] = cfg.seed
    world["tz_offset_minutes"] = cfg.tz_offset_minutes
    if users is not None:
        world["n_users"] = users
    if sessions is not None:
        world["n_sessions"] = sessions
    world_config = WorldConfig.from_dict(world)

    corpus = CorpusGenerator(logger=logger, config=world_config).generate()
    manifest = export_corpus(corpus, cfg.output, world_config, logger=logger)
    logger.info(f"💾 Wrote {len(manifest['files'])} file(s) to {cfg.output}")


# ---------- Subcommand: candidate extraction ----------
@cli.command("extract")
@click.option("--trajectories", type=click.Path(path_type=str), default=None, help="Trajectory directory or file.")
@with_extraction_options
@click.pass_obj
def cmd_extract(
    shared: Dict[str, Any],
    trajectories: str | None,
    theta_dist: float | None,
    theta_time: float | None,
    param_set: tuple[str, ...],
):
    """Extract candidate stay-points (with overlap pairs) per session."""
    logger = shared["logger"]
    loader: DataLoader = shared["loader"]
    cfg = _config(shared, trajectories=trajectories, param_sets=_extraction_flags(theta_dist, theta_time, param_set))

    by_user = _load_sessions(loader, cfg)
    written = 0
    for user, sessions in sorted(by_user.items()):
        for session in sessions:
            cset = extract_candidates(session, cfg.param_sets)
            loader.write_candidates(cfg.output / "candidates" / f"{session.id}.json", session.id, cset)
            written += 1
    if written == 0:
        logger.warning("⚠️ No sessions found; nothing extracted")
    else:
        logger.info(f"✅ Extracted candidates for {written} session(s).")


# ---------- Subcommand: training ----------
@cli.command("train")
@click.option("--pois", "poi_db", type=click.Path(path_type=str), default=None, help="POI database JSON.")
@click.option("--trajectories", type=click.Path(path_type=str), default=None)
@click.option("--annotations", type=click.Path(path_type=str), default=None)
@click.option("--method", type=click.Choice(["je", "chain"]), default=None, help="Objective the weights are tuned for.")
@click.option("--backend", type=click.Choice(BACKENDS), default=None)
@click.option("--grid", type=float, multiple=True, help="Weight grid value; repeat for several.")
@click.option("--skip-weights", is_flag=True, help="Train feature banks only.")
@click.option("--n-jobs", type=int, default=None, help="Worker processes for the grid search.")
@with_extraction_options
@click.pass_obj
def cmd_train(
    shared: Dict[str, Any],
    poi_db: str | None,
    trajectories: str | None,
    annotations: str | None,
    method: str | None,
    backend: str | None,
    grid: tuple[float, ...],
    skip_weights: bool,
    n_jobs: int | None,
    theta_dist: float | None,
    theta_time: float | None,
    param_set: tuple[str, ...],
):
    """Train one feature bank (and grid-searched weights) per user."""
    logger = shared["logger"]
    loader: DataLoader = shared["loader"]
    cfg = _config(
        shared,
        poi_db=poi_db,
        trajectories=trajectories,
        annotations=annotations,
        method=method,
        backend=backend,
        grid=grid,
        n_jobs=n_jobs,
        param_sets=_extraction_flags(theta_dist, theta_time, param_set),
    )
    _require(cfg, "poi_db")
    assert cfg.poi_db is not None
    db = loader.load_pois(cfg.poi_db)
    corpus = _load_corpus(loader, cfg)

    for user, sessions in corpus.items():
        bank = train_feature_bank(sessions, db, cfg.features)
        loader.write_bank(cfg.output / "banks" / f"{user}.json", bank)
        if skip_weights:
            continue
        backend_name = "chain" if cfg.method == "chain" else cfg.backend
        result = grid_search(
            sessions, db, cfg.features, cfg.param_sets, cfg.grid, backend_name, bank=bank, n_jobs=cfg.n_jobs, log=logger
        )
        loader.write_weights(cfg.output / "weights" / f"{user}.json", result.weights)
        logger.info(f"✅ {user}: trained on {len(sessions)} session(s), {result.evaluations:,} weight vector(s) tried")


# ---------- Subcommand: assignment ----------
@cli.command("assign")
@click.option("--pois", "poi_db", type=click.Path(path_type=str), default=None, help="POI database JSON.")
@click.option("--trajectories", type=click.Path(path_type=str), default=None)
@click.option("--annotations", type=click.Path(path_type=str), default=None, help="Train inline from these.")
@click.option("--bank", type=click.Path(path_type=str), default=None, help="Feature bank file or per-user directory.")
@click.option("--weights", type=click.Path(path_type=str), default=None, help="Weights file or per-user directory.")
@click.option(
    "--weight-source",
    type=click.Choice(WEIGHT_SOURCES),
    default=None,
    help="Read --weights or grid-search them (default: file when --weights is given).",
)
@click.option("--popularity", type=click.Path(path_type=str), default=None, help="Check-in counts (NCI).")
@click.option("--method", type=click.Choice(METHODS), default=None)
@click.option("--backend", type=click.Choice(BACKENDS), default=None)
@click.option("--overlap-policy", type=click.Choice(OVERLAP_POLICIES), default=None)
@click.option("--dump-problem", is_flag=True, help="Write each problem's coefficients (17 digits).")
@click.option("--dump-solution", is_flag=True, help="Write each full solution (17 digits).")
@click.option("--timing", is_flag=True, help="Record per-session solve times.")
@with_extraction_options
@click.pass_obj
def cmd_assign(
    shared: Dict[str, Any],
    poi_db: str | None,
    trajectories: str | None,
    annotations: str | None,
    bank: str | None,
    weights: str | None,
    weight_source: str | None,
    popularity: str | None,
    method: str | None,
    backend: str | None,
    overlap_policy: str | None,
    dump_problem: bool,
    dump_solution: bool,
    timing: bool,
    theta_dist: float | None,
    theta_time: float | None,
    param_set: tuple[str, ...],
):
    """Select significant locations and assign visited POIs per session."""
    logger = shared["logger"]
    loader: DataLoader = shared["loader"]
    cfg = _config(
        shared,
        poi_db=poi_db,
        trajectories=trajectories,
        annotations=annotations,
        bank=bank,
        weights=weights,
        weight_source=weight_source,
        popularity=popularity,
        method=method,
        backend=backend,
        overlap_policy=overlap_policy,
        param_sets=_extraction_flags(theta_dist, theta_time, param_set),
    )
    _require(cfg, "poi_db")
    assert cfg.poi_db is not None
    db = loader.load_pois(cfg.poi_db)
    pop = loader.load_popularity(cfg.popularity) if cfg.popularity else None
    if cfg.method == "nci" and pop is None:
        raise InvalidConfig("method 'nci' requires --popularity")
    by_user = _load_sessions(loader, cfg)
    training = _load_corpus(loader, cfg) if cfg.annotations and cfg.bank is None else {}

    for user, sessions in sorted(by_user.items()):
        assigner = _assigner_for(user, cfg, db, pop, training, loader, logger)
        for session in sessions:
            result = assigner.assign(session)
            sol = result.solution
            if result.problem is not None and not verify_solution(result.problem, sol):
                logger.error(f"❌ {session.id}: solution violates the problem constraints")
            doc: Dict[str, Any] = {
                "session": session.id,
                "method": cfg.method,
                "backend": sol.backend,
                "objective": sol.objective,
                "visits": [
                    {"sp_index": v.sp_index, "poi_id": v.poi_id, "bt": v.bt, "et": v.et, "lng": v.lng, "lat": v.lat}
                    for v in sol.visits
                ],
            }
            if timing:
                doc["seconds"] = result.seconds
            loader.write_json(cfg.output / "assignments" / f"{session.id}.json", doc)
            if dump_problem and result.problem is not None:
                loader.write_json(cfg.output / "problems" / f"{session.id}.json", result.problem.to_dict(), exact=True)
            if dump_solution:
                loader.write_json(cfg.output / "solutions" / f"{session.id}.json", solution_to_dict(sol), exact=True)
        logger.info(f"✅ {user}: assigned {len(sessions)} session(s) with {cfg.method}")


def _assigner_for(
    user: str,
    cfg: RunConfig,
    db: PoiDatabase,
    pop: Optional[PopularityTable],
    training: Dict[str, list[AnnotatedSession]],
    loader: DataLoader,
    logger: logging.Logger,
) -> SessionAssigner:
    fixed = _fixed(loader, cfg, user)

    if cfg.method in ("nn", "nci") or cfg.bank is None:
        if cfg.method in ("je", "chain") and not training.get(user):
            raise InvalidConfig(f"{user}: method {cfg.method!r} needs --bank or --annotations to train from")
        return fit_assigner(
            training.get(user, []), db, cfg, method=cfg.method, popularity=pop, weights=fixed, log=logger
        )

    bank_path = _per_user_file(cfg.bank, user)
    assert bank_path is not None
    if fixed is None:
        raise InvalidConfig(f"{user}: --bank needs --weights; grid search trains from --annotations instead")
    return SessionAssigner(
        logger=logger,
        db=db,
        params=cfg.features,
        param_sets=cfg.param_sets,
        method=cfg.method,
        backend=cfg.backend,
        bank=loader.load_bank(bank_path),
        weights=fixed,
        popularity=pop,
        overlap_policy=cfg.overlap_policy,
    )


# ---------- Subcommand: evaluation ----------
@cli.command("evaluate")
@click.option("--pois", "poi_db", type=click.Path(path_type=str), default=None, help="POI database JSON.")
@click.option("--trajectories", type=click.Path(path_type=str), default=None)
@click.option("--annotations", type=click.Path(path_type=str), default=None)
@click.option("--popularity", type=click.Path(path_type=str), default=None, help="Check-in counts (NCI).")
@click.option("--weights", type=click.Path(path_type=str), default=None, help="Fixed weights instead of grid search.")
@click.option(
    "--weight-source",
    type=click.Choice(WEIGHT_SOURCES),
    default=None,
    help="Read --weights or grid-search them (default: file when --weights is given).",
)
@click.option("--methods", "method_list", type=click.Choice(METHODS), multiple=True, help="Repeat for several.")
@click.option("--mode", "eval_mode", type=click.Choice(["cv", "seq", "sweep"]), default=None)
@click.option("--setting", type=click.Choice(["personalized", "mixed"]), default=None)
@click.option("--folds", type=int, default=None)
@click.option("--backend", type=click.Choice(BACKENDS), default=None)
@click.option("--grid", type=float, multiple=True, help="Weight grid value; repeat for several.")
@click.option("--overlap-policy", type=click.Choice(OVERLAP_POLICIES), default=None)
@click.option("--n-jobs", type=int, default=None, help="Worker processes for the grid search.")
@click.option("--timing", is_flag=True, help="Also time the solver per stay-point count.")
@with_extraction_options
@click.pass_obj
def cmd_evaluate(
    shared: Dict[str, Any],
    poi_db: str | None,
    trajectories: str | None,
    annotations: str | None,
    popularity: str | None,
    weights: str | None,
    weight_source: str | None,
    method_list: tuple[str, ...],
    eval_mode: str | None,
    setting: str | None,
    folds: int | None,
    backend: str | None,
    grid: tuple[float, ...],
    overlap_policy: str | None,
    n_jobs: int | None,
    timing: bool,
    theta_dist: float | None,
    theta_time: float | None,
    param_set: tuple[str, ...],
):
    """Run cross-validation, sequential evaluation or the extraction sweep."""
    logger = shared["logger"]
    loader: DataLoader = shared["loader"]
    cfg = _config(
        shared,
        poi_db=poi_db,
        trajectories=trajectories,
        annotations=annotations,
        popularity=popularity,
        weights=weights,
        weight_source=weight_source,
        methods=method_list,
        eval_mode=eval_mode,
        setting=setting,
        folds=folds,
        backend=backend,
        grid=grid,
        overlap_policy=overlap_policy,
        n_jobs=n_jobs,
        param_sets=_extraction_flags(theta_dist, theta_time, param_set),
    )
    _require(cfg, "poi_db")
    assert cfg.poi_db is not None
    db = loader.load_pois(cfg.poi_db)
    corpus = _load_corpus(loader, cfg)
    pop = loader.load_popularity(cfg.popularity) if cfg.popularity else None
    if "nci" in cfg.methods and pop is None:
        raise InvalidConfig("method 'nci' requires --popularity")
    reporter = EvaluationReporter()

    if cfg.eval_mode == "sweep":
        rows = sweep_extraction([a for group in corpus.values() for a in group], db)
        reporter.emit(sweep=rows)
        write_report_json(cfg.output / "report.json", [], loader=loader, sweep=rows)
        return

    reports: list[EvalReport] = []
    for method in cfg.methods:
        logger.info(f"🚀 Evaluating {method} ({cfg.eval_mode}, {cfg.setting}) on {len(corpus)} user(s)...")
        if cfg.eval_mode == "cv" and cfg.setting == "mixed":
            mixed = run_mixed(corpus, cfg.folds, cfg, db=db, method=method, popularity=pop, weights=_fixed(loader, cfg))
            reports.extend(mixed.values())
            continue
        for user, sessions in corpus.items():
            fixed = _fixed(loader, cfg, user)
            try:
                if cfg.eval_mode == "cv":
                    report = run_cross_validation(
                        sessions, cfg.folds, cfg, db=db, method=method, popularity=pop, weights=fixed, user_id=user, log=logger
                    )
                else:
                    report = run_sequential(
                        sessions, cfg, db=db, method=method, popularity=pop, weights=fixed, user_id=user, log=logger
                    )
            except TooFewSessions as exc:
                logger.warning(f"⚠️ Skipping {user} for {method}: {exc}")
                report = EvalReport(user_id=user, method=method, mode=cfg.eval_mode, skipped=str(exc))
            reports.append(report)

    timing_report = None
    if timing:
        timing_report = _time_corpus(corpus, db, cfg, loader, logger)

    summaries = aggregate_reports(reports)
    reporter.emit(reports=reports, summaries=summaries, timing=timing_report)
    write_report_json(
        cfg.output / "report.json", reports, summaries, loader=loader, timing=timing_report, include_timing=timing
    )
    write_report_csv(cfg.output / "report.csv", reports, loader=loader, include_timing=timing)


def _fixed(loader: DataLoader, cfg: RunConfig, user: str | None = None) -> Optional[WeightVector]:
    """Weights read from file, or None when the drivers should grid-search them."""
    if cfg.weight_source == "grid-search" or cfg.weights is None:
        return None
    if user is None:
        return None if cfg.weights.is_dir() else loader.load_weights(cfg.weights)
    path = _per_user_file(cfg.weights, user)
    return loader.load_weights(path) if path is not None else None


def _time_corpus(
    corpus: Dict[str, list[AnnotatedSession]],
    db: PoiDatabase,
    cfg: RunConfig,
    loader: DataLoader,
    logger: logging.Logger,
) -> TimingReport:
    features = []
    for user, sessions in corpus.items():
        if not sessions:
            continue
        bank = train_feature_bank(sessions, db, cfg.features)
        for ann in sessions:
            features.append(compute_feature_vectors(extract_candidates(ann.session, cfg.param_sets), bank, cfg.features, db))
    return time_solver(features, cfg.backend, _fixed(loader, cfg), log=logger)


def main() -> None:
    cli(prog_name="visit-optimize")


if __name__ == "__main__":
    main()
