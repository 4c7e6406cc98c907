"""Command-line pipeline runner.

Subcommands: ``config``, ``krig``, ``simulate``, ``score``, ``search``,
``export-bundle``, ``serve``. Exit codes: 0 ok, 2 usage/config, 3 data
errors, 4 numerical errors.

Output layout under ``--out`` (default ``out/``)::

    krig/<year>/intensity.json + pdf.json + manifest.json
    simulate/<year>/simulation.csv + manifest.json
    score/scores.json
    search/ranking.json
    bundle/meta.json + <year>/<seven bundle files>

Artifacts are byte-identical across reruns with the same inputs; wall-clock
timings live only in the manifests.
"""

from __future__ import annotations

import hashlib
import json
import sys
import time
from pathlib import Path

import click

from . import __version__
from .config import (
    ConfigError,
    covariance_from_config,
    dump_defaults,
    load_config,
    year_config,
)
from .errors import DataError, NumericalError
from .geodata import Dataset, FILE_NAMES, active_conflicts, serialize_dataset
from .grids import IntensityGrid
from .mdp import build_mdp, policy_iteration, policy_to_json_dict
from .network import (
    augment_with_sales,
    build_network,
    conflict_scaled_costs,
    network_to_json_dict,
)
from .simulate import (
    captives_from_csv,
    grid_search,
    score_port_totals,
    score_ships,
    simulate_year,
    simulation_to_csv,
    SimulationResult,
)
from .surface import krig_surface, normalize_to_pdf

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ConfigError as exc:
            _fail(EXIT_USAGE, str(exc))
        except DataError as exc:
            _fail(EXIT_DATA, str(exc))
        except NumericalError as exc:
            _fail(EXIT_NUMERIC, str(exc))
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _input_digests(data_dir: Path) -> dict[str, str]:
    out = {}
    for fname in FILE_NAMES.values():
        path = data_dir / fname
        if path.exists():
            out[fname] = _digest(path)
    return out


def _write_manifest(out_dir: Path, command: str, cfg: dict, data_dir: Path,
                    outputs: list[Path], started: float, **extra):
    manifest = {
        "command": command,
        "config": cfg,
        "inputs": _input_digests(data_dir),
        "outputs": [str(p) for p in outputs],
        "timing_s": round(time.time() - started, 3),
        "versions": _versions(),
        **extra,
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def _versions() -> dict[str, str]:
    import numpy
    import scipy
    return {"originsim": __version__, "numpy": numpy.__version__,
            "scipy": scipy.__version__}


def _parse_years(text: str) -> list[int]:
    years: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            years.extend(range(int(lo), int(hi) + 1))
        else:
            years.append(int(part))
    return years


@click.group()
@click.option("--data-dir", default="data/fixture", show_default=True,
              type=click.Path(path_type=Path),
              help="directory with the six input data files")
@click.option("--config", "config_path", default=None,
              type=click.Path(exists=True, path_type=Path),
              help="YAML config overriding the built-in defaults")
@click.option("--seed", type=int, default=None,
              help="override the config seed")
@click.option("--out", default="out", show_default=True,
              type=click.Path(path_type=Path), help="output root directory")
@click.option("--quiet", is_flag=True, help="suppress progress output")
@click.pass_context
def main(ctx, data_dir, config_path, seed, out, quiet):
    """Conflict-surface kriging and trade-network routing pipeline."""
    ctx.ensure_object(dict)
    ctx.obj.update(data_dir=data_dir, config_path=config_path, seed=seed,
                   out=out, quiet=quiet)


def _context(ctx) -> tuple[Dataset, dict, Path, Path]:
    obj = ctx.obj
    overrides = {"seed": obj["seed"]} if obj["seed"] is not None else None
    cfg = load_config(obj["config_path"], overrides)
    data = Dataset.from_dir(obj["data_dir"])
    return data, cfg, Path(obj["data_dir"]), Path(obj["out"])


def _say(ctx, message: str):
    if not ctx.obj["quiet"]:
        click.echo(message)


@main.command("config")
@click.option("--print-defaults", is_flag=True, default=True,
              help="print the full default configuration")
def cmd_config(print_defaults):
    """Print the complete default configuration as YAML."""
    if print_defaults:
        click.echo(dump_defaults(), nl=False)


@main.command("krig")
@click.option("--year", type=int, required=True)
@click.pass_context
@_guarded
def cmd_krig(ctx, year):
    """Krig one year's conflicts into intensity and pdf grids."""
    started = time.time()
    data, cfg, data_dir, out_root = _context(ctx)
    ycfg = year_config(cfg, year, data)
    intensity = krig_surface(data.conflicts, ycfg.covariance, ycfg.grid,
                             year, data.frame)
    pdf = normalize_to_pdf(intensity)
    out_dir = out_root / "krig" / str(year)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, grid in (("intensity.json", intensity), ("pdf.json", pdf)):
        path = out_dir / name
        path.write_text(grid.to_json() + "\n", encoding="utf-8")
        files.append(path)
    _write_manifest(out_dir, "krig", cfg, data_dir, files, started)
    _say(ctx, f"krig {year}: wrote {', '.join(str(f) for f in files)}")


@main.command("simulate")
@click.option("--years", required=True,
              help="year, list, or range (e.g. 1824-1826)")
@click.option("--workers", type=int, default=1, show_default=True)
@click.pass_context
@_guarded
def cmd_simulate(ctx, years, workers):
    """Run the full capture-and-routing pipeline for each year."""
    started = time.time()
    data, cfg, data_dir, out_root = _context(ctx)
    covariance = covariance_from_config(cfg, data)
    failures = []
    for year in _parse_years(years):
        try:
            ycfg = year_config(cfg, year, data, covariance=covariance)
            result = simulate_year(ycfg, data, n_workers=workers)
            out_dir = out_root / "simulate" / str(year)
            out_dir.mkdir(parents=True, exist_ok=True)
            csv_path = out_dir / "simulation.csv"
            csv_path.write_text(simulation_to_csv(result), encoding="utf-8")
            summary = dict(sorted(result.port_counts.items()))
            _write_manifest(out_dir, "simulate", cfg, data_dir, [csv_path],
                            started, counts={
                                "by_port": summary,
                                "unresolved": result.n_unresolved,
                            })
            _say(ctx, f"simulate {year}: {len(result.captives)} captives, "
                      f"unresolved {result.n_unresolved}, sales {summary}")
        except (DataError, NumericalError) as exc:
            failures.append((year, str(exc)))
            _say(ctx, f"simulate {year}: FAILED ({exc})")
    if failures:
        _fail(EXIT_DATA, "; ".join(f"{y}: {m}" for y, m in failures))


def _load_result_for_scoring(cfg: dict, data: Dataset, year: int,
                             out_root: Path) -> SimulationResult:
    csv_path = out_root / "simulate" / str(year) / "simulation.csv"
    if not csv_path.exists():
        raise DataError(f"missing simulation artifact {csv_path}")
    captives = tuple(captives_from_csv(csv_path.read_text(encoding="utf-8")))
    counts: dict[str, int] = {}
    unresolved = 0
    for c in captives:
        if c.sale == "UNRESOLVED":
            unresolved += 1
        else:
            counts[c.sale] = counts.get(c.sale, 0) + 1
    ycfg = year_config(cfg, year, data)
    return SimulationResult(config=ycfg, captives=captives,
                            port_counts=counts, n_unresolved=unresolved,
                            sale_cities=tuple(sorted(counts)),
                            frame=data.frame)


@main.command("score")
@click.option("--years", required=True)
@click.pass_context
@_guarded
def cmd_score(ctx, years):
    """Chi-square scores of simulated years against ports and ledgers."""
    data, cfg, data_dir, out_root = _context(ctx)
    table: dict[str, dict] = {}
    for year in _parse_years(years):
        result = _load_result_for_scoring(cfg, data, year, out_root)
        entry: dict = {}
        if any(p.year == year and p.port != "UNKNOWN" for p in data.ports):
            port_score = score_port_totals(result, data.ports, year)
            # UNKNOWN rows are reported but never enter the expected shares
            unknown = sum(p.count for p in data.ports
                          if p.year == year and p.port == "UNKNOWN")
            entry["port_totals"] = {"chi2": port_score.statistic,
                                    "df": port_score.df,
                                    "unknown_recorded": unknown}
        if any(l.year == year for l in data.ledgers):
            total, per_ship = score_ships(result, data.ledgers, data.regions)
            entry["ships"] = {
                "total_chi2": total,
                "per_ship": {sid: {"chi2": s.statistic, "df": s.df}
                             for sid, s in per_ship.items()},
            }
        table[str(year)] = entry
        parts = []
        if "port_totals" in entry:
            parts.append(f"ports chi2={entry['port_totals']['chi2']:.2f}")
        if "ships" in entry:
            parts.append(f"ships chi2={entry['ships']['total_chi2']:.2f}")
        click.echo(f"{year}: " + (", ".join(parts) if parts else "no data"))
    score_dir = out_root / "score"
    score_dir.mkdir(parents=True, exist_ok=True)
    out_path = score_dir / "scores.json"
    out_path.write_text(json.dumps(table, indent=1, sort_keys=True) + "\n",
                        encoding="utf-8")
    _say(ctx, f"wrote {out_path}")


@main.command("search")
@click.option("--years", required=True)
@click.pass_context
@_guarded
def cmd_search(ctx, years):
    """Grid-search c_max, epsilon, and reward_sd against the score data."""
    data, cfg, data_dir, out_root = _context(ctx)
    year_list = _parse_years(years)
    base = year_config(cfg, year_list[0], data)
    cells = grid_search(cfg["search"], data, year_list, base)
    search_dir = out_root / "search"
    search_dir.mkdir(parents=True, exist_ok=True)
    ranking = [{
        "c_max": c.c_max, "epsilon": c.epsilon, "reward_sd": c.reward_sd,
        "total_chi2": c.total_score, "per_year": c.per_year,
        "error": c.error,
    } for c in cells]
    out_path = search_dir / "ranking.json"
    out_path.write_text(json.dumps(ranking, indent=1) + "\n",
                        encoding="utf-8")
    for row in cells[:5]:
        click.echo(f"c_max={row.c_max} epsilon={row.epsilon} "
                   f"reward_sd={row.reward_sd} chi2={row.total_score:.2f}")
    _say(ctx, f"wrote {out_path}")


BUNDLE_FILES = ("conflicts.json", "intensity.json", "pdf.json",
                "simulation.csv", "network.json", "policy.json",
                "regions.json")


@main.command("export-bundle")
@click.option("--years", required=True)
@click.pass_context
@_guarded
def cmd_export_bundle(ctx, years):
    """Assemble the per-year artifact bundles the server reads."""
    data, cfg, data_dir, out_root = _context(ctx)
    bundle_root = out_root / "bundle"
    bundle_root.mkdir(parents=True, exist_ok=True)
    meta = {
        "frame": {
            "origin_lon": data.frame.origin_lon,
            "origin_lat": data.frame.origin_lat,
            "km_per_deg_lon": data.frame.km_per_deg_lon,
            "km_per_deg_lat": data.frame.km_per_deg_lat,
        },
        "kde_bandwidth_km": cfg["kde"]["bandwidth_km"],
        "versions": _versions(),
    }
    (bundle_root / "meta.json").write_text(
        json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    for year in _parse_years(years):
        krig_dir = out_root / "krig" / str(year)
        sim_csv = out_root / "simulate" / str(year) / "simulation.csv"
        for prerequisite in (krig_dir / "intensity.json",
                             krig_dir / "pdf.json", sim_csv):
            if not prerequisite.exists():
                raise DataError(f"missing prerequisite artifact "
                                f"{prerequisite}")
        out_dir = bundle_root / str(year)
        out_dir.mkdir(parents=True, exist_ok=True)

        events = active_conflicts(data.conflicts, year)
        (out_dir / "conflicts.json").write_text(json.dumps([
            {"id": e.id, "lon": e.lon, "lat": e.lat,
             "start_year": e.start_year, "end_year": e.end_year,
             "intensity": e.intensity} for e in events],
            indent=1) + "\n", encoding="utf-8")

        for name in ("intensity.json", "pdf.json"):
            (out_dir / name).write_bytes((krig_dir / name).read_bytes())
        (out_dir / "simulation.csv").write_bytes(sim_csv.read_bytes())

        intensity = IntensityGrid.from_json(
            (krig_dir / "intensity.json").read_text(encoding="utf-8"))
        net = build_network(data.cities, data.edges, year, data.frame)
        costs = conflict_scaled_costs(net, intensity, cfg["costs"]["c_max"],
                                      cfg["costs"]["samples_per_edge"])
        (out_dir / "network.json").write_text(
            json.dumps(network_to_json_dict(net, costs), indent=1) + "\n",
            encoding="utf-8")

        aug = augment_with_sales(net)
        ycfg = year_config(cfg, year, data)
        from .simulate import _per_sink_vector
        means = _per_sink_vector(ycfg.reward_mean, aug.sale_cities,
                                 "reward_mean")
        model = build_mdp(aug, costs, means, epsilon=ycfg.epsilon,
                          gamma=ycfg.gamma)
        policy, values = policy_iteration(model)
        (out_dir / "policy.json").write_text(
            json.dumps(policy_to_json_dict(aug, model, policy, values),
                       indent=1) + "\n", encoding="utf-8")

        regions = [r for r in data.regions if r.active(year)]
        (out_dir / "regions.json").write_bytes(
            serialize_dataset("regions", regions))
        _say(ctx, f"bundle {year}: {len(BUNDLE_FILES)} files in {out_dir}")


@main.command("serve")
@click.option("--bundle", default=None, type=click.Path(path_type=Path),
              help="bundle directory (default: <out>/bundle)")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--ui-dir", default=None, type=click.Path(path_type=Path),
              help="static frontend directory to mount at /")
@click.pass_context
@_guarded
def cmd_serve(ctx, bundle, host, port, ui_dir):
    """Serve the exported bundles over the JSON API."""
    import uvicorn

    from .server import create_app

    bundle_root = bundle if bundle is not None \
        else Path(ctx.obj["out"]) / "bundle"
    app = create_app(bundle_root, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
