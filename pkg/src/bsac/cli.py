"""Command-line front end: flat key=value configuration, subcommand dispatch,
run directories with manifests, and deterministic output tables.

Every run writes into its own directory (timestamp plus config hash) and
nothing outside it. The manifest embeds the fully resolved configuration
between [config]/[end config] markers; feeding the manifest back in as the
configuration reproduces the run bitwise, which is the backbone of the
determinism guarantee. Floats are serialized through repr so the tables
round-trip exactly.
"""

from __future__ import annotations

import argparse
import difflib
import hashlib
import sys
import time
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError, InputError, RunAbort
from .nonlinearity import (NonlinearitySpec, make_spec, validate_assumptions)
from .mesh import Mesh
from .energy import FieldPair, compute_energy
from .dynamics import (Checkpoint, ROW_HEADER, RunConfig, TrajectoryRecord,
                       initial_state, read_checkpoint, run_trajectory,
                       write_checkpoint)
from .steady_spectral import (SpectralReport, compute_coercivity_margin,
                              eigen_solve, solve_stationary_newton)
from .operators import (assemble_surface_shifted_pair,
                        assemble_wentzell_robin_pair)
from .analysis import RateFit, fit_decay_rate, k_sweep, ls_probe

SUBCOMMANDS = ("simulate", "steady", "spectrum", "ksweep", "ratefit",
               "probe", "validate")

_BOOL_WORDS = {"true": True, "false": False, "1": True, "0": False,
               "yes": True, "no": False, "on": True, "off": False}


def _parse_bool(text: str) -> bool:
    try:
        return _BOOL_WORDS[text.strip().lower()]
    except KeyError:
        raise ValueError(f"not a boolean: {text!r}") from None


def _parse_float_list(text: str):
    text = text.strip()
    if not text:
        return []
    return [float(tok) for tok in text.replace(";", ",").split(",") if tok.strip()]


# key -> (caster, default). Order here is the canonical echo order.
KEY_SPECS = {
    "geometry": (str, "disk"),
    "radius": (float, 1.0),
    "length": (float, 1.0),
    "n_r": (int, 64),
    "n_theta": (int, 128),
    "n": (int, 64),
    "K": (float, 1.0),
    "scheme": (str, "fully_implicit"),
    "dt": (float, 0.05),
    "dt_min": (float, 1e-7),
    "dt_max": (float, 1.0),
    "t_final": (float, 50.0),
    "newton_tol": (float, 1e-10),
    "newton_max_iter": (int, 50),
    "adaptive": (_parse_bool, True),
    "reject_energy_increase": (_parse_bool, True),
    "seed": (int, 0),
    "init_kind": (str, "smoothed_noise"),
    "init_mean": (float, 0.4),
    "init_amplitude": (float, 0.2),
    "init_smoothing": (float, 0.02),
    "sample_every": (int, 1),
    "checkpoint_every": (int, 50),
    "bulk_potential": (str, "double_well"),
    "bulk_amplitude": (float, 1.0),
    "bulk_width": (float, 1.0),
    "bulk_coeffs": (_parse_float_list, []),
    "surface_potential": (str, "double_well"),
    "surface_amplitude": (float, 1.0),
    "surface_width": (float, 1.0),
    "surface_coeffs": (_parse_float_list, []),
    "coupling": (str, "affine"),
    "coupling_alpha": (float, 1.0),
    "coupling_eta": (float, 0.0),
    "coupling_scale": (float, 1.0),
    "coupling_gain": (float, 1.0),
    "coupling_offset": (float, 0.0),
    "eigen_count": (int, 12),
    "max_m": (int, 96),
    "steady_tol": (float, 1e-11),
    "steady_guess": (float, 0.9),
    "probe_radius": (float, 0.5),
    "rate_model": (str, "auto"),
    "rate_series": (str, "dual_norm"),
    "k_values": (_parse_float_list, [1e-1, 1e-2, 1e-3, 1e-4]),
    "sweep_reference": (str, "transmission_limit"),
    "validate_scan_lo": (float, -10.0),
    "validate_scan_hi": (float, 10.0),
    "validate_points": (int, 2001),
}

_FLOAT_KEYS = {k for k, (cast, _) in KEY_SPECS.items() if cast is float}
_LIST_KEYS = {k for k, (cast, _) in KEY_SPECS.items() if cast is _parse_float_list}


@dataclass
class ResolvedConfig:
    values: dict
    run_config: RunConfig
    spec: NonlinearitySpec

    @property
    def geometry(self) -> str:
        return self.values["geometry"]

    def echo(self) -> str:
        lines = []
        for key in KEY_SPECS:
            val = self.values[key]
            if key in _FLOAT_KEYS:
                text = repr(float(val))
            elif key in _LIST_KEYS:
                text = ",".join(repr(float(v)) for v in val)
            elif isinstance(val, bool):
                text = "true" if val else "false"
            else:
                text = str(val)
            lines.append(f"{key} = {text}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.echo().encode()).hexdigest()[:16]


def _extract_config_lines(text: str):
    lines = text.splitlines()
    if any(line.strip() == "[config]" for line in lines):
        inside = False
        picked = []
        for line in lines:
            stripped = line.strip()
            if stripped == "[config]":
                inside = True
                continue
            if inside and stripped.startswith("["):
                break
            if inside:
                picked.append(line)
        return picked
    return lines


def _build_spec(values: dict, errors: list) -> NonlinearitySpec | None:
    def pot_params(side):
        kind = values[f"{side}_potential"]
        if kind == "scaled":
            return {"amplitude": values[f"{side}_amplitude"],
                    "width": values[f"{side}_width"]}
        if kind == "polynomial":
            return {"coeffs": values[f"{side}_coeffs"]}
        return {}

    ckind = values["coupling"]
    if ckind == "affine":
        cparams = {"alpha": values["coupling_alpha"],
                   "eta": values["coupling_eta"]}
    elif ckind == "tanh":
        cparams = {"scale": values["coupling_scale"],
                   "gain": values["coupling_gain"],
                   "offset": values["coupling_offset"]}
    else:
        cparams = {}
    try:
        return make_spec(values["bulk_potential"], values["surface_potential"],
                         ckind, bulk_params=pot_params("bulk"),
                         surface_params=pot_params("surface"),
                         coupling_params=cparams,
                         scan_range=(values["validate_scan_lo"],
                                     values["validate_scan_hi"]),
                         scan_points=values["validate_points"])
    except (ConfigurationError, InputError, ValueError) as exc:
        errors.append(str(exc))
        return None


def parse_config(source: str | Path, overrides: dict | None = None) -> ResolvedConfig:
    """Resolve a config from a file path or inline text.

    Manifest files work directly: only the [config] section is read. All
    omitted keys take their documented defaults; every problem found is
    reported in one ConfigurationError.
    """
    text = str(source)
    if text.strip() and "\n" not in text:
        if "=" not in text:
            path = Path(text)
            if not path.is_file():
                raise ConfigurationError(f"config file not found: {path}")
            text = path.read_text(encoding="utf-8")
        elif Path(text).is_file():
            text = Path(text).read_text(encoding="utf-8")

    values = {key: default for key, (_, default) in KEY_SPECS.items()}
    errors = []
    for lineno, line in enumerate(_extract_config_lines(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            errors.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in KEY_SPECS:
            near = difflib.get_close_matches(key, KEY_SPECS, n=1)
            hint = f" (nearest valid key: {near[0]})" if near else ""
            errors.append(f"unknown key {key!r}{hint}")
            continue
        cast = KEY_SPECS[key][0]
        try:
            values[key] = cast(raw)
        except (ValueError, TypeError):
            errors.append(f"key {key!r}: expected {cast.__name__}, got {raw!r}")
    for key, val in (overrides or {}).items():
        if key not in KEY_SPECS:
            near = difflib.get_close_matches(key, KEY_SPECS, n=1)
            hint = f" (nearest valid key: {near[0]})" if near else ""
            errors.append(f"unknown key {key!r}{hint}")
            continue
        try:
            values[key] = KEY_SPECS[key][0](str(val))
        except (ValueError, TypeError):
            errors.append(f"key {key!r}: bad override {val!r}")

    if values["geometry"] not in ("disk", "interval"):
        errors.append(f"geometry must be disk or interval, got {values['geometry']!r}")
    if values["K"] <= 0:
        errors.append("K must be positive")

    spec = _build_spec(values, errors)
    run_config = None
    if not errors:
        try:
            run_config = RunConfig(
                geometry=values["geometry"], radius=values["radius"],
                length=values["length"], n_r=values["n_r"],
                n_theta=values["n_theta"], n=values["n"], K=values["K"],
                scheme=values["scheme"], dt=values["dt"],
                dt_min=values["dt_min"], dt_max=values["dt_max"],
                t_final=values["t_final"], newton_tol=values["newton_tol"],
                newton_max_iter=values["newton_max_iter"],
                adaptive=values["adaptive"],
                reject_energy_increase=values["reject_energy_increase"],
                seed=values["seed"], init_kind=values["init_kind"],
                init_mean=values["init_mean"],
                init_amplitude=values["init_amplitude"],
                init_smoothing=values["init_smoothing"],
                sample_every=values["sample_every"],
                checkpoint_every=values["checkpoint_every"], spec=spec)
        except ConfigurationError as exc:
            errors.append(str(exc))
    if errors:
        raise ConfigurationError("configuration invalid:\n  " + "\n  ".join(errors))
    return ResolvedConfig(values, run_config, spec)


def _fmt(v) -> str:
    return repr(float(v))


def _trajectory_lines(record: TrajectoryRecord):
    lines = [ROW_HEADER]
    for row in record.rows():
        lines.append(",".join(_fmt(v) for v in row))
    return lines


class RunManifest:
    def __init__(self, subcommand: str, resolved: ResolvedConfig):
        self.subcommand = subcommand
        self.resolved = resolved
        self.hashes: dict = {}
        self.timings: dict = {}
        self.checks: dict = {}
        self.errors: list = []

    def exit_status(self) -> int:
        if self.errors:
            return 2
        return 0 if all(self.checks.values()) else 1

    def render(self) -> str:
        lines = [
            "# run manifest",
            f"artifact_version = {__version__}",
            f"subcommand = {self.subcommand}",
            f"created = {datetime.now().isoformat(timespec='seconds')}",
            f"config_hash = {self.resolved.config_hash()}",
        ]
        lines += [f"hash_{k} = {v}" for k, v in self.hashes.items()]
        lines += [f"timing_{k} = {v:.3f}s" for k, v in self.timings.items()]
        lines += [f"check_{k} = {'ok' if v else 'FAIL'}" for k, v in self.checks.items()]
        lines += [f"error = {e}" for e in self.errors]
        lines.append(f"exit_status = {self.exit_status()}")
        lines.append("[config]")
        lines.append(self.resolved.echo().rstrip("\n"))
        lines.append("[end config]")
        return "\n".join(lines) + "\n"


def _make_run_dir(root: Path, subcommand: str, resolved: ResolvedConfig) -> Path:
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    base = f"{subcommand}-{stamp}-{resolved.config_hash()[:8]}"
    candidate = root / base
    suffix = 0
    while candidate.exists():
        suffix += 1
        candidate = root / f"{base}-{suffix}"
    candidate.mkdir(parents=True)
    return candidate


class _Phase:
    def __init__(self, manifest: RunManifest, name: str):
        self.manifest = manifest
        self.name = name

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.manifest.timings[self.name] = time.perf_counter() - self.start
        return False


def _cmd_simulate(resolved: ResolvedConfig, run_dir: Path, manifest: RunManifest,
                  resume_path: str | None) -> None:
    cfg = resolved.run_config
    mesh = cfg.build_mesh()
    manifest.hashes["mesh"] = mesh.content_hash()
    resume = None
    if resume_path is not None:
        cp, stored_hash = read_checkpoint(resume_path)
        if stored_hash and stored_hash != resolved.config_hash():
            raise ConfigurationError(
                "checkpoint belongs to a different configuration")
        resume = cp
    with _Phase(manifest, "simulate"):
        try:
            record = run_trajectory(cfg, mesh=mesh, resume=resume)
            aborted = False
        except RunAbort as abort:
            record = abort.partial_record
            aborted = True
            manifest.errors.append(str(abort))
    (run_dir / "trajectory.csv").write_text(
        "\n".join(_trajectory_lines(record)) + "\n")
    for cp in record.checkpoints:
        write_checkpoint(run_dir / f"checkpoint_{cp.step}.txt", cp,
                         resolved.config_hash())
    total = record.energy_total
    monotone = bool(np.all(np.diff(total)
                           <= 1e-12 * np.maximum(1.0, np.abs(total[:-1]))))
    manifest.checks["energy_monotone"] = monotone
    manifest.checks["completed"] = not aborted
    manifest.checks["rejections_recoverable"] = not record.diagnostics.get("aborted", False)


def _cmd_steady(resolved: ResolvedConfig, run_dir: Path, manifest: RunManifest) -> None:
    cfg = resolved.run_config
    mesh = cfg.build_mesh()
    manifest.hashes["mesh"] = mesh.content_hash()
    g = resolved.values["steady_guess"]
    guess = FieldPair.constant(mesh, g, g)
    with _Phase(manifest, "newton"):
        eq = solve_stationary_newton(mesh, resolved.spec, cfg.K, guess,
                                     resolved.values["steady_tol"])
    lines = [
        f"converged = {str(eq.converged).lower()}",
        f"residual_dual_norm = {_fmt(eq.residual_dual_norm)}",
        f"newton_iterations = {eq.newton_iterations}",
        f"stability_tag = {_fmt(eq.stability_tag)}",
        "bulk = " + " ".join(float(v).hex() for v in eq.state.bulk),
        "surface = " + " ".join(float(v).hex() for v in eq.state.surface),
    ]
    (run_dir / "equilibrium.txt").write_text("\n".join(lines) + "\n")
    manifest.checks["newton_converged"] = eq.converged


def _cmd_spectrum(resolved: ResolvedConfig, run_dir: Path, manifest: RunManifest) -> None:
    cfg = resolved.run_config
    mesh = cfg.build_mesh()
    manifest.hashes["mesh"] = mesh.content_hash()
    count = resolved.values["eigen_count"]
    with _Phase(manifest, "eigen"):
        wr = eigen_solve(assemble_wentzell_robin_pair(mesh, cfg.K),
                         min(count, mesh.n_bulk))
        surf = eigen_solve(assemble_surface_shifted_pair(mesh),
                           min(count, mesh.n_surface))
    lines = [f"K = {_fmt(cfg.K)}", "bulk spectrum (boundary-weighted pair):"]
    lines += [f"  lambda[{i + 1}] = {_fmt(v)}" for i, v in enumerate(wr.values)]
    lines.append("surface spectrum (shifted pair):")
    lines += [f"  mu[{j + 1}] = {_fmt(v)}" for j, v in enumerate(surf.values)]
    lines.append(f"max_residual = {_fmt(max(wr.residuals.max(), surf.residuals.max()))}")
    lines.append(f"gram_defect = {_fmt(max(wr.gram_defect, surf.gram_defect))}")
    (run_dir / "spectrum.txt").write_text("\n".join(lines) + "\n")
    manifest.checks["eigen_residuals"] = bool(
        max(wr.residuals.max(), surf.residuals.max()) < 1e-8)
    manifest.checks["gram_identity"] = bool(
        max(wr.gram_defect, surf.gram_defect) < 1e-8)


def _cmd_ksweep(resolved: ResolvedConfig, run_dir: Path, manifest: RunManifest) -> None:
    cfg = resolved.run_config
    with _Phase(manifest, "sweep"):
        table = k_sweep(cfg, resolved.values["k_values"],
                        resolved.values["sweep_reference"])
    (run_dir / "sweep.csv").write_text("\n".join(table.csv_lines()) + "\n")
    gaps = [r.gap for r in sorted(table.rows, key=lambda r: r.K)]
    manifest.checks["gap_monotone"] = bool(np.all(np.diff(gaps) >= 0))
    manifest.checks["slopes_finite"] = bool(np.isfinite(table.gap_slope)
                                            and np.isfinite(table.mismatch_slope))
    manifest.hashes["sweep_slopes"] = (f"gap={table.gap_slope:.4f},"
                                       f"mismatch={table.mismatch_slope:.4f}")


def _run_for_analysis(resolved: ResolvedConfig, manifest: RunManifest,
                      keep_states: bool) -> tuple[Mesh, TrajectoryRecord]:
    cfg = resolved.run_config
    cfg.keep_states = keep_states
    mesh = cfg.build_mesh()
    manifest.hashes["mesh"] = mesh.content_hash()
    with _Phase(manifest, "simulate"):
        record = run_trajectory(cfg, mesh=mesh)
    return mesh, record


def _cmd_ratefit(resolved: ResolvedConfig, run_dir: Path, manifest: RunManifest) -> None:
    mesh, record = _run_for_analysis(resolved, manifest, keep_states=False)
    (run_dir / "trajectory.csv").write_text(
        "\n".join(_trajectory_lines(record)) + "\n")
    series_kind = resolved.values["rate_series"]
    if series_kind == "dual_norm":
        values = record.dual_norm
    elif series_kind == "energy_gap":
        values = record.energy_total - record.energy_total[-1]
    else:
        raise ConfigurationError(f"unknown rate_series {series_kind!r}")
    mask = values > 1e-14
    if np.count_nonzero(mask) < 10:
        raise InputError("series decayed below resolution; not enough samples to fit")
    with _Phase(manifest, "fit"):
        fit = fit_decay_rate((record.times[mask], values[mask]),
                             resolved.values["rate_model"])
    lines = [
        f"series = {series_kind}",
        f"model = {fit.model}",
        f"exponent = {_fmt(fit.exponent)}",
        f"prefactor = {_fmt(fit.prefactor)}",
        f"r_squared = {_fmt(fit.r_squared)}",
        f"window = {_fmt(fit.window[0])} .. {_fmt(fit.window[1])}",
    ]
    (run_dir / "ratefit.txt").write_text("\n".join(lines) + "\n")
    manifest.checks["fit_finite"] = bool(np.isfinite(fit.exponent))


def _cmd_probe(resolved: ResolvedConfig, run_dir: Path, manifest: RunManifest) -> None:
    cfg = resolved.run_config
    mesh, record = _run_for_analysis(resolved, manifest, keep_states=True)
    (run_dir / "trajectory.csv").write_text(
        "\n".join(_trajectory_lines(record)) + "\n")
    with _Phase(manifest, "newton"):
        eq = solve_stationary_newton(mesh, resolved.spec, cfg.K,
                                     record.final_state(),
                                     resolved.values["steady_tol"],
                                     compute_stability=False)
    with _Phase(manifest, "probe"):
        probe = ls_probe(mesh, resolved.spec, cfg.K, record, eq,
                         resolved.values["probe_radius"])
    lines = [
        f"valid = {str(probe.valid).lower()}",
        f"samples = {probe.gaps.size}",
        f"slope = {_fmt(probe.slope)}",
        f"theta = {_fmt(probe.theta)}",
        f"fitted_c = {_fmt(probe.fitted_c)}",
        f"window_radius = {_fmt(probe.window_radius)}",
    ]
    if probe.reason:
        lines.append(f"reason = {probe.reason}")
    (run_dir / "probe.txt").write_text("\n".join(lines) + "\n")
    manifest.checks["newton_converged"] = eq.converged
    manifest.checks["probe_valid"] = probe.valid


def _cmd_validate(resolved: ResolvedConfig, run_dir: Path, manifest: RunManifest) -> None:
    with _Phase(manifest, "validate"):
        report = validate_assumptions(
            resolved.spec,
            scan_range=(resolved.values["validate_scan_lo"],
                        resolved.values["validate_scan_hi"]),
            scan_points=resolved.values["validate_points"])
    (run_dir / "validation.txt").write_text(report.summary() + "\n")
    manifest.checks["assumptions_accepted"] = report.accepted


def dispatch(subcommand: str, resolved: ResolvedConfig, *,
             output_root: str | Path = "runs",
             resume_path: str | None = None) -> tuple[int, Path]:
    """Run one subcommand; returns (exit status, run directory)."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigurationError(f"unknown subcommand {subcommand!r}")
    run_dir = _make_run_dir(Path(output_root), subcommand, resolved)
    manifest = RunManifest(subcommand, resolved)
    try:
        if subcommand == "simulate":
            _cmd_simulate(resolved, run_dir, manifest, resume_path)
        elif subcommand == "steady":
            _cmd_steady(resolved, run_dir, manifest)
        elif subcommand == "spectrum":
            _cmd_spectrum(resolved, run_dir, manifest)
        elif subcommand == "ksweep":
            _cmd_ksweep(resolved, run_dir, manifest)
        elif subcommand == "ratefit":
            _cmd_ratefit(resolved, run_dir, manifest)
        elif subcommand == "probe":
            _cmd_probe(resolved, run_dir, manifest)
        elif subcommand == "validate":
            _cmd_validate(resolved, run_dir, manifest)
    except Exception as exc:   # manifest must record the failure either way
        manifest.errors.append(f"{type(exc).__name__}: {exc}")
    (run_dir / "manifest.txt").write_text(manifest.render())
    return manifest.exit_status(), run_dir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bsac",
        description="Bulk-surface Allen-Cahn laboratory with Robin boundary "
                    "relaxation")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("config", nargs="?", default=None,
                        help="config file (or manifest of a previous run)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        dest="overrides", help="override one config key")
    parser.add_argument("--output-root", default="runs")
    parser.add_argument("--resume", default=None, metavar="CHECKPOINT",
                        help="continue a simulate run from a checkpoint file")
    args = parser.parse_args(argv)

    overrides = {}
    for item in args.overrides:
        key, sep, val = item.partition("=")
        if not sep:
            print(f"bad --set (need KEY=VALUE): {item}", file=sys.stderr)
            return 2
        overrides[key.strip()] = val.strip()
    try:
        resolved = parse_config(args.config if args.config is not None else "",
                                overrides)
    except ConfigurationError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    if args.resume is not None and args.subcommand != "simulate":
        print("--resume only applies to simulate", file=sys.stderr)
        return 2
    status, run_dir = dispatch(args.subcommand, resolved,
                               output_root=args.output_root,
                               resume_path=args.resume)
    print(f"{args.subcommand}: exit {status}, outputs in {run_dir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
