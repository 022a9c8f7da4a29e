"""Command implementations behind the CLI, plus run manifests.

Each ``cmd_*`` takes a resolved config dict (see ``config.load_config``),
writes its outputs and returns the list of files written. A JSON manifest
``<out>.manifest.json`` is written next to every primary output file.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import TextIO

from . import __version__
from .kicked_ising import KickedIsingParams
from .molecule import crotonic_default, load_molecule
from .otoc import (
    OtocConfig,
    collect_samples,
    estimate_otoc,
    exact_series,
    write_exact_csv,
    write_scatter_csv,
    write_series_csv,
)
from .pulse import compile_and_verify
from .random_unitary import Kind, RandomizationScheme, frame_potential, frame_potential_trace, sample_ensemble

FRAME_HEADER = ("x", "F1", "F2")
COMPILE_HEADER = ("tau_ms", "tau1_ms", "tau2_ms", "alpha1", "alpha2", "alpha3", "alpha4",
                  "fidelity_nn", "fidelity_full")


def molecule_from(cfg: dict):
    return load_molecule(cfg["molecule"]) if cfg.get("molecule") else crotonic_default()


def params_from(cfg: dict) -> KickedIsingParams:
    return KickedIsingParams(cfg["n_spins"], cfg["J"], cfg["h_x"], cfg["h_z"], cfg["JT"], cfg["periodic"])


def scheme_from(cfg: dict, kind: str | None = None) -> RandomizationScheme:
    kind = Kind(kind or cfg.get("scheme", "design_hamiltonian"))
    if kind is Kind.DESIGN_HAMILTONIAN:
        return RandomizationScheme(kind, cfg["period_ms"], cfg["n_segments"], molecule_from(cfg), cfg["coupling_rule"])
    return RandomizationScheme(kind)


def otoc_config_from(cfg: dict, seed: int) -> OtocConfig:
    return OtocConfig(
        params=params_from(cfg),
        w_site=cfg["w_site"],
        v_site=cfg["v_site"],
        w_pauli=cfg["w_pauli"],
        v_pauli=cfg["v_pauli"],
        n_periods_max=cfg["n_periods_max"],
        n_unitaries=cfg.get("n_unitaries", 50),
        scheme=scheme_from(cfg) if "scheme" in cfg else RandomizationScheme(),
        initial_state=cfg.get("initial_state") or None,
        seed=seed,
        subset_weighting=cfg["subset_weighting"],
    )


def sha256_of(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out: Path, command: str, cfg: dict, seed: int, workers: int, files: list[Path]) -> Path:
    manifest = {
        "command": command,
        "config": {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(cfg.items())},
        "seed": seed,
        "workers": workers,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "outputs": {Path(f).name: sha256_of(f) for f in files},
    }
    path = Path(str(out) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def verify_manifest(path: str | Path) -> bool:
    """True when every output listed in the manifest matches its checksum."""
    path = Path(path)
    manifest = json.loads(path.read_text())
    return all(
        (path.parent / name).is_file() and sha256_of(path.parent / name) == digest
        for name, digest in manifest["outputs"].items()
    )


def _emit(text: str, out: Path | None, stdout: TextIO | None) -> list[Path]:
    if out is None:
        (stdout or sys.stdout).write(text)
        return []
    out.write_text(text)
    return [out]


def cmd_exact(cfg: dict, seed: int, out: Path | None = None, workers: int = 1, stdout=None):
    config = otoc_config_from(cfg, seed)
    buf = io.StringIO()
    write_exact_csv(exact_series(config), buf)
    files = _emit(buf.getvalue(), out, stdout)
    if files:
        write_manifest(out, "exact", cfg, seed, workers, files)
    return files


def cmd_protocol(cfg: dict, seed: int, out: Path | None = None, workers: int = 1,
                 stdout=None, stderr=None):
    config = otoc_config_from(cfg, seed)
    stderr = stderr or sys.stderr
    print(
        f"protocol: scheme={config.scheme.kind.value} N_u={config.n_unitaries} "
        f"periods=1..{config.n_periods_max} workers={workers}",
        file=stderr,
    )
    series = estimate_otoc(config, workers)
    for row in series.rows:
        if not row.reliable:
            print(f"warning: period {row.n}: degenerate denominator, estimate unreliable", file=stderr)
    buf = io.StringIO()
    write_series_csv(series, buf)
    files = _emit(buf.getvalue(), out, stdout)
    scatter = cfg.get("scatter_periods", ())
    if scatter:
        if out is None:
            raise ValueError("scatter_periods requires --out")
        samples = collect_samples(config, scatter, workers)
        for j, n in enumerate(scatter):
            path = out.with_name(f"{out.stem}_scatter_n{n}.csv")
            sbuf = io.StringIO()
            write_scatter_csv([tuple(p) for p in samples[:, j, :]], sbuf)
            path.write_text(sbuf.getvalue())
            files.append(path)
    print("protocol: done", file=stderr)
    if out is not None:
        write_manifest(out, "protocol", cfg, seed, workers, files)
    return files


def frame_potential_rows(cfg: dict, seed: int, workers: int = 1) -> list[tuple[float, float, float]]:
    mode = cfg["mode"]
    base = scheme_from(cfg, "design_hamiltonian")
    n_spins = base.molecule.n_spins
    rows = []
    if mode == "period":
        for period in cfg["periods_ms"]:
            scheme = RandomizationScheme(base.kind, period, base.n_segments, base.molecule, base.coupling_rule)
            ens = sample_ensemble(scheme, n_spins, cfg["n_samples"], seed, workers)
            rows.append((period, frame_potential(ens, 1), frame_potential(ens, 2)))
    elif mode == "samples":
        sizes = cfg["sample_sizes"]
        if min(sizes) < 2:
            raise ValueError("sample sizes must be at least 2")
        ens = sample_ensemble(base, n_spins, max(sizes), seed, workers)
        for size in sizes:
            rows.append((float(size), frame_potential(ens.members[:size], 1),
                         frame_potential(ens.members[:size], 2)))
    else:
        times = cfg["times_ms"]
        values = frame_potential_trace(base, times, cfg["n_samples"], (1, 2), seed, workers)
        rows.extend((t, v[0], v[1]) for t, v in zip(times, values))
    return rows


def cmd_frame_potential(cfg: dict, seed: int, out: Path | None = None, workers: int = 1, stdout=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRAME_HEADER)
    for x, f1, f2 in frame_potential_rows(cfg, seed, workers):
        w.writerow([repr(float(x)), repr(float(f1)), repr(float(f2))])
    files = _emit(buf.getvalue(), out, stdout)
    if files:
        write_manifest(out, "frame-potential", cfg, seed, workers, files)
    return files


def format_report(report) -> str:
    t = report.timing
    lines = [
        f"tau   = {t.tau_ms:.4f} ms",
        f"tau1  = {t.tau1_ms:.4f} ms",
        f"tau2  = {t.tau2_ms:.4f} ms",
        "alpha = " + ", ".join(f"{a:.6f}" for a in t.alphas) + " rad",
        "timing residuals = " + ", ".join(f"{r:.3e}" for r in t.residuals),
        f"fidelity (nearest-neighbour couplings) = {report.fidelity_nn:.12f}",
        f"fidelity (full coupling table)         = {report.fidelity_full:.12f}",
        f"residual z phase = {report.residual_z_phase:.3e} rad",
    ]
    return "\n".join(lines) + "\n"


def cmd_compile(cfg: dict, seed: int, out: Path | None = None, workers: int = 1, stdout=None):
    report = compile_and_verify(molecule_from(cfg), cfg["JT"])
    (stdout or sys.stdout).write(format_report(report))
    if out is None:
        return []
    t = report.timing
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPILE_HEADER)
    w.writerow([repr(x) for x in (t.tau_ms, t.tau1_ms, t.tau2_ms, *t.alphas,
                                  report.fidelity_nn, report.fidelity_full)])
    out.write_text(buf.getvalue())
    write_manifest(out, "compile", cfg, seed, workers, [out])
    return [out]


COMMANDS = {
    "exact": cmd_exact,
    "protocol": cmd_protocol,
    "frame-potential": cmd_frame_potential,
    "compile": cmd_compile,
}
