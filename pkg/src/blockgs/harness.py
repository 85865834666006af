"""Experiment runner and command line interface.

A sweep fixes a matrix family and dimensions, walks a list of condition-
number targets, generates one matrix per target, runs every requested
skeleton/muscle combination on that same matrix, and serializes one CSV row
per (target, combination) pair.  ``check-bounds`` re-reads such a CSV and
verifies every row against its theoretical envelope; ``syncs`` prints the
steady-state reduction counts measured from live ledgers.

Exit codes: 0 success, 1 bound violation, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import math
import sys
import time
from dataclasses import dataclass

import numpy as np

from .blockcore import BlockMatrix, cond_2
from .matgen import (
    MatrixClassSpec,
    calibrate_piled,
    gen_default,
    gen_monomial,
    gen_piled,
)
from .metrics import bound_envelope, bound_for, loo, rel_chol_res, rel_res
from .muscles import IO_BY_NAME, IOSpec
from . import skeletons
from .skeletons import DISPLAY_NAMES, BGSResult, SkeletonKind
from .syncmodel import syncs_per_block

__all__ = [
    "ConfigError",
    "Combo",
    "make_combo",
    "RunRecord",
    "SweepConfig",
    "run_single",
    "run_sweep",
    "write_csv",
    "read_csv",
    "check_bounds",
    "sync_table",
    "cli_main",
    "main",
]

CSV_FIELDS = (
    "matrix_class",
    "m",
    "p",
    "s",
    "kappa_target",
    "kappa_actual",
    "skeleton",
    "io_a",
    "io1",
    "io2",
    "loo",
    "rel_res",
    "rel_chol_res",
    "sync_per_block",
    "failed",
    "elapsed_ms",
)

_SKELETON_BY_DISPLAY = {name: kind for kind, name in DISPLAY_NAMES.items()}

# Accepted CLI spellings for each skeleton, case-insensitive.
_SKELETON_ALIASES: dict[str, SkeletonKind] = {}
for _kind in SkeletonKind:
    _SKELETON_ALIASES[_kind.value] = _kind
    _SKELETON_ALIASES[DISPLAY_NAMES[_kind].lower()] = _kind
_SKELETON_ALIASES["3s"] = SkeletonKind.BCGSI_A_3S
_SKELETON_ALIASES["2s"] = SkeletonKind.BCGSI_A_2S
_SKELETON_ALIASES["1s"] = SkeletonKind.BCGSI_A_1S


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to exit code 2)."""


@dataclass(frozen=True)
class Combo:
    """One skeleton plus exactly the muscle slots it consumes."""

    skeleton: SkeletonKind
    io_a: IOSpec | None = None
    io1: IOSpec | None = None
    io2: IOSpec | None = None


# Slot usage per skeleton: True = consumed, False = must be empty.
_SLOT_USAGE: dict[SkeletonKind, tuple[bool, bool, bool]] = {
    SkeletonKind.BCGS: (True, True, False),
    SkeletonKind.BCGS_A: (True, True, False),
    SkeletonKind.BCGSI_PLUS: (True, True, True),
    SkeletonKind.BCGSI_PLUS_A: (True, True, True),
    SkeletonKind.BCGSI_A_3S: (True, True, False),
    SkeletonKind.BCGSI_A_2S: (True, False, False),
    SkeletonKind.BCGSI_A_1S: (True, False, False),
}

_TIED = (SkeletonKind.BCGS, SkeletonKind.BCGSI_PLUS)


def _parse_skeleton(token: str) -> SkeletonKind:
    try:
        return _SKELETON_ALIASES[token.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown skeleton {token!r}") from None


def _parse_io(token: str | None, flag: str) -> IOSpec | None:
    if token is None or token == "":
        return None
    try:
        return IO_BY_NAME[token.strip().lower()]
    except KeyError:
        raise ConfigError(f"unknown muscle {token!r} for {flag}") from None


def make_combo(
    skeleton: SkeletonKind | str,
    io_a: IOSpec | None = None,
    io1: IOSpec | None = None,
    io2: IOSpec | None = None,
) -> Combo:
    """Normalize a muscle pool onto one skeleton's slots.

    Unused slots are dropped; for the tied aliases all supplied slots must
    name the same muscle (which then fills every consumed slot).  Missing
    slots fall back to HouseQR for the first block and CholQR elsewhere.
    """
    kind = SkeletonKind(skeleton)
    use_a, use_1, use_2 = _SLOT_USAGE[kind]
    if kind in _TIED:
        supplied = {io for io in (io_a, io1, io2) if io is not None}
        if len(supplied) > 1:
            names = sorted(io.kind for io in supplied)
            raise ConfigError(
                f"{DISPLAY_NAMES[kind]} ties all muscle slots; got {names}"
            )
        tied = supplied.pop() if supplied else IO_BY_NAME["houseqr"]
        return Combo(
            kind,
            io_a=tied,
            io1=tied,
            io2=tied if use_2 else None,
        )
    return Combo(
        kind,
        io_a=(io_a or IO_BY_NAME["houseqr"]) if use_a else None,
        io1=(io1 or IO_BY_NAME["cholqr"]) if use_1 else None,
        io2=(io2 or IO_BY_NAME["cholqr"]) if use_2 else None,
    )


def _validate_combo(combo: Combo) -> None:
    use = _SLOT_USAGE[combo.skeleton]
    slots = (combo.io_a, combo.io1, combo.io2)
    names = ("io_a", "io1", "io2")
    for used, slot, name in zip(use, slots, names):
        if used and slot is None:
            raise ConfigError(
                f"{DISPLAY_NAMES[combo.skeleton]} requires {name}"
            )
        if not used and slot is not None:
            raise ConfigError(
                f"{DISPLAY_NAMES[combo.skeleton]} takes no {name}"
            )
    if combo.skeleton in _TIED:
        tied = {io for io, used in zip(slots, use) if used}
        if len(tied) > 1:
            raise ConfigError(
                f"{DISPLAY_NAMES[combo.skeleton]} requires tied muscle slots"
            )


def _run_combo(combo: Combo, x: BlockMatrix, record_trace: bool = False) -> BGSResult:
    k = combo.skeleton
    if k is SkeletonKind.BCGS:
        return skeletons.bcgs(x, combo.io_a, record_trace=record_trace)
    if k is SkeletonKind.BCGS_A:
        return skeletons.bcgs_a(x, combo.io_a, combo.io1, record_trace=record_trace)
    if k is SkeletonKind.BCGSI_PLUS:
        return skeletons.bcgsi_plus(x, combo.io_a, record_trace=record_trace)
    if k is SkeletonKind.BCGSI_PLUS_A:
        return skeletons.bcgsi_plus_a(
            x, combo.io_a, combo.io1, combo.io2, record_trace=record_trace
        )
    if k is SkeletonKind.BCGSI_A_3S:
        return skeletons.bcgsi_a_3s(
            x, combo.io_a, combo.io1, record_trace=record_trace
        )
    if k is SkeletonKind.BCGSI_A_2S:
        return skeletons.bcgsi_a_2s(x, combo.io_a, record_trace=record_trace)
    return skeletons.bcgsi_a_1s(x, combo.io_a, record_trace=record_trace)


@dataclass
class RunRecord:
    """One experiment point; the CSV row plus non-serialized context.

    ``matrix_digest`` (trace mode: SHA-256 of the generated matrix bytes,
    shared by every combo at one sweep point) and ``note`` (reason label for
    skipped rows) never enter the CSV.
    """

    matrix_class: str
    m: int
    p: int
    s: int
    kappa_target: float
    kappa_actual: float
    skeleton: str
    io_a: str
    io1: str
    io2: str
    loo: float
    rel_res: float
    rel_chol_res: float
    sync_per_block: float
    failed: bool
    elapsed_ms: float
    matrix_digest: str = ""
    note: str = ""


@dataclass(frozen=True)
class SweepConfig:
    """Everything that pins down a sweep (and hence its CSV bytes)."""

    matrix_class: str
    combos: tuple[Combo, ...]
    kappas: tuple[float, ...]
    m: int = 100
    p: int = 10
    s: int = 5
    seed: int = 42
    out: str | None = None
    trace: bool = False


def _validate_config(config: SweepConfig) -> None:
    if config.matrix_class not in ("monomial", "piled", "default"):
        raise ConfigError(f"unknown matrix class {config.matrix_class!r}")
    if not config.combos:
        raise ConfigError("no skeleton/muscle combinations requested")
    if not config.kappas:
        raise ConfigError("no kappa sweep points requested")
    if any(k < 1.0 for k in config.kappas):
        raise ConfigError("kappa targets must be >= 1")
    for combo in config.combos:
        _validate_combo(combo)


def _combo_io_names(combo: Combo) -> tuple[str, str, str]:
    return tuple(io.kind if io is not None else "" for io in (combo.io_a, combo.io1, combo.io2))


def run_single(
    x: BlockMatrix,
    combo: Combo,
    *,
    matrix_class: str = "custom",
    kappa_target: float = math.nan,
    kappa_actual: float | None = None,
    record_trace: bool = False,
) -> RunRecord:
    """Run one combination on one matrix and measure everything.

    ``kappa_actual`` may be passed in when the caller already measured the
    matrix (a sweep measures once per point); otherwise it is computed
    here, and set to NaN when the conditioning is unmeasurable.
    """
    _validate_combo(combo)
    if kappa_actual is None:
        try:
            kappa_actual = cond_2(x.data)
        except ValueError:
            kappa_actual = math.nan
    start = time.perf_counter()
    result = _run_combo(combo, x, record_trace=record_trace)
    elapsed_ms = (time.perf_counter() - start) * 1e3
    if result.failed:
        loo_v = res_v = chol_v = math.nan
    else:
        loo_v = loo(result.q)
        res_v = rel_res(x, result.q, result.r)
        chol_v = rel_chol_res(x, result.r)
    sync_v = syncs_per_block(result) if x.block_count >= 3 else math.nan
    io_a, io1, io2 = _combo_io_names(combo)
    return RunRecord(
        matrix_class=matrix_class,
        m=x.m,
        p=x.block_count,
        s=x.block_width,
        kappa_target=kappa_target,
        kappa_actual=kappa_actual,
        skeleton=DISPLAY_NAMES[combo.skeleton],
        io_a=io_a,
        io1=io1,
        io2=io2,
        loo=loo_v,
        rel_res=res_v,
        rel_chol_res=chol_v,
        sync_per_block=sync_v,
        failed=result.failed,
        elapsed_ms=elapsed_ms,
    )


def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def _sweep_points(config: SweepConfig):
    """Yield (kappa_target, matrix or None, kappa_actual, note) per point."""
    m, p, s, seed = config.m, config.p, config.s, config.seed
    if config.matrix_class == "default":
        for kt in config.kappas:
            spec = MatrixClassSpec("default", m, p, s, seed, kappa=kt)
            x = gen_default(spec)
            yield kt, x, _measure(x), ""
    elif config.matrix_class == "monomial":
        # Build the divisor ladder once, then map each requested target to
        # the rung whose measured conditioning is nearest in log space.
        ladder = []
        for t in _divisors(p * s):
            spec = MatrixClassSpec("monomial", m, p, s, seed, t=t)
            x = gen_monomial(spec)
            ladder.append((t, x, _measure(x)))
        logs = [
            math.log10(ka) if math.isfinite(ka) else math.log10(1e300)
            for _, _, ka in ladder
        ]
        for kt in config.kappas:
            idx = min(
                range(len(ladder)),
                key=lambda i: abs(logs[i] - math.log10(kt)),
            )
            _, x, ka = ladder[idx]
            yield kt, x, ka, ""
    else:  # piled
        for kt in config.kappas:
            spec, measured = calibrate_piled(m, p, s, kt, seed)
            if abs(math.log10(measured) - math.log10(kt)) > 1.0:
                yield kt, None, math.nan, (
                    f"piled calibration missed target {kt:.3g} "
                    f"(best {measured:.3g})"
                )
                continue
            x = gen_piled(spec)
            yield kt, x, measured, ""


def _measure(x: BlockMatrix) -> float:
    try:
        return cond_2(x.data)
    except ValueError:
        return math.nan


def _skip_record(config: SweepConfig, combo: Combo, kt: float, note: str) -> RunRecord:
    io_a, io1, io2 = _combo_io_names(combo)
    return RunRecord(
        matrix_class=config.matrix_class,
        m=config.m,
        p=config.p,
        s=config.s,
        kappa_target=kt,
        kappa_actual=math.nan,
        skeleton=DISPLAY_NAMES[combo.skeleton],
        io_a=io_a,
        io1=io1,
        io2=io2,
        loo=math.nan,
        rel_res=math.nan,
        rel_chol_res=math.nan,
        sync_per_block=math.nan,
        failed=True,
        elapsed_ms=0.0,
        note=note,
    )


def run_sweep(config: SweepConfig) -> list[RunRecord]:
    """Run every combination at every sweep point, in deterministic order.

    Records are ordered (kappa index, combo index).  All combos at one
    point consume the identical generated matrix.  ``elapsed_ms`` is zeroed
    so that identical configs yield byte-identical CSVs.
    """
    _validate_config(config)
    records: list[RunRecord] = []
    for kt, x, kappa_actual, note in _sweep_points(config):
        if x is None:
            records.extend(
                _skip_record(config, combo, kt, note) for combo in config.combos
            )
            continue
        digest = (
            hashlib.sha256(x.data.tobytes(order="F")).hexdigest()
            if config.trace
            else ""
        )
        for combo in config.combos:
            rec = run_single(
                x,
                combo,
                matrix_class=config.matrix_class,
                kappa_target=kt,
                kappa_actual=kappa_actual,
                record_trace=config.trace,
            )
            rec.matrix_digest = digest
            rec.elapsed_ms = 0.0
            records.append(rec)
    return records


def _fmt_float(v: float) -> str:
    if math.isnan(v):
        return "NaN"
    return "%.16e" % v


def _record_row(rec: RunRecord) -> str:
    fields = (
        rec.matrix_class,
        str(rec.m),
        str(rec.p),
        str(rec.s),
        _fmt_float(rec.kappa_target),
        _fmt_float(rec.kappa_actual),
        rec.skeleton,
        rec.io_a,
        rec.io1,
        rec.io2,
        _fmt_float(rec.loo),
        _fmt_float(rec.rel_res),
        _fmt_float(rec.rel_chol_res),
        _fmt_float(rec.sync_per_block),
        "true" if rec.failed else "false",
        _fmt_float(rec.elapsed_ms),
    )
    return ",".join(fields)


def write_csv(records, path) -> None:
    """Serialize records with the fixed header and 17-significant-digit floats."""
    lines = [",".join(CSV_FIELDS)]
    lines.extend(_record_row(rec) for rec in records)
    try:
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def _parse_float(token: str) -> float:
    if token == "NaN":
        return math.nan
    return float(token)


def read_csv(path) -> list[RunRecord]:
    """Read back a CSV written by :func:`write_csv`."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(CSV_FIELDS):
            raise ValueError(f"{path}: unexpected CSV header")
        for row in reader:
            records.append(
                RunRecord(
                    matrix_class=row["matrix_class"],
                    m=int(row["m"]),
                    p=int(row["p"]),
                    s=int(row["s"]),
                    kappa_target=_parse_float(row["kappa_target"]),
                    kappa_actual=_parse_float(row["kappa_actual"]),
                    skeleton=row["skeleton"],
                    io_a=row["io_a"],
                    io1=row["io1"],
                    io2=row["io2"],
                    loo=_parse_float(row["loo"]),
                    rel_res=_parse_float(row["rel_res"]),
                    rel_chol_res=_parse_float(row["rel_chol_res"]),
                    sync_per_block=_parse_float(row["sync_per_block"]),
                    failed=row["failed"] == "true",
                    elapsed_ms=_parse_float(row["elapsed_ms"]),
                )
            )
    return records


def check_bounds(path, *, out=None) -> list[str]:
    """Verify every CSV row against its theoretical envelope.

    A row violates when its envelope is enforced and applicable at the
    row's measured conditioning, yet the loss of orthogonality exceeds the
    ceiling or is NaN (a failure where the theory promises success).
    Returns the violation messages (empty = all good); the report goes to
    ``out`` (the current stdout when not given).
    """
    if out is None:
        out = sys.stdout
    records = read_csv(path)
    violations = []
    checked = 0
    for i, rec in enumerate(records, start=2):  # line number in file
        try:
            kind = _SKELETON_BY_DISPLAY[rec.skeleton]
        except KeyError:
            raise ValueError(f"{path}:{i}: unknown skeleton {rec.skeleton!r}")
        io_a = _parse_io(rec.io_a or None, "io_a")
        io1 = _parse_io(rec.io1 or None, "io1")
        io2 = _parse_io(rec.io2 or None, "io2")
        if io_a is None:
            raise ValueError(f"{path}:{i}: missing io_a")
        spec = bound_for(kind, io_a, io1, io2, p=rec.p)
        if not spec.enforced or not math.isfinite(rec.kappa_actual):
            continue
        applicable, bound = bound_envelope(spec, rec.kappa_actual)
        if not applicable:
            continue
        checked += 1
        if math.isnan(rec.loo) or rec.loo > bound:
            violations.append(
                f"{path}:{i}: {rec.skeleton} ({rec.io_a}/{rec.io1}/{rec.io2})"
                f" at kappa={rec.kappa_actual:.3e}: loo={rec.loo:.3e}"
                f" exceeds bound {bound:.3e}"
            )
    print(
        f"checked {checked} applicable rows out of {len(records)}: "
        f"{len(violations)} violation(s)",
        file=out,
    )
    for msg in violations:
        print(msg, file=out)
    return violations


def sync_table(
    m: int = 100, p: int = 6, s: int = 2, seed: int = 42
) -> list[tuple[str, float]]:
    """Steady-state reductions per block column, measured from live ledgers.

    Runs every skeleton with Gram-product (single-reduction) muscles on a
    small well-conditioned matrix and reads the interior-block average off
    the ledger — nothing here is hard-coded.
    """
    spec = MatrixClassSpec("default", m, p, s, seed, kappa=10.0)
    x = gen_default(spec)
    cholqr = IO_BY_NAME["cholqr"]
    rows = []
    for kind in SkeletonKind:
        combo = make_combo(kind, io_a=cholqr, io1=cholqr, io2=cholqr)
        result = _run_combo(combo, x)
        rows.append((DISPLAY_NAMES[kind], syncs_per_block(result)))
    return rows


# ---------------------------------------------------------------------------
# Command line interface
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockgs",
        description="Block Gram-Schmidt stability and sync-count experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser(
        "sweep", help="run a condition-number sweep and write a CSV"
    )
    sweep.add_argument(
        "--matrix",
        required=True,
        choices=["monomial", "piled", "default"],
        help="matrix family to sweep",
    )
    sweep.add_argument("--m", type=int, default=100, help="rows (default 100)")
    sweep.add_argument("--p", type=int, default=10, help="blocks (default 10)")
    sweep.add_argument(
        "--s", type=int, default=5, help="columns per block (default 5)"
    )
    sweep.add_argument(
        "--skeletons",
        default=",".join(k.value for k in SkeletonKind),
        help="comma-separated skeleton list (default: all)",
    )
    sweep.add_argument(
        "--io-a",
        dest="io_a",
        default=None,
        help="first-block muscle (default houseqr where needed)",
    )
    sweep.add_argument(
        "--io1", default=None, help="inner muscle (default cholqr where needed)"
    )
    sweep.add_argument(
        "--io2",
        default=None,
        help="second-pass muscle (default cholqr where needed)",
    )
    sweep.add_argument(
        "--kappas", default=None, help="comma-separated condition targets"
    )
    sweep.add_argument(
        "--kappa-range",
        dest="kappa_range",
        default=None,
        help="log-spaced targets as lo:hi:count",
    )
    sweep.add_argument("--seed", type=int, default=42)
    sweep.add_argument("--out", default="sweep.csv", help="output CSV path")
    sweep.add_argument(
        "--trace",
        action="store_true",
        help="record per-point matrix digests and iteration traces",
    )

    check = sub.add_parser(
        "check-bounds", help="verify a sweep CSV against the bound envelopes"
    )
    check.add_argument("csv_path", help="CSV produced by the sweep subcommand")

    sub.add_parser(
        "syncs", help="print steady-state sync counts measured from live runs"
    )
    return parser


def _parse_kappas(args) -> tuple[float, ...]:
    if args.kappas is not None and args.kappa_range is not None:
        raise ConfigError("pass either --kappas or --kappa-range, not both")
    if args.kappas is not None:
        try:
            return tuple(float(tok) for tok in args.kappas.split(",") if tok)
        except ValueError:
            raise ConfigError(f"bad --kappas list {args.kappas!r}") from None
    if args.kappa_range is not None:
        parts = args.kappa_range.split(":")
        if len(parts) != 3:
            raise ConfigError("--kappa-range wants lo:hi:count")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(
                f"bad --kappa-range {args.kappa_range!r}"
            ) from None
        if lo < 1 or hi < lo or count < 1:
            raise ConfigError("--kappa-range wants 1 <= lo <= hi, count >= 1")
        return tuple(np.logspace(math.log10(lo), math.log10(hi), count))
    raise ConfigError("a sweep needs --kappas or --kappa-range")


def _config_from_args(args) -> SweepConfig:
    io_a = _parse_io(args.io_a, "--io-a")
    io1 = _parse_io(args.io1, "--io1")
    io2 = _parse_io(args.io2, "--io2")
    combos = tuple(
        make_combo(_parse_skeleton(tok), io_a, io1, io2)
        for tok in args.skeletons.split(",")
        if tok.strip()
    )
    return SweepConfig(
        matrix_class=args.matrix,
        combos=combos,
        kappas=_parse_kappas(args),
        m=args.m,
        p=args.p,
        s=args.s,
        seed=args.seed,
        out=args.out,
        trace=args.trace,
    )


def cli_main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            config = _config_from_args(args)
            records = run_sweep(config)
            write_csv(records, config.out)
            skipped = sum(1 for r in records if r.note)
            msg = f"wrote {len(records)} records to {config.out}"
            if skipped:
                msg += f" ({skipped} skipped by calibration)"
            print(msg)
            return 0
        if args.command == "check-bounds":
            violations = check_bounds(args.csv_path)
            return 1 if violations else 0
        if args.command == "syncs":
            rows = sync_table()
            width = max(len(name) for name, _ in rows)
            print(f"{'skeleton':<{width}}  syncs/block")
            for name, value in rows:
                print(f"{name:<{width}}  {value:g}")
            return 0
    except ConfigError as exc:
        print(f"blockgs: error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


def main(argv=None) -> int:
    """Console-script entry point."""
    return cli_main(argv)
