"""Command-line entry point: ``lmul-lab {mul,errors,verify,netlist,nn}``.

Exit codes: 0 success, 1 verification failure, 2 usage error. Output files
go to ``--out`` (default ``$LMUL_LAB_OUT`` or ``./lmul-out``) and start with
comment lines recording the fully resolved configuration.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .analysis import BACKENDS, Domain, EnumPolicy, Specials, histogram_csv, metrics_csv, sweep
from .formats import FORMATS, Fp8Value, FpFormat, ValuePolicy, ocp_policy
from .hardware import PUBLISHED_RESOURCES, build_lmul_netlist, verify_equivalence
from .lmul import CARRY_CASES, Readout, Subnormals, bias_star, exact_mul, l_mul, mantissa_offset, offset_exponent
from .netlist import corrupt_init, dump_netlist, report_resources

OUT_ENV = "LMUL_LAB_OUT"
MNIST_ENV = "LMUL_LAB_MNIST"
DEFAULT_OUT = "lmul-out"
DEFAULT_MNIST = "data/mnist-5k"


class UsageError(Exception):
    pass


def _format_arg(text: str) -> FpFormat:
    try:
        return FpFormat.from_name(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _formats_arg(text: str) -> tuple[FpFormat, ...]:
    if text.lower() == "all":
        return FORMATS
    return tuple(_format_arg(t) for t in text.split(","))


def _hex_byte(text: str) -> int:
    try:
        v = int(text, 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hex byte: {text!r}") from None
    if not 0 <= v <= 0xFF:
        raise argparse.ArgumentTypeError(f"hex byte out of range: {text!r}")
    return v


def _backends_arg(text: str) -> list[str]:
    names = [t.strip().lower() for t in text.split(",")]
    bad = [n for n in names if n not in ("fp32", "fp8", "lmul")]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown backend(s) {bad}; choose from fp32, fp8, lmul")
    return names


def _value_policy(name: str, fmt: FpFormat) -> ValuePolicy:
    return ocp_policy(fmt) if name == "ocp" else ValuePolicy(name)


def _resolved_config(args, **extra) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg.update(extra)
    return {
        k: ",".join(str(i) for i in v) if isinstance(v, (tuple, list)) else str(v)
        for k, v in sorted(cfg.items())
    }


def _config_header(args, **extra) -> str:
    lines = [f"# lmul-lab {__version__}"]
    lines += [f"# {k}={v}" for k, v in _resolved_config(args, **extra).items()]
    return "\n".join(lines) + "\n"


def _out_dir(args) -> Path:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _bits(v: int, width: int) -> str:
    return format(v, f"0{width}b") if width else ""


# -- mul -------------------------------------------------------------------

def cmd_mul(args) -> int:
    fmt = args.format
    subn = Subnormals(args.subnormals)
    policy = _value_policy(args.value_policy, fmt)
    x, y = Fp8Value(args.x, fmt), Fp8Value(args.y, fmt)
    p = l_mul(x, y, subn, policy)
    e, m = fmt.e, fmt.m

    print(f"format    {fmt.name}  bias={fmt.bias}  l(m)={offset_exponent(m)}  "
          f"offset={_bits(mantissa_offset(m), m)}b  value_policy={policy.value}  subnormals={subn.value}")
    for tag, v in (("x", x), ("y", y)):
        print(f"{tag}         0x{v.raw:02X}  s={v.sign} e={_bits(v.exponent, e)} m={_bits(v.mantissa, m)}  "
              f"{v.classify(policy).value}  = {v.decode(policy)!r}")
    print(f"sign      {x.sign} xor {y.sign} = {p.sign}")
    print(f"mantissa  p_m = {_bits(x.mantissa, m)} + {_bits(y.mantissa, m)} + {_bits(mantissa_offset(m), m)} "
          f"= {_bits(p.p_m_full, m + 2)}")
    print(f"carry     {_bits(p.carry, 2)}  case {CARRY_CASES[p.carry]}  bias*={bias_star(fmt, p.carry)}")
    print(f"exponent  p_e = {x.exponent} + {y.exponent} + ({bias_star(fmt, p.carry)}) = {p.p_e_raw}")
    if p.special_input:
        print("note      Inf/NaN operand processed as raw bits")
    if p.zero:
        print("flush     zero operand, product is zero")
    elif p.underflow:
        print("flush     exponent underflow, product is zero")
    print(f"fields    sign={p.sign} exp={_bits(p.out_exp, e + 1)} man={_bits(p.out_man, m)}  "
          f"decoded={p.value(Readout.FIELDS)!r}")
    exact = exact_mul(x, y, policy)
    approx = p.value(Readout.SUM)
    if exact and math.isfinite(exact):
        print(f"rel_error {abs(exact - approx) / abs(exact):.6g}")
    print(f"exact={exact!r} lmul={approx!r}")
    return 0


# -- errors ----------------------------------------------------------------

def _policy_for(args, fmt) -> EnumPolicy:
    return EnumPolicy(
        Domain(args.domain), Specials(args.specials), Subnormals(args.subnormals),
        _value_policy(args.value_policy, fmt),
    )


def cmd_errors(args) -> int:
    out = _out_dir(args)
    header = _config_header(args)
    reports = []
    for fmt in args.format:
        base = _policy_for(args, fmt)
        if args.policy_matrix:
            from .analysis import all_policies
            for pol in all_policies():
                reports.append(sweep(fmt, pol, args.backend, args.threads))
        else:
            reports.append(sweep(fmt, base, args.backend, args.threads))
        hist = sweep(fmt, base, args.backend, args.threads) if args.policy_matrix else reports[-1]
        _write(out / f"histogram_{fmt.name}.csv", header + histogram_csv(hist))
    _write(out / "metrics.csv", header + metrics_csv(reports))

    print(f"{'format':6} {'policy':34} {'EP':>8} {'MAE':>12} {'MRE':>8} {'MSE':>12} {'NED':>8}")
    for r in reports:
        pol = "/".join(r.policy.describe().values())
        print(f"{r.format.name:6} {pol:34} {r.ep:8.4f} {r.mae:12.4g} {r.mre:8.4f} {r.mse:12.4g} {r.ned:8.4f}")
    print(f"wrote {out / 'metrics.csv'} ({len(reports)} rows)")
    return 0


# -- verify ----------------------------------------------------------------

def _parse_corrupt(text: str) -> tuple[int, int]:
    try:
        lut, bit = (int(t) for t in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LUT:BIT, got {text!r}") from None
    if lut < 0 or not 0 <= bit < 64:
        raise argparse.ArgumentTypeError(f"bad LUT:BIT {text!r}")
    return lut, bit


def cmd_verify(args) -> int:
    subn = Subnormals(args.subnormals)

    def run(fmt):
        net = build_lmul_netlist(fmt, subn)
        if args.corrupt_init:
            lut, bit = args.corrupt_init
            if lut >= len(net.luts):
                raise UsageError(f"{fmt.name} netlist has {len(net.luts)} LUTs, no index {lut}")
            net = corrupt_init(net, lut, bit)
        return verify_equivalence(fmt, net, subn)

    if args.threads > 1:
        with ThreadPoolExecutor(args.threads) as pool:
            results = list(pool.map(run, args.format))
    else:
        results = [run(f) for f in args.format]

    total = 0
    for r in results:
        total += r.n_cases
        if r.passed:
            print(f"{r.format.name} PASS {r.n_cases} cases")
        else:
            x, y, got, want = r.counterexample
            print(f"{r.format.name} FAIL {r.n_mismatch}/{r.n_cases} mismatches; "
                  f"first x=0x{x:02X} y=0x{y:02X} netlist(sign,exp,man)={got} model={want}")
    n_pass = sum(r.passed for r in results)
    verdict = "PASS" if n_pass == len(results) else "FAIL"
    print(f"{verdict} {n_pass}/{len(results)}, {total} cases")
    return 0 if verdict == "PASS" else 1


# -- netlist ---------------------------------------------------------------

def cmd_netlist(args) -> int:
    out = _out_dir(args)
    subn = Subnormals(args.subnormals)
    print(f"{'format':6} {'LUT':>4} {'CARRY8':>6} {'elems':>5} {'depth':>5}   published: LUT FF CARRY8 WNS")
    for fmt in args.format:
        net = build_lmul_netlist(fmt, subn)
        rep = report_resources(net)
        path = out / f"{net.name}.net"
        _write(path, _config_header(args, format=fmt.name) + dump_netlist(net))
        lut, ff, c8, wns = PUBLISHED_RESOURCES[fmt.name]
        print(f"{fmt.name:6} {rep.lut_count:4d} {rep.carry8_count:6d} {rep.carry_elements:5d} {rep.depth:5d}"
              f"   published: {lut:3d} {ff:2d} {c8:6d} {wns:.2f}")
    print(f"wrote {len(args.format)} netlist(s) to {out}")
    return 0


# -- nn --------------------------------------------------------------------

def _find_idx(data_dir: Path, stem: str) -> Path:
    for name in (stem, stem + ".gz"):
        if (data_dir / name).exists():
            return data_dir / name
    raise UsageError(f"missing {stem}[.gz] in {data_dir}")


def cmd_nn(args) -> int:
    from .nn.backends import make_backend
    from .nn.idx import load_idx
    from .nn.inference import infer
    from .nn.model import load_model, save_model, train_reference

    data = Path(args.data_dir)
    test = load_idx(_find_idx(data, "t10k-images-idx3-ubyte"), _find_idx(data, "t10k-labels-idx1-ubyte"),
                    name=data.name, split="test")
    if args.checkpoint:
        model = load_model(args.checkpoint)
    else:
        train = load_idx(_find_idx(data, "train-images-idx3-ubyte"), _find_idx(data, "train-labels-idx1-ubyte"),
                         name=data.name, split="train")
        spec = (train.n_features, *args.hidden, len(set(train.labels.tolist())))
        model = train_reference(spec, train, args.epochs, args.seed)
    out = _out_dir(args)
    if args.save_checkpoint:
        save_model(model, args.save_checkpoint)

    rows, reports = [], {}
    for fmt in args.format:
        row = {"format": fmt.name}
        for name in args.backends:
            rep = infer(model, test, make_backend(name, fmt), n_jobs=args.threads)
            reports[f"{fmt.name}/{name}"] = rep.as_dict()
            row[f"{name}_accuracy"] = rep.accuracy
        for name in args.backends:
            if name != "fp32" and "fp32" in args.backends:
                row[f"{name}_delta_pt"] = 100 * (row[f"{name}_accuracy"] - row["fp32_accuracy"])
        rows.append(row)

    header = _config_header(args)
    cols = list(rows[0])
    lines = [",".join(cols)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else f"{v:.17g}" for v in (row[c] for c in cols)))
    _write(out / "nn_accuracy.csv", header + "\n".join(lines) + "\n")
    meta = {"config": _resolved_config(args),
            "hyperparameters": model.get_params() | {"multiplier": None},
            "layer_sizes": model.layer_sizes_, "reports": reports}
    _write(out / "nn_report.json", json.dumps(meta, indent=2, default=str) + "\n")

    for row in rows:
        print("  ".join(f"{k}={v:.4f}" if not isinstance(v, str) else v for k, v in row.items()))
    print(f"wrote {out / 'nn_accuracy.csv'}")
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmul-lab", description="L-Mul FP8 approximate multiplier toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats="all", out=True, threads=True):
        p.add_argument("--format", type=_formats_arg, default=_formats_arg(formats),
                       help=f"format name(s), comma separated, or 'all' (default: {formats})")
        p.add_argument("--subnormals", choices=[s.value for s in Subnormals], default="ftz")
        if out:
            p.add_argument("--out", default=os.environ.get(OUT_ENV, DEFAULT_OUT),
                           help=f"output directory (default: ${OUT_ENV} or {DEFAULT_OUT})")
        if threads:
            p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=7)

    p = sub.add_parser("mul", help="trace one L-Mul product")
    p.add_argument("x", type=_hex_byte)
    p.add_argument("y", type=_hex_byte)
    p.add_argument("--format", type=_format_arg, default=FpFormat(4, 3))
    p.add_argument("--subnormals", choices=[s.value for s in Subnormals], default="ftz")
    p.add_argument("--value-policy", choices=["ocp", "strict", "extended"], default="ocp")
    p.set_defaults(func=cmd_mul)

    p = sub.add_parser("errors", help="exhaustive error metrics and histograms")
    common(p)
    p.add_argument("--domain", choices=[d.value for d in Domain], default="unsigned")
    p.add_argument("--specials", choices=[s.value for s in Specials], default="exclude")
    p.add_argument("--value-policy", choices=["ocp", "strict", "extended"], default="ocp")
    p.add_argument("--backend", choices=BACKENDS, default="lmul")
    p.add_argument("--policy-matrix", action="store_true", help="sweep all 16 enumeration policies")
    p.set_defaults(func=cmd_errors)

    p = sub.add_parser("verify", help="netlist vs behavioral model on all operand pairs")
    common(p, out=False)
    p.add_argument("--corrupt-init", type=_parse_corrupt, metavar="LUT:BIT",
                   help="flip one INIT bit before checking (fault-injection hook)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("netlist", help="dump netlists and resource reports")
    common(p, threads=False)
    p.set_defaults(func=cmd_netlist)

    p = sub.add_parser("nn", help="MLP accuracy per multiplier backend")
    common(p, formats="E4M3")
    p.add_argument("--data-dir", default=os.environ.get(MNIST_ENV, DEFAULT_MNIST),
                   help=f"directory with IDX files (default: ${MNIST_ENV} or {DEFAULT_MNIST})")
    p.add_argument("--checkpoint", help="load this model instead of training")
    p.add_argument("--save-checkpoint", help="write the model used to this path")
    p.add_argument("--epochs", type=int, default=3)
    p.add_argument("--hidden", type=lambda s: tuple(int(t) for t in s.split(",")), default=(32,))
    p.add_argument("--backends", type=_backends_arg, default=["fp32", "fp8", "lmul"])
    p.set_defaults(func=cmd_nn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lmul-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
