"""Command-line surface: modulate, demodulate, decode, ber, fig2, fig3.

All file I/O lives here; the library modules stay pure. Exit codes:
0 success, 1 usage or configuration error, 2 decode failure (no preamble,
bad header, CRC mismatch), 3 file I/O error. The environment variable
``CSSPHY_SEED`` overrides the built-in master seed; an explicit ``--seed``
flag beats both.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from . import ber as ber_mod
from . import config as config_mod
from .demod import demod_many
from .errors import ConfigError, CssPhyError, FramingError, IqFormatError, SyncError
from .framing import Frame, build_frame, frame_sample_count
from .iqfile import read_iq, write_iq
from .modulate import IqBuffer
from .receiver import decode_frame

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DECODE = 2
EXIT_IO = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _master_seed(args, cfg: dict | None = None) -> int:
    """Seed precedence: --seed flag, then CSSPHY_SEED, then config, then default."""
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("CSSPHY_SEED")
    if env is not None:
        try:
            return int(env, 0)
        except ValueError as exc:
            raise ConfigError(f"CSSPHY_SEED is not an integer: {env!r}") from exc
    if cfg is not None and "seed" in cfg:
        return int(cfg["seed"])
    return ber_mod.DEFAULT_SEED


def _detect_kwargs(cfg: dict) -> dict:
    sub = cfg.get("detect", {})
    return {
        "threshold": sub.get("threshold"),
        "threshold_scale": sub.get("threshold_scale", 4.0),
    }


def _cmd_modulate(args) -> int:
    cfg = config_mod.load_config(args.config)
    params = config_mod.params_from_config(cfg)
    frame_cfg = config_mod.frame_config_from_config(cfg)
    payload = Path(args.payload_in).read_bytes()
    if len(payload) != frame_cfg.payload_len:
        raise ConfigError(
            f"payload file is {len(payload)} bytes but frame.payload_len is {frame_cfg.payload_len}"
        )
    buf = build_frame(Frame(payload=payload, config=frame_cfg), params)
    write_iq(args.iq_out, buf)
    print(f"wrote {len(buf.samples)} samples ({frame_sample_count(frame_cfg, params)} expected)")
    return EXIT_OK


def _cmd_demodulate(args) -> int:
    cfg = config_mod.load_config(args.config)
    params = config_mod.params_from_config(cfg)
    buf = read_iq(args.iq_in, raw_rate=args.raw_rate)
    spb = params.samples_per_symbol
    n_sym = len(buf.samples) // spb
    blocks = np.asarray(buf.samples[: n_sym * spb]).reshape(n_sym, spb)
    symbols, _ = demod_many(blocks, params)
    text = "\n".join(str(int(s)) for s in symbols)
    if args.symbols_out:
        Path(args.symbols_out).write_text(text + "\n" if text else "")
    else:
        print(text)
    return EXIT_OK


def _cmd_decode(args) -> int:
    cfg = config_mod.load_config(args.config)
    params = config_mod.params_from_config(cfg)
    frame_cfg = config_mod.frame_config_from_config(cfg) if "frame" in cfg else None
    buf = read_iq(args.iq_in, raw_rate=args.raw_rate)
    try:
        frame, crc_ok, diag = decode_frame(
            buf, params, frame_cfg, compensate=not args.no_compensate, **_detect_kwargs(cfg)
        )
    except SyncError as exc:
        sys.stderr.write(f"decode failed: {exc}\n")
        return EXIT_DECODE
    except FramingError as exc:
        sys.stderr.write(f"decode failed: {exc}\n")
        return EXIT_DECODE
    Path(args.payload_out).write_bytes(frame.payload)
    if args.trace_out:
        lines = [
            f"# s_pre_hat={diag.s_pre_hat} data_start={diag.data_start}"
            f" delta_phi_hat={diag.delta_phi_hat:.6f} bin_correction={diag.bin_correction}",
            "symbol_index,peak_bin,peak_magnitude",
        ]
        for i, (b, m) in enumerate(zip(diag.peak_bins, diag.peak_magnitudes)):
            lines.append(f"{i},{int(b)},{float(m):.6f}")
        Path(args.trace_out).write_text("\n".join(lines) + "\n")
    print(f"decoded {len(frame.payload)} bytes, crc_ok={crc_ok}")
    if frame.config.has_crc and not crc_ok:
        sys.stderr.write("decode failed: CRC mismatch\n")
        return EXIT_DECODE
    return EXIT_OK


def _cmd_ber(args) -> int:
    cfg = config_mod.load_config(args.config)
    spec, stop_below = config_mod.sweep_from_config(cfg)
    seed = _master_seed(args, cfg)
    records = ber_mod.run_sweep(
        spec, seed=seed, workers=args.workers, stop_below_ber=stop_below
    )
    curve = ber_mod.Curve("cli", spec, stop_below)
    ber_mod.write_csv([(curve, records)], args.csv_out, seed)
    for r in records:
        print(f"snr={r.snr_db:+.2f} dB  frames={r.frames}  ber={r.ber:.3e}")
    return EXIT_OK


def _cmd_fig(which: str, args) -> int:
    seed = _master_seed(args)
    fn = ber_mod.replicate_fig2 if which == "fig2" else ber_mod.replicate_fig3
    results = fn(out=args.out, seed=seed, workers=args.workers, fast=args.fast)
    for curve, records in results:
        last = records[-1]
        print(f"{curve.label}: {len(records)} points, last ber={last.ber:.3e}")
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cssphy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modulate", help="build a frame and write it as an IQ file")
    p.add_argument("--config", required=True)
    p.add_argument("--payload-in", required=True)
    p.add_argument("--iq-out", required=True)
    p.set_defaults(fn=_cmd_modulate)

    p = sub.add_parser("demodulate", help="demodulate a bare symbol stream from an IQ file")
    p.add_argument("--config", required=True)
    p.add_argument("--iq-in", required=True)
    p.add_argument("--symbols-out")
    p.add_argument("--raw-rate", type=float, help="treat input as headerless cf32 at this rate")
    p.set_defaults(fn=_cmd_demodulate)

    p = sub.add_parser("decode", help="full receive chain: detect, sync, compensate, decode")
    p.add_argument("--config", required=True)
    p.add_argument("--iq-in", required=True)
    p.add_argument("--payload-out", required=True)
    p.add_argument("--trace-out")
    p.add_argument("--raw-rate", type=float)
    p.add_argument("--no-compensate", action="store_true")
    p.set_defaults(fn=_cmd_decode)

    p = sub.add_parser("ber", help="run a Monte-Carlo sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--csv-out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=_cmd_ber)

    for name, help_text in (
        ("fig2", "replicate the carrier-offset BER experiment"),
        ("fig3", "replicate the sampling-offset BER experiment"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--fast", action="store_true", help="reduced grid for smoke tests")
        p.set_defaults(fn=lambda args, _n=name: _cmd_fig(_n, args))

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_USAGE
    except IqFormatError as exc:
        sys.stderr.write(f"iq file error: {exc}\n")
        return EXIT_IO
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO
    except CssPhyError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DECODE


if __name__ == "__main__":
    raise SystemExit(main())
