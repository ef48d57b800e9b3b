"""Built-in reference implementation for ``unitphysics bench``.

    python bench_reference.py --T0 1300 --p0 101325 --dt 1e-10 --t-end 2e-5 --out traj.jsonl

Any candidate program benchmarked against it must accept the same flags
and write a unitphysics trajectory file to ``--out``.
"""

import argparse
import sys


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="constant-volume H2/O2 ignition run")
    ap.add_argument("--T0", type=float, required=True)
    ap.add_argument("--p0", type=float, default=101325.0)
    ap.add_argument("--dt", type=float, default=1e-10)
    ap.add_argument("--t-end", type=float, default=2e-5)
    ap.add_argument("--phi", type=float, default=1.0)
    ap.add_argument("--integrator", default="rk4")
    ap.add_argument("--stride", type=int, default=100)
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)

    from unitphysics.reactor import ReactorConfig, integrate
    from unitphysics.thermochem import default_mechanism

    cfg = ReactorConfig(T0=args.T0, p0=args.p0, phi=args.phi, dt=args.dt, t_end=args.t_end,
                        integrator=args.integrator, output_stride=args.stride)
    integrate(cfg, default_mechanism()).write(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
