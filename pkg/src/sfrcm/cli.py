"""Command-line entry point: ``sfrcm constants|rho|lemma-check|sample|experiment``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__, analytics
from . import tolerances as tol
from .errors import ConfigError, InvalidArgument, NumericalFailure
from .experiments import (
    CONFIG_KEYS,
    DEFAULT_MASTER_SEED,
    MODES,
    PersistenceError,
    parse_config,
    run,
    spec_from_mapping,
)
from .model import ModelParams, unit_ball_volume
from .sampler import sample_configuration, sample_graph, write_sample
from .special import gamma

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def _version_text():
    lines = [f"sfrcm {__version__}", "tolerances:"]
    lines += [f"  {k} = {v!r}" for k, v in tol.as_table().items()]
    return "\n".join(lines)


class _Version(argparse.Action):
    def __init__(self, option_strings, dest, **kw):
        super().__init__(option_strings, dest, nargs=0, help="print version and tolerances, then exit")

    def __call__(self, parser, namespace, values, option_string=None):
        print(_version_text())
        parser.exit()


def _model_flags(p, required=True):
    p.add_argument("--d", type=int, required=required)
    p.add_argument("--alpha", type=float, required=required)
    p.add_argument("--beta", type=float, required=required)
    p.add_argument("--eta", type=float, default=None if not required else 1.0)
    p.add_argument("--paper-literal-c0", action="store_true", default=None,
                   help="use a flat 2*pi angular factor in c0 and c3 instead of the sphere area")


def _params(a):
    return ModelParams(a.d, a.alpha, a.beta, 1.0 if a.eta is None else a.eta, bool(a.paper_literal_c0))


def _row(name, value):
    print(f"{name:<16}{value!r}" if isinstance(value, float) else f"{name:<16}{value}")


def cmd_constants(a):
    params = _params(a)
    c0 = analytics.c0_constant(params)
    _row("d", params.d)
    _row("alpha", params.alpha)
    _row("beta", params.beta)
    _row("eta", params.eta)
    _row("angular", "2pi" if params.paper_literal_c0 else "d*theta_d")
    _row("gamma(1-d/a)", gamma(1 - params.d / params.alpha))
    _row("theta_d", unit_ball_volume(params.d))
    _row("c0", c0)
    if params.beta > 1:
        kappa = analytics.kappa_constant(params)
        _row("kappa", kappa)
        _row("rho", analytics.rho_root(params, kappa))
    else:
        print("kappa, rho: undefined (requires beta > 1)")
    return EXIT_OK


def cmd_rho(a):
    params = _params(a)
    kappa = analytics.kappa_constant(params)
    rho = analytics.rho_root(params, kappa)
    _row("kappa", kappa)
    _row("rho", rho)
    _row("Q(rho)", analytics.Q_of_gamma(params, kappa, rho))
    if a.s is not None:
        for label, g in (("rho/10", rho / 10), ("rho", rho), ("2rho", 2 * rho)):
            _row(f"r_hat[{label}]", analytics.hat_radius(params, kappa, a.s, g))
    return EXIT_OK


def cmd_lemma_check(a):
    params = _params(a)
    ladder = a.s_list or [1e4, 1e6, 1e8]
    values = analytics.lemma_limit_sequence(a.lemma, params, a.k, a.xi, a.j, a.m, ladder)
    print(f"{'s':<14}{'normalized':<24}|normalized-1|")
    for s, v in zip(ladder, values):
        print(f"{s:<14.6g}{v!r:<24}{abs(v - 1)!r}")
    return EXIT_OK


def cmd_sample(a):
    params = _params(a)
    if a.radius is not None:
        radius = a.radius
    else:
        # radius from the degree scaling law; eta = 0 falls back to the eta = 1 radius
        p = params if params.eta > 0 else ModelParams(params.d, params.alpha, params.beta, 1.0,
                                                      params.paper_literal_c0)
        radius = analytics.scaling_radius(p, a.s, a.k, a.xi).r_s
    seed = a.seed if a.seed is not None else DEFAULT_MASTER_SEED
    config = sample_configuration(params, a.s, seed)
    graph = sample_graph(config, params, radius, seed, workers=a.threads)
    try:
        with open(a.out, "w") as fh:
            write_sample(fh, config, params, radius, graph)
    except OSError as exc:
        raise PersistenceError(f"cannot write {a.out}: {exc}") from exc
    print(f"wrote {a.out}: n={config.n} edges={graph.num_edges} radius={radius!r}")
    return EXIT_OK


def cmd_experiment(a):
    raw = {}
    if a.config:
        try:
            with open(a.config) as fh:
                raw = parse_config(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {a.config}: {exc}") from exc
    for key in CONFIG_KEYS:
        value = getattr(a, key, None)
        if value is not None:
            raw[key] = value if isinstance(value, str) else str(value)
    if "master_seed" not in raw:
        raw["master_seed"] = str(DEFAULT_MASTER_SEED)
    spec = spec_from_mapping(raw, mode=a.mode)
    if spec.out_dir is None:
        raise ConfigError("missing required key 'out_dir'")
    result = run(spec)
    print(f"{spec.mode}: {len(result.rows)} summary rows written to {spec.out_dir}")
    if not result.ok:
        print("warning: at least one mean is more than 4 standard errors from its oracle", file=sys.stderr)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="sfrcm", description="Scale-free random connection model toolkit.")
    parser.add_argument("--version", action=_Version)
    parser.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="print c0, theta_d, kappa, rho and Gamma(1-d/alpha)")
    _model_flags(p)
    p.set_defaults(fn=cmd_constants)

    p = sub.add_parser("rho", help="connectivity constants kappa and rho")
    _model_flags(p)
    p.add_argument("--s", type=float, help="also print r_hat at rho/10, rho and 2rho")
    p.set_defaults(fn=cmd_rho)

    p = sub.add_parser("lemma-check", help="normalised lemma values along an s ladder")
    _model_flags(p)
    p.add_argument("--lemma", choices=analytics.LEMMAS, required=True)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--s-list", type=lambda t: [float(x) for x in t.replace(",", " ").split()])
    p.set_defaults(fn=cmd_lemma_check)

    p = sub.add_parser("sample", help="sample one configuration and graph to a text file")
    _model_flags(p)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--radius", type=float, help="scale radius; default from the degree scaling law")
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--xi", type=float, default=0.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("experiment", help="run a Monte Carlo or ladder experiment")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config")
    _model_flags(p, required=False)
    for key, conv in CONFIG_KEYS.items():
        if key in ("d", "alpha", "beta", "eta", "paper_literal_c0", "mode"):
            continue
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=str, default=None)
    p.set_defaults(fn=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        return a.fn(a)
    except (ConfigError, InvalidArgument) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
