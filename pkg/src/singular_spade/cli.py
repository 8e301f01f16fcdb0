"""Command-line driver: figure data, reference tables and ad-hoc power/free-energy runs.

Every command resolves one flat configuration dictionary in this order:
built-in defaults, the ``--profile`` replicate counts, an optional JSON file
given by ``--config``, and finally explicit flags.  The resolved dictionary is
echoed as ``# config: {...}`` at the top of every CSV it writes, and
:func:`read_config_echo` parses it back.

Exit status: 0 on success, 2 for configuration or parameter errors, 3 when a
quadrature fails to converge.
"""
import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .bayes import (
    APPENDIX_N_GRID,
    APPENDIX_SEED,
    APPENDIX_WINDOWS,
    BAYES_QUADRATURE,
    PriorWindow,
    free_energy_records,
    summarize_records,
)
from .errors import DomainError, InsufficientReplicates, IntegrationNotConverged
from .information import DI_QUADRATURE, KL_SCHEMES
from .optics import GaussianPsf, SceneParams
from .quadrature import QuadratureSpec
from .singular import (
    ALIGNED_SPADE_KL,
    DIRECT_IMAGING_KL,
    MonomialKl,
    free_energy_asymptote,
    zeta_pole_structure,
)
from .testing import blind_spot_separation, di_power_table, power_curve, power_vs_n

OUT_DIR_ENV = "SINGULAR_SPADE_OUT_DIR"
DEFAULT_OUT_DIR = "out"

PROFILES = {
    "ci": {"mc_reps": 20_000, "replicates": 512},
    "paper": {"mc_reps": 200_000, "replicates": 4096},
}

POWER_COLUMNS = ("scheme", "s", "n", "power", "std_err", "alpha", "theta", "epsilon", "sigma", "seed")
FIG2_COLUMNS = (
    "n",
    "q10_exact",
    "median_exact",
    "q90_exact",
    "q10_local",
    "median_local",
    "q90_local",
    "replicates",
    "seed",
)

_COMMON = {
    "sigma": 1.0,
    "epsilon": 0.3,
    "theta": 0.1,
    "alpha": 0.05,
    "seed": APPENDIX_SEED,
    "profile": "ci",
    "mc_reps": None,
    "quad_nodes": 16,
    "out_dir": None,
    "svg": False,
}

_COMMAND_DEFAULTS = {
    "fig1": {
        "s_grid": [0.01, 0.40, 0.01],
        "n_values": [200, 500, 2000],
        "panel_d_n": [50, 100, 200, 500, 1000, 2000, 5000],
        "panel_d_s": [0.05, 0.10, 0.20],
    },
    "fig2": {
        "windows": [list(w) for w in APPENDIX_WINDOWS],
        "n_grid": list(APPENDIX_N_GRID),
        "replicates": None,
    },
    "kl-table": {
        "eps_values": [0.0, 0.01, 0.05, 0.1, 0.3],
        "s_values": [0.01, 0.05, 0.1, 0.2, 0.5, 1.0],
        "theta_values": [0.1, 0.5],
    },
    "zeta": {
        "exponents": [],
        "n_grid": [10, 100, 1000, 10_000, 100_000, 1_000_000],
    },
    "power-curve": {
        "scheme": "both",
        "n": 200,
        "s_grid": [0.01, 0.40, 0.01],
    },
    "power-vs-n": {
        "scheme": "both",
        "n_grid": [50, 100, 200, 500, 1000, 2000, 5000],
        "s_values": [0.05, 0.10, 0.20],
    },
    "free-energy": {
        "window": list(APPENDIX_WINDOWS[0]),
        "n_grid": list(APPENDIX_N_GRID),
        "replicates": None,
    },
}


class ConfigError(Exception):
    """Invalid or inconsistent configuration."""


# ---------------------------------------------------------------- formatting


def format_value(value):
    """Shortest round-trip text for floats; plain text for everything else."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _config_echo(config):
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def write_csv(path, columns, rows, config, extra_header=()):
    """Write ``rows`` under ``columns``, preceded by ``#`` header lines."""
    buf = io.StringIO()
    buf.write(f"# singular_spade {__version__}\n")
    buf.write(f"# command: {config['command']} profile: {config['profile']} seed: {config['seed']}\n")
    for line in extra_header:
        buf.write(f"# {line}\n")
    buf.write(f"# config: {_config_echo(config)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) for c in columns])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
    return Path(path)


def read_config_echo(path):
    """Return the configuration dictionary echoed in a CSV header."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("# config: "):
                return json.loads(line[len("# config: ") :])
    raise ConfigError(f"{path} has no config echo")


def read_csv_rows(path):
    """Data rows of a CSV written by this module (header comments skipped)."""
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------- config


def resolve_config(command, file_config=None, flags=None):
    """Merge defaults, profile, file and flag values into one dictionary."""
    config = dict(_COMMON)
    config.update(_COMMAND_DEFAULTS[command])
    for source in (file_config or {}), (flags or {}):
        for key, value in source.items():
            if key == "command":
                if value != command:
                    raise ConfigError(f"config is for command {value!r}, not {command!r}")
                continue
            if key not in config:
                raise ConfigError(f"unknown config key {key!r} for {command}")
            if value is not None:
                config[key] = value
    if config["profile"] not in PROFILES:
        raise ConfigError(f"unknown profile {config['profile']!r}")
    for key in ("mc_reps", "replicates"):
        if key in config and config[key] is None:
            config[key] = PROFILES[config["profile"]][key]
    config["command"] = command
    config["out_dir"] = None
    _normalise_types(config)
    return config


def _normalise_types(config):
    try:
        for key in ("sigma", "epsilon", "theta", "alpha"):
            config[key] = float(config[key])
        for key in ("seed", "mc_reps", "quad_nodes", "replicates", "n"):
            if key in config:
                config[key] = int(config[key])
        for key in ("s_grid", "panel_d_s", "s_values", "eps_values", "theta_values", "window"):
            if key in config:
                config[key] = [float(v) for v in config[key]]
        for key in ("n_values", "panel_d_n", "n_grid"):
            if key in config:
                config[key] = [int(v) for v in config[key]]
        if "windows" in config:
            config["windows"] = [[float(a), float(b)] for a, b in config["windows"]]
        if "exponents" in config:
            config["exponents"] = [[int(a), int(b)] for a, b in config["exponents"]]
        config["svg"] = bool(config["svg"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}") from exc
    if "s_grid" in config and len(config["s_grid"]) != 3:
        raise ConfigError("s_grid must be [start, stop, step]")
    if "n_values" in config and len(config["n_values"]) != 3:
        raise ConfigError("n_values must hold one n per panel (three)")
    if "window" in config and len(config["window"]) != 2:
        raise ConfigError("window must be [eps_max, s_max]")
    if config.get("scheme", "both") not in ("DI", "bSPADE", "both"):
        raise ConfigError(f"unknown scheme {config['scheme']!r}")
    if config["seed"] < 0 or config["seed"] >= 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")


def arange_grid(start, stop, step):
    """Inclusive decimal grid ``start, start + step, ..., stop``."""
    if not step > 0 or stop < start:
        raise ConfigError("grid needs step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9))
    return [round(start + k * step, 12) for k in range(count + 1)]


def _psf(config):
    return GaussianPsf(config["sigma"])


def _scene(config, s=0.0):
    return SceneParams(config["epsilon"], s, config["theta"])


def _bayes_quad(config):
    return QuadratureSpec(config["quad_nodes"], BAYES_QUADRATURE.refinement_levels, BAYES_QUADRATURE.rel_tol)


def _di_quad(config):
    return QuadratureSpec(config["quad_nodes"], DI_QUADRATURE.refinement_levels, DI_QUADRATURE.rel_tol)


def _power_rows(points, config):
    return [
        {
            "scheme": p.scheme,
            "s": p.s,
            "n": p.n,
            "power": p.power,
            "std_err": p.std_err,
            "alpha": config["alpha"],
            "theta": config["theta"],
            "epsilon": config["epsilon"],
            "sigma": config["sigma"],
            "seed": config["seed"],
        }
        for p in points
    ]


def _schemes(config):
    return ("DI", "bSPADE") if config["scheme"] == "both" else (config["scheme"],)


def _curve(scheme, s_grid, n, config):
    return power_curve(
        scheme, s_grid, n, _scene(config), _psf(config), config["alpha"], config["mc_reps"], config["seed"]
    )


def _vs_n(scheme, n_grid, s_values, config):
    return power_vs_n(
        scheme, n_grid, s_values, _scene(config), _psf(config), config["alpha"], config["mc_reps"], config["seed"]
    )


# ---------------------------------------------------------------- commands


def cmd_fig1(config, out_dir):
    """Panels a-c (power versus s at each n) and panel d (power versus n)."""
    s_grid = arange_grid(*config["s_grid"])
    blind = blind_spot_separation(config["theta"])
    header = [f"blind_spot_s: {format_value(blind)}"]
    written = []
    panels = {}
    # one Monte Carlo pass covers panels a-c: every n reads prefixes of the same deviates
    di_rows = di_power_table(
        config["epsilon"], s_grid, config["n_values"], _psf(config), config["alpha"], config["mc_reps"], config["seed"]
    )
    for label, n, di_row in zip("abc", config["n_values"], di_rows):
        points = list(di_row) + _curve("bSPADE", s_grid, n, config)
        panels[label] = points
        written.append(write_csv(out_dir / f"fig1_{label}.csv", POWER_COLUMNS, _power_rows(points, config), config, header))
    points = _vs_n("DI", config["panel_d_n"], config["panel_d_s"], config) + _vs_n(
        "bSPADE", config["panel_d_n"], config["panel_d_s"], config
    )
    panels["d"] = points
    written.append(write_csv(out_dir / "fig1_d.csv", POWER_COLUMNS, _power_rows(points, config), config, header))
    if config["svg"]:
        from .plotting import plot_fig1

        written.append(plot_fig1(panels, config, out_dir / "fig1.svg"))
    return written


def fig2_filename(window):
    return f"fig2_eps{format_value(window[0])}_smax{format_value(window[1])}.csv"


def cmd_fig2(config, out_dir):
    """Quantile bands of centred exact and local free energies, one file per window."""
    psf = _psf(config)
    quad = _bayes_quad(config)
    written = []
    summaries = {}
    for eps_max, s_max in config["windows"]:
        window = PriorWindow(eps_max, s_max)
        records = free_energy_records(window, config["n_grid"], psf, config["seed"], config["replicates"], quad)
        summary = summarize_records(records)
        summaries[(eps_max, s_max)] = summary
        rows = [
            {
                "n": row["n"],
                "q10_exact": row["exact"][0],
                "median_exact": row["exact"][1],
                "q90_exact": row["exact"][2],
                "q10_local": row["local"][0],
                "median_local": row["local"][1],
                "q90_local": row["local"][2],
                "replicates": row["replicates"],
                "seed": config["seed"],
            }
            for row in summary
        ]
        header = [
            f"window: eps_max={format_value(eps_max)} s_max={format_value(s_max)}",
            f"d_max_lead: {format_value(window.d_max_lead(psf))}",
            "centering: log(n)/2 - log(log(n))",
        ]
        written.append(write_csv(out_dir / fig2_filename((eps_max, s_max)), FIG2_COLUMNS, rows, config, header))
    if config["svg"]:
        from .plotting import plot_fig2

        written.append(plot_fig2(summaries, out_dir / "fig2.svg"))
    return written


KL_COLUMN_PREFIX = {"DI": "di", "SPADE": "spade", "quantum": "quantum", "bSPADE": "bspade"}


def cmd_kl_table(config, out_dir):
    """Exact and leading KLs of every scheme over an (eps, s, theta) grid."""
    psf = _psf(config)
    columns = ["epsilon", "s", "theta", "sigma"]
    for prefix in KL_COLUMN_PREFIX.values():
        columns += [f"{prefix}_exact", f"{prefix}_leading", f"{prefix}_ratio"]
    rows = []
    for theta in config["theta_values"]:
        for eps in config["eps_values"]:
            for s in config["s_values"]:
                scene = SceneParams(eps, s, theta)
                row = {"epsilon": eps, "s": s, "theta": theta, "sigma": config["sigma"]}
                for name, fn in KL_SCHEMES.items():
                    prefix = KL_COLUMN_PREFIX[name]
                    try:
                        res = fn(scene, psf, _di_quad(config)) if name == "DI" else fn(scene, psf)
                        exact, leading, ratio = res.exact, res.leading, res.ratio
                    except DomainError:
                        exact = leading = ratio = math.nan
                    row.update({f"{prefix}_exact": exact, f"{prefix}_leading": leading, f"{prefix}_ratio": ratio})
                rows.append(row)
    return [write_csv(out_dir / "kl_table.csv", columns, rows, config)]


def zeta_report(config):
    pairs = [("DI", DIRECT_IMAGING_KL), ("SPADE", ALIGNED_SPADE_KL)]
    pairs += [(f"user_{a}_{b}", MonomialKl(a, b)) for a, b in config["exponents"]]
    report = {"config": config, "structures": [], "asymptotes": []}
    poles = {}
    for name, kl in pairs:
        pole = zeta_pole_structure(kl)
        poles[name] = pole
        report["structures"].append(
            {
                "name": name,
                "exponents": [kl.a_eps, kl.a_s],
                "rlct": str(pole.rlct),
                "rlct_float": float(pole.rlct),
                "multiplicity": pole.multiplicity,
                "pole": str(pole.pole),
            }
        )
    for n in config["n_grid"]:
        entry = {"n": n}
        for name, pole in poles.items():
            entry[name] = free_energy_asymptote(n, pole)
        entry["SPADE_minus_DI"] = entry["SPADE"] - entry["DI"]
        entry["loglog_n"] = math.log(math.log(n))
        report["asymptotes"].append(entry)
    return report


def cmd_zeta(config, out_dir):
    """JSON report of pole structures and free-energy asymptotes."""
    path = out_dir / "zeta.json"
    path.write_text(json.dumps(zeta_report(config), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [path]


def cmd_power_curve(config, out_dir):
    s_grid = arange_grid(*config["s_grid"])
    points = [p for scheme in _schemes(config) for p in _curve(scheme, s_grid, config["n"], config)]
    return [write_csv(out_dir / "power_curve.csv", POWER_COLUMNS, _power_rows(points, config), config)]


def cmd_power_vs_n(config, out_dir):
    points = [
        p for scheme in _schemes(config) for p in _vs_n(scheme, config["n_grid"], config["s_values"], config)
    ]
    return [write_csv(out_dir / "power_vs_n.csv", POWER_COLUMNS, _power_rows(points, config), config)]


FREE_ENERGY_COLUMNS = ("n", "replicate", "f_exact", "f_local", "centered_exact", "centered_local", "seed")


def cmd_free_energy(config, out_dir):
    """Per-replicate free energies for a single prior window."""
    psf = _psf(config)
    window = PriorWindow(*config["window"])
    records = free_energy_records(
        window, config["n_grid"], psf, config["seed"], config["replicates"], _bayes_quad(config)
    )
    rows = [
        {
            "n": r.n,
            "replicate": r.replicate_id,
            "f_exact": r.f_exact,
            "f_local": r.f_local,
            "centered_exact": r.centered_exact,
            "centered_local": r.centered_local,
            "seed": r.seed,
        }
        for r in records
    ]
    header = [f"d_max_lead: {format_value(window.d_max_lead(psf))}"]
    return [write_csv(out_dir / "free_energy.csv", FREE_ENERGY_COLUMNS, rows, config, header)]


COMMANDS = {
    "fig1": cmd_fig1,
    "fig2": cmd_fig2,
    "kl-table": cmd_kl_table,
    "zeta": cmd_zeta,
    "power-curve": cmd_power_curve,
    "power-vs-n": cmd_power_vs_n,
    "free-energy": cmd_free_energy,
}


# ---------------------------------------------------------------- argparse


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common_parent():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--sigma", type=float, help="PSF width")
    p.add_argument("--epsilon", type=float, help="relative brightness of the faint source")
    p.add_argument("--theta", type=float, help="demultiplexer misalignment")
    p.add_argument("--alpha", type=float, help="test size")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--profile", choices=sorted(PROFILES), help="replicate-count preset")
    p.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV} or ./{DEFAULT_OUT_DIR})")
    p.add_argument("--mc-reps", type=int, help="Monte Carlo replicates per power point")
    p.add_argument("--quad-nodes", type=int, help="Gauss-Legendre nodes per axis before refinement")
    p.add_argument("--config", help="JSON file with configuration keys (flags override it)")
    p.add_argument("--svg", action="store_true", default=None, help="fig1 and fig2: also render a static SVG (needs matplotlib)")
    return p


def build_parser():
    parser = _Parser(prog="singular-spade", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _common_parent()

    p = sub.add_parser("fig1", parents=[common], help="power curves of DI and misaligned binary SPADE")
    p.add_argument("--s-grid", nargs=3, type=float, metavar=("START", "STOP", "STEP"))
    p.add_argument("--n-values", nargs=3, type=int, metavar="N")
    p.add_argument("--panel-d-n", nargs="+", type=int, metavar="N")
    p.add_argument("--panel-d-s", nargs="+", type=float, metavar="S")

    p = sub.add_parser("fig2", parents=[common], help="centred Bayes free energies under H0")
    p.add_argument("--window", dest="windows", nargs=2, type=float, action="append", metavar=("EPS_MAX", "S_MAX"))
    p.add_argument("--n-grid", nargs="+", type=int, metavar="N")
    p.add_argument("--replicates", type=int)

    p = sub.add_parser("kl-table", parents=[common], help="exact and leading KL divergences")
    p.add_argument("--eps-values", nargs="+", type=float)
    p.add_argument("--s-values", nargs="+", type=float)
    p.add_argument("--theta-values", nargs="+", type=float)

    p = sub.add_parser("zeta", parents=[common], help="zeta-function poles and free-energy asymptotes")
    p.add_argument("--exponents", nargs=2, type=int, action="append", metavar=("A_EPS", "A_S"))
    p.add_argument("--n-grid", nargs="+", type=int, metavar="N")

    for name, help_text in (("power-curve", "power versus separation"), ("power-vs-n", "power versus sample size")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--scheme", choices=("DI", "bSPADE", "both"))
        if name == "power-curve":
            p.add_argument("--n", type=int)
            p.add_argument("--s-grid", nargs=3, type=float, metavar=("START", "STOP", "STEP"))
        else:
            p.add_argument("--n-grid", nargs="+", type=int, metavar="N")
            p.add_argument("--s-values", nargs="+", type=float, metavar="S")

    p = sub.add_parser("free-energy", parents=[common], help="per-replicate free energies for one window")
    p.add_argument("--window", nargs=2, type=float, metavar=("EPS_MAX", "S_MAX"))
    p.add_argument("--n-grid", nargs="+", type=int, metavar="N")
    p.add_argument("--replicates", type=int)
    return parser


def _load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def _out_dir(arg):
    return Path(arg or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR)


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "out_dir")}
        file_config = _load_config_file(args.config) if args.config else None
        config = resolve_config(args.command, file_config, flags)
        out_dir = _out_dir(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for path in COMMANDS[args.command](config, out_dir):
            print(path)
    except (ConfigError, DomainError, InsufficientReplicates) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except IntegrationNotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0
