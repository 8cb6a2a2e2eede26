"""Command-line front end.

Configuration comes from a flat ``key = value`` file with dotted sections
(``link.K = 5``, ``pulse.family = rrc``), optional ``--set key=value``
overrides and a few shortcut flags.  Every result is a CSV table (or JSON
records) preceded by a metadata block naming the seed, a hash of the fully
resolved configuration and the tool version.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .channel import LinkConfig
from .delay import DelayDist, Uniform, point_dist, standard_mixture
from .errors import ConfigurationError, InternalError, SingularityError
from .experiments import (ExperimentPlan, optimize_sampling_origin, power_scaling_sweep, run_monte_carlo,
                          seeded_pathloss)
from .pulse import PulseSpec
from .rates import analyze, closed_form_rate
from .receivers import ReceiverKind

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# key -> (type, default); None defaults are resolved by LinkConfig
SCHEMA = {
    "link.K": (int, 5),
    "link.M": (int, 128),
    "link.N": (int, 64),
    "link.rho_d_db": (float, 20.0),
    "link.beta": (str, "seeded"),
    "link.e": (float, 0.5),
    "link.e_s": (str, ""),
    "link.e_t": (str, ""),
    "link.symbol": (str, ""),
    "link.seed": (int, 0),
    "pilot.kind": (str, "hadamard"),
    "pilot.length": (str, ""),
    "pilot.cyclic_guard": (bool, True),
    "pilot.spacing": (str, ""),
    "pulse.family": (str, "rect"),
    "pulse.rolloff": (float, 0.5),
    "pulse.sidelobes": (int, 3),
    "pulse.grid_step": (float, 1e-3),
    "delay.model": (str, "mixture"),
    "delay.tau": (float, 0.0),
    "run.receivers": (str, "all"),
    "run.trials": (int, 1000),
    "run.threads": (str, ""),
    "run.K_range": (str, "2..16:2"),
    "run.grid_step": (float, 0.005),
    "run.M_list": (str, "64,128,256,512,1024,2048,4096"),
    "run.E_d_db": (float, 10.0),
    "run.scaling": (str, "power_over_M"),
    "run.format": (str, "csv"),
    "run.output": (str, "-"),
}


# where and how fast results are produced does not change them
UNHASHED = frozenset({"run.output", "run.threads"})


def _to_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key: str, raw) -> object:
    kind, _ = SCHEMA[key]
    if not isinstance(raw, str):
        return raw
    try:
        return _to_bool(raw) if kind is bool else kind(raw.strip())
    except ValueError as exc:
        raise ConfigurationError(f"{key}: {exc}") from exc


def parse_config_text(text: str) -> dict:
    """Read ``key = value`` lines; '#' starts a comment and blank lines are ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def _floats(key: str, text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigurationError(f"{key}: {exc}") from exc


def parse_int_range(text: str) -> list[int]:
    """'5', '2,4,8', '2..16' or '2..16:2' (inclusive)."""
    text = text.strip()
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            lo, hi = (int(x) for x in span.split(".."))
            values = list(range(lo, hi + 1, int(step) if step else 1))
        else:
            values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad integer range {text!r}") from exc
    if not values:
        raise ConfigurationError(f"empty integer range {text!r}")
    return values


@dataclass
class RunConfig:
    """Resolved settings: every key of SCHEMA with a typed value."""

    values: dict = field(default_factory=dict)

    @classmethod
    def resolve(cls, *layers: dict) -> "RunConfig":
        values = {k: default for k, (_, default) in SCHEMA.items()}
        for layer in layers:
            for key, raw in layer.items():
                if key not in SCHEMA:
                    raise ConfigurationError(f"unknown configuration key {key!r}")
                values[key] = _convert(key, raw)
        cfg = cls(values)
        cfg.link()  # validate eagerly
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    def canonical(self) -> str:
        """Sorted ``key = value`` lines of every key that can change the results."""
        return "\n".join(f"{k} = {_fmt_value(self.values[k])}" for k in sorted(self.values) if k not in UNHASHED)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def pulse(self) -> PulseSpec:
        try:
            return PulseSpec(self["pulse.family"], rolloff=self["pulse.rolloff"],
                             sidelobes=self["pulse.sidelobes"], grid_step=self["pulse.grid_step"])
        except (ConfigurationError, ValueError) as exc:
            raise ConfigurationError(f"pulse: {exc}") from exc

    def delays(self, K: int) -> DelayDist:
        model = self["delay.model"].lower()
        if model == "mixture":
            return standard_mixture(K)
        if model == "uniform":
            return DelayDist(((1.0, Uniform(0.0, 1.0)),))
        if model == "point":
            return point_dist(self["delay.tau"])
        raise ConfigurationError(f"delay.model: expected mixture, uniform or point, got {model!r}")

    def link(self, K: int | None = None) -> LinkConfig:
        K = self["link.K"] if K is None else K
        beta_text = self["link.beta"].strip().lower()
        if beta_text == "seeded":
            beta = seeded_pathloss(K, self["link.seed"])
        elif beta_text == "ones":
            beta = None
        else:
            beta = _floats("link.beta", self["link.beta"])

        def opt(key, conv):
            text = str(self[key]).strip()
            return conv(text) if text else None

        try:
            return LinkConfig(
                K=K, M=self["link.M"], N=self["link.N"], rho_d=10 ** (self["link.rho_d_db"] / 10),
                beta=beta, e=self["link.e"], e_s=opt("link.e_s", float),
                e_t=opt("link.e_t", lambda s: _floats("link.e_t", s)),
                symbol=opt("link.symbol", int), seed=self["link.seed"],
                pilot_kind=self["pilot.kind"], N_p=opt("pilot.length", int),
                zc_cyclic_guard=self["pilot.cyclic_guard"], zc_spacing=opt("pilot.spacing", int),
                pulse=self.pulse(), delays=self.delays(K),
            )
        except ValueError as exc:
            raise ConfigurationError(f"link: {exc}") from exc

    def kinds(self) -> tuple:
        text = self["run.receivers"].strip().lower()
        if text in ("", "all"):
            return tuple(ReceiverKind)
        return tuple(ReceiverKind.parse(x.strip()) for x in text.split(",") if x.strip())

    def threads(self) -> int | None:
        text = self["run.threads"].strip()
        return int(text) if text else None


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)  # exact round trip, so a dumped config reproduces its hash
    return str(v)


def fmt(x) -> str:
    """Locale-independent decimal with 9 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.9g}"
    return str(x)


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise InternalError("row does not match the column header")
        self.rows.append([fmt(v) for v in values])


def render(table: Table, cfg: RunConfig, command: str, fmt_name: str) -> str:
    meta = {"tool": f"async-mimo {__version__}", "command": command, "seed": str(cfg["link.seed"]),
            "config_hash": cfg.digest()}
    if fmt_name == "json":
        doc = {"metadata": {**meta, "config": dict(line.split(" = ", 1) for line in cfg.canonical().splitlines())},
               "columns": table.columns,
               "rows": [dict(zip(table.columns, r)) for r in table.rows]}
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if fmt_name != "csv":
        raise ConfigurationError(f"run.format: expected csv or json, got {fmt_name!r}")
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {v}\n")
    for line in cfg.canonical().splitlines():
        buf.write(f"# config {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    writer.writerows(table.rows)
    return buf.getvalue()


# ---------------------------------------------------------------- subcommands


def cmd_moments(cfg: RunConfig) -> Table:
    link = cfg.link()
    kinds = cfg.kinds()
    t = analyze(link, kinds).table
    out = Table(["name", "l", "k", "index", "real", "imag"])
    for idx, i in enumerate(t.lags):
        out.add("Eg", "", "", i, t.Eg[idx], 0.0)
        out.add("Eg2", "", "", i, t.Eg2[idx], 0.0)
    K = link.K
    for l in range(K):
        for k in range(K):
            out.add("lam2", l, k, "", t.lam2[l, k], 0.0)
            for idx, i in enumerate(t.lags):
                g = complex(t.gamma1[l, k, idx])
                out.add("gamma1", l, k, i, g.real, g.imag)
                out.add("gamma2", l, k, i, float(np.real(t.gamma2[l, k, idx])), 0.0)
    if t.xi2 is not None:
        for n in range(t.N):
            out.add("zf_mean", "", "", n, t.zf_mean[n], 0.0)
            out.add("xi2", "", "", n, t.xi2[n], 0.0)
        out.add("eps", "", "", "", t.eps, 0.0)
    if t.v is not None:
        for l in range(K):
            out.add("v", l, "", "", t.v[l], 0.0)
    return out


def cmd_rate(cfg: RunConfig) -> Table:
    link = cfg.link()
    kinds = cfg.kinds()
    an = analyze(link, kinds)
    out = Table(["theorem", "receiver", "user", "rate", "sinr", "signal", "isi", "iui", "noise", "bound"])
    for kind in kinds:
        rep = closed_form_rate(kind, link, an, bound=True)
        for l in range(link.K):
            out.add(kind.theorem, kind.value, l, rep.rates[l], rep.sinr[l], rep.signal[l], rep.isi[l],
                    rep.iui[l], rep.noise[l], rep.bound)
        out.add(kind.theorem, kind.value, "sum", rep.sum_rate, "", "", "", "", "", "")
    return out


def cmd_montecarlo(cfg: RunConfig) -> Table:
    link = cfg.link()
    plan = ExperimentPlan(link, cfg["run.trials"], cfg.kinds(), threads=cfg.threads())
    reports = run_monte_carlo(plan)
    out = Table(["receiver", "user", "empirical", "theory", "stderr", "rel_err", "moment_rate"])
    for kind, rep in reports.items():
        for l in range(link.K):
            out.add(kind.value, l, rep.empirical[l], rep.theory[l], rep.stderr[l], rep.rel_err[l],
                    rep.moment_rate[l])
        out.add(kind.value, "sum", rep.sum_empirical, rep.sum_theory, rep.sum_stderr, rep.sum_rel_err,
                float(np.sum(rep.moment_rate)))
    return out


def cmd_optimize_e(cfg: RunConfig, curve: bool = False) -> Table:
    kinds = cfg.kinds()
    if len(kinds) != 1:
        raise ConfigurationError("run.receivers: optimize-e takes exactly one receiver")
    kind = kinds[0]
    spec = cfg.pulse()
    out = Table(["K", "e", "objective"] if curve else ["K", "e_star", "objective"])
    for K in parse_int_range(cfg["run.K_range"]):
        res = optimize_sampling_origin(kind, K, spec, cfg.delays(K), grid_step=cfg["run.grid_step"],
                                       pilot_kind=cfg["pilot.kind"])
        if curve:
            for e, val in zip(res.grid, res.curve):
                out.add(K, e, val)
        else:
            out.add(K, res.e_star, res.value)
    return out


def cmd_power_scaling(cfg: RunConfig) -> Table:
    link = cfg.link()
    M_list = parse_int_range(cfg["run.M_list"])
    E_d = 10 ** (cfg["run.E_d_db"] / 10)
    trials = cfg["run.trials"] if cfg["run.trials"] > 0 else 0
    scaling = cfg["run.scaling"]
    exponent = {"power_over_M": 1.0, "power_over_sqrtM": 0.5}.get(scaling)
    if exponent is None:
        raise ConfigurationError(f"run.scaling: expected power_over_M or power_over_sqrtM, got {scaling!r}")
    cols = ["receiver", "M", "rho_d", "user", "rate", "asymptote"] + (["empirical"] if trials else [])
    out = Table(cols)
    for kind in cfg.kinds():
        c = power_scaling_sweep(kind, E_d, M_list, scaling, link, trials=trials)
        for r, M in enumerate(c.M):
            for l in range(link.K):
                extra = [c.empirical[r, l]] if trials else []
                out.add(kind.value, M, E_d / M**exponent, l, c.rates[r, l], c.asymptote[l], *extra)
    return out


COMMANDS = {
    "moments": "dump the delay-averaged moment tables",
    "rate": "closed-form achievable rates of the receivers",
    "montecarlo": "simulated rates next to the closed forms",
    "optimize-e": "optimal sampling origin versus the number of users",
    "power-scaling": "rates along an antenna sweep with scaled transmit power",
}

# shortcut flags -> configuration keys
SHORTCUTS = {
    "K": "link.K", "M": "link.M", "N": "link.N", "rho_db": "link.rho_d_db", "e": "link.e",
    "seed": "link.seed", "pulse": "pulse.family", "pilot": "pilot.kind", "trials": "run.trials",
    "threads": "run.threads", "format": "run.format", "output": "run.output",
    "grid_step": "run.grid_step", "M_list": "run.M_list", "E_d_db": "run.E_d_db", "scaling": "run.scaling",
    "delay": "delay.model",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="async-mimo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
        p.add_argument("--K", help="users; optimize-e accepts ranges such as 2..16 or 2..16:2")
        p.add_argument("--M", help="receive antennas")
        p.add_argument("--N", help="frame length")
        p.add_argument("--rho-db", dest="rho_db", help="data SNR in dB")
        p.add_argument("--e", help="sampling origin")
        p.add_argument("--seed")
        p.add_argument("--pulse", help="rect or rrc")
        p.add_argument("--pilot", help="hadamard or zadoff-chu")
        p.add_argument("--delay", help="mixture, uniform or point")
        p.add_argument("--receiver", action="append", help="receiver kind (repeatable)")
        p.add_argument("--theorem", type=int, action="append", choices=[1, 2, 3, 4],
                       help="receiver by theorem number (1-4)")
        p.add_argument("--trials")
        p.add_argument("--threads")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--output", "-o", help="output path, '-' for stdout")
        if name == "optimize-e":
            p.add_argument("--grid-step", dest="grid_step")
            p.add_argument("--curve", action="store_true", help="emit the objective on the whole grid")
        if name == "power-scaling":
            p.add_argument("--M-list", dest="M_list")
            p.add_argument("--E-d-db", dest="E_d_db")
            p.add_argument("--scaling", choices=["power_over_M", "power_over_sqrtM"])
    return parser


def _layers(args) -> list[dict]:
    layers = []
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                layers.append(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigurationError(f"cannot read config file: {exc}") from exc
    flags = {}
    for attr, key in SHORTCUTS.items():
        value = getattr(args, attr, None)
        if value is not None:
            flags[key] = value
    receivers = list(args.receiver or [])
    receivers += [list(ReceiverKind)[t - 1].value for t in args.theorem or []]
    if receivers:
        flags["run.receivers"] = ",".join(receivers)
    if args.command == "optimize-e" and "link.K" in flags:
        flags["run.K_range"] = flags.pop("link.K")
    sets = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigurationError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        sets[k.strip()] = v.strip()
    return layers + [flags, sets]


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        layers = _layers(args)
        if args.command == "optimize-e":
            # a single-user link is enough to validate the shared keys
            base = {"run.receivers": "mrc_perfect"}
            layers = [base] + layers
        cfg = RunConfig.resolve(*layers)
        if args.command == "moments":
            table = cmd_moments(cfg)
        elif args.command == "rate":
            table = cmd_rate(cfg)
        elif args.command == "montecarlo":
            table = cmd_montecarlo(cfg)
        elif args.command == "optimize-e":
            table = cmd_optimize_e(cfg, curve=args.curve)
        else:
            table = cmd_power_scaling(cfg)
        text = render(table, cfg, args.command, cfg["run.format"])
        dest = cfg["run.output"]
        if dest == "-":
            sys.stdout.write(text)
        else:
            with open(dest, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        print(f"condition estimate: {exc.condition:.3g}", file=sys.stderr)
        return EXIT_NUMERIC
    except InternalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
